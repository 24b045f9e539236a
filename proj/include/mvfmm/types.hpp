#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mvfmm {

enum class Side { Left, Right };

const char* to_string(Side side) noexcept;

/// Accepts left/right and L/R in any case.
Side parse_side(std::string_view text);

/// The common evaluation grid t = 0, 1, ..., n-1 scaled onto [0, domain_end].
std::vector<double> uniform_grid(int points = 101, double domain_end = 100.0);

}  // namespace mvfmm
