#pragma once

#include <stdexcept>
#include <string>

namespace mvfmm {

enum class ErrorKind {
  Schema,
  Data,
  Linkage,
  Config,
  Domain,
  Registration,
  Grouping,
  Shape,
  Numerical,
  Metric,
  Design,
  Model,
  Inference,
  Covariance,
  Spec,
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
int exit_code(ErrorKind kind) noexcept;

/// Every library failure carries the module that raised it and a kind
/// that the CLI maps onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace mvfmm
