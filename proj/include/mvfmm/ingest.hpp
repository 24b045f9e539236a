#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvfmm/types.hpp"

namespace mvfmm {

struct Sample {
  double t;
  double value;
};

/// One dimension of one stride of one (subject, side).
struct RawCurve {
  std::string subject;
  Side side = Side::Left;
  std::string dimension;
  int stride = 0;
  std::vector<Sample> samples;
};

/// Covariate rows keyed by subject, optionally refined by side. A
/// side-specific row takes precedence over the subject-level row.
class CovariateTable {
 public:
  CovariateTable() = default;
  explicit CovariateTable(std::vector<std::string> names);

  const std::vector<std::string>& names() const noexcept { return names_; }
  void set(const std::string& subject, std::optional<Side> side, std::vector<double> values);
  bool contains(const std::string& subject, Side side) const;
  /// Full value row for (subject, side); throws a linkage error if absent.
  const std::vector<double>& row(const std::string& subject, Side side) const;
  double value(const std::string& subject, Side side, const std::string& name) const;
  int index_of(const std::string& name) const;
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> names_;
  std::map<std::pair<std::string, int>, std::vector<double>> rows_;  // side -1 = any
};

/// Column names for the long curve file; defaults match the documented format.
struct CurveSchema {
  std::string subject = "subject";
  std::string side = "side";
  std::string dimension = "dimension";
  std::string stride = "stride";
  std::string t = "t";
  std::string value = "value";
};

struct ParsedInput {
  std::vector<RawCurve> curves;
  CovariateTable covariates;
};

/// Reads the long curve file and the covariate file. Curves come back
/// ordered by (subject, side, dimension, stride); samples keep file order
/// and must be strictly increasing in t.
ParsedInput parse_long_csv(const std::filesystem::path& curves_path,
                           const std::filesystem::path& covariates_path,
                           const CurveSchema& schema = {});

CovariateTable parse_covariates_csv(const std::filesystem::path& path,
                                    const std::string& subject_column = "subject");

/// Affine map of the time axis onto [0, domain_end].
RawCurve time_normalize(const RawCurve& curve, double domain_end = 100.0);

/// Location of the global maximum over the sample grid; ties go to the
/// earliest time.
double landmark_time(const RawCurve& curve);

/// Piecewise-linear warp h with h(0)=0, h(landmark)=target, h(T)=T.
struct LandmarkWarp {
  double landmark;
  double target;
  double domain_end = 100.0;

  double forward(double t) const;
  double inverse(double s) const;
};

/// Registers all dimensions of one (subject, side, stride) to the landmark
/// of `landmark_dim` with one shared warp. Values are resampled onto each
/// curve's original time grid by linear interpolation.
std::vector<RawCurve> landmark_register(const std::vector<RawCurve>& curves,
                                        const std::string& landmark_dim, double target,
                                        double domain_end = 100.0);

/// Linear interpolation of a curve onto `grid`; the grid must lie inside
/// the curve's time range.
std::vector<double> resample_linear(const RawCurve& curve, const std::vector<double>& grid);

}  // namespace mvfmm
