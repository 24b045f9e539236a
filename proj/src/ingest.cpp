#include "mvfmm/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <tuple>

#include "mvfmm/error.hpp"
#include "mvfmm/io.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "ingest";
}

const char* to_string(Side side) noexcept { return side == Side::Left ? "left" : "right"; }

Side parse_side(std::string_view text) {
  std::string lower;
  for (char ch : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (lower == "left" || lower == "l") return Side::Left;
  if (lower == "right" || lower == "r") return Side::Right;
  throw Error(ErrorKind::Data, kModule, "unknown side '" + std::string(text) + "'");
}

std::vector<double> uniform_grid(int points, double domain_end) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[i] = domain_end * i / (points - 1);
  return grid;
}

CovariateTable::CovariateTable(std::vector<std::string> names) : names_(std::move(names)) {}

void CovariateTable::set(const std::string& subject, std::optional<Side> side,
                         std::vector<double> values) {
  if (values.size() != names_.size())
    throw Error(ErrorKind::Shape, kModule, "covariate row for '" + subject + "' has wrong width");
  rows_[{subject, side ? static_cast<int>(*side) : -1}] = std::move(values);
}

bool CovariateTable::contains(const std::string& subject, Side side) const {
  return rows_.count({subject, static_cast<int>(side)}) || rows_.count({subject, -1});
}

const std::vector<double>& CovariateTable::row(const std::string& subject, Side side) const {
  if (auto it = rows_.find({subject, static_cast<int>(side)}); it != rows_.end()) return it->second;
  if (auto it = rows_.find({subject, -1}); it != rows_.end()) return it->second;
  throw Error(ErrorKind::Linkage, kModule,
              "subject '" + subject + "' (" + to_string(side) + ") has no covariate row");
}

int CovariateTable::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

double CovariateTable::value(const std::string& subject, Side side, const std::string& name) const {
  const int idx = index_of(name);
  if (idx < 0) throw Error(ErrorKind::Spec, kModule, "unknown covariate '" + name + "'");
  return row(subject, side)[idx];
}

CovariateTable parse_covariates_csv(const std::filesystem::path& path,
                                    const std::string& subject_column) {
  const io::CsvTable table = io::read_csv(path);
  if (table.header.empty()) throw Error(ErrorKind::Schema, kModule, "covariate file is empty");
  const int subj = table.column(subject_column);
  if (subj < 0)
    throw Error(ErrorKind::Schema, kModule, "covariate file missing column '" + subject_column + "'");
  const int side_col = table.column("side");
  std::vector<std::string> names;
  std::vector<int> cols;
  for (int j = 0; j < static_cast<int>(table.header.size()); ++j) {
    if (j == subj || j == side_col) continue;
    names.push_back(table.header[j]);
    cols.push_back(j);
  }
  CovariateTable out(names);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size())
      throw Error(ErrorKind::Data, kModule,
                  "covariate row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                      " fields, expected " + std::to_string(table.header.size()));
    std::vector<double> values;
    for (int j : cols) {
      if (row[j].empty())
        throw Error(ErrorKind::Data, kModule,
                    "missing value for '" + table.header[j] + "' at covariate row " + std::to_string(r + 1));
      values.push_back(io::parse_double(row[j]));
    }
    std::optional<Side> side;
    if (side_col >= 0 && !row[side_col].empty()) side = parse_side(row[side_col]);
    out.set(row[subj], side, std::move(values));
  }
  return out;
}

ParsedInput parse_long_csv(const std::filesystem::path& curves_path,
                           const std::filesystem::path& covariates_path, const CurveSchema& schema) {
  if (!std::filesystem::exists(covariates_path))
    throw Error(ErrorKind::Linkage, kModule, "covariate file '" + covariates_path.string() + "' not found");
  const io::CsvTable table = io::read_csv(curves_path);
  if (table.header.empty()) throw Error(ErrorKind::Schema, kModule, "curve file is empty");

  auto require = [&](const std::string& name) {
    const int idx = table.column(name);
    if (idx < 0) throw Error(ErrorKind::Schema, kModule, "curve file missing column '" + name + "'");
    return idx;
  };
  const int c_subject = require(schema.subject);
  const int c_side = require(schema.side);
  const int c_dim = require(schema.dimension);
  const int c_t = require(schema.t);
  const int c_value = require(schema.value);
  const int c_stride = table.column(schema.stride);

  using Key = std::tuple<std::string, int, std::string, int>;
  std::map<Key, RawCurve> curves;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string row_label = "row " + std::to_string(r + 1);
    if (row.size() != table.header.size())
      throw Error(ErrorKind::Data, kModule, row_label + " has the wrong number of fields");
    const Side side = parse_side(row[c_side]);
    const int stride = c_stride >= 0 ? io::parse_int(row[c_stride]) : 0;
    Key key{row[c_subject], static_cast<int>(side), row[c_dim], stride};
    auto [it, inserted] = curves.try_emplace(key);
    RawCurve& curve = it->second;
    if (inserted) {
      curve.subject = row[c_subject];
      curve.side = side;
      curve.dimension = row[c_dim];
      curve.stride = stride;
    }
    const double t = io::parse_double(row[c_t]);
    const double v = io::parse_double(row[c_value]);
    if (!std::isfinite(t) || !std::isfinite(v))
      throw Error(ErrorKind::Data, kModule, "non-finite value at " + row_label);
    if (!curve.samples.empty() && !(t > curve.samples.back().t))
      throw Error(ErrorKind::Data, kModule,
                  "time not strictly increasing at " + row_label + " (subject '" + curve.subject +
                      "', dimension '" + curve.dimension + "')");
    curve.samples.push_back({t, v});
  }

  ParsedInput out;
  out.covariates = parse_covariates_csv(covariates_path, schema.subject);
  out.curves.reserve(curves.size());
  for (auto& [key, curve] : curves) {
    if (curve.samples.size() < 2)
      throw Error(ErrorKind::Data, kModule,
                  "curve for subject '" + curve.subject + "' dimension '" + curve.dimension +
                      "' has fewer than 2 samples");
    if (!out.covariates.contains(curve.subject, curve.side))
      throw Error(ErrorKind::Linkage, kModule,
                  "subject '" + curve.subject + "' appears in curves but not in covariates");
    out.curves.push_back(std::move(curve));
  }
  return out;
}

RawCurve time_normalize(const RawCurve& curve, double domain_end) {
  if (curve.samples.size() < 2)
    throw Error(ErrorKind::Domain, kModule, "degenerate domain: curve needs at least 2 samples");
  const double t0 = curve.samples.front().t;
  const double t1 = curve.samples.back().t;
  if (!(t1 > t0)) throw Error(ErrorKind::Domain, kModule, "degenerate domain: zero time span");
  RawCurve out = curve;
  const double scale = domain_end / (t1 - t0);
  for (auto& s : out.samples) s.t = (s.t - t0) * scale;
  out.samples.front().t = 0.0;
  out.samples.back().t = domain_end;
  return out;
}

double landmark_time(const RawCurve& curve) {
  if (curve.samples.empty()) throw Error(ErrorKind::Data, kModule, "empty curve");
  auto best = curve.samples.begin();
  for (auto it = curve.samples.begin(); it != curve.samples.end(); ++it)
    if (it->value > best->value) best = it;
  return best->t;
}

double LandmarkWarp::forward(double t) const {
  if (t <= landmark) return t * target / landmark;
  return target + (t - landmark) * (domain_end - target) / (domain_end - landmark);
}

double LandmarkWarp::inverse(double s) const {
  if (s <= target) return s * landmark / target;
  return landmark + (s - target) * (domain_end - landmark) / (domain_end - target);
}

namespace {

double interpolate(const std::vector<Sample>& samples, double t) {
  if (t <= samples.front().t) return samples.front().value;
  if (t >= samples.back().t) return samples.back().value;
  auto hi = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const Sample& s, double x) { return s.t < x; });
  if (hi->t == t) return hi->value;
  auto lo = hi - 1;
  const double w = (t - lo->t) / (hi->t - lo->t);
  return lo->value + w * (hi->value - lo->value);
}

}  // namespace

std::vector<double> resample_linear(const RawCurve& curve, const std::vector<double>& grid) {
  if (curve.samples.size() < 2) throw Error(ErrorKind::Domain, kModule, "cannot resample a single sample");
  const double lo = curve.samples.front().t;
  const double hi = curve.samples.back().t;
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) {
    if (t < lo - 1e-9 || t > hi + 1e-9)
      throw Error(ErrorKind::Domain, kModule, "resampling grid leaves the curve's time range");
    out.push_back(interpolate(curve.samples, t));
  }
  return out;
}

std::vector<RawCurve> landmark_register(const std::vector<RawCurve>& curves,
                                        const std::string& landmark_dim, double target,
                                        double domain_end) {
  auto it = std::find_if(curves.begin(), curves.end(),
                         [&](const RawCurve& c) { return c.dimension == landmark_dim; });
  if (it == curves.end())
    throw Error(ErrorKind::Registration, kModule, "landmark dimension '" + landmark_dim + "' not present");
  if (!(target > 0.0 && target < domain_end))
    throw Error(ErrorKind::Config, kModule, "registration target must lie inside (0, T)");
  const double tau = landmark_time(*it);
  if (tau <= 0.0 || tau >= domain_end)
    throw Error(ErrorKind::Registration, kModule,
                "landmark at the domain boundary for subject '" + it->subject + "'; warp is degenerate");
  const LandmarkWarp warp{tau, target, domain_end};

  std::vector<RawCurve> out;
  out.reserve(curves.size());
  for (const auto& curve : curves) {
    RawCurve reg = curve;
    for (auto& s : reg.samples) s.value = interpolate(curve.samples, warp.inverse(s.t));
    out.push_back(std::move(reg));
  }
  return out;
}

}  // namespace mvfmm
