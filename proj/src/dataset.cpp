#include "mvfmm/dataset.hpp"

#include <map>
#include <tuple>

#include "mvfmm/error.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "ingest";

using StrideKey = std::tuple<std::string, int, int>;

std::map<StrideKey, std::vector<const RawCurve*>> group_strides(const ParsedInput& input) {
  std::map<StrideKey, std::vector<const RawCurve*>> groups;
  for (const auto& c : input.curves) groups[{c.subject, static_cast<int>(c.side), c.stride}].push_back(&c);
  return groups;
}

const RawCurve* find_dimension(const std::vector<const RawCurve*>& curves, const std::string& label) {
  for (const auto* c : curves)
    if (c->dimension == label) return c;
  return nullptr;
}
}  // namespace

int FunctionalDataset::total_size() const {
  int m = 0;
  for (const auto& d : layout) m += d.basis.size();
  return m;
}

int FunctionalDataset::offset(std::size_t dimension) const {
  int m = 0;
  for (std::size_t i = 0; i < dimension; ++i) m += layout[i].basis.size();
  return m;
}

std::vector<int> FunctionalDataset::subject_groups(int* n_subjects) const {
  std::map<std::string, int> index;
  std::vector<int> groups;
  groups.reserve(keys.size());
  for (const auto& k : keys) {
    auto [it, inserted] = index.try_emplace(k.subject, static_cast<int>(index.size()));
    groups.push_back(it->second);
  }
  if (n_subjects) *n_subjects = static_cast<int>(index.size());
  return groups;
}

FunctionalDataset FunctionalDataset::subset(const std::vector<Eigen::Index>& indices) const {
  FunctionalDataset out;
  out.layout = layout;
  out.covariates = covariates;
  out.coefficients.resize(static_cast<Eigen::Index>(indices.size()), coefficients.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.coefficients.row(static_cast<Eigen::Index>(i)) = coefficients.row(indices[i]);
    out.keys.push_back(keys[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

double mean_landmark_time(const ParsedInput& input, const PreprocessConfig& config) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [key, curves] : group_strides(input)) {
    const RawCurve* lm = find_dimension(curves, config.landmark_dimension);
    if (!lm)
      throw Error(ErrorKind::Registration, kModule,
                  "landmark dimension '" + config.landmark_dimension + "' missing for subject '" +
                      std::get<0>(key) + "'");
    sum += landmark_time(time_normalize(*lm, config.domain_end));
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::Data, kModule, "no curves");
  return sum / count;
}

FunctionalDataset build_dataset(const ParsedInput& input, const PreprocessConfig& config) {
  if (config.dimensions.empty()) throw Error(ErrorKind::Config, kModule, "no dimensions configured");
  const std::vector<double> grid = uniform_grid(config.grid_points, config.domain_end);
  std::vector<LeastSquaresFitter> fitters;
  CoefficientSet stacked;
  for (const auto& d : config.dimensions) {
    if (d.basis.domain_end() != config.domain_end)
      throw Error(ErrorKind::Config, kModule, "basis domain for '" + d.label + "' differs from the time domain");
    fitters.emplace_back(d.basis, grid);
    stacked.layout.push_back({d.label, d.basis.size()});
  }

  double target = 0.0;
  if (config.register_landmark)
    target = config.target ? *config.target : mean_landmark_time(input, config);

  const auto groups = group_strides(input);
  stacked.values.resize(static_cast<Eigen::Index>(groups.size()), stacked.total_size());
  Eigen::Index row = 0;
  for (const auto& [key, curves] : groups) {
    std::vector<RawCurve> normalized;
    for (const auto& d : config.dimensions) {
      const RawCurve* c = find_dimension(curves, d.label);
      if (!c)
        throw Error(ErrorKind::Data, kModule,
                    "subject '" + std::get<0>(key) + "' stride " + std::to_string(std::get<2>(key)) +
                        " lacks dimension '" + d.label + "'");
      normalized.push_back(time_normalize(*c, config.domain_end));
    }
    if (config.register_landmark)
      normalized = landmark_register(normalized, config.landmark_dimension, target, config.domain_end);
    int offset = 0;
    for (std::size_t p = 0; p < normalized.size(); ++p) {
      const std::vector<double> values = resample_linear(normalized[p], grid);
      const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
      const int size = config.dimensions[p].basis.size();
      stacked.values.row(row).segment(offset, size) = fitters[p].fit(y).transpose();
      offset += size;
    }
    stacked.keys.push_back({std::get<0>(key), static_cast<Side>(std::get<1>(key)), std::get<2>(key)});
    ++row;
  }

  const CoefficientSet averaged = average_by_group(stacked);
  FunctionalDataset out;
  out.layout = config.dimensions;
  out.keys = averaged.keys;
  out.coefficients = averaged.values;
  out.covariates = input.covariates;
  return out;
}

}  // namespace mvfmm
