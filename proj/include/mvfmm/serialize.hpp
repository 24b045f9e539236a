#pragma once

#include <json.hpp>

#include "mvfmm/basis.hpp"
#include "mvfmm/fitting.hpp"
#include "mvfmm/inference.hpp"
#include "mvfmm/mvfpca.hpp"
#include "mvfmm/sim.hpp"

namespace mvfmm {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const Eigen::MatrixXd& m);
Json to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const Json& j);
Eigen::VectorXd vector_from_json(const Json& j);

Json to_json(const BasisSystem& basis);
BasisSystem basis_from_json(const Json& j);

Json to_json(const std::vector<DimensionBasis>& layout);
std::vector<DimensionBasis> layout_from_json(const Json& j);

Json to_json(const MvFpcBasis& basis);
MvFpcBasis mvfpc_basis_from_json(const Json& j);

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

/// Complete model, including the basis and the resolved design coding.
Json to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const Json& j);

Json to_json(const BootstrapResult& boot);

/// Unknown keys are rejected so typos surface as configuration errors.
sim::ScenarioConfig scenario_from_json(const Json& j);
Json to_json(const sim::ScenarioConfig& config);

/// Checks `schema_version` when present.
void check_schema_version(const Json& j, const char* what);

}  // namespace mvfmm
