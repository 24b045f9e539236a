#include "mvfmm/error.hpp"

namespace mvfmm {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Linkage: return "linkage error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Registration: return "registration error";
    case ErrorKind::Grouping: return "grouping error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Metric: return "metric error";
    case ErrorKind::Design: return "design error";
    case ErrorKind::Model: return "model error";
    case ErrorKind::Inference: return "inference error";
    case ErrorKind::Covariance: return "covariance error";
    case ErrorKind::Spec: return "spec error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Spec:
      return 2;
    case ErrorKind::Schema:
    case ErrorKind::Data:
    case ErrorKind::Linkage:
    case ErrorKind::Domain:
    case ErrorKind::Registration:
    case ErrorKind::Grouping:
    case ErrorKind::Shape:
      return 3;
    default:
      return 4;
  }
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + to_string(kind) + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

}  // namespace mvfmm
