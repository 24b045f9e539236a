#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvfmm/dataset.hpp"
#include "mvfmm/fitting.hpp"
#include "mvfmm/serialize.hpp"

namespace mvfmm::cli {

/// Pipeline configuration read from the JSON file given with --config.
struct RunConfig {
  PreprocessConfig preprocess;
  CurveSchema schema;
  ModelSpec model;
  FitOptions fit;
  std::string text;  ///< raw file contents, hashed into the manifest
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Files, seeds and timing of one invocation.
class Manifest {
 public:
  Manifest(std::string command, std::filesystem::path out_dir);

  void input(const std::filesystem::path& p) { inputs_.push_back(p.string()); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void hash(const std::string& text);
  /// Writes `content` atomically under the output directory and records it.
  void write(const std::string& name, const std::string& content);
  void finish() const;

 private:
  std::string command_;
  std::filesystem::path out_dir_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  Json seeds_ = Json::object();
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  double start_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string effects_csv(const FittedModel& model, const std::vector<double>& grid);
std::string scree_csv(const FittedModel& model);
std::string coefficients_csv(const FunctionalDataset& data);

/// Entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace mvfmm::cli
