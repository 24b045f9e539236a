#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

#include "mvfmm/error.hpp"
#include "mvfmm/inference.hpp"
#include "mvfmm/io.hpp"
#include "mvfmm/parallel.hpp"
#include "mvfmm/sim.hpp"
#include "mvfmm/stats.hpp"
#include "mvfmm/unstructured.hpp"

namespace mvfmm::cli {

namespace fs = std::filesystem;

namespace {
constexpr const char* kModule = "cli";
constexpr const char* kVersion = "1.0.0";

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

Json read_json(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::Config, kModule, path.string() + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

std::uint64_t fnv1a(const std::string& text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig load_run_config(const fs::path& path) {
  const Json j = read_json(path);
  check_schema_version(j, "config");
  RunConfig c;
  c.text = io::read_file(path);
  try {
    for (const auto& d : j.at("dimensions"))
      c.preprocess.dimensions.push_back({d.at("label").get<std::string>(), basis_from_json(d.at("basis"))});
    c.preprocess.landmark_dimension = j.value("landmark_dimension", std::string());
    c.preprocess.register_landmark = j.value("register", true);
    if (j.contains("target")) c.preprocess.target = j.at("target").get<double>();
    c.preprocess.grid_points = j.value("grid_points", 101);
    c.preprocess.domain_end = j.value("domain_end", 100.0);
    if (c.preprocess.register_landmark && c.preprocess.landmark_dimension.empty())
      throw Error(ErrorKind::Config, kModule, "config: landmark_dimension is required when register is true");
    if (j.contains("columns")) {
      const Json& s = j.at("columns");
      c.schema.subject = s.value("subject", c.schema.subject);
      c.schema.side = s.value("side", c.schema.side);
      c.schema.dimension = s.value("dimension", c.schema.dimension);
      c.schema.stride = s.value("stride", c.schema.stride);
      c.schema.t = s.value("t", c.schema.t);
      c.schema.value = s.value("value", c.schema.value);
    }
    if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
    c.fit.fpca.pve_target = j.value("pve", 0.9999);
    c.fit.fpca.k_max = j.value("k_max", 0);
    c.fit.restore_mean_residual = j.value("restore_mean_residual", true);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, kModule, std::string("config: ") + e.what());
  }
  return c;
}

Manifest::Manifest(std::string command, fs::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), start_(now_seconds()) {}

void Manifest::hash(const std::string& text) { hash_ = fnv1a(text, hash_); }

void Manifest::write(const std::string& name, const std::string& content) {
  const fs::path p = out_dir_ / name;
  io::write_file_atomic(p, content);
  outputs_.push_back(p.string());
}

void Manifest::finish() const {
  std::vector<std::string> outputs = outputs_;
  outputs.push_back((out_dir_ / "manifest.json").string());
  const Json j{{"schema_version", kSchemaVersion},
               {"command", command_},
               {"version", kVersion},
               {"config_hash", hex(hash_)},
               {"seeds", seeds_},
               {"inputs", inputs_},
               {"outputs", outputs},
               {"wall_time_seconds", now_seconds() - start_}};
  io::write_file_atomic(out_dir_ / "manifest.json", dump(j));
}

std::string effects_csv(const FittedModel& model, const std::vector<double>& grid) {
  std::ostringstream out;
  out << "effect,dimension,t,value\n";
  for (int a = 0; a < model.n_effects(); ++a) {
    const auto curves = effect_function(model, a, grid);
    for (std::size_t p = 0; p < curves.size(); ++p)
      for (std::size_t i = 0; i < grid.size(); ++i)
        out << model.coding.column_names[static_cast<std::size_t>(a)] << ',' << model.basis.layout[p].label << ','
            << io::format_double(grid[i]) << ',' << io::format_double(curves[p][static_cast<Eigen::Index>(i)])
            << '\n';
  }
  return out.str();
}

std::string scree_csv(const FittedModel& model) {
  std::ostringstream out;
  out << "k,eigenvalue,cumulative_pve,retained\n";
  for (const auto& r : scree_report(model.basis))
    out << r.k << ',' << io::format_double(r.eigenvalue) << ',' << io::format_double(r.cumulative_pve) << ','
        << (r.k <= model.n_components() ? 1 : 0) << '\n';
  return out.str();
}

std::string coefficients_csv(const FunctionalDataset& data) {
  std::ostringstream out;
  out << "subject,side";
  for (const auto& d : data.layout)
    for (int m = 0; m < d.basis.size(); ++m) out << ',' << d.label << ':' << m + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const auto& key = data.keys[static_cast<std::size_t>(i)];
    out << key.subject << ',' << to_string(key.side);
    for (Eigen::Index m = 0; m < data.coefficients.cols(); ++m)
      out << ',' << io::format_double(data.coefficients(i, m));
    out << '\n';
  }
  return out.str();
}

namespace {

struct DataArgs {
  std::string curves;
  std::string covariates;
  std::string config;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--curves", args.curves, "Long-format curve CSV")->required();
  cmd->add_option("--covariates", args.covariates, "Covariate CSV keyed by subject")->required();
  cmd->add_option("--config", args.config, "Pipeline configuration JSON")->required();
}

FunctionalDataset load_dataset(const DataArgs& args, const RunConfig& config, Manifest& manifest) {
  manifest.input(args.curves);
  manifest.input(args.covariates);
  manifest.input(args.config);
  manifest.hash(config.text);
  const ParsedInput input = parse_long_csv(args.curves, args.covariates, config.schema);
  return build_dataset(input, config.preprocess);
}

std::vector<double> model_grid(const RunConfig& config) {
  return uniform_grid(config.preprocess.grid_points, config.preprocess.domain_end);
}

std::vector<double> default_grid(const FittedModel& model) {
  const double end = model.basis.layout.empty() ? 100.0 : model.basis.layout.front().basis.domain_end();
  return uniform_grid(101, end);
}

std::string model_surfaces_csv(const FittedModel& model, const std::vector<double>& grid) {
  const CovarianceSurface q = reconstruct_q(model, grid);
  const CovarianceSurface s = reconstruct_s(model, grid);
  return surfaces_csv({{"Q", &q}, {"S", &s}});
}

void cmd_fit(const DataArgs& args, const std::string& out, std::optional<double> pve) {
  Manifest manifest("fit", out);
  RunConfig config = load_run_config(args.config);
  if (pve) config.fit.fpca.pve_target = *pve;
  manifest.hash("pve=" + io::format_double(config.fit.fpca.pve_target));
  const FunctionalDataset data = load_dataset(args, config, manifest);
  const FittedModel model = fit_model(data, config.model, config.fit);
  const auto grid = model_grid(config);
  manifest.write("model.json", dump(to_json(model)));
  manifest.write("effects.csv", effects_csv(model, grid));
  manifest.write("surfaces.csv", model_surfaces_csv(model, grid));
  manifest.write("scree.csv", scree_csv(model));
  manifest.write("coefficients.csv", coefficients_csv(data));
  Json boundary = Json::array();
  for (const auto& r : model.reports)
    if (r.boundary) boundary.push_back(r.k + 1);
  manifest.write("icc.json", dump({{"icc", model.icc},
                                   {"sum_q", model.qstar.sum()},
                                   {"sum_s", model.sstar.sum()},
                                   {"components", model.n_components()},
                                   {"boundary_components", boundary}}));
  manifest.finish();
  std::cout << "fitted " << model.n_components() << " components on " << data.rows() << " curves; ICC "
            << model.icc << '\n';
}

void cmd_export(const std::string& model_path, const std::string& out) {
  Manifest manifest("export", out);
  manifest.input(model_path);
  const std::string text = io::read_file(model_path);
  manifest.hash(text);
  const FittedModel model = fitted_model_from_json(read_json(model_path));
  const auto grid = default_grid(model);
  manifest.write("effects.csv", effects_csv(model, grid));
  manifest.write("surfaces.csv", model_surfaces_csv(model, grid));
  manifest.write("scree.csv", scree_csv(model));
  manifest.finish();
}

struct BandArgs {
  std::string method = "bootstrap";
  int B = 1000;
  int R = 10000;
  double level = 0.95;
  std::uint64_t seed = 1;
};

void cmd_bands(const std::string& model_path, const DataArgs& args, const BandArgs& b, const std::string& out) {
  if (b.method != "wald" && b.method != "bootstrap")
    throw Error(ErrorKind::Config, kModule, "--method must be wald or bootstrap");
  if (b.method == "bootstrap" && b.B < 2) throw Error(ErrorKind::Config, kModule, "--B must be at least 2");
  if (b.R < 1) throw Error(ErrorKind::Config, kModule, "--R must be positive");
  Manifest manifest("bands", out);
  manifest.input(model_path);
  manifest.hash(io::read_file(model_path));
  manifest.hash(b.method + ' ' + std::to_string(b.B) + ' ' + std::to_string(b.R) + ' ' + io::format_double(b.level));
  manifest.seed("seed", b.seed);
  const FittedModel model = fitted_model_from_json(read_json(model_path));
  const RunConfig config = load_run_config(args.config);
  const FunctionalDataset data = load_dataset(args, config, manifest);
  const auto grid = model_grid(config);

  std::vector<Band> bands;
  std::optional<BootstrapResult> boot;
  if (b.method == "bootstrap") {
    BootstrapOptions bo;
    bo.replicates = b.B;
    bo.seed = b.seed;
    bo.reml = config.fit.reml;
    boot = bootstrap_of_subjects(data, model, bo);
  }
  auto draw_stream = make_stream(b.seed, 0, 0xd4a3);
  for (int a = 0; a < model.n_effects(); ++a) {
    const Eigen::MatrixXd cov = boot ? boot->covariance[static_cast<std::size_t>(a)] : wald_covariance(model, a);
    bands.push_back(boot ? pointwise_band(model, a, grid, cov, b.level, BandKind::PointwiseBoot)
                         : wald_pointwise(model, a, grid, b.level));
    SimultaneousOptions so;
    so.draws = b.R;
    so.level = b.level;
    so.seed = draw_stream();
    bands.push_back(simultaneous_band(model, a, grid, cov, so));
  }
  manifest.write("bands.csv", bands_csv(bands, model.coding.column_names));
  if (boot) {
    Json summary = to_json(*boot);
    const auto [lo, hi] = icc_interval(
        std::span<const double>(boot->icc_samples.data(), static_cast<std::size_t>(boot->icc_samples.size())),
        b.level);
    summary["icc"] = model.icc;
    summary["icc_interval"] = {lo, hi};
    summary["level"] = b.level;
    manifest.write("bootstrap.json", dump(summary));
  }
  manifest.finish();
}

struct SimArgs {
  std::vector<std::string> configs;
  std::vector<int> scenarios{1, 2};
  int reps = 200;
  int B = 200;
  int R = 2000;
  std::uint64_t seed = 20240611;
  bool full_scale = false;
  bool no_inference = false;
};

void cmd_simulate(const SimArgs& s, const CLI::App& cmd, const std::string& out) {
  sim::StudyOptions opts = s.full_scale ? sim::StudyOptions::full_scale() : sim::StudyOptions::reduced();
  if (!s.full_scale || cmd.count("--reps")) opts.replicates = s.reps;
  if (!s.full_scale || cmd.count("--B")) opts.bootstrap = s.B;
  if (!s.full_scale || cmd.count("--R")) opts.draws = s.R;
  opts.inference = !s.no_inference;

  Manifest manifest("simulate", out);
  std::vector<sim::ScenarioConfig> configs;
  if (!s.configs.empty()) {
    for (const auto& path : s.configs) {
      manifest.input(path);
      manifest.hash(io::read_file(path));
      configs.push_back(scenario_from_json(read_json(path)));
      if (cmd.count("--seed")) configs.back().seed = s.seed;
    }
  } else {
    for (int sc : s.scenarios) {
      sim::ScenarioConfig c;
      c.scenario = sc;
      c.seed = s.seed;
      configs.push_back(c);
    }
  }
  manifest.hash(std::to_string(opts.replicates) + ' ' + std::to_string(opts.bootstrap) + ' ' +
                std::to_string(opts.draws) + (opts.inference ? " inference" : ""));

  std::vector<sim::StudyResult> results;
  Json summary{{"schema_version", kSchemaVersion},
               {"replicates", opts.replicates},
               {"bootstrap", opts.bootstrap},
               {"draws", opts.draws},
               {"level", opts.level},
               {"scenarios", Json::array()}};
  for (const auto& c : configs) {
    manifest.seed("scenario" + std::to_string(c.scenario), c.seed);
    results.push_back(sim::run_study(c, opts));
    const auto& r = results.back();
    const auto icc = r.icc_values();
    Json js{{"scenario", c.scenario},
            {"config", to_json(c)},
            {"successes", r.successes()},
            {"failures", r.failures()},
            {"true_icc", r.true_icc},
            {"icc_mean", icc.empty() ? 0.0 : mean(icc)},
            {"icc_sd", icc.size() > 1 ? sample_sd(icc) : 0.0},
            {"median_ise_q_model", median(r.metric(&sim::ReplicateResult::ise_q_model))},
            {"median_ise_q_unstructured", median(r.metric(&sim::ReplicateResult::ise_q_unstructured))},
            {"median_ise_s_model", median(r.metric(&sim::ReplicateResult::ise_s_model))},
            {"median_ise_s_unstructured", median(r.metric(&sim::ReplicateResult::ise_s_unstructured))}};
    if (opts.inference) js["icc_interval_coverage"] = r.icc_coverage();
    Json errors = Json::array();
    for (const auto& rep : r.replicates)
      if (!rep.ok && errors.size() < 5) errors.push_back(rep.error);
    js["errors"] = errors;
    summary["scenarios"].push_back(js);
    std::cout << "scenario " << c.scenario << ": " << r.successes() << '/' << opts.replicates << " replicates\n";
  }
  std::vector<const sim::StudyResult*> ptrs;
  for (const auto& r : results) ptrs.push_back(&r);
  if (opts.inference) {
    manifest.write("coverage_table.csv", sim::coverage_table_csv(sim::coverage_table(ptrs)));
    manifest.write("coverage_profile.csv", sim::coverage_profile_csv(ptrs));
  }
  manifest.write("ise.csv", sim::ise_csv(ptrs));
  manifest.write("icc.csv", sim::icc_csv(ptrs));
  manifest.write("summary.json", dump(summary));
  manifest.finish();
}

void cmd_unstructured(const std::string& model_path, const DataArgs& args, const std::string& out) {
  Manifest manifest("unstructured", out);
  manifest.input(model_path);
  manifest.hash(io::read_file(model_path));
  const FittedModel model = fitted_model_from_json(read_json(model_path));
  const RunConfig config = load_run_config(args.config);
  const FunctionalDataset data = load_dataset(args, config, manifest);
  const auto grid = model_grid(config);
  const UnstructuredCov un = unstructured_fit(model, data);
  const CovarianceSurface uq = surface(un, SurfaceKind::Q, grid);
  const CovarianceSurface us = surface(un, SurfaceKind::S, grid);
  const CovarianceSurface mq = reconstruct_q(model, grid);
  const CovarianceSurface ms = reconstruct_s(model, grid);
  manifest.write("unstructured_surfaces.csv", surfaces_csv({{"Q", &uq}, {"S", &us}}));
  manifest.write("comparison.json", dump({{"ise_q_model_vs_unstructured", cov_ise(mq, uq)},
                                          {"ise_s_model_vs_unstructured", cov_ise(ms, us)},
                                          {"q_min_eigenvalue", un.q_min_eigenvalue},
                                          {"s_min_eigenvalue", un.s_min_eigenvalue}}));
  manifest.finish();
}

struct GenerateArgs {
  int subjects = 8;
  int strides = 2;
  std::uint64_t seed = 7;
  double noise = 0.3;
};

// Raw-time curves with per-stride duration and landmark jitter.
void cmd_generate(const GenerateArgs& g, const std::string& out) {
  if (g.subjects < 2 || g.strides < 1) throw Error(ErrorKind::Config, kModule, "need >= 2 subjects and >= 1 stride");
  Manifest manifest("generate", out);
  manifest.seed("seed", g.seed);
  sim::ScenarioConfig c;
  c.subjects = g.subjects;
  c.seed = g.seed;
  const sim::Truth truth = sim::build_truth(c);
  const sim::SimulatedData simd = sim::generate_dataset(truth, 0);
  const auto grid = truth.grid;
  auto rng = make_stream(g.seed, 1, 0x6e6e);
  std::normal_distribution<double> noise(0.0, g.noise);
  std::uniform_real_distribution<double> duration(0.95, 1.25), shift(-4.0, 4.0);

  std::ostringstream curves;
  curves << "subject,side,dimension,stride,t,value\n";
  for (Eigen::Index r = 0; r < simd.data.rows(); ++r) {
    const auto& key = simd.data.keys[static_cast<std::size_t>(r)];
    const auto dims = evaluate_coefficients(simd.data.layout, simd.data.coefficients.row(r).transpose(), grid);
    for (int s = 1; s <= g.strides; ++s) {
      const double d = duration(rng);
      const LandmarkWarp warp{50.0 + shift(rng), 50.0, 100.0};
      std::vector<std::vector<double>> values(dims.size());
      for (std::size_t p = 0; p < dims.size(); ++p) {
        const RawCurve base{key.subject, key.side, truth.config.dimensions[p], s, {}};
        RawCurve src = base;
        for (std::size_t i = 0; i < grid.size(); ++i)
          src.samples.push_back({grid[i], dims[p][static_cast<Eigen::Index>(i)]});
        std::vector<double> at(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) at[i] = warp.forward(grid[i]);
        values[p] = resample_linear(src, at);
      }
      for (std::size_t p = 0; p < dims.size(); ++p)
        for (std::size_t i = 0; i < grid.size(); ++i)
          curves << key.subject << ',' << to_string(key.side) << ',' << truth.config.dimensions[p] << ',' << s << ','
                 << io::format_double(d * grid[i] / 100.0) << ',' << io::format_double(values[p][i] + noise(rng))
                 << '\n';
    }
  }
  std::ostringstream covs;
  covs << "subject,sex,speed\n";
  for (const auto& key : simd.data.keys) {
    if (key.side != Side::Left) continue;
    covs << key.subject << ',' << io::format_double(simd.data.covariates.value(key.subject, key.side, "sex")) << ','
         << io::format_double(simd.data.covariates.value(key.subject, key.side, "speed")) << '\n';
  }
  manifest.write("curves.csv", curves.str());
  manifest.write("covariates.csv", covs.str());
  manifest.finish();
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Multivariate functional mixed models via FPC basis scores"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: MVFMM_THREADS or all cores)");

  std::string out = "out";
  DataArgs data;
  std::string model_path;

  auto* fit = app.add_subcommand("fit", "Fit the model and export effects, surfaces, scree table and ICC");
  add_data_options(fit, data);
  std::optional<double> pve;
  fit->add_option("--pve", pve, "Override the variance-explained threshold");
  fit->add_option("--out", out, "Output directory");

  auto* exp = app.add_subcommand("export", "Re-export effects and surfaces from a saved model");
  exp->add_option("--model", model_path, "model.json from fit")->required();
  exp->add_option("--out", out, "Output directory");

  BandArgs band_args;
  DataArgs band_data;
  std::string band_model;
  auto* bands = app.add_subcommand("bands", "Pointwise and simultaneous confidence bands");
  bands->add_option("--model", band_model, "model.json from fit")->required();
  add_data_options(bands, band_data);
  bands->add_option("--method", band_args.method, "wald or bootstrap")->check(CLI::IsMember({"wald", "bootstrap"}));
  bands->add_option("--B", band_args.B, "Bootstrap replicates");
  bands->add_option("--R", band_args.R, "Gaussian draws for the simultaneous band");
  bands->add_option("--level", band_args.level, "Confidence level");
  bands->add_option("--seed", band_args.seed, "Random seed");
  bands->add_option("--out", out, "Output directory");

  SimArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run the two-scenario simulation study");
  simulate->add_option("--scenario-config", sim_args.configs, "Scenario JSON (repeatable)");
  simulate->add_option("--scenarios", sim_args.scenarios, "Built-in scenarios to run")->delimiter(',');
  simulate->add_option("--reps", sim_args.reps, "Replicates per scenario");
  simulate->add_option("--B", sim_args.B, "Bootstrap replicates");
  simulate->add_option("--R", sim_args.R, "Gaussian draws");
  simulate->add_option("--seed", sim_args.seed, "Base seed");
  simulate->add_flag("--full-scale", sim_args.full_scale, "500 replicates, B = 1000, R = 10000");
  simulate->add_flag("--no-inference", sim_args.no_inference, "Skip bands and bootstrap");
  simulate->add_option("--out", out, "Output directory");

  DataArgs un_data;
  std::string un_model;
  auto* unstr = app.add_subcommand("unstructured", "Method-of-moments Q and S and comparison with the model");
  unstr->add_option("--model", un_model, "model.json from fit")->required();
  add_data_options(unstr, un_data);
  unstr->add_option("--out", out, "Output directory");

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand("generate", "Write a small synthetic raw-curve dataset");
  gen->add_option("--subjects", gen_args.subjects, "Subjects");
  gen->add_option("--strides", gen_args.strides, "Strides per subject and side");
  gen->add_option("--seed", gen_args.seed, "Random seed");
  gen->add_option("--noise", gen_args.noise, "Measurement noise SD");
  gen->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_default_threads(threads);
    if (*fit) cmd_fit(data, out, pve);
    if (*exp) cmd_export(model_path, out);
    if (*bands) cmd_bands(band_model, band_data, band_args, out);
    if (*simulate) cmd_simulate(sim_args, *simulate, out);
    if (*unstr) cmd_unstructured(un_model, un_data, out);
    if (*gen) cmd_generate(gen_args, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

}  // namespace mvfmm::cli
