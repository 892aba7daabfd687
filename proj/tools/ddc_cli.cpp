#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "ddc/bench.hpp"
#include "ddc/dp_solver.hpp"
#include "ddc/engines.hpp"
#include "ddc/estimator.hpp"
#include "ddc/first_stage.hpp"
#include "ddc/model.hpp"
#include "ddc/panel.hpp"
#include "ddc/paths.hpp"

#ifndef DDC_PRESET_DIR
#define DDC_PRESET_DIR "presets"
#endif

namespace {

using namespace ddc;

std::string preset_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DDC_PRESETS")) return env;
  return DDC_PRESET_DIR;
}

struct EngineFlags {
  std::string engine = "ccs";
  double alpha = 0.5;
  std::size_t n_step = 1;
  std::size_t sweeps = 1;
  bool harmonic = false;

  void attach(CLI::App* app) {
    app->add_option("--engine", engine, "ccs, rlmc or rltd")->check(CLI::IsMember({"ccs", "rlmc", "rltd"}));
    app->add_option("--alpha", alpha, "RLTD learning rate");
    app->add_option("--n-step", n_step, "RLTD look-ahead");
    app->add_option("--sweeps", sweeps, "RLTD passes over the path set");
    app->add_flag("--harmonic", harmonic, "RLTD with 1/visits learning rate");
  }

  EngineConfig config() const {
    EngineConfig c;
    c.kind = parse_engine_kind(engine);
    c.alpha = alpha;
    c.n_step = n_step;
    c.sweeps = sweeps;
    if (harmonic) c.rate = LearningRate::Harmonic;
    return c;
  }
};

void check_paths_match(const PathSet& paths, const FirstStage& fs) {
  if (!std::equal(paths.first_stage_hash.begin(), paths.first_stage_hash.end(),
                  fs.fingerprint().begin()))
    throw ArgumentError("path set was simulated from a different first stage");
}

int run(int argc, char** argv) {
  CLI::App app{"Dynamic discrete choice estimation by forward simulation"};
  app.require_subcommand(1);

  // solve-dp
  std::string model_cfg, out;
  bool euler = false;
  double tolerance = 1e-10;
  auto* solve = app.add_subcommand("solve-dp", "Solve the value fixed point at the model's theta");
  solve->add_option("--model-config", model_cfg)->required()->check(CLI::ExistingFile);
  solve->add_option("--out", out, "CSV (state, action, value, ccp)")->required();
  solve->add_option("--tolerance", tolerance);
  solve->add_flag("--euler", euler, "include gamma in the continuation term");

  // generate-data
  std::size_t agents = 0, periods = 0;
  std::uint64_t seed = 1;
  std::string initial = "0";
  auto* gen = app.add_subcommand("generate-data", "Simulate a panel under the model's CCPs");
  gen->add_option("--model-config", model_cfg)->required()->check(CLI::ExistingFile);
  gen->add_option("--agents", agents)->required();
  gen->add_option("--periods", periods)->required();
  gen->add_option("--seed", seed);
  gen->add_option("--initial-state", initial, "state index or `uniform`");
  gen->add_option("--out", out, "panel CSV; metadata goes to <out>.meta")->required();

  // estimate-first-stage
  std::string panel_file;
  double floor = kDefaultFloor;
  auto* first = app.add_subcommand("estimate-first-stage", "Frequency estimates of CCPs and transitions");
  first->add_option("--panel", panel_file)->required()->check(CLI::ExistingFile);
  first->add_option("--floor", floor);
  first->add_option("--out", out, "output directory")->required();

  // simulate-paths
  std::string fs_dir, start_rule = "all-pairs", csv_out;
  std::size_t t_end = 0, n_path = 0;
  auto* sim = app.add_subcommand("simulate-paths", "Forward-simulate a path set from a first stage");
  sim->add_option("--first-stage", fs_dir)->required()->check(CLI::ExistingDirectory);
  sim->add_option("--t-end", t_end)->required();
  sim->add_option("--n-path", n_path)->required();
  sim->add_option("--start-rule", start_rule)
      ->check(CLI::IsMember({"all-pairs", "bootstrap", "bootstrap-weighted"}));
  sim->add_option("--seed", seed);
  sim->add_option("--out", out, "binary path file")->required();
  sim->add_option("--csv", csv_out, "also write the CSV export here");

  // compute-values
  std::string paths_file;
  std::vector<double> theta;
  EngineFlags engine;
  auto* values = app.add_subcommand("compute-values", "Run one value engine at a fixed theta");
  values->add_option("--model-config", model_cfg)->required()->check(CLI::ExistingFile);
  values->add_option("--first-stage", fs_dir)->required()->check(CLI::ExistingDirectory);
  values->add_option("--paths", paths_file)->required()->check(CLI::ExistingFile);
  values->add_option("--theta", theta, "defaults to the model's theta")->delimiter(',');
  values->add_option("--out", out, "CSV (state, action, value, updates)")->required();
  engine.attach(values);

  // estimate
  std::size_t max_fevals = NelderMeadOptions{}.max_fevals;
  auto* est = app.add_subcommand("estimate", "Minimum-distance estimation on one path set");
  est->add_option("--model-config", model_cfg)->required()->check(CLI::ExistingFile);
  est->add_option("--first-stage", fs_dir)->required()->check(CLI::ExistingDirectory);
  est->add_option("--paths", paths_file)->required()->check(CLI::ExistingFile);
  est->add_option("--theta0", theta, "defaults to 1.5 x the model's theta")->delimiter(',');
  est->add_option("--max-fevals", max_fevals);
  engine.attach(est);

  // bench
  std::string preset_name, presets_flag;
  bool force = false;
  std::optional<std::uint64_t> bench_seed;
  auto* bench = app.add_subcommand("bench", "Experiment presets");
  bench->require_subcommand(1);
  bench->add_option("--presets", presets_flag, "preset directory");
  auto* bench_run = bench->add_subcommand("run", "Run a preset and write its report bundle");
  bench_run->add_option("preset", preset_name)->required();
  bench_run->add_option("--out", out)->required();
  bench_run->add_option("--seed", bench_seed, "master seed override");
  bench_run->add_flag("--force", force, "run size-gated presets");
  auto* bench_list = bench->add_subcommand("list", "List available presets");

  CLI11_PARSE(app, argc, argv);

  if (*solve) {
    const AnyModel any = load_model_file(model_cfg);
    const ModelSpec& m = spec_of(any);
    FixedPointConfig cfg;
    cfg.tolerance = tolerance;
    cfg.include_euler_constant = euler;
    const ValueTable v = solve_fixed_point(m, m.reference_theta(), cfg);
    const RealTable p = ccps_from_values(v.values);
    auto f = open_output(out);
    f << "state,action,value,ccp\n";
    for (std::size_t s = 0; s < m.num_states(); ++s)
      for (std::size_t a = 0; a < m.num_actions(); ++a)
        f << s << ',' << a << ',' << format_double(v(s, a)) << ',' << format_double(p(s, a)) << '\n';
  } else if (*gen) {
    const AnyModel any = load_model_file(model_cfg);
    const ModelSpec& m = spec_of(any);
    const InitialStateRule rule =
        initial == "uniform"
            ? InitialStateRule::uniform()
            : InitialStateRule::fixed(static_cast<StateIndex>(parse_uint(initial, "--initial-state")));
    const Panel panel = generate_panel(m, ccps_from_fixed_point(m, m.reference_theta()), seed,
                                       agents, periods, rule);
    write_panel(panel, out);
    std::cout << "panel: " << agents << " agents x " << periods << " periods, " << m.num_states()
              << " states, " << m.num_actions() << " actions\n";
  } else if (*first) {
    const FirstStage fs = estimate_first_stage(read_panel(panel_file), floor);
    write_first_stage(fs, out);
    std::cout << "first stage: " << fs.visited_state_count() << " of " << fs.num_states()
              << " states visited, fingerprint " << to_hex(fs.fingerprint()) << '\n';
  } else if (*sim) {
    const FirstStage fs = read_first_stage(fs_dir);
    const PathSet paths = simulate_paths(fs, StartRule::parse(start_rule), t_end, n_path, seed);
    write_paths(paths, out);
    if (!csv_out.empty()) write_paths_csv(paths, csv_out);
    std::cout << "paths: " << n_path << " x " << t_end << ", id " << paths.sealed_id() << '\n'
              << "binary_bytes = " << paths.binary_size() << '\n'
              << "csv_bytes = " << csv_byte_size(paths) << '\n';
  } else if (*values) {
    const AnyModel any = load_model_file(model_cfg);
    const ModelSpec& m = spec_of(any);
    const FirstStage fs = read_first_stage(fs_dir);
    const PathSet paths = read_paths(paths_file);
    check_paths_match(paths, fs);
    if (theta.empty()) theta = m.reference_theta().values();
    const EngineResult r = run_engine(m, paths, theta, fs, engine.config());
    auto f = open_output(out);
    f << "state,action,value,updates\n";
    for (std::size_t s = 0; s < m.num_states(); ++s)
      for (std::size_t a = 0; a < m.num_actions(); ++a)
        f << s << ',' << a << ',' << format_double(r.values(s, a)) << ',' << r.updates(s, a) << '\n';
  } else if (*est) {
    const AnyModel any = load_model_file(model_cfg);
    const ModelSpec& m = spec_of(any);
    const FirstStage fs = read_first_stage(fs_dir);
    const PathSet paths = read_paths(paths_file);
    check_paths_match(paths, fs);
    MdeConfig cfg;
    cfg.theta0 = theta;
    cfg.optimizer.max_fevals = max_fevals;
    cfg.engine = engine.config();
    std::cout << estimate(cfg, m, fs, paths).to_json().dump(2) << '\n';
  } else if (*bench) {
    const std::string dir = preset_dir(presets_flag);
    if (*bench_list) {
      for (const auto& p : list_presets(dir))
        std::cout << p.name << (p.gated ? " [gated]" : "") << "  " << p.description << '\n';
    } else if (*bench_run) {
      BenchOptions opt;
      opt.seed = bench_seed;
      opt.force = force;
      opt.log = &std::cerr;
      const BenchResult r = run_preset(find_preset(dir, preset_name), out, opt);
      std::cout << preset_name << ": " << r.cells << " cells, " << r.failures
                << " failed replications, bundle in " << out << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ddc::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ddc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
