#pragma once

// Experiment presets and report bundles.
//
// A preset is a key = value file. Keys prefixed `model.` form the model
// config (see load_model); the rest describe the study:
//
//   name, description
//   panel.agents, panel.periods, panel.initial_state (uniform | index)
//   t_end           comma separated path lengths
//   engines         engine labels: ccs, rlmc, rltd<n>@<alpha>
//   start_rule      all-pairs | bootstrap | bootstrap-weighted
//   n_path          paths per set, or
//   n_path_factor   paths per set as a multiple of the state-action count
//   replications, master_seed
//   figure1_param   parameter whose RMSE feeds figure1.csv (default: last)
//   histograms      true | false
//   gated           true refuses to run without force
//   state_cap       refuse models with more states without force

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ddc/config.hpp"
#include "ddc/dp_solver.hpp"
#include "ddc/estimator.hpp"
#include "ddc/first_stage.hpp"
#include "ddc/model.hpp"
#include "ddc/panel.hpp"
#include "ddc/paths.hpp"

namespace ddc {

inline constexpr std::size_t kDefaultStateCap = 200'000;

struct ExperimentPreset {
  std::string name;
  std::string description;
  KeyValueConfig model;
  std::size_t agents = 10'000;
  std::size_t periods = 100;
  InitialStateRule initial_state = InitialStateRule::fixed(0);
  std::vector<std::size_t> t_end;
  std::vector<EngineConfig> engines;
  StartRule start_rule = StartRule::all_pairs();
  std::size_t n_path = 500;
  double n_path_factor = 0.0;
  std::size_t replications = 50;
  std::uint64_t master_seed = 1;
  std::string figure1_param;
  bool histograms = true;
  bool gated = false;
  std::size_t state_cap = kDefaultStateCap;

  bool empty() const { return t_end.empty() || engines.empty(); }

  std::size_t paths_for(const ModelSpec& m) const {
    if (n_path_factor > 0.0)
      return static_cast<std::size_t>(std::llround(n_path_factor * static_cast<double>(m.num_pairs())));
    return n_path;
  }

  static ExperimentPreset from_config(const KeyValueConfig& cfg) {
    ExperimentPreset p;
    p.name = cfg.get("name");
    p.description = cfg.get_or("description", "");
    for (const auto& key : cfg.keys())
      if (key.rfind("model.", 0) == 0) p.model.set(key.substr(6), cfg.get(key));
    const auto count = [&](const std::string& key, std::size_t fallback) {
      const long long v = cfg.get_int_or(key, static_cast<long long>(fallback));
      if (v < 0) throw ConfigError("preset " + p.name + ": `" + key + "` must be non-negative");
      return static_cast<std::size_t>(v);
    };
    p.agents = count("panel.agents", p.agents);
    p.periods = count("panel.periods", p.periods);
    if (cfg.has("panel.initial_state")) {
      const std::string v = cfg.get("panel.initial_state");
      p.initial_state = v == "uniform" ? InitialStateRule::uniform()
                                       : InitialStateRule::fixed(static_cast<StateIndex>(
                                             count("panel.initial_state", 0)));
    }
    if (cfg.has("t_end") && !cfg.get("t_end").empty())
      for (long long t : cfg.get_ints("t_end")) {
        if (t < 2) throw ConfigError("preset " + p.name + ": T_end values must be at least 2");
        p.t_end.push_back(static_cast<std::size_t>(t));
      }
    if (cfg.has("engines") && !cfg.get("engines").empty())
      for (const auto& label : cfg.get_list("engines"))
        p.engines.push_back(EngineConfig::parse_label(label));
    if (cfg.has("start_rule")) p.start_rule = StartRule::parse(cfg.get("start_rule"));
    p.n_path = count("n_path", p.n_path);
    p.n_path_factor = cfg.get_double_or("n_path_factor", 0.0);
    p.replications = count("replications", p.replications);
    p.master_seed = static_cast<std::uint64_t>(cfg.get_int_or("master_seed", 1));
    p.figure1_param = cfg.get_or("figure1_param", "");
    p.histograms = cfg.get_or("histograms", "true") == "true";
    p.gated = cfg.get_or("gated", "false") == "true";
    p.state_cap = count("state_cap", p.state_cap);
    if (!p.empty() && !p.model.has("kind"))
      throw ConfigError("preset " + p.name + ": missing `model.kind`");
    return p;
  }

  static ExperimentPreset load(const std::string& file) {
    return from_config(KeyValueConfig::load(file));
  }
};

/// `*.preset` files in `dir`, sorted by name.
inline std::vector<ExperimentPreset> list_presets(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("preset directory " + dir + " does not exist");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".preset") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<ExperimentPreset> out;
  for (const auto& f : files) out.push_back(ExperimentPreset::load(f));
  return out;
}

inline ExperimentPreset find_preset(const std::string& dir, const std::string& name) {
  const auto file = std::filesystem::path(dir) / (name + ".preset");
  if (!std::filesystem::exists(file)) throw ConfigError("no preset named `" + name + "` in " + dir);
  return ExperimentPreset::load(file.string());
}

struct BenchOptions {
  std::optional<std::uint64_t> seed;  // overrides the preset's master seed
  bool force = false;
  std::ostream* log = nullptr;
};

inline const char* kTableHeader =
    "parameter,engine,T_end,mean,std,RMSE,l2_mean,l2_std,fevals_mean,fevals_std,time_mean,"
    "time_std,succeeded,failed\n";
inline const char* kFigure1Header = "engine,T_end,rmse_rc,mean_time\n";
inline const char* kFigure2Header = "engine,T_end,state_action_count,mean_time\n";
inline const char* kFailuresHeader = "engine,T_end,replication,reason\n";

/// Columns that carry wall-clock measurements, by file.
inline std::vector<std::string> timing_columns(const std::string& file) {
  if (file == "table.csv") return {"time_mean", "time_std"};
  if (file == "figure1.csv" || file == "figure2.csv") return {"mean_time"};
  return {};
}

struct BenchResult {
  std::size_t cells = 0;
  std::size_t failures = 0;
};

/// Runs every (T_end, engine) cell of the preset and writes the bundle into
/// `out_dir`: table.csv, figure1.csv, figure2.csv, failures.csv, manifest.txt
/// and, if enabled, updates/<engine>_T<T_end>.csv at the reference theta on
/// replication 0. Failed replications are listed, never fatal.
inline BenchResult run_preset(const ExperimentPreset& preset, const std::string& out_dir,
                              const BenchOptions& opt = {}) {
  if (preset.gated && !opt.force)
    throw ConfigError("preset " + preset.name +
                      " is size-gated; rerun with --force once memory and time are available");
  const std::uint64_t master = opt.seed.value_or(preset.master_seed);
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const std::string& f) { return (std::filesystem::path(out_dir) / f).string(); };

  auto table = open_output(path("table.csv"));
  auto fig1 = open_output(path("figure1.csv"));
  auto fig2 = open_output(path("figure2.csv"));
  auto fail = open_output(path("failures.csv"));
  auto manifest = open_output(path("manifest.txt"));
  table << kTableHeader;
  fig1 << kFigure1Header;
  fig2 << kFigure2Header;
  fail << kFailuresHeader;
  manifest << "preset = " << preset.name << "\nmaster_seed = " << master << "\n";

  BenchResult result;
  if (preset.empty()) return result;

  const AnyModel any = load_model(preset.model);
  const ModelSpec& model = spec_of(any);
  if (model.num_states() > preset.state_cap && !opt.force)
    throw ConfigError("preset " + preset.name + ": model has " + std::to_string(model.num_states()) +
                      " states, above the cap of " + std::to_string(preset.state_cap) +
                      "; rerun with --force");
  const Theta& truth = model.reference_theta();
  std::size_t fig_param = truth.size() - 1;
  if (!preset.figure1_param.empty()) {
    const auto& names = truth.names();
    const auto it = std::find(names.begin(), names.end(), preset.figure1_param);
    if (it == names.end()) throw ConfigError("figure1_param `" + preset.figure1_param + "` unknown");
    fig_param = static_cast<std::size_t>(it - names.begin());
  }

  const std::uint64_t panel_seed = derive_seed(master, {kPanelStream});
  const RealTable ccps = ccps_from_fixed_point(model, truth);
  const Panel panel =
      generate_panel(model, ccps, panel_seed, preset.agents, preset.periods, preset.initial_state);
  const FirstStage fs = estimate_first_stage(panel);
  const std::size_t n_path = preset.paths_for(model);
  manifest << "model_config_hash = " << model.config_hash() << "\nnum_states = "
           << model.num_states() << "\nnum_actions = " << model.num_actions()
           << "\npanel_seed = " << panel_seed << "\nagents = " << preset.agents
           << "\nperiods = " << preset.periods << "\nfirst_stage = " << to_hex(fs.fingerprint())
           << "\nstart_rule = " << preset.start_rule.describe() << "\nn_path = " << n_path
           << "\nreplications = " << preset.replications << "\n";
  if (opt.log)
    *opt.log << preset.name << ": " << model.num_states() << " states, " << model.num_pairs()
             << " pairs, " << n_path << " paths per set\n";

  if (preset.histograms) std::filesystem::create_directories(path("updates"));
  for (std::size_t T : preset.t_end) {
    StudyConfig study;
    study.start_rule = preset.start_rule;
    study.t_end = T;
    study.n_path = n_path;
    study.engines = preset.engines;
    study.replications = preset.replications;
    study.master_seed = master;
    const StudyResult res = replicate(study, model, fs);

    for (std::size_t e = 0; e < preset.engines.size(); ++e) {
      const std::string label = preset.engines[e].label();
      const ReplicationSummary& sum = res.summaries[e];
      ++result.cells;
      result.failures += sum.failures.size();
      for (const auto& p : sum.parameters)
        table << p.name << ',' << label << ',' << T << ',' << format_double(p.mean) << ','
              << format_double(p.std) << ',' << format_double(p.rmse) << ','
              << format_double(sum.l2_norm.mean) << ',' << format_double(sum.l2_norm.std) << ','
              << format_double(sum.fevals.mean) << ',' << format_double(sum.fevals.std) << ','
              << format_double(sum.seconds.mean) << ',' << format_double(sum.seconds.std) << ','
              << sum.succeeded << ',' << sum.failures.size() << '\n';
      if (sum.succeeded > 0) {
        fig1 << label << ',' << T << ',' << format_double(sum.parameters[fig_param].rmse) << ','
             << format_double(sum.seconds.mean) << '\n';
        fig2 << label << ',' << T << ',' << model.num_pairs() << ','
             << format_double(sum.seconds.mean) << '\n';
      }
      for (const auto& f : sum.failures) {
        std::string reason = f.reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        fail << label << ',' << T << ',' << f.replication << ',' << reason << '\n';
      }
      if (opt.log)
        *opt.log << "  T_end=" << T << " " << label << ": " << sum.succeeded << " ok, "
                 << sum.failures.size() << " failed, mean time "
                 << format_double(sum.seconds.mean) << " s\n";
    }

    if (preset.histograms && preset.replications > 0) {
      try {
        const PathSet paths =
            simulate_paths(fs, preset.start_rule, T, n_path, replication_seed(master, 0));
        for (const auto& engine : preset.engines) {
          try {
            const auto run = run_engine(model, paths, truth.values(), fs, engine);
            write_update_histogram(run.updates, path("updates/" + engine.label() + "_T" +
                                                     std::to_string(T) + ".csv"));
          } catch (const Error&) {
            // The same failure is already listed for replication 0.
          }
        }
      } catch (const Error&) {
      }
    }
  }
  return result;
}

}  // namespace ddc
