#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddc/core.hpp"
#include "ddc/engines.hpp"
#include "ddc/first_stage.hpp"
#include "ddc/model.hpp"
#include "ddc/nelder_mead.hpp"
#include "ddc/parallel.hpp"
#include "ddc/paths.hpp"
#include "ddc/rng.hpp"

namespace ddc {

/// Share of visited states that may drop out of the objective before a
/// report carries a coverage warning.
inline constexpr double kCoverageWarningShare = 0.2;

struct PredictedCcps {
  std::vector<StateIndex> states;
  RealTable ccps;  // one row per entry of `states`
  std::size_t visited = 0;
  std::size_t excluded = 0;

  bool coverage_warning() const {
    return static_cast<double>(excluded) > kCoverageWarningShare * static_cast<double>(visited);
  }
};

/// Softmax rows at the given states.
inline PredictedCcps predicted_ccps(const RealTable& values, const std::vector<StateIndex>& states) {
  if (states.empty()) throw CoverageError("predicted_ccps: no eligible state");
  PredictedCcps out{states, RealTable(states.size(), values.cols()), states.size(), 0};
  std::vector<double> row(values.cols());
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::copy(values.row(states[i]), values.row(states[i]) + values.cols(), row.begin());
    const auto p = ccp_from_values(row);
    std::copy(p.begin(), p.end(), out.ccps.row(i));
  }
  return out;
}

/// Softmax rows at states that were visited in the panel and whose every
/// action was updated during the run.
inline PredictedCcps predicted_ccps(const RealTable& values, const UpdateCounter& updates,
                                    const FirstStage& fs) {
  std::vector<StateIndex> eligible;
  std::size_t visited = 0;
  for (StateIndex s = 0; s < fs.num_states(); ++s) {
    if (!fs.visited(s)) continue;
    ++visited;
    bool all = true;
    for (ActionIndex a = 0; a < fs.num_actions(); ++a) all = all && updates(s, a) > 0;
    if (all) eligible.push_back(s);
  }
  if (eligible.empty())
    throw CoverageError("no visited state has every action updated; the objective is undefined");
  auto out = predicted_ccps(values, eligible);
  out.visited = visited;
  out.excluded = visited - eligible.size();
  return out;
}

/// Euclidean distance between predicted and first-stage rows, all cells
/// weighted equally.
inline double ccp_distance(const PredictedCcps& pred, const FirstStage& fs) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.states.size(); ++i)
    for (ActionIndex a = 0; a < fs.num_actions(); ++a) {
      const double d = pred.ccps(i, a) - fs.ccp(pred.states[i], a);
      acc += d * d;
    }
  return std::sqrt(acc);
}

/// theta -> distance, evaluated on a fixed path set, so the map is
/// deterministic.
class MdeObjective {
 public:
  MdeObjective(const ModelSpec& model, const FirstStage& fs, const PathSet& paths,
               EngineConfig engine, std::optional<Theta> bounds = std::nullopt)
      : model_(model), fs_(fs), paths_(paths), engine_(engine), bounds_(std::move(bounds)) {}

  double operator()(const std::vector<double>& theta) {
    ++evaluations_;
    if (bounds_ && !bounds_->within_bounds(theta)) return std::numeric_limits<double>::infinity();
    EngineConfig cfg = engine_;
    const bool warm = engine_.warm_start && last_.has_value();
    cfg.warm_start = warm;
    auto run = run_engine(model_, paths_, theta, fs_, cfg, warm ? &*last_ : nullptr);
    const auto pred = predicted_ccps(run.values.values, run.updates, fs_);
    excluded_ = pred.excluded;
    warning_ = warning_ || pred.coverage_warning();
    if (engine_.warm_start) last_ = std::move(run.values.values);
    return ccp_distance(pred, fs_);
  }

  std::size_t evaluations() const { return evaluations_; }
  std::size_t last_excluded() const { return excluded_; }
  bool coverage_warning() const { return warning_; }

 private:
  const ModelSpec& model_;
  const FirstStage& fs_;
  const PathSet& paths_;
  EngineConfig engine_;
  std::optional<Theta> bounds_;
  std::optional<RealTable> last_;
  std::size_t evaluations_ = 0;
  std::size_t excluded_ = 0;
  bool warning_ = false;
};

struct MdeConfig {
  /// Start point; empty means 1.5 x the model's reference theta.
  std::vector<double> theta0;
  NelderMeadOptions optimizer;
  EngineConfig engine;
  std::size_t replication = 0;
};

struct EstimationReport {
  std::vector<std::string> names;
  std::vector<double> theta_hat;
  double l2_norm = 0.0;
  std::size_t fevals = 0;
  double seconds = 0.0;
  std::string engine;
  std::size_t t_end = 0;
  std::size_t replication = 0;
  bool converged = false;
  std::size_t excluded_states = 0;
  bool coverage_warning = false;
  std::string path_set_id;

  nlohmann::json to_json() const {
    nlohmann::json theta = nlohmann::json::object();
    for (std::size_t i = 0; i < names.size(); ++i) theta[names[i]] = theta_hat[i];
    return {{"theta_hat", theta},
            {"l2_norm", l2_norm},
            {"fevals", fevals},
            {"seconds", seconds},
            {"engine", engine},
            {"t_end", t_end},
            {"replication", replication},
            {"converged", converged},
            {"excluded_states", excluded_states},
            {"coverage_warning", coverage_warning},
            {"path_set_id", path_set_id}};
  }
};

/// Minimum-distance estimation by Nelder-Mead. Wall time covers the
/// optimizer loop only.
inline EstimationReport estimate(const MdeConfig& cfg, const ModelSpec& model,
                                 const FirstStage& fs, const PathSet& paths) {
  const Theta& ref = model.reference_theta();
  std::vector<double> x0 = cfg.theta0;
  if (x0.empty())
    for (double v : ref.values()) x0.push_back(1.5 * v);
  model.check_theta(x0);
  if (!ref.within_bounds(x0)) throw ArgumentError("initial theta lies outside the bounds");

  MdeObjective objective(model, fs, paths, cfg.engine, ref);
  const auto t0 = std::chrono::steady_clock::now();
  const auto nm = nelder_mead(objective, x0, cfg.optimizer);
  const auto t1 = std::chrono::steady_clock::now();

  EstimationReport r;
  r.names = ref.names();
  r.theta_hat = nm.x;
  r.l2_norm = nm.f;
  r.fevals = nm.fevals;
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  r.engine = cfg.engine.label();
  r.t_end = paths.t_end();
  r.replication = cfg.replication;
  r.converged = nm.converged;
  r.excluded_states = objective.last_excluded();
  r.coverage_warning = objective.coverage_warning();
  r.path_set_id = paths.sealed_id();
  return r;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // population (divide by R)
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(xs.size()));
  return m;
}

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double rmse = 0.0;
};

struct ReplicationFailure {
  std::size_t replication = 0;
  std::string reason;
};

struct ReplicationSummary {
  std::vector<ParameterSummary> parameters;
  Moments l2_norm, fevals, seconds;
  std::size_t succeeded = 0;
  std::vector<ReplicationFailure> failures;

  bool partial() const { return !failures.empty(); }
};

/// Mean, population std and RMSE against `truth`, so
/// RMSE^2 = (mean - truth)^2 + std^2.
inline ReplicationSummary summarize(const std::vector<EstimationReport>& reports,
                                    const Theta& truth,
                                    std::vector<ReplicationFailure> failures = {}) {
  ReplicationSummary out;
  out.succeeded = reports.size();
  out.failures = std::move(failures);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::vector<double> xs;
    double sq = 0.0;
    for (const auto& r : reports) {
      xs.push_back(r.theta_hat[i]);
      sq += (r.theta_hat[i] - truth[i]) * (r.theta_hat[i] - truth[i]);
    }
    const auto m = moments(xs);
    out.parameters.push_back({truth.names()[i], truth[i], m.mean, m.std,
                              reports.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(reports.size()))});
  }
  std::vector<double> norm, fe, sec;
  for (const auto& r : reports) {
    norm.push_back(r.l2_norm);
    fe.push_back(static_cast<double>(r.fevals));
    sec.push_back(r.seconds);
  }
  out.l2_norm = moments(norm);
  out.fevals = moments(fe);
  out.seconds = moments(sec);
  return out;
}

/// One estimation study: R path sets drawn from the first stage, seeded by
/// replication index, each estimated with every listed engine.
struct StudyConfig {
  StartRule start_rule;
  std::size_t t_end = 50;
  std::size_t n_path = 500;
  std::vector<EngineConfig> engines;
  std::size_t replications = 50;
  std::uint64_t master_seed = 1;
  std::vector<double> theta0;
  NelderMeadOptions optimizer;
};

struct StudyResult {
  std::vector<std::vector<EstimationReport>> reports;  // [engine][successful replication]
  std::vector<std::vector<ReplicationFailure>> failures;
  std::vector<ReplicationSummary> summaries;           // per engine
};

inline std::uint64_t replication_seed(std::uint64_t master, std::size_t r) {
  return derive_seed(master, {kReplicationStream, r});
}

/// Replications run in parallel; each owns its path set. A failed
/// estimation is recorded against its engine and replication.
inline StudyResult replicate(const StudyConfig& study, const ModelSpec& model,
                             const FirstStage& fs) {
  const std::size_t E = study.engines.size(), R = study.replications;
  std::vector<std::vector<std::optional<EstimationReport>>> cells(
      E, std::vector<std::optional<EstimationReport>>(R));
  std::vector<std::vector<std::string>> errors(E, std::vector<std::string>(R));

  parallel_for(R, [&](std::size_t r) {
    PathSet paths;
    try {
      paths = simulate_paths(fs, study.start_rule, study.t_end, study.n_path,
                             replication_seed(study.master_seed, r));
    } catch (const Error& e) {
      for (std::size_t e_i = 0; e_i < E; ++e_i) errors[e_i][r] = e.what();
      return;
    }
    for (std::size_t e = 0; e < E; ++e) {
      MdeConfig cfg{study.theta0, study.optimizer, study.engines[e], r};
      try {
        cells[e][r] = estimate(cfg, model, fs, paths);
      } catch (const Error& ex) {
        errors[e][r] = ex.what();
      }
    }
  });

  StudyResult out;
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<EstimationReport> ok;
    std::vector<ReplicationFailure> bad;
    for (std::size_t r = 0; r < R; ++r) {
      if (cells[e][r]) ok.push_back(std::move(*cells[e][r]));
      else bad.push_back({r, errors[e][r]});
    }
    out.summaries.push_back(summarize(ok, model.reference_theta(), bad));
    out.reports.push_back(std::move(ok));
    out.failures.push_back(std::move(bad));
  }
  return out;
}

}  // namespace ddc
