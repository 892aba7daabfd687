#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ddc/core.hpp"
#include "ddc/first_stage.hpp"
#include "ddc/model.hpp"
#include "ddc/paths.hpp"

namespace ddc {

enum class EngineKind { CCS, RLMC, RLTD };

inline std::string to_string(EngineKind k) {
  switch (k) {
    case EngineKind::CCS: return "ccs";
    case EngineKind::RLMC: return "rlmc";
    case EngineKind::RLTD: return "rltd";
  }
  return "?";
}

inline EngineKind parse_engine_kind(const std::string& s) {
  if (s == "ccs") return EngineKind::CCS;
  if (s == "rlmc") return EngineKind::RLMC;
  if (s == "rltd") return EngineKind::RLTD;
  throw ArgumentError("unknown engine `" + s + "` (expected ccs, rlmc or rltd)");
}

enum class LearningRate {
  Constant,  // alpha on every update
  Harmonic,  // 1 / visits(s, a), counting the current update
};

struct EngineConfig {
  EngineKind kind = EngineKind::CCS;
  double alpha = 0.5;
  std::size_t n_step = 1;
  /// Discount override; 0 uses the model's beta.
  double beta = 0.0;
  double gamma = kEulerGamma;
  LearningRate rate = LearningRate::Constant;
  /// RLTD passes over the path set per run.
  std::size_t sweeps = 1;
  /// Start from the caller's table instead of zeros.
  bool warm_start = false;
  /// RLMC that only updates each path's start pair.
  bool start_only = false;

  static EngineConfig ccs() { return {}; }
  static EngineConfig rlmc() {
    EngineConfig c;
    c.kind = EngineKind::RLMC;
    return c;
  }
  static EngineConfig rltd(double alpha = 0.5, std::size_t n = 1) {
    EngineConfig c;
    c.kind = EngineKind::RLTD;
    c.alpha = alpha;
    c.n_step = n;
    return c;
  }

  /// "ccs", "rlmc", "rltd1@0.5", "rltd3@0.9", ...
  std::string label() const {
    if (kind != EngineKind::RLTD) return to_string(kind);
    return "rltd" + std::to_string(n_step) + "@" + format_double(alpha);
  }

  static EngineConfig parse_label(const std::string& text) {
    if (text == "ccs") return ccs();
    if (text == "rlmc") return rlmc();
    if (text.rfind("rltd", 0) == 0) {
      const auto at = text.find('@');
      const std::string n = text.substr(4, at == std::string::npos ? std::string::npos : at - 4);
      EngineConfig c = rltd();
      if (!n.empty()) c.n_step = static_cast<std::size_t>(parse_uint(n, "engine `" + text + "`"));
      if (at != std::string::npos) c.alpha = parse_double(text.substr(at + 1), "engine `" + text + "`");
      return c;
    }
    throw ArgumentError("unknown engine label `" + text + "`");
  }
};

/// Per-pair update counts from one engine run.
struct UpdateCounter {
  Table<std::uint64_t> counts;

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts.data()) n += c;
    return n;
  }
  std::uint64_t operator()(std::size_t s, std::size_t a) const { return counts(s, a); }
};

struct EngineResult {
  ValueTable values;
  UpdateCounter updates;
};

/// u(s,a) + gamma - log pi-hat(a|s): the expected reward of a simulated step.
inline double reward_term(const ModelSpec& model, StateIndex s, ActionIndex a, const Theta& theta,
                          const FirstStage& fs, double gamma = kEulerGamma) {
  return model.flow_utility(s, a, theta) + gamma - std::log(fs.ccp(s, a));
}

/// Number of updates an engine performs on a path set of this shape.
inline std::uint64_t update_budget(const EngineConfig& cfg, std::size_t n_path, std::size_t t_end) {
  switch (cfg.kind) {
    case EngineKind::CCS: return n_path;
    case EngineKind::RLMC: return cfg.start_only ? n_path : n_path * t_end;
    case EngineKind::RLTD: return cfg.sweeps * n_path * (t_end - cfg.n_step);
  }
  return 0;
}

namespace detail {

/// Flat per-pair tables for one theta: U = u, L = gamma - log pi-hat and
/// R = U + L. L and R are NaN at states without choice probabilities.
struct EngineTables {
  std::size_t J = 0;
  double beta = 0.0;
  std::vector<double> U, L, R;

  EngineTables(const ModelSpec& model, const std::vector<double>& theta, const FirstStage& fs,
               const EngineConfig& cfg)
      : J(model.num_actions()), beta(cfg.beta > 0.0 ? cfg.beta : model.beta()) {
    if (fs.num_states() != model.num_states() || fs.num_actions() != J)
      throw ArgumentError("first stage shape does not match the model");
    U = model.utility_table(theta).data();
    L.resize(U.size());
    R.resize(U.size());
    const auto& ccps = fs.ccps().data();
    for (std::size_t p = 0; p < U.size(); ++p) {
      L[p] = fs.visited(static_cast<StateIndex>(p / J)) ? cfg.gamma - std::log(ccps[p])
                                                        : std::numeric_limits<double>::quiet_NaN();
      R[p] = U[p] + L[p];
    }
  }

  std::size_t pair(const std::uint32_t* step) const {
    return static_cast<std::size_t>(step[0]) * J + step[1];
  }
};

/// G = u(s_1,a_1) + sum_{t>=2} beta^(t-1) R(s_t,a_t) along one path.
inline double path_return(const EngineTables& tab, const std::uint32_t* path, std::size_t T) {
  double g = tab.U[tab.pair(path)];
  double d = 1.0;
  for (std::size_t t = 1; t < T; ++t) {
    d *= tab.beta;
    g += d * tab.R[tab.pair(path + 2 * t)];
  }
  return g;
}

inline void check_inputs(const ModelSpec& model, const PathSet& paths,
                         const std::vector<double>& theta, const EngineConfig& cfg,
                         const RealTable* initial) {
  model.check_theta(theta);
  if (paths.num_states() != model.num_states() || paths.num_actions() != model.num_actions())
    throw ArgumentError("path set shape does not match the model");
  if (cfg.beta < 0.0 || cfg.beta >= 1.0) throw ConfigError("discount override must lie in [0, 1)");
  if (!std::isfinite(cfg.gamma)) throw ConfigError("gamma must be finite");
  if (cfg.warm_start && (!initial || initial->rows() != model.num_states() ||
                         initial->cols() != model.num_actions()))
    throw ArgumentError("warm start needs an initial table of the model's shape");
}

/// Raises a coverage error naming the first path pair whose state has no
/// choice probabilities, if any updated value came out non-finite.
inline void check_finite(const EngineTables& tab, const PathSet& paths, const RealTable& v,
                         const UpdateCounter& counter) {
  bool bad = false;
  for (std::size_t p = 0; p < v.size() && !bad; ++p)
    bad = counter.counts.data()[p] > 0 && !std::isfinite(v.data()[p]);
  if (!bad) return;
  for (std::size_t k = 0; k < paths.num_paths(); ++k)
    for (std::size_t t = 1; t < paths.t_end(); ++t)
      if (!std::isfinite(tab.R[tab.pair(paths.path(k) + 2 * t)]))
        throw CoverageError("path " + std::to_string(k) + " visits pair (" +
                            std::to_string(paths.state(k, t)) + ", " +
                            std::to_string(paths.action(k, t)) +
                            ") which has no choice probability estimate");
  throw NumericError("engine produced non-finite values");
}

inline EngineResult make_result(RealTable v, UpdateCounter c, const EngineConfig& cfg,
                                const std::vector<double>& theta, const PathSet& paths) {
  return {ValueTable{std::move(v), to_string(cfg.kind), theta, paths.sealed_id()}, std::move(c)};
}

inline RealTable initial_table(const ModelSpec& model, const EngineConfig& cfg,
                               const RealTable* initial) {
  if (cfg.warm_start) return *initial;
  return RealTable(model.num_states(), model.num_actions(), 0.0);
}

}  // namespace detail

/// Conditional choice simulation: each path's full return updates the
/// running mean at its start pair.
inline EngineResult ccs_values(const ModelSpec& model, const PathSet& paths,
                               const std::vector<double>& theta, const FirstStage& fs,
                               const EngineConfig& cfg = EngineConfig::ccs(),
                               const RealTable* initial = nullptr) {
  detail::check_inputs(model, paths, theta, cfg, initial);
  const detail::EngineTables tab(model, theta, fs, cfg);
  RealTable v = detail::initial_table(model, cfg, initial);
  UpdateCounter c{Table<std::uint64_t>(model.num_states(), model.num_actions(), 0)};
  auto& vd = v.data();
  auto& cd = c.counts.data();
  const std::size_t T = paths.t_end();
  for (std::size_t k = 0; k < paths.num_paths(); ++k) {
    const std::uint32_t* path = paths.path(k);
    const double g = detail::path_return(tab, path, T);
    const std::size_t p = tab.pair(path);
    ++cd[p];
    vd[p] += (g - vd[p]) / static_cast<double>(cd[p]);
  }
  detail::check_finite(tab, paths, v, c);
  return detail::make_result(std::move(v), std::move(c), cfg, theta, paths);
}

/// Every-visit Monte Carlo: after the start pair, each later pair on the
/// path is updated with its sub-path return, peeled off recursively.
inline EngineResult rlmc_values(const ModelSpec& model, const PathSet& paths,
                                const std::vector<double>& theta, const FirstStage& fs,
                                const EngineConfig& cfg = EngineConfig::rlmc(),
                                const RealTable* initial = nullptr) {
  detail::check_inputs(model, paths, theta, cfg, initial);
  const detail::EngineTables tab(model, theta, fs, cfg);
  if (tab.beta < 1e-6) throw ConfigError("RLMC needs beta >= 1e-6 to divide out the discount");
  RealTable v = detail::initial_table(model, cfg, initial);
  UpdateCounter c{Table<std::uint64_t>(model.num_states(), model.num_actions(), 0)};
  auto& vd = v.data();
  auto& cd = c.counts.data();
  const std::size_t T = paths.t_end();
  const double beta = tab.beta;
  for (std::size_t k = 0; k < paths.num_paths(); ++k) {
    const std::uint32_t* path = paths.path(k);
    double g = detail::path_return(tab, path, T);
    std::size_t p = tab.pair(path);
    ++cd[p];
    vd[p] += (g - vd[p]) / static_cast<double>(cd[p]);
    if (cfg.start_only) continue;
    for (std::size_t t = 1; t < T; ++t) {
      const std::size_t q = tab.pair(path + 2 * t);
      g = (g - tab.U[p] - beta * tab.L[q]) / beta;
      p = q;
      ++cd[p];
      vd[p] += (g - vd[p]) / static_cast<double>(cd[p]);
    }
  }
  detail::check_finite(tab, paths, v, c);
  return detail::make_result(std::move(v), std::move(c), cfg, theta, paths);
}

/// On-line n-step temporal difference learning, path-major and
/// step-ascending, bootstrapping on the latest table entries:
///
///   delta = u_t + sum_{j=1}^{n-1} beta^j R_{t+j} + beta^n (L_{t+n} + v_{t+n}) - v_t
inline EngineResult rltd_values(const ModelSpec& model, const PathSet& paths,
                                const std::vector<double>& theta, const FirstStage& fs,
                                const EngineConfig& cfg = EngineConfig::rltd(),
                                const RealTable* initial = nullptr) {
  detail::check_inputs(model, paths, theta, cfg, initial);
  const std::size_t T = paths.t_end();
  const std::size_t n = cfg.n_step;
  if (n < 1 || n + 1 > T)
    throw ConfigError("RLTD look-ahead n = " + std::to_string(n) + " must lie in [1, T_end - 1]");
  if (cfg.rate == LearningRate::Constant && !(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw ConfigError("RLTD learning rate alpha must lie in (0, 1]");
  const detail::EngineTables tab(model, theta, fs, cfg);
  RealTable v = detail::initial_table(model, cfg, initial);
  UpdateCounter c{Table<std::uint64_t>(model.num_states(), model.num_actions(), 0)};
  auto& vd = v.data();
  auto& cd = c.counts.data();
  std::vector<double> disc(n + 1, 1.0);
  for (std::size_t j = 1; j <= n; ++j) disc[j] = disc[j - 1] * tab.beta;
  const double bn = disc[n];
  const bool harmonic = cfg.rate == LearningRate::Harmonic;

  for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
    for (std::size_t k = 0; k < paths.num_paths(); ++k) {
      const std::uint32_t* path = paths.path(k);
      for (std::size_t t = 0; t + n < T; ++t) {
        const std::size_t p = tab.pair(path + 2 * t);
        double target = tab.U[p];
        for (std::size_t j = 1; j < n; ++j) target += disc[j] * tab.R[tab.pair(path + 2 * (t + j))];
        const std::size_t q = tab.pair(path + 2 * (t + n));
        target += bn * (tab.L[q] + vd[q]);
        ++cd[p];
        const double a = harmonic ? 1.0 / static_cast<double>(cd[p]) : cfg.alpha;
        vd[p] += a * (target - vd[p]);
      }
    }
  }
  detail::check_finite(tab, paths, v, c);
  return detail::make_result(std::move(v), std::move(c), cfg, theta, paths);
}

inline EngineResult run_engine(const ModelSpec& model, const PathSet& paths,
                               const std::vector<double>& theta, const FirstStage& fs,
                               const EngineConfig& cfg, const RealTable* initial = nullptr) {
  switch (cfg.kind) {
    case EngineKind::CCS: return ccs_values(model, paths, theta, fs, cfg, initial);
    case EngineKind::RLMC: return rlmc_values(model, paths, theta, fs, cfg, initial);
    case EngineKind::RLTD: return rltd_values(model, paths, theta, fs, cfg, initial);
  }
  throw ArgumentError("unknown engine kind");
}

/// CSV (state, action, updates).
inline void write_update_histogram(const UpdateCounter& c, const std::string& file) {
  auto out = open_output(file);
  out << "state,action,updates\n";
  for (std::size_t s = 0; s < c.counts.rows(); ++s)
    for (std::size_t a = 0; a < c.counts.cols(); ++a)
      out << s << ',' << a << ',' << c.counts(s, a) << '\n';
}

}  // namespace ddc
