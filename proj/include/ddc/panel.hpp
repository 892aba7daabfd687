#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ddc/config.hpp"
#include "ddc/core.hpp"
#include "ddc/csv.hpp"
#include "ddc/model.hpp"
#include "ddc/parallel.hpp"
#include "ddc/rng.hpp"

namespace ddc {

/// Observed agent x period records, stored agent-major.
class Panel {
 public:
  Panel() = default;
  Panel(std::size_t num_states, std::size_t num_actions, std::size_t agents, std::size_t periods)
      : num_states_(num_states),
        num_actions_(num_actions),
        agents_(agents),
        periods_(periods),
        states_(agents * periods),
        actions_(agents * periods) {}

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t agents() const { return agents_; }
  std::size_t periods() const { return periods_; }
  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }

  StateIndex state(std::size_t agent, std::size_t t) const { return states_[agent * periods_ + t]; }
  ActionIndex action(std::size_t agent, std::size_t t) const {
    return actions_[agent * periods_ + t];
  }
  void set(std::size_t agent, std::size_t t, StateIndex s, ActionIndex a) {
    states_[agent * periods_ + t] = s;
    actions_[agent * periods_ + t] = a;
  }

  const std::vector<StateIndex>& states() const { return states_; }
  const std::vector<ActionIndex>& actions() const { return actions_; }

  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const Panel& a, const Panel& b) {
    return a.num_states_ == b.num_states_ && a.num_actions_ == b.num_actions_ &&
           a.agents_ == b.agents_ && a.periods_ == b.periods_ && a.states_ == b.states_ &&
           a.actions_ == b.actions_ && a.seed == b.seed && a.config_hash == b.config_hash;
  }

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::size_t agents_ = 0;
  std::size_t periods_ = 0;
  std::vector<StateIndex> states_;
  std::vector<ActionIndex> actions_;
};

/// Where each simulated agent begins.
struct InitialStateRule {
  enum class Kind { Fixed, Uniform };
  Kind kind = Kind::Fixed;
  StateIndex state = 0;

  static InitialStateRule fixed(StateIndex s) { return {Kind::Fixed, s}; }
  static InitialStateRule uniform() { return {Kind::Uniform, 0}; }
};

inline void check_ccp_table(const RealTable& ccps, std::size_t S, std::size_t J) {
  if (ccps.rows() != S || ccps.cols() != J)
    throw ArgumentError("ccp table is " + std::to_string(ccps.rows()) + "x" +
                        std::to_string(ccps.cols()) + ", model needs " + std::to_string(S) + "x" +
                        std::to_string(J));
  for (std::size_t s = 0; s < S; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < J; ++a) {
      const double p = ccps(s, a);
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ArgumentError("ccp row " + std::to_string(s) + " has an invalid entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw ArgumentError("ccp row " + std::to_string(s) + " does not sum to 1");
  }
}

/// Simulates agents under `ccps` and the model's transition law. Agent i
/// draws from its own stream, so the result does not depend on scheduling.
inline Panel generate_panel(const ModelSpec& model, const RealTable& ccps, std::uint64_t seed,
                            std::size_t agents, std::size_t periods,
                            InitialStateRule rule = {}) {
  const std::size_t S = model.num_states();
  const std::size_t J = model.num_actions();
  check_ccp_table(ccps, S, J);
  if (agents == 0 || periods == 0) throw ArgumentError("panel needs at least one agent and period");
  if (rule.kind == InitialStateRule::Kind::Fixed && rule.state >= S)
    throw ArgumentError("initial state " + std::to_string(rule.state) + " out of range");

  Panel panel(S, J, agents, periods);
  panel.seed = seed;
  panel.config_hash = model.config_hash();
  parallel_for(agents, [&](std::size_t i) {
    Rng rng(derive_seed(seed, {kPanelStream, i}));
    std::vector<double> row;
    StateIndex s = rule.kind == InitialStateRule::Kind::Fixed
                       ? rule.state
                       : static_cast<StateIndex>(rng.below(S));
    for (std::size_t t = 0; t < periods; ++t) {
      const auto a = static_cast<ActionIndex>(rng.categorical(ccps.row(s), J));
      panel.set(i, t, s, a);
      const auto next = model.transition_row(s, a);
      if (next.size() == 1) {
        s = next[0].next;
      } else {
        row.resize(next.size());
        for (std::size_t k = 0; k < next.size(); ++k) row[k] = next[k].prob;
        s = next[rng.categorical(row.data(), row.size())].next;
      }
    }
  });
  return panel;
}

/// Number of within-agent record pairs whose successor state has zero
/// probability under the model.
inline std::size_t count_transition_violations(const ModelSpec& model, const Panel& panel) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < panel.agents(); ++i) {
    for (std::size_t t = 0; t + 1 < panel.periods(); ++t) {
      const StateIndex next = panel.state(i, t + 1);
      bool ok = false;
      for (const auto& tr : model.transition_row(panel.state(i, t), panel.action(i, t)))
        ok = ok || (tr.next == next && tr.prob > 0.0);
      bad += ok ? 0 : 1;
    }
  }
  return bad;
}

/// CSV (agent, t, state, action) plus a `<path>.meta` key-value sidecar.
inline void write_panel(const Panel& panel, const std::string& path) {
  {
    auto out = open_output(path);
    out << "agent,t,state,action\n";
    for (std::size_t i = 0; i < panel.agents(); ++i)
      for (std::size_t t = 0; t < panel.periods(); ++t)
        out << i << ',' << t << ',' << panel.state(i, t) << ',' << panel.action(i, t) << '\n';
  }
  auto meta = open_output(path + ".meta");
  meta << "agents = " << panel.agents() << "\n"
       << "periods = " << panel.periods() << "\n"
       << "num_states = " << panel.num_states() << "\n"
       << "num_actions = " << panel.num_actions() << "\n"
       << "seed = " << panel.seed << "\n"
       << "config_hash = " << panel.config_hash << "\n";
}

inline Panel read_panel(const std::string& path) {
  const auto meta = KeyValueConfig::load(path + ".meta");
  const auto agents = static_cast<std::size_t>(meta.get_int("agents"));
  const auto periods = static_cast<std::size_t>(meta.get_int("periods"));
  Panel panel(static_cast<std::size_t>(meta.get_int("num_states")),
              static_cast<std::size_t>(meta.get_int("num_actions")), agents, periods);
  panel.seed = parse_uint(meta.get("seed"), path + ".meta");
  panel.config_hash = meta.get_or("config_hash", "");

  CsvReader in(path);
  in.expect_header({"agent", "t", "state", "action"});
  std::vector<std::string> f;
  std::size_t rows = 0;
  while (in.next(f)) {
    const auto i = parse_uint(f[0], in.where());
    const auto t = parse_uint(f[1], in.where());
    const auto s = parse_uint(f[2], in.where());
    const auto a = parse_uint(f[3], in.where());
    if (i >= agents || t >= periods || s >= panel.num_states() || a >= panel.num_actions())
      throw FormatError(in.where() + ": record out of range");
    panel.set(i, t, static_cast<StateIndex>(s), static_cast<ActionIndex>(a));
    ++rows;
  }
  if (rows != agents * periods)
    throw FormatError(path + ": expected " + std::to_string(agents * periods) + " records, found " +
                      std::to_string(rows));
  return panel;
}

}  // namespace ddc
