#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ddc/config.hpp"
#include "ddc/core.hpp"
#include "ddc/csv.hpp"
#include "ddc/hash.hpp"
#include "ddc/model.hpp"
#include "ddc/panel.hpp"

namespace ddc {

inline constexpr double kDefaultFloor = 1e-6;

/// Raises every entry of a probability vector to at least `floor` and
/// rescales the rest so the total stays 1. Entries pushed below the floor by
/// the rescaling are floored too, so afterwards every entry is >= floor.
inline void apply_floor(std::vector<double>& p, double floor) {
  const std::size_t n = p.size();
  if (floor <= 0.0 || n == 0) return;
  if (floor * static_cast<double>(n) >= 1.0)
    throw ArgumentError("probability floor too large for row length " + std::to_string(n));
  std::vector<char> pinned(n, 0);
  for (;;) {
    std::size_t k = 0;
    double free_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) ++k;
      else free_mass += p[i];
    }
    const double scale = (1.0 - static_cast<double>(k) * floor) / free_mass;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pinned[i] && p[i] * scale < floor) {
        pinned[i] = 1;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t i = 0; i < n; ++i) p[i] = pinned[i] ? floor : p[i] * scale;
      return;
    }
  }
}

struct CcpEstimate {
  RealTable ccps;  // NaN rows for unvisited states
  std::vector<std::uint64_t> state_counts;
  Table<std::uint64_t> action_counts;
};

struct TransitionEstimate {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<std::size_t> row_begin;  // num_pairs + 1 offsets into entries
  std::vector<Transition> entries;
  std::vector<std::uint64_t> observations;  // per pair
};

inline CcpEstimate estimate_ccps(const Panel& panel, double floor = kDefaultFloor) {
  if (panel.empty()) throw ArgumentError("estimate_ccps: empty panel");
  const std::size_t S = panel.num_states();
  const std::size_t J = panel.num_actions();
  CcpEstimate est{RealTable(S, J, std::numeric_limits<double>::quiet_NaN()),
                  std::vector<std::uint64_t>(S, 0), Table<std::uint64_t>(S, J, 0)};
  for (std::size_t i = 0; i < panel.size(); ++i) {
    ++est.state_counts[panel.states()[i]];
    ++est.action_counts(panel.states()[i], panel.actions()[i]);
  }
  std::vector<double> row(J);
  for (std::size_t s = 0; s < S; ++s) {
    if (est.state_counts[s] == 0) continue;
    for (std::size_t a = 0; a < J; ++a)
      row[a] = static_cast<double>(est.action_counts(s, a)) /
               static_cast<double>(est.state_counts[s]);
    apply_floor(row, floor);
    std::copy(row.begin(), row.end(), est.ccps.row(s));
  }
  return est;
}

/// Frequencies of s' after (s, a) over consecutive records of one agent.
/// Rows keep only successors that were observed, floored within that support.
inline TransitionEstimate estimate_transitions(const Panel& panel, double floor = kDefaultFloor) {
  if (panel.empty()) throw ArgumentError("estimate_transitions: empty panel");
  const std::size_t S = panel.num_states();
  const std::size_t J = panel.num_actions();
  const std::size_t P = S * J;

  // Sort observed (pair, next) keys; each run is one successor count.
  std::vector<std::uint64_t> keys;
  keys.reserve(panel.agents() * (panel.periods() > 0 ? panel.periods() - 1 : 0));
  for (std::size_t i = 0; i < panel.agents(); ++i)
    for (std::size_t t = 0; t + 1 < panel.periods(); ++t)
      keys.push_back((static_cast<std::uint64_t>(panel.state(i, t)) * J + panel.action(i, t)) * S +
                     panel.state(i, t + 1));
  std::sort(keys.begin(), keys.end());

  TransitionEstimate est;
  est.num_states = S;
  est.num_actions = J;
  est.row_begin.assign(P + 1, 0);
  est.observations.assign(P, 0);
  std::vector<std::uint64_t> run_counts;
  std::vector<StateIndex> run_next;
  for (std::size_t k = 0; k < keys.size();) {
    std::size_t e = k;
    while (e < keys.size() && keys[e] == keys[k]) ++e;
    run_next.push_back(static_cast<StateIndex>(keys[k] % S));
    run_counts.push_back(e - k);
    ++est.row_begin[keys[k] / S + 1];
    est.observations[keys[k] / S] += e - k;
    k = e;
  }
  for (std::size_t p = 0; p < P; ++p) est.row_begin[p + 1] += est.row_begin[p];
  est.entries.resize(run_next.size());
  std::vector<double> row;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t b = est.row_begin[p], e = est.row_begin[p + 1];
    if (b == e) continue;
    row.assign(e - b, 0.0);
    for (std::size_t k = b; k < e; ++k)
      row[k - b] = static_cast<double>(run_counts[k]) / static_cast<double>(est.observations[p]);
    apply_floor(row, floor);
    for (std::size_t k = b; k < e; ++k) est.entries[k] = {run_next[k], row[k - b]};
  }
  return est;
}

/// Estimated choice and transition probabilities, the input to path
/// simulation and the target of the minimum-distance objective.
class FirstStage {
 public:
  FirstStage() = default;
  FirstStage(CcpEstimate ccp, TransitionEstimate tr, double floor)
      : S_(ccp.ccps.rows()),
        J_(ccp.ccps.cols()),
        floor_(floor),
        ccps_(std::move(ccp.ccps)),
        state_counts_(std::move(ccp.state_counts)),
        action_counts_(std::move(ccp.action_counts)),
        row_begin_(std::move(tr.row_begin)),
        entries_(std::move(tr.entries)),
        observations_(std::move(tr.observations)) {
    if (tr.num_states != S_ || tr.num_actions != J_ || row_begin_.size() != S_ * J_ + 1)
      throw ArgumentError("first stage: choice and transition estimates disagree on shape");
    fingerprint_ = compute_fingerprint();
  }

  /// The true model as a first stage: every state counts as visited.
  static FirstStage exact(const ModelSpec& model, const RealTable& ccps) {
    const std::size_t S = model.num_states(), J = model.num_actions();
    check_ccp_table(ccps, S, J);
    CcpEstimate c{ccps, std::vector<std::uint64_t>(S, 1), Table<std::uint64_t>(S, J, 1)};
    TransitionEstimate t;
    t.num_states = S;
    t.num_actions = J;
    t.row_begin.push_back(0);
    t.observations.assign(S * J, 1);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < J; ++a) {
        for (const auto& tr : model.transition_row(static_cast<StateIndex>(s),
                                                   static_cast<ActionIndex>(a)))
          if (tr.prob > 0.0) t.entries.push_back(tr);
        t.row_begin.push_back(t.entries.size());
      }
    }
    return FirstStage(std::move(c), std::move(t), 0.0);
  }

  std::size_t num_states() const { return S_; }
  std::size_t num_actions() const { return J_; }
  double floor() const { return floor_; }

  bool visited(StateIndex s) const { return s < S_ && state_counts_[s] > 0; }
  bool has_transition(StateIndex s, ActionIndex a) const {
    return s < S_ && a < J_ && row_begin_[pair(s, a)] != row_begin_[pair(s, a) + 1];
  }
  /// True when every action at s has a transition row.
  bool fully_covered(StateIndex s) const {
    for (ActionIndex a = 0; a < J_; ++a)
      if (!has_transition(s, a)) return false;
    return true;
  }

  double ccp(StateIndex s, ActionIndex a) const {
    if (!visited(s)) throw CoverageError("no choice probabilities for unvisited state " +
                                         std::to_string(s));
    return ccps_(s, a);
  }
  const RealTable& ccps() const { return ccps_; }

  std::span<const Transition> transition_row(StateIndex s, ActionIndex a) const {
    if (!has_transition(s, a))
      throw CoverageError("no transition estimate for pair (" + std::to_string(s) + ", " +
                          std::to_string(a) + ")");
    const std::size_t p = pair(s, a);
    return {entries_.data() + row_begin_[p], row_begin_[p + 1] - row_begin_[p]};
  }

  std::uint64_t state_count(StateIndex s) const { return state_counts_[s]; }
  std::uint64_t action_count(StateIndex s, ActionIndex a) const { return action_counts_(s, a); }
  std::uint64_t transition_observations(StateIndex s, ActionIndex a) const {
    return observations_[pair(s, a)];
  }
  std::size_t visited_state_count() const {
    std::size_t n = 0;
    for (auto c : state_counts_) n += c > 0;
    return n;
  }

  const Digest& fingerprint() const { return fingerprint_; }

 private:
  std::size_t pair(StateIndex s, ActionIndex a) const {
    return static_cast<std::size_t>(s) * J_ + a;
  }

  Digest compute_fingerprint() const {
    Sha256 h;
    h.update_value(static_cast<std::uint64_t>(S_)).update_value(static_cast<std::uint64_t>(J_));
    h.update_value(floor_);
    h.update(ccps_.data().data(), ccps_.size() * sizeof(double));
    h.update(state_counts_.data(), state_counts_.size() * sizeof(std::uint64_t));
    h.update(action_counts_.data().data(), action_counts_.size() * sizeof(std::uint64_t));
    for (auto b : row_begin_) h.update_value(static_cast<std::uint64_t>(b));
    for (const auto& e : entries_) h.update_value(e.next).update_value(e.prob);
    h.update(observations_.data(), observations_.size() * sizeof(std::uint64_t));
    return h.finish();
  }

  std::size_t S_ = 0;
  std::size_t J_ = 0;
  double floor_ = 0.0;
  RealTable ccps_;
  std::vector<std::uint64_t> state_counts_;
  Table<std::uint64_t> action_counts_;
  std::vector<std::size_t> row_begin_;
  std::vector<Transition> entries_;
  std::vector<std::uint64_t> observations_;
  Digest fingerprint_{};
};

inline FirstStage estimate_first_stage(const Panel& panel, double floor = kDefaultFloor) {
  return FirstStage(estimate_ccps(panel, floor), estimate_transitions(panel, floor), floor);
}

/// Writes ccps.csv, transitions.csv, visits.csv and first_stage.meta into `dir`.
inline void write_first_stage(const FirstStage& fs, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  {
    auto out = open_output((d / "ccps.csv").string());
    out << "state,action,ccp,count\n";
    for (StateIndex s = 0; s < fs.num_states(); ++s) {
      if (!fs.visited(s)) continue;
      for (ActionIndex a = 0; a < fs.num_actions(); ++a)
        out << s << ',' << a << ',' << format_double(fs.ccp(s, a)) << ',' << fs.action_count(s, a)
            << '\n';
    }
  }
  {
    auto out = open_output((d / "transitions.csv").string());
    out << "state,action,next_state,prob,observations\n";
    for (StateIndex s = 0; s < fs.num_states(); ++s)
      for (ActionIndex a = 0; a < fs.num_actions(); ++a) {
        if (!fs.has_transition(s, a)) continue;
        for (const auto& t : fs.transition_row(s, a))
          out << s << ',' << a << ',' << t.next << ',' << format_double(t.prob) << ','
              << fs.transition_observations(s, a) << '\n';
      }
  }
  {
    auto out = open_output((d / "visits.csv").string());
    out << "state,visits\n";
    for (StateIndex s = 0; s < fs.num_states(); ++s) out << s << ',' << fs.state_count(s) << '\n';
  }
  auto meta = open_output((d / "first_stage.meta").string());
  meta << "num_states = " << fs.num_states() << "\n"
       << "num_actions = " << fs.num_actions() << "\n"
       << "floor = " << format_double(fs.floor()) << "\n"
       << "fingerprint = " << to_hex(fs.fingerprint()) << "\n";
}

inline FirstStage read_first_stage(const std::string& dir) {
  const std::filesystem::path d(dir);
  const auto meta = KeyValueConfig::load((d / "first_stage.meta").string());
  const auto S = static_cast<std::size_t>(meta.get_int("num_states"));
  const auto J = static_cast<std::size_t>(meta.get_int("num_actions"));
  const double floor = parse_double(meta.get("floor"), "first_stage.meta");
  std::vector<std::string> f;

  CcpEstimate c{RealTable(S, J, std::numeric_limits<double>::quiet_NaN()),
                std::vector<std::uint64_t>(S, 0), Table<std::uint64_t>(S, J, 0)};
  {
    CsvReader in((d / "visits.csv").string());
    in.expect_header({"state", "visits"});
    while (in.next(f)) {
      const auto s = parse_uint(f[0], in.where());
      if (s >= S) throw FormatError(in.where() + ": state out of range");
      c.state_counts[s] = parse_uint(f[1], in.where());
    }
  }
  {
    CsvReader in((d / "ccps.csv").string());
    in.expect_header({"state", "action", "ccp", "count"});
    while (in.next(f)) {
      const auto s = parse_uint(f[0], in.where()), a = parse_uint(f[1], in.where());
      if (s >= S || a >= J) throw FormatError(in.where() + ": pair out of range");
      c.ccps(s, a) = parse_double(f[2], in.where());
      c.action_counts(s, a) = parse_uint(f[3], in.where());
    }
  }
  TransitionEstimate t;
  t.num_states = S;
  t.num_actions = J;
  t.row_begin.assign(S * J + 1, 0);
  t.observations.assign(S * J, 0);
  {
    CsvReader in((d / "transitions.csv").string());
    in.expect_header({"state", "action", "next_state", "prob", "observations"});
    std::size_t last = 0;
    while (in.next(f)) {
      const auto s = parse_uint(f[0], in.where()), a = parse_uint(f[1], in.where());
      const auto next = parse_uint(f[2], in.where());
      if (s >= S || a >= J || next >= S) throw FormatError(in.where() + ": entry out of range");
      const std::size_t p = s * J + a;
      if (p < last) throw FormatError(in.where() + ": rows must be sorted by (state, action)");
      last = p;
      t.entries.push_back({static_cast<StateIndex>(next), parse_double(f[3], in.where())});
      ++t.row_begin[p + 1];
      t.observations[p] = parse_uint(f[4], in.where());
    }
    for (std::size_t p = 0; p < S * J; ++p) t.row_begin[p + 1] += t.row_begin[p];
  }
  FirstStage fs(std::move(c), std::move(t), floor);
  if (meta.has("fingerprint") && meta.get("fingerprint") != to_hex(fs.fingerprint()))
    throw FormatError(dir + ": first stage fingerprint mismatch");
  return fs;
}

}  // namespace ddc
