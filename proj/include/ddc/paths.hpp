#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ddc/core.hpp"
#include "ddc/csv.hpp"
#include "ddc/first_stage.hpp"
#include "ddc/hash.hpp"
#include "ddc/parallel.hpp"
#include "ddc/rng.hpp"

namespace ddc {

using StatePair = std::pair<StateIndex, ActionIndex>;

/// How path k chooses its forced initial (state, action).
struct StartRule {
  enum class Kind {
    AllPairs,   // every pair with a transition row starts N_path / |pairs| paths, round-robin
    Bootstrap,  // draw distinct observed states uniformly, then one path per action
    BootstrapWeighted,  // as Bootstrap, with states weighted by panel record counts
    Fixed,      // cycle through an explicit list
  };
  Kind kind = Kind::AllPairs;
  std::vector<StatePair> starts;

  static StartRule all_pairs() { return {Kind::AllPairs, {}}; }
  static StartRule bootstrap() { return {Kind::Bootstrap, {}}; }
  static StartRule bootstrap_weighted() { return {Kind::BootstrapWeighted, {}}; }
  static StartRule fixed(std::vector<StatePair> starts) { return {Kind::Fixed, std::move(starts)}; }

  static StartRule parse(const std::string& text) {
    if (text == "all-pairs") return all_pairs();
    if (text == "bootstrap") return bootstrap();
    if (text == "bootstrap-weighted") return bootstrap_weighted();
    throw ArgumentError("unknown start rule `" + text +
                        "` (expected all-pairs, bootstrap or bootstrap-weighted)");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::AllPairs: return "all-pairs";
      case Kind::Bootstrap: return "bootstrap";
      case Kind::BootstrapWeighted: return "bootstrap-weighted";
      case Kind::Fixed: return "fixed";
    }
    return "?";
  }
};

/// N_path forward paths of T_end (state, action) pairs, stored path-major.
class PathSet {
 public:
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 64;

  PathSet() = default;
  PathSet(std::size_t S, std::size_t J, std::size_t T_end, std::size_t N_path)
      : S_(S), J_(J), T_(T_end), N_(N_path), data_(2 * T_end * N_path, 0) {}

  std::size_t num_states() const { return S_; }
  std::size_t num_actions() const { return J_; }
  std::size_t t_end() const { return T_; }
  std::size_t num_paths() const { return N_; }
  std::size_t num_pairs() const { return N_ * T_; }

  StateIndex state(std::size_t k, std::size_t t) const { return data_[2 * (k * T_ + t)]; }
  ActionIndex action(std::size_t k, std::size_t t) const { return data_[2 * (k * T_ + t) + 1]; }
  void set(std::size_t k, std::size_t t, StateIndex s, ActionIndex a) {
    data_[2 * (k * T_ + t)] = s;
    data_[2 * (k * T_ + t) + 1] = a;
  }
  /// Interleaved state, action stream of path k.
  const std::uint32_t* path(std::size_t k) const { return data_.data() + 2 * k * T_; }
  const std::vector<std::uint32_t>& raw() const { return data_; }

  std::uint64_t seed = 0;
  std::string start_rule;
  std::array<std::uint8_t, 16> first_stage_hash{};

  /// Checksum over the header fields and the pair stream.
  std::array<std::uint8_t, 16> checksum() const {
    auto header = header_prefix();
    Sha256 h;
    h.update(header.data(), header.size());
    if constexpr (std::endian::native == std::endian::little) {
      h.update(data_.data(), data_.size() * sizeof(std::uint32_t));
    } else {
      for (auto v : data_) {
        std::uint8_t b[4];
        put_le(b, v);
        h.update(b, 4);
      }
    }
    const Digest d = h.finish();
    std::array<std::uint8_t, 16> out{};
    std::copy_n(d.begin(), 16, out.begin());
    return out;
  }

  std::string id() const {
    const auto c = checksum();
    return to_hex(c.data(), c.size());
  }

  /// Caches id() for cheap lookup; call again after mutating pairs.
  void seal() { sealed_id_ = id(); }
  const std::string& sealed_id() const { return sealed_id_; }

  std::size_t binary_size() const { return kHeaderBytes + data_.size() * sizeof(std::uint32_t); }

  friend bool operator==(const PathSet& a, const PathSet& b) {
    return a.S_ == b.S_ && a.J_ == b.J_ && a.T_ == b.T_ && a.N_ == b.N_ && a.seed == b.seed &&
           a.first_stage_hash == b.first_stage_hash && a.data_ == b.data_;
  }

  /// First 48 header bytes (everything except the checksum).
  std::array<std::uint8_t, 48> header_prefix() const {
    std::array<std::uint8_t, 48> h{};
    std::memcpy(h.data(), "DDCP", 4);
    put_le(h.data() + 4, kVersion);
    put_le(h.data() + 6, std::uint16_t{0});
    put_le(h.data() + 8, narrow(S_));
    put_le(h.data() + 12, narrow(J_));
    put_le(h.data() + 16, narrow(T_));
    put_le(h.data() + 20, narrow(N_));
    put_le(h.data() + 24, seed);
    std::copy(first_stage_hash.begin(), first_stage_hash.end(), h.begin() + 32);
    return h;
  }

  template <class T>
  static void put_le(std::uint8_t* out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
  template <class T>
  static T get_le(const std::uint8_t* in) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[i]) << (8 * i);
    return v;
  }

  std::vector<std::uint32_t>& mutable_raw() { return data_; }

 private:
  static std::uint32_t narrow(std::size_t v) {
    if (v > 0xffffffffu) throw ArgumentError("path set dimension exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
  }

  std::size_t S_ = 0;
  std::size_t J_ = 0;
  std::size_t T_ = 0;
  std::size_t N_ = 0;
  std::vector<std::uint32_t> data_;
  std::string sealed_id_;
};

namespace detail {

/// Start pair of every path under `rule`.
inline std::vector<StatePair> assign_starts(const FirstStage& fs, const StartRule& rule,
                                            std::size_t n_path, std::uint64_t seed) {
  const std::size_t S = fs.num_states(), J = fs.num_actions();
  std::vector<StatePair> starts(n_path);
  switch (rule.kind) {
    case StartRule::Kind::AllPairs: {
      std::vector<StatePair> pairs;
      for (StateIndex s = 0; s < S; ++s)
        for (ActionIndex a = 0; a < J; ++a)
          if (fs.has_transition(s, a)) pairs.emplace_back(s, a);
      if (pairs.empty()) throw CoverageError("first stage has no pair with a transition row");
      if (n_path % pairs.size() != 0)
        throw ArgumentError("all-pairs start rule: N_path " + std::to_string(n_path) +
                            " is not a multiple of the " + std::to_string(pairs.size()) +
                            " covered pairs");
      for (std::size_t k = 0; k < n_path; ++k) starts[k] = pairs[k % pairs.size()];
      break;
    }
    case StartRule::Kind::Bootstrap:
    case StartRule::Kind::BootstrapWeighted: {
      if (n_path % J != 0)
        throw ArgumentError("bootstrap start rule: N_path must be a multiple of J = " +
                            std::to_string(J));
      // Observed states with a transition row for every action, drawn with
      // replacement.
      const bool weighted = rule.kind == StartRule::Kind::BootstrapWeighted;
      std::vector<StateIndex> states;
      std::vector<std::uint64_t> cum;
      std::uint64_t total = 0;
      for (StateIndex s = 0; s < S; ++s) {
        if (!fs.visited(s) || !fs.fully_covered(s)) continue;
        total += weighted ? fs.state_count(s) : 1;
        states.push_back(s);
        cum.push_back(total);
      }
      if (states.empty()) throw CoverageError("no state has transition rows for every action");
      Rng rng(derive_seed(seed, {kPathStream, ~std::uint64_t{0}}));
      for (std::size_t b = 0; b < n_path / J; ++b) {
        const std::uint64_t r = rng.below(total);
        const auto it = std::upper_bound(cum.begin(), cum.end(), r);
        const StateIndex s = states[static_cast<std::size_t>(it - cum.begin())];
        for (ActionIndex a = 0; a < J; ++a) starts[b * J + a] = {s, a};
      }
      break;
    }
    case StartRule::Kind::Fixed: {
      if (rule.starts.empty()) throw ArgumentError("fixed start rule without start pairs");
      for (std::size_t k = 0; k < n_path; ++k) starts[k] = rule.starts[k % rule.starts.size()];
      break;
    }
  }
  for (const auto& [s, a] : starts) {
    if (s >= S || a >= J)
      throw ArgumentError("start pair (" + std::to_string(s) + ", " + std::to_string(a) +
                          ") out of range");
    if (!fs.visited(s) || !fs.has_transition(s, a))
      throw CoverageError("start pair (" + std::to_string(s) + ", " + std::to_string(a) +
                          ") lacks first-stage rows");
  }
  return starts;
}

}  // namespace detail

/// Forward simulation from the first stage. The initial action of each path
/// is forced; later states follow p-hat and actions follow pi-hat. Before the
/// final step, draws are confined to states and actions with transition
/// rows so the path can always continue.
inline PathSet simulate_paths(const FirstStage& fs, const StartRule& rule, std::size_t t_end,
                              std::size_t n_path, std::uint64_t seed) {
  if (t_end < 2) throw ArgumentError("T_end must be at least 2");
  if (n_path == 0) throw ArgumentError("N_path must be positive");
  const std::size_t S = fs.num_states(), J = fs.num_actions();
  const auto starts = detail::assign_starts(fs, rule, n_path, seed);

  // Choice rows restricted to actions that can be continued from.
  RealTable cont_ccps(S, J, 0.0);
  std::vector<char> continuable(S, 0);
  for (StateIndex s = 0; s < S; ++s) {
    if (!fs.visited(s)) continue;
    double mass = 0.0;
    for (ActionIndex a = 0; a < J; ++a)
      if (fs.has_transition(s, a)) mass += fs.ccp(s, a);
    if (mass <= 0.0) continue;
    continuable[s] = 1;
    for (ActionIndex a = 0; a < J; ++a)
      cont_ccps(s, a) = fs.has_transition(s, a) ? fs.ccp(s, a) / mass : 0.0;
  }

  PathSet set(S, J, t_end, n_path);
  set.seed = seed;
  set.start_rule = rule.describe();
  std::copy_n(fs.fingerprint().begin(), 16, set.first_stage_hash.begin());

  parallel_for(n_path, [&](std::size_t k) {
    Rng rng(derive_seed(seed, {kPathStream, k}));
    std::vector<double> probs;
    auto [s, a] = starts[k];
    set.set(k, 0, s, a);
    for (std::size_t t = 1; t < t_end; ++t) {
      const bool last = t + 1 == t_end;
      const auto row = fs.transition_row(s, a);
      StateIndex next;
      if (row.size() == 1) {
        next = row[0].next;
        if (!last && !continuable[next]) next = S;
      } else {
        probs.resize(row.size());
        double mass = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
          probs[i] = (last || continuable[row[i].next]) ? row[i].prob : 0.0;
          mass += probs[i];
        }
        next = mass > 0.0 ? row[rng.categorical(probs.data(), probs.size())].next
                          : static_cast<StateIndex>(S);
      }
      if (next == S)
        throw CoverageError("path from (" + std::to_string(starts[k].first) + ", " +
                            std::to_string(starts[k].second) + ") cannot continue past pair (" +
                            std::to_string(s) + ", " + std::to_string(a) + ")");
      s = next;
      a = static_cast<ActionIndex>(
          rng.categorical(last ? fs.ccps().row(s) : cont_ccps.row(s), J));
      set.set(k, t, s, a);
    }
  });
  set.seal();
  return set;
}

inline void write_paths(const PathSet& set, const std::string& file) {
  auto out = open_output(file);
  const auto prefix = set.header_prefix();
  const auto sum = set.checksum();
  out.write(reinterpret_cast<const char*>(prefix.data()), prefix.size());
  out.write(reinterpret_cast<const char*>(sum.data()), sum.size());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(set.raw().data()),
              static_cast<std::streamsize>(set.raw().size() * sizeof(std::uint32_t)));
  } else {
    for (auto v : set.raw()) {
      std::uint8_t b[4];
      PathSet::put_le(b, v);
      out.write(reinterpret_cast<const char*>(b), 4);
    }
  }
  if (!out) throw Error("failed writing " + file);
}

inline PathSet read_paths(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file);
  std::array<std::uint8_t, PathSet::kHeaderBytes> h{};
  if (!in.read(reinterpret_cast<char*>(h.data()), h.size()))
    throw FormatError(file + ": truncated header");
  if (std::memcmp(h.data(), "DDCP", 4) != 0) throw FormatError(file + ": bad magic");
  const auto version = PathSet::get_le<std::uint16_t>(h.data() + 4);
  if (version != PathSet::kVersion)
    throw FormatError(file + ": unsupported version " + std::to_string(version));
  PathSet set(PathSet::get_le<std::uint32_t>(h.data() + 8),
              PathSet::get_le<std::uint32_t>(h.data() + 12),
              PathSet::get_le<std::uint32_t>(h.data() + 16),
              PathSet::get_le<std::uint32_t>(h.data() + 20));
  set.seed = PathSet::get_le<std::uint64_t>(h.data() + 24);
  std::copy_n(h.begin() + 32, 16, set.first_stage_hash.begin());
  auto& raw = set.mutable_raw();
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t))))
    throw FormatError(file + ": truncated pair stream");
  if constexpr (std::endian::native != std::endian::little)
    for (auto& v : raw) v = PathSet::get_le<std::uint32_t>(reinterpret_cast<std::uint8_t*>(&v));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(file + ": trailing bytes");
  const auto sum = set.checksum();
  if (!std::equal(sum.begin(), sum.end(), h.begin() + 48))
    throw FormatError(file + ": checksum mismatch");
  for (std::size_t k = 0; k < set.num_paths(); ++k)
    for (std::size_t t = 0; t < set.t_end(); ++t)
      if (set.state(k, t) >= set.num_states() || set.action(k, t) >= set.num_actions())
        throw FormatError(file + ": pair out of range");
  set.seal();
  return set;
}

/// CSV export (path, t, state, action).
inline void write_paths_csv(const PathSet& set, const std::string& file) {
  auto out = open_output(file);
  out << "path,t,state,action\n";
  for (std::size_t k = 0; k < set.num_paths(); ++k)
    for (std::size_t t = 0; t < set.t_end(); ++t)
      out << k << ',' << t << ',' << set.state(k, t) << ',' << set.action(k, t) << '\n';
}

/// Exact size in bytes of the CSV export, without rendering it.
inline std::uint64_t csv_byte_size(const PathSet& set) {
  const auto digits = [](std::uint64_t v) {
    std::uint64_t n = 1;
    while (v >= 10) v /= 10, ++n;
    return n;
  };
  std::uint64_t bytes = sizeof("path,t,state,action\n") - 1;
  std::uint64_t t_digits = 0;
  for (std::size_t t = 0; t < set.t_end(); ++t) t_digits += digits(t);
  for (std::size_t k = 0; k < set.num_paths(); ++k) {
    bytes += set.t_end() * (digits(k) + 4) + t_digits;
    for (std::size_t t = 0; t < set.t_end(); ++t)
      bytes += digits(set.state(k, t)) + digits(set.action(k, t));
  }
  return bytes;
}

}  // namespace ddc
