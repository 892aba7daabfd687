#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ddc/config.hpp"
#include "ddc/core.hpp"
#include "ddc/hash.hpp"
#include "ddc/rng.hpp"

namespace ddc {

struct Transition {
  StateIndex next;
  double prob;
};

/// A finite MDP with utility linear in the structural parameters:
///
///   u(s, a; theta) = offset(s, a) + sum_k coef(s, a, k) * theta_k
///
/// and sparse transition rows p(. | s, a). Immutable once built.
class ModelSpec {
 public:
  class Builder;

  const std::string& kind() const { return kind_; }
  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_pairs() const { return num_states_ * num_actions_; }
  std::size_t num_params() const { return theta_.size(); }
  double beta() const { return beta_; }

  /// Reference (true) parameter vector; also fixes names and bounds.
  const Theta& reference_theta() const { return theta_; }
  const std::string& config_hash() const { return config_hash_; }

  double flow_utility(StateIndex s, ActionIndex a, const Theta& theta) const {
    check_pair(s, a);
    check_theta(theta.values());
    return utility_at(s, a, theta.values().data());
  }

  /// u(s, a; theta) for every pair, as an S x J table.
  RealTable utility_table(const std::vector<double>& theta) const {
    check_theta(theta);
    RealTable out(num_states_, num_actions_);
    for (std::size_t s = 0; s < num_states_; ++s)
      for (std::size_t a = 0; a < num_actions_; ++a)
        out(s, a) = utility_at(static_cast<StateIndex>(s), static_cast<ActionIndex>(a),
                               theta.data());
    return out;
  }

  /// The theta-independent part of u(s, a).
  double utility_offset(StateIndex s, ActionIndex a) const {
    check_pair(s, a);
    return offset_[pair(s, a)];
  }

  std::span<const Transition> transition_row(StateIndex s, ActionIndex a) const {
    check_pair(s, a);
    const std::size_t p = pair(s, a);
    return {transitions_.data() + row_begin_[p], row_begin_[p + 1] - row_begin_[p]};
  }

  void check_pair(StateIndex s, ActionIndex a) const {
    if (s >= num_states_)
      throw ArgumentError("state index " + std::to_string(s) + " out of range [0, " +
                          std::to_string(num_states_) + ")");
    if (a >= num_actions_)
      throw ArgumentError("action index " + std::to_string(a) + " out of range [0, " +
                          std::to_string(num_actions_) + ")");
  }

  void check_theta(const std::vector<double>& theta) const {
    if (theta.size() != theta_.size())
      throw ArgumentError("model `" + kind_ + "` expects " + std::to_string(theta_.size()) +
                          " parameters, got " + std::to_string(theta.size()));
  }

  ModelSpec with_config_hash(std::string hash) const {
    ModelSpec copy = *this;
    copy.config_hash_ = std::move(hash);
    return copy;
  }

 private:
  ModelSpec() = default;

  std::size_t pair(StateIndex s, ActionIndex a) const {
    return static_cast<std::size_t>(s) * num_actions_ + a;
  }

  double utility_at(StateIndex s, ActionIndex a, const double* theta) const {
    const std::size_t p = pair(s, a);
    const std::size_t k = theta_.size();
    double u = offset_[p];
    const double* c = coef_.data() + p * k;
    for (std::size_t i = 0; i < k; ++i) u += c[i] * theta[i];
    return u;
  }

  std::string kind_;
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  double beta_ = 0.0;
  Theta theta_;
  std::string config_hash_;
  std::vector<double> offset_;
  std::vector<double> coef_;
  std::vector<std::size_t> row_begin_;
  std::vector<Transition> transitions_;
};

class ModelSpec::Builder {
 public:
  Builder(std::string kind, std::size_t num_states, std::size_t num_actions, double beta,
          Theta reference)
      : kind_(std::move(kind)),
        num_states_(num_states),
        num_actions_(num_actions),
        beta_(beta),
        theta_(std::move(reference)),
        offset_(num_states * num_actions, 0.0),
        coef_(num_states * num_actions * theta_.size(), 0.0),
        rows_(num_states * num_actions) {
    if (num_states == 0 || num_actions == 0)
      throw ArgumentError("model needs at least one state and one action");
    if (!(beta > 0.0 && beta < 1.0))
      throw ArgumentError("discount factor must lie strictly inside (0, 1), got " +
                          std::to_string(beta));
  }

  Builder& utility(StateIndex s, ActionIndex a, double offset, const std::vector<double>& coef) {
    check(s, a);
    if (coef.size() != theta_.size()) throw ArgumentError("utility coefficient size mismatch");
    const std::size_t p = static_cast<std::size_t>(s) * num_actions_ + a;
    offset_[p] = offset;
    std::copy(coef.begin(), coef.end(), coef_.begin() + p * theta_.size());
    return *this;
  }

  Builder& transition(StateIndex s, ActionIndex a, StateIndex next, double prob) {
    check(s, a);
    if (next >= num_states_) throw ArgumentError("transition target out of range");
    if (!(prob >= 0.0)) throw ArgumentError("transition probability must be non-negative");
    rows_[static_cast<std::size_t>(s) * num_actions_ + a].push_back({next, prob});
    return *this;
  }

  ModelSpec build() && {
    ModelSpec m;
    m.kind_ = std::move(kind_);
    m.num_states_ = num_states_;
    m.num_actions_ = num_actions_;
    m.beta_ = beta_;
    m.theta_ = std::move(theta_);
    m.offset_ = std::move(offset_);
    m.coef_ = std::move(coef_);
    m.row_begin_.reserve(rows_.size() + 1);
    m.row_begin_.push_back(0);
    for (std::size_t p = 0; p < rows_.size(); ++p) {
      double total = 0.0;
      for (const auto& t : rows_[p]) total += t.prob;
      if (std::abs(total - 1.0) > 1e-12)
        throw ArgumentError("transition row for pair " + std::to_string(p) + " sums to " +
                            std::to_string(total));
      m.transitions_.insert(m.transitions_.end(), rows_[p].begin(), rows_[p].end());
      m.row_begin_.push_back(m.transitions_.size());
    }
    for (double v : m.offset_)
      if (!std::isfinite(v)) throw ArgumentError("non-finite utility offset");
    for (double v : m.coef_)
      if (!std::isfinite(v)) throw ArgumentError("non-finite utility coefficient");
    return m;
  }

 private:
  void check(StateIndex s, ActionIndex a) const {
    if (s >= num_states_ || a >= num_actions_) throw ArgumentError("pair index out of range");
  }

  std::string kind_;
  std::size_t num_states_;
  std::size_t num_actions_;
  double beta_;
  Theta theta_;
  std::vector<double> offset_;
  std::vector<double> coef_;
  std::vector<std::vector<Transition>> rows_;
};

// ---------------------------------------------------------------------------
// Machine replacement

/// Mileage states 1..N stored at flat indices 0..N-1. Action 0 maintains
/// (cost theta_MC * s), action 1 replaces (cost theta_RC) and resets to 1.
class MachineReplacementModel {
 public:
  static inline const std::vector<std::string> kParamNames = {"theta_MC", "theta_RC"};

  explicit MachineReplacementModel(std::size_t max_mileage, double beta = 0.9,
                                   std::vector<double> theta = {1.0, 4.0})
      : max_mileage_(max_mileage), spec_(build(max_mileage, beta, std::move(theta))) {}

  const ModelSpec& spec() const { return spec_; }
  std::size_t max_mileage() const { return max_mileage_; }

  static StateIndex index_of(std::size_t mileage) {
    if (mileage == 0) throw ArgumentError("mileage states start at 1");
    return static_cast<StateIndex>(mileage - 1);
  }
  static std::size_t mileage_of(StateIndex s) { return static_cast<std::size_t>(s) + 1; }

  void set_config_hash(std::string hash) { spec_ = spec_.with_config_hash(std::move(hash)); }

 private:
  static ModelSpec build(std::size_t n, double beta, std::vector<double> theta) {
    if (n == 0) throw ArgumentError("machine model needs N >= 1");
    ModelSpec::Builder b("machine", n, 2, beta, Theta(kParamNames, std::move(theta)));
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = static_cast<StateIndex>(i);
      const double mileage = static_cast<double>(i + 1);
      b.utility(s, 0, 0.0, {-mileage, 0.0});
      b.utility(s, 1, 0.0, {0.0, -1.0});
      b.transition(s, 0, static_cast<StateIndex>(std::min(i + 1, n - 1)), 1.0);
      b.transition(s, 1, 0, 1.0);
    }
    return std::move(b).build();
  }

  std::size_t max_mileage_;
  ModelSpec spec_;
};

// ---------------------------------------------------------------------------
// Food choice

struct FoodState {
  std::uint8_t salt = 0;
  std::uint8_t sugar = 0;
  std::uint8_t fat = 0;
  std::uint8_t variety = 0;      // h: consecutive repeats of the same recipe
  std::uint8_t last_action = 0;  // 0 = skipped, m = recipe m

  friend bool operator==(const FoodState&, const FoodState&) = default;
};

struct Recipe {
  int salt = 0;
  int sugar = 0;
  int fat = 0;
  double fixed_utility = 0.0;
};

struct FoodChoiceConfig {
  std::size_t recipes = 2;
  int stock_max = 3;
  int h_max = 3;
  double beta = 0.9;
  /// theta_SLT, theta_SUG, theta_SAT, theta_variety, theta_skip
  std::vector<double> theta = {0.5, 0.5, 0.75, 0.1, 5.0};
  std::uint64_t attribute_seed = 1;
  /// Explicit (salt, sugar, fat) per recipe; drawn from the seed when empty.
  std::vector<std::array<int, 3>> attributes;
  /// Explicit r_fixed per recipe; defaults to (.5, .4) for two recipes and
  /// seed-drawn uniform [.3, .5] otherwise.
  std::vector<double> fixed_utility;
};

/// Consumer recipe-box model. Actions: 0 skips, m = 1..M orders recipe m.
/// Ordering carries stocks forward and adds the recipe's attributes (capped at
/// STOCK_max); skipping resets the consumer to the fresh zero state. The
/// state space is the forward closure from the zero state, indexed in BFS
/// order with the zero state at index 0.
class FoodChoiceModel {
 public:
  static inline const std::vector<std::string> kParamNames = {
      "theta_SLT", "theta_SUG", "theta_SAT", "theta_variety", "theta_skip"};

  explicit FoodChoiceModel(FoodChoiceConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.recipes == 0 || cfg_.recipes > 250) throw ArgumentError("recipes must be in [1, 250]");
    if (cfg_.stock_max < 0 || cfg_.stock_max > 255) throw ArgumentError("stock_max out of range");
    if (cfg_.h_max < 0 || cfg_.h_max > 255) throw ArgumentError("h_max out of range");
    Rng rng(derive_seed(cfg_.attribute_seed, {kModelStream}));
    if (!cfg_.attributes.empty()) {
      recipes_ = explicit_recipes(cfg_);
      enumerate_states();
    } else {
      // Redraw until the reachable states identify every parameter.
      for (int attempt = 0;; ++attempt) {
        if (attempt == 1000)
          throw ConfigError("food model: no identified attribute draw for this configuration");
        recipes_ = draw_recipes(cfg_, rng);
        enumerate_states();
        if (identified()) break;
      }
    }
    assign_fixed_utility(cfg_, rng, recipes_);
    spec_ = std::make_unique<ModelSpec>(build_spec());
  }

  FoodChoiceModel(const FoodChoiceModel& o)
      : cfg_(o.cfg_), recipes_(o.recipes_), states_(o.states_), index_(o.index_),
        spec_(std::make_unique<ModelSpec>(*o.spec_)) {}
  FoodChoiceModel(FoodChoiceModel&&) noexcept = default;

  const ModelSpec& spec() const { return *spec_; }
  const FoodChoiceConfig& config() const { return cfg_; }
  const std::vector<Recipe>& recipes() const { return recipes_; }
  std::size_t num_states() const { return states_.size(); }

  /// Upper bound used by the closed-form count M * (H+1) * (STOCK+1)^3 + 1.
  std::size_t grid_bound() const {
    const std::size_t st = static_cast<std::size_t>(cfg_.stock_max) + 1;
    return cfg_.recipes * (static_cast<std::size_t>(cfg_.h_max) + 1) * st * st * st + 1;
  }

  StateIndex encode(const FoodState& x) const {
    if (x.salt > cfg_.stock_max || x.sugar > cfg_.stock_max || x.fat > cfg_.stock_max)
      throw ArgumentError("food state: stock above STOCK_max");
    if (x.variety > cfg_.h_max) throw ArgumentError("food state: variety counter above H_max");
    if (x.last_action > cfg_.recipes) throw ArgumentError("food state: last action out of range");
    auto it = index_.find(pack(x));
    if (it == index_.end()) throw ArgumentError("food state is not reachable from the zero state");
    return it->second;
  }

  FoodState decode(StateIndex s) const {
    if (s >= states_.size()) throw ArgumentError("food state index out of range");
    return states_[s];
  }

  FoodState next_state(const FoodState& x, ActionIndex a) const {
    if (a > cfg_.recipes) throw ArgumentError("food action out of range");
    if (a == 0) return FoodState{};
    const Recipe& r = recipes_[a - 1];
    const auto cap = [&](int v) {
      return static_cast<std::uint8_t>(std::min(v, cfg_.stock_max));
    };
    FoodState y;
    y.salt = cap(x.salt + r.salt);
    y.sugar = cap(x.sugar + r.sugar);
    y.fat = cap(x.fat + r.fat);
    y.variety = (x.last_action == a)
                    ? static_cast<std::uint8_t>(std::min<int>(x.variety + 1, cfg_.h_max))
                    : std::uint8_t{0};
    y.last_action = static_cast<std::uint8_t>(a);
    return y;
  }

  void set_config_hash(std::string hash) {
    spec_ = std::make_unique<ModelSpec>(spec_->with_config_hash(std::move(hash)));
  }

 private:
  static std::uint64_t pack(const FoodState& x) {
    return std::uint64_t{x.salt} | (std::uint64_t{x.sugar} << 8) | (std::uint64_t{x.fat} << 16) |
           (std::uint64_t{x.variety} << 24) | (std::uint64_t{x.last_action} << 32);
  }

  static std::vector<Recipe> explicit_recipes(const FoodChoiceConfig& cfg) {
    if (cfg.attributes.size() != cfg.recipes)
      throw ArgumentError("food model: need one attribute triple per recipe");
    std::vector<Recipe> out(cfg.recipes);
    for (std::size_t m = 0; m < cfg.recipes; ++m) {
      const auto& at = cfg.attributes[m];
      for (int v : at)
        if (v < 0) throw ArgumentError("food model: attributes must be non-negative");
      out[m].salt = at[0];
      out[m].sugar = at[1];
      out[m].fat = at[2];
    }
    return out;
  }

  /// Draws in {0, 1, 2}. All-zero recipes are redrawn, and so are
  /// duplicates while the 26 distinct non-zero triples are not exhausted.
  static std::vector<Recipe> draw_recipes(const FoodChoiceConfig& cfg, Rng& rng) {
    std::vector<Recipe> out(cfg.recipes);
    const bool distinct = cfg.recipes <= 26;
    for (std::size_t m = 0; m < cfg.recipes; ++m) {
      for (;;) {
        Recipe r;
        r.salt = static_cast<int>(rng.below(3));
        r.sugar = static_cast<int>(rng.below(3));
        r.fat = static_cast<int>(rng.below(3));
        if (r.salt + r.sugar + r.fat == 0) continue;
        bool duplicate = false;
        for (std::size_t k = 0; k < m; ++k)
          duplicate |= out[k].salt == r.salt && out[k].sugar == r.sugar && out[k].fat == r.fat;
        if (distinct && duplicate) continue;
        out[m] = r;
        break;
      }
    }
    return out;
  }

  static void assign_fixed_utility(const FoodChoiceConfig& cfg, Rng& rng,
                                   std::vector<Recipe>& out) {
    if (!cfg.fixed_utility.empty()) {
      if (cfg.fixed_utility.size() != cfg.recipes)
        throw ArgumentError("food model: need one fixed utility per recipe");
      for (std::size_t m = 0; m < cfg.recipes; ++m) out[m].fixed_utility = cfg.fixed_utility[m];
    } else if (cfg.recipes == 2) {
      out[0].fixed_utility = 0.5;
      out[1].fixed_utility = 0.4;
    } else {
      for (auto& r : out) r.fixed_utility = 0.3 + 0.2 * rng.uniform();
    }
  }

  /// True when the statistics (salt, sugar, fat, variety, 1) over the
  /// reachable states span all five dimensions.
  bool identified() const {
    constexpr std::size_t K = 5;
    std::array<std::array<double, K>, K> g{};
    for (const auto& x : states_) {
      const std::array<double, K> r = {double(x.salt), double(x.sugar), double(x.fat),
                                       double(x.variety), 1.0};
      for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) g[i][j] += r[i] * r[j];
    }
    // Gaussian elimination with partial pivoting on the Gram matrix.
    for (std::size_t c = 0; c < K; ++c) {
      std::size_t piv = c;
      for (std::size_t i = c + 1; i < K; ++i)
        if (std::abs(g[i][c]) > std::abs(g[piv][c])) piv = i;
      if (std::abs(g[piv][c]) <= 1e-9 * static_cast<double>(states_.size())) return false;
      std::swap(g[c], g[piv]);
      for (std::size_t i = c + 1; i < K; ++i) {
        const double f = g[i][c] / g[c][c];
        for (std::size_t j = c; j < K; ++j) g[i][j] -= f * g[c][j];
      }
    }
    return true;
  }

  void enumerate_states() {
    states_.clear();
    index_.clear();
    const FoodState origin{};
    states_.push_back(origin);
    index_.emplace(pack(origin), 0);
    for (std::size_t head = 0; head < states_.size(); ++head) {
      const FoodState x = states_[head];
      for (ActionIndex a = 0; a <= cfg_.recipes; ++a) {
        const FoodState y = next_state(x, a);
        if (index_.emplace(pack(y), static_cast<StateIndex>(states_.size())).second)
          states_.push_back(y);
      }
    }
  }

  ModelSpec build_spec() const {
    if (cfg_.theta.size() != kParamNames.size())
      throw ArgumentError("food model expects 5 parameters");
    const std::size_t J = cfg_.recipes + 1;
    ModelSpec::Builder b("food", states_.size(), J, cfg_.beta, Theta(kParamNames, cfg_.theta));
    for (std::size_t i = 0; i < states_.size(); ++i) {
      const auto s = static_cast<StateIndex>(i);
      const FoodState& x = states_[i];
      b.utility(s, 0, 0.0, {0, 0, 0, 0, -1.0});
      for (ActionIndex a = 1; a < J; ++a) {
        b.utility(s, a, recipes_[a - 1].fixed_utility,
                  {-double(x.salt), -double(x.sugar), -double(x.fat), -double(x.variety), 0.0});
      }
      for (ActionIndex a = 0; a < J; ++a) b.transition(s, a, index_.at(pack(next_state(x, a))), 1.0);
    }
    return std::move(b).build();
  }

  FoodChoiceConfig cfg_;
  std::vector<Recipe> recipes_;
  std::vector<FoodState> states_;
  std::unordered_map<std::uint64_t, StateIndex> index_;
  std::unique_ptr<ModelSpec> spec_;
};

// ---------------------------------------------------------------------------
// Configuration files
//
// Schema (key = value):
//   kind            machine | food
//   beta            discount factor in (0, 1)               default .9
//   theta           true parameter vector, comma separated
//   states          machine: max mileage N                   default 5
//   recipes         food: M                                  default 2
//   stock_max       food: STOCK_max                          default 3
//   h_max           food: H_max                              default 3
//   attribute_seed  food: seed for recipe attributes         default 1
//   attributes      food: optional "s,g,f; s,g,f; ..." per recipe
//   fixed_utility   food: optional r_fixed per recipe

using AnyModel = std::variant<MachineReplacementModel, FoodChoiceModel>;

inline const ModelSpec& spec_of(const AnyModel& m) {
  return std::visit([](const auto& x) -> const ModelSpec& { return x.spec(); }, m);
}

inline AnyModel load_model(const KeyValueConfig& cfg) {
  const std::string kind = cfg.get("kind");
  const std::string hash = to_hex(sha256(cfg.to_string()));
  const double beta = cfg.get_double_or("beta", 0.9);
  if (kind == "machine") {
    std::vector<double> theta = cfg.has("theta") ? cfg.get_doubles("theta")
                                                 : std::vector<double>{1.0, 4.0};
    MachineReplacementModel m(static_cast<std::size_t>(cfg.get_int_or("states", 5)), beta,
                              std::move(theta));
    m.set_config_hash(hash);
    return m;
  }
  if (kind == "food") {
    FoodChoiceConfig fc;
    fc.recipes = static_cast<std::size_t>(cfg.get_int_or("recipes", 2));
    fc.stock_max = static_cast<int>(cfg.get_int_or("stock_max", 3));
    fc.h_max = static_cast<int>(cfg.get_int_or("h_max", 3));
    fc.beta = beta;
    if (cfg.has("theta")) fc.theta = cfg.get_doubles("theta");
    fc.attribute_seed = static_cast<std::uint64_t>(cfg.get_int_or("attribute_seed", 1));
    if (cfg.has("attributes")) {
      for (const auto& triple : detail::split(cfg.get("attributes"), ';')) {
        auto parts = detail::split(triple, ',');
        if (parts.size() != 3) throw ConfigError("attributes: expected `salt,sugar,fat` triples");
        std::array<int, 3> at{};
        for (int i = 0; i < 3; ++i) at[i] = std::stoi(parts[i]);
        fc.attributes.push_back(at);
      }
    }
    if (cfg.has("fixed_utility")) fc.fixed_utility = cfg.get_doubles("fixed_utility");
    FoodChoiceModel m(std::move(fc));
    m.set_config_hash(hash);
    return m;
  }
  throw ConfigError("unknown model kind `" + kind + "`");
}

inline AnyModel load_model_file(const std::string& path) {
  return load_model(KeyValueConfig::load(path));
}

}  // namespace ddc
