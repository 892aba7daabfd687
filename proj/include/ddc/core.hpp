#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ddc {

/// Euler-Mascheroni constant, the mean of a standard Type-1 extreme value shock.
inline constexpr double kEulerGamma = 0.5772156649015329;

using StateIndex = std::uint32_t;
using ActionIndex = std::uint32_t;

// Error taxonomy. Every failure surfaced by the library derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct CoverageError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : Error(what), last_residual(residual), iterations_run(iterations) {}
  double last_residual;
  std::size_t iterations_run;
};

/// Dense row-major 2D table.
template <class T>
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  T* row(std::size_t r) { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Table& a, const Table& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealTable = Table<double>;

/// Choice-specific values v(s, a) plus where they came from.
struct ValueTable {
  RealTable values;
  std::string source;  // "dp", "ccs", "rlmc", "rltd"
  std::vector<double> theta;
  std::string path_set_id;

  double operator()(std::size_t s, std::size_t a) const { return values(s, a); }
};

/// Named structural utility parameters with optional box bounds.
class Theta {
 public:
  Theta() = default;
  Theta(std::vector<std::string> names, std::vector<double> values)
      : names_(std::move(names)), values_(std::move(values)) {
    if (names_.size() != values_.size())
      throw ArgumentError("theta: " + std::to_string(names_.size()) + " names but " +
                          std::to_string(values_.size()) + " values");
    for (double v : values_)
      if (!std::isfinite(v)) throw ArgumentError("theta: non-finite parameter value");
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }

  Theta with_values(std::vector<double> values) const {
    Theta t(names_, std::move(values));
    t.lower_ = lower_;
    t.upper_ = upper_;
    return t;
  }

  void set_bounds(std::vector<double> lower, std::vector<double> upper) {
    if (lower.size() != size() || upper.size() != size())
      throw ArgumentError("theta: bound vectors must match parameter count");
    lower_ = std::move(lower);
    upper_ = std::move(upper);
  }
  const std::optional<std::vector<double>>& lower() const { return lower_; }
  const std::optional<std::vector<double>>& upper() const { return upper_; }

  bool within_bounds(const std::vector<double>& x) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (lower_ && x[i] < (*lower_)[i]) return false;
      if (upper_ && x[i] > (*upper_)[i]) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::optional<std::vector<double>> lower_;
  std::optional<std::vector<double>> upper_;
};

/// Max-shifted log(sum(exp(x))).
inline double log_sum_exp(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(x[i] - m);
  return m + std::log(acc);
}

/// Dynamic logit: pi(a) = exp(v(a)) / sum_j exp(v(j)), computed max-shifted.
inline std::vector<double> ccp_from_values(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("ccp_from_values: empty value vector");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("ccp_from_values: non-finite value");
    m = std::max(m, v);
  }
  std::vector<double> out(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - m);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

}  // namespace ddc
