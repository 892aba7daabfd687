#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "ddc/core.hpp"

namespace ddc {

struct NelderMeadOptions {
  /// Initial simplex offset along each coordinate.
  double initial_step = 0.5;
  /// Stop once every vertex is within xtol of the best (sup norm) ...
  double xtol = 1e-6;
  /// ... and every vertex objective is within ftol of the best.
  double ftol = 1e-9;
  std::size_t max_fevals = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  double initial_best = 0.0;
  std::size_t fevals = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Standard simplex search (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). The returned point is the best vertex ever evaluated.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  if (x0.empty()) throw ArgumentError("nelder_mead: empty start point");
  if (!(opt.xtol > 0.0) || !(opt.ftol > 0.0)) throw ArgumentError("nelder_mead: tolerances must be positive");
  if (opt.max_fevals < x0.size() + 1)
    throw ArgumentError("nelder_mead: feval budget smaller than the initial simplex");
  const std::size_t n = x0.size();
  NelderMeadResult res;

  auto eval = [&](const std::vector<double>& x) {
    ++res.fevals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += opt.initial_step;
  for (std::size_t i = 0; i <= n; ++i) fs[i] = eval(xs[i]);
  res.initial_best = *std::min_element(fs.begin(), fs.end());

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fs[a] < fs[b]; });
    std::vector<std::vector<double>> x2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      x2[i] = std::move(xs[order[i]]);
      f2[i] = fs[order[i]];
    }
    xs = std::move(x2);
    fs = std::move(f2);
  };
  auto converged = [&] {
    double dx = 0.0, df = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      df = std::max(df, std::abs(fs[i] - fs[0]));
      for (std::size_t j = 0; j < n; ++j) dx = std::max(dx, std::abs(xs[i][j] - xs[0][j]));
    }
    return dx <= opt.xtol && df <= opt.ftol;
  };
  auto affine = [&](double t, const std::vector<double>& toward, std::vector<double>& out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (toward[j] - centroid[j]);
  };

  sort_simplex();
  while (!converged()) {
    if (res.fevals >= opt.max_fevals) break;
    ++res.iterations;
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j] / static_cast<double>(n);

    affine(-1.0, xs[n], xr);
    const double fr = eval(xr);
    if (fr < fs[0]) {
      if (res.fevals >= opt.max_fevals) {
        xs[n] = xr;
        fs[n] = fr;
      } else {
        affine(-2.0, xs[n], xe);
        const double fe = eval(xe);
        xs[n] = fe < fr ? xe : xr;
        fs[n] = std::min(fe, fr);
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else if (res.fevals < opt.max_fevals) {
      const bool outside = fr < fs[n];
      affine(outside ? -0.5 : 0.5, xs[n], xc);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n && res.fevals < opt.max_fevals; ++i) {
          for (std::size_t j = 0; j < n; ++j) xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
          fs[i] = eval(xs[i]);
        }
      }
    }
    sort_simplex();
  }
  res.converged = converged();
  res.x = xs[0];
  res.f = fs[0];
  return res;
}

}  // namespace ddc
