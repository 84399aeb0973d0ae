/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "obge/error.hpp"

namespace obge::stats {

struct TestResult {
  double statistic = 0;
  double dof = 0;
  double p_value = 1;
};

inline double chi2_sf(double x, double dof) {
  if (dof <= 0) return 1.0;
  boost::math::chi_squared_distribution<double> d(dof);
  return boost::math::cdf(boost::math::complement(d, std::max(0.0, x)));
}

// Goodness of fit of counts against the uniform distribution over the cells.
inline TestResult chi_square_uniform(const std::vector<std::uint64_t>& counts) {
  if (counts.size() < 2) return {};
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total == 0) return {};
  const double e = total / static_cast<double>(counts.size());
  double x = 0;
  for (auto c : counts) x += (static_cast<double>(c) - e) * (static_cast<double>(c) - e) / e;
  const double dof = static_cast<double>(counts.size() - 1);
  return {x, dof, chi2_sf(x, dof)};
}

// Pearson test of independence on an r x c table; empty rows and columns
// are dropped.
inline TestResult chi_square_independence(const std::vector<std::vector<std::uint64_t>>& table) {
  std::vector<double> row, col;
  if (table.empty()) return {};
  col.assign(table[0].size(), 0);
  double total = 0;
  for (const auto& r : table) {
    if (r.size() != col.size()) throw ValidationError("ragged contingency table");
    double s = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      s += static_cast<double>(r[j]);
      col[j] += static_cast<double>(r[j]);
    }
    row.push_back(s);
    total += s;
  }
  if (total == 0) return {};
  double x = 0;
  std::size_t rows = 0, cols = 0;
  for (double s : row) rows += s > 0;
  for (double s : col) cols += s > 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (row[i] == 0) continue;
    for (std::size_t j = 0; j < col.size(); ++j) {
      if (col[j] == 0) continue;
      const double e = row[i] * col[j] / total;
      const double d = static_cast<double>(table[i][j]) - e;
      x += d * d / e;
    }
  }
  if (rows < 2 || cols < 2) return {x, 0, 1};
  const double dof = static_cast<double>((rows - 1) * (cols - 1));
  return {x, dof, chi2_sf(x, dof)};
}

// Two-sample chi-square test that both count vectors come from one
// distribution.
inline TestResult chi_square_two_sample(const std::vector<std::uint64_t>& a,
                                        const std::vector<std::uint64_t>& b) {
  if (a.size() != b.size()) throw ValidationError("two-sample bins differ in size");
  return chi_square_independence({a, b});
}

// Largest power-of-two bin count <= cells that keeps the expected count per
// bin at least min_expected.
inline std::size_t bins_for(std::size_t samples, std::uint64_t cells, double min_expected = 5) {
  if (cells == 0 || !std::has_single_bit(cells)) throw ValidationError("cells must be a power of two");
  std::uint64_t bins = cells;
  while (bins > 1 && static_cast<double>(samples) / static_cast<double>(bins) < min_expected) {
    bins /= 2;
  }
  return static_cast<std::size_t>(bins);
}

// Histogram of leaf ids in [0, cells) over `bins` equal ranges.
inline std::vector<std::uint64_t> bin_leaves(const std::vector<std::uint64_t>& leaves,
                                             std::uint64_t cells, std::size_t bins) {
  std::vector<std::uint64_t> h(bins, 0);
  const auto width = cells / bins;
  for (auto l : leaves) {
    if (l >= cells) throw RangeError("leaf id out of range");
    ++h[l / width];
  }
  return h;
}

struct Regression {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
  double t = 0;
  double p_positive = 1;  // one-sided, H1: slope > 0
  std::size_t n = 0;
};

// Ordinary least squares y = a + b x with a t-test on b.
inline Regression ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("regression inputs differ in length");
  Regression r;
  r.n = x.size();
  if (r.n < 3) return r;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(r.n);
  my /= static_cast<double>(r.n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) return r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double e = y[i] - r.intercept - r.slope * x[i];
    sse += e * e;
  }
  const double dof = static_cast<double>(r.n - 2);
  r.slope_stderr = std::sqrt(sse / dof / sxx);
  if (r.slope_stderr == 0) {
    r.t = r.slope > 0 ? INFINITY : 0;
    r.p_positive = r.slope > 0 ? 0 : 1;
    return r;
  }
  r.t = r.slope / r.slope_stderr;
  boost::math::students_t_distribution<double> d(dof);
  r.p_positive = boost::math::cdf(boost::math::complement(d, r.t));
  return r;
}

}  // namespace obge::stats
