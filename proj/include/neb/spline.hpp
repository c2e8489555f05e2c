#pragma once

// Natural cubic spline through (knot, value) pairs. Outside the knot range the
// spline is continued linearly with its end slope.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace neb {

struct SplineFit {
  std::vector<double> knots;
  std::vector<double> values;
  std::vector<double> second;  // second derivative at each knot; zero at both ends
};

inline SplineFit fit_natural_spline(std::vector<double> knots, std::vector<double> values) {
  const std::size_t n = knots.size();
  if (n < 2) throw std::domain_error("spline needs at least two knots");
  if (values.size() != n) throw std::domain_error("knot/value length mismatch");
  for (std::size_t i = 1; i < n; ++i)
    if (!(knots[i] > knots[i - 1])) throw std::domain_error("spline knots must be strictly increasing");

  std::vector<double> m(n, 0.0);
  if (n > 2) {
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = knots[i] - knots[i - 1];
      const double h1 = knots[i + 1] - knots[i];
      diag[i - 1] = 2.0 * (h0 + h1);
      upper[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double lower = knots[i + 1] - knots[i];  // sub-diagonal h_i
      const double f = lower / diag[i - 1];
      diag[i] -= f * upper[i - 1];
      rhs[i] -= f * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
  }
  return {std::move(knots), std::move(values), std::move(m)};
}

namespace detail {

inline std::size_t spline_segment(const SplineFit& s, double x) {
  auto it = std::upper_bound(s.knots.begin(), s.knots.end(), x);
  std::size_t i = static_cast<std::size_t>(it - s.knots.begin());
  return std::clamp<std::size_t>(i, 1, s.knots.size() - 1) - 1;
}

}  // namespace detail

inline double spline_derivative(const SplineFit& s, double x) {
  const std::size_t last = s.knots.size() - 1;
  const double xc = std::clamp(x, s.knots.front(), s.knots.back());
  const std::size_t i = std::min(detail::spline_segment(s, xc), last - 1);
  const double h = s.knots[i + 1] - s.knots[i];
  const double a = (s.knots[i + 1] - xc) / h;
  const double b = (xc - s.knots[i]) / h;
  return (s.values[i + 1] - s.values[i]) / h +
         h * ((3.0 * b * b - 1.0) * s.second[i + 1] - (3.0 * a * a - 1.0) * s.second[i]) / 6.0;
}

inline double eval(const SplineFit& s, double x) {
  if (x < s.knots.front()) return s.values.front() + spline_derivative(s, s.knots.front()) * (x - s.knots.front());
  if (x > s.knots.back()) return s.values.back() + spline_derivative(s, s.knots.back()) * (x - s.knots.back());
  const std::size_t i = std::min(detail::spline_segment(s, x), s.knots.size() - 2);
  const double h = s.knots[i + 1] - s.knots[i];
  const double a = (s.knots[i + 1] - x) / h;
  const double b = (x - s.knots[i]) / h;
  return a * s.values[i] + b * s.values[i + 1] +
         ((a * a * a - a) * s.second[i] + (b * b * b - b) * s.second[i + 1]) * h * h / 6.0;
}

}  // namespace neb
