#ifndef REDMIX_STATS_HPP_
#define REDMIX_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace redmix {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double median(std::vector<double> v) {
  if (v.empty())
    throw std::invalid_argument("median of an empty sample");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1)
    return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

/*
 * Wasserstein-1 distance between two empirical laws on the line:
 * the integral of |F_a - F_b|. For equal sizes this is the mean of
 * |a_(i) - b_(i)| over the sorted samples.
 */
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double x = std::min(a[0], b[0]);
  double total = 0.0;
  for (;;) {
    while (i < a.size() && a[i] == x)
      ++i;
    while (j < b.size() && b[j] == x)
      ++j;
    if (i == a.size() && j == b.size())
      break;
    double next;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      next = a[i];
    else
      next = b[j];
    total += std::abs(i / na - j / nb) * (next - x);
    x = next;
  }
  return total;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x)
      ++i;
    while (j < b.size() && b[j] == x)
      ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

/// One-sample KS statistic against a continuous CDF.
inline double ks_one_sample(std::vector<double> a, const std::function<double(double)> &cdf) {
  if (a.empty())
    throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  // A perfectly flat series is fitted exactly.
  f.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

struct ExpFit {
  double rate = 0.0; // d/dt log d_t
  double r2 = 0.0;
  int points = 0;
  bool conclusive = false;
};

/*
 * Least-squares fit of log d_t against t over the points with d_t > floor.
 * Fewer than five usable points leave the fit inconclusive.
 */
inline ExpFit fit_exponential(const std::vector<double> &t, const std::vector<double> &d,
                              double floor = 0.0) {
  if (t.size() != d.size())
    throw std::invalid_argument("fit_exponential: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (d[i] > floor && d[i] > 0.0 && std::isfinite(d[i])) {
      x.push_back(t[i]);
      y.push_back(std::log(d[i]));
    }
  ExpFit fit;
  fit.points = static_cast<int>(x.size());
  if (x.size() < 5)
    return fit;
  const LineFit line = fit_line(x, y);
  fit.rate = line.slope;
  fit.r2 = line.r2;
  fit.conclusive = true;
  return fit;
}

} // namespace redmix

#endif // REDMIX_STATS_HPP_
