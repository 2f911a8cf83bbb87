#ifndef REDMIX_NOISE_CHECK_HPP_
#define REDMIX_NOISE_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "redmix/noise.hpp"
#include "redmix/parallel.hpp"
#include "redmix/rng.hpp"
#include "redmix/stats.hpp"

namespace redmix {

/*
 * max |<h_a, h_b> - delta_ab| over all Haar functions up to max_level.
 * Products are constant on cells of width 2^-(max_level+1), so the midpoint
 * sum over those cells is exact.
 */
inline double haar_orthonormality_error(int max_level) {
  const int count = haar_count(max_level);
  const int cells = 2 << max_level;
  const double width = 1.0 / cells;
  std::vector<std::vector<double>> values(static_cast<std::size_t>(count),
                                          std::vector<double>(static_cast<std::size_t>(cells)));
  for (int a = 0; a < count; ++a)
    for (int c = 0; c < cells; ++c)
      values[a][c] = haar_eval(haar_from_flat(a), (c + 0.5) * width);
  double err = 0.0;
  for (int a = 0; a < count; ++a)
    for (int b = a; b < count; ++b) {
      double s = 0.0;
      for (int c = 0; c < cells; ++c)
        s += values[a][c] * values[b][c];
      err = std::max(err, std::abs(s * width - (a == b ? 1.0 : 0.0)));
    }
  return err;
}

struct BoundednessReport {
  int paths = 0;
  double bound = 0.0;     // sum_k |c_k| 2^{k/2}
  double max_abs = 0.0;   // sup over paths and dyadic cells
  int violations = 0;     // paths exceeding the bound
};

inline BoundednessReport check_boundedness(const RedNoiseLaw &law, int paths,
                                           std::uint64_t seed, unsigned workers = 1) {
  law.validate();
  BoundednessReport r;
  r.paths = paths;
  r.bound = law.sup_bound();
  const double width = path_cell_width(law.max_level);
  const int cells = 2 << law.max_level;
  std::vector<double> sup(static_cast<std::size_t>(paths));
  parallel_for(sup.size(), workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, i, 0, StreamTag::check);
    const HaarNoisePath path = sample_path(law, rng);
    double s = 0.0;
    for (int c = 0; c < cells; ++c)
      s = std::max(s, std::abs(eval_path(path, (c + 0.5) * width)));
    sup[i] = s;
  });
  for (double s : sup) {
    r.max_abs = std::max(r.max_abs, s);
    if (s > r.bound)
      ++r.violations;
  }
  return r;
}

struct DonskerReport {
  int n = 0;
  int samples = 0;
  double scale = 0.0; // c0 * sd(density): the limiting Wiener variance per unit time
  double ks = 0.0;    // KS distance of beta_N(1) / scale to N(0, 1)
};

/// Sample s integrates its own noise stream over N consecutive unit segments.
inline DonskerReport check_donsker(const RedNoiseLaw &law, int n, int samples,
                                   std::uint64_t seed, unsigned workers = 1) {
  law.validate();
  DonskerReport r;
  r.n = n;
  r.samples = samples;
  r.scale = std::abs(law.coefficients[0]) * std::sqrt(law.density.variance());
  std::vector<double> beta(static_cast<std::size_t>(samples));
  // Chunks share one segment buffer so paths are not reallocated per sample.
  constexpr std::size_t chunk = 64;
  const std::size_t chunks = (beta.size() + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<HaarNoisePath> segments(static_cast<std::size_t>(n));
    for (std::size_t i = c * chunk; i < std::min(beta.size(), (c + 1) * chunk); ++i) {
      Rng rng = make_stream(seed, i, 1, StreamTag::check);
      for (int s = 0; s < n; ++s)
        sample_path_into(segments[s], law, rng, s);
      beta[i] = donsker_process(segments, n, 1.0) / r.scale;
    }
  });
  r.ks = ks_one_sample(beta, normal_cdf);
  return r;
}

} // namespace redmix

#endif // REDMIX_NOISE_CHECK_HPP_
