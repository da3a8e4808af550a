#pragma once

#include <cstdint>
#include <vector>

namespace hpoloop {

// Random-search coverage on the unit square. The objective is the Chebyshev
// distance to a target point; the "near-optimal region" is the axis-aligned
// square around the target with the given measure. A repetition hits when
// the best of `draws` uniform samples lands inside that square.
struct CoverageParams {
  int draws = 100;
  int repetitions = 2000;
  double region_measure = 0.05;
  double target_x = 0.5;
  double target_y = 0.5;
  std::uint64_t seed = 20240101;

  // Throws SchemaError unless the region fits inside the square.
  void check() const;
};

struct CoverageResult {
  int hits = 0;
  int repetitions = 0;
  double fraction() const { return repetitions ? static_cast<double>(hits) / repetitions : 0.0; }
};

// 1 - (1 - measure)^draws
double coverage_analytic(int draws, double region_measure);

// Repetition r draws from Rng(splitmix64(seed + r)) in both kernels, so the
// two return identical results for any thread count.
CoverageResult coverage_serial(const CoverageParams& p);
CoverageResult coverage_parallel(const CoverageParams& p, int threads = 0);

// Per-repetition outcome (1 = hit); the kernels are reductions over this.
bool coverage_repetition(const CoverageParams& p, int r);

}  // namespace hpoloop
