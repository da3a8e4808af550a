#include "hpoloop/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <omp.h>

#include "hpoloop/errors.hpp"
#include "hpoloop/values.hpp"

namespace hpoloop {

void CoverageParams::check() const {
  if (draws < 1) throw SchemaError("coverage: draws must be >= 1");
  if (repetitions < 1) throw SchemaError("coverage: repetitions must be >= 1");
  if (!(region_measure > 0.0 && region_measure <= 1.0))
    throw SchemaError("coverage: region_measure must be in (0, 1]");
  const double half = std::sqrt(region_measure) / 2.0;
  if (target_x - half < 0.0 || target_x + half > 1.0 || target_y - half < 0.0 || target_y + half > 1.0)
    throw SchemaError("coverage: region does not fit inside the unit square");
}

double coverage_analytic(int draws, double region_measure) {
  return 1.0 - std::pow(1.0 - region_measure, draws);
}

bool coverage_repetition(const CoverageParams& p, int r) {
  Rng rng(splitmix64(p.seed + static_cast<std::uint64_t>(r)));
  const double half = std::sqrt(p.region_measure) / 2.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.draws; ++i) {
    const double x = uniform01(rng);
    const double y = uniform01(rng);
    best = std::min(best, std::max(std::abs(x - p.target_x), std::abs(y - p.target_y)));
  }
  return best < half;
}

CoverageResult coverage_serial(const CoverageParams& p) {
  p.check();
  CoverageResult out{0, p.repetitions};
  for (int r = 0; r < p.repetitions; ++r) out.hits += coverage_repetition(p, r) ? 1 : 0;
  return out;
}

CoverageResult coverage_parallel(const CoverageParams& p, int threads) {
  p.check();
  if (threads <= 0) threads = omp_get_max_threads();
  int hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits) num_threads(threads)
  for (int r = 0; r < p.repetitions; ++r) hits += coverage_repetition(p, r) ? 1 : 0;
  return CoverageResult{hits, p.repetitions};
}

}  // namespace hpoloop
