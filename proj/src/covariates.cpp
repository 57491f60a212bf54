#include "ratesmooth/covariates.hpp"

#include <cmath>

namespace ratesmooth {

CovariateVector standardize_covariate(const CovariateVector& x) {
  const auto n = x.values.size();
  if (n < 2) throw DataError("standardize_covariate: need at least 2 values");
  double mean = x.values.mean();
  double ss = (x.values.array() - mean).square().sum();
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0)
    throw DataError("standardize_covariate: '" + x.name + "' is constant");
  CovariateVector out = x;
  out.values = (x.values.array() - mean) / sd;
  out.standardized = true;
  out.center = x.standardized ? x.center : mean;
  out.scale = x.standardized ? x.scale : sd;
  return out;
}

DecorrelatedCovariate decorrelate_covariate(const Vector& x,
                                            const EigenSystem& axis_eigensystem,
                                            int k, RemovalCount mode) {
  const int n = static_cast<int>(axis_eigensystem.values.size());
  if (x.size() != n)
    throw DataError("decorrelate_covariate: covariate length " +
                    std::to_string(x.size()) + " does not match axis length " +
                    std::to_string(n));
  if (k < 0) throw DataError("decorrelate_covariate: k must be nonnegative");
  const int removed = mode == RemovalCount::IndexRange ? k + 1 : k;
  const int cap = static_cast<int>(std::ceil(0.2 * n));
  if (removed > cap)
    throw DataError("decorrelate_covariate: removing " + std::to_string(removed) +
                    " eigenvectors exceeds the 20% cap (" + std::to_string(cap) +
                    " of " + std::to_string(n) + ")");
  DecorrelatedCovariate out;
  out.k = k;
  out.removed_span = axis_eigensystem.vectors.rightCols(removed);
  out.removed_coefficients = out.removed_span.transpose() * x;
  out.z = x - out.removed_span * out.removed_coefficients;
  out.removed_energy = out.removed_coefficients.squaredNorm();
  return out;
}

RateRatioSummary rate_ratio(const CoefficientQuantiles& beta, double scale,
                            double delta) {
  if (scale <= 0.0) throw DataError("rate_ratio: scale must be positive");
  RateRatioSummary rr;
  rr.delta = delta;
  rr.q025 = std::exp(beta.q025 * delta / scale);
  rr.median = std::exp(beta.median * delta / scale);
  rr.q975 = std::exp(beta.q975 * delta / scale);
  return rr;
}

}  // namespace ratesmooth
