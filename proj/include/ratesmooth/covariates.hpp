#pragma once

#include <string>

#include "ratesmooth/structure.hpp"
#include "ratesmooth/types.hpp"

namespace ratesmooth {

enum class CovariateAxis { Spatial, Temporal };

/// One covariate over areas or years, with the centering/scaling applied so
/// effect sizes can be mapped back to the original units.
struct CovariateVector {
  std::string name;
  CovariateAxis axis = CovariateAxis::Spatial;
  Vector values;
  bool standardized = false;
  double center = 0.0;
  double scale = 1.0;  // sample sd, n-1 denominator
};

/// (x - mean) / sd with the sample standard deviation. Rejects constant
/// vectors.
CovariateVector standardize_covariate(const CovariateVector& x);

/// How many eigenvectors the decorrelation removes for a given k.
enum class RemovalCount {
  IndexRange,  // the trailing k+1 eigenvectors, null vector included
  Exact        // exactly k trailing eigenvectors
};

struct DecorrelatedCovariate {
  Vector z;                    // residual component
  Matrix removed_span;         // the removed eigenvectors, columns
  Vector removed_coefficients; // projections of x onto the removed span
  int k = 0;
  double removed_energy = 0.0; // squared norm of the removed projection
};

/// Subtract from x its projection onto the trailing (smoothest) eigenvectors
/// of the axis structure. The removed count is k+1 (or k under
/// RemovalCount::Exact) and may not exceed 20% of the axis length, rounded
/// up.
DecorrelatedCovariate decorrelate_covariate(const Vector& x,
                                            const EigenSystem& axis_eigensystem,
                                            int k,
                                            RemovalCount mode = RemovalCount::IndexRange);

/// Posterior quantiles of a regression coefficient on the standardized scale.
struct CoefficientQuantiles {
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
};

struct RateRatioSummary {
  double q025 = 1.0;
  double median = 1.0;
  double q975 = 1.0;
  double delta = 1.0;  // change in original covariate units
};

/// Rate ratio for a `delta`-unit change of the covariate on its original
/// scale: rr_q = exp(beta_q * delta / scale). Quantile mapping is exact for
/// this monotone transform.
RateRatioSummary rate_ratio(const CoefficientQuantiles& beta, double scale,
                            double delta);

}  // namespace ratesmooth
