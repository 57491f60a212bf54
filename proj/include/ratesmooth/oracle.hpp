#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ratesmooth/model.hpp"
#include "ratesmooth/types.hpp"

namespace ratesmooth {

/// Reference posterior summaries from a brute-force integrator. Used to
/// certify the approximation engine on desk-scale problems.
struct QuantitySummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  double mcse = 0.0;  // Monte Carlo or quadrature-refinement error estimate
  double ess = 0.0;
  double rhat = 1.0;
};

struct OracleResult {
  std::vector<std::string> names;
  Matrix draws;  // sampler only: retained draws, one column per quantity
  Vector mode;   // quadrature only: joint mode in quantity coordinates
  std::vector<QuantitySummary> summaries;
  std::vector<std::string> warnings;

  const QuantitySummary& summary(const std::string& name) const;
};

struct McmcConfig {
  int iterations = 20000;  // per chain, first half discarded
  int chains = 4;
  unsigned seed = 1;
};

/// Adaptive random-walk Metropolis on a generic log density. Adaptation of
/// the proposal is frozen halfway through burn-in.
OracleResult mcmc_sample_density(
    const std::function<double(const Vector&)>& log_density, int dim,
    const McmcConfig& config, const std::vector<std::string>& names = {});

/// Sampler over (latent in the constraint-reduced basis, hyperparameters).
/// Reports the full latent field plus theta; every draw satisfies the
/// constraints. Guard: latent dimension <= 200.
OracleResult mcmc_sample(const AssembledModel& model, const McmcConfig& config,
                         const std::optional<Vector>& fixed_theta = {});

struct GridOracleConfig {
  int points_per_axis = 401;
  double range_sd = 8.0;
};

/// Dense trapezoid quadrature of the joint posterior. Guard: reduced latent
/// dimension plus free hyperparameters <= 3. The mcse field carries a
/// grid-refinement error estimate.
OracleResult grid_posterior(const AssembledModel& model,
                            const std::optional<Vector>& fixed_theta = {},
                            const GridOracleConfig& config = {});

/// Effective sample size of one chain by the initial-positive-sequence rule
/// (autocorrelations summed until the first negative pair).
double effective_sample_size(const Vector& chain);

}  // namespace ratesmooth
