#pragma once

#include <string>
#include <vector>

#include "ratesmooth/model.hpp"
#include "ratesmooth/types.hpp"

namespace ratesmooth {

/// Gaussian approximation of the latent field at fixed hyperparameters:
/// posterior mode on the constraint subspace, marginal moments, and the
/// Laplace evidence contribution.
struct GaussianApprox {
  Vector theta;
  Vector mode;         // satisfies the constraints
  Vector marginal_sd;  // constraint-corrected, per latent coordinate
  double log_likelihood = 0.0;   // at the mode
  double log_prior_latent = 0.0; // at the mode
  double log_evidence = 0.0;     // Laplace approximation of log p(theta | O)
  double gradient_norm = 0.0;    // projected gradient at the mode
  int iterations = 0;
};

/// Newton optimization of the constrained log-posterior. Converges when the
/// projected gradient norm falls below 1e-6; fails after `max_iter`
/// iterations or on an indefinite inner matrix.
GaussianApprox gaussian_approx(const AssembledModel& model, const Vector& theta,
                               int max_iter = 50);

/// Laplace approximation of log p(theta | O) up to a constant:
/// log-likelihood + latent log-prior + hyperprior + (d/2) log 2pi
/// - (1/2) log det of the curvature on the constraint subspace.
double log_marginal_hyper(const AssembledModel& model, const Vector& theta);

struct GridConfig {
  double step = 0.75;           // grid step in log precision
  double range_sd = 3.0;        // half-range in mode-curvature sd units
  int max_halfwidth = 6;        // cap on steps per side and dimension
  unsigned seed = 20240901;     // seed for the diagnostic draws
  int diagnostic_draws = 1000;  // posterior draws kept for DIC/WAIC
  int max_newton_iter = 50;
  bool parallel = true;
};

struct GridPoint {
  Vector theta;
  double log_posterior = 0.0;  // unnormalized
  double weight = 0.0;
  Vector mode;
  Vector marginal_sd;
};

struct HyperSummary {
  std::string name;
  double theta_mean = 0.0;
  double theta_median = 0.0;
  double theta_q025 = 0.0;
  double theta_q975 = 0.0;
  double precision_mean = 0.0;
  double precision_median = 0.0;
};

/// Grid-integrated fit: per-hyperparameter Gaussian approximations with
/// normalized weights, mixture marginals, hyperparameter summaries, and the
/// seeded deviance diagnostics used by DIC and WAIC.
struct FitResult {
  std::vector<GridPoint> points;
  Vector theta_mode;
  Vector mixture_mean;
  Vector mixture_sd;
  std::vector<HyperSummary> hyper;

  Vector deviance_draws;
  Matrix pointwise_loglik;  // draws x observed cells
  double deviance_at_mixture_mean = 0.0;
  unsigned draw_seed = 0;
  std::vector<std::string> warnings;

  /// Quantile of the Gaussian-mixture marginal of one latent coordinate.
  double mixture_quantile(int coordinate, double p) const;
};

FitResult fit_model(const AssembledModel& model, const GridConfig& config = {});

/// Joint draws of the latent field from the mixture approximation, one row
/// per draw. Deterministic for a fixed seed.
Matrix sample_latent(const AssembledModel& model, const FitResult& fit,
                     int n_draws, unsigned seed);

/// Populate the deviance draws and pointwise log-likelihood matrix consumed
/// by compute_dic and compute_waic. fit_model calls this itself.
void attach_deviance_diagnostics(const AssembledModel& model, FitResult& fit,
                                 int n_draws, unsigned seed);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;
  double deviance_at_mean = 0.0;
};

/// DIC = mean deviance + p_D with p_D = mean deviance - deviance at the
/// posterior mean. The deviance includes the log O! term.
DicResult compute_dic(const FitResult& fit);

struct WaicResult {
  double waic = 0.0;
  double p_waic = 0.0;
  double lppd = 0.0;
};

/// WAIC = -2 (lppd - p_waic) from the stored pointwise log-likelihood draws.
/// Requires at least 100 draws.
WaicResult compute_waic(const FitResult& fit);

double normal_cdf(double z);

}  // namespace ratesmooth
