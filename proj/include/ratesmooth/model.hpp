#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ratesmooth/covariates.hpp"
#include "ratesmooth/dataset.hpp"
#include "ratesmooth/graph.hpp"
#include "ratesmooth/structure.hpp"
#include "ratesmooth/types.hpp"

namespace ratesmooth {

enum class ModelKind { AgeTime, AgeSpace };
enum class PriorKind { RW1, RW2, ICar };

std::string to_string(ModelKind k);
std::string to_string(PriorKind p);

struct CovariateSpec {
  std::string name;
  CovariateAxis axis = CovariateAxis::Temporal;
  bool decorrelate = false;
  int k = -1;  // -1: default (5 spatial, 2 temporal)
  RemovalCount removal = RemovalCount::IndexRange;
};

/// Parsed model configuration. The age effect always carries an RW1 prior;
/// the second axis takes RW1/RW2 (time) or iCAR (space).
struct ModelSpec {
  ModelKind kind = ModelKind::AgeTime;
  PriorKind second_prior = PriorKind::RW1;
  std::optional<InteractionType> interaction;  // nullopt = additive
  std::vector<CovariateSpec> covariates;
};

/// Parse a key=value model config. Newlines and ';' separate entries, '#'
/// starts a comment. Keys: kind (or a bare age-time/age-space token), age,
/// time, space, interaction, covariate. Covariate values:
///   "<name> <spatial|temporal> [decorrelate] [k=<int>] [exact-count]".
ModelSpec parse_model_spec(const std::string& config_text);

std::string format_model_spec(const ModelSpec& spec);

/// Linear restrictions on the latent field, rows orthonormal and independent.
struct ConstraintSet {
  Matrix rows;  // m x layout dim, over [alpha | age | second | interaction]
  int n_main_rows = 0;
  int n_interaction_rows = 0;
};

/// Sum-to-zero constraints: one per main-effect null direction (per graph
/// component for iCAR; the RW2 linear trend stays free), plus interaction
/// rows spanning the interaction structure's null space (Type I gets the
/// conventional grand-sum row). Dependent rows are dropped.
ConstraintSet constraint_set(const ModelSpec& spec, int n_age, int n_second,
                             const AdjacencyGraph* graph = nullptr);

/// One latent coordinate block with its Gaussian prior: either a fixed
/// precision (intercept, regression coefficients) or tau * R with tau = e^theta.
struct LatentBlock {
  std::string name;
  int offset = 0;
  int dim = 0;
  Matrix r;                      // structure (scaled) or identity
  double fixed_precision = 0.0;  // > 0 means no hyperparameter
  int theta_index = -1;
  int rank = 0;
  double log_gdet = 0.0;
};

/// Observation model for the cell counts. Poisson is the real model; the
/// Gaussian family (identity link, known noise sd) exists to validate the
/// approximation engine against closed forms.
enum class ObservationFamily { Poisson, Gaussian };

/// Data plus design for one sex-specific model: cell table, latent layout,
/// priors, constraints, and the feasible basis of the constrained subspace.
/// Immutable after assembly.
struct AssembledModel {
  ModelSpec spec;
  std::string sex;
  ObservationFamily family = ObservationFamily::Poisson;
  double noise_sd = 1.0;  // Gaussian family only
  int n_age = 0;
  int n_second = 0;
  std::vector<std::string> age_labels;
  std::vector<std::string> second_labels;

  struct Cell {
    int age = 0;
    int second = 0;
    double deaths = 0.0;
    double population = 0.0;
    bool missing = false;
  };
  std::vector<Cell> cells;    // index = second * n_age + age
  std::vector<int> observed;  // cell indices entering the likelihood

  Matrix incidence;      // n_cells x n_latent
  Vector log_exposure;   // log population per cell
  std::vector<LatentBlock> blocks;
  int n_latent = 0;
  int n_theta = 0;
  std::vector<std::string> theta_names;

  Matrix constraints;         // m x n_latent, orthonormal rows
  Matrix feasible;            // n_latent x (n_latent - m), orthonormal columns
  Matrix incidence_reduced;   // incidence * feasible, cached for the solvers

  struct CovariateInfo {
    std::string name;
    CovariateAxis axis = CovariateAxis::Temporal;
    double center = 0.0;
    double scale = 1.0;
    bool decorrelated = false;
    int k = 0;
    double removed_energy = 0.0;
    int coefficient_index = 0;  // latent coordinate of beta
  };
  std::vector<CovariateInfo> covariate_info;

  const LatentBlock& block(const std::string& name) const;
  bool has_block(const std::string& name) const;

  // Log joint pieces shared by the approximation engine and the oracles.
  Vector linear_predictor(const Vector& x) const;      // log mu per cell
  double log_likelihood(const Vector& x) const;        // observed cells only
  Vector pointwise_log_likelihood(const Vector& x) const;
  double deviance(const Vector& x) const;              // -2 log likelihood
  double log_prior(const Vector& x, const Vector& theta) const;
  double log_prior_theta(const Vector& theta) const;
  Matrix prior_precision(const Vector& theta) const;
  double log_posterior(const Vector& x, const Vector& theta) const;
  Vector log_posterior_gradient(const Vector& x, const Vector& theta) const;
};

/// Build the latent Gaussian model for one sex. Aggregates the dataset over
/// the axis the model does not use; a cell is missing only when every
/// contributing cell is missing. Covariates are standardized and, when
/// flagged, decorrelated against the model's own second-axis structure
/// before entering the design.
AssembledModel assemble_model(const ModelSpec& spec, const Dataset& data,
                              const std::string& sex,
                              const AdjacencyGraph* graph = nullptr);

/// Minimal baseline model log mu_i = log N_i + alpha with the usual weakly
/// informative intercept prior. No hyperparameters, no constraints.
AssembledModel intercept_only_model(const Vector& deaths,
                                    const Vector& exposure,
                                    double prior_precision = 0.001);

}  // namespace ratesmooth
