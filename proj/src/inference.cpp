#include "ratesmooth/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <thread>

namespace ratesmooth {

namespace {

constexpr double log_2pi = 1.8378770664093453;

struct ReducedProblem {
  const AssembledModel& model;
  Vector theta;
  Matrix prior_reduced;       // Z' Q_prior Z
  double log_prior_kernel0;   // log prior normalizer terms, x-independent
  Vector counts;              // deaths per observed cell
  Vector offset;              // log exposure per observed cell
  Matrix design;              // reduced incidence rows for observed cells
  double lgamma_sum;

  ReducedProblem(const AssembledModel& m, const Vector& th)
      : model(m), theta(th) {
    Matrix qp = m.prior_precision(th);
    prior_reduced = m.feasible.transpose() * qp * m.feasible;
    const int n_obs = static_cast<int>(m.observed.size());
    counts.resize(n_obs);
    offset.resize(n_obs);
    design.resize(n_obs, m.feasible.cols());
    lgamma_sum = 0.0;
    for (int i = 0; i < n_obs; ++i) {
      int c = m.observed[i];
      counts(i) = m.cells[c].deaths;
      offset(i) = m.log_exposure(c);
      design.row(i) = m.incidence_reduced.row(c);
      lgamma_sum += std::lgamma(counts(i) + 1.0);
    }
    log_prior_kernel0 = 0.0;
    for (const auto& b : m.blocks) {
      if (b.fixed_precision > 0.0) {
        log_prior_kernel0 +=
            0.5 * b.dim * (std::log(b.fixed_precision) - log_2pi);
      } else {
        log_prior_kernel0 +=
            0.5 * b.rank * (th(b.theta_index) - log_2pi) + 0.5 * b.log_gdet;
      }
    }
  }

  // log-likelihood + latent log-prior in reduced coordinates
  double objective(const Vector& u) const {
    Vector eta = offset + design * u;
    double ll;
    if (model.family == ObservationFamily::Poisson) {
      ll = counts.dot(eta) - eta.array().exp().sum() - lgamma_sum;
    } else {
      double s2 = model.noise_sd * model.noise_sd;
      ll = -0.5 * (counts - eta).squaredNorm() / s2 -
           0.5 * counts.size() * (log_2pi + std::log(s2));
    }
    double quad = u.dot(prior_reduced * u);
    return ll + log_prior_kernel0 - 0.5 * quad;
  }

  Vector gradient(const Vector& u) const {
    Vector eta = offset + design * u;
    Vector resid = model.family == ObservationFamily::Poisson
                       ? Vector(counts - eta.array().exp().matrix())
                       : Vector((counts - eta) /
                                (model.noise_sd * model.noise_sd));
    return design.transpose() * resid - prior_reduced * u;
  }

  Matrix curvature(const Vector& u) const {
    Vector w;
    if (model.family == ObservationFamily::Poisson) {
      w = (offset + design * u).array().exp();
    } else {
      w = Vector::Constant(counts.size(),
                           1.0 / (model.noise_sd * model.noise_sd));
    }
    return prior_reduced + design.transpose() * w.asDiagonal() * design;
  }
};

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

GaussianApprox gaussian_approx(const AssembledModel& model, const Vector& theta,
                               int max_iter) {
  if (theta.size() != model.n_theta)
    throw DataError("gaussian_approx: theta has " + std::to_string(theta.size()) +
                    " entries, model needs " + std::to_string(model.n_theta));
  for (int i = 0; i < theta.size(); ++i)
    if (!std::isfinite(theta(i)))
      throw DataError("gaussian_approx: theta must be finite");

  ReducedProblem prob(model, theta);
  const int d = static_cast<int>(model.feasible.cols());
  Vector u = Vector::Zero(d);
  double obj = prob.objective(u);
  double gnorm = prob.gradient(u).norm();
  int iter = 0;

  Eigen::LLT<Matrix> llt;
  for (; iter < max_iter; ++iter) {
    Vector g = prob.gradient(u);
    gnorm = g.norm();
    if (gnorm < 1e-6) break;
    llt.compute(prob.curvature(u));
    if (llt.info() != Eigen::Success)
      throw NumericalError("gaussian_approx: inner matrix is not positive "
                           "definite at theta");
    Vector delta = llt.solve(g);
    double step = 1.0;
    double next = prob.objective(u + step * delta);
    int halvings = 0;
    while ((!std::isfinite(next) || next < obj) && halvings < 40) {
      step *= 0.5;
      next = prob.objective(u + step * delta);
      ++halvings;
    }
    if (!std::isfinite(next) || next < obj) break;  // no progress possible
    u += step * delta;
    obj = next;
  }
  gnorm = prob.gradient(u).norm();
  if (gnorm >= 1e-6)
    throw NumericalError(
        "gaussian_approx: no convergence after " + std::to_string(iter) +
        " iterations, projected gradient norm " + std::to_string(gnorm));

  Matrix h = prob.curvature(u);
  llt.compute(h);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gaussian_approx: curvature not positive definite "
                         "at the mode");
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));

  GaussianApprox out;
  out.theta = theta;
  out.mode = model.feasible * u;
  Matrix cov_reduced = llt.solve(Matrix::Identity(d, d));
  Matrix m_zcov = model.feasible * cov_reduced;
  out.marginal_sd =
      (m_zcov.cwiseProduct(model.feasible)).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
  out.log_likelihood = model.log_likelihood(out.mode);
  out.log_prior_latent = model.log_prior(out.mode, theta);
  out.log_evidence = out.log_likelihood + out.log_prior_latent +
                     model.log_prior_theta(theta) + 0.5 * d * log_2pi -
                     0.5 * log_det;
  out.gradient_norm = gnorm;
  out.iterations = iter;
  return out;
}

double log_marginal_hyper(const AssembledModel& model, const Vector& theta) {
  return gaussian_approx(model, theta).log_evidence;
}

namespace {

// Minimal BFGS maximizer with central finite-difference gradients.
struct HyperOptimum {
  Vector theta;
  double value;
};

HyperOptimum maximize_log_marginal(const AssembledModel& model) {
  const int q = model.n_theta;
  auto safe_eval = [&](const Vector& th) {
    try {
      return log_marginal_hyper(model, th);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  auto fd_grad = [&](const Vector& th, double f0) {
    Vector g(q);
    for (int i = 0; i < q; ++i) {
      double h = 1e-3 * std::max(1.0, std::abs(th(i)));
      Vector up = th, dn = th;
      up(i) += h;
      dn(i) -= h;
      double fu = safe_eval(up), fd = safe_eval(dn);
      if (std::isfinite(fu) && std::isfinite(fd)) {
        g(i) = (fu - fd) / (2.0 * h);
      } else if (std::isfinite(fu)) {
        g(i) = (fu - f0) / h;
      } else if (std::isfinite(fd)) {
        g(i) = (f0 - fd) / h;
      } else {
        g(i) = 0.0;
      }
    }
    return g;
  };

  Vector x = Vector::Zero(q);
  double f = safe_eval(x);
  if (!std::isfinite(f)) {
    // fall back to a crude scan for a finite starting point
    for (double v : {2.0, 4.0, -2.0, 6.0}) {
      x.setConstant(v);
      f = safe_eval(x);
      if (std::isfinite(f)) break;
    }
    if (!std::isfinite(f))
      throw NumericalError("hyperparameter search found no usable starting "
                           "point");
  }
  Vector g = fd_grad(x, f);
  Matrix b = Matrix::Identity(q, q);  // inverse curvature estimate
  for (int iter = 0; iter < 100 && g.norm() > 1e-4; ++iter) {
    Vector p = b * g;
    if (p.dot(g) <= 0.0) {
      b = Matrix::Identity(q, q);
      p = g;
    }
    double step = 1.0;
    double fn = safe_eval(x + step * p);
    int halvings = 0;
    while ((!std::isfinite(fn) || fn < f + 1e-4 * step * g.dot(p)) &&
           halvings < 30) {
      step *= 0.5;
      fn = safe_eval(x + step * p);
      ++halvings;
    }
    if (!std::isfinite(fn) || fn <= f) break;
    Vector xn = x + step * p;
    Vector gn = fd_grad(xn, fn);
    Vector s = xn - x;
    Vector y = g - gn;  // gradient of -f increases
    double sy = s.dot(y);
    if (sy > 1e-12) {
      Matrix i = Matrix::Identity(q, q);
      b = (i - s * y.transpose() / sy) * b * (i - y * s.transpose() / sy) +
          s * s.transpose() / sy;
    }
    x = xn;
    f = fn;
    g = gn;
  }
  return {x, f};
}

Vector grid_sds(const AssembledModel& model, const Vector& mode) {
  const int q = model.n_theta;
  auto safe_eval = [&](const Vector& th) {
    try {
      return log_marginal_hyper(model, th);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const double h = 0.1;
  Matrix hess(q, q);
  double f0 = safe_eval(mode);
  bool ok = std::isfinite(f0);
  for (int i = 0; i < q && ok; ++i) {
    for (int j = i; j < q && ok; ++j) {
      Vector pp = mode, pm = mode, mp = mode, mm = mode;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      double v = (safe_eval(pp) - safe_eval(pm) - safe_eval(mp) + safe_eval(mm)) /
                 (4.0 * h * h);
      if (!std::isfinite(v)) ok = false;
      hess(i, j) = hess(j, i) = v;
    }
  }
  Vector sds = Vector::Ones(q);
  if (ok) {
    Eigen::LLT<Matrix> llt(Matrix(-hess));
    if (llt.info() == Eigen::Success) {
      Matrix cov = llt.solve(Matrix::Identity(q, q));
      for (int i = 0; i < q; ++i)
        sds(i) = std::sqrt(std::max(cov(i, i), 1e-4));
    }
  }
  return sds;
}

void run_parallel(int n_jobs, bool parallel,
                  const std::function<void(int)>& body) {
  if (!parallel || n_jobs < 2) {
    for (int i = 0; i < n_jobs; ++i) body(i);
    return;
  }
  unsigned n_threads =
      std::min<unsigned>(std::thread::hardware_concurrency(), n_jobs);
  if (n_threads < 2) {
    for (int i = 0; i < n_jobs; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < n_threads; ++t)
    workers.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1))
        body(i);
    });
  for (auto& w : workers) w.join();
}

double weighted_quantile(std::vector<std::pair<double, double>> pairs,
                         double p) {
  std::sort(pairs.begin(), pairs.end());
  double cum = 0.0;
  for (const auto& [v, w] : pairs) {
    cum += w;
    if (cum >= p) return v;
  }
  return pairs.back().first;
}

}  // namespace

double FitResult::mixture_quantile(int coordinate, double p) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& pt : points) {
    lo = std::min(lo, pt.mode(coordinate) - 10.0 * pt.marginal_sd(coordinate) - 1e-8);
    hi = std::max(hi, pt.mode(coordinate) + 10.0 * pt.marginal_sd(coordinate) + 1e-8);
  }
  auto cdf = [&](double x) {
    double c = 0.0;
    for (const auto& pt : points) {
      double s = pt.marginal_sd(coordinate);
      if (s > 0.0)
        c += pt.weight * normal_cdf((x - pt.mode(coordinate)) / s);
      else if (x >= pt.mode(coordinate))
        c += pt.weight;
    }
    return c;
  };
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

FitResult fit_model(const AssembledModel& model, const GridConfig& config) {
  FitResult fit;
  fit.draw_seed = config.seed;

  if (model.n_theta == 0) {
    GaussianApprox ga = gaussian_approx(model, Vector(0), config.max_newton_iter);
    GridPoint pt;
    pt.theta = Vector(0);
    pt.log_posterior = ga.log_evidence;
    pt.weight = 1.0;
    pt.mode = ga.mode;
    pt.marginal_sd = ga.marginal_sd;
    fit.points.push_back(std::move(pt));
    fit.theta_mode = Vector(0);
    fit.mixture_mean = ga.mode;
    fit.mixture_sd = ga.marginal_sd;
    attach_deviance_diagnostics(model, fit, config.diagnostic_draws,
                                config.seed);
    return fit;
  }

  HyperOptimum opt = maximize_log_marginal(model);
  fit.theta_mode = opt.theta;
  for (int i = 0; i < opt.theta.size(); ++i)
    if (std::abs(opt.theta(i)) > 15.0)
      fit.warnings.push_back("hyperparameter '" + model.theta_names[i] +
                             "' mode at |log tau| > 15; the fit may be "
                             "degenerate");

  const int q = model.n_theta;
  Vector sds = grid_sds(model, opt.theta);
  std::vector<int> halfwidth(q);
  for (int i = 0; i < q; ++i)
    halfwidth[i] = std::clamp(
        static_cast<int>(std::ceil(config.range_sd * sds(i) / config.step)), 1,
        config.max_halfwidth);

  // cartesian grid centered at the mode
  std::vector<Vector> thetas;
  std::vector<int> offsets(q, 0);
  for (int i = 0; i < q; ++i) offsets[i] = -halfwidth[i];
  while (true) {
    Vector th = opt.theta;
    for (int i = 0; i < q; ++i) th(i) += offsets[i] * config.step;
    thetas.push_back(th);
    int i = 0;
    for (; i < q; ++i) {
      if (++offsets[i] <= halfwidth[i]) break;
      offsets[i] = -halfwidth[i];
    }
    if (i == q) break;
  }

  std::vector<GridPoint> points(thetas.size());
  std::vector<char> failed(thetas.size(), 0);
  std::vector<std::string> failures(thetas.size());
  run_parallel(static_cast<int>(thetas.size()), config.parallel, [&](int i) {
    try {
      GaussianApprox ga =
          gaussian_approx(model, thetas[i], config.max_newton_iter);
      points[i].theta = thetas[i];
      points[i].log_posterior = ga.log_evidence;
      points[i].mode = ga.mode;
      points[i].marginal_sd = ga.marginal_sd;
    } catch (const std::exception& e) {
      failed[i] = 1;
      failures[i] = e.what();
    }
  });

  for (size_t i = 0; i < points.size(); ++i) {
    if (failed[i]) {
      fit.warnings.push_back("grid point dropped: " + failures[i]);
      continue;
    }
    fit.points.push_back(std::move(points[i]));
  }
  if (fit.points.empty())
    throw NumericalError("fit_model: every grid point failed");

  double max_lp = -std::numeric_limits<double>::infinity();
  for (const auto& pt : fit.points) max_lp = std::max(max_lp, pt.log_posterior);
  double total = 0.0;
  for (auto& pt : fit.points) {
    pt.weight = std::exp(pt.log_posterior - max_lp);
    total += pt.weight;
  }
  for (auto& pt : fit.points) pt.weight /= total;

  // mixture marginals
  const int n = model.n_latent;
  fit.mixture_mean = Vector::Zero(n);
  Vector second_moment = Vector::Zero(n);
  for (const auto& pt : fit.points) {
    fit.mixture_mean += pt.weight * pt.mode;
    second_moment += pt.weight * (pt.marginal_sd.array().square() +
                                  pt.mode.array().square())
                                     .matrix();
  }
  fit.mixture_sd = (second_moment.array() -
                    fit.mixture_mean.array().square()).max(0.0).sqrt();

  // hyperparameter summaries
  for (int i = 0; i < q; ++i) {
    HyperSummary hs;
    hs.name = model.theta_names[i];
    std::vector<std::pair<double, double>> pairs;
    double mean = 0.0, prec_mean = 0.0;
    for (const auto& pt : fit.points) {
      pairs.emplace_back(pt.theta(i), pt.weight);
      mean += pt.weight * pt.theta(i);
      prec_mean += pt.weight * std::exp(pt.theta(i));
    }
    hs.theta_mean = mean;
    hs.theta_median = weighted_quantile(pairs, 0.5);
    hs.theta_q025 = weighted_quantile(pairs, 0.025);
    hs.theta_q975 = weighted_quantile(pairs, 0.975);
    hs.precision_mean = prec_mean;
    hs.precision_median = std::exp(hs.theta_median);
    fit.hyper.push_back(hs);
  }

  attach_deviance_diagnostics(model, fit, config.diagnostic_draws, config.seed);
  return fit;
}

void attach_deviance_diagnostics(const AssembledModel& model, FitResult& fit,
                                 int n_draws, unsigned seed) {
  Matrix draws = sample_latent(model, fit, n_draws, seed);
  fit.draw_seed = seed;
  fit.deviance_draws.resize(n_draws);
  fit.pointwise_loglik.resize(n_draws, static_cast<int>(model.observed.size()));
  for (int m = 0; m < n_draws; ++m) {
    Vector x = draws.row(m);
    Vector pw = model.pointwise_log_likelihood(x);
    fit.pointwise_loglik.row(m) = pw;
    fit.deviance_draws(m) = -2.0 * pw.sum();
  }
  fit.deviance_at_mixture_mean = model.deviance(fit.mixture_mean);
}

Matrix sample_latent(const AssembledModel& model, const FitResult& fit,
                     int n_draws, unsigned seed) {
  if (fit.points.empty()) throw DataError("sample_latent: empty fit");
  const int n = model.n_latent;
  const int d = static_cast<int>(model.feasible.cols());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // component per draw from the grid weights
  std::vector<int> component(n_draws);
  std::vector<std::vector<int>> rows_of(fit.points.size());
  for (int m = 0; m < n_draws; ++m) {
    double u = unif(rng);
    double cum = 0.0;
    int k = static_cast<int>(fit.points.size()) - 1;
    for (size_t j = 0; j < fit.points.size(); ++j) {
      cum += fit.points[j].weight;
      if (u <= cum) {
        k = static_cast<int>(j);
        break;
      }
    }
    component[m] = k;
    rows_of[k].push_back(m);
  }

  std::normal_distribution<double> norm(0.0, 1.0);
  Matrix draws(n_draws, n);
  for (size_t k = 0; k < fit.points.size(); ++k) {
    if (rows_of[k].empty()) continue;
    const auto& pt = fit.points[k];
    if (pt.marginal_sd.cwiseAbs().maxCoeff() == 0.0) {
      for (int row : rows_of[k]) draws.row(row) = pt.mode;
      continue;
    }
    // rebuild the curvature factor at the stored mode
    Matrix qp = model.prior_precision(pt.theta);
    Matrix h = model.feasible.transpose() * qp * model.feasible;
    Vector eta = model.linear_predictor(pt.mode);
    for (int c : model.observed)
      h += std::exp(eta(c)) * model.incidence_reduced.row(c).transpose() *
           model.incidence_reduced.row(c);
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success)
      throw NumericalError("sample_latent: stored mode has indefinite "
                           "curvature");
    Matrix l = llt.matrixL();
    for (int row : rows_of[k]) {
      Vector z(d);
      for (int i = 0; i < d; ++i) z(i) = norm(rng);
      Vector u_draw = l.transpose().triangularView<Eigen::Upper>().solve(z);
      draws.row(row) = pt.mode + model.feasible * u_draw;
    }
  }
  return draws;
}

DicResult compute_dic(const FitResult& fit) {
  if (fit.deviance_draws.size() == 0)
    throw DataError("compute_dic: fit carries no deviance diagnostics");
  DicResult out;
  out.mean_deviance = fit.deviance_draws.mean();
  out.deviance_at_mean = fit.deviance_at_mixture_mean;
  out.p_d = out.mean_deviance - out.deviance_at_mean;
  out.dic = out.mean_deviance + out.p_d;
  return out;
}

WaicResult compute_waic(const FitResult& fit) {
  const int m = static_cast<int>(fit.pointwise_loglik.rows());
  if (m < 100)
    throw DataError("compute_waic: needs at least 100 draws, have " +
                    std::to_string(m));
  const int c = static_cast<int>(fit.pointwise_loglik.cols());
  WaicResult out;
  for (int j = 0; j < c; ++j) {
    Vector ll = fit.pointwise_loglik.col(j);
    double mx = ll.maxCoeff();
    double lme = mx + std::log((ll.array() - mx).exp().mean());
    double mean = ll.mean();
    double var = (ll.array() - mean).square().sum() / (m - 1);
    out.lppd += lme;
    out.p_waic += var;
  }
  out.waic = -2.0 * (out.lppd - out.p_waic);
  return out;
}

}  // namespace ratesmooth
