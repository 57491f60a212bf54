#include <doctest.h>

#include <cmath>
#include <random>

#include "ratesmooth/inference.hpp"
#include "test_helpers.hpp"

using namespace ratesmooth;
using namespace ratesmooth::testing;

namespace {

// 1-d root of the penalized intercept score O - N e^a - p a = 0 by bisection.
double penalized_intercept_root(double o, double n, double p) {
  auto score = [&](double a) { return o - n * std::exp(a) - p * a; };
  double lo = -30.0, hi = 10.0;
  REQUIRE(score(lo) > 0.0);
  REQUIRE(score(hi) < 0.0);
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (score(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Dataset poisson_grid(int n_years, int n_ages, unsigned seed, double base_rate,
                     double exposure) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::vector<double>>> counts(
      1, std::vector<std::vector<double>>(n_years,
                                          std::vector<double>(n_ages)));
  for (int y = 0; y < n_years; ++y)
    for (int g = 0; g < n_ages; ++g) {
      double rate = base_rate * std::exp(0.25 * std::sin(1.0 + y) +
                                         0.3 * std::cos(0.5 + g));
      std::poisson_distribution<long> pois(exposure * rate);
      counts[0][y][g] = static_cast<double>(pois(rng));
    }
  return make_dataset({"X"}, year_range(n_years), default_ages(n_ages),
                      [&](int, int y, int g) { return counts[0][y][g]; },
                      [&](int, int, int) { return exposure; });
}

}  // namespace

TEST_CASE("intercept-only mode solves the penalized score equation") {
  Vector deaths(1), exposure(1);
  deaths << 10;
  exposure << 1000;
  auto model = intercept_only_model(deaths, exposure);
  auto ga = gaussian_approx(model, Vector(0));
  double root = penalized_intercept_root(10, 1000, 0.001);
  CHECK(ga.mode(0) == doctest::Approx(root).epsilon(1e-9));
  CHECK(std::abs(ga.mode(0) - root) < 1e-6);
  CHECK(std::abs(ga.mode(0) - std::log(0.01)) < 1e-3);
  CHECK(ga.gradient_norm < 1e-6);
  // curvature N e^a + p
  double expected_sd = 1.0 / std::sqrt(1000 * std::exp(ga.mode(0)) + 0.001);
  CHECK(ga.marginal_sd(0) == doctest::Approx(expected_sd).epsilon(1e-6));
}

TEST_CASE("poisson score balances the intercept prior at the mode") {
  Vector deaths(3), exposure(3);
  deaths << 14, 9, 23;
  exposure << 1200, 800, 2100;
  auto model = intercept_only_model(deaths, exposure);
  auto ga = gaussian_approx(model, Vector(0));
  Vector mu = model.linear_predictor(ga.mode).array().exp();
  double score = (deaths - mu).sum();
  CHECK(score == doctest::Approx(0.001 * ga.mode(0)).epsilon(1e-6));
}

TEST_CASE("rate mode is invariant to a common count scaling") {
  Vector deaths(1), exposure(1);
  deaths << 100000;
  exposure << 10000000;
  auto base = gaussian_approx(intercept_only_model(deaths, exposure), Vector(0));
  auto scaled = gaussian_approx(
      intercept_only_model(7.0 * deaths, 7.0 * exposure), Vector(0));
  CHECK(std::abs(std::exp(base.mode(0)) - std::exp(scaled.mode(0))) < 1e-6 *
            std::exp(base.mode(0)));
}

TEST_CASE("fitted main-effect blocks satisfy their sum constraints") {
  auto data = poisson_grid(9, 5, 7, 0.02, 4000.0);
  auto model = assemble_model(
      parse_model_spec("age-time; time=rw1; interaction=I"), data, "M");
  Vector theta = Vector::Constant(model.n_theta, 1.0);
  auto ga = gaussian_approx(model, theta);
  const auto& age = model.block("age");
  const auto& time = model.block("time");
  const auto& inter = model.block("interaction");
  CHECK(std::abs(ga.mode.segment(age.offset, age.dim).sum()) < 1e-8);
  CHECK(std::abs(ga.mode.segment(time.offset, time.dim).sum()) < 1e-8);
  CHECK(std::abs(ga.mode.segment(inter.offset, inter.dim).sum()) < 1e-8);
  CHECK((model.constraints * ga.mode).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("analytic posterior gradient matches central differences") {
  auto data = poisson_grid(5, 3, 11, 0.05, 800.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw2"), data, "M");
  Vector theta(2);
  theta << 0.4, -0.3;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> norm(0.0, 0.3);
  for (int rep = 0; rep < 3; ++rep) {
    Vector x(model.n_latent);
    for (int i = 0; i < x.size(); ++i) x(i) = norm(rng);
    Vector analytic = model.log_posterior_gradient(x, theta);
    for (int i = 0; i < x.size(); ++i) {
      double h = 1e-6 * std::max(1.0, std::abs(x(i)));
      Vector up = x, dn = x;
      up(i) += h;
      dn(i) -= h;
      double fd =
          (model.log_posterior(up, theta) - model.log_posterior(dn, theta)) /
          (2 * h);
      CHECK(analytic(i) ==
            doctest::Approx(fd).epsilon(1e-5).scale(std::abs(fd) + 1.0));
    }
  }
}

TEST_CASE("gaussian approx validates theta") {
  Vector deaths(1), exposure(1);
  deaths << 5;
  exposure << 100;
  auto model = intercept_only_model(deaths, exposure);
  CHECK_THROWS_AS(gaussian_approx(model, Vector::Ones(2)), DataError);
  auto data = poisson_grid(4, 3, 1, 0.02, 500.0);
  auto m2 = assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gaussian_approx(m2, bad), DataError);
}

TEST_CASE("laplace evidence matches the closed form for a gaussian surrogate") {
  auto data = poisson_grid(6, 4, 3, 0.02, 1000.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  model.family = ObservationFamily::Gaussian;
  model.noise_sd = 0.8;
  // replace the counts by real-valued observations
  std::mt19937_64 rng(17);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (auto& cell : model.cells) cell.deaths = 0.5 + 0.3 * norm(rng);

  Vector theta(2);
  theta << 0.7, -0.2;
  double engine = log_marginal_hyper(model, theta);

  // closed form: y ~ N(offset, sigma^2 I + B (Z'QZ)^-1 B') on the constraint
  // subspace, B = incidence * Z
  const int n_obs = static_cast<int>(model.observed.size());
  Vector y(n_obs), offset(n_obs);
  Matrix b(n_obs, model.feasible.cols());
  for (int i = 0; i < n_obs; ++i) {
    int c = model.observed[i];
    y(i) = model.cells[c].deaths;
    offset(i) = model.log_exposure(c);
    b.row(i) = model.incidence_reduced.row(c);
  }
  Matrix q_reduced =
      model.feasible.transpose() * model.prior_precision(theta) * model.feasible;
  Matrix cov = model.noise_sd * model.noise_sd *
                   Matrix::Identity(n_obs, n_obs) +
               b * q_reduced.llt().solve(b.transpose());
  Eigen::LLT<Matrix> llt(cov);
  REQUIRE(llt.info() == Eigen::Success);
  double log_det = 0.0;
  for (int i = 0; i < n_obs; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  Vector resid = y - offset;
  double closed = -0.5 * n_obs * std::log(2.0 * M_PI) - 0.5 * log_det -
                  0.5 * resid.dot(llt.solve(resid)) +
                  model.log_prior_theta(theta);
  CHECK(engine == doctest::Approx(closed).epsilon(1e-6));
}

TEST_CASE("log marginal is symmetric when the blocks play symmetric roles") {
  // transpose-symmetric counts over a 4x4 grid with rw1 on both axes
  Matrix o(4, 4);
  o << 9, 6, 4, 2, 6, 11, 7, 4, 4, 7, 12, 8, 2, 4, 8, 14;
  auto data = make_dataset({"X"}, year_range(4), default_ages(4),
                           [&](int, int y, int g) { return o(y, g); },
                           [](int, int, int) { return 900.0; });
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  Vector t1(2), t2(2);
  t1 << 0.8, -0.5;
  t2 << -0.5, 0.8;
  CHECK(log_marginal_hyper(model, t1) ==
        doctest::Approx(log_marginal_hyper(model, t2)).epsilon(1e-10));
}

TEST_CASE("collapsing a structured variance is penalized") {
  auto data = poisson_grid(10, 6, 21, 0.03, 5000.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  auto fit = fit_model(model);
  double peak = log_marginal_hyper(model, fit.theta_mode);
  for (int dim = 0; dim < 2; ++dim) {
    Vector shifted = fit.theta_mode;
    shifted(dim) += 6.0;  // variance toward zero
    double v1 = log_marginal_hyper(model, shifted);
    CHECK(v1 < peak);
    shifted(dim) += 4.0;
    CHECK(log_marginal_hyper(model, shifted) < v1);
  }
}

TEST_CASE("fit_model produces normalized weights and mixture identities") {
  auto data = poisson_grid(8, 4, 31, 0.02, 3000.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1; interaction=I"),
                     data, "M");
  auto fit = fit_model(model);
  double total = 0.0;
  Vector weighted_mean = Vector::Zero(model.n_latent);
  for (const auto& pt : fit.points) {
    total += pt.weight;
    weighted_mean += pt.weight * pt.mode;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK((weighted_mean - fit.mixture_mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit.mixture_sd.minCoeff() > 0.0);
  REQUIRE(fit.hyper.size() == 3);
  for (const auto& h : fit.hyper) {
    CHECK(h.theta_q025 <= h.theta_median);
    CHECK(h.theta_median <= h.theta_q975);
    CHECK(h.precision_median == doctest::Approx(std::exp(h.theta_median)));
  }
}

TEST_CASE("grid refinement leaves latent medians stable") {
  auto data = poisson_grid(8, 4, 41, 0.02, 3000.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  GridConfig coarse, fine;
  coarse.step = 0.75;
  fine.step = 0.375;
  fine.max_halfwidth = 12;
  auto fit_coarse = fit_model(model, coarse);
  auto fit_fine = fit_model(model, fine);
  for (int i = 0; i < model.n_latent; ++i) {
    double med_c = fit_coarse.mixture_quantile(i, 0.5);
    double med_f = fit_fine.mixture_quantile(i, 0.5);
    CHECK(std::abs(med_c - med_f) < 0.01);
  }
}

TEST_CASE("mixture quantiles are monotone and bracket the median") {
  auto data = poisson_grid(6, 3, 43, 0.03, 2000.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  auto fit = fit_model(model);
  for (int i : {0, 1, 3}) {
    double lo = fit.mixture_quantile(i, 0.025);
    double mid = fit.mixture_quantile(i, 0.5);
    double hi = fit.mixture_quantile(i, 0.975);
    CHECK(lo < mid);
    CHECK(mid < hi);
  }
}

TEST_CASE("sample_latent is deterministic and respects constraints") {
  auto data = poisson_grid(6, 4, 53, 0.02, 2500.0);
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1; interaction=II"),
                     data, "M");
  auto fit = fit_model(model);
  Matrix d1 = sample_latent(model, fit, 64, 99);
  Matrix d2 = sample_latent(model, fit, 64, 99);
  CHECK((d1 - d2).cwiseAbs().maxCoeff() == 0.0);
  Matrix violation = model.constraints * d1.transpose();
  CHECK(violation.cwiseAbs().maxCoeff() < 1e-8);
  Matrix d3 = sample_latent(model, fit, 64, 100);
  CHECK((d1 - d3).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("point-mass posterior collapses the information criteria") {
  Vector deaths(4), exposure(4);
  deaths << 12, 9, 15, 11;
  exposure << 1000, 900, 1200, 1000;
  auto model = intercept_only_model(deaths, exposure);
  FitResult fit;
  GridPoint pt;
  pt.theta = Vector(0);
  pt.weight = 1.0;
  pt.mode = Vector::Constant(1, std::log(47.0 / 4100.0));
  pt.marginal_sd = Vector::Zero(1);
  fit.points.push_back(pt);
  fit.mixture_mean = pt.mode;
  fit.mixture_sd = pt.marginal_sd;
  attach_deviance_diagnostics(model, fit, 500, 7);

  auto dic = compute_dic(fit);
  CHECK(dic.p_d == doctest::Approx(0.0));
  CHECK(dic.dic == doctest::Approx(model.deviance(pt.mode)));
  auto waic = compute_waic(fit);
  CHECK(waic.p_waic == doctest::Approx(0.0));
  CHECK(waic.waic == doctest::Approx(model.deviance(pt.mode)));
}

TEST_CASE("effective parameter count of the intercept model is near one") {
  std::mt19937_64 rng(3);
  std::poisson_distribution<long> pois(80.0);
  Vector deaths(25), exposure(25);
  for (int i = 0; i < 25; ++i) {
    deaths(i) = static_cast<double>(pois(rng));
    exposure(i) = 4000.0;
  }
  auto model = intercept_only_model(deaths, exposure);
  GridConfig cfg;
  cfg.diagnostic_draws = 4000;
  auto fit = fit_model(model, cfg);
  auto dic = compute_dic(fit);
  CHECK(dic.p_d > 0.8);
  CHECK(dic.p_d < 1.2);
  auto waic = compute_waic(fit);
  CHECK(waic.p_waic > 0.5);
  CHECK(waic.p_waic < 1.5);
}

TEST_CASE("information criteria demand diagnostics") {
  FitResult empty;
  CHECK_THROWS_AS(compute_dic(empty), DataError);
  empty.pointwise_loglik.resize(50, 3);
  CHECK_THROWS_AS(compute_waic(empty), DataError);
}
