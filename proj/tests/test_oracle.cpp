#include <doctest.h>

#include <cmath>
#include <random>

#include "ratesmooth/inference.hpp"
#include "ratesmooth/oracle.hpp"
#include "test_helpers.hpp"

using namespace ratesmooth;
using namespace ratesmooth::testing;

TEST_CASE("sampler recovers a standard normal target") {
  auto target = [](const Vector& v) { return -0.5 * v.squaredNorm(); };
  McmcConfig cfg;
  cfg.iterations = 20000;
  auto res = mcmc_sample_density(target, 1, cfg);
  const auto& s = res.summaries[0];
  CHECK(std::abs(s.mean) < 3.0 * s.mcse);
  CHECK(s.sd == doctest::Approx(1.0).epsilon(0.05));
  CHECK(s.ess > 100.0);
  CHECK(s.rhat < 1.05);
}

TEST_CASE("sampler recovers a correlated bivariate gaussian") {
  const double rho = 0.8;
  Matrix prec(2, 2);
  double det = 1.0 - rho * rho;
  prec << 1.0 / det, -rho / det, -rho / det, 1.0 / det;
  auto target = [&](const Vector& v) { return -0.5 * v.dot(prec * v); };
  McmcConfig cfg;
  cfg.iterations = 40000;
  auto res = mcmc_sample_density(target, 2, cfg);
  Vector a = res.draws.col(0), b = res.draws.col(1);
  double ma = a.mean(), mb = b.mean();
  double cov = ((a.array() - ma) * (b.array() - mb)).mean();
  double corr = cov / std::sqrt((a.array() - ma).square().mean() *
                                (b.array() - mb).square().mean());
  CHECK(corr == doctest::Approx(rho).epsilon(0.0625));  // within 0.05 absolute
  CHECK(std::abs(corr - rho) < 0.05);
}

TEST_CASE("sampler runs are reproducible for a fixed seed") {
  auto target = [](const Vector& v) { return -0.5 * v.squaredNorm(); };
  McmcConfig cfg;
  cfg.iterations = 2000;
  auto r1 = mcmc_sample_density(target, 2, cfg);
  auto r2 = mcmc_sample_density(target, 2, cfg);
  CHECK((r1.draws - r2.draws).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("effective sample size shrinks for autocorrelated chains") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> norm(0.0, 1.0);
  const int n = 5000;
  Vector iid(n), ar(n);
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    iid(i) = norm(rng);
    prev = 0.9 * prev + norm(rng);
    ar(i) = prev;
  }
  CHECK(effective_sample_size(iid) > 0.8 * n);
  CHECK(effective_sample_size(ar) < 0.25 * n);
}

TEST_CASE("quadrature matches the conjugate gaussian closed form") {
  // y_i ~ N(alpha, sigma^2), alpha ~ N(0, 1/p)
  Vector y(5);
  y << 0.3, -0.1, 0.5, 0.2, 0.1;
  const double sigma = 0.7, p = 2.0;
  auto model = intercept_only_model(y, Vector::Ones(5), p);
  model.family = ObservationFamily::Gaussian;
  model.noise_sd = sigma;
  auto res = grid_posterior(model);
  double post_prec = p + 5.0 / (sigma * sigma);
  double post_mean = (y.sum() / (sigma * sigma)) / post_prec;
  const auto& s = res.summary("intercept");
  CHECK(s.mean == doctest::Approx(post_mean).epsilon(1e-6));
  CHECK(s.sd == doctest::Approx(1.0 / std::sqrt(post_prec)).epsilon(1e-6));
  CHECK(res.warnings.empty());
}

TEST_CASE("quadrature mode hits the flat-prior poisson rate") {
  Vector deaths(1), exposure(1);
  deaths << 10;
  exposure << 1000;
  auto model = intercept_only_model(deaths, exposure, 1e-12);
  auto res = grid_posterior(model);
  CHECK(std::exp(res.mode(0)) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("refining the quadrature grid shrinks the error estimate") {
  Vector deaths(1), exposure(1);
  deaths << 7;
  exposure << 50;
  auto model = intercept_only_model(deaths, exposure);
  GridOracleConfig coarse, fine;
  coarse.points_per_axis = 401;
  fine.points_per_axis = 801;
  double est_coarse = grid_posterior(model, {}, coarse).summary("intercept").mcse;
  double est_fine = grid_posterior(model, {}, fine).summary("intercept").mcse;
  CHECK(est_fine <= std::max(0.5 * est_coarse, 1e-9));
}

TEST_CASE("quadrature rejects oversized problems") {
  auto data = make_dataset(
      label_range(1), year_range(8), default_ages(4),
      [](int, int, int) { return 3.0; }, [](int, int, int) { return 1000.0; });
  auto model =
      assemble_model(parse_model_spec("age-time; time=rw1"), data, "M");
  CHECK_THROWS_AS(grid_posterior(model), DataError);
}

TEST_CASE("cross-oracle agreement on the poisson intercept toy") {
  Vector deaths(6), exposure(6);
  deaths << 11, 14, 9, 16, 12, 10;
  exposure << 1000, 1200, 800, 1500, 1100, 900;
  auto model = intercept_only_model(deaths, exposure);
  auto grid = grid_posterior(model);
  McmcConfig cfg;
  cfg.iterations = 20000;
  auto mcmc = mcmc_sample(model, cfg);
  const auto& gs = grid.summary("intercept");
  const auto& ms = mcmc.summary("intercept");
  CHECK(std::abs(gs.mean - ms.mean) < 3.0 * ms.mcse);
  CHECK(ms.sd == doctest::Approx(gs.sd).epsilon(0.1));
}

TEST_CASE("mcmc draws satisfy the model constraints") {
  auto data = make_dataset(
      label_range(3), year_range(1), default_ages(2),
      [](int a, int, int g) { return 6.0 + 2 * a + g; },
      [](int, int, int) { return 2000.0; });
  auto g = make_path_graph(3);
  auto model = assemble_model(parse_model_spec("age-space"), data, "M", &g);
  McmcConfig cfg;
  cfg.iterations = 4000;
  auto res = mcmc_sample(model, cfg);
  // latent columns come first in the draw matrix
  Matrix latent = res.draws.leftCols(model.n_latent);
  Matrix violation = model.constraints * latent.transpose();
  CHECK(violation.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mcmc enforces the latent dimension guard") {
  auto data = make_dataset(
      label_range(1), year_range(30), default_ages(8),
      [](int, int, int) { return 2.0; }, [](int, int, int) { return 1000.0; });
  auto model = assemble_model(
      parse_model_spec("age-time; time=rw1; interaction=I"), data, "M");
  REQUIRE(model.n_latent > 200);
  McmcConfig cfg;
  CHECK_THROWS_AS(mcmc_sample(model, cfg), DataError);
}

TEST_CASE("engine matches the fixed-theta quadrature on a path-graph toy") {
  auto data = make_dataset(
      label_range(3), year_range(1), default_ages(1),
      [](int a, int, int) { return 8.0 + 3 * a; },
      [](int, int, int) { return 1500.0; });
  auto g = make_path_graph(3);
  auto model = assemble_model(parse_model_spec("age-space"), data, "M", &g);
  REQUIRE(model.feasible.cols() == 3);
  Vector theta(1);
  theta << 1.0;
  auto ga = gaussian_approx(model, theta);
  auto oracle = grid_posterior(model, theta);
  for (int i = 0; i < model.n_latent; ++i) {
    const auto& s = oracle.summaries[i];
    CHECK(std::abs(ga.mode(i) - s.mean) < 0.02);
    CHECK(ga.marginal_sd(i) == doctest::Approx(s.sd).epsilon(0.1));
  }
}

TEST_CASE("engine DIC tracks an mcmc-based DIC on the intercept toy") {
  std::mt19937_64 rng(5);
  std::poisson_distribution<long> pois(60.0);
  Vector deaths(12), exposure(12);
  for (int i = 0; i < 12; ++i) {
    deaths(i) = static_cast<double>(pois(rng));
    exposure(i) = 3000.0;
  }
  auto model = intercept_only_model(deaths, exposure);
  GridConfig cfg;
  cfg.diagnostic_draws = 4000;
  auto fit = fit_model(model, cfg);
  auto engine_dic = compute_dic(fit);
  auto engine_waic = compute_waic(fit);

  McmcConfig mcfg;
  mcfg.iterations = 30000;
  auto oracle = mcmc_sample(model, mcfg);
  const int n_draws = static_cast<int>(oracle.draws.rows());
  Vector dev(n_draws);
  Matrix pw(n_draws, static_cast<int>(model.observed.size()));
  for (int m = 0; m < n_draws; ++m) {
    Vector x = oracle.draws.row(m).head(model.n_latent);
    Vector ll = model.pointwise_log_likelihood(x);
    pw.row(m) = ll;
    dev(m) = -2.0 * ll.sum();
  }
  Vector post_mean = Vector::Constant(1, oracle.summary("intercept").mean);
  double oracle_dic = 2.0 * dev.mean() - model.deviance(post_mean);
  double lppd = 0.0, p_waic = 0.0;
  for (int j = 0; j < pw.cols(); ++j) {
    Vector ll = pw.col(j);
    double mx = ll.maxCoeff();
    lppd += mx + std::log((ll.array() - mx).exp().mean());
    double mean = ll.mean();
    p_waic += (ll.array() - mean).square().sum() / (n_draws - 1);
  }
  double oracle_waic = -2.0 * (lppd - p_waic);
  CHECK(std::abs(engine_dic.dic - oracle_dic) < 2.0);
  CHECK(std::abs(engine_waic.waic - oracle_waic) < 2.0);
}
