#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ratesmooth/covariates.hpp"
#include "ratesmooth/graph.hpp"
#include "ratesmooth/structure.hpp"

using namespace ratesmooth;

namespace {

CovariateVector make_cov(std::initializer_list<double> vals) {
  CovariateVector c;
  c.name = "x";
  c.values = Vector::Zero(static_cast<int>(vals.size()));
  int i = 0;
  for (double v : vals) c.values(i++) = v;
  return c;
}

EigenSystem spain_eigensystem() {
  std::ifstream labels_file(std::string(RATESMOOTH_DATA_DIR) +
                            "/spain_provinces_labels.csv");
  auto labels = load_area_labels(labels_file);
  std::ifstream edge_file(std::string(RATESMOOTH_DATA_DIR) +
                          "/spain_provinces_edges.txt");
  auto graph = load_adjacency(edge_file, labels);
  return eigendecompose(scale_structure(icar_structure(graph)).entries);
}

}  // namespace

TEST_CASE("standardize centers and scales with the sample sd") {
  auto s = standardize_covariate(make_cov({1, 2, 3}));
  CHECK(s.values(0) == doctest::Approx(-1.0));
  CHECK(s.values(1) == doctest::Approx(0.0));
  CHECK(s.values(2) == doctest::Approx(1.0));
  CHECK(s.center == doctest::Approx(2.0));
  CHECK(s.scale == doctest::Approx(1.0));
}

TEST_CASE("standardize is idempotent and keeps the original scale") {
  auto once = standardize_covariate(make_cov({3, 7, 9, 15, 2}));
  auto twice = standardize_covariate(once);
  CHECK((once.values - twice.values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(twice.center == doctest::Approx(once.center));
  CHECK(twice.scale == doctest::Approx(once.scale));
  CHECK(std::abs(once.values.mean()) < 1e-10);
  double sd = std::sqrt(once.values.squaredNorm() / 4.0);
  CHECK(sd == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("constant covariates are rejected") {
  CHECK_THROWS_AS(standardize_covariate(make_cov({2, 2, 2})), DataError);
}

TEST_CASE("decorrelation removes the trailing eigenvectors") {
  auto es = eigendecompose(scale_structure(rw_structure(10, 1)).entries);

  SUBCASE("a vector orthogonal to the removed span is unchanged") {
    Vector x = es.vectors.col(0) + 2.0 * es.vectors.col(1);
    auto dec = decorrelate_covariate(x, es, 1);
    CHECK((dec.z - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(dec.removed_energy < 1e-20);
  }
  SUBCASE("the constant vector is removed entirely") {
    Vector x = Vector::Ones(10);
    auto dec = decorrelate_covariate(x, es, 0);
    CHECK(dec.z.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("reconstruction and orthogonality") {
    Vector x(10);
    x << 3, 1, 4, 1, 5, 9, 2, 6, 5, 3;
    auto dec = decorrelate_covariate(x, es, 1);
    Vector reconstructed = dec.z + dec.removed_span * dec.removed_coefficients;
    CHECK((reconstructed - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((dec.removed_span.transpose() * dec.z).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("decorrelation of a province-level covariate, k = 5") {
  auto es = spain_eigensystem();
  Vector x(47);
  for (int i = 0; i < 47; ++i) x(i) = std::sin(0.37 * i) + 0.002 * i * i;
  CovariateVector c;
  c.name = "rural";
  c.values = x;
  auto dec = decorrelate_covariate(standardize_covariate(c).values, es, 5);
  CHECK(dec.removed_span.cols() == 6);
  Vector inner = dec.removed_span.transpose() * dec.z;
  for (int i = 0; i < 6; ++i) CHECK(std::abs(inner(i)) < 1e-10);

  SUBCASE("idempotence") {
    auto again = decorrelate_covariate(dec.z, es, 5);
    CHECK((again.z - dec.z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(again.z.norm() - dec.z.norm()) < 1e-12);
  }
  SUBCASE("removed energy is monotone in k") {
    double prev = -1.0;
    for (int k = 0; k <= 8; ++k) {
      auto d = decorrelate_covariate(x, es, k);
      CHECK(d.removed_energy >= prev);
      prev = d.removed_energy;
    }
  }
}

TEST_CASE("the removal cap rejects oversized k") {
  auto es = spain_eigensystem();
  Vector x = Vector::LinSpaced(47, 0, 46);
  CHECK_NOTHROW(decorrelate_covariate(x, es, 9));  // 10 of 47 at the cap
  CHECK_THROWS_AS(decorrelate_covariate(x, es, 10), DataError);

  auto es13 = eigendecompose(rw_structure(13, 1).entries);
  Vector y = Vector::LinSpaced(13, 0, 12);
  CHECK_NOTHROW(decorrelate_covariate(y, es13, 2));  // 3 of 13, cap rounds up
  CHECK_THROWS_AS(decorrelate_covariate(y, es13, 3), DataError);
  CHECK_NOTHROW(decorrelate_covariate(y, es13, 3, RemovalCount::Exact));
}

TEST_CASE("axis length mismatch is rejected") {
  auto es = eigendecompose(rw_structure(10, 1).entries);
  CHECK_THROWS_AS(decorrelate_covariate(Vector::Ones(9), es, 1), DataError);
}

TEST_CASE("rate ratio of a point mass at zero is one") {
  auto rr = rate_ratio({0.0, 0.0, 0.0}, 2.5, 10.0);
  CHECK(rr.q025 == 1.0);
  CHECK(rr.median == 1.0);
  CHECK(rr.q975 == 1.0);
}

TEST_CASE("rate ratio median for a unit change") {
  auto rr = rate_ratio({0.05, 0.1, 0.2}, 1.0, 1.0);
  CHECK(rr.median == doctest::Approx(std::exp(0.1)));
}

TEST_CASE("rate ratio back-solves a reported effect size") {
  // median 0.079 on the standardized scale; a 10-unit change on a scale of
  // 10 * 0.079 / ln(1.054) reproduces a 1.054 ratio
  double scale = 10.0 * 0.079 / std::log(1.054);
  CHECK(scale == doctest::Approx(15.02).epsilon(1e-3));
  auto rr = rate_ratio({0.033, 0.079, 0.125}, scale, 10.0);
  CHECK(rr.median == doctest::Approx(1.054).epsilon(1e-6));
  CHECK(rr.q025 == doctest::Approx(1.022).epsilon(1e-3));
  CHECK(rr.q975 == doctest::Approx(1.086).epsilon(1e-3));
}

TEST_CASE("rate ratio is monotone in delta for a positive median") {
  CoefficientQuantiles beta{0.02, 0.1, 0.3};
  double prev_med = 0.0, prev_lo = 0.0, prev_hi = 0.0;
  for (double delta : {0.5, 1.0, 2.0, 5.0}) {
    auto rr = rate_ratio(beta, 1.0, delta);
    CHECK(rr.median > prev_med);
    CHECK(rr.q025 > prev_lo);
    CHECK(rr.q975 > prev_hi);
    prev_med = rr.median;
    prev_lo = rr.q025;
    prev_hi = rr.q975;
  }
}

TEST_CASE("rate ratio rejects a nonpositive scale") {
  CHECK_THROWS_AS(rate_ratio({0, 0, 0}, 0.0, 1.0), DataError);
}
