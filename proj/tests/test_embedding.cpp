#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "supcon/embedding.hpp"
#include "supcon/errors.hpp"
#include "supcon/rng.hpp"

using namespace supcon;

TEST_SUITE("embedding") {

TEST_CASE("matrix layout is row-major with at and row agreeing") {
  Matrix m(2, 3);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) m.at(i, j) = 10.0 * i + j;
  CHECK(m.data.size() == 6);
  CHECK(m.data[4] == 11.0);
  CHECK(m.row(1)[2] == 12.0);
  CHECK(m.at(0, 2) == 2.0);
  Matrix f(2, 2, 7.0);
  for (double v : f.data) CHECK(v == 7.0);
}

TEST_CASE("dot and norm on hand vectors") {
  const std::vector<double> a{1.0, 2.0, -3.0};
  const std::vector<double> b{4.0, -5.0, 6.0};
  CHECK(dot(a, b) == doctest::Approx(-24.0).epsilon(1e-15));
  CHECK(norm(a) == doctest::Approx(std::sqrt(14.0)).epsilon(1e-15));
}

TEST_CASE("normalize_rows puts every row on the unit sphere") {
  Rng rng(11);
  const Matrix w = testutil::random_rows(rng, 7, 5);
  const UnitRows z = normalize_rows(w);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(std::fabs(norm(z.row(i)) - 1.0) < 1e-14);
    // direction preserved
    const double n = norm(w.row(i));
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(z.row(i)[j] == doctest::Approx(w.at(i, j) / n).epsilon(1e-14));
  }
}

TEST_CASE("normalize_rows rejects degenerate and non-finite rows") {
  Matrix w(2, 3);
  w.at(0, 0) = 1.0;
  SUBCASE("zero row") {
    CHECK_THROWS_AS(normalize_rows(w), DegenerateRowError);
    try {
      normalize_rows(w);
    } catch (const DegenerateRowError& e) {
      CHECK(e.row == 1);
    }
  }
  SUBCASE("norm below eps") {
    w.at(1, 0) = 1e-13;
    CHECK_THROWS_AS(normalize_rows(w), DegenerateRowError);
  }
  SUBCASE("nan entry") {
    w.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(normalize_rows(w), Error);
  }
}

TEST_CASE("UnitRows validates norms on construction") {
  Matrix ok(1, 2);
  ok.at(0, 0) = 0.6;
  ok.at(0, 1) = 0.8;
  CHECK_NOTHROW(UnitRows{ok});
  Matrix bad(1, 2);
  bad.at(0, 0) = 0.6;
  bad.at(0, 1) = 0.9;
  CHECK_THROWS_AS(UnitRows{bad}, Error);
}

TEST_CASE("pairwise_inner is the gram matrix of the rows") {
  Rng rng(3);
  const UnitRows z = normalize_rows(testutil::random_rows(rng, 6, 4));
  const Matrix g = pairwise_inner(z);
  REQUIRE(g.rows == 6);
  REQUIRE(g.cols == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::fabs(g.at(i, i) - 1.0) < 1e-14);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(g.at(i, j) == doctest::Approx(dot(z.row(i), z.row(j))).epsilon(1e-15));
      CHECK(g.at(i, j) == g.at(j, i));
      CHECK(std::fabs(g.at(i, j)) <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("normalization jacobian matches finite differences") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> w(5), g(5);
    for (auto& v : w) v = rng.normal() * 2.0 + 0.1;
    for (auto& v : g) v = rng.normal();
    const auto jg = normalization_jacobian_apply(w, g);
    // fd of f(w) = (w/|w|) . g
    const double h = 1e-6;
    for (std::size_t k = 0; k < w.size(); ++k) {
      auto probe = [&](double delta) {
        std::vector<double> wp = w;
        wp[k] += delta;
        const double n = norm(wp);
        double acc = 0.0;
        for (std::size_t j = 0; j < wp.size(); ++j) acc += wp[j] / n * g[j];
        return acc;
      };
      const double fd = (probe(h) - probe(-h)) / (2.0 * h);
      CHECK(std::fabs(jg[k] - fd) < 1e-8);
    }
  }
}

TEST_CASE("normalization jacobian output is orthogonal to the input") {
  Rng rng(23);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> w(8), g(8);
    for (auto& v : w) v = rng.normal() + 0.05;
    for (auto& v : g) v = rng.normal();
    const auto jg = normalization_jacobian_apply(w, g);
    CHECK(std::fabs(dot(w, jg)) < 1e-12 * (1.0 + norm(w) * norm(jg)));
  }
}

TEST_CASE("normalization jacobian rejects degenerate input") {
  const std::vector<double> w(4, 0.0), g(4, 1.0);
  CHECK_THROWS_AS(normalization_jacobian_apply(w, g), DegenerateRowError);
}

}  // TEST_SUITE
