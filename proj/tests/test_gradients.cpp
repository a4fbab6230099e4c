#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"
#include "supcon/errors.hpp"
#include "supcon/gradients.hpp"
#include "supcon/losses.hpp"
#include "supcon/rng.hpp"

using namespace supcon;

namespace {

// two sources with distinct labels: every anchor has exactly one positive
BatchStructure two_pair_structure() {
  return make_batch_structure({0, 1}, true);
}

}  // namespace

TEST_SUITE("gradients") {

TEST_CASE("softmax weights are row-stochastic over the active set") {
  Rng rng(200);
  const BatchStructure s = make_batch_structure({0, 1, 0, 2}, true);
  const Matrix z = testutil::random_unit_rows(rng, s.size(), 5);
  const SoftmaxWeights w = softmax_weights(z, s, 0.2);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double prow = 0.0, xrow = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!s.active_mask.at(i, j)) {
        CHECK(w.p.at(i, j) == 0.0);
        CHECK(w.x_in.at(i, j) == 0.0);
      }
      if (!s.positive_mask.at(i, j)) CHECK(w.x_in.at(i, j) == 0.0);
      prow += w.p.at(i, j);
      xrow += w.x_in.at(i, j);
    }
    CHECK(prow == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(xrow == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.x_out[i] ==
          doctest::Approx(1.0 / static_cast<double>(s.positive_count(i)))
              .epsilon(1e-15));
  }
}

TEST_CASE("softmax concentrates on the dominant similarity as tau shrinks") {
  Rng rng(201);
  for (int rep = 0; rep < 50; ++rep) {
    const BatchStructure s = make_batch_structure({0, 1, 0}, true);
    const Matrix z = testutil::random_unit_rows(rng, s.size(), 4);
    const SoftmaxWeights w = softmax_weights(z, s, 1e-2);
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t arg = 0;
      double best = -2.0, second = -2.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (!s.active_mask.at(i, j)) continue;
        const double sim = dot(z.row(i), z.row(j));
        if (sim > best) {
          second = best;
          best = sim;
          arg = j;
        } else if (sim > second) {
          second = sim;
        }
      }
      // concentration needs an actually dominant similarity
      if (best - second < 0.05) continue;
      CHECK(w.p.at(i, arg) > 0.95);
    }
  }
}

TEST_CASE("anchor gradient on a two-pair batch matches the closed form") {
  // anchors see one positive and two negatives; hand-expand
  //   g_i = (1/tau) [ z_p (P_ip - 1) + sum_n z_n P_in ]
  Rng rng(202);
  const BatchStructure s = two_pair_structure();
  const Matrix z = testutil::random_unit_rows(rng, 4, 3);
  const double tau = 0.3;
  const SoftmaxWeights sw = softmax_weights(z, s, tau);
  for (LossVariant v : {LossVariant::kSupOut, LossVariant::kSupIn}) {
    const Matrix g = grad_anchor_z(z, s, tau, v);
    for (std::size_t i = 0; i < 4; ++i) {
      // single positive: X_ip = 1 for every variant
      const std::size_t p = s.view_pair[i];
      for (std::size_t d = 0; d < 3; ++d) {
        double want = z.at(p, d) * (sw.p.at(i, p) - 1.0);
        for (std::size_t n = 0; n < 4; ++n)
          if (s.active_mask.at(i, n) && !s.positive_mask.at(i, n))
            want += z.at(n, d) * sw.p.at(i, n);
        want /= tau;
        CHECK(g.at(i, d) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("total z gradient matches plain double finite differences") {
  Rng rng(203);
  for (LossVariant v : {LossVariant::kSelfSup, LossVariant::kSupOut,
                        LossVariant::kSupIn}) {
    const BatchStructure s = make_batch_structure({0, 1, 0, 1}, true);
    const Matrix z = testutil::random_unit_rows(rng, s.size(), 4);
    const double tau = 0.25;
    const Matrix g = grad_total_z(z, s, tau, v);
    const Matrix fd = finite_diff_grad(
        [&](const Matrix& m) {
          LossSpec spec;
          spec.variant = v;
          spec.tau = tau;
          return compute_loss(m, s, spec).total;
        },
        z, 1e-6);
    CHECK(max_rel_error(g, fd) < 1e-7);
  }
}

TEST_CASE("npairs total gradient matches the quad oracle") {
  Rng rng(204);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<int> labels;
    for (int p = 0; p < 3; ++p) {
      labels.push_back(p);
      labels.push_back(p);
    }
    const BatchStructure s = make_batch_structure(labels, true);
    const Matrix z = testutil::random_unit_rows(rng, s.size(), 5);
    const Matrix g = grad_total_z(z, s, 1.0, LossVariant::kNPairs);
    const Matrix fd = finite_diff_grad_hp(
        [&](const Matrix& m) {
          return loss_total_hp(m, s, 1.0, LossVariant::kNPairs, false);
        },
        z, 1e-6);
    CHECK(max_rel_error(g, fd) < 1e-6);
    // w-space too
    const Matrix w = testutil::random_rows(rng, s.size(), 5);
    const Matrix gw = grad_total_w(w, s, 1.0, LossVariant::kNPairs);
    const Matrix fdw = finite_diff_grad_hp(
        [&](const Matrix& m) {
          return loss_total_hp(m, s, 1.0, LossVariant::kNPairs, true);
        },
        w, 1e-6);
    CHECK(max_rel_error(gw, fdw) < 1e-6);
  }
}

TEST_CASE("check_gradient helpers agree with their own reports") {
  Rng rng(205);
  const BatchStructure s = make_batch_structure({0, 0, 1, 1}, true);
  const Matrix z = testutil::random_unit_rows(rng, s.size(), 4);
  const GradientReport rep = check_gradient_z(z, s, 0.1, LossVariant::kSupOut,
                                              1e-6);
  CHECK(rep.max_rel_err < 1e-6);
  CHECK(rep.fd_step == 1e-6);
  CHECK(rep.analytical.rows == z.rows);
  CHECK(rep.numerical.rows == z.rows);
  const Matrix w = testutil::random_rows(rng, s.size(), 4);
  CHECK(check_gradient_w(w, s, 0.1, LossVariant::kSupOut, 1e-6).max_rel_err <
        1e-6);
}

TEST_CASE("quad loss oracle agrees with the double path") {
  Rng rng(206);
  for (LossVariant v : {LossVariant::kSelfSup, LossVariant::kSupOut,
                        LossVariant::kSupIn}) {
    const BatchStructure s = make_batch_structure({0, 1, 0, 1}, true);
    const Matrix z = testutil::random_unit_rows(rng, s.size(), 5);
    LossSpec spec;
    spec.variant = v;
    spec.tau = 0.17;
    const double lo = compute_loss(z, s, spec).total;
    const double hi =
        static_cast<double>(loss_total_hp(z, s, 0.17, v, false));
    CHECK(lo == doctest::Approx(hi).epsilon(1e-13));
  }
}

TEST_CASE("w gradient rows are orthogonal to the input rows") {
  Rng rng(207);
  for (int rep = 0; rep < 50; ++rep) {
    const BatchStructure s = make_batch_structure({0, 0, 1}, true);
    const Matrix w = testutil::random_rows(rng, s.size(), 6);
    const Matrix g = grad_total_w(w, s, 0.1, LossVariant::kSupOut);
    for (std::size_t i = 0; i < w.rows; ++i) {
      const double ip = dot(w.row(i), g.row(i));
      CHECK(std::fabs(ip) / std::max(1.0, norm(w.row(i)) * norm(g.row(i))) <
            1e-12);
    }
  }
}

TEST_CASE("max_rel_error uses the denominator floor") {
  Matrix a(1, 2), b(1, 2);
  a.at(0, 0) = 1e-12;
  b.at(0, 0) = 0.0;
  // difference 1e-12 against floor 1e-8 -> 1e-4
  CHECK(max_rel_error(a, b) == doctest::Approx(1e-4).epsilon(1e-10));
  a.at(0, 1) = 2.0;
  b.at(0, 1) = 1.0;
  CHECK(max_rel_error(a, b) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("xent gradient paths agree bitwise on random logits") {
  Rng rng(208);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t c = 2 + rng.uniform_index(5);
    const std::size_t n = 1 + rng.uniform_index(4);
    Matrix l(n, c);
    for (double& v : l.data) v = 2.0 * rng.normal();
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(c));
    const double tau = 0.2 + rng.uniform01();
    const Matrix g1 = xent_grad_ce(l, y, tau);
    const Matrix g2 = xent_grad_contrastive(l, y, tau);
    CHECK(max_rel_error(g1, g2) < 1e-10);
  }
}

TEST_CASE("xent gradient matches finite differences of the direct loss") {
  Rng rng(209);
  Matrix l(3, 4);
  for (double& v : l.data) v = rng.normal();
  const std::vector<int> y{1, 3, 0};
  const double tau = 0.7;
  const Matrix g = xent_grad_ce(l, y, tau);
  const Matrix fd = finite_diff_grad(
      [&](const Matrix& m) { return xent_as_contrastive(m, y, tau).standard_ce; },
      l, 1e-6);
  CHECK(max_rel_error(g, fd) < 1e-7);
}

TEST_CASE("hardness report exposes the tangent-weight decomposition") {
  Rng rng(210);
  const BatchStructure s = make_batch_structure({0, 0, 1}, true);
  const Matrix z = testutil::random_unit_rows(rng, s.size(), 5);
  const double tau = 0.4;
  const HardnessReport rep = hardness_report(z, s, tau, LossVariant::kSupOut);
  const SoftmaxWeights sw = softmax_weights(z, s, tau);
  for (const PairHardness& ph : rep.pairs) {
    CHECK(s.active_mask.at(ph.anchor, ph.other));
    const double sim = dot(z.row(ph.anchor), z.row(ph.other));
    CHECK(ph.tangent_norm ==
          doctest::Approx(std::sqrt(std::max(0.0, 1.0 - sim * sim)))
              .epsilon(1e-12));
    if (ph.positive) {
      CHECK(s.positive_mask.at(ph.anchor, ph.other));
      CHECK(ph.weight ==
            doctest::Approx(std::fabs(sw.p.at(ph.anchor, ph.other) -
                                      sw.x_out[ph.anchor]))
                .epsilon(1e-12));
    } else {
      CHECK(ph.weight ==
            doctest::Approx(sw.p.at(ph.anchor, ph.other)).epsilon(1e-12));
    }
  }
  // find retrieves the matching pair and throws on a bogus query
  const PairHardness& found = rep.find(0, 1);
  CHECK(found.anchor == 0);
  CHECK(found.other == 1);
  CHECK_THROWS_AS(rep.find(0, 0), Error);
}

TEST_CASE("easy positives contribute vanishing gradient weight") {
  // views identical to their anchors: sim = 1, tangent factor 0
  Matrix z(4, 3);
  z.at(0, 0) = 1.0;
  z.at(1, 0) = 1.0;
  z.at(2, 1) = 1.0;
  z.at(3, 1) = 1.0;
  const BatchStructure s = make_batch_structure({0, 1}, false);
  const HardnessReport rep = hardness_report(z, s, 0.1, LossVariant::kSelfSup);
  CHECK(rep.find(0, 1).tangent_norm == 0.0);
  CHECK(rep.find(2, 3).tangent_norm == 0.0);
}

}  // TEST_SUITE
