#include "supcon/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "supcon/errors.hpp"
#include "supcon/gradients.hpp"
#include "supcon/losses.hpp"

namespace supcon {

namespace {

constexpr double kTaus[] = {0.07, 0.1, 0.5, 1.0};

std::string fmt_count(std::size_t n, const char* what) {
  return std::to_string(n) + " " + what;
}

Matrix random_normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

std::vector<int> random_labels(Rng& rng, std::size_t sources, int classes) {
  std::vector<int> labels(sources);
  for (auto& l : labels)
    l = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
  return labels;
}

// Every label used by at least two sources, so each anchor has a cross
// positive.
std::vector<int> paired_labels(Rng& rng, std::size_t sources, int classes) {
  std::vector<int> labels = random_labels(rng, sources, classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t count = 0;
    for (int l : labels)
      if (l == labels[i]) ++count;
    if (count < 2) labels[i] = labels[(i + 1) % labels.size()];
  }
  return labels;
}

double close_max(double current, double candidate) {
  return std::max(current, candidate);
}

}  // namespace

RandomBatch random_batch(Rng& rng, std::size_t sources, std::size_t dim,
                         int classes, bool with_labels) {
  RandomBatch out;
  out.w = random_normal_matrix(rng, 2 * sources, dim);
  out.z = normalize_rows(out.w).matrix();
  out.structure =
      make_batch_structure(random_labels(rng, sources, classes), with_labels);
  return out;
}

PropertyResult check_gradients(std::size_t n_per_variant, double fd_step,
                               std::uint64_t seed) {
  constexpr std::size_t kSources[] = {2, 4, 8};
  constexpr std::size_t kDims[] = {3, 8};
  const LossVariant variants[] = {LossVariant::kSelfSup, LossVariant::kSupOut,
                                  LossVariant::kSupIn};
  PropertyResult r;
  r.name = "gradients-vs-fd";
  r.tolerance = 1e-6;
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t b = 0; b < n_per_variant; ++b) {
      const std::size_t ns = kSources[b % 3];
      const std::size_t d = kDims[(b / 3) % 2];
      const double tau = kTaus[(b / 6) % 4];
      Rng rng = Rng(seed).child(v * 1000 + b);
      const std::vector<int> labels = random_labels(rng, ns, 3);
      const BatchStructure s =
          make_batch_structure(labels, variants[v] != LossVariant::kSelfSup);
      const Matrix w = random_normal_matrix(rng, 2 * ns, d);
      const Matrix z = normalize_rows(w).matrix();
      const GradientReport gz =
          check_gradient_z(z, s, tau, variants[v], fd_step);
      const GradientReport gw =
          check_gradient_w(w, s, tau, variants[v], fd_step);
      r.worst = close_max(r.worst, gz.max_rel_err);
      r.worst = close_max(r.worst, gw.max_rel_err);
    }
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(3 * n_per_variant, "batches, z and w space, fd_step ") +
             std::to_string(fd_step);
  return r;
}

PropertyResult check_jensen(std::size_t n_batches, std::uint64_t seed) {
  PropertyResult r;
  r.name = "jensen-ordering";
  r.tolerance = 1e-12;
  r.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_batches; ++i) {
    Rng rng = Rng(seed).child(i);
    const std::size_t ns = 2 + rng.uniform_index(7);
    const std::size_t d = 2 + rng.uniform_index(7);
    const int classes = 2 + static_cast<int>(rng.uniform_index(3));
    const double tau = kTaus[rng.uniform_index(4)];
    const RandomBatch b = random_batch(rng, ns, d, classes, true);
    const double in = loss_sup_in(b.z, b.structure, tau).total;
    const double out = loss_sup_out(b.z, b.structure, tau).total;
    r.worst = close_max(r.worst, in - out);
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n_batches, "random batches, worst in-out gap");
  return r;
}

PropertyResult check_jensen_equality(std::size_t n_cases,
                                     std::uint64_t seed) {
  PropertyResult r;
  r.name = "jensen-equality";
  r.tolerance = 1e-9;
  for (std::size_t i = 0; i < n_cases; ++i) {
    Rng rng = Rng(seed).child(40000 + i);
    const double tau = kTaus[rng.uniform_index(4)];
    Matrix z;
    std::size_t sources;
    if (i % 2 == 0) {
      // Regular simplex: every pairwise inner product is -1/(m-1).
      const std::size_t m = 4 + 2 * rng.uniform_index(4);
      sources = m / 2;
      z = Matrix(m, m);
      const double scale = 1.0 / std::sqrt(1.0 - 1.0 / static_cast<double>(m));
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t c = 0; c < m; ++c)
          z.at(a, c) =
              ((a == c ? 1.0 : 0.0) - 1.0 / static_cast<double>(m)) * scale;
    } else {
      // All rows identical: every similarity equals 1.
      const std::size_t m = 4 + 2 * rng.uniform_index(4);
      sources = m / 2;
      z = Matrix(m, 3);
      for (std::size_t a = 0; a < m; ++a) z.at(a, 0) = 1.0;
    }
    const BatchStructure s =
        make_batch_structure(random_labels(rng, sources, 2), true);
    const double in = loss_sup_in(z, s, tau).total;
    const double out = loss_sup_out(z, s, tau).total;
    r.worst = close_max(r.worst, std::abs(in - out));
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n_cases, "equal-similarity constructions");
  return r;
}

PropertyResult check_hierarchy_selfsup(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "hierarchy-selfsup";
  r.tolerance = 1e-14;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(50000 + i);
    const std::size_t ns = 2 + rng.uniform_index(7);
    const std::size_t d = 2 + rng.uniform_index(7);
    const double tau = kTaus[rng.uniform_index(4)];
    std::vector<int> labels(ns);
    for (std::size_t k = 0; k < ns; ++k) labels[k] = static_cast<int>(k);
    const Matrix z =
        normalize_rows(random_normal_matrix(rng, 2 * ns, d)).matrix();
    const LossOutput sup =
        loss_sup_out(z, make_batch_structure(labels, true), tau);
    const LossOutput self =
        loss_self(z, make_batch_structure(labels, false), tau);
    r.worst = close_max(r.worst, std::abs(sup.total - self.total));
    for (std::size_t a = 0; a < sup.per_anchor.size(); ++a)
      r.worst =
          close_max(r.worst, std::abs(sup.per_anchor[a] - self.per_anchor[a]));
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "all-distinct-class batches");
  return r;
}

PropertyResult check_hierarchy_npairs(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "hierarchy-npairs";
  r.tolerance = 1e-14;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(60000 + i);
    const std::size_t ns = 3 + rng.uniform_index(6);
    const std::size_t d = 2 + rng.uniform_index(7);
    const std::vector<int> labels = paired_labels(rng, ns, 2);
    const Matrix z =
        normalize_rows(random_normal_matrix(rng, 2 * ns, d)).matrix();
    const BatchStructure s = make_batch_structure(labels, true);
    const LossOutput np = loss_npairs(z, s);
    BatchStructure restricted = s;
    for (std::size_t a = 0; a < s.size(); ++a) {
      const std::size_t k = npairs_cross_positive(s, a);
      for (std::size_t p : s.positives(a))
        if (p != k) restricted.positive_mask.set(a, p, false);
    }
    const LossOutput sup = loss_sup_out(z, restricted, 1.0);
    r.worst = close_max(r.worst, std::abs(np.total - sup.total));
    for (std::size_t a = 0; a < np.per_anchor.size(); ++a)
      r.worst =
          close_max(r.worst, std::abs(np.per_anchor[a] - sup.per_anchor[a]));
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "single-cross-positive reductions at tau=1");
  return r;
}

PropertyResult check_hierarchy_cap1(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "hierarchy-cap1";
  r.tolerance = 1e-14;
  bool structure_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(70000 + i);
    const std::size_t ns = 2 + rng.uniform_index(7);
    const std::size_t d = 2 + rng.uniform_index(7);
    const double tau = kTaus[rng.uniform_index(4)];
    const int classes = 2 + static_cast<int>(rng.uniform_index(2));
    const RandomBatch b = random_batch(rng, ns, d, classes, true);
    const BatchStructure capped =
        cap_positives(b.structure, 1, Rng(seed).child(71000 + i).key());
    for (std::size_t a = 0; a < capped.size(); ++a) {
      const auto pos = capped.positives(a);
      if (pos.size() != 1 || pos[0] != capped.view_pair[a])
        structure_ok = false;
    }
    const LossOutput sup = loss_sup_out(b.z, capped, tau);
    const LossOutput self = loss_self(b.z, capped, tau);
    r.worst = close_max(r.worst, std::abs(sup.total - self.total));
    for (std::size_t a = 0; a < sup.per_anchor.size(); ++a)
      r.worst =
          close_max(r.worst, std::abs(sup.per_anchor[a] - self.per_anchor[a]));
  }
  r.pass = structure_ok && r.worst <= r.tolerance;
  r.detail = fmt_count(n, "capped batches, view-pair-only positives") +
             (structure_ok ? "" : "; STRUCTURE MISMATCH");
  return r;
}

PropertyResult check_triplet_identity(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "triplet-identity";
  r.tolerance = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(80000 + i);
    const std::size_t d = 3 + rng.uniform_index(6);
    const Matrix t = normalize_rows(random_normal_matrix(rng, 3, d)).matrix();
    const auto a = t.row(0);
    const auto p = t.row(1);
    const auto nn = t.row(2);
    const double margin = 0.5 * rng.uniform01();
    const double tau = kTaus[rng.uniform_index(4)];
    // Hinge via explicit squared distances.
    double dp = 0.0;
    double dn = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dp += (a[c] - p[c]) * (a[c] - p[c]);
      dn += (a[c] - nn[c]) * (a[c] - nn[c]);
    }
    const double naive_hinge = std::max(0.0, dp - dn + margin);
    r.worst =
        close_max(r.worst, std::abs(loss_triplet(a, p, nn, margin) -
                                    naive_hinge));
    // Unit-sphere identity when the hinge is active.
    const double linear = 2.0 * (dot(a, nn) - dot(a, p)) + margin;
    if (linear > 0)
      r.worst = close_max(
          r.worst, std::abs(loss_triplet(a, p, nn, margin) - linear));
    // Closed form of the two-candidate softmax loss.
    const double sp = dot(a, p) / tau;
    const double sn = dot(a, nn) / tau;
    const double naive_exact =
        -std::log(std::exp(sp) / (std::exp(sp) + std::exp(sn)));
    const TripletLimit tl = triplet_limit_check(a, p, nn, tau);
    r.worst = close_max(r.worst, std::abs(tl.exact - naive_exact));
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "random unit triples");
  return r;
}

PropertyResult check_triplet_bound(std::size_t n_triples,
                                   std::uint64_t seed) {
  PropertyResult r;
  r.name = "triplet-bound";
  r.tolerance = 0.0;
  r.worst = -std::numeric_limits<double>::infinity();
  std::size_t points = 0;
  for (std::size_t i = 0; i < n_triples; ++i) {
    Rng rng = Rng(seed).child(90000 + i);
    const std::size_t d = 3 + rng.uniform_index(6);
    const Matrix t = normalize_rows(random_normal_matrix(rng, 3, d)).matrix();
    std::size_t pi = 1;
    std::size_t ni = 2;
    double delta = dot(t.row(0), t.row(ni)) - dot(t.row(0), t.row(pi));
    if (delta > 0) {
      std::swap(pi, ni);
      delta = -delta;
    }
    if (delta > -1e-6) continue;  // near-tie gives tau -> 0; resampled away
    for (double target = -10.0; target <= -1.0 + 1e-9; target += 0.25) {
      const double tau = delta / target;
      const TripletLimit tl =
          triplet_limit_check(t.row(0), t.row(pi), t.row(ni), tau);
      r.worst =
          close_max(r.worst, std::abs(tl.exact - tl.approx) - tl.bound);
      ++points;
    }
  }
  r.pass = points > 0 && r.worst <= r.tolerance;
  r.detail = fmt_count(points, "sweep points over gap/tau in [-10,-1]");
  return r;
}

PropertyResult check_xent_equivalence(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "xent-equivalence";
  r.tolerance = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(100000 + i);
    const std::size_t c = 2 + i % 7;
    const std::size_t rows = 1 + rng.uniform_index(6);
    Matrix logits = random_normal_matrix(rng, rows, c);
    for (double& v : logits.data) v *= 3.0;
    std::vector<int> labels(rows);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(c));
    const double tau = (i % 4 == 0) ? 1.0 : kTaus[1 + rng.uniform_index(3)];
    const XentEquivalence eq = xent_as_contrastive(logits, labels, tau);
    r.worst =
        close_max(r.worst, std::abs(eq.contrastive_form - eq.standard_ce));
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "random logit matrices, C in 2..8");
  return r;
}

PropertyResult check_xent_gradients(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "xent-gradients";
  r.tolerance = 1e-10;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(110000 + i);
    const std::size_t c = 2 + i % 7;
    const std::size_t rows = 1 + rng.uniform_index(6);
    Matrix logits = random_normal_matrix(rng, rows, c);
    for (double& v : logits.data) v *= 3.0;
    std::vector<int> labels(rows);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(c));
    const double tau = (i % 4 == 0) ? 1.0 : kTaus[1 + rng.uniform_index(3)];
    const Matrix ga = xent_grad_ce(logits, labels, tau);
    const Matrix gb = xent_grad_contrastive(logits, labels, tau);
    for (std::size_t k = 0; k < ga.data.size(); ++k)
      r.worst = close_max(r.worst, std::abs(ga.data[k] - gb.data[k]));
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "gradient pairs along both derivations");
  return r;
}

PropertyResult check_smoothing_bound(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "smoothing-bound";
  r.tolerance = 1e-10;
  r.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(120000 + i);
    const std::size_t c = 2 + i % 7;
    const std::size_t rows = 1 + rng.uniform_index(6);
    Matrix logits = random_normal_matrix(rng, rows, c);
    for (double& v : logits.data) v *= 2.0;
    std::vector<int> labels(rows);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(c));
    const double tau = (i % 4 == 0) ? 1.0 : kTaus[1 + rng.uniform_index(3)];
    const double beta1 = 0.9;
    const double beta2 = 0.1 / static_cast<double>(c - 1);
    const SmoothingBound sb =
        label_smoothing_bound(logits, labels, beta1, beta2, tau);
    r.worst = close_max(r.worst, sb.lhs - sb.rhs);
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "smoothed-CE instances, worst lhs-rhs gap");
  return r;
}

PropertyResult check_tangency(std::size_t n, std::uint64_t seed) {
  PropertyResult r;
  r.name = "tangency";
  r.tolerance = 1e-10;
  const LossVariant variants[] = {LossVariant::kSelfSup, LossVariant::kSupOut,
                                  LossVariant::kSupIn, LossVariant::kNPairs};
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).child(130000 + i);
    const LossVariant variant = variants[i % 4];
    const std::size_t ns = 3 + rng.uniform_index(6);
    const std::size_t d = 2 + rng.uniform_index(7);
    const double tau = kTaus[rng.uniform_index(4)];
    const std::vector<int> labels = paired_labels(rng, ns, 2);
    const BatchStructure s =
        make_batch_structure(labels, variant != LossVariant::kSelfSup);
    const Matrix w = random_normal_matrix(rng, 2 * ns, d);
    const Matrix g = grad_total_w(w, s, tau, variant);
    for (std::size_t a = 0; a < w.rows; ++a) {
      const double wg = std::abs(dot(w.row(a), g.row(a)));
      double wn = 0.0;
      double gn = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        wn += w.at(a, c) * w.at(a, c);
        gn += g.at(a, c) * g.at(a, c);
      }
      const double denom = std::max(1.0, std::sqrt(wn) * std::sqrt(gn));
      r.worst = close_max(r.worst, wg / denom);
    }
  }
  r.pass = r.worst <= r.tolerance;
  r.detail = fmt_count(n, "batches over all four batch losses");
  return r;
}

PropertyResult check_hardness(std::uint64_t seed) {
  PropertyResult r;
  r.name = "hardness";
  r.tolerance = 1e-12;
  bool pass = true;
  double worst_eq = 0.0;

  // Tangent-norm identity sqrt(1-s^2) = |z_p - s z_i| on unit pairs.
  for (std::size_t i = 0; i < 200; ++i) {
    Rng rng = Rng(seed).child(140000 + i);
    const std::size_t d = 3 + rng.uniform_index(6);
    const Matrix t = normalize_rows(random_normal_matrix(rng, 2, d)).matrix();
    const double s = dot(t.row(0), t.row(1));
    double res = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double v = t.row(1)[c] - s * t.row(0)[c];
      res += v * v;
    }
    worst_eq = close_max(
        worst_eq,
        std::abs(std::sqrt(std::max(0.0, 1.0 - s * s)) - std::sqrt(res)));
  }

  // Easy positive: identical views give a vanishing tangent factor.
  {
    Rng rng = Rng(seed).child(141000);
    Matrix z = normalize_rows(random_normal_matrix(rng, 6, 4)).matrix();
    for (std::size_t c = 0; c < 4; ++c) z.at(1, c) = z.at(0, c);
    const BatchStructure s = make_batch_structure({0, 1, 2}, false);
    const HardnessReport rep = hardness_report(z, s, 0.5, LossVariant::kSelfSup);
    if (rep.find(0, 1).tangent_norm > 1e-7) pass = false;
  }

  // Contribution-norm decomposition: |J(w_i) z_x| * |w_i| = tangent_norm.
  {
    Rng rng = Rng(seed).child(142000);
    const std::vector<int> labels = paired_labels(rng, 4, 2);
    const BatchStructure s = make_batch_structure(labels, true);
    const Matrix w = random_normal_matrix(rng, 8, 5);
    const Matrix z = normalize_rows(w).matrix();
    const HardnessReport rep = hardness_report(z, s, 0.2, LossVariant::kSupOut);
    for (const PairHardness& ph : rep.pairs) {
      const std::vector<double> jz =
          normalization_jacobian_apply(w.row(ph.anchor), z.row(ph.other));
      double jn = 0.0;
      double wn = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        jn += jz[c] * jz[c];
        wn += w.at(ph.anchor, c) * w.at(ph.anchor, c);
      }
      worst_eq = close_max(worst_eq, std::abs(std::sqrt(jn) * std::sqrt(wn) -
                                              ph.tangent_norm));
    }
  }

  // More orthogonal negatives make the hard positive's weight strictly
  // larger for the out-variant.
  {
    double prev = -1.0;
    for (std::size_t m = 2; m <= 64; m += 2) {
      const std::size_t dim = 2 + m / 2;
      Matrix z(2 + m, dim);
      z.at(0, 0) = 1.0;  // anchor
      z.at(1, 1) = 1.0;  // its view, orthogonal: a hard positive
      std::vector<int> labels(1 + m / 2);
      labels[0] = 0;
      for (std::size_t j = 0; j < m / 2; ++j) {
        labels[1 + j] = static_cast<int>(1 + j);
        z.at(2 + 2 * j, 2 + j) = 1.0;
        z.at(3 + 2 * j, 2 + j) = 1.0;
      }
      const BatchStructure s = make_batch_structure(labels, true);
      const HardnessReport rep =
          hardness_report(z, s, 0.1, LossVariant::kSupOut);
      const PairHardness& ph = rep.find(0, 1);
      if (std::abs(ph.tangent_norm - 1.0) > 1e-12) pass = false;
      if (!(ph.weight > prev)) pass = false;
      prev = ph.weight;
    }
  }

  r.worst = worst_eq;
  r.pass = pass && worst_eq <= r.tolerance;
  r.detail =
      "identity, easy positive, contribution decomposition, negative-count "
      "monotonicity";
  return r;
}

std::vector<PropertyResult> run_verification_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  out.push_back(check_gradients(100, 1e-6, seed));
  out.push_back(check_jensen(10000, seed));
  out.push_back(check_jensen_equality(500, seed));
  out.push_back(check_hierarchy_selfsup(500, seed));
  out.push_back(check_hierarchy_npairs(500, seed));
  out.push_back(check_hierarchy_cap1(500, seed));
  out.push_back(check_triplet_identity(1000, seed));
  out.push_back(check_triplet_bound(200, seed));
  out.push_back(check_xent_equivalence(1000, seed));
  out.push_back(check_xent_gradients(1000, seed));
  out.push_back(check_smoothing_bound(1000, seed));
  out.push_back(check_tangency(500, seed));
  out.push_back(check_hardness(seed));
  return out;
}

}  // namespace supcon
