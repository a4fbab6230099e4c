#include "supcon/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "supcon/errors.hpp"
#include "supcon/rng.hpp"

namespace supcon {

namespace {

// Fills sim[j] = z_i . z_j / tau for active j and returns the max-shifted
// log-sum-exp over the active set, accumulated in ascending column order.
double active_lse(const Matrix& z, const BatchStructure& s, std::size_t i,
                  double tau, std::vector<double>& sim) {
  const std::size_t n = s.size();
  sim.assign(n, 0.0);
  const auto zi = z.row(i);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (!s.active_mask.at(i, j)) continue;
    sim[j] = dot(zi, z.row(j)) / tau;
    mx = std::max(mx, sim[j]);
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (s.active_mask.at(i, j)) acc += std::exp(sim[j] - mx);
  return mx + std::log(acc);
}

double stable_log1pexp(double x) {
  // log(1 + exp(x)) without overflow for large x.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

std::string_view loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::kSelfSup: return "selfsup";
    case LossVariant::kSupOut: return "supout";
    case LossVariant::kSupIn: return "supin";
    case LossVariant::kNPairs: return "npairs";
    case LossVariant::kTriplet: return "triplet";
    case LossVariant::kXentContrastive: return "xent";
  }
  return "unknown";
}

LossOutput loss_self(const Matrix& z, const BatchStructure& s, double tau) {
  LossOutput out;
  const std::size_t n = s.size();
  out.per_anchor.assign(n, 0.0);
  std::vector<double> sim;
  for (std::size_t i = 0; i < n; ++i) {
    const double lse = active_lse(z, s, i, tau, sim);
    const double li = lse - sim[s.view_pair[i]];
    out.per_anchor[i] = li;
    out.total += li;
  }
  return out;
}

LossOutput loss_sup_out(const Matrix& z, const BatchStructure& s, double tau) {
  LossOutput out;
  const std::size_t n = s.size();
  out.per_anchor.assign(n, 0.0);
  std::vector<double> sim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto pos = s.positives(i);
    if (pos.empty()) {
      out.skipped_anchors.push_back(i);
      continue;
    }
    const double lse = active_lse(z, s, i, tau, sim);
    double acc = 0.0;
    for (std::size_t p : pos) acc += lse - sim[p];
    const double li = acc / static_cast<double>(pos.size());
    out.per_anchor[i] = li;
    out.total += li;
  }
  return out;
}

LossOutput loss_sup_in(const Matrix& z, const BatchStructure& s, double tau) {
  LossOutput out;
  const std::size_t n = s.size();
  out.per_anchor.assign(n, 0.0);
  std::vector<double> sim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto pos = s.positives(i);
    if (pos.empty()) {
      out.skipped_anchors.push_back(i);
      continue;
    }
    const double lse = active_lse(z, s, i, tau, sim);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t p : pos) mx = std::max(mx, sim[p]);
    double acc = 0.0;
    for (std::size_t p : pos) acc += std::exp(sim[p] - mx);
    const double lse_pos = mx + std::log(acc);
    const double li =
        std::log(static_cast<double>(pos.size())) + lse - lse_pos;
    out.per_anchor[i] = li;
    out.total += li;
  }
  return out;
}

std::size_t npairs_cross_positive(const BatchStructure& s, std::size_t i) {
  for (std::size_t x = 0; x < s.size(); ++x) {
    if (x == i || x == s.view_pair[i]) continue;
    if (s.labels[x] == s.labels[i]) return x;
  }
  throw MissingCrossPositiveError(i);
}

LossOutput loss_npairs(const Matrix& z, const BatchStructure& s) {
  LossOutput out;
  const std::size_t n = s.size();
  out.per_anchor.assign(n, 0.0);
  std::vector<double> sim;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = npairs_cross_positive(s, i);
    const double lse = active_lse(z, s, i, 1.0, sim);
    const double li = lse - sim[k];
    out.per_anchor[i] = li;
    out.total += li;
  }
  return out;
}

LossOutput loss_self(const MultiviewBatch& b, double tau) {
  return loss_self(b.z.matrix(), b.structure, tau);
}
LossOutput loss_sup_out(const MultiviewBatch& b, double tau) {
  return loss_sup_out(b.z.matrix(), b.structure, tau);
}
LossOutput loss_sup_in(const MultiviewBatch& b, double tau) {
  return loss_sup_in(b.z.matrix(), b.structure, tau);
}
LossOutput loss_npairs(const MultiviewBatch& b) {
  return loss_npairs(b.z.matrix(), b.structure);
}

double loss_triplet(std::span<const double> z_a, std::span<const double> z_p,
                    std::span<const double> z_n, double margin) {
  double dp = 0.0, dn = 0.0;
  for (std::size_t k = 0; k < z_a.size(); ++k) {
    const double up = z_a[k] - z_p[k];
    const double un = z_a[k] - z_n[k];
    dp += up * up;
    dn += un * un;
  }
  return std::max(0.0, dp - dn + margin);
}

TripletLimit triplet_limit_check(std::span<const double> z_a,
                                 std::span<const double> z_p,
                                 std::span<const double> z_n, double tau) {
  const double delta = dot(z_a, z_n) - dot(z_a, z_p);
  TripletLimit r;
  r.exact = stable_log1pexp(delta / tau);
  r.approx = std::exp(delta / tau);
  r.bound = 0.5 * std::exp(2.0 * delta / tau);
  return r;
}

BatchStructure cap_positives(const BatchStructure& s, std::size_t k,
                             std::uint64_t seed) {
  if (k < 1) throw ConfigError("cap_positives: k must be >= 1");
  BatchStructure out = s;
  const Rng base = Rng(seed).child(stream::kCapping);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto pos = s.positives(i);
    if (pos.size() <= k) continue;
    const std::size_t vp = s.view_pair[i];
    std::vector<std::size_t> kept;
    std::vector<std::size_t> cands;
    std::size_t need = k;
    if (s.positive_mask.at(i, vp)) {
      kept.push_back(vp);
      --need;
      for (std::size_t p : pos)
        if (p != vp) cands.push_back(p);
    } else {
      cands = pos;
    }
    Rng rng = base.child(static_cast<std::uint64_t>(i));
    for (std::size_t t = 0; t < need; ++t) {
      const std::size_t pick = t + rng.uniform_index(cands.size() - t);
      std::swap(cands[t], cands[pick]);
      kept.push_back(cands[t]);
    }
    for (std::size_t p : pos) {
      if (std::find(kept.begin(), kept.end(), p) != kept.end()) continue;
      out.positive_mask.set(i, p, false);
      out.active_mask.set(i, p, false);
    }
  }
  return out;
}

MultiviewBatch cap_positives(const MultiviewBatch& b, std::size_t k,
                             std::uint64_t seed) {
  return MultiviewBatch(b.z, cap_positives(b.structure, k, seed));
}

XentEquivalence xent_as_contrastive(const Matrix& logits,
                                    const std::vector<int>& labels,
                                    double tau) {
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  if (c < 2) throw ConfigError("xent_as_contrastive: need at least 2 classes");
  if (labels.size() != n)
    throw ConfigError("xent_as_contrastive: label count mismatch");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ConfigError("xent_as_contrastive: label out of range");

  XentEquivalence r;

  // Contrastive path: the candidates are the C one-hot class vectors; the
  // positive is the true class's one-hot, the rest are negatives. Dot
  // products are taken explicitly against the materialized basis.
  Matrix onehot(c, c);
  for (std::size_t j = 0; j < c; ++j) onehot.at(j, j) = 1.0;
  std::vector<double> sim(c);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      sim[j] = dot(logits.row(i), onehot.row(j)) / tau;
      mx = std::max(mx, sim[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(sim[j] - mx);
    r.contrastive_form +=
        (mx + std::log(acc)) - sim[static_cast<std::size_t>(labels[i])];
  }

  // Direct path: temperature-scaled softmax probabilities, then -log p_y.
  std::vector<double> prob(c);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      mx = std::max(mx, logits.at(i, j) / tau);
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      prob[j] = std::exp(logits.at(i, j) / tau - mx);
      acc += prob[j];
    }
    r.standard_ce += -std::log(prob[static_cast<std::size_t>(labels[i])] / acc);
  }
  return r;
}

SmoothingBound label_smoothing_bound(const Matrix& logits,
                                     const std::vector<int>& labels,
                                     double beta1, double beta2, double tau) {
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  if (c < 2)
    throw ConfigError("label_smoothing_bound: need at least 2 classes");
  if (labels.size() != n)
    throw ConfigError("label_smoothing_bound: label count mismatch");
  if (beta1 <= 0.0 || beta1 > 1.0) throw InvalidAlphaError(beta1);
  if (beta2 <= 0.0 || beta2 > 1.0) throw InvalidAlphaError(beta2);
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ConfigError("label_smoothing_bound: label out of range");

  SmoothingBound r;
  std::vector<double> scaled(c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    // Smoothed cross entropy: sum_c alpha_c * (lse(z/tau) - z_c/tau).
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      scaled[j] = logits.at(i, j) / tau;
      mx = std::max(mx, scaled[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(scaled[j] - mx);
    const double lse = mx + std::log(acc);
    for (std::size_t j = 0; j < c; ++j) {
      const double alpha = (j == y) ? beta1 : beta2;
      r.lhs += alpha * (lse - scaled[j]);
    }
    // Contrastive form: one term per class, each a full softmax loss at the
    // sharper temperature tau/alpha_c applied uniformly inside that term.
    for (std::size_t j = 0; j < c; ++j) {
      const double alpha = (j == y) ? beta1 : beta2;
      double mxa = -std::numeric_limits<double>::infinity();
      for (std::size_t jj = 0; jj < c; ++jj)
        mxa = std::max(mxa, alpha * scaled[jj]);
      double acca = 0.0;
      for (std::size_t jj = 0; jj < c; ++jj)
        acca += std::exp(alpha * scaled[jj] - mxa);
      r.rhs += (mxa + std::log(acca)) - alpha * scaled[j];
    }
  }
  return r;
}

LossOutput compute_loss(const Matrix& z, const BatchStructure& s,
                        const LossSpec& spec) {
  LossOutput out;
  switch (spec.variant) {
    case LossVariant::kSelfSup: out = loss_self(z, s, spec.tau); break;
    case LossVariant::kSupOut: out = loss_sup_out(z, s, spec.tau); break;
    case LossVariant::kSupIn: out = loss_sup_in(z, s, spec.tau); break;
    case LossVariant::kNPairs: out = loss_npairs(z, s); break;
    default:
      throw ConfigError(std::string("compute_loss: variant ") +
                        std::string(loss_variant_name(spec.variant)) +
                        " is not a batch loss");
  }
  if (spec.rescale_by_tau) out.total *= spec.tau;
  return out;
}

LossOutput compute_loss(const MultiviewBatch& b, const LossSpec& spec) {
  return compute_loss(b.z.matrix(), b.structure, spec);
}

}  // namespace supcon
