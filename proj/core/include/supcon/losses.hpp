#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"

namespace supcon {

enum class LossVariant { kSelfSup, kSupOut, kSupIn, kNPairs, kTriplet, kXentContrastive };

std::string_view loss_variant_name(LossVariant v);

struct LossSpec {
  LossVariant variant = LossVariant::kSupOut;
  double tau = 0.1;
  std::optional<std::size_t> max_positives;  // applied at batch assembly
  bool rescale_by_tau = false;
  std::optional<double> triplet_margin;      // defaults to 2*tau when unset
};

// per_anchor is always the unrescaled value; total applies the tau rescale
// when requested. Anchors with empty positive sets contribute zero and are
// listed in skipped_anchors.
struct LossOutput {
  double total = 0.0;
  std::vector<double> per_anchor;
  std::vector<std::size_t> skipped_anchors;
};

// Raw overloads take any finite z rows (not necessarily unit norm) so a
// finite-difference oracle can perturb coordinates; callers guarantee the
// structure is valid. The MultiviewBatch overloads are the checked entry.

// Positive of anchor i is view_pair(i); denominator runs over the active set.
LossOutput loss_self(const Matrix& z, const BatchStructure& s, double tau);
LossOutput loss_self(const MultiviewBatch& b, double tau);

// Mean over positives of per-positive log terms (sum outside the log).
LossOutput loss_sup_out(const Matrix& z, const BatchStructure& s, double tau);
LossOutput loss_sup_out(const MultiviewBatch& b, double tau);

// Log of the mean positive likelihood (sum inside the log).
LossOutput loss_sup_in(const Matrix& z, const BatchStructure& s, double tau);
LossOutput loss_sup_in(const MultiviewBatch& b, double tau);

// Single designated cross-view positive k(i): the lowest-index row with the
// anchor's label that is neither the anchor nor its view pair. Temperature
// fixed at 1. Throws MissingCrossPositiveError when no candidate exists.
LossOutput loss_npairs(const Matrix& z, const BatchStructure& s);
LossOutput loss_npairs(const MultiviewBatch& b);
std::size_t npairs_cross_positive(const BatchStructure& s, std::size_t i);

// max(0, |a-p|^2 - |a-n|^2 + margin) on unit vectors.
double loss_triplet(std::span<const double> z_a, std::span<const double> z_p,
                    std::span<const double> z_n, double margin);

struct TripletLimit {
  double exact = 0.0;   // log(1 + exp(delta/tau)), delta = a.n - a.p
  double approx = 0.0;  // exp(delta/tau)
  double bound = 0.0;   // exp(2*delta/tau) / 2; |exact-approx| <= bound for delta <= 0
};
TripletLimit triplet_limit_check(std::span<const double> z_a,
                                 std::span<const double> z_p,
                                 std::span<const double> z_n, double tau);

// Keeps at most k positives per anchor: the view pair first (when it is a
// positive), the rest drawn uniformly without replacement under the seeded
// stream. Removed positives leave both positive_mask and active_mask.
BatchStructure cap_positives(const BatchStructure& s, std::size_t k,
                             std::uint64_t seed);
MultiviewBatch cap_positives(const MultiviewBatch& b, std::size_t k,
                             std::uint64_t seed);

struct XentEquivalence {
  double contrastive_form = 0.0;
  double standard_ce = 0.0;
};
// Two independent evaluations of temperature-scaled cross entropy over raw
// logits: one phrased as a single-positive contrastive loss against the C
// one-hot class vectors, one as softmax cross entropy. Totals are sums over
// rows; they agree to ~1e-12.
XentEquivalence xent_as_contrastive(const Matrix& logits,
                                    const std::vector<int>& labels, double tau);

struct SmoothingBound {
  double lhs = 0.0;  // label-smoothed cross entropy
  double rhs = 0.0;  // contrastive form with per-class temperature tau/alpha_c
};
// Weights alpha_c = beta1 on the true class and beta2 elsewhere; every alpha
// must lie in (0, 1]. Guarantees lhs <= rhs for valid weights.
SmoothingBound label_smoothing_bound(const Matrix& logits,
                                     const std::vector<int>& labels,
                                     double beta1, double beta2, double tau);

// Dispatch over the batch variants (SelfSup/SupOut/SupIn/NPairs); applies the
// tau rescale to total when spec.rescale_by_tau. max_positives is consumed at
// batch assembly time, never here.
LossOutput compute_loss(const Matrix& z, const BatchStructure& s,
                        const LossSpec& spec);
LossOutput compute_loss(const MultiviewBatch& b, const LossSpec& spec);

}  // namespace supcon
