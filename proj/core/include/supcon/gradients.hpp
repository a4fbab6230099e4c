#pragma once

#include <functional>
#include <vector>

#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"
#include "supcon/losses.hpp"

namespace supcon {

// Softmax likelihoods for one batch at temperature tau. p is row-stochastic
// over active columns and zero elsewhere; x_in is the positives-only softmax
// (zero outside positive pairs); x_out[i] = 1/|P(i)| or 0 when P(i) is empty.
struct SoftmaxWeights {
  Matrix p;
  Matrix x_in;
  std::vector<double> x_out;
};

SoftmaxWeights softmax_weights(const Matrix& z, const BatchStructure& s,
                               double tau);
SoftmaxWeights softmax_weights(const MultiviewBatch& b, double tau);

// Per-anchor gradient rows: row i = (1/tau)[ sum_{p in P(i)} z_p (P_ip - X_ip)
// + sum_{n in N(i)} z_n P_in ]; zero for anchors with empty positive sets.
// Variant selects X: positives-only softmax (SupIn) or 1/|P(i)| (SupOut).
Matrix grad_anchor_z(const Matrix& z, const BatchStructure& s, double tau,
                     LossVariant variant);
Matrix grad_anchor_z(const MultiviewBatch& b, double tau, LossVariant variant);

// Gradient of the unrescaled LossOutput.total with respect to every z row,
// including each row's appearances as positive or negative in other anchors'
// terms. Supports SelfSup, SupOut, SupIn, NPairs.
Matrix grad_total_z(const Matrix& z, const BatchStructure& s, double tau,
                    LossVariant variant);
Matrix grad_total_z(const MultiviewBatch& b, double tau, LossVariant variant);

// Chains grad_total_z through the row-normalization Jacobian: gradient with
// respect to the pre-normalization rows of W. Every output row is orthogonal
// to the matching input row.
Matrix grad_total_w(const Matrix& w, const BatchStructure& s, double tau,
                    LossVariant variant);

// Central differences (f(x+h) - f(x-h)) / 2h per coordinate.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double h);

// Quad-precision variant for tight-tolerance checks. The probe points are
// ordinary doubles; the function values, their difference, and the division
// by the exactly representable step all stay in __float128, keeping the
// oracle's roundoff far below the 1e-6 gate even where the true gradient
// component is exactly zero (the error then meets the 1e-8 denominator
// floor, so the absolute error must be below 1e-14). GNU toolchain only.
Matrix finite_diff_grad_hp(const std::function<__float128(const Matrix&)>& f,
                           const Matrix& x, double h);

// The batch losses evaluated entirely in quad precision, for the FD oracle.
// An implementation independent of the double-precision path: unit tests pin
// the two together. normalize_first additionally row-normalizes the input
// (w-space checks).
__float128 loss_total_hp(const Matrix& m, const BatchStructure& s, double tau,
                         LossVariant variant, bool normalize_first);

struct GradientReport {
  Matrix analytical;
  Matrix numerical;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  double fd_step = 0.0;
};

// Relative error with denominator max(|a|, |b|, floor).
double max_rel_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

// Compares grad_total_z against central differences of the loss over z.
GradientReport check_gradient_z(const Matrix& z, const BatchStructure& s,
                                double tau, LossVariant variant,
                                double fd_step);
// Compares grad_total_w against central differences of w -> loss(normalize(w)).
GradientReport check_gradient_w(const Matrix& w, const BatchStructure& s,
                                double tau, LossVariant variant,
                                double fd_step);

// Gradient of xent_as_contrastive's direct path with respect to the logits:
// row i = (softmax(z_i/tau) - onehot(y_i)) / tau.
Matrix xent_grad_ce(const Matrix& logits, const std::vector<int>& labels,
                    double tau);
// Same quantity derived along the contrastive path: per-anchor gradient
// against the materialized one-hot candidates, single positive.
Matrix xent_grad_contrastive(const Matrix& logits,
                             const std::vector<int>& labels, double tau);

// Hard-mining diagnostics: per active pair, the tangent factor
// sqrt(1 - (z_i.z_x)^2) and the softmax weight |P_ix - X_ix| (positives) or
// P_ix (negatives). The anchor-role contribution of pair (i,x) to the
// pre-normalization gradient row i has norm tangent_norm * weight / (tau |w_i|).
struct PairHardness {
  std::size_t anchor = 0;
  std::size_t other = 0;
  bool positive = false;
  double tangent_norm = 0.0;
  double weight = 0.0;
};

struct HardnessReport {
  std::vector<PairHardness> pairs;
  const PairHardness& find(std::size_t anchor, std::size_t other) const;
};

HardnessReport hardness_report(const Matrix& z, const BatchStructure& s,
                               double tau, LossVariant variant);
HardnessReport hardness_report(const MultiviewBatch& b, double tau,
                               LossVariant variant);

}  // namespace supcon
