#include "supcon/gradients.hpp"

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "supcon/errors.hpp"

namespace supcon {

namespace {

double effective_tau(double tau, LossVariant v) {
  return v == LossVariant::kNPairs ? 1.0 : tau;
}

// G_ix = P_ix - X_ix over active pairs, where X is the variant's positive
// reference weight (zero on negatives). Rows of anchors with empty positive
// sets are zero. The total loss gradient is (G Z + G^T Z) / tau.
Matrix loss_g_matrix(const Matrix& z, const BatchStructure& s, double tau,
                     LossVariant variant) {
  const std::size_t n = s.size();
  const SoftmaxWeights sw = softmax_weights(z, s, tau);
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (variant) {
      case LossVariant::kSelfSup:
        for (std::size_t x = 0; x < n; ++x)
          if (s.active_mask.at(i, x)) g.at(i, x) = sw.p.at(i, x);
        g.at(i, s.view_pair[i]) -= 1.0;
        break;
      case LossVariant::kNPairs: {
        const std::size_t k = npairs_cross_positive(s, i);
        for (std::size_t x = 0; x < n; ++x)
          if (s.active_mask.at(i, x)) g.at(i, x) = sw.p.at(i, x);
        g.at(i, k) -= 1.0;
        break;
      }
      case LossVariant::kSupOut: {
        if (s.positive_count(i) == 0) break;
        for (std::size_t x = 0; x < n; ++x) {
          if (!s.active_mask.at(i, x)) continue;
          g.at(i, x) = sw.p.at(i, x);
          if (s.positive_mask.at(i, x)) g.at(i, x) -= sw.x_out[i];
        }
        break;
      }
      case LossVariant::kSupIn: {
        if (s.positive_count(i) == 0) break;
        for (std::size_t x = 0; x < n; ++x) {
          if (!s.active_mask.at(i, x)) continue;
          g.at(i, x) = sw.p.at(i, x) - sw.x_in.at(i, x);
        }
        break;
      }
      default:
        throw ConfigError("gradients: unsupported loss variant");
    }
  }
  return g;
}

}  // namespace

SoftmaxWeights softmax_weights(const Matrix& z, const BatchStructure& s,
                               double tau) {
  const std::size_t n = s.size();
  SoftmaxWeights sw;
  sw.p = Matrix(n, n);
  sw.x_in = Matrix(n, n);
  sw.x_out.assign(n, 0.0);
  std::vector<double> sim(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = z.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < n; ++x) {
      if (!s.active_mask.at(i, x)) continue;
      sim[x] = dot(zi, z.row(x)) / tau;
      mx = std::max(mx, sim[x]);
    }
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      if (s.active_mask.at(i, x)) acc += std::exp(sim[x] - mx);
    for (std::size_t x = 0; x < n; ++x)
      if (s.active_mask.at(i, x)) sw.p.at(i, x) = std::exp(sim[x] - mx) / acc;

    const auto pos = s.positives(i);
    if (pos.empty()) continue;
    sw.x_out[i] = 1.0 / static_cast<double>(pos.size());
    double mxp = -std::numeric_limits<double>::infinity();
    for (std::size_t p : pos) mxp = std::max(mxp, sim[p]);
    double accp = 0.0;
    for (std::size_t p : pos) accp += std::exp(sim[p] - mxp);
    for (std::size_t p : pos) sw.x_in.at(i, p) = std::exp(sim[p] - mxp) / accp;
  }
  return sw;
}

SoftmaxWeights softmax_weights(const MultiviewBatch& b, double tau) {
  return softmax_weights(b.z.matrix(), b.structure, tau);
}

Matrix grad_anchor_z(const Matrix& z, const BatchStructure& s, double tau,
                     LossVariant variant) {
  if (variant != LossVariant::kSupOut && variant != LossVariant::kSupIn)
    throw ConfigError("grad_anchor_z: variant must be supout or supin");
  const std::size_t n = s.size();
  const std::size_t d = z.cols;
  const Matrix g = loss_g_matrix(z, s, tau, variant);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t x = 0; x < n; ++x) {
      const double gix = g.at(i, x);
      if (gix == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k)
        out.at(i, k) += gix * z.at(x, k) / tau;
    }
  return out;
}

Matrix grad_anchor_z(const MultiviewBatch& b, double tau, LossVariant variant) {
  return grad_anchor_z(b.z.matrix(), b.structure, tau, variant);
}

Matrix grad_total_z(const Matrix& z, const BatchStructure& s, double tau,
                    LossVariant variant) {
  const std::size_t n = s.size();
  const std::size_t d = z.cols;
  const double t = effective_tau(tau, variant);
  const Matrix g = loss_g_matrix(z, s, t, variant);
  Matrix out(n, d);
  // Row i collects the anchor role (G row i) and every appearance of z_i in
  // other anchors' terms (G column i), in one fixed-order pass.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t x = 0; x < n; ++x) {
      const double gix = g.at(i, x);
      if (gix == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        out.at(i, k) += gix * z.at(x, k) / t;
        out.at(x, k) += gix * z.at(i, k) / t;
      }
    }
  return out;
}

Matrix grad_total_z(const MultiviewBatch& b, double tau, LossVariant variant) {
  return grad_total_z(b.z.matrix(), b.structure, tau, variant);
}

Matrix grad_total_w(const Matrix& w, const BatchStructure& s, double tau,
                    LossVariant variant) {
  const UnitRows z = normalize_rows(w);
  const Matrix gz = grad_total_z(z.matrix(), s, tau, variant);
  Matrix out(w.rows, w.cols);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const std::vector<double> gi =
        normalization_jacobian_apply(w.row(i), gz.row(i));
    for (std::size_t k = 0; k < w.cols; ++k) out.at(i, k) = gi[k];
  }
  return out;
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double h) {
  Matrix probe = x;
  Matrix out(x.rows, x.cols);
  for (std::size_t idx = 0; idx < probe.data.size(); ++idx) {
    const double saved = probe.data[idx];
    probe.data[idx] = saved + h;
    const double fp = f(probe);
    probe.data[idx] = saved - h;
    const double fm = f(probe);
    probe.data[idx] = saved;
    out.data[idx] = (fp - fm) / (2.0 * h);
  }
  return out;
}

Matrix finite_diff_grad_hp(const std::function<__float128(const Matrix&)>& f,
                           const Matrix& x, double h) {
  Matrix probe = x;
  Matrix out(x.rows, x.cols);
  for (std::size_t idx = 0; idx < probe.data.size(); ++idx) {
    const double saved = probe.data[idx];
    const double xp = saved + h;
    const double xm = saved - h;
    probe.data[idx] = xp;
    const __float128 fp = f(probe);
    probe.data[idx] = xm;
    const __float128 fm = f(probe);
    probe.data[idx] = saved;
    // xp - xm is exact (Sterbenz); using it removes the step rounding error.
    out.data[idx] =
        static_cast<double>((fp - fm) / static_cast<__float128>(xp - xm));
  }
  return out;
}

__float128 loss_total_hp(const Matrix& m, const BatchStructure& s, double tau,
                         LossVariant variant, bool normalize_first) {
  const std::size_t n = s.size();
  const std::size_t d = m.cols;
  const __float128 t =
      (variant == LossVariant::kNPairs) ? __float128(1) : static_cast<__float128>(tau);

  std::vector<__float128> rows(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      rows[i * d + k] = static_cast<__float128>(m.at(i, k));
  if (normalize_first) {
    for (std::size_t i = 0; i < n; ++i) {
      __float128 acc = __float128(0);
      for (std::size_t k = 0; k < d; ++k)
        acc += rows[i * d + k] * rows[i * d + k];
      const __float128 len = sqrtq(acc);
      if (len < static_cast<__float128>(kNormEps)) throw DegenerateRowError(i);
      for (std::size_t k = 0; k < d; ++k) rows[i * d + k] /= len;
    }
  }

  const auto sim_of = [&](std::size_t i, std::size_t j) {
    __float128 acc = __float128(0);
    for (std::size_t k = 0; k < d; ++k)
      acc += rows[i * d + k] * rows[j * d + k];
    return acc / t;
  };

  __float128 total = __float128(0);
  std::vector<__float128> sim(n);
  for (std::size_t i = 0; i < n; ++i) {
    __float128 mx = -HUGE_VALQ;
    for (std::size_t x = 0; x < n; ++x) {
      if (!s.active_mask.at(i, x)) continue;
      sim[x] = sim_of(i, x);
      if (sim[x] > mx) mx = sim[x];
    }
    __float128 acc = __float128(0);
    for (std::size_t x = 0; x < n; ++x)
      if (s.active_mask.at(i, x)) acc += expq(sim[x] - mx);
    const __float128 lse = mx + logq(acc);

    switch (variant) {
      case LossVariant::kSelfSup:
        total += lse - sim[s.view_pair[i]];
        break;
      case LossVariant::kNPairs:
        total += lse - sim[npairs_cross_positive(s, i)];
        break;
      case LossVariant::kSupOut: {
        const auto pos = s.positives(i);
        if (pos.empty()) break;
        __float128 acc_pos = __float128(0);
        for (std::size_t p : pos) acc_pos += lse - sim[p];
        total += acc_pos / static_cast<__float128>(pos.size());
        break;
      }
      case LossVariant::kSupIn: {
        const auto pos = s.positives(i);
        if (pos.empty()) break;
        __float128 mxp = -HUGE_VALQ;
        for (std::size_t p : pos)
          if (sim[p] > mxp) mxp = sim[p];
        __float128 accp = __float128(0);
        for (std::size_t p : pos) accp += expq(sim[p] - mxp);
        total += logq(static_cast<__float128>(pos.size())) + lse -
                 (mxp + logq(accp));
        break;
      }
      default:
        throw ConfigError("loss_total_hp: unsupported loss variant");
    }
  }
  return total;
}

double max_rel_error(const Matrix& a, const Matrix& b, double floor) {
  if (!a.same_shape(b)) throw Error("max_rel_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t idx = 0; idx < a.data.size(); ++idx) {
    const double den =
        std::max({std::abs(a.data[idx]), std::abs(b.data[idx]), floor});
    worst = std::max(worst, std::abs(a.data[idx] - b.data[idx]) / den);
  }
  return worst;
}

namespace {

GradientReport make_report(Matrix analytical, Matrix numerical,
                           double fd_step) {
  GradientReport r;
  r.max_rel_err = max_rel_error(analytical, numerical);
  double worst_abs = 0.0;
  for (std::size_t idx = 0; idx < analytical.data.size(); ++idx)
    worst_abs = std::max(
        worst_abs, std::abs(analytical.data[idx] - numerical.data[idx]));
  r.max_abs_err = worst_abs;
  r.fd_step = fd_step;
  r.analytical = std::move(analytical);
  r.numerical = std::move(numerical);
  return r;
}

}  // namespace

GradientReport check_gradient_z(const Matrix& z, const BatchStructure& s,
                                double tau, LossVariant variant,
                                double fd_step) {
  Matrix analytical = grad_total_z(z, s, tau, variant);
  Matrix numerical = finite_diff_grad_hp(
      [&](const Matrix& m) {
        return loss_total_hp(m, s, tau, variant, false);
      },
      z, fd_step);
  return make_report(std::move(analytical), std::move(numerical), fd_step);
}

GradientReport check_gradient_w(const Matrix& w, const BatchStructure& s,
                                double tau, LossVariant variant,
                                double fd_step) {
  Matrix analytical = grad_total_w(w, s, tau, variant);
  Matrix numerical = finite_diff_grad_hp(
      [&](const Matrix& m) { return loss_total_hp(m, s, tau, variant, true); },
      w, fd_step);
  return make_report(std::move(analytical), std::move(numerical), fd_step);
}

Matrix xent_grad_ce(const Matrix& logits, const std::vector<int>& labels,
                    double tau) {
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  Matrix out(n, c);
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
    for (std::size_t j = 0; j < c; ++j) {
      const double soft = prob[j] / acc;
      const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
      out.at(i, j) = (soft - target) / tau;
    }
  }
  return out;
}

Matrix xent_grad_contrastive(const Matrix& logits,
                             const std::vector<int>& labels, double tau) {
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  Matrix onehot(c, c);
  for (std::size_t j = 0; j < c; ++j) onehot.at(j, j) = 1.0;
  Matrix out(n, c);
  std::vector<double> sim(c);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      sim[j] = dot(logits.row(i), onehot.row(j)) / tau;
      mx = std::max(mx, sim[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(sim[j] - mx);
    for (std::size_t j = 0; j < c; ++j) {
      const double pj = std::exp(sim[j] - mx) / acc;
      const double coeff =
          pj - ((static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0);
      // The candidate embeddings are the one-hot rows; accumulate through them.
      for (std::size_t k = 0; k < c; ++k)
        out.at(i, k) += coeff * onehot.at(j, k) / tau;
    }
  }
  return out;
}

const PairHardness& HardnessReport::find(std::size_t anchor,
                                         std::size_t other) const {
  for (const auto& ph : pairs)
    if (ph.anchor == anchor && ph.other == other) return ph;
  throw Error("hardness report: pair (" + std::to_string(anchor) + ", " +
              std::to_string(other) + ") not present");
}

HardnessReport hardness_report(const Matrix& z, const BatchStructure& s,
                               double tau, LossVariant variant) {
  const std::size_t n = s.size();
  const double t = effective_tau(tau, variant);
  const Matrix g = loss_g_matrix(z, s, t, variant);
  const SoftmaxWeights sw = softmax_weights(z, s, t);
  HardnessReport rep;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t x = 0; x < n; ++x) {
      if (!s.active_mask.at(i, x)) continue;
      PairHardness ph;
      ph.anchor = i;
      ph.other = x;
      ph.positive = s.positive_mask.at(i, x);
      const double sxy = dot(z.row(i), z.row(x));
      ph.tangent_norm = std::sqrt(std::max(0.0, 1.0 - sxy * sxy));
      // |P - X| on positives reduces to P on negatives where X = 0.
      ph.weight = ph.positive ? std::abs(g.at(i, x)) : sw.p.at(i, x);
      rep.pairs.push_back(ph);
    }
  }
  return rep;
}

HardnessReport hardness_report(const MultiviewBatch& b, double tau,
                               LossVariant variant) {
  return hardness_report(b.z.matrix(), b.structure, tau, variant);
}

}  // namespace supcon
