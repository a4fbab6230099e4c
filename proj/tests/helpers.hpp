#pragma once

// Test-only oracles. Deliberately independent of the library internals:
// direct exp/log sums with no max shift, plain double loops, so a bug in
// the production log-sum-exp path cannot hide in both sides.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"
#include "supcon/model.hpp"
#include "supcon/rng.hpp"

namespace testutil {

inline supcon::Matrix random_rows(supcon::Rng& rng, std::size_t n,
                                  std::size_t d) {
  supcon::Matrix w(n, d);
  for (double& v : w.data) v = rng.normal();
  return w;
}

inline supcon::Matrix random_unit_rows(supcon::Rng& rng, std::size_t n,
                                       std::size_t d) {
  return supcon::normalize_rows(random_rows(rng, n, d)).matrix();
}

inline double naive_denominator(const supcon::Matrix& z,
                                const supcon::BatchStructure& s, std::size_t i,
                                double tau) {
  double denom = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a)
    if (s.active_mask.at(i, a))
      denom += std::exp(supcon::dot(z.row(i), z.row(a)) / tau);
  return denom;
}

inline double naive_loss_self(const supcon::Matrix& z,
                              const supcon::BatchStructure& s, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t j = s.view_pair[i];
    if (!s.positive_mask.at(i, j)) continue;
    const double num = std::exp(supcon::dot(z.row(i), z.row(j)) / tau);
    total += -std::log(num / naive_denominator(z, s, i, tau));
  }
  return total;
}

inline double naive_loss_sup_out(const supcon::Matrix& z,
                                 const supcon::BatchStructure& s, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto pos = s.positives(i);
    if (pos.empty()) continue;
    const double denom = naive_denominator(z, s, i, tau);
    double acc = 0.0;
    for (std::size_t p : pos)
      acc += std::log(std::exp(supcon::dot(z.row(i), z.row(p)) / tau) / denom);
    total += -acc / static_cast<double>(pos.size());
  }
  return total;
}

inline double naive_loss_sup_in(const supcon::Matrix& z,
                                const supcon::BatchStructure& s, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto pos = s.positives(i);
    if (pos.empty()) continue;
    double num = 0.0;
    for (std::size_t p : pos)
      num += std::exp(supcon::dot(z.row(i), z.row(p)) / tau);
    num /= static_cast<double>(pos.size());
    total += -std::log(num / naive_denominator(z, s, i, tau));
  }
  return total;
}

// Lowest-index row with the anchor's label that is neither the anchor nor
// its view pair; throws when none exists.
inline std::size_t naive_cross_positive(const supcon::BatchStructure& s,
                                        std::size_t i) {
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j == i || j == s.view_pair[i]) continue;
    if (s.labels[j] == s.labels[i]) return j;
  }
  throw std::runtime_error("no cross positive");
}

inline double naive_loss_npairs(const supcon::Matrix& z,
                                const supcon::BatchStructure& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t k = naive_cross_positive(s, i);
    const double num = std::exp(supcon::dot(z.row(i), z.row(k)));
    total += -std::log(num / naive_denominator(z, s, i, 1.0));
  }
  return total;
}

// Central-difference gradient over one flat parameter vector of a model,
// recomputing `loss` per probe. Returns max relative error against `grads`
// with denominator max(|a|, |b|, floor).
inline double fd_param_rel_err(std::vector<double>& params,
                               const std::vector<double>& grads,
                               const std::function<double()>& loss, double h,
                               double floor) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = loss();
    params[k] = saved - h;
    const double down = loss();
    params[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom =
        std::max({std::fabs(fd), std::fabs(grads[k]), floor});
    worst = std::max(worst, std::fabs(fd - grads[k]) / denom);
  }
  return worst;
}

// Applies fd_param_rel_err to every encoder and projection parameter block.
inline double fd_model_rel_err(supcon::EncoderModel& m,
                               const supcon::ModelGrads& grads,
                               const std::function<double()>& loss, double h,
                               double floor) {
  double worst = 0.0;
  for (std::size_t l = 0; l < m.encoder.size(); ++l) {
    worst = std::max(worst, fd_param_rel_err(m.encoder[l].w.data,
                                             grads.encoder[l].w.data, loss, h,
                                             floor));
    worst = std::max(worst, fd_param_rel_err(m.encoder[l].b,
                                             grads.encoder[l].b, loss, h,
                                             floor));
  }
  for (std::size_t l = 0; l < m.projection.size(); ++l) {
    worst = std::max(worst, fd_param_rel_err(m.projection[l].w.data,
                                             grads.projection[l].w.data, loss,
                                             h, floor));
    worst = std::max(worst, fd_param_rel_err(m.projection[l].b,
                                             grads.projection[l].b, loss, h,
                                             floor));
  }
  return worst;
}

inline double max_abs_diff(const supcon::Matrix& a, const supcon::Matrix& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k)
    worst = std::max(worst, std::fabs(a.data[k] - b.data[k]));
  return worst;
}

}  // namespace testutil
