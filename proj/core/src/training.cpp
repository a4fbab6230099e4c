#include "supcon/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "supcon/errors.hpp"
#include "supcon/gradients.hpp"

namespace supcon {

namespace {

ModelConfig resolve_model_config(const TrainConfig& cfg, const Dataset& ds) {
  ModelConfig mc = cfg.model;
  if (mc.input_dim == 0) mc.input_dim = ds.dim();
  if (mc.input_dim != ds.dim())
    throw ConfigError("train: model input_dim does not match the dataset");
  return mc;
}

std::vector<std::size_t> epoch_order(const Dataset& ds, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order = ds.train_idx;
  Rng rng = Rng(seed).child(stream::kBatchOrder).child(epoch);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const std::size_t j = i + rng.uniform_index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  return order;
}

// Full batches of batch_n sources; a training set smaller than batch_n
// becomes one batch.
std::vector<std::span<const std::size_t>> partition_batches(
    std::span<const std::size_t> order, std::size_t batch_n) {
  std::vector<std::span<const std::size_t>> batches;
  if (order.size() < batch_n) {
    batches.push_back(order);
    return batches;
  }
  for (std::size_t start = 0; start + batch_n <= order.size();
       start += batch_n)
    batches.push_back(order.subspan(start, batch_n));
  return batches;
}

Matrix gather_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), ds.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = ds.x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& ds,
                               std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = ds.y[rows[i]];
  return out;
}

struct ProbeBackward {
  LayerGrads grads;
  Matrix g_r;  // d(loss)/d(representations)
};

ProbeBackward backward_probe(const LinearProbe& p, const Matrix& r,
                             const Matrix& g_logits) {
  ProbeBackward out;
  out.grads.w = Matrix(p.w.rows, p.w.cols);
  out.grads.b.assign(p.b.size(), 0.0);
  out.g_r = Matrix(r.rows, r.cols);
  for (std::size_t j = 0; j < p.w.rows; ++j) {
    double bacc = 0.0;
    for (std::size_t i = 0; i < g_logits.rows; ++i) bacc += g_logits.at(i, j);
    out.grads.b[j] = bacc;
    for (std::size_t k = 0; k < p.w.cols; ++k) {
      double wacc = 0.0;
      for (std::size_t i = 0; i < g_logits.rows; ++i)
        wacc += g_logits.at(i, j) * r.at(i, k);
      out.grads.w.at(j, k) = wacc;
    }
  }
  for (std::size_t i = 0; i < r.rows; ++i)
    for (std::size_t k = 0; k < r.cols; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < p.w.rows; ++j)
        acc += g_logits.at(i, j) * p.w.at(j, k);
      out.g_r.at(i, k) = acc;
    }
  return out;
}

LayerGrads zero_probe_state(const LinearProbe& p) {
  return {Matrix(p.w.rows, p.w.cols), std::vector<double>(p.b.size(), 0.0)};
}

// Shared head-training loop over fixed representations.
ProbeRun fit_head(LinearProbe probe, const Matrix& r_train,
                  const std::vector<int>& y_train, const Matrix& r_eval,
                  const std::vector<int>& y_eval, const TrainConfig& cfg) {
  LayerGrads velocity = zero_probe_state(probe);
  for (std::size_t e = 0; e < cfg.probe_epochs; ++e) {
    const Matrix logits = probe_logits(probe, r_train);
    Matrix g_logits;
    softmax_ce(logits, y_train, &g_logits);
    ProbeBackward pb = backward_probe(probe, r_train, g_logits);
    sgd_momentum_step(probe, pb.grads, velocity, cfg.probe_learning_rate,
                      cfg.momentum);
  }
  ProbeRun run;
  const EvalMetrics m = evaluate_logits(probe_logits(probe, r_eval), y_eval);
  run.top1 = m.top1;
  run.ece = m.ece;
  run.probe = std::move(probe);
  return run;
}

}  // namespace

ContrastiveRun train_contrastive(const TrainConfig& cfg, const Dataset& ds) {
  const LossSpec& spec = cfg.loss_spec;
  if (spec.variant == LossVariant::kTriplet ||
      spec.variant == LossVariant::kXentContrastive)
    throw ConfigError("train_contrastive: variant is not a batch loss");
  if (cfg.batch_n < 1) throw ConfigError("train_contrastive: batch_n < 1");
  if (spec.variant != LossVariant::kSelfSup && cfg.batch_n < 2)
    throw ConfigError("train_contrastive: labeled losses need batch_n >= 2");
  if (spec.tau <= 0) throw ConfigError("train_contrastive: tau must be > 0");

  const ModelConfig mc = resolve_model_config(cfg, ds);
  ContrastiveRun run;
  run.model = init_model(mc, cfg.seed);
  ModelGrads velocity = zero_grads(run.model);
  const LabelMode mode = spec.variant == LossVariant::kSelfSup
                             ? LabelMode::kWithoutLabels
                             : LabelMode::kWithLabels;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::vector<std::size_t> order = epoch_order(ds, cfg.seed, e);
    const auto batches = partition_batches(order, cfg.batch_n);
    double epoch_loss = 0.0;
    std::size_t epoch_anchors = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Rng aug_rng = Rng(cfg.seed).child(stream::kAugment).child(e).child(b);
      BatchInputs inputs =
          assemble_multiview_batch(ds, batches[b], cfg.augment, aug_rng, mode);
      if (spec.max_positives) {
        const std::uint64_t cap_seed =
            Rng(cfg.seed).child(stream::kCapping).child(e).child(b).key();
        inputs.structure =
            cap_positives(inputs.structure, *spec.max_positives, cap_seed);
      }
      const ForwardCache cache = forward(run.model, inputs.x);
      const LossOutput loss = compute_loss(cache.z, inputs.structure, spec);
      epoch_loss += loss.total;
      epoch_anchors +=
          inputs.structure.size() - loss.skipped_anchors.size();

      Matrix gw =
          grad_total_w(cache.w, inputs.structure, spec.tau, spec.variant);
      if (spec.rescale_by_tau)
        for (double& v : gw.data) v *= spec.tau;
      const ModelGrads grads = backward_contrastive(run.model, cache, gw);
      sgd_momentum_step(run.model, grads, velocity, cfg.learning_rate,
                        cfg.momentum);
    }
    run.loss_trajectory.push_back(
        epoch_anchors == 0 ? 0.0
                           : epoch_loss / static_cast<double>(epoch_anchors));
  }
  return run;
}

ProbeRun train_linear_probe(const EncoderModel& m, const Dataset& ds,
                            const TrainConfig& cfg) {
  if (ds.heldout_idx.empty())
    throw ConfigError("train_linear_probe: empty held-out split");
  const Matrix r_train = forward_repr(m, gather_rows(ds, ds.train_idx));
  const Matrix r_eval = forward_repr(m, gather_rows(ds, ds.heldout_idx));
  LinearProbe probe =
      init_probe(static_cast<std::size_t>(ds.num_classes()), m.repr_dim(),
                 Rng(cfg.seed).child(stream::kHeadInit));
  return fit_head(std::move(probe), r_train, gather_labels(ds, ds.train_idx),
                  r_eval, gather_labels(ds, ds.heldout_idx), cfg);
}

XentRun train_xent_baseline(const TrainConfig& cfg, const Dataset& ds) {
  if (cfg.batch_n < 1) throw ConfigError("train_xent_baseline: batch_n < 1");
  const ModelConfig mc = resolve_model_config(cfg, ds);
  XentRun run;
  run.model = init_model(mc, cfg.seed);
  run.head = init_probe(static_cast<std::size_t>(ds.num_classes()),
                        run.model.repr_dim(),
                        Rng(cfg.seed).child(stream::kHeadInit));
  ModelGrads velocity = zero_grads(run.model);
  LayerGrads head_velocity = zero_probe_state(run.head);

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::vector<std::size_t> order = epoch_order(ds, cfg.seed, e);
    const auto batches = partition_batches(order, cfg.batch_n);
    double epoch_ce = 0.0;
    std::size_t epoch_rows = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Rng aug_rng = Rng(cfg.seed).child(stream::kAugment).child(e).child(b);
      // One augmented view per sample for the baseline.
      Matrix xb(batches[b].size(), ds.dim());
      std::vector<int> yb(batches[b].size());
      for (std::size_t i = 0; i < batches[b].size(); ++i) {
        const std::vector<double> v =
            augment(ds.x.row(batches[b][i]), cfg.augment, aug_rng);
        std::copy(v.begin(), v.end(), xb.row(i).begin());
        yb[i] = ds.y[batches[b][i]];
      }
      const ForwardCache cache = forward(run.model, xb);
      const Matrix logits = probe_logits(run.head, cache.r);
      Matrix g_logits;
      const double ce = softmax_ce(logits, yb, &g_logits);
      epoch_ce += ce * static_cast<double>(yb.size());
      epoch_rows += yb.size();
      ProbeBackward pb = backward_probe(run.head, cache.r, g_logits);
      const ModelGrads grads =
          backward_representation(run.model, cache, pb.g_r);
      sgd_momentum_step(run.model, grads, velocity, cfg.learning_rate,
                        cfg.momentum);
      sgd_momentum_step(run.head, pb.grads, head_velocity, cfg.learning_rate,
                        cfg.momentum);
    }
    run.loss_trajectory.push_back(
        epoch_rows == 0 ? 0.0 : epoch_ce / static_cast<double>(epoch_rows));
  }
  const EvalMetrics m = evaluate(run.model, run.head, ds, ds.heldout_idx);
  run.top1 = m.top1;
  run.ece = m.ece;
  return run;
}

ProbeRun reinit_head_retrain(const EncoderModel& m, const Dataset& ds,
                             const TrainConfig& cfg) {
  if (ds.heldout_idx.empty())
    throw ConfigError("reinit_head_retrain: empty held-out split");
  const Matrix r_train = forward_repr(m, gather_rows(ds, ds.train_idx));
  const Matrix r_eval = forward_repr(m, gather_rows(ds, ds.heldout_idx));
  LinearProbe head =
      init_probe(static_cast<std::size_t>(ds.num_classes()), m.repr_dim(),
                 Rng(cfg.seed).child(stream::kHeadInit).child(1));
  return fit_head(std::move(head), r_train, gather_labels(ds, ds.train_idx),
                  r_eval, gather_labels(ds, ds.heldout_idx), cfg);
}

EvalMetrics evaluate_logits(const Matrix& logits,
                            const std::vector<int>& labels) {
  if (logits.rows == 0) throw ConfigError("evaluate_logits: no rows");
  if (labels.size() != logits.rows)
    throw ConfigError("evaluate_logits: label count mismatch");
  std::vector<double> confidence(logits.rows);
  std::vector<int> correct(logits.rows);
  std::size_t hits = 0;
  std::vector<double> prob(logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.cols; ++j)
      mx = std::max(mx, logits.at(i, j));
    double acc = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      prob[j] = std::exp(logits.at(i, j) - mx);
      acc += prob[j];
    }
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols; ++j)
      if (prob[j] > prob[arg]) arg = j;  // strict: ties keep the lowest index
    confidence[i] = prob[arg] / acc;
    correct[i] =
        (static_cast<std::size_t>(labels[i]) == arg) ? 1 : 0;
    hits += static_cast<std::size_t>(correct[i]);
  }
  EvalMetrics m;
  m.top1 = static_cast<double>(hits) / static_cast<double>(logits.rows);
  m.ece = expected_calibration_error(confidence, correct);
  return m;
}

EvalMetrics evaluate(const EncoderModel& m, const LinearProbe& probe,
                     const Dataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ConfigError("evaluate: empty row set");
  const Matrix r = forward_repr(m, gather_rows(ds, rows));
  return evaluate_logits(probe_logits(probe, r),
                         gather_labels(ds, rows));
}

EvalMetrics evaluate_corrupted(const EncoderModel& m, const LinearProbe& probe,
                               const Dataset& ds,
                               std::span<const std::size_t> rows, int severity,
                               double base_sigma, std::uint64_t seed) {
  if (rows.empty()) throw ConfigError("evaluate_corrupted: empty row set");
  const Rng base = Rng(seed).child(stream::kCorrupt).child(
      static_cast<std::uint64_t>(severity));
  Matrix x(rows.size(), ds.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Rng rng = base.child(rows[i]);
    const std::vector<double> v =
        corrupt(ds.x.row(rows[i]), severity, base_sigma, rng);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  const Matrix r = forward_repr(m, x);
  return evaluate_logits(probe_logits(probe, r), gather_labels(ds, rows));
}

double expected_calibration_error(const std::vector<double>& confidence,
                                  const std::vector<int>& correct,
                                  std::size_t bins) {
  if (confidence.size() != correct.size())
    throw ConfigError("expected_calibration_error: size mismatch");
  if (confidence.empty() || bins == 0) return 0.0;
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<double> acc_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    std::size_t b = static_cast<std::size_t>(confidence[i] *
                                             static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    conf_sum[b] += confidence[i];
    acc_sum[b] += correct[i];
    ++count[b];
  }
  double ece = 0.0;
  const double n = static_cast<double>(confidence.size());
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    ece += (nb / n) * std::abs(acc_sum[b] / nb - conf_sum[b] / nb);
  }
  return ece;
}

Matrix probe_logits(const LinearProbe& p, const Matrix& r) {
  if (r.cols != p.w.cols)
    throw ConfigError("probe_logits: representation width mismatch");
  Matrix out(r.rows, p.w.rows);
  for (std::size_t i = 0; i < r.rows; ++i)
    for (std::size_t j = 0; j < p.w.rows; ++j) {
      double acc = p.b[j];
      for (std::size_t k = 0; k < p.w.cols; ++k)
        acc += p.w.at(j, k) * r.at(i, k);
      out.at(i, j) = acc;
    }
  return out;
}

double softmax_ce(const Matrix& logits, const std::vector<int>& labels,
                  Matrix* grad) {
  if (labels.size() != logits.rows)
    throw ConfigError("softmax_ce: label count mismatch");
  if (logits.rows == 0) throw ConfigError("softmax_ce: no rows");
  const double n = static_cast<double>(logits.rows);
  if (grad) *grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  std::vector<double> prob(logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    if (y >= logits.cols) throw ConfigError("softmax_ce: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.cols; ++j)
      mx = std::max(mx, logits.at(i, j));
    double acc = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      prob[j] = std::exp(logits.at(i, j) - mx);
      acc += prob[j];
    }
    total += std::log(acc) - (logits.at(i, y) - mx);
    if (grad)
      for (std::size_t j = 0; j < logits.cols; ++j)
        grad->at(i, j) =
            (prob[j] / acc - ((j == y) ? 1.0 : 0.0)) / n;
  }
  return total / n;
}

}  // namespace supcon
