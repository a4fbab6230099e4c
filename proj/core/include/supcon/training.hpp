#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "supcon/data.hpp"
#include "supcon/losses.hpp"
#include "supcon/model.hpp"

namespace supcon {

struct TrainConfig {
  LossSpec loss_spec;            // variant, tau, positive cap, rescale flag
  std::size_t epochs = 100;
  std::size_t batch_n = 64;      // source samples per batch (2N rows)
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 42;
  std::size_t probe_epochs = 200;
  double probe_learning_rate = 0.5;
  AugmentSpec augment;
  ModelConfig model;             // input_dim 0 = take it from the dataset
};

struct ContrastiveRun {
  EncoderModel model;
  // Mean per-anchor loss per epoch (total over non-skipped anchors divided
  // by their count), after the tau rescale when configured.
  std::vector<double> loss_trajectory;
};

// Stage 1: multiview batches, forward, batch loss, analytical backward,
// momentum SGD. The projection head is trained and returned but unused by
// every downstream consumer.
ContrastiveRun train_contrastive(const TrainConfig& cfg, const Dataset& ds);

struct ProbeRun {
  LinearProbe probe;
  double top1 = 0.0;
  double ece = 0.0;
};

// Stage 2: full-batch softmax cross entropy over frozen representations;
// returns held-out metrics. Never mutates the encoder.
ProbeRun train_linear_probe(const EncoderModel& m, const Dataset& ds,
                            const TrainConfig& cfg);

struct XentRun {
  EncoderModel model;
  LinearProbe head;
  std::vector<double> loss_trajectory;  // mean per-sample CE per epoch
  double top1 = 0.0;
  double ece = 0.0;
};

// End-to-end cross-entropy baseline: encoder + linear head trained jointly,
// one augmented view per sample per epoch.
XentRun train_xent_baseline(const TrainConfig& cfg, const Dataset& ds);

// Freezes the trained encoder, re-initializes the head from the seeded
// stream, retrains it with cross entropy, returns held-out metrics.
ProbeRun reinit_head_retrain(const EncoderModel& m, const Dataset& ds,
                             const TrainConfig& cfg);

struct EvalMetrics {
  double top1 = 0.0;
  double ece = 0.0;
};

// Top-1 with lowest-index tie break; ECE over 15 equal-width bins of the
// max-softmax confidence.
EvalMetrics evaluate_logits(const Matrix& logits,
                            const std::vector<int>& labels);

// Frozen encoder + probe on the given dataset rows.
EvalMetrics evaluate(const EncoderModel& m, const LinearProbe& probe,
                     const Dataset& ds, std::span<const std::size_t> rows);

// Same, with every input corrupted at the given severity first.
EvalMetrics evaluate_corrupted(const EncoderModel& m, const LinearProbe& probe,
                               const Dataset& ds,
                               std::span<const std::size_t> rows, int severity,
                               double base_sigma, std::uint64_t seed);

// bins equal-width confidence bins over [0, 1]; bin = min(floor(conf*bins),
// bins-1); ECE = sum_b (n_b/n) |acc_b - conf_b|.
double expected_calibration_error(const std::vector<double>& confidence,
                                  const std::vector<int>& correct,
                                  std::size_t bins = 15);

Matrix probe_logits(const LinearProbe& p, const Matrix& r);

// Mean cross entropy over rows; when grad is non-null it receives
// d(mean CE)/d(logits).
double softmax_ce(const Matrix& logits, const std::vector<int>& labels,
                  Matrix* grad);

}  // namespace supcon
