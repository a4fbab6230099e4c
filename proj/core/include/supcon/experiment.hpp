#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "supcon/training.hpp"

namespace supcon {

// Top-level run kinds exposed by the CLI. The four contrastive modes train
// stage 1 with the matching batch loss and then fit a linear head on the
// frozen encoder; kXent trains encoder+head jointly; kXentTwoStage
// additionally re-initializes and retrains the head on the frozen encoder.
enum class TrainingMode {
  kSelfSup,
  kSupOut,
  kSupIn,
  kNPairs,
  kXent,
  kXentTwoStage,
};

const char* training_mode_name(TrainingMode m);
TrainingMode parse_training_mode(const std::string& text);  // ConfigError

struct DatasetSpec {
  enum class Kind { kBlobs, kCsv };
  Kind kind = Kind::kBlobs;
  // blobs parameters
  std::size_t classes = 4;
  std::size_t per_class = 200;
  std::size_t dim = 10;
  double separation = 3.0;
  double spread = 0.3;
  std::uint64_t seed = 7;
  // csv parameter
  std::string csv_path;
};

// "blobs:c=4,n=200,d=10,s=3,sigma=0.3,seed=7" (any subset of keys, defaults
// fill the rest) or "csv:<path>". ConfigError on anything else.
DatasetSpec parse_dataset_spec(const std::string& text);
std::string dataset_spec_string(const DatasetSpec& spec);
Dataset build_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  TrainingMode mode = TrainingMode::kSupOut;
  DatasetSpec dataset;
  TrainConfig train;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<double> loss_trajectory;
  double top1 = 0.0;
  double ece = 0.0;
  // Filled by robustness runs only: held-out top-1 per requested severity.
  std::vector<double> severity_top1;
  // Measured, never serialized: output artifacts stay byte-identical across
  // identical invocations.
  double wall_time_seconds = 0.0;
};

struct ExperimentRun {
  ExperimentResult result;
  EncoderModel model;
  LinearProbe probe;
};

ExperimentRun run_experiment(const ExperimentConfig& cfg);

// UTF-8 JSON, two-space indent, trailing newline, fixed key order. Wall time
// is deliberately absent. parse_result round-trips everything serialized.
std::string serialize_result(const ExperimentResult& r);
ExperimentResult parse_result(const std::string& text);

// CSV tables, LF line endings, %.17g numeric fields.
// k = 0 means uncapped positives.
std::string sweep_positives_csv(const ExperimentConfig& base,
                                const std::vector<std::size_t>& k_list);
std::string sweep_temperature_csv(const ExperimentConfig& base,
                                  const std::vector<double>& tau_list);

// Trains the contrastive model from `base` plus the cross-entropy baseline
// with the same training settings, then evaluates both on corrupted held-out
// rows per severity. Header: severity,top1_supcon,top1_xent,ece_supcon,
// ece_xent.
std::string robustness_csv(const ExperimentConfig& base,
                           const std::vector<int>& severities,
                           double base_sigma);

}  // namespace supcon
