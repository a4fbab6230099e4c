#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"
#include "supcon/rng.hpp"

namespace supcon {

// Labeled samples with a fixed stratified train/held-out split. Labels are
// dense ids 0..C-1. The split takes, per class in ascending row order, the
// first max(2, 4n/5) samples as training data.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> heldout_idx;

  std::size_t size() const { return x.rows; }
  std::size_t dim() const { return x.cols; }
  int num_classes() const;
};

// Two random views of a sample differ by scale jitter, additive Gaussian
// noise, and coordinate masking, applied in that order. Every call consumes
// the same number of generator draws regardless of parameter values.
struct AugmentSpec {
  double scale_jitter = 0.0;  // multiply by uniform[1-j, 1+j]
  double noise_sigma = 0.0;   // additive isotropic Gaussian
  double mask_prob = 0.0;     // zero each coordinate independently
};

// Gaussian class blobs: centers drawn uniformly on the radius-`separation`
// sphere, samples = center + spread * standard normal. Rows are grouped by
// class; deterministic under seed.
Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                   double separation, double spread, std::uint64_t seed);

std::vector<double> augment(std::span<const double> x, const AugmentSpec& spec,
                            Rng& rng);

enum class LabelMode { kWithLabels, kWithoutLabels };

// Raw inputs for a forward pass plus the index structure of the batch.
struct BatchInputs {
  Matrix x;  // 2N augmented rows; rows 2k and 2k+1 are views of source k
  BatchStructure structure;
};

// Two augmented views per selected sample. kWithLabels marks every same-label
// pair positive and requires at least two sources; kWithoutLabels keeps only
// the view pair positive and allows a single source.
BatchInputs assemble_multiview_batch(const Dataset& ds,
                                     std::span<const std::size_t> indices,
                                     const AugmentSpec& spec, Rng& rng,
                                     LabelMode mode);

// Additive Gaussian noise with std severity * base_sigma. Severity 0 is the
// identity (clean evaluation); valid severities are 0..5.
std::vector<double> corrupt(std::span<const double> x, int severity,
                            double base_sigma, Rng& rng);

// Comma-separated floats, final column an integer label, no header, LF
// newlines. The stratified split is re-derived on load.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

}  // namespace supcon
