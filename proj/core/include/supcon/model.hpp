#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "supcon/embedding.hpp"
#include "supcon/rng.hpp"

namespace supcon {

enum class Activation { kIdentity, kSilu };

double silu(double x);
double silu_deriv(double x);

// Affine layer y = act(x W^T + b); w is out_dim x in_dim.
struct DenseLayer {
  Matrix w;
  std::vector<double> b;
  Activation act = Activation::kIdentity;

  std::size_t in_dim() const { return w.cols; }
  std::size_t out_dim() const { return w.rows; }
};

// Encoder stack producing the representation (unit-normalized rows r of
// width repr_dim) and projection stack producing the contrastive embedding
// (unit-normalized rows z of width proj_dim). The projection is kept only
// for contrastive training and ignored by every inference path.
struct EncoderModel {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> projection;

  std::size_t input_dim() const { return encoder.front().in_dim(); }
  std::size_t repr_dim() const { return encoder.back().out_dim(); }
  std::size_t proj_dim() const { return projection.back().out_dim(); }
  std::size_t parameter_count() const;
};

// Linear classifier over representations.
struct LinearProbe {
  Matrix w;  // classes x repr_dim
  std::vector<double> b;
  std::size_t parameter_count() const { return w.data.size() + b.size(); }
};

// Hidden layers use the gated activation; the last layer of each stack is
// affine. An empty hidden list gives a single affine map.
struct ModelConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> encoder_hidden = {64};
  std::size_t repr_dim = 32;
  std::vector<std::size_t> projection_hidden = {32};
  std::size_t proj_dim = 16;
};

// Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, drawn
// from the model-init stream of the seed in layer order.
EncoderModel init_model(const ModelConfig& cfg, std::uint64_t seed);
// Probe init draws from the provided stream directly (callers pick the role).
LinearProbe init_probe(std::size_t classes, std::size_t repr_dim, Rng rng);

// Everything the backward pass needs from one forward pass.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> encoder_pre;   // pre-activation per encoder layer
  std::vector<Matrix> encoder_post;  // activation output per encoder layer
  Matrix u;  // encoder output before normalization (= last encoder_post)
  Matrix r;  // unit-normalized representations
  std::vector<Matrix> projection_pre;
  std::vector<Matrix> projection_post;
  Matrix w;  // projection output before normalization
  Matrix z;  // unit-normalized projection embeddings
};

ForwardCache forward(const EncoderModel& m, const Matrix& x);
// Encoder part only: returns unit-normalized representations r.
Matrix forward_repr(const EncoderModel& m, const Matrix& x);

struct LayerGrads {
  Matrix w;
  std::vector<double> b;
};

struct ModelGrads {
  std::vector<LayerGrads> encoder;
  std::vector<LayerGrads> projection;
};

ModelGrads zero_grads(const EncoderModel& m);

// Backpropagates d(loss)/d(pre-normalization projection rows) — the output
// of grad_total_w — through both stacks and the representation
// normalization. Returns gradients for every parameter.
ModelGrads backward_contrastive(const EncoderModel& m,
                                const ForwardCache& cache,
                                const Matrix& grad_w);

// Backpropagates d(loss)/d(r) into the encoder only (projection grads zero).
ModelGrads backward_representation(const EncoderModel& m,
                                   const ForwardCache& cache,
                                   const Matrix& grad_r);

// v <- momentum * v + g;  p <- p - lr * v
void sgd_momentum_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum);
void sgd_momentum_step(EncoderModel& m, const ModelGrads& grads,
                       ModelGrads& velocity, double lr, double momentum);
void sgd_momentum_step(LinearProbe& p, const LayerGrads& grads,
                       LayerGrads& velocity, double lr, double momentum);

// Versioned binary checkpoint: magic, version, layer descriptors, then raw
// little-endian 64-bit float parameter blocks in layer order (weights
// row-major, then bias, encoder stack first). Layout documented in README.
void save_checkpoint(const EncoderModel& m, const std::string& path);
EncoderModel load_checkpoint(const std::string& path);

}  // namespace supcon
