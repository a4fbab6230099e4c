#include "supcon/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "supcon/errors.hpp"

namespace supcon {

double silu(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return x * s;
}

double silu_deriv(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

namespace {

double activate(Activation a, double x) {
  return a == Activation::kSilu ? silu(x) : x;
}

double activate_deriv(Activation a, double x) {
  return a == Activation::kSilu ? silu_deriv(x) : 1.0;
}

Matrix affine_forward(const DenseLayer& layer, const Matrix& in) {
  Matrix out(in.rows, layer.out_dim());
  for (std::size_t i = 0; i < in.rows; ++i)
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      double acc = layer.b[j];
      for (std::size_t k = 0; k < layer.in_dim(); ++k)
        acc += layer.w.at(j, k) * in.at(i, k);
      out.at(i, j) = acc;
    }
  return out;
}

Matrix apply_activation(Activation a, const Matrix& pre) {
  Matrix out(pre.rows, pre.cols);
  for (std::size_t idx = 0; idx < pre.data.size(); ++idx)
    out.data[idx] = activate(a, pre.data[idx]);
  return out;
}

void run_stack(const std::vector<DenseLayer>& stack, const Matrix& in,
               std::vector<Matrix>& pre_out, std::vector<Matrix>& post_out) {
  const Matrix* cur = &in;
  for (const DenseLayer& layer : stack) {
    pre_out.push_back(affine_forward(layer, *cur));
    post_out.push_back(apply_activation(layer.act, pre_out.back()));
    cur = &post_out.back();
  }
}

// Backprop through one stack: g is d(loss)/d(stack output). Returns
// d(loss)/d(stack input); fills grads per layer.
Matrix backward_stack(const std::vector<DenseLayer>& stack,
                      const Matrix& input, const std::vector<Matrix>& pre,
                      const std::vector<Matrix>& post, Matrix g,
                      std::vector<LayerGrads>& grads) {
  for (std::size_t li = stack.size(); li-- > 0;) {
    const DenseLayer& layer = stack[li];
    const Matrix& in = (li == 0) ? input : post[li - 1];
    // d(loss)/d(pre-activation)
    Matrix gp(g.rows, g.cols);
    for (std::size_t idx = 0; idx < g.data.size(); ++idx)
      gp.data[idx] =
          g.data[idx] * activate_deriv(layer.act, pre[li].data[idx]);
    LayerGrads& lg = grads[li];
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      double bacc = 0.0;
      for (std::size_t i = 0; i < gp.rows; ++i) bacc += gp.at(i, j);
      lg.b[j] = bacc;
      for (std::size_t k = 0; k < layer.in_dim(); ++k) {
        double wacc = 0.0;
        for (std::size_t i = 0; i < gp.rows; ++i)
          wacc += gp.at(i, j) * in.at(i, k);
        lg.w.at(j, k) = wacc;
      }
    }
    Matrix gin(gp.rows, layer.in_dim());
    for (std::size_t i = 0; i < gp.rows; ++i)
      for (std::size_t k = 0; k < layer.in_dim(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < layer.out_dim(); ++j)
          acc += gp.at(i, j) * layer.w.at(j, k);
        gin.at(i, k) = acc;
      }
    g = std::move(gin);
  }
  return g;
}

// Chains d(loss)/d(normalized rows) to d(loss)/d(raw rows).
Matrix backward_normalize(const Matrix& raw, const Matrix& g_normed) {
  Matrix out(raw.rows, raw.cols);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    const std::vector<double> gi =
        normalization_jacobian_apply(raw.row(i), g_normed.row(i));
    for (std::size_t k = 0; k < raw.cols; ++k) out.at(i, k) = gi[k];
  }
  return out;
}

DenseLayer init_layer(std::size_t out_dim, std::size_t in_dim, Activation act,
                      Rng rng) {
  DenseLayer layer;
  layer.w = Matrix(out_dim, in_dim);
  layer.b.assign(out_dim, 0.0);
  layer.act = act;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  rng.fill_uniform(std::span<double>(layer.w.data), -bound, bound);
  return layer;
}

std::vector<DenseLayer> init_stack(std::size_t in_dim,
                                   const std::vector<std::size_t>& hidden,
                                   std::size_t out_dim, const Rng& base,
                                   std::uint64_t first_tag) {
  std::vector<DenseLayer> stack;
  std::size_t cur = in_dim;
  std::uint64_t tag = first_tag;
  for (std::size_t h : hidden) {
    stack.push_back(init_layer(h, cur, Activation::kSilu, base.child(tag++)));
    cur = h;
  }
  stack.push_back(
      init_layer(out_dim, cur, Activation::kIdentity, base.child(tag++)));
  return stack;
}

}  // namespace

std::size_t EncoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : encoder) n += l.w.data.size() + l.b.size();
  for (const auto& l : projection) n += l.w.data.size() + l.b.size();
  return n;
}

EncoderModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.input_dim == 0 || cfg.repr_dim == 0 || cfg.proj_dim == 0)
    throw ConfigError("init_model: zero dimension");
  const Rng base = Rng(seed).child(stream::kModelInit);
  EncoderModel m;
  m.encoder =
      init_stack(cfg.input_dim, cfg.encoder_hidden, cfg.repr_dim, base, 1);
  m.projection = init_stack(cfg.repr_dim, cfg.projection_hidden, cfg.proj_dim,
                            base, 100);
  return m;
}

LinearProbe init_probe(std::size_t classes, std::size_t repr_dim, Rng rng) {
  if (classes < 2) throw ConfigError("init_probe: need at least 2 classes");
  LinearProbe p;
  p.w = Matrix(classes, repr_dim);
  p.b.assign(classes, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(repr_dim));
  rng.fill_uniform(std::span<double>(p.w.data), -bound, bound);
  return p;
}

ForwardCache forward(const EncoderModel& m, const Matrix& x) {
  if (x.cols != m.input_dim())
    throw ConfigError("forward: input width does not match the model");
  ForwardCache c;
  c.input = x;
  run_stack(m.encoder, c.input, c.encoder_pre, c.encoder_post);
  c.u = c.encoder_post.back();
  c.r = normalize_rows(c.u).matrix();
  run_stack(m.projection, c.r, c.projection_pre, c.projection_post);
  c.w = c.projection_post.back();
  c.z = normalize_rows(c.w).matrix();
  return c;
}

Matrix forward_repr(const EncoderModel& m, const Matrix& x) {
  if (x.cols != m.input_dim())
    throw ConfigError("forward_repr: input width does not match the model");
  std::vector<Matrix> pre, post;
  run_stack(m.encoder, x, pre, post);
  return normalize_rows(post.back()).matrix();
}

ModelGrads zero_grads(const EncoderModel& m) {
  ModelGrads g;
  for (const auto& l : m.encoder)
    g.encoder.push_back(
        {Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim(), 0.0)});
  for (const auto& l : m.projection)
    g.projection.push_back(
        {Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim(), 0.0)});
  return g;
}

ModelGrads backward_contrastive(const EncoderModel& m,
                                const ForwardCache& cache,
                                const Matrix& grad_w) {
  ModelGrads grads = zero_grads(m);
  Matrix g_r = backward_stack(m.projection, cache.r, cache.projection_pre,
                              cache.projection_post, grad_w, grads.projection);
  const Matrix g_u = backward_normalize(cache.u, g_r);
  backward_stack(m.encoder, cache.input, cache.encoder_pre, cache.encoder_post,
                 g_u, grads.encoder);
  return grads;
}

ModelGrads backward_representation(const EncoderModel& m,
                                   const ForwardCache& cache,
                                   const Matrix& grad_r) {
  ModelGrads grads = zero_grads(m);
  const Matrix g_u = backward_normalize(cache.u, grad_r);
  backward_stack(m.encoder, cache.input, cache.encoder_pre, cache.encoder_post,
                 g_u, grads.encoder);
  return grads;
}

void sgd_momentum_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr,
                       double momentum) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

void sgd_momentum_step(EncoderModel& m, const ModelGrads& grads,
                       ModelGrads& velocity, double lr, double momentum) {
  for (std::size_t li = 0; li < m.encoder.size(); ++li) {
    sgd_momentum_step(m.encoder[li].w.data, grads.encoder[li].w.data,
                      velocity.encoder[li].w.data, lr, momentum);
    sgd_momentum_step(m.encoder[li].b, grads.encoder[li].b,
                      velocity.encoder[li].b, lr, momentum);
  }
  for (std::size_t li = 0; li < m.projection.size(); ++li) {
    sgd_momentum_step(m.projection[li].w.data, grads.projection[li].w.data,
                      velocity.projection[li].w.data, lr, momentum);
    sgd_momentum_step(m.projection[li].b, grads.projection[li].b,
                      velocity.projection[li].b, lr, momentum);
  }
}

void sgd_momentum_step(LinearProbe& p, const LayerGrads& grads,
                       LayerGrads& velocity, double lr, double momentum) {
  sgd_momentum_step(p.w.data, grads.w.data, velocity.w.data, lr, momentum);
  sgd_momentum_step(p.b, grads.b, velocity.b, lr, momentum);
}

namespace {

constexpr char kMagic[4] = {'S', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof v);
  __builtin_memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  __builtin_memcpy(&v, &bits, sizeof v);
  return v;
}

void put_stack_header(std::ofstream& out, const std::vector<DenseLayer>& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  for (const auto& l : s) {
    put_u32(out, static_cast<std::uint32_t>(l.out_dim()));
    put_u32(out, static_cast<std::uint32_t>(l.in_dim()));
    put_u32(out, l.act == Activation::kSilu ? 1 : 0);
  }
}

void put_stack_params(std::ofstream& out, const std::vector<DenseLayer>& s) {
  for (const auto& l : s) {
    for (double v : l.w.data) put_f64(out, v);
    for (double v : l.b) put_f64(out, v);
  }
}

std::vector<DenseLayer> get_stack(std::ifstream& in) {
  const std::uint32_t n_layers = get_u32(in);
  if (!in || n_layers > 64) throw Error("checkpoint: bad layer count");
  std::vector<DenseLayer> s(n_layers);
  for (auto& l : s) {
    const std::uint32_t out_dim = get_u32(in);
    const std::uint32_t in_dim = get_u32(in);
    const std::uint32_t act = get_u32(in);
    if (!in || out_dim == 0 || in_dim == 0 || act > 1)
      throw Error("checkpoint: bad layer descriptor");
    l.w = Matrix(out_dim, in_dim);
    l.b.assign(out_dim, 0.0);
    l.act = act == 1 ? Activation::kSilu : Activation::kIdentity;
  }
  return s;
}

void get_stack_params(std::ifstream& in, std::vector<DenseLayer>& s) {
  for (auto& l : s) {
    for (double& v : l.w.data) v = get_f64(in);
    for (double& v : l.b) v = get_f64(in);
  }
}

}  // namespace

void save_checkpoint(const EncoderModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_stack_header(out, m.encoder);
  put_stack_header(out, m.projection);
  put_stack_params(out, m.encoder);
  put_stack_params(out, m.projection);
  if (!out) throw Error("save_checkpoint: write failed for " + path);
}

EncoderModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("load_checkpoint: bad magic");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw Error("load_checkpoint: unknown version");
  EncoderModel m;
  m.encoder = get_stack(in);
  m.projection = get_stack(in);
  get_stack_params(in, m.encoder);
  get_stack_params(in, m.projection);
  if (!in) throw Error("load_checkpoint: truncated file");
  // layer dims must chain
  for (std::size_t li = 1; li < m.encoder.size(); ++li)
    if (m.encoder[li].in_dim() != m.encoder[li - 1].out_dim())
      throw Error("load_checkpoint: encoder dims do not chain");
  for (std::size_t li = 1; li < m.projection.size(); ++li)
    if (m.projection[li].in_dim() != m.projection[li - 1].out_dim())
      throw Error("load_checkpoint: projection dims do not chain");
  if (!m.encoder.empty() && !m.projection.empty() &&
      m.projection.front().in_dim() != m.encoder.back().out_dim())
    throw Error("load_checkpoint: projection input does not match encoder");
  return m;
}

}  // namespace supcon
