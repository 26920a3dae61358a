#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "home/error.hpp"
#include "home/matrix.hpp"
#include "home/rng.hpp"

namespace home {

enum class Activation : std::uint32_t { Relu = 0, Identity = 1 };

// y = act(x W^T + b), W is out x in.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation activation = Activation::Relu;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelShape {
  std::size_t input_dim = 32;
  std::vector<std::size_t> encoder_widths = {256, 128};
  std::size_t projector_width = 64;
};

// Encoder F followed by a three-layer projector G. Layers are stored in
// forward order; encoder_layers says where the representation is read.
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::vector<DenseLayer> layers, std::size_t encoder_layers)
      : layers_(std::move(layers)), encoder_layers_(encoder_layers) {
    if (layers_.empty() || encoder_layers_ == 0 || encoder_layers_ > layers_.size()) {
      throw ShapeError("model: bad layer split");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.out_dim()) throw ShapeError("model: bias size mismatch");
      if (i > 0 && l.in_dim() != layers_[i - 1].out_dim()) {
        throw ShapeError("model: layer " + std::to_string(i) + " does not chain");
      }
    }
  }

  // Weights uniform in +-1/sqrt(fan_in), biases zero. Encoder layers use
  // relu; projector is relu, relu, identity.
  static MlpModel create(const ModelShape& shape, std::uint64_t seed) {
    if (shape.encoder_widths.empty()) throw InvalidArgument("model: empty encoder");
    Rng rng = make_rng(seed, {0x1417ULL});
    std::vector<DenseLayer> layers;
    std::size_t in = shape.input_dim;
    auto add = [&](std::size_t out, Activation act) {
      DenseLayer l{Matrix(out, in), std::vector<double>(out, 0.0), act};
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (double& w : l.weight.flat()) w = (2.0 * uniform01(rng) - 1.0) * bound;
      layers.push_back(std::move(l));
      in = out;
    };
    for (std::size_t w : shape.encoder_widths) add(w, Activation::Relu);
    add(shape.projector_width, Activation::Relu);
    add(shape.projector_width, Activation::Relu);
    add(shape.projector_width, Activation::Identity);
    return MlpModel(std::move(layers), shape.encoder_widths.size());
  }

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t representation_dim() const { return layers_[encoder_layers_ - 1].out_dim(); }
  std::size_t embedding_dim() const { return layers_.back().out_dim(); }
  std::size_t encoder_layers() const { return encoder_layers_; }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() {
    ++generation_;
    return layers_;
  }

  // Bumped on every mutable access; forward caches remember it.
  std::uint64_t generation() const { return generation_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool parameters_equal(const MlpModel& other) const {
    return layers_ == other.layers_ && encoder_layers_ == other.encoder_layers_;
  }

 private:
  std::vector<DenseLayer> layers_;
  std::size_t encoder_layers_ = 0;
  std::uint64_t generation_ = 0;
};

struct ForwardCache {
  std::vector<Matrix> inputs;       // input of each layer
  std::vector<Matrix> activations;  // output of each layer
  std::uint64_t generation = 0;
  const MlpModel* model = nullptr;
};

struct ForwardResult {
  Matrix representations;
  Matrix embeddings;
  ForwardCache cache;
};

// Same layout as the model's parameters.
struct ModelGradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  static ModelGradients zeros_like(const MlpModel& model) {
    ModelGradients g;
    for (const auto& l : model.layers()) {
      g.weight.emplace_back(l.weight.rows(), l.weight.cols());
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
  }
};

namespace detail {

inline Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  Matrix y = matmul(x, layer.weight.transposed());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      double v = row[c] + layer.bias[c];
      if (layer.activation == Activation::Relu && v < 0.0) v = 0.0;
      row[c] = v;
    }
  }
  return y;
}

}  // namespace detail

inline ForwardResult forward(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(inputs.cols()) +
                     " features, model expects " + std::to_string(model.input_dim()));
  }
  ForwardResult out;
  out.cache.generation = model.generation();
  out.cache.model = &model;
  Matrix x = inputs;
  const auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix y = detail::dense_forward(layers[i], x);
    if (!y.all_finite()) {
      throw NonFiniteError("forward: non-finite activation in layer " + std::to_string(i));
    }
    out.cache.inputs.push_back(std::move(x));
    x = y;
    out.cache.activations.push_back(std::move(y));
  }
  out.representations = out.cache.activations[model.encoder_layers() - 1];
  out.embeddings = std::move(x);
  return out;
}

// Encoder output only; what a linear probe sees.
inline Matrix encode(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) throw ShapeError("encode: input width mismatch");
  Matrix x = inputs;
  for (std::size_t i = 0; i < model.encoder_layers(); ++i) {
    x = detail::dense_forward(model.layers()[i], x);
  }
  return x;
}

// Reverse pass from dL/d(embeddings). Adds into `grads`, so calling it once
// per view accumulates over views.
inline void backward(const MlpModel& model, const ForwardCache& cache,
                     const Matrix& grad_embeddings, ModelGradients& grads) {
  if (cache.model != &model || cache.generation != model.generation()) {
    throw InvalidArgument("backward: stale forward cache");
  }
  const auto& layers = model.layers();
  if (grads.weight.size() != layers.size()) throw ShapeError("backward: gradient layout");
  Matrix g = grad_embeddings;
  g.require_same_shape(cache.activations.back(), "backward");
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& layer = layers[i];
    if (layer.activation == Activation::Relu) {
      const auto& y = cache.activations[i];
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (y.flat()[k] <= 0.0) g.flat()[k] = 0.0;
      }
    }
    grads.weight[i] += matmul_tn(g, cache.inputs[i]);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto row = g.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) grads.bias[i][c] += row[c];
    }
    if (i > 0) g = matmul(g, layer.weight);
  }
}

// Checkpoint layout (little-endian):
//   "HOMECKPT" | u32 version=1 | u32 layer_count | u32 encoder_layers
//   per layer: u32 out | u32 in | u32 activation (0 relu, 1 identity)
//   per layer: out*in f64 weights (row-major), then out f64 biases
inline constexpr char kCheckpointMagic[8] = {'H', 'O', 'M', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw IoError("checkpoint: truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const MlpModel& model) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers().size()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.encoder_layers()));
  for (const auto& l : model.layers()) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : model.layers()) {
    for (double w : l.weight.flat()) detail::put<double>(out, w);
    for (double b : l.bias) detail::put<double>(out, b);
  }
  return out;
}

inline MlpModel deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  detail::ByteReader in(bytes);
  for (std::size_t i = 0; i < sizeof kCheckpointMagic; ++i) in.get<char>();
  if (in.get<std::uint32_t>() != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version");
  }
  const auto count = in.get<std::uint32_t>();
  const auto encoder = in.get<std::uint32_t>();
  if (count == 0 || count > 1024) throw IoError("checkpoint: implausible layer count");
  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    const auto out = in.get<std::uint32_t>();
    const auto inp = in.get<std::uint32_t>();
    const auto act = in.get<std::uint32_t>();
    if (act > 1) throw IoError("checkpoint: unknown activation");
    if (static_cast<std::uint64_t>(out) * inp > (1ULL << 28)) {
      throw IoError("checkpoint: implausible layer size");
    }
    l.weight = Matrix(out, inp);
    l.bias.assign(out, 0.0);
    l.activation = static_cast<Activation>(act);
  }
  for (auto& l : layers) {
    for (double& w : l.weight.flat()) w = in.get<double>();
    for (double& b : l.bias) b = in.get<double>();
  }
  if (!in.at_end()) throw IoError("checkpoint: trailing bytes");
  try {
    return MlpModel(std::move(layers), encoder);
  } catch (const ShapeError& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: '" + path + "'");
}

inline MlpModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace home
