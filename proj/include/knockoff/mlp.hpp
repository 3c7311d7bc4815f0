#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "knockoff/io.hpp"
#include "knockoff/matrix.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

enum class Activation : std::uint32_t { relu = 0 };

// Fully connected net: layer_dims = [d_in, hidden..., n_out]. weights[l] maps
// layer l activations to layer l+1 pre-activations; the last layer feeds a
// softmax. A freshly constructed model is all-zero and predicts uniform.
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t n_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.data.size();
    for (const auto& b : biases) n += b.size();
    return n;
  }
};

inline MlpModel make_mlp(const std::vector<std::size_t>& layer_dims, Activation act = Activation::relu) {
  if (layer_dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw std::invalid_argument("make_mlp: zero layer dimension");
  MlpModel m;
  m.layer_dims = layer_dims;
  m.activation = act;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    m.weights.emplace_back(layer_dims[l + 1], layer_dims[l]);
    m.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  return m;
}

// Glorot-uniform weights, zero biases.
inline void glorot_init(MlpModel& m, Rng& rng) {
  for (auto& w : m.weights) {
    double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
  }
  for (auto& b : m.biases) std::fill(b.begin(), b.end(), 0.0);
}

// Max-subtracted softmax; output sums to 1 to machine precision.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

namespace detail {
inline void apply_activation(Activation act, std::vector<double>& v) {
  switch (act) {
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      return;
  }
  throw std::invalid_argument("unknown activation");
}
}  // namespace detail

// Per-layer intermediates kept for backprop.
struct ForwardTrace {
  std::vector<std::vector<double>> post_act;  // post_act[0] = input, then each hidden output
  std::vector<double> logits;
  std::vector<double> posterior;
};

inline ForwardTrace forward_trace(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
  ForwardTrace t;
  t.post_act.reserve(m.n_layers());
  t.post_act.emplace_back(x.begin(), x.end());
  std::vector<double> cur(t.post_act.back());
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    std::vector<double> next;
    matvec(m.weights[l], cur, next);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += m.biases[l][i];
    if (l + 1 < m.n_layers()) {
      detail::apply_activation(m.activation, next);
      t.post_act.push_back(next);
    } else {
      t.logits = next;
    }
    cur = std::move(next);
  }
  t.posterior = softmax(t.logits);
  return t;
}

inline std::vector<double> forward(const MlpModel& m, std::span<const double> x) {
  return forward_trace(m, x).posterior;
}

inline int argmax_index(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax_index: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;  // ties keep the smallest index
  return static_cast<int>(best);
}

// --- serialization ---------------------------------------------------------

inline void save_model(const MlpModel& m, const std::string& path) {
  auto out = io::open_out(path);
  out.write("KNMD", 4);
  io::write_pod<std::uint32_t>(out, 1);  // format version
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.activation));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer_dims.size()));
  for (std::size_t d : m.layer_dims) io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    io::write_doubles(out, m.weights[l].data);
    io::write_doubles(out, m.biases[l]);
  }
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}

inline MlpModel load_model(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, "KNMD", path);
  auto version = io::read_pod<std::uint32_t>(in, path);
  if (version != 1) throw IoError(path + ": unsupported model format version " + std::to_string(version));
  auto act = io::read_pod<std::uint32_t>(in, path);
  if (act != 0) throw IoError(path + ": unknown activation id " + std::to_string(act));
  auto n_dims = io::read_pod<std::uint32_t>(in, path);
  if (n_dims < 2) throw IoError(path + ": bad layer count");
  std::vector<std::size_t> dims(n_dims);
  for (auto& d : dims) {
    d = io::read_pod<std::uint32_t>(in, path);
    if (d == 0) throw IoError(path + ": zero layer dimension");
  }
  MlpModel m = make_mlp(dims, static_cast<Activation>(act));
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    io::read_doubles(in, m.weights[l].data, m.layer_dims[l + 1] * m.layer_dims[l], path);
    io::read_doubles(in, m.biases[l], m.layer_dims[l + 1], path);
  }
  return m;
}

}  // namespace knockoff
