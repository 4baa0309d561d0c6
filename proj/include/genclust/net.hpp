#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "genclust/array.hpp"
#include "genclust/error.hpp"
#include "genclust/rng.hpp"
#include "genclust/tape.hpp"

namespace genclust {

enum class OutputActivation : std::uint8_t { None = 0, Softmax = 1 };

// Fully-connected stack description: layer_widths lists every layer width
// including input and output, hidden layers use relu.
struct MlpSpec {
  std::vector<int> layer_widths;
  OutputActivation output_activation = OutputActivation::None;

  void validate() const {
    if (layer_widths.size() < 2) throw ValueError("MlpSpec: need at least 2 layers");
    for (const int w : layer_widths) {
      if (w < 1) throw ValueError("MlpSpec: all widths must be >= 1");
    }
  }

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }

  static MlpSpec make(std::vector<int> widths, OutputActivation act) {
    MlpSpec s{std::move(widths), act};
    s.validate();
    return s;
  }
};

template <class T>
struct Mlp {
  MlpSpec spec;
  std::vector<Array<T>> weights;  // one (fan_in x fan_out) per layer
  std::vector<Array<T>> biases;   // one (1 x fan_out) per layer

  std::vector<Array<T>*> param_ptrs() {
    std::vector<Array<T>*> out;
    out.reserve(weights.size() * 2);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
    return out;
  }

  std::vector<Array<T>> params_copy() const {
    std::vector<Array<T>> out;
    out.reserve(weights.size() * 2);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(weights[i]);
      out.push_back(biases[i]);
    }
    return out;
  }

  template <class U>
  Mlp<U> cast() const {
    Mlp<U> out;
    out.spec = spec;
    for (const auto& w : weights) out.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<U>());
    return out;
  }
};

// Weights uniform on +/- sqrt(6 / (fan_in + fan_out)), biases zero.
template <class T>
Mlp<T> init_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp<T> net;
  net.spec = spec;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const std::size_t fan_in = static_cast<std::size_t>(spec.layer_widths[l]);
    const std::size_t fan_out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Array<T> w(fan_in, fan_out);
    for (T& v : w.data) v = static_cast<T>((2.0 * rng.uniform01() - 1.0) * limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Array<T>::zeros(1, fan_out));
  }
  return net;
}

namespace detail {
template <class T>
void check_input_width(const MlpSpec& spec, std::size_t got, const char* what) {
  if (got != static_cast<std::size_t>(spec.input_width())) {
    throw ShapeError(std::string(what) + ": input width " + std::to_string(got) +
                     " does not match network input " +
                     std::to_string(spec.input_width()));
  }
}
}  // namespace detail

// Plain forward pass, no recording. Batch-leading layout: x is (n x in).
template <class T>
Array<T> forward(const Mlp<T>& net, const Array<T>& x) {
  detail::check_input_width<T>(net.spec, x.cols(), "forward");
  using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  EMat h = Eigen::Map<const EMat>(x.data.data(), static_cast<Eigen::Index>(x.rows()),
                                  static_cast<Eigen::Index>(x.cols()));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Array<T>& w = net.weights[l];
    const Array<T>& b = net.biases[l];
    Eigen::Map<const EMat> wm(w.data.data(), static_cast<Eigen::Index>(w.rows()),
                              static_cast<Eigen::Index>(w.cols()));
    Eigen::Map<const EMat> bm(b.data.data(), 1, static_cast<Eigen::Index>(b.cols()));
    EMat z = (h * wm).rowwise() + bm.row(0);
    if (l + 1 < net.weights.size()) {
      h = z.cwiseMax(T(0));
    } else {
      h = std::move(z);
    }
  }
  if (net.spec.output_activation == OutputActivation::Softmax) {
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      const T m = h.row(r).maxCoeff();
      h.row(r) = (h.row(r).array() - m).exp();
      h.row(r) /= h.row(r).sum();
    }
  }
  Array<T> out(static_cast<std::size_t>(h.rows()), static_cast<std::size_t>(h.cols()));
  Eigen::Map<EMat>(out.data.data(), h.rows(), h.cols()) = h;
  return out;
}

// A network's parameters registered on a tape, either as differentiable
// leaves (roots = the arrays we later ask gradients for) or as constants.
template <class T>
struct BoundMlp {
  const MlpSpec* spec = nullptr;
  std::vector<ValueId> weights;
  std::vector<ValueId> biases;

  std::vector<ValueId> param_ids() const {
    std::vector<ValueId> out;
    out.reserve(weights.size() * 2);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(weights[i]);
      out.push_back(biases[i]);
    }
    return out;
  }
};

template <class T>
BoundMlp<T> bind(Tape<T>& tape, const Mlp<T>& net) {
  BoundMlp<T> bound;
  bound.spec = &net.spec;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    bound.weights.push_back(tape.constant(net.weights[l]));
    bound.biases.push_back(tape.constant(net.biases[l]));
  }
  return bound;
}

// Recorded forward pass through a bound network.
template <class T>
ValueId forward(Tape<T>& tape, const BoundMlp<T>& net, ValueId x) {
  detail::check_input_width<T>(*net.spec, tape.value(x).cols(), "forward");
  ValueId h = x;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    ValueId z = tape.add_bias(tape.matmul(h, net.weights[l]), net.biases[l]);
    h = (l + 1 < net.weights.size()) ? tape.relu(z) : z;
  }
  if (net.spec->output_activation == OutputActivation::Softmax) {
    h = tape.softmax_rows(h);
  }
  return h;
}

// --- cluster codes ---------------------------------------------------------

// One-hot coding of a 1-based cluster id.
struct ClusterCode {
  int id = 1;
  int k = 1;
};

template <class T>
Array<T> one_hot(int id, int k) {
  if (k < 1) throw ValueError("one_hot: k must be >= 1");
  if (id < 1 || id > k) {
    throw ValueError("one_hot: id " + std::to_string(id) + " outside [1, " +
                     std::to_string(k) + "]");
  }
  Array<T> v(1, static_cast<std::size_t>(k));
  v.data[static_cast<std::size_t>(id - 1)] = T(1);
  return v;
}

template <class T>
Array<T> one_hot_batch(const std::vector<int>& ids, int k) {
  Array<T> m(ids.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 1 || ids[i] > k) {
      throw ValueError("one_hot: id " + std::to_string(ids[i]) + " outside [1, " +
                       std::to_string(k) + "]");
    }
    m.at(i, static_cast<std::size_t>(ids[i] - 1)) = T(1);
  }
  return m;
}

// Argmax cluster id per row, 1-based; ties resolve to the lowest index.
template <class T>
std::vector<int> argmax_ids(const Array<T>& probs) {
  std::vector<int> ids(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c) {
      if (probs.at(r, c) > probs.at(r, best)) best = c;
    }
    ids[r] = static_cast<int>(best) + 1;
  }
  return ids;
}

}  // namespace genclust
