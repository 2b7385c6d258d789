#include "fedunlearn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>

namespace fedunlearn {
namespace {

constexpr std::size_t kEvalChunk = 256;

template <typename Real>
Real relu(Real v) {
  return v > Real(0) ? v : Real(0);
}

/// Per-layer geometry and parameter offsets for one architecture.
struct Plan {
  const ArchSpec& arch;
  std::vector<Shape> in_shapes;
  std::vector<Shape> out_shapes;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;

  explicit Plan(const ArchSpec& a) : arch(a), out_shapes(layer_shapes(a)) {
    Shape in = a.input;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      in_shapes.push_back(in);
      offsets.push_back(total);
      total += layer_param_count(a.layers[l], in);
      in = out_shapes[l];
    }
  }
};

template <typename Real>
class Network {
 public:
  Network(const ArchSpec& arch, std::span<const Real> weights) : plan_(arch), weights_(weights) {
    if (weights.size() != plan_.total) {
      throw std::invalid_argument("model: " + std::to_string(weights.size()) + " weights, architecture needs " +
                                  std::to_string(plan_.total));
    }
    acts_.resize(arch.layers.size());
    grads_.resize(arch.layers.size() + 1);
    for (std::size_t l = 0; l < arch.layers.size(); ++l) acts_[l].resize(plan_.out_shapes[l].size());
    grads_[0].resize(arch.input.size());
    for (std::size_t l = 0; l < arch.layers.size(); ++l) grads_[l + 1].resize(plan_.out_shapes[l].size());
    input_.resize(arch.input.size());
  }

  int classes() const { return plan_.out_shapes.back().channels; }

  void check(const Batch& batch) const {
    if (batch.shape != plan_.arch.input) {
      throw std::invalid_argument("batch shape " + std::to_string(batch.shape.height) + "x" +
                                  std::to_string(batch.shape.width) + "x" + std::to_string(batch.shape.channels) +
                                  " does not match model input");
    }
    batch.validate(classes());
  }

  /// Runs one example; returns the logits.
  std::span<const Real> forward_example(std::span<const float> image) {
    std::copy(image.begin(), image.end(), input_.begin());
    std::span<const Real> in(input_);
    for (std::size_t l = 0; l < plan_.arch.layers.size(); ++l) {
      auto& out = acts_[l];
      std::visit([&](const auto& layer) { forward_layer(layer, l, in, out); }, plan_.arch.layers[l]);
      for (Real v : out) {
        if (!std::isfinite(v)) {
          throw std::runtime_error("non-finite activation in layer " + std::to_string(l) + " (" +
                                   layer_name(plan_.arch.layers[l]) + ")");
        }
      }
      in = std::span<const Real>(out);
    }
    return in;
  }

  /// Backpropagates d(loss)/d(logits) for the last forwarded example into `grad`.
  void backward_example(std::span<const double> dlogits, std::span<double> grad) {
    const std::size_t last = plan_.arch.layers.size();
    std::copy(dlogits.begin(), dlogits.end(), grads_[last].begin());
    for (std::size_t l = last; l-- > 0;) {
      std::span<const Real> in = l == 0 ? std::span<const Real>(input_) : std::span<const Real>(acts_[l - 1]);
      const bool need_dx = l > 0;
      std::visit([&](const auto& layer) { backward_layer(layer, l, in, grad, need_dx); }, plan_.arch.layers[l]);
    }
  }

 private:
  std::span<const Real> params(std::size_t l, std::size_t count, std::size_t skip = 0) const {
    return weights_.subspan(plan_.offsets[l] + skip, count);
  }

  void forward_layer(const Dense& d, std::size_t l, std::span<const Real> x, std::vector<Real>& out) {
    const std::size_t n_in = x.size();
    const auto w = params(l, n_in * d.units);
    const auto b = params(l, d.units, n_in * d.units);
    for (int j = 0; j < d.units; ++j) {
      Real s = dot(w.data() + static_cast<std::size_t>(j) * n_in, x.data(), n_in) + b[j];
      out[j] = d.activation == Activation::relu ? relu(s) : s;
    }
  }

  void backward_layer(const Dense& d, std::size_t l, std::span<const Real> x, std::span<double> grad, bool need_dx) {
    const std::size_t n_in = x.size();
    auto& g = grads_[l + 1];
    const auto& out = acts_[l];
    if (d.activation == Activation::relu) {
      for (int j = 0; j < d.units; ++j) {
        if (!(out[j] > Real(0))) g[j] = 0;
      }
    }
    const auto w = params(l, n_in * d.units);
    double* gw = grad.data() + plan_.offsets[l];
    double* gb = gw + n_in * d.units;
    auto& dx = grads_[l];
    if (need_dx) std::fill(dx.begin(), dx.end(), Real(0));
    // Inputs are mostly zero (background pixels, inactive ReLUs); only non-zeros touch the weight gradient.
    nonzero_.clear();
    for (std::size_t i = 0; i < n_in; ++i) {
      if (x[i] != Real(0)) nonzero_.push_back(static_cast<std::uint32_t>(i));
    }
    for (int j = 0; j < d.units; ++j) {
      const Real gj = g[j];
      if (gj == Real(0)) continue;
      gb[j] += static_cast<double>(gj);
      double* grow = gw + static_cast<std::size_t>(j) * n_in;
      const double gjd = static_cast<double>(gj);
      for (std::uint32_t i : nonzero_) grow[i] += gjd * static_cast<double>(x[i]);
      if (need_dx) {
        const Real* row = w.data() + static_cast<std::size_t>(j) * n_in;
        for (std::size_t i = 0; i < n_in; ++i) dx[i] += row[i] * gj;
      }
    }
  }

  void forward_layer(const Conv2D& c, std::size_t l, std::span<const Real> x, std::vector<Real>& out) {
    const Shape in = plan_.in_shapes[l];
    const Shape os = plan_.out_shapes[l];
    const int pad_h = c.padding == Padding::same ? (c.kernel_h - 1) / 2 : 0;
    const int pad_w = c.padding == Padding::same ? (c.kernel_w - 1) / 2 : 0;
    const std::size_t per_out = static_cast<std::size_t>(c.kernel_h) * c.kernel_w * in.channels;
    const auto w = params(l, per_out * c.out_channels);
    const auto b = params(l, c.out_channels, per_out * c.out_channels);
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        Real* o = out.data() + (static_cast<std::size_t>(oy) * os.width + ox) * os.channels;
        for (int oc = 0; oc < os.channels; ++oc) o[oc] = b[oc];
        for (int ky = 0; ky < c.kernel_h; ++ky) {
          const int iy = oy + ky - pad_h;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < c.kernel_w; ++kx) {
            const int ix = ox + kx - pad_w;
            if (ix < 0 || ix >= in.width) continue;
            const Real* xp = x.data() + (static_cast<std::size_t>(iy) * in.width + ix) * in.channels;
            for (int oc = 0; oc < os.channels; ++oc) {
              const Real* wp = w.data() + oc * per_out + (static_cast<std::size_t>(ky) * c.kernel_w + kx) * in.channels;
              Real s = 0;
              for (int ic = 0; ic < in.channels; ++ic) s += wp[ic] * xp[ic];
              o[oc] += s;
            }
          }
        }
        if (c.activation == Activation::relu) {
          for (int oc = 0; oc < os.channels; ++oc) o[oc] = relu(o[oc]);
        }
      }
    }
  }

  void backward_layer(const Conv2D& c, std::size_t l, std::span<const Real> x, std::span<double> grad, bool need_dx) {
    const Shape in = plan_.in_shapes[l];
    const Shape os = plan_.out_shapes[l];
    const int pad_h = c.padding == Padding::same ? (c.kernel_h - 1) / 2 : 0;
    const int pad_w = c.padding == Padding::same ? (c.kernel_w - 1) / 2 : 0;
    const std::size_t per_out = static_cast<std::size_t>(c.kernel_h) * c.kernel_w * in.channels;
    const auto w = params(l, per_out * c.out_channels);
    double* gw = grad.data() + plan_.offsets[l];
    double* gb = gw + per_out * c.out_channels;
    auto& g = grads_[l + 1];
    const auto& out = acts_[l];
    if (c.activation == Activation::relu) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(out[k] > Real(0))) g[k] = 0;
      }
    }
    auto& dx = grads_[l];
    if (need_dx) std::fill(dx.begin(), dx.end(), Real(0));
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        const Real* go = g.data() + (static_cast<std::size_t>(oy) * os.width + ox) * os.channels;
        for (int oc = 0; oc < os.channels; ++oc) gb[oc] += static_cast<double>(go[oc]);
        for (int ky = 0; ky < c.kernel_h; ++ky) {
          const int iy = oy + ky - pad_h;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < c.kernel_w; ++kx) {
            const int ix = ox + kx - pad_w;
            if (ix < 0 || ix >= in.width) continue;
            const std::size_t xoff = (static_cast<std::size_t>(iy) * in.width + ix) * in.channels;
            const Real* xp = x.data() + xoff;
            const std::size_t koff = (static_cast<std::size_t>(ky) * c.kernel_w + kx) * in.channels;
            for (int oc = 0; oc < os.channels; ++oc) {
              const Real goc = go[oc];
              if (goc == Real(0)) continue;
              double* gwp = gw + oc * per_out + koff;
              const double gd = static_cast<double>(goc);
              for (int ic = 0; ic < in.channels; ++ic) gwp[ic] += gd * static_cast<double>(xp[ic]);
              if (need_dx) {
                const Real* wp = w.data() + oc * per_out + koff;
                Real* dxp = dx.data() + xoff;
                for (int ic = 0; ic < in.channels; ++ic) dxp[ic] += wp[ic] * goc;
              }
            }
          }
        }
      }
    }
  }

  void forward_layer(const MaxPool& p, std::size_t l, std::span<const Real> x, std::vector<Real>& out) {
    const Shape in = plan_.in_shapes[l];
    const Shape os = plan_.out_shapes[l];
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        for (int ch = 0; ch < os.channels; ++ch) {
          Real best = -std::numeric_limits<Real>::infinity();
          for (int dy = 0; dy < p.size; ++dy) {
            for (int dx = 0; dx < p.size; ++dx) {
              const std::size_t idx =
                  (static_cast<std::size_t>(oy * p.size + dy) * in.width + (ox * p.size + dx)) * in.channels + ch;
              best = std::max(best, x[idx]);
            }
          }
          out[(static_cast<std::size_t>(oy) * os.width + ox) * os.channels + ch] = best;
        }
      }
    }
  }

  void backward_layer(const MaxPool& p, std::size_t l, std::span<const Real> x, std::span<double>, bool need_dx) {
    if (!need_dx) return;
    const Shape in = plan_.in_shapes[l];
    const Shape os = plan_.out_shapes[l];
    const auto& g = grads_[l + 1];
    auto& dxv = grads_[l];
    std::fill(dxv.begin(), dxv.end(), Real(0));
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        for (int ch = 0; ch < os.channels; ++ch) {
          // Gradient flows to the first maximal element of the window.
          std::size_t arg = 0;
          Real best = -std::numeric_limits<Real>::infinity();
          for (int dy = 0; dy < p.size; ++dy) {
            for (int dx = 0; dx < p.size; ++dx) {
              const std::size_t idx =
                  (static_cast<std::size_t>(oy * p.size + dy) * in.width + (ox * p.size + dx)) * in.channels + ch;
              if (x[idx] > best) {
                best = x[idx];
                arg = idx;
              }
            }
          }
          dxv[arg] += g[(static_cast<std::size_t>(oy) * os.width + ox) * os.channels + ch];
        }
      }
    }
  }

  /// Dot product with eight independent partial sums so the compiler can vectorize it.
  static Real dot(const Real* a, const Real* b, std::size_t n) {
    Real acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
      for (int k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
    }
    Real s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
  }

  Plan plan_;
  std::span<const Real> weights_;
  std::vector<Real> input_;
  std::vector<std::vector<Real>> acts_;
  std::vector<std::vector<Real>> grads_;
  std::vector<std::uint32_t> nonzero_;
};

/// Softmax of `logits` in double with max subtraction; returns log-sum-exp.
template <typename Real>
double softmax(std::span<const Real> logits, std::span<double> probs) {
  double m = -std::numeric_limits<double>::infinity();
  for (Real z : logits) m = std::max(m, static_cast<double>(z));
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(static_cast<double>(logits[k]) - m);
    sum += probs[k];
  }
  for (auto& p : probs) p /= sum;
  return m + std::log(sum);
}

template <typename Real>
BasicProbabilities<Real> forward_impl(const ArchSpec& arch, std::span<const Real> weights, const Batch& batch) {
  Network<Real> net(arch, weights);
  net.check(batch);
  const auto k = static_cast<std::size_t>(net.classes());
  BasicProbabilities<Real> out{batch.size(), k, std::vector<Real>(batch.size() * k)};
  std::vector<double> probs(k);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    softmax(net.forward_example(batch.image(i)), std::span<double>(probs));
    for (std::size_t c = 0; c < k; ++c) out.values[i * k + c] = static_cast<Real>(probs[c]);
  }
  return out;
}

template <typename Real>
LossAndGrad loss_and_grad_impl(const ArchSpec& arch, std::span<const Real> weights, const Batch& batch,
                               bool with_grad) {
  if (batch.size() == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  Network<Real> net(arch, weights);
  net.check(batch);
  const auto k = static_cast<std::size_t>(net.classes());
  LossAndGrad result;
  if (with_grad) result.grad.assign(weights.size(), 0.0);
  std::vector<double> probs(k);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto logits = net.forward_example(batch.image(i));
    const double lse = softmax(logits, std::span<double>(probs));
    const int y = batch.labels[i];
    total += lse - static_cast<double>(logits[static_cast<std::size_t>(y)]);
    if (with_grad) {
      for (std::size_t c = 0; c < k; ++c) probs[c] = (probs[c] - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_n;
      net.backward_example(probs, result.grad);
    }
  }
  result.loss = total * inv_n;
  if (!std::isfinite(result.loss)) throw std::runtime_error("loss_and_grad: non-finite loss");
  // lse >= z_y, but rounding can leave tiny negatives.
  result.loss = std::max(result.loss, 0.0);
  return result;
}

}  // namespace

Probabilities forward(const ModelParams& model, const Batch& batch) {
  return forward_impl<float>(model.arch, model.weights, batch);
}

BasicProbabilities<double> forward(const ArchSpec& arch, std::span<const double> weights, const Batch& batch) {
  return forward_impl<double>(arch, weights, batch);
}

LossAndGrad loss_and_grad(const ModelParams& model, const Batch& batch) {
  return loss_and_grad_impl<float>(model.arch, model.weights, batch, true);
}

LossAndGrad loss_and_grad(const ArchSpec& arch, std::span<const double> weights, const Batch& batch) {
  return loss_and_grad_impl<double>(arch, weights, batch, true);
}

double batch_loss(const ArchSpec& arch, std::span<const double> weights, const Batch& batch) {
  return loss_and_grad_impl<double>(arch, weights, batch, false).loss;
}

std::vector<int> predict(const ModelParams& model, const Dataset& data) {
  Network<float> net(model.arch, model.weights);
  if (data.shape != model.arch.input) throw std::invalid_argument("predict: dataset shape does not match model input");
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto logits = net.forward_example(data.image(i));
    out.push_back(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
  return out;
}

double evaluate_accuracy(const ModelParams& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("evaluate_accuracy: empty dataset");
  const auto pred = predict(model, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double dataset_loss(const ModelParams& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  double total = 0.0;
  for (std::size_t first = 0; first < data.size(); first += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, data.size() - first);
    total += loss_and_grad_impl<float>(model.arch, model.weights, data.batch(first, count), false).loss *
             static_cast<double>(count);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace fedunlearn
