#include "neuronml/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neuronml {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kIdentity: return z;
  }
  return z;
}

// Derivative expressed through pre-activation z and activation value h,
// so tanh can reuse its forward result.
double activate_grad(Activation a, double z, double h) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: return 1.0 - h * h;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

void check_inputs(const Network& net, const Tensor& inputs) {
  if (net.layers.empty()) throw std::invalid_argument("network has no layers");
  if (inputs.rows() == 0) throw std::invalid_argument("forward: empty batch");
  if (inputs.cols() != net.input_dim())
    throw std::invalid_argument("forward: input width does not match network");
  require_finite(inputs, "forward inputs");
}

void check_mask(const Network& net, std::span<const double> mask, MaskGranularity g,
                const char* what) {
  if (mask.size() != net.mask_size(g))
    throw std::invalid_argument(std::string(what) + ": mask size does not match network");
  for (double v : mask)
    if (!std::isfinite(v)) throw std::domain_error(std::string(what) + ": non-finite mask");
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

Network Network::mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                     std::size_t output_dim, Activation hidden_act) {
  if (input_dim == 0 || output_dim == 0)
    throw std::invalid_argument("mlp: zero input or output width");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("mlp: zero-width hidden layer");
  Network net;
  std::size_t prev = input_dim;
  for (std::size_t h : hidden) {
    Layer layer;
    layer.in = prev;
    layer.out = h;
    layer.act = hidden_act;
    layer.weights.assign(h * prev, 0.0);
    layer.biases.assign(h, 0.0);
    net.layers.push_back(std::move(layer));
    prev = h;
  }
  Layer out;
  out.in = prev;
  out.out = output_dim;
  out.act = Activation::kIdentity;
  out.weights.assign(output_dim * prev, 0.0);
  out.biases.assign(output_dim, 0.0);
  net.layers.push_back(std::move(out));
  return net;
}

std::size_t Network::hidden_unit_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l].out;
  return n;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

std::size_t Network::mask_size(MaskGranularity g) const {
  return g == MaskGranularity::kPerUnit ? hidden_unit_count() : param_count();
}

void Network::init_params(std::mt19937_64& rng) {
  for (Layer& l : layers) {
    const double limit = std::sqrt(6.0 / double(l.in + l.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : l.weights) w = dist(rng);
    std::fill(l.biases.begin(), l.biases.end(), 0.0);
  }
}

std::vector<double> Network::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (const Layer& l : layers) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.biases.begin(), l.biases.end());
  }
  return flat;
}

void Network::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("unflatten: wrong parameter count");
  std::size_t pos = 0;
  for (Layer& l : layers) {
    std::copy_n(flat.begin() + pos, l.weights.size(), l.weights.begin());
    pos += l.weights.size();
    std::copy_n(flat.begin() + pos, l.biases.size(), l.biases.begin());
    pos += l.biases.size();
  }
}

GradBundle GradBundle::zeros_like(const Network& net, MaskGranularity g) {
  GradBundle b;
  for (const Layer& l : net.layers) {
    b.weight_grads.emplace_back(l.weights.size(), 0.0);
    b.bias_grads.emplace_back(l.biases.size(), 0.0);
  }
  b.mask_logit_grads.assign(net.mask_size(g), 0.0);
  return b;
}

void GradBundle::scale(double s) {
  for (auto& v : weight_grads)
    for (double& x : v) x *= s;
  for (auto& v : bias_grads)
    for (double& x : v) x *= s;
  for (double& x : mask_logit_grads) x *= s;
}

void GradBundle::axpy(double s, const GradBundle& other) {
  for (std::size_t l = 0; l < weight_grads.size(); ++l) {
    for (std::size_t i = 0; i < weight_grads[l].size(); ++i)
      weight_grads[l][i] += s * other.weight_grads[l][i];
    for (std::size_t i = 0; i < bias_grads[l].size(); ++i)
      bias_grads[l][i] += s * other.bias_grads[l][i];
  }
  for (std::size_t i = 0; i < mask_logit_grads.size(); ++i)
    mask_logit_grads[i] += s * other.mask_logit_grads[i];
}

bool GradBundle::finite() const {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  for (const auto& v : weight_grads)
    if (!ok(v)) return false;
  for (const auto& v : bias_grads)
    if (!ok(v)) return false;
  return ok(mask_logit_grads);
}

std::vector<double> sigmoid(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    // Branch keeps exp() argument non-positive in both tails.
    p[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  }
  return p;
}

namespace {

// Shared forward machinery.  Keeps per-layer pre-activations and
// activations around when the caller will backpropagate.
struct ForwardTrace {
  std::vector<Tensor> pre;   // pre[l]: batch x layers[l].out
  std::vector<Tensor> hact;  // activation before masking
  std::vector<Tensor> acts;  // acts[0] = inputs; acts[l+1] = layer l output after masking
};

// probs empty means "no mask" (plain forward).
ForwardTrace run_forward(const Network& net, std::span<const double> probs,
                         const Tensor& inputs, MaskGranularity g) {
  ForwardTrace t;
  const std::size_t n = inputs.rows();
  t.acts.resize(net.layers.size() + 1);
  t.pre.resize(net.layers.size());
  t.hact.resize(net.layers.size());
  t.acts[0] = inputs;

  const bool masked = !probs.empty();
  std::size_t unit_base = 0;   // per-unit: first mask index of this layer
  std::size_t param_base = 0;  // per-parameter: first mask index of this layer

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    const Tensor& prev = t.acts[l];
    Tensor z = Tensor::zeros(n, layer.out);
    const bool per_param = masked && g == MaskGranularity::kPerParameter;
    for (std::size_t i = 0; i < n; ++i) {
      const double* a = prev.row(i);
      double* zrow = z.row(i);
      for (std::size_t u = 0; u < layer.out; ++u) {
        const double* w = layer.weights.data() + u * layer.in;
        double acc = 0.0;
        if (per_param) {
          const double* pw = probs.data() + param_base + u * layer.in;
          for (std::size_t k = 0; k < layer.in; ++k) acc += pw[k] * w[k] * a[k];
          acc += probs[param_base + layer.weights.size() + u] * layer.biases[u];
        } else {
          for (std::size_t k = 0; k < layer.in; ++k) acc += w[k] * a[k];
          acc += layer.biases[u];
        }
        zrow[u] = acc;
      }
    }
    Tensor h = Tensor::zeros(n, layer.out);
    for (std::size_t i = 0; i < n * layer.out; ++i)
      h.values[i] = activate(layer.act, z.values[i]);

    const bool mask_units = masked && g == MaskGranularity::kPerUnit &&
                            l + 1 < net.layers.size();
    if (mask_units) {
      Tensor a = h;
      for (std::size_t i = 0; i < n; ++i) {
        double* row = a.row(i);
        for (std::size_t u = 0; u < layer.out; ++u) row[u] *= probs[unit_base + u];
      }
      t.acts[l + 1] = std::move(a);
    } else {
      t.acts[l + 1] = h;
    }
    t.pre[l] = std::move(z);
    t.hact[l] = std::move(h);
    if (l + 1 < net.layers.size()) unit_base += layer.out;
    param_base += layer.weights.size() + layer.biases.size();
  }
  return t;
}

// Loss value and d(loss)/d(output) for a batch of network outputs.
double output_loss(const Tensor& out, const Tensor& targets, LossKind kind,
                   Tensor* dout) {
  const std::size_t n = out.rows();
  if (targets.rows() != n)
    throw std::invalid_argument("loss: target rows do not match batch");
  if (dout) *dout = Tensor::zeros(n, out.cols());
  double loss = 0.0;
  if (kind == LossKind::kMse) {
    if (targets.cols() != out.cols())
      throw std::invalid_argument("loss: target width does not match outputs");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double diff = out.values[i] - targets.values[i];
      loss += diff * diff;
      if (dout) dout->values[i] = 2.0 * diff / double(n);
    }
    return loss / double(n);
  }
  // Softmax cross-entropy over the linear outputs; targets are class ids.
  if (targets.cols() != 1)
    throw std::invalid_argument("loss: class targets must be a single column");
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = targets.values[i];
    const auto cls = static_cast<std::ptrdiff_t>(std::llround(raw));
    if (std::abs(raw - double(cls)) > 1e-9 || cls < 0 ||
        cls >= std::ptrdiff_t(out.cols()))
      throw std::domain_error("loss: class index out of range");
    const double* row = out.row(i);
    double zmax = row[0];
    for (std::size_t k = 1; k < out.cols(); ++k) zmax = std::max(zmax, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < out.cols(); ++k) sum += std::exp(row[k] - zmax);
    const double logz = zmax + std::log(sum);
    loss += logz - row[std::size_t(cls)];
    if (dout) {
      double* drow = dout->row(i);
      for (std::size_t k = 0; k < out.cols(); ++k) {
        const double soft = std::exp(row[k] - logz);
        drow[k] = (soft - (std::ptrdiff_t(k) == cls ? 1.0 : 0.0)) / double(n);
      }
    }
  }
  return loss / double(n);
}

}  // namespace

Tensor forward(const Network& net, std::span<const double> mask_probs,
               const Tensor& inputs, MaskGranularity g) {
  check_inputs(net, inputs);
  check_mask(net, mask_probs, g, "forward");
  ForwardTrace t = run_forward(net, mask_probs, inputs, g);
  return std::move(t.acts.back());
}

Tensor forward(const Network& net, const Tensor& inputs) {
  check_inputs(net, inputs);
  ForwardTrace t = run_forward(net, {}, inputs, MaskGranularity::kPerUnit);
  return std::move(t.acts.back());
}

LossGrads loss_and_grads(const Network& net, std::span<const double> mask_logits,
                         const Tensor& inputs, const Tensor& targets, LossKind kind,
                         MaskGranularity g) {
  check_inputs(net, inputs);
  check_mask(net, mask_logits, g, "loss_and_grads");
  const std::vector<double> probs = sigmoid(mask_logits);
  ForwardTrace t = run_forward(net, probs, inputs, g);

  LossGrads result;
  result.grads = GradBundle::zeros_like(net, g);
  Tensor dact;
  result.loss = output_loss(t.acts.back(), targets, kind, &dact);

  const std::size_t n = inputs.rows();
  const std::size_t n_layers = net.layers.size();

  // Mask index bases per layer.
  std::vector<std::size_t> unit_base(n_layers, 0), param_base(n_layers, 0);
  {
    std::size_t ub = 0, pb = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      unit_base[l] = ub;
      param_base[l] = pb;
      if (l + 1 < n_layers) ub += net.layers[l].out;
      pb += net.layers[l].weights.size() + net.layers[l].biases.size();
    }
  }

  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = net.layers[li];
    const Tensor& prev = t.acts[li];
    const bool hidden = li + 1 < n_layers;
    const bool per_param = g == MaskGranularity::kPerParameter;

    // Through the unit mask: dact is d(loss)/d(masked output).
    Tensor dh = dact;
    if (!per_param && hidden) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* hrow = t.hact[li].row(i);
        double* drow = dh.row(i);
        for (std::size_t u = 0; u < layer.out; ++u) {
          const double p = probs[unit_base[li] + u];
          const double upstream = drow[u];
          result.grads.mask_logit_grads[unit_base[li] + u] +=
              hrow[u] * upstream * p * (1.0 - p);
          drow[u] = upstream * p;
        }
      }
    }

    // Through the activation.
    Tensor dz = std::move(dh);
    for (std::size_t i = 0; i < n * layer.out; ++i)
      dz.values[i] *= activate_grad(layer.act, t.pre[li].values[i],
                                    t.hact[li].values[i]);

    // Parameter gradients and the pull-back to the previous activations.
    std::vector<double>& dw = result.grads.weight_grads[li];
    std::vector<double>& db = result.grads.bias_grads[li];
    Tensor dprev = Tensor::zeros(n, layer.in);
    for (std::size_t i = 0; i < n; ++i) {
      const double* a = prev.row(i);
      const double* dzrow = dz.row(i);
      double* dprow = dprev.row(i);
      for (std::size_t u = 0; u < layer.out; ++u) {
        const double gz = dzrow[u];
        if (gz == 0.0) continue;
        const double* w = layer.weights.data() + u * layer.in;
        double* dwrow = dw.data() + u * layer.in;
        if (per_param) {
          const std::size_t wbase = param_base[li] + u * layer.in;
          for (std::size_t k = 0; k < layer.in; ++k) {
            dwrow[k] += probs[wbase + k] * gz * a[k];
            dprow[k] += probs[wbase + k] * w[k] * gz;
            // d(loss)/d(prob) for a weight's own mask entry.
            const double p = probs[wbase + k];
            result.grads.mask_logit_grads[wbase + k] +=
                w[k] * gz * a[k] * p * (1.0 - p);
          }
          const std::size_t bidx = param_base[li] + layer.weights.size() + u;
          const double pb = probs[bidx];
          db[u] += pb * gz;
          result.grads.mask_logit_grads[bidx] += layer.biases[u] * gz * pb * (1.0 - pb);
        } else {
          for (std::size_t k = 0; k < layer.in; ++k) {
            dwrow[k] += gz * a[k];
            dprow[k] += w[k] * gz;
          }
          db[u] += gz;
        }
      }
    }
    dact = std::move(dprev);
  }
  return result;
}

double loss_value(const Network& net, std::span<const double> mask_logits,
                  const Tensor& inputs, const Tensor& targets, LossKind kind,
                  MaskGranularity g) {
  check_inputs(net, inputs);
  check_mask(net, mask_logits, g, "loss_value");
  const std::vector<double> probs = sigmoid(mask_logits);
  ForwardTrace t = run_forward(net, probs, inputs, g);
  return output_loss(t.acts.back(), targets, kind, nullptr);
}

double finite_diff_check(const Network& net, std::span<const double> mask_logits,
                         const Tensor& inputs, const Tensor& targets, LossKind kind,
                         MaskGranularity g, double step) {
  if (!(step > 0.0) || step > 1e-2)
    throw std::invalid_argument("finite_diff_check: step must be in (0, 1e-2]");
  if (net.param_count() > 10000)
    throw std::invalid_argument("finite_diff_check: network too large (> 10^4 params)");

  const LossGrads analytic = loss_and_grads(net, mask_logits, inputs, targets, kind, g);
  auto rel_err = [](double a, double b) {
    return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-12);
  };

  double worst = 0.0;
  Network probe = net;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (std::size_t i = 0; i < net.layers[li].weights.size(); ++i) {
      const double orig = probe.layers[li].weights[i];
      probe.layers[li].weights[i] = orig + step;
      const double up = loss_value(probe, mask_logits, inputs, targets, kind, g);
      probe.layers[li].weights[i] = orig - step;
      const double dn = loss_value(probe, mask_logits, inputs, targets, kind, g);
      probe.layers[li].weights[i] = orig;
      worst = std::max(worst,
                       rel_err(analytic.grads.weight_grads[li][i], (up - dn) / (2 * step)));
    }
    for (std::size_t i = 0; i < net.layers[li].biases.size(); ++i) {
      const double orig = probe.layers[li].biases[i];
      probe.layers[li].biases[i] = orig + step;
      const double up = loss_value(probe, mask_logits, inputs, targets, kind, g);
      probe.layers[li].biases[i] = orig - step;
      const double dn = loss_value(probe, mask_logits, inputs, targets, kind, g);
      probe.layers[li].biases[i] = orig;
      worst = std::max(worst,
                       rel_err(analytic.grads.bias_grads[li][i], (up - dn) / (2 * step)));
    }
  }
  std::vector<double> logits(mask_logits.begin(), mask_logits.end());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double orig = logits[i];
    logits[i] = orig + step;
    const double up = loss_value(net, logits, inputs, targets, kind, g);
    logits[i] = orig - step;
    const double dn = loss_value(net, logits, inputs, targets, kind, g);
    logits[i] = orig;
    worst = std::max(worst,
                     rel_err(analytic.grads.mask_logit_grads[i], (up - dn) / (2 * step)));
  }
  return worst;
}

}  // namespace neuronml
