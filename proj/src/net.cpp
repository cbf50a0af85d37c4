#include "ggap/net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace ggap::net {

namespace {

double act(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
  }
  return z;
}

// Derivative at the pre-activation. ReLU takes subgradient 0 at exactly 0 so
// forward and backward agree on which unit is active.
double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void check_input(const MLPSpec& spec, const std::vector<double>& x) {
  if (x.size() != spec.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.size()) +
                                " features, spec wants " + std::to_string(spec.input_dim()));
}

}  // namespace

std::size_t MLPSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1];
  return n;
}

void MLPSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MLPSpec: need at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("MLPSpec: zero width layer");
}

WeightVector init_weights(const MLPSpec& spec) {
  spec.validate();
  WeightVector w(spec.param_count(), 0.0);
  std::mt19937_64 rng(spec.init_seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t count = spec.widths[l] * spec.widths[l + 1];
    const double b = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-b, b);
    const bool zero_this = spec.init == InitScheme::kZeroOutput && l + 2 == spec.widths.size();
    for (std::size_t k = 0; k < count; ++k) {
      const double v = dist(rng);  // draw even when zeroing, keeps stream layout stable
      w[off + k] = zero_this ? 0.0 : v;
    }
    off += count;
  }
  return w;
}

ForwardCache forward_cached(const MLPSpec& spec, const WeightVector& w,
                            const std::vector<double>& x) {
  check_input(spec, x);
  if (w.size() != spec.param_count())
    throw std::invalid_argument("forward: weight vector has " + std::to_string(w.size()) +
                                " entries, spec wants " + std::to_string(spec.param_count()));
  ForwardCache c;
  c.post.resize(spec.num_layers() + 1);
  c.pre.resize(spec.num_layers());
  c.post[0] = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    std::vector<double>& z = c.pre[l];
    z.assign(out, 0.0);
    const std::vector<double>& a = c.post[l];
    for (std::size_t i = 0; i < out; ++i) {
      const double* wi = w.data() + off + i * in;
      double s = 0.0;
      for (std::size_t j = 0; j < in; ++j) s += wi[j] * a[j];
      z[i] = s;
    }
    off += in * out;
    if (l + 1 == spec.num_layers()) {
      c.post[l + 1] = z;  // linear output layer
    } else {
      std::vector<double> h(out);
      for (std::size_t i = 0; i < out; ++i) h[i] = act(spec.activation, z[i]);
      c.post[l + 1] = std::move(h);
    }
  }
  c.output = c.post.back();
  return c;
}

std::vector<double> forward(const MLPSpec& spec, const WeightVector& w,
                            const std::vector<double>& x) {
  return forward_cached(spec, w, x).output;
}

LossResult loss_and_residual(const MLPSpec& spec, const std::vector<double>& output,
                             const std::vector<double>& target) {
  if (output.size() != spec.output_dim() || target.size() != spec.output_dim())
    throw std::invalid_argument("loss_and_residual: output/target length must be " +
                                std::to_string(spec.output_dim()));
  LossResult r;
  r.residual.resize(output.size());
  if (spec.loss == LossKind::kSquared) {
    double s = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
      const double d = output[i] - target[i];
      r.residual[i] = d;
      s += d * d;
    }
    r.loss = 0.5 * s;
    return r;
  }
  // cross-entropy: target must be a probability vector
  double tsum = 0.0;
  for (double t : target) {
    if (t < -1e-12) throw std::invalid_argument("loss_and_residual: negative cross-entropy target");
    tsum += t;
  }
  if (std::abs(tsum - 1.0) > 1e-9)
    throw std::invalid_argument("loss_and_residual: cross-entropy target sums to " +
                                std::to_string(tsum));
  double zmax = output[0];
  for (double z : output) zmax = std::max(zmax, z);
  double denom = 0.0;
  for (double z : output) denom += std::exp(z - zmax);
  const double log_denom = std::log(denom) + zmax;
  double loss = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double p = std::exp(output[i] - log_denom);
    r.residual[i] = p - target[i];
    if (target[i] > 0.0) loss += target[i] * (log_denom - output[i]);
  }
  r.loss = loss;
  return r;
}

WeightVector backward_from_seed(const MLPSpec& spec, const WeightVector& w,
                                const ForwardCache& cache, const std::vector<double>& seed) {
  if (seed.size() != spec.output_dim())
    throw std::invalid_argument("backward_from_seed: seed length must be " +
                                std::to_string(spec.output_dim()));
  WeightVector grad(spec.param_count(), 0.0);
  std::vector<double> delta = seed;  // gradient wrt pre-activation of current layer
  // Walk layers from the top. Weight offsets are recomputed per layer; the
  // net is small enough that this bookkeeping is not worth caching.
  std::vector<std::size_t> offsets(spec.num_layers());
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    offsets[l] = off;
    off += spec.widths[l] * spec.widths[l + 1];
  }
  for (std::size_t li = spec.num_layers(); li-- > 0;) {
    const std::size_t in = spec.widths[li], out = spec.widths[li + 1];
    const std::vector<double>& a = cache.post[li];
    double* g = grad.data() + offsets[li];
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      if (d != 0.0) {
        double* gi = g + i * in;
        for (std::size_t j = 0; j < in; ++j) gi[j] += d * a[j];
      }
    }
    if (li == 0) break;
    const double* wl = w.data() + offsets[li];
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      if (d == 0.0) continue;
      const double* wi = wl + i * in;
      for (std::size_t j = 0; j < in; ++j) prev[j] += d * wi[j];
    }
    const std::vector<double>& z = cache.pre[li - 1];
    for (std::size_t j = 0; j < in; ++j) prev[j] *= act_deriv(spec.activation, z[j]);
    delta = std::move(prev);
  }
  return grad;
}

WeightVector per_sample_gradient(const MLPSpec& spec, const WeightVector& w,
                                 const std::vector<double>& x, const std::vector<double>& y) {
  ForwardCache cache = forward_cached(spec, w, x);
  LossResult lr = loss_and_residual(spec, cache.output, y);
  return backward_from_seed(spec, w, cache, lr.residual);
}

numkit::DenseMatrix output_jacobian(const MLPSpec& spec, const WeightVector& w,
                                    const std::vector<double>& x) {
  ForwardCache cache = forward_cached(spec, w, x);
  const std::size_t C = spec.output_dim();
  numkit::DenseMatrix J(spec.param_count(), C);
  std::vector<double> seed(C, 0.0);
  for (std::size_t j = 0; j < C; ++j) {
    seed.assign(C, 0.0);
    seed[j] = 1.0;
    WeightVector col = backward_from_seed(spec, w, cache, seed);
    for (std::size_t i = 0; i < col.size(); ++i) J(i, j) = col[i];
  }
  return J;
}

numkit::DenseMatrix loss_output_hessian(const MLPSpec& spec, const std::vector<double>& output) {
  const std::size_t C = spec.output_dim();
  if (output.size() != C)
    throw std::invalid_argument("loss_output_hessian: output length must be " + std::to_string(C));
  if (spec.loss == LossKind::kSquared) return numkit::DenseMatrix::identity(C);
  double zmax = output[0];
  for (double z : output) zmax = std::max(zmax, z);
  double denom = 0.0;
  for (double z : output) denom += std::exp(z - zmax);
  std::vector<double> p(C);
  for (std::size_t i = 0; i < C; ++i) p[i] = std::exp(output[i] - zmax) / denom;
  numkit::DenseMatrix A(C, C);
  for (std::size_t i = 0; i < C; ++i)
    for (std::size_t j = 0; j < C; ++j) A(i, j) = (i == j ? p[i] : 0.0) - p[i] * p[j];
  return A;
}

double mean_loss(const MLPSpec& spec, const WeightVector& w,
                 const std::vector<std::vector<double>>& xs,
                 const std::vector<std::vector<double>>& ys) {
  if (xs.empty() || xs.size() != ys.size())
    throw std::invalid_argument("mean_loss: need equal, nonzero sample counts");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<double> f = forward(spec, w, xs[i]);
    s += loss_and_residual(spec, f, ys[i]).loss;
  }
  return s / static_cast<double>(xs.size());
}

WeightVector mean_gradient(const MLPSpec& spec, const WeightVector& w,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys) {
  if (xs.empty() || xs.size() != ys.size())
    throw std::invalid_argument("mean_gradient: need equal, nonzero sample counts");
  WeightVector g(spec.param_count(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    WeightVector gi = per_sample_gradient(spec, w, xs[i], ys[i]);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& v : g) v *= inv;
  return g;
}

WeightVector hvp_mean_loss(const MLPSpec& spec, const WeightVector& w,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys,
                           const std::vector<double>& v) {
  if (v.size() != w.size()) throw std::invalid_argument("hvp_mean_loss: direction length mismatch");
  const double h = 1e-4 * (1.0 + numkit::norm2(w)) / (1.0 + numkit::norm2(v));
  WeightVector wp = w, wm = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    wp[i] += h * v[i];
    wm[i] -= h * v[i];
  }
  WeightVector gp = mean_gradient(spec, wp, xs, ys);
  WeightVector gm = mean_gradient(spec, wm, xs, ys);
  WeightVector out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
  return out;
}

}  // namespace ggap::net
