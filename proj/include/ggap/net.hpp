#pragma once

// Fully connected networks with hand-written forward/backward passes. The
// analysis layers need per-sample gradients, full output Jacobians and the
// loss-output Hessian, so we keep the implementation explicit instead of
// hiding it behind an autodiff library. No bias terms: the linear special
// case f = W x (single layer, identity activation) must be exactly that map.

#include <cstdint>
#include <vector>

#include "ggap/numkit.hpp"

namespace ggap::net {

enum class Activation { kIdentity, kRelu, kTanh };
enum class LossKind { kSquared, kCrossEntropy };
enum class InitScheme { kFanInUniform, kZeroOutput };

struct MLPSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation activation = Activation::kTanh;
  LossKind loss = LossKind::kSquared;
  InitScheme init = InitScheme::kFanInUniform;
  std::uint64_t init_seed = 0;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t num_layers() const { return widths.size() - 1; }
  std::size_t param_count() const;

  void validate() const;  // throws std::invalid_argument
};

// Flat parameter vector. Layout: layer 0 first, each layer row-major
// (out x in). Offsets are implied by the spec's widths.
using WeightVector = std::vector<double>;

// Weight init. kFanInUniform draws every entry from U(-b, b), b = sqrt(1/fan_in),
// using a single mt19937_64 stream in layer order. kZeroOutput does the same
// but zeroes the final layer so the initial network output is identically
// zero (initial residual = -target under squared loss).
WeightVector init_weights(const MLPSpec& spec);

struct ForwardCache {
  // post[0] is the input; post[l] the activation entering layer l.
  std::vector<std::vector<double>> post;
  std::vector<std::vector<double>> pre;  // pre[l] = W_l * post[l]
  std::vector<double> output;            // == pre.back(), final layer is linear
};

std::vector<double> forward(const MLPSpec& spec, const WeightVector& w,
                            const std::vector<double>& x);
ForwardCache forward_cached(const MLPSpec& spec, const WeightVector& w,
                            const std::vector<double>& x);

struct LossResult {
  double loss = 0.0;
  std::vector<double> residual;  // d loss / d output, length C
};

// Residual convention: derivative of the per-sample loss with respect to the
// network output. Squared loss (1/2)||f-y||^2 -> f - y. Cross-entropy with
// softmax -> p - y. Cross-entropy targets must be a probability vector
// (componentwise >= 0, summing to 1 within 1e-9).
LossResult loss_and_residual(const MLPSpec& spec, const std::vector<double>& output,
                             const std::vector<double>& target);

// Backprop from an arbitrary output seed; building block for the gradient
// and Jacobian paths so they share one code path.
WeightVector backward_from_seed(const MLPSpec& spec, const WeightVector& w,
                                const ForwardCache& cache, const std::vector<double>& seed);

// Gradient of the per-sample loss wrt weights.
WeightVector per_sample_gradient(const MLPSpec& spec, const WeightVector& w,
                                 const std::vector<double>& x, const std::vector<double>& y);

// d f / d w as a |W| x C matrix (column j = gradient of output j).
numkit::DenseMatrix output_jacobian(const MLPSpec& spec, const WeightVector& w,
                                    const std::vector<double>& x);

// Second derivative of the loss in output space, C x C. Squared -> identity;
// cross-entropy -> diag(p) - p p^T evaluated at the current softmax.
numkit::DenseMatrix loss_output_hessian(const MLPSpec& spec, const std::vector<double>& output);

// Mean training loss and gradient over a set of samples (plain mean).
double mean_loss(const MLPSpec& spec, const WeightVector& w,
                 const std::vector<std::vector<double>>& xs,
                 const std::vector<std::vector<double>>& ys);
WeightVector mean_gradient(const MLPSpec& spec, const WeightVector& w,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys);

// Hessian-vector product of the mean loss by central differences of the mean
// gradient. Step h = 1e-4 * (1 + ||w||) / (1 + ||v||); exact for losses whose
// gradient is linear in w (linear model + squared loss).
WeightVector hvp_mean_loss(const MLPSpec& spec, const WeightVector& w,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys,
                           const std::vector<double>& v);

}  // namespace ggap::net
