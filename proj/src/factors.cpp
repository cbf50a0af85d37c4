#include "ggap/factors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ggap::factors {

namespace {

// Per-sample gradients at one weight vector, flattened row-major (n x |W|).
std::vector<double> gradients_at(const net::MLPSpec& spec, const net::WeightVector& w,
                                 const data::Dataset& ds) {
  const std::size_t n = ds.size(), W = spec.param_count();
  std::vector<double> g(n * W);
  for (std::size_t i = 0; i < n; ++i) {
    net::WeightVector gi = net::per_sample_gradient(spec, w, ds.inputs[i], ds.targets[i]);
    std::copy(gi.begin(), gi.end(), g.begin() + i * W);
  }
  return g;
}

void mean_over(const std::vector<double>& flat, std::size_t W,
               const std::vector<std::size_t>& rows, std::vector<double>& out) {
  out.assign(W, 0.0);
  for (std::size_t r : rows) {
    const double* src = flat.data() + r * W;
    for (std::size_t k = 0; k < W; ++k) out[k] += src[k];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : out) v *= inv;
}

}  // namespace

bool MaskedSeries::all_masked() const {
  for (bool m : masked)
    if (!m) return false;
  return true;
}

double MaskedSeries::masked_fraction() const {
  if (masked.empty()) return 0.0;
  std::size_t c = 0;
  for (bool m : masked) c += m ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(masked.size());
}

double delta_floor(double loss_scale) { return 1e-12 * (1.0 + std::abs(loss_scale)); }

MaskedSeries contraction_exact(const net::MLPSpec& spec, const data::Dataset& ds,
                               const traj::TrajectoryRecord& full,
                               const std::vector<traj::TrajectoryRecord>& leave_outs,
                               const data::LeaveOutPlan& plan,
                               const std::vector<double>& delta, double loss_scale) {
  if (leave_outs.size() != plan.batches.size())
    throw std::invalid_argument("contraction_exact: runs vs plan batch count mismatch");
  if (delta.size() != full.points())
    throw std::invalid_argument("contraction_exact: delta series length mismatch");
  for (const auto& lo : leave_outs) traj::require_same_grid(full, lo);

  const std::size_t W = spec.param_count();
  const double floor = delta_floor(loss_scale);
  MaskedSeries out;
  out.value.assign(full.points(), 0.0);
  out.masked.assign(full.points(), false);

  std::vector<double> g_batch, g_comp;
  for (std::size_t k = 0; k < full.points(); ++k) {
    if (std::abs(delta[k]) < floor) {
      out.masked[k] = true;
      continue;
    }
    const std::vector<double> full_grads = gradients_at(spec, full.weights[k], ds);
    double numer = 0.0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto comp = plan.complement(b);
      // at the full run's point
      mean_over(full_grads, W, plan.batches[b], g_batch);
      mean_over(full_grads, W, comp, g_comp);
      const double at_full = numkit::dot(g_batch, g_comp);
      // at the leave-out run's point
      const std::vector<double> lo_grads = gradients_at(spec, leave_outs[b].weights[k], ds);
      mean_over(lo_grads, W, plan.batches[b], g_batch);
      mean_over(lo_grads, W, comp, g_comp);
      const double at_lo = numkit::dot(g_batch, g_comp);
      numer += at_lo - at_full;
    }
    numer /= static_cast<double>(plan.batches.size());
    out.value[k] = numer / delta[k];
  }
  return out;
}

MaskedSeries contraction_approx(const net::MLPSpec& spec, const data::Dataset& ds,
                                const traj::TrajectoryRecord& full,
                                const std::vector<traj::TrajectoryRecord>& leave_outs) {
  if (leave_outs.empty()) throw std::invalid_argument("contraction_approx: no leave-out runs");
  for (const auto& lo : leave_outs) traj::require_same_grid(full, lo);
  const std::size_t W = spec.param_count();

  MaskedSeries out;
  out.value.assign(full.points(), 0.0);
  out.masked.assign(full.points(), false);

  std::vector<std::vector<double>> xs(ds.size()), ys(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    xs[i] = ds.inputs[i];
    ys[i] = ds.targets[i];
  }

  for (std::size_t k = 0; k < full.points(); ++k) {
    std::vector<double> disp(W, 0.0);
    for (const auto& lo : leave_outs)
      for (std::size_t p = 0; p < W; ++p) disp[p] += lo.weights[k][p] - full.weights[k][p];
    const double invB = 1.0 / static_cast<double>(leave_outs.size());
    for (double& v : disp) v *= invB;

    net::WeightVector g = net::mean_gradient(spec, full.weights[k], xs, ys);
    const double denom = numkit::dot(g, disp);
    const double scale = numkit::norm2(g) * numkit::norm2(disp);
    if (std::abs(denom) <= 1e-14 * std::max(scale, 1e-300)) {
      out.masked[k] = true;
      continue;
    }
    net::WeightVector hv = net::hvp_mean_loss(spec, full.weights[k], xs, ys, disp);
    out.value[k] = numkit::dot(g, hv) / denom;
  }
  return out;
}

double perturbation_factor(const net::MLPSpec& spec, const net::WeightVector& w,
                           const data::Dataset& ds) {
  const std::size_t n = ds.size(), W = spec.param_count();
  if (n < 2) throw std::invalid_argument("perturbation_factor: need n >= 2");
  std::vector<double> mean(W, 0.0);
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    net::WeightVector g = net::per_sample_gradient(spec, w, ds.inputs[i], ds.targets[i]);
    mean_sq += numkit::dot(g, g);
    for (std::size_t k = 0; k < W; ++k) mean[k] += g[k];
  }
  mean_sq /= static_cast<double>(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : mean) v *= inv;
  const double trace_cov = mean_sq - numkit::dot(mean, mean);
  // rounding can push a mathematically tiny trace slightly negative
  return std::max(trace_cov, 0.0) / (static_cast<double>(n) - 1.0);
}

std::vector<double> perturbation_series(const net::MLPSpec& spec, const data::Dataset& ds,
                                        const traj::TrajectoryRecord& full) {
  std::vector<double> out(full.points());
  for (std::size_t k = 0; k < full.points(); ++k)
    out[k] = perturbation_factor(spec, full.weights[k], ds);
  return out;
}

KernelBlocks assemble_blocks(const net::MLPSpec& spec, const net::WeightVector& w,
                             const data::Dataset& ds, std::size_t max_dim) {
  const std::size_t n = ds.size(), C = spec.output_dim(), W = spec.param_count();
  const std::size_t dim = n * C;
  if (dim > max_dim)
    throw std::invalid_argument("assemble_blocks: nC = " + std::to_string(dim) +
                                " exceeds cap " + std::to_string(max_dim));

  // Stack Jacobians as one |W| x nC matrix, then H = J^T J.
  numkit::DenseMatrix J(W, dim);
  std::vector<std::vector<double>> outputs(n);
  for (std::size_t i = 0; i < n; ++i) {
    net::ForwardCache cache = net::forward_cached(spec, w, ds.inputs[i]);
    outputs[i] = cache.output;
    std::vector<double> seed(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      seed.assign(C, 0.0);
      seed[c] = 1.0;
      net::WeightVector col = net::backward_from_seed(spec, w, cache, seed);
      for (std::size_t p = 0; p < W; ++p) J(p, i * C + c) = col[p];
    }
  }

  KernelBlocks kb;
  kb.H = numkit::DenseMatrix(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      double s = 0.0;
      for (std::size_t p = 0; p < W; ++p) s += J(p, a) * J(p, b);
      kb.H(a, b) = s;
      kb.H(b, a) = s;
    }
  }

  kb.M = numkit::DenseMatrix(dim, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t c2 = 0; c2 < C; ++c2)
        kb.M(i * C + c, i * C + c2) = kb.H(i * C + c, i * C + c2);

  kb.P = numkit::DenseMatrix(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    numkit::DenseMatrix Ai = net::loss_output_hessian(spec, outputs[i]);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t c2 = 0; c2 < C; ++c2) {
          double s = 0.0;
          for (std::size_t k = 0; k < C; ++k) s += Ai(c, k) * kb.H(i * C + k, j * C + c2);
          kb.P(i * C + c, j * C + c2) = s;
        }
  }
  return kb;
}

double classical_bound(double c_star, double eps_star, double t) {
  if (!(c_star > 0.0))
    throw std::invalid_argument("classical_bound: c* must be positive, got " +
                                std::to_string(c_star));
  if (t < 0.0) throw std::invalid_argument("classical_bound: negative time");
  return (eps_star / c_star) * (1.0 - std::exp(-c_star * t));
}

}  // namespace ggap::factors
