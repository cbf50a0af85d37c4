#pragma once

// Residual propagator and the effective kernel
//   K(t0, t) = 1/(n-1) * integral over s in [t0, t] of
//              Omega(t0,s)^T (M(s) - H(s)/n) Omega(t0,s) * exp(-int_s^t cbar)
// evaluated with trapezoid weights on the record grid. The damping enters
// through a rescale-and-add recurrence so the running integral never holds
// exp of a large cumulative value.

#include <functional>
#include <optional>
#include <vector>

#include "ggap/factors.hpp"
#include "ggap/numkit.hpp"

namespace ggap::gram {

enum class PropagatorMethod { kProduct, kMagnus1, kMagnus2 };

// Supplies the kernel blocks at grid index k: P(t_k) and A(t_k) = M - H/n.
// The integrator pulls indices in order 0, 1, 2, ... exactly once each, so
// implementations may stream from a trajectory without caching.
using BlockFn = std::function<void(std::size_t k, numkit::DenseMatrix& P, numkit::DenseMatrix& A)>;

// Block source backed by a recorded trajectory (assembles at each point).
BlockFn trajectory_blocks(const net::MLPSpec& spec, const data::Dataset& ds,
                          const traj::TrajectoryRecord& full, std::size_t max_dim = 4096);

struct EffectiveGram {
  numkit::DenseMatrix K;  // symmetrized (K + K^T)/2
  double t0 = 0.0;
  double horizon = 0.0;
  std::size_t n_samples = 0;
  double cumulative_damping = 0.0;  // int of masked cbar over [t0, horizon]
  double cbar_masked_fraction = 0.0;
};

struct GramComputation {
  EffectiveGram gram;
  // Set when r0 is provided:
  std::vector<double> eps_hat;                          // r0^T Omega^T A Omega r0 / (n-1)
  std::vector<std::vector<double>> propagated_residual; // Omega(t0, t_k) r0
};

// Main integrator. grid/cbar/blocks must share indexing; n_samples is the
// dataset size n (the blocks are nC x nC). Magnus methods exponentiate the
// accumulated generator at every grid point; meant for small dimensions.
GramComputation effective_gram(const BlockFn& blocks, const factors::MaskedSeries& cbar,
                               const std::vector<double>& grid, std::size_t n_samples,
                               const std::vector<double>* r0 = nullptr,
                               PropagatorMethod method = PropagatorMethod::kProduct);

// Increment variant: integrate from grid index k0 with the propagator rebased
// at t_{k0}. cbar must already be the increment-form series (loss-difference
// denominator shifted by its value at t_{k0}).
GramComputation effective_gram_from(const BlockFn& blocks, const factors::MaskedSeries& cbar,
                                    const std::vector<double>& grid, std::size_t k0,
                                    std::size_t n_samples, const std::vector<double>* r0 = nullptr,
                                    PropagatorMethod method = PropagatorMethod::kProduct);

// Propagator series alone (no kernel): Omega at every grid point. Small
// problems only; the matrices are dim x dim each.
std::vector<numkit::DenseMatrix> propagator_series(const BlockFn& blocks,
                                                   const std::vector<double>& grid,
                                                   std::size_t n_samples, PropagatorMethod method);

double quadratic_form(const numkit::DenseMatrix& K, const std::vector<double>& r0);

// Scalar reconstruction of the averaged loss difference from factor series:
// delta_hat(t) = int_0^t eps(s) exp(-int_s^t cbar) ds, same trapezoid and
// masking conventions as the kernel integrator. Returns the whole curve.
std::vector<double> reconstruct_delta(const factors::MaskedSeries& cbar,
                                      const std::vector<double>& eps,
                                      const std::vector<double>& grid);

// Diagnostics for the boundedness conditions the kernel route relies on,
// evaluated on a subset of grid indices (eigen decompositions per point are
// the cost driver). Observational only.
struct ConvergenceDiagnostics {
  std::vector<std::size_t> indices;    // grid indices diagnosed
  std::vector<double> lambda_min;      // of (P + P^T)/2
  std::vector<double> lambda_max;
  std::vector<double> omega;           // exp(-(2/n) int lambda_min)
  std::vector<double> m_norm;          // ||A||_2 / (n-1)
  std::vector<double> omega_m_integral; // running int of omega * m
  double sup_omega_m = 0.0;
  bool omega_m_bounded_trend = true;   // last increment no larger than the first
  double cbar_negative_fraction = 0.0; // over unmasked entries
  double last_negative_cbar_time = -1.0;
};
ConvergenceDiagnostics convergence_diagnostics(const BlockFn& blocks,
                                               const std::vector<double>& grid,
                                               std::size_t n_samples,
                                               const factors::MaskedSeries& cbar,
                                               std::size_t max_points = 129);

}  // namespace ggap::gram
