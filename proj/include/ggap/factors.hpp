#pragma once

// The two factors driving the averaged loss difference ODE
// d delta / dt = -c(t) delta(t) + eps(t), measured from recorded
// trajectories, plus the per-sample kernel blocks the propagator and the
// effective kernel are built from.

#include <optional>
#include <vector>

#include "ggap/data.hpp"
#include "ggap/net.hpp"
#include "ggap/numkit.hpp"
#include "ggap/traj.hpp"

namespace ggap::factors {

// A time series that may be undefined at some record points. Masked entries
// carry value 0 and mask=true; consumers must treat them as "no information"
// (the kernel integrator adds zero damping there).
struct MaskedSeries {
  std::vector<double> value;
  std::vector<bool> masked;
  bool all_masked() const;
  double masked_fraction() const;
};

// Floor under |delta| below which the contraction ratio is meaningless.
// loss_scale is the initial training loss of the full run.
double delta_floor(double loss_scale);

// Contraction factor per record point:
//   mean over batches of  g_b(w_lo) . h_b(w_lo) - g_b(w_full) . h_b(w_full)
//   -----------------------------------------------------------------------
//                           delta(t)
// where g_b is the mean gradient over the omitted batch and h_b over its
// complement. delta is the series from measure_loss_difference (or a
// baseline-shifted copy for increment analyses). Masked where |delta| is
// under the floor.
MaskedSeries contraction_exact(const net::MLPSpec& spec, const data::Dataset& ds,
                               const traj::TrajectoryRecord& full,
                               const std::vector<traj::TrajectoryRecord>& leave_outs,
                               const data::LeaveOutPlan& plan,
                               const std::vector<double>& delta, double loss_scale);

// Curvature shortcut: one Hessian-vector product against the mean leave-out
// displacement instead of 2B+2 gradient evaluations per point.
//   c_approx = g . (H d) / (g . d),  d = mean over batches of (w_lo - w_full)
// Masked where the directional derivative g.d is numerically zero.
MaskedSeries contraction_approx(const net::MLPSpec& spec, const data::Dataset& ds,
                                const traj::TrajectoryRecord& full,
                                const std::vector<traj::TrajectoryRecord>& leave_outs);

// Perturbation factor at one record point: trace of the per-sample gradient
// covariance over (n-1), computed as (mean ||g_i||^2 - ||mean g||^2) * n /
// ((n-1) * n) without materializing the covariance.
double perturbation_factor(const net::MLPSpec& spec, const net::WeightVector& w,
                           const data::Dataset& ds);
std::vector<double> perturbation_series(const net::MLPSpec& spec, const data::Dataset& ds,
                                        const traj::TrajectoryRecord& full);

// Kernel blocks at one record point. With J_i the |W| x C output Jacobian of
// sample i and A_i the loss-output Hessian:
//   H[i][j] = J_i^T J_j          (nC x nC, symmetric PSD)
//   M       = blockdiag(H[i][i])
//   P[i][j] = A_i H[i][j]
// Returned dense; callers guard sizes via max_dim.
struct KernelBlocks {
  numkit::DenseMatrix H;  // nC x nC
  numkit::DenseMatrix M;
  numkit::DenseMatrix P;
};
KernelBlocks assemble_blocks(const net::MLPSpec& spec, const net::WeightVector& w,
                             const data::Dataset& ds, std::size_t max_dim = 4096);

// Constant-factor bound (eps*/c*) (1 - exp(-c* t)); c* must be positive.
double classical_bound(double c_star, double eps_star, double t);

}  // namespace ggap::factors
