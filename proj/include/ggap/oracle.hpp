#pragma once

// Closed-form ground truth for the two-point task: two unit supports on
// orthogonal axes, linear model, squared loss, gradient flow. Everything the
// pipeline measures numerically on this task has an exact counterpart here,
// which is what the acceptance checks compare against.

#include <cstddef>
#include <vector>

#include "ggap/numkit.hpp"

namespace ggap::oracle {

struct TwoPointParams {
  std::size_t n = 4;
  double y1 = 1.0;
  double y2 = 1.0;
  double eps0 = 1e-3;  // scale of the perturbed kernel's complement eigenvalue

  void validate() const;  // n >= 2; formulas hold for any n, even or odd

  // Averaged contraction factor of the leave-one-out ensemble. Constant in
  // time; (n-2)/(n-1), zero at n = 2.
  double contraction() const {
    return (static_cast<double>(n) - 2.0) / (static_cast<double>(n) - 1.0);
  }
  // Per-trajectory decay rates in weight space: the full run moves at 1/2 on
  // both axes; a leave-out run moves at (n-2)/(2(n-1)) on the omitted point's
  // axis and n/(2(n-1)) on the other.
  double rate_full() const { return 0.5; }
  double rate_omitted() const {
    return (static_cast<double>(n) - 2.0) / (2.0 * (static_cast<double>(n) - 1.0));
  }
  double rate_kept() const {
    return static_cast<double>(n) / (2.0 * (static_cast<double>(n) - 1.0));
  }
};

struct TwoPointState {
  // weight coordinates along the two support axes
  double full_a = 0.0, full_b = 0.0;
  // leave-out run omitting a first-point sample: (a, b) coordinates
  double omit1_a = 0.0, omit1_b = 0.0;
  // leave-out run omitting a second-point sample
  double omit2_a = 0.0, omit2_b = 0.0;
};

// Trajectories from zero init at time t.
TwoPointState closed_form_trajectories(const TwoPointParams& p, double t);

// Averaged loss difference and perturbation factor at time t.
double closed_form_delta(const TwoPointParams& p, double t);
double closed_form_eps(const TwoPointParams& p, double t);

struct GramEigen {
  double span = 0.0;        // eigenvalue on the residual span (multiplicity 2)
  double complement_lo = 0.0;  // bracket for the n-2 perturbed directions
  double complement_hi = 0.0;
};

// Effective-kernel spectrum at horizon t under the standard perturbation
// eps(t) = eps0 * (1 on [0,1], 1/t^2 afterwards). The span eigenvalue is
// exact; the complement ones are bracketed. n = 2 degenerates to the
// t-linear forms (contraction 0).
GramEigen closed_form_gram_eigen(const TwoPointParams& p, double t);

struct ComparisonBounds {
  double weight_norm = 0.0;      // sqrt(2 (y1^2 + y2^2) / n)
  double accumulated_perturbation = 0.0;  // (y1^2 + y2^2) / (4 (n-1))
};
ComparisonBounds comparison_bounds(const TwoPointParams& p);

// Block series for the perturbed kernel on a time grid: P^e(t) has the exact
// rank-2 structure of the task (eigenvalue n/2 on the residual span) plus
// eps(t) on the complement; H^e = P^e and M = I. Used to drive the pipeline
// integrator on the oracle task. Matrices are n x n (scalar outputs).
struct PerturbedBlocks {
  std::vector<numkit::DenseMatrix> P;  // per grid point
  std::vector<numkit::DenseMatrix> A;  // M - H^e / n per grid point
};
PerturbedBlocks two_point_perturbed_blocks(const TwoPointParams& p,
                                           const std::vector<double>& grid);

// Orthonormal basis of the residual span (two vectors of length n).
std::vector<std::vector<double>> two_point_span(std::size_t n);

double perturbation_eps(const TwoPointParams& p, double t);

}  // namespace ggap::oracle
