#include "ggap/gram.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ggap::gram {

namespace {

void check_series(const factors::MaskedSeries& cbar, const std::vector<double>& grid) {
  if (grid.size() < 2) throw std::invalid_argument("effective_gram: need at least 2 grid points");
  if (cbar.value.size() != grid.size() || cbar.masked.size() != grid.size())
    throw std::invalid_argument("effective_gram: contraction series length " +
                                std::to_string(cbar.value.size()) + " vs grid " +
                                std::to_string(grid.size()));
  for (std::size_t k = 0; k + 1 < grid.size(); ++k)
    if (grid[k + 1] <= grid[k])
      throw std::invalid_argument("effective_gram: grid not increasing at " + std::to_string(k));
}

double masked_value(const factors::MaskedSeries& s, std::size_t k) {
  return s.masked[k] ? 0.0 : s.value[k];
}

// Incremental Magnus generator state. Trapezoid accumulation of
//   Q(t)    = int P
//   R(t)    = int [P(t1), Q(t1)] dt1   (equals the double commutator integral)
// so omega1 = -Q/n and omega2 = R / (2 n^2).
struct MagnusState {
  numkit::DenseMatrix Q, R;
  numkit::DenseMatrix prev_P, prev_comm;
  bool second_order = false;

  void init(const numkit::DenseMatrix& P0, bool order2) {
    second_order = order2;
    const std::size_t d = P0.rows();
    Q = numkit::DenseMatrix(d, d);
    R = numkit::DenseMatrix(d, d);
    prev_P = P0;
    if (order2) prev_comm = numkit::DenseMatrix(d, d);  // [P(t0), Q(t0)] = 0
  }

  void step(const numkit::DenseMatrix& P, double h) {
    // Q first so the commutator at the new point sees the updated integral.
    numkit::DenseMatrix Q_new = Q;
    numkit::axpy(Q_new, 0.5 * h, prev_P);
    numkit::axpy(Q_new, 0.5 * h, P);
    if (second_order) {
      numkit::DenseMatrix comm =
          numkit::sub(numkit::matmul(P, Q_new), numkit::matmul(Q_new, P));
      numkit::axpy(R, 0.5 * h, prev_comm);
      numkit::axpy(R, 0.5 * h, comm);
      prev_comm = std::move(comm);
    }
    Q = std::move(Q_new);
    prev_P = P;
  }

  numkit::DenseMatrix exponential(std::size_t n) const {
    numkit::DenseMatrix gen = numkit::scale(Q, -1.0 / static_cast<double>(n));
    if (second_order)
      numkit::axpy(gen, 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n)), R);
    return numkit::mat_exp(gen);
  }
};

}  // namespace

BlockFn trajectory_blocks(const net::MLPSpec& spec, const data::Dataset& ds,
                          const traj::TrajectoryRecord& full, std::size_t max_dim) {
  return [&spec, &ds, &full, max_dim](std::size_t k, numkit::DenseMatrix& P,
                                      numkit::DenseMatrix& A) {
    if (k >= full.points())
      throw std::invalid_argument("trajectory_blocks: index " + std::to_string(k) +
                                  " beyond recorded points");
    factors::KernelBlocks kb = factors::assemble_blocks(spec, full.weights[k], ds, max_dim);
    P = std::move(kb.P);
    A = kb.M;
    numkit::axpy(A, -1.0 / static_cast<double>(ds.size()), kb.H);
  };
}

GramComputation effective_gram_from(const BlockFn& blocks, const factors::MaskedSeries& cbar,
                                    const std::vector<double>& grid, std::size_t k0,
                                    std::size_t n_samples, const std::vector<double>* r0,
                                    PropagatorMethod method) {
  check_series(cbar, grid);
  if (k0 + 1 >= grid.size())
    throw std::invalid_argument("effective_gram: start index " + std::to_string(k0) +
                                " leaves no integration span");
  if (n_samples < 2) throw std::invalid_argument("effective_gram: need n >= 2");

  const double inv_n1 = 1.0 / (static_cast<double>(n_samples) - 1.0);
  const double inv_n = 1.0 / static_cast<double>(n_samples);

  numkit::DenseMatrix P, A;
  blocks(k0, P, A);
  const std::size_t dim = P.rows();
  if (P.rows() != P.cols() || !A.same_shape(P))
    throw std::invalid_argument("effective_gram: block shapes inconsistent");
  if (r0 && r0->size() != dim)
    throw std::invalid_argument("effective_gram: r0 has " + std::to_string(r0->size()) +
                                " entries, blocks are " + std::to_string(dim) + " wide");

  GramComputation out;
  out.gram.t0 = grid[k0];
  out.gram.horizon = grid.back();
  out.gram.n_samples = n_samples;
  out.gram.cbar_masked_fraction = cbar.masked_fraction();

  numkit::DenseMatrix omega = numkit::DenseMatrix::identity(dim);
  numkit::DenseMatrix K(dim, dim);
  // G = Omega^T A Omega / (n-1), the damped integrand without its damping
  numkit::DenseMatrix G_prev = numkit::scale(A, inv_n1);

  MagnusState magnus;
  if (method != PropagatorMethod::kProduct)
    magnus.init(P, method == PropagatorMethod::kMagnus2);

  auto emit_point = [&](const numkit::DenseMatrix& G, const numkit::DenseMatrix& om) {
    if (!r0) return;
    std::vector<double> Gr = numkit::matvec(G, *r0);
    out.eps_hat.push_back(numkit::dot(*r0, Gr));
    out.propagated_residual.push_back(numkit::matvec(om, *r0));
  };
  emit_point(G_prev, omega);

  double cum_damp = 0.0;
  for (std::size_t k = k0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];

    if (method == PropagatorMethod::kProduct) {
      // left-endpoint generator, applied from the left: new = (I - h P/n) old
      numkit::DenseMatrix step = numkit::scale(P, -h * inv_n);
      for (std::size_t i = 0; i < dim; ++i) step(i, i) += 1.0;
      omega = numkit::matmul(step, omega);
    }

    blocks(k + 1, P, A);
    if (method != PropagatorMethod::kProduct) {
      magnus.step(P, h);
      omega = magnus.exponential(n_samples);
    }

    numkit::DenseMatrix G_next =
        numkit::scale(numkit::matmul(numkit::matmul(numkit::transpose(omega), A), omega), inv_n1);

    const double dC = 0.5 * h * (masked_value(cbar, k) + masked_value(cbar, k + 1));
    cum_damp += dC;
    const double decay = std::exp(-dC);
    // K <- e^-dC K + (h/2)(e^-dC G_prev + G_next): trapezoid cell of the
    // integrand damped to the *current* right endpoint; earlier cells keep
    // getting rescaled so the total damping to the horizon comes out right.
    for (std::size_t i = 0; i < dim * dim; ++i)
      K.data()[i] = decay * (K.data()[i] + 0.5 * h * G_prev.data()[i]) +
                    0.5 * h * G_next.data()[i];

    emit_point(G_next, omega);
    G_prev = std::move(G_next);
  }

  out.gram.cumulative_damping = cum_damp;
  // exact symmetrization; the integrand is symmetric up to rounding
  numkit::DenseMatrix Kt = numkit::transpose(K);
  for (std::size_t i = 0; i < dim * dim; ++i)
    K.data()[i] = 0.5 * (K.data()[i] + Kt.data()[i]);
  out.gram.K = std::move(K);
  return out;
}

GramComputation effective_gram(const BlockFn& blocks, const factors::MaskedSeries& cbar,
                               const std::vector<double>& grid, std::size_t n_samples,
                               const std::vector<double>* r0, PropagatorMethod method) {
  return effective_gram_from(blocks, cbar, grid, 0, n_samples, r0, method);
}

std::vector<numkit::DenseMatrix> propagator_series(const BlockFn& blocks,
                                                   const std::vector<double>& grid,
                                                   std::size_t n_samples,
                                                   PropagatorMethod method) {
  if (grid.empty()) throw std::invalid_argument("propagator_series: empty grid");
  numkit::DenseMatrix P, A;
  blocks(0, P, A);
  const std::size_t dim = P.rows();
  std::vector<numkit::DenseMatrix> out;
  out.reserve(grid.size());
  out.push_back(numkit::DenseMatrix::identity(dim));

  MagnusState magnus;
  if (method != PropagatorMethod::kProduct)
    magnus.init(P, method == PropagatorMethod::kMagnus2);

  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];
    if (h <= 0.0) throw std::invalid_argument("propagator_series: grid not increasing");
    if (method == PropagatorMethod::kProduct) {
      numkit::DenseMatrix step = numkit::scale(P, -h / static_cast<double>(n_samples));
      for (std::size_t i = 0; i < dim; ++i) step(i, i) += 1.0;
      out.push_back(numkit::matmul(step, out.back()));
      blocks(k + 1, P, A);
    } else {
      blocks(k + 1, P, A);
      magnus.step(P, h);
      out.push_back(magnus.exponential(n_samples));
    }
  }
  return out;
}

double quadratic_form(const numkit::DenseMatrix& K, const std::vector<double>& r0) {
  if (K.rows() != K.cols() || K.rows() != r0.size())
    throw std::invalid_argument("quadratic_form: K is " + std::to_string(K.rows()) + "x" +
                                std::to_string(K.cols()) + ", r0 has " +
                                std::to_string(r0.size()));
  std::vector<double> Kr = numkit::matvec(K, r0);
  return numkit::dot(r0, Kr);
}

std::vector<double> reconstruct_delta(const factors::MaskedSeries& cbar,
                                      const std::vector<double>& eps,
                                      const std::vector<double>& grid) {
  check_series(cbar, grid);
  if (eps.size() != grid.size())
    throw std::invalid_argument("reconstruct_delta: eps series length mismatch");
  std::vector<double> out(grid.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];
    const double dC = 0.5 * h * (masked_value(cbar, k) + masked_value(cbar, k + 1));
    const double decay = std::exp(-dC);
    acc = decay * (acc + 0.5 * h * eps[k]) + 0.5 * h * eps[k + 1];
    out[k + 1] = acc;
  }
  return out;
}

ConvergenceDiagnostics convergence_diagnostics(const BlockFn& blocks,
                                               const std::vector<double>& grid,
                                               std::size_t n_samples,
                                               const factors::MaskedSeries& cbar,
                                               std::size_t max_points) {
  if (grid.empty()) throw std::invalid_argument("convergence_diagnostics: empty grid");
  if (max_points < 2) max_points = 2;
  ConvergenceDiagnostics d;

  const std::size_t m = grid.size();
  const std::size_t stride = std::max<std::size_t>(1, (m - 1 + max_points - 2) / (max_points - 1));
  for (std::size_t k = 0; k < m; k += stride) d.indices.push_back(k);
  if (d.indices.back() != m - 1) d.indices.push_back(m - 1);

  const double inv_n1 = 1.0 / (static_cast<double>(n_samples) - 1.0);
  numkit::DenseMatrix P, A;
  std::vector<double> times;
  for (std::size_t idx : d.indices) {
    blocks(idx, P, A);
    numkit::DenseMatrix sym(P.rows(), P.cols());
    for (std::size_t i = 0; i < P.rows(); ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) sym(i, j) = 0.5 * (P(i, j) + P(j, i));
    numkit::SymEigen eig = numkit::sym_eig(sym);
    d.lambda_min.push_back(eig.values.front());
    d.lambda_max.push_back(eig.values.back());
    d.m_norm.push_back(numkit::sym_two_norm(A) * inv_n1);
    times.push_back(grid[idx]);
  }

  std::vector<double> lmin_cum = numkit::cumulative_trapezoid(d.lambda_min, times);
  std::vector<double> om(times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    om[k] = std::exp(-(2.0 / static_cast<double>(n_samples)) * lmin_cum[k]);
  d.omega = om;

  std::vector<double> prod(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) prod[k] = om[k] * d.m_norm[k];
  d.omega_m_integral = numkit::cumulative_trapezoid(prod, times);
  for (double v : prod) d.sup_omega_m = std::max(d.sup_omega_m, v);
  if (times.size() >= 3) {
    const double first_inc = d.omega_m_integral[1] - d.omega_m_integral[0];
    const double last_inc =
        d.omega_m_integral[times.size() - 1] - d.omega_m_integral[times.size() - 2];
    const double h_first = times[1] - times[0];
    const double h_last = times[times.size() - 1] - times[times.size() - 2];
    // compare average integrand height, not raw increments (grids may be uneven)
    d.omega_m_bounded_trend = (last_inc / h_last) <= (first_inc / h_first) * 1.05 + 1e-12;
  }

  std::size_t negatives = 0, unmasked = 0;
  for (std::size_t k = 0; k < cbar.value.size(); ++k) {
    if (cbar.masked[k]) continue;
    ++unmasked;
    if (cbar.value[k] < 0.0) {
      ++negatives;
      d.last_negative_cbar_time = grid[k];
    }
  }
  d.cbar_negative_fraction =
      unmasked == 0 ? 0.0 : static_cast<double>(negatives) / static_cast<double>(unmasked);
  return d;
}

}  // namespace ggap::gram
