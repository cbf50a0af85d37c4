#include "ggap/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ggap::oracle {

void TwoPointParams::validate() const {
  if (n < 2) throw std::invalid_argument("TwoPointParams: need n >= 2");
  if (eps0 < 0.0) throw std::invalid_argument("TwoPointParams: eps0 must be >= 0");
}

TwoPointState closed_form_trajectories(const TwoPointParams& p, double t) {
  p.validate();
  TwoPointState s;
  const double full = 1.0 - std::exp(-p.rate_full() * t);
  s.full_a = full * p.y1;
  s.full_b = full * p.y2;
  const double slow = 1.0 - std::exp(-p.rate_omitted() * t);
  const double fast = 1.0 - std::exp(-p.rate_kept() * t);
  s.omit1_a = slow * p.y1;
  s.omit1_b = fast * p.y2;
  s.omit2_a = fast * p.y1;
  s.omit2_b = slow * p.y2;
  return s;
}

double closed_form_delta(const TwoPointParams& p, double t) {
  p.validate();
  const double s2 = p.y1 * p.y1 + p.y2 * p.y2;
  // residual energy on the omitted axis decays at twice the weight rate
  return 0.25 * s2 * (std::exp(-2.0 * p.rate_omitted() * t) - std::exp(-t));
}

double closed_form_eps(const TwoPointParams& p, double t) {
  p.validate();
  const double s2 = p.y1 * p.y1 + p.y2 * p.y2;
  return s2 * std::exp(-t) / (4.0 * (static_cast<double>(p.n) - 1.0));
}

GramEigen closed_form_gram_eigen(const TwoPointParams& p, double t) {
  p.validate();
  if (t < 0.0) throw std::invalid_argument("closed_form_gram_eigen: negative time");
  const double c = p.contraction();
  const double n1 = static_cast<double>(p.n) - 1.0;
  GramEigen g;
  if (c == 0.0) {
    // n = 2: damping vanishes and both expressions turn t-linear
    g.span = (1.0 - std::exp(-t)) / (2.0 * n1);
    g.complement_lo = t / (2.0 * n1);
    g.complement_hi = t / n1;
    return g;
  }
  g.span = (0.5 / (1.0 - c)) / n1 * (std::exp(-c * t) - std::exp(-t));
  g.complement_lo = (1.0 - std::exp(-c * t)) / (2.0 * c * n1);
  g.complement_hi = (1.0 - std::exp(-c * t)) / (c * n1);
  return g;
}

ComparisonBounds comparison_bounds(const TwoPointParams& p) {
  p.validate();
  const double s2 = p.y1 * p.y1 + p.y2 * p.y2;
  ComparisonBounds b;
  b.weight_norm = std::sqrt(2.0 * s2 / static_cast<double>(p.n));
  b.accumulated_perturbation = s2 / (4.0 * (static_cast<double>(p.n) - 1.0));
  return b;
}

double perturbation_eps(const TwoPointParams& p, double t) {
  if (t < 0.0) throw std::invalid_argument("perturbation_eps: negative time");
  return t <= 1.0 ? p.eps0 : p.eps0 / (t * t);
}

std::vector<std::vector<double>> two_point_span(std::size_t n) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("two_point_span: n must be even, got " + std::to_string(n));
  const double v = std::sqrt(2.0 / static_cast<double>(n));
  std::vector<std::vector<double>> u(2, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n / 2; ++i) u[0][i] = v;
  for (std::size_t i = n / 2; i < n; ++i) u[1][i] = v;
  return u;
}

PerturbedBlocks two_point_perturbed_blocks(const TwoPointParams& p,
                                           const std::vector<double>& grid) {
  p.validate();
  if (p.n % 2 != 0)
    throw std::invalid_argument("two_point_perturbed_blocks: block layout needs even n");
  const std::size_t n = p.n;
  auto span = two_point_span(n);

  // P^e = (n/2) (u1 u1^T + u2 u2^T) + eps(t) (I - u1 u1^T - u2 u2^T)
  // A    = I - P^e / n
  PerturbedBlocks out;
  out.P.reserve(grid.size());
  out.A.reserve(grid.size());
  for (double t : grid) {
    const double eps = perturbation_eps(p, t);
    numkit::DenseMatrix P(n, n), A(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double proj = span[0][i] * span[0][j] + span[1][i] * span[1][j];
        const double comp = (i == j ? 1.0 : 0.0) - proj;
        const double pij = (static_cast<double>(n) / 2.0) * proj + eps * comp;
        P(i, j) = pij;
        A(i, j) = (i == j ? 1.0 : 0.0) - pij / static_cast<double>(n);
      }
    }
    out.P.push_back(std::move(P));
    out.A.push_back(std::move(A));
  }
  return out;
}

}  // namespace ggap::oracle
