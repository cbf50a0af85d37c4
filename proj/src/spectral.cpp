#include "ggap/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ggap::spectral {

std::vector<double> relative_index(std::size_t l, std::size_t n) {
  if (n == 0 || l > n) throw std::invalid_argument("relative_index: need 0 < l <= n");
  std::vector<double> out(l);
  for (std::size_t k = 0; k < l; ++k)
    out[k] = static_cast<double>(k + 1) / static_cast<double>(n);
  return out;
}

SpectralReport analyze(const numkit::DenseMatrix& K, const std::vector<double>& r0) {
  if (K.rows() != K.cols()) throw std::invalid_argument("spectral::analyze: K must be square");
  if (r0.size() != K.rows())
    throw std::invalid_argument("spectral::analyze: r0 has " + std::to_string(r0.size()) +
                                " entries, K is " + std::to_string(K.rows()) + " wide");
  const double rnorm = numkit::norm2(r0);
  if (rnorm <= 0.0) throw std::invalid_argument("spectral::analyze: zero residual");

  numkit::SymEigen eig = numkit::sym_eig(K);
  const std::size_t d = r0.size();

  SpectralReport rep;
  rep.sigma = eig.values;
  double total = 0.0;
  for (double s : rep.sigma) total += s;
  rep.sigma_mean = total / static_cast<double>(d);
  rep.relative_index = relative_index(d, d);

  rep.projection.resize(d);
  rep.explained_residual.resize(d);
  double acc_res = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double p = 0.0;
    for (std::size_t i = 0; i < d; ++i) p += r0[i] * eig.vectors(i, k);
    rep.projection[k] = std::abs(p) / rnorm;
    acc_res += (p * p) / (rnorm * rnorm);
    rep.explained_residual[k] = acc_res;
  }
  // the basis is complete, so the last entry is 1 up to rounding; pin it
  rep.explained_residual[d - 1] = 1.0;

  rep.explained_kernel.resize(d);
  // clamp rounding negatives so the curve stays monotone, and normalize by
  // the clamped total so it cannot overshoot 1 before the final entry
  double clamped_total = 0.0;
  for (double s : rep.sigma) clamped_total += std::max(s, 0.0);
  if (clamped_total > 0.0) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      acc += std::max(rep.sigma[k], 0.0);
      rep.explained_kernel[k] = acc / clamped_total;
    }
    rep.explained_kernel[d - 1] = 1.0;
  }
  return rep;
}

std::size_t tail_index_by_mass(const SpectralReport& rep, double mass_fraction) {
  std::size_t k = 0;
  while (k < rep.explained_kernel.size() && rep.explained_kernel[k] <= mass_fraction) ++k;
  return k;
}

}  // namespace ggap::spectral
