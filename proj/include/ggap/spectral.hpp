#pragma once

// Spectrum statistics of the effective kernel and alignment of the initial
// residual with its eigenbasis. Eigenvalues are kept ascending throughout so
// "tail" always means the small end.

#include <vector>

#include "ggap/numkit.hpp"

namespace ggap::spectral {

struct SpectralReport {
  std::vector<double> sigma;               // ascending
  double sigma_mean = 0.0;                 // plain mean over all entries
  std::vector<double> relative_index;      // k/n for k = 1..l
  std::vector<double> projection;          // |r^T u_k| / ||r||
  std::vector<double> explained_residual;  // ||r^T U_{1..k}||^2 / ||r||^2, cumulative
  std::vector<double> explained_kernel;    // sum_{1..k} sigma / sum sigma, cumulative
};

// Decompose K (symmetric) and score the residual against its eigenbasis.
// r0 must have matching length and nonzero norm.
SpectralReport analyze(const numkit::DenseMatrix& K, const std::vector<double>& r0);

std::vector<double> relative_index(std::size_t l, std::size_t n);

// Largest k with explained_kernel[k-1] <= mass_fraction (0 if none): the
// size of the small-eigenvalue tail holding at most that share of the
// spectrum's mass.
std::size_t tail_index_by_mass(const SpectralReport& rep, double mass_fraction);

}  // namespace ggap::spectral
