#include "ggap/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ggap::numkit {

namespace {

[[noreturn]] void shape_error(const std::string& op, const DenseMatrix& A, const DenseMatrix& B) {
  throw std::invalid_argument(op + ": shape mismatch " + std::to_string(A.rows()) + "x" +
                              std::to_string(A.cols()) + " vs " + std::to_string(B.rows()) + "x" +
                              std::to_string(B.cols()));
}

}  // namespace

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  DenseMatrix C(A.rows(), B.cols());
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  // ikj order so the inner loop streams over contiguous rows of B and C.
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = C.data() + i * m;
    const double* ai = A.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = ai[p];
      if (a == 0.0) continue;
      const double* bp = B.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += a * bp[j];
    }
  }
  return C;
}

DenseMatrix transpose(const DenseMatrix& A) {
  DenseMatrix T(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  return T;
}

DenseMatrix add(const DenseMatrix& A, const DenseMatrix& B) {
  if (!A.same_shape(B)) shape_error("add", A, B);
  DenseMatrix C = A;
  for (std::size_t i = 0; i < C.rows() * C.cols(); ++i) C.data()[i] += B.data()[i];
  return C;
}

DenseMatrix sub(const DenseMatrix& A, const DenseMatrix& B) {
  if (!A.same_shape(B)) shape_error("sub", A, B);
  DenseMatrix C = A;
  for (std::size_t i = 0; i < C.rows() * C.cols(); ++i) C.data()[i] -= B.data()[i];
  return C;
}

DenseMatrix scale(const DenseMatrix& A, double s) {
  DenseMatrix C = A;
  for (std::size_t i = 0; i < C.rows() * C.cols(); ++i) C.data()[i] *= s;
  return C;
}

void axpy(DenseMatrix& A, double s, const DenseMatrix& B) {
  if (!A.same_shape(B)) shape_error("axpy", A, B);
  double* a = A.data();
  const double* b = B.data();
  for (std::size_t i = 0; i < A.rows() * A.cols(); ++i) a[i] += s * b[i];
}

std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x) {
  if (A.cols() != x.size())
    throw std::invalid_argument("matvec: " + std::to_string(A.cols()) + " cols vs vector of " +
                                std::to_string(x.size()));
  std::vector<double> y(A.rows(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double* ai = A.data() + i * A.cols();
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

double frob_norm(const DenseMatrix& A) {
  double s = 0.0;
  for (std::size_t i = 0; i < A.rows() * A.cols(); ++i) s += A.data()[i] * A.data()[i];
  return std::sqrt(s);
}

double max_abs(const DenseMatrix& A) {
  double m = 0.0;
  for (std::size_t i = 0; i < A.rows() * A.cols(); ++i) m = std::max(m, std::abs(A.data()[i]));
  return m;
}

double sym_two_norm(const DenseMatrix& A) {
  if (A.rows() == 0) return 0.0;
  SymEigen e = sym_eig(A);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

SymEigen sym_eig(const DenseMatrix& A, double sym_tol) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("sym_eig: matrix is " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + ", need square");
  const std::size_t n = A.rows();

  double scale = max_abs(A);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(A(i, j) - A(j, i)) > sym_tol * std::max(1.0, scale))
        throw std::invalid_argument("sym_eig: matrix not symmetric at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");

  // Work on the symmetrized copy so tiny asymmetries cannot bias the sweep.
  DenseMatrix S(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) S(i, j) = 0.5 * (A(i, j) + A(j, i));
  DenseMatrix V = DenseMatrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += S(i, j) * S(i, j);
    return std::sqrt(2.0 * s);
  };

  const double stop = 1e-14 * std::max(1.0, frob_norm(S));
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_norm() > stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = S(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = S(p, p), aqq = S(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        // Smaller-magnitude tangent root keeps the rotation angle <= pi/4.
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = S(k, p), skq = S(k, q);
          S(k, p) = c * skp - s * skq;
          S(k, q) = s * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = S(p, k), sqk = S(q, k);
          S(p, k) = c * spk - s * sqk;
          S(q, k) = s * spk + c * sqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // stable_sort keeps the sweep's own ordering for ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return S(a, a) < S(b, b); });

  SymEigen out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = S(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = V(i, order[k]);
  }
  return out;
}

DenseMatrix mat_exp(const DenseMatrix& A) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("mat_exp: matrix is " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + ", need square");
  const std::size_t n = A.rows();
  if (n == 0) return DenseMatrix();

  // 1-norm drives the scaling; it bounds the 2-norm well enough here.
  double one_norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += std::abs(A(i, j));
    one_norm = std::max(one_norm, col);
  }

  int squarings = 0;
  double target = 0.25;
  if (one_norm > target) {
    squarings = static_cast<int>(std::ceil(std::log2(one_norm / target)));
    squarings = std::min(squarings, 64);
  }
  DenseMatrix As = scale(A, std::ldexp(1.0, -squarings));

  // Power series on the scaled matrix. With norm <= 0.25 the terms drop below
  // 2^-80 after ~20 terms, so the truncation test is cheap insurance.
  DenseMatrix result = DenseMatrix::identity(n);
  DenseMatrix term = DenseMatrix::identity(n);
  for (int k = 1; k <= 40; ++k) {
    term = scale(matmul(term, As), 1.0 / k);
    axpy(result, 1.0, term);
    if (max_abs(term) < 1e-18 * std::max(1.0, max_abs(result))) break;
  }
  for (int k = 0; k < squarings; ++k) result = matmul(result, result);
  return result;
}

double trapezoid(const std::vector<double>& values, const std::vector<double>& grid) {
  if (values.size() != grid.size())
    throw std::invalid_argument("trapezoid: " + std::to_string(values.size()) + " values vs " +
                                std::to_string(grid.size()) + " grid points");
  if (grid.empty()) throw std::invalid_argument("trapezoid: empty grid");
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];
    if (h <= 0.0)
      throw std::invalid_argument("trapezoid: grid not increasing at index " + std::to_string(k));
    s += 0.5 * h * (values[k] + values[k + 1]);
  }
  return s;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& values,
                                         const std::vector<double>& grid) {
  if (values.size() != grid.size())
    throw std::invalid_argument("cumulative_trapezoid: length mismatch");
  if (grid.empty()) throw std::invalid_argument("cumulative_trapezoid: empty grid");
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];
    if (h <= 0.0)
      throw std::invalid_argument("cumulative_trapezoid: grid not increasing at index " +
                                  std::to_string(k));
    out[k + 1] = out[k] + 0.5 * h * (values[k] + values[k + 1]);
  }
  return out;
}

}  // namespace ggap::numkit
