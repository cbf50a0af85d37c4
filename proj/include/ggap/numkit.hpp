#pragma once

// Small dense linear algebra kit: row-major matrices, a cyclic Jacobi
// eigensolver for symmetric matrices, matrix exponential via scaling and
// squaring, and trapezoidal quadrature. Everything is double precision and
// single threaded; callers own any parallelism.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ggap::numkit {

class DenseMatrix {
 public:
  DenseMatrix() : rows_(0), cols_(0) {}
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return a_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
};

// Shape mismatches are programming errors on the caller's side; they throw
// std::invalid_argument with the offending dimensions in the message.
DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix transpose(const DenseMatrix& A);
DenseMatrix add(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix sub(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix scale(const DenseMatrix& A, double s);
// A += s * B, in place to keep long accumulation loops allocation-free.
void axpy(DenseMatrix& A, double s, const DenseMatrix& B);
std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x);

double frob_norm(const DenseMatrix& A);
double max_abs(const DenseMatrix& A);
// Largest |eigenvalue| of a symmetric matrix (2-norm). Uses sym_eig.
double sym_two_norm(const DenseMatrix& A);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

struct SymEigen {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column k pairs with values[k]
};

// Cyclic Jacobi. Requires a square matrix that is symmetric up to sym_tol
// (measured entrywise against the matrix scale); the iteration itself runs on
// the symmetrized half. Eigenvalues come back ascending with matching
// eigenvector columns.
SymEigen sym_eig(const DenseMatrix& A, double sym_tol = 1e-9);

// exp(A) by scaling and squaring around a truncated power series. Target is
// ~1e-12 relative accuracy for spectral norms up to about 10, which covers
// every exponent this project produces (propagator generators are damped by
// 1/n and short time spans).
DenseMatrix mat_exp(const DenseMatrix& A);

// Trapezoid rule on an explicit grid. Grid must be strictly increasing and
// the same length as values (>= 1; a single point integrates to zero).
double trapezoid(const std::vector<double>& values, const std::vector<double>& grid);
// Cumulative form: out[k] = integral over grid[0..k]. out[0] = 0.
std::vector<double> cumulative_trapezoid(const std::vector<double>& values,
                                         const std::vector<double>& grid);

}  // namespace ggap::numkit
