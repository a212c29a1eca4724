#pragma once

#include <complex>
#include <vector>

#include "metastable/common.hpp"

namespace metastable {

// Dense row-major matrix. Everything in this project is small: d x d field
// Jacobians (d <= 4 in practice) and chain Laplacians (a few dozen states).
struct Mat {
  size_t n = 0, m = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(size_t rows, size_t cols, double fill = 0.0) : n(rows), m(cols), a(rows * cols, fill) {}

  double& operator()(size_t i, size_t j) { return a[i * m + j]; }
  double operator()(size_t i, size_t j) const { return a[i * m + j]; }

  static Mat identity(size_t k) {
    Mat I(k, k);
    for (size_t i = 0; i < k; ++i) I(i, i) = 1.0;
    return I;
  }
};

Mat transpose(const Mat& A);
Mat matmul(const Mat& A, const Mat& B);
Vec matvec(const Mat& A, const Vec& x);
Mat add(const Mat& A, const Mat& B, double sb = 1.0);
double max_abs(const Mat& A);

// Gaussian elimination with partial pivoting. Throws NumericError on a
// numerically singular system.
Vec lu_solve(Mat A, Vec b);

// Determinant via the same elimination.
double determinant(Mat A);

struct SymEigen {
  Vec values;          // ascending
  Mat vectors;         // column k is the unit eigenvector for values[k]
};

// Cyclic Jacobi rotations; input must be symmetric.
SymEigen jacobi_eigen(const Mat& A);

// Characteristic polynomial coefficients by Faddeev-LeVerrier:
// p(t) = t^n + c[n-1] t^(n-1) + ... + c[0].
Vec char_poly(const Mat& A);

// All roots of a monic polynomial (coefficients as above) by the
// Durand-Kerner iteration. Adequate for the small, well-separated spectra
// handled here.
std::vector<std::complex<double>> poly_roots(const Vec& coeffs);

// Eigenvalues of a general real matrix via char_poly + poly_roots.
std::vector<std::complex<double>> eigenvalues(const Mat& A);

// Unit eigenvector for a known real eigenvalue, by inverse iteration.
Vec eigenvector_for(const Mat& A, double lambda);

}  // namespace metastable
