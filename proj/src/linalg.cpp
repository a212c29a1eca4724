#include "metastable/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace metastable {

Mat transpose(const Mat& A) {
  Mat T(A.m, A.n);
  for (size_t i = 0; i < A.n; ++i)
    for (size_t j = 0; j < A.m; ++j) T(j, i) = A(i, j);
  return T;
}

Mat matmul(const Mat& A, const Mat& B) {
  Mat C(A.n, B.m);
  for (size_t i = 0; i < A.n; ++i)
    for (size_t k = 0; k < A.m; ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      for (size_t j = 0; j < B.m; ++j) C(i, j) += aik * B(k, j);
    }
  return C;
}

Vec matvec(const Mat& A, const Vec& x) {
  Vec y(A.n, 0.0);
  for (size_t i = 0; i < A.n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < A.m; ++j) s += A(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Mat add(const Mat& A, const Mat& B, double sb) {
  Mat C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += sb * B.a[i];
  return C;
}

double max_abs(const Mat& A) {
  double m = 0.0;
  for (double v : A.a) m = std::max(m, std::fabs(v));
  return m;
}

Vec lu_solve(Mat A, Vec b) {
  const size_t n = A.n;
  double scale = max_abs(A);
  if (scale == 0.0) throw NumericError("lu_solve: zero matrix");
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::fabs(A(r, col)) > std::fabs(A(piv, col))) piv = r;
    if (std::fabs(A(piv, col)) < 1e-14 * scale)
      throw NumericError("lu_solve: singular system (pivot below threshold)");
    if (piv != col) {
      for (size_t j = 0; j < n; ++j) std::swap(A(piv, j), A(col, j));
      std::swap(b[piv], b[col]);
    }
    for (size_t r = col + 1; r < n; ++r) {
      const double f = A(r, col) / A(col, col);
      if (f == 0.0) continue;
      for (size_t j = col; j < n; ++j) A(r, j) -= f * A(col, j);
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (size_t i = n; i-- > 0;) {
    double s = b[i];
    for (size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

double determinant(Mat A) {
  const size_t n = A.n;
  double det = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::fabs(A(r, col)) > std::fabs(A(piv, col))) piv = r;
    if (A(piv, col) == 0.0) return 0.0;
    if (piv != col) {
      for (size_t j = 0; j < n; ++j) std::swap(A(piv, j), A(col, j));
      det = -det;
    }
    det *= A(col, col);
    for (size_t r = col + 1; r < n; ++r) {
      const double f = A(r, col) / A(col, col);
      for (size_t j = col; j < n; ++j) A(r, j) -= f * A(col, j);
    }
  }
  return det;
}

SymEigen jacobi_eigen(const Mat& A0) {
  const size_t n = A0.n;
  Mat A = A0;
  Mat V = Mat::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-30 * (1.0 + max_abs(A0) * max_abs(A0))) break;
    for (size_t p = 0; p < n; ++p)
      for (size_t q = p + 1; q < n; ++q) {
        if (std::fabs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t i, size_t j) { return A(i, i) < A(j, j); });
  SymEigen out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (size_t k = 0; k < n; ++k) {
    out.values[k] = A(order[k], order[k]);
    for (size_t i = 0; i < n; ++i) out.vectors(i, k) = V(i, order[k]);
  }
  return out;
}

Vec char_poly(const Mat& A) {
  const size_t n = A.n;
  // Faddeev-LeVerrier: M_1 = A, c_{n-1} = -tr M_1,
  // M_k = A (M_{k-1} + c_{n-k+1} I), c_{n-k} = -tr(M_k)/k.
  Vec c(n, 0.0);
  Mat M = A;
  double ck = 0.0;
  for (size_t k = 1; k <= n; ++k) {
    if (k > 1) {
      Mat T = M;
      for (size_t i = 0; i < n; ++i) T(i, i) += ck;
      M = matmul(A, T);
    }
    double tr = 0.0;
    for (size_t i = 0; i < n; ++i) tr += M(i, i);
    ck = -tr / static_cast<double>(k);
    c[n - k] = ck;
  }
  return c;
}

std::vector<std::complex<double>> poly_roots(const Vec& coeffs) {
  using cd = std::complex<double>;
  const size_t n = coeffs.size();
  if (n == 0) return {};
  double radius = 1.0;
  for (double c : coeffs) radius = std::max(radius, 1.0 + std::fabs(c));
  std::vector<cd> z(n);
  // deterministic non-symmetric start angles
  for (size_t k = 0; k < n; ++k)
    z[k] = std::polar(radius * 0.7, 0.4 + 2.0 * M_PI * k / static_cast<double>(n));
  auto eval = [&](cd x) {
    cd p = 1.0;
    for (size_t i = n; i-- > 0;) p = p * x + coeffs[i];
    return p;
  };
  for (int iter = 0; iter < 600; ++iter) {
    double shift = 0.0;
    for (size_t k = 0; k < n; ++k) {
      cd denom = 1.0;
      for (size_t j = 0; j < n; ++j)
        if (j != k) denom *= (z[k] - z[j]);
      cd dz = eval(z[k]) / denom;
      z[k] -= dz;
      shift = std::max(shift, std::abs(dz));
    }
    if (shift < 1e-15 * radius) break;
  }
  std::sort(z.begin(), z.end(), [](cd a, cd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return z;
}

std::vector<std::complex<double>> eigenvalues(const Mat& A) {
  return poly_roots(char_poly(A));
}

Vec eigenvector_for(const Mat& A, double lambda) {
  const size_t n = A.n;
  const double scale = std::max(1.0, max_abs(A));
  Vec x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double shift = lambda;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Mat B = A;
    for (size_t i = 0; i < n; ++i) B(i, i) -= shift;
    bool ok = true;
    for (int it = 0; it < 60; ++it) {
      Vec y;
      try {
        y = lu_solve(B, x);
      } catch (const NumericError&) {
        ok = false;
        break;
      }
      const double nrm = norm2(y);
      if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        ok = false;
        break;
      }
      for (size_t i = 0; i < n; ++i) y[i] /= nrm;
      double diff = 0.0;
      for (size_t i = 0; i < n; ++i)
        diff = std::max(diff, std::fabs(std::fabs(y[i]) - std::fabs(x[i])));
      x = y;
      if (diff < 1e-15) break;
    }
    if (ok) {
      Vec r = matvec(A, x);
      double res = 0.0;
      for (size_t i = 0; i < n; ++i) res = std::max(res, std::fabs(r[i] - lambda * x[i]));
      if (res < 1e-9 * scale) return x;
    }
    // exactly singular shift or stagnation: nudge and retry
    shift = lambda + scale * 1e-11 * static_cast<double>(attempt + 1);
  }
  throw NumericError("eigenvector_for: inverse iteration failed to converge");
}

}  // namespace metastable
