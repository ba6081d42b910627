#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace istopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline void require_square(const Matrix& s, const char* who) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix is not square (" +
                                std::to_string(s.rows()) + "x" + std::to_string(s.cols()) + ")");
  }
}

inline void require_finite(const Matrix& s, const char* who) {
  if (!s.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
  }
}

}  // namespace detail

/// Symmetric part (S + S^T)/2.
inline Matrix sym(const Matrix& s) {
  detail::require_square(s, "sym");
  detail::require_finite(s, "sym");
  return 0.5 * (s + s.transpose());
}

/// Skew-symmetric part (S - S^T)/2.
inline Matrix skew(const Matrix& s) {
  detail::require_square(s, "skew");
  detail::require_finite(s, "skew");
  return 0.5 * (s - s.transpose());
}

/// Relative symmetry test: ||S - S^T||_F <= tol * max(1, ||S||_F).
inline bool is_symmetric(const Matrix& s, double tol = 1e-12) {
  if (s.rows() != s.cols()) return false;
  return (s - s.transpose()).norm() <= tol * std::max(1.0, s.norm());
}

struct SymEigResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal columns, S = Q diag(w) Q^T
};

/// Eigendecomposition of a symmetric matrix. Rejects asymmetric input.
inline SymEigResult sym_eig(const Matrix& s) {
  detail::require_square(s, "sym_eig");
  detail::require_finite(s, "sym_eig");
  if (!is_symmetric(s)) {
    throw std::invalid_argument("sym_eig: matrix is not symmetric to 1e-12 relative tolerance");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sym_eig: eigensolver failed to converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Matrix exponential by scaling-and-squaring with the degree-13 Pade
/// approximant and 1-norm based scaling.
inline Matrix mat_exp(const Matrix& s) {
  detail::require_square(s, "mat_exp");
  detail::require_finite(s, "mat_exp");
  const auto n = s.rows();
  const Matrix id = Matrix::Identity(n, n);
  if (n == 0) return Matrix(0, 0);

  // Pade coefficients for degree 13.
  static constexpr double b[] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = s.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  const Matrix a = s / std::ldexp(1.0, squarings);

  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a2 * a4;
  const Matrix u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 +
           b[1] * id);
  const Matrix v =
      a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  Matrix f = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) f = f * f;
  return f;
}

/// Solve SU + US = R for symmetric U, with S symmetric positive-definite.
/// Diagonalizes S = Q diag(w) Q^T and divides the rotated right-hand side
/// entrywise by w_i + w_j.
inline Matrix solve_lyapunov(const Matrix& s, const Matrix& r) {
  detail::require_square(s, "solve_lyapunov");
  detail::require_square(r, "solve_lyapunov");
  if (s.rows() != r.rows()) {
    throw std::invalid_argument("solve_lyapunov: S and R dimensions differ");
  }
  if (!is_symmetric(r)) {
    throw std::invalid_argument("solve_lyapunov: right-hand side is not symmetric");
  }
  const SymEigResult es = sym_eig(s);
  const double wmin = es.eigenvalues.minCoeff();
  if (wmin <= 0.0) {
    throw std::domain_error("solve_lyapunov: S is not positive definite (eigenvalue " +
                            std::to_string(wmin) + ")");
  }
  const Matrix& q = es.eigenvectors;
  const Matrix rt = q.transpose() * r * q;
  Matrix u(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      u(i, j) = rt(i, j) / (es.eigenvalues(i) + es.eigenvalues(j));
    }
  }
  return sym(q * u * q.transpose());
}

/// Seeded standard-normal matrix; entries drawn row-major.
inline Matrix random_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix z(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = dist(gen);
  }
  return z;
}

/// Haar-like random orthogonal matrix: QR of a seeded normal matrix with the
/// sign of R's diagonal folded into Q. Deterministic per seed.
inline Matrix random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("random_orthogonal: n must be >= 1");
  const Matrix z = random_normal(n, n, seed);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Vector rdiag = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (rdiag(j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Well-conditioned random SPD matrix, spectral norm scaled to 1.
inline Matrix random_spd(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("random_spd: n must be >= 1");
  const Matrix b = random_normal(n, n, seed);
  Matrix m = b.transpose() * b + static_cast<double>(n) * Matrix::Identity(n, n);
  m = sym(m);
  const SymEigResult es = sym_eig(m);
  return sym(m / es.eigenvalues.maxCoeff());
}

}  // namespace istopt
