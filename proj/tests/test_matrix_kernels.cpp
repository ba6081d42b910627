#include <catch2/catch_amalgamated.hpp>

#include "istopt/matrix_kernels.hpp"

using namespace istopt;

TEST_CASE("sym and skew split a square matrix exactly") {
  Matrix s(2, 2);
  s << 0, 2, 0, 0;
  Matrix expected_sym(2, 2), expected_skew(2, 2);
  expected_sym << 0, 1, 1, 0;
  expected_skew << 0, 1, -1, 0;
  REQUIRE((sym(s) - expected_sym).norm() == 0.0);
  REQUIRE((skew(s) - expected_skew).norm() == 0.0);

  REQUIRE((sym(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() == 0.0);

  const Matrix sm = sym(random_normal(4, 4, 11));
  REQUIRE(skew(sm).norm() == 0.0);

  // oracle: one add and one halve per entry
  const Matrix r = random_normal(5, 5, 3);
  const Matrix oracle = 0.5 * (r + r.transpose());
  REQUIRE((sym(r) - oracle).norm() == 0.0);
  REQUIRE((skew(r) - 0.5 * (r - r.transpose())).norm() == 0.0);

  // exact reassembly for every square input
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix z = random_normal(6, 6, seed);
    REQUIRE((sym(z) + skew(z) - z).norm() == 0.0);
  }

  REQUIRE_THROWS_AS(sym(random_normal(3, 4, 0)), std::invalid_argument);
  REQUIRE_THROWS_AS(skew(random_normal(3, 4, 0)), std::invalid_argument);
}

TEST_CASE("sym_eig reconstructs and orders") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 3, 1, 2;
  const SymEigResult es = sym_eig(d);
  REQUIRE(es.eigenvalues(0) == Catch::Approx(1.0));
  REQUIRE(es.eigenvalues(1) == Catch::Approx(2.0));
  REQUIRE(es.eigenvalues(2) == Catch::Approx(3.0));

  const SymEigResult id = sym_eig(Matrix::Identity(4, 4));
  REQUIRE((id.eigenvalues - Vector::Ones(4)).norm() < 1e-14);

  const Matrix s = sym(random_normal(10, 10, 7));
  const SymEigResult r = sym_eig(s);
  const Matrix rec = r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose();
  REQUIRE((rec - s).norm() / s.norm() < 1e-12);
  REQUIRE((r.eigenvectors.transpose() * r.eigenvectors - Matrix::Identity(10, 10)).norm() <
          1e-12);

  Matrix bad = random_normal(4, 4, 1);
  bad(0, 1) += 1.0;
  bad(1, 0) -= 1.0;
  REQUIRE_THROWS_AS(sym_eig(bad), std::invalid_argument);
}

TEST_CASE("mat_exp basics") {
  REQUIRE((mat_exp(Matrix::Zero(4, 4)) - Matrix::Identity(4, 4)).norm() < 1e-15);

  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << -1.0, 0.5, 2.0;
  Matrix ed = Matrix::Zero(3, 3);
  ed.diagonal() << std::exp(-1.0), std::exp(0.5), std::exp(2.0);
  REQUIRE((mat_exp(d) - ed).norm() < 1e-13);

  // exp of a skew-symmetric matrix is orthogonal
  const Matrix omega = skew(random_normal(6, 6, 9));
  const Matrix q = mat_exp(omega);
  REQUIRE((q.transpose() * q - Matrix::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("mat_exp inverse identity for moderate norms") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Matrix s = random_normal(5, 5, 100 + seed);
    if (s.norm() > 5.0) s *= 5.0 / s.norm();
    const Matrix prod = mat_exp(s) * mat_exp(-s);
    REQUIRE((prod - Matrix::Identity(5, 5)).norm() < 1e-10);
  }
}

TEST_CASE("solve_lyapunov special cases") {
  const Matrix r = sym(random_normal(4, 4, 21));
  // S = I forces 2U = R
  const Matrix u1 = solve_lyapunov(Matrix::Identity(4, 4), r);
  REQUIRE((u1 - 0.5 * r).norm() < 1e-14);

  // diagonal S: U_ij = R_ij / (s_i + s_j), checked through the residual
  Matrix s = Matrix::Zero(4, 4);
  s.diagonal() << 1.0, 2.0, 3.0, 4.5;
  const Matrix u2 = solve_lyapunov(s, r);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      REQUIRE(u2(i, j) == Catch::Approx(r(i, j) / (s(i, i) + s(j, j))).margin(1e-13));
    }
  }
  REQUIRE((s * u2 + u2 * s - r).norm() <= 1e-12 * r.norm());

  const Matrix spd = random_spd(4, 5) * 3.0;
  const Matrix u3 = solve_lyapunov(spd, r);
  REQUIRE((spd * u3 + u3 * spd - r).norm() <= 1e-12 * r.norm());
}

TEST_CASE("solve_lyapunov rejects non-SPD S naming the eigenvalue") {
  Matrix s = Matrix::Identity(3, 3);
  s(2, 2) = -2.0;
  const Matrix r = sym(random_normal(3, 3, 2));
  try {
    solve_lyapunov(s, r);
    FAIL("expected domain_error");
  } catch (const std::domain_error& e) {
    REQUIRE(std::string(e.what()).find("-2.0") != std::string::npos);
  }
}

TEST_CASE("solve_lyapunov residual and symmetry over random pairs") {
  // 250 pairs per size p in {1, 2, 4, 8}
  for (int p : {1, 2, 4, 8}) {
    for (std::uint64_t k = 0; k < 250; ++k) {
      const std::uint64_t seed = 1000 * static_cast<std::uint64_t>(p) + k;
      const Matrix s = random_spd(p, seed) + 0.1 * Matrix::Identity(p, p);
      const Matrix r = sym(random_normal(p, p, seed + 500000));
      const Matrix u = solve_lyapunov(s, r);
      REQUIRE((u - u.transpose()).norm() == 0.0);
      REQUIRE((s * u + u * s - r).norm() <= 1e-12 * std::max(1.0, r.norm()));
    }
  }
}

TEST_CASE("random_orthogonal is orthogonal and deterministic") {
  const Matrix q1 = random_orthogonal(1, 4);
  REQUIRE(std::abs(std::abs(q1(0, 0)) - 1.0) < 1e-15);

  REQUIRE((random_orthogonal(7, 42) - random_orthogonal(7, 42)).norm() == 0.0);

  const Matrix q = random_orthogonal(10, 123);
  REQUIRE((q.transpose() * q - Matrix::Identity(10, 10)).norm() < 1e-12);
}

TEST_CASE("random_spd is positive definite and deterministic") {
  const Matrix m1 = random_spd(1, 8);
  REQUIRE(m1(0, 0) > 0.0);

  const Matrix m = random_spd(9, 17);
  REQUIRE((m - m.transpose()).norm() == 0.0);
  REQUIRE(sym_eig(m).eigenvalues.minCoeff() > 0.0);

  REQUIRE((random_spd(6, 5) - random_spd(6, 5)).norm() == 0.0);
}
