#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "istopt/oracles.hpp"

using namespace istopt;
using istopt_test::test_spec;

TEST_CASE("null_complement spans the orthogonal complement of range(X)") {
  const SpecPtr spec = test_spec(MetricKind::Canonical1, 1.0);
  const WorkspacePtr w = random_point(spec, 1);
  const NullComplement nc = null_complement(*w);
  REQUIRE(nc.Xperp.cols() == 6);
  REQUIRE((w->X.transpose() * nc.Xperp).norm() < 1e-12);
  REQUIRE((nc.Xperp.transpose() * nc.Xperp - Matrix::Identity(6, 6)).norm() < 1e-12);

  // n = p: empty complement
  const SpecPtr square = make_spec(3, 3, Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  const WorkspacePtr ws = random_point(square, 2);
  REQUIRE(null_complement(*ws).Xperp.cols() == 0);
}

TEST_CASE("resolution-of-identity residual is small on the benchmark geometry") {
  const SpecPtr spec = test_spec(MetricKind::Canonical1, 1.0);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 12 && checked < 10; ++seed) {
    const WorkspacePtr w = random_point(spec, seed);
    try {
      REQUIRE(check_identity_residual(*w, null_complement(*w)) < 1e-9);
      ++checked;
    } catch (const std::domain_error&) {
      // ill-conditioned middle factor for this sample; resample
    }
  }
  REQUIRE(checked >= 10);
}

TEST_CASE("identity reduces to complementary projectors when A = I") {
  const SpecPtr st = istopt_test::stiefel_spec(MetricKind::Canonical1, 1.0);
  const WorkspacePtr w = random_point(st, 3);
  REQUIRE(check_identity_residual(*w, null_complement(*w)) < 1e-12);
}

TEST_CASE("complement-form inverses equal the simplified closed forms") {
  {
    const SpecPtr spec = test_spec(MetricKind::Canonical1, 1.5);
    const WorkspacePtr w = random_point(spec, 4);
    const Matrix via = inverse1_via_complement(*w, null_complement(*w));
    const Matrix g = metric_matrix_at(*spec, w->X);
    REQUIRE((via * g - Matrix::Identity(10, 10)).norm() < 1e-9);
    // and matches the factored inverse action
    const Matrix v = random_normal(10, 4, 9);
    REQUIRE((via * v - metric_inverse_apply(*w, v)).norm() < 1e-9);
  }
  {
    const SpecPtr spec = test_spec(MetricKind::Canonical2, 0.5);
    const WorkspacePtr w = random_point(spec, 5);
    const Matrix via = inverse2_via_complement(*w, null_complement(*w));
    const Matrix g = metric_matrix_at(*spec, w->X);
    REQUIRE((via * g - Matrix::Identity(10, 10)).norm() < 1e-9);
    const Matrix v = random_normal(10, 4, 10);
    REQUIRE((via * v - metric_inverse_apply(*w, v)).norm() < 1e-9);
  }
}

TEST_CASE("fd_dmetric differentiates the linear metric component exactly") {
  // For G^(2) the rho^{-1} A X X^T A part has derivative
  // (2/rho) A sym(X zeta^T) A; difference it in isolation.
  const SpecPtr spec = test_spec(MetricKind::Canonical2, 1.0);
  const WorkspacePtr w = random_point(spec, 6);
  const Matrix& a = spec->A;
  const auto part = [&](const Matrix& x) {
    return Matrix(a * x * x.transpose() * a / spec->rho);
  };
  const Matrix zeta = random_normal(10, 4, 11);
  const double h = 1e-5;
  const Matrix fd = (part(w->X + h * zeta) - part(w->X - h * zeta)) / (2.0 * h);
  const Matrix analytic = (2.0 / spec->rho) * a * sym(w->X * zeta.transpose()) * a;
  REQUIRE((fd - analytic).norm() < 1e-9 * analytic.norm());
}

TEST_CASE("fd_dmetric converges at second order") {
  for (auto metric : {MetricKind::Canonical1, MetricKind::Canonical2}) {
    const SpecPtr spec = test_spec(metric, 1.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const WorkspacePtr w = random_point(spec, 20 + s);
      const Matrix zeta = random_normal(10, 4, 30 + s);
      const Matrix analytic = dmetric(*w, zeta);
      const double e1 = (fd_dmetric(*w, zeta, 2e-4) - analytic).norm();
      const double e2 = (fd_dmetric(*w, zeta, 1e-4) - analytic).norm();
      // halving h shrinks the error by about 4; allow generous slack
      REQUIRE(e2 < 0.4 * e1 + 1e-12 * analytic.norm());
    }
  }
}

TEST_CASE("fd_dmetric edge cases") {
  const SpecPtr spec = test_spec(MetricKind::Canonical1, 1.0);
  const WorkspacePtr w = random_point(spec, 7);
  REQUIRE(fd_dmetric(*w, Matrix::Zero(10, 4), 1e-5).norm() == 0.0);
  // a step large enough to leave the ambient domain must be refused
  REQUIRE_THROWS_AS(fd_dmetric(*w, w->X, 1.0), std::domain_error);
}

TEST_CASE("fd_adjoint_assembly satisfies the defining pairing") {
  for (auto metric : {MetricKind::Canonical1, MetricKind::Canonical2}) {
    const SpecPtr spec = test_spec(metric, 1.0);
    const WorkspacePtr w = random_point(spec, 8);

    REQUIRE(fd_adjoint_assembly(*w, Matrix::Zero(10, 10)).norm() == 0.0);

    const Matrix h = sym(random_normal(10, 10, 40));
    const Matrix assembled = fd_adjoint_assembly(*w, h);
    for (std::uint64_t k = 0; k < 20; ++k) {
      const Matrix z = random_normal(10, 4, 50 + k);
      const double lhs = inner(*w, assembled, z);
      const double rhs = h.cwiseProduct(dmetric(*w, z)).sum();
      REQUIRE(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(rhs)));
    }

    for (std::uint64_t k = 0; k < 20; ++k) {
      const Matrix hh = sym(random_normal(10, 10, 90 + k));
      REQUIRE((fd_adjoint_assembly(*w, hh) - dmetric_adjoint(*w, hh)).norm() <=
              1e-8 * std::max(1.0, hh.norm()));
    }
  }
}

TEST_CASE("oracle_hessian: zero input and self-adjointness") {
  const Matrix m = random_spd(10, 2);
  const SpecPtr spec = test_spec(MetricKind::Canonical1, 1.0);
  const WorkspacePtr w = random_point(spec, 9);
  const EuclideanDerivatives derivs = istopt_test::trace_derivs(m, w->X);

  const TangentVector zero{Matrix::Zero(10, 4), w};
  REQUIRE(oracle_hessian(w, derivs, zero).xi.norm() < 1e-9);

  for (std::uint64_t k = 0; k < 5; ++k) {
    const TangentVector xi = random_tangent(w, 100 + k);
    const TangentVector eta = random_tangent(w, 200 + k);
    const double lhs = inner(*w, oracle_hessian(w, derivs, xi).xi, eta.xi);
    const double rhs = inner(*w, xi.xi, oracle_hessian(w, derivs, eta).xi);
    REQUIRE(std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("dense_generalized_eig") {
  // A = I reduces to the ordinary symmetric problem
  const Matrix m = random_spd(6, 3);
  const GeneralizedEigResult plain = dense_generalized_eig(m, Matrix::Identity(6, 6));
  const SymEigResult direct = sym_eig(m);
  REQUIRE((plain.eigenvalues - direct.eigenvalues).norm() < 1e-10);

  // indefinite A from the benchmark geometry
  const SpecPtr spec = test_spec(MetricKind::Canonical1, 1.0);
  const Matrix mb = random_spd(10, 5);
  const GeneralizedEigResult gen = dense_generalized_eig(mb, spec->A);
  for (int i = 0; i < 10; ++i) {
    const Vector v = gen.eigenvectors.col(i);
    const double lambda = gen.eigenvalues(i);
    REQUIRE((mb * v - lambda * spec->A * v).norm() <=
            1e-10 * std::max(1.0, (mb * v).norm()));
    REQUIRE(std::isfinite(lambda));  // all eigenvalues real for SPD M
  }

  REQUIRE_THROWS_AS(dense_generalized_eig(random_normal(4, 4, 1), Matrix::Identity(4, 4)),
                    std::invalid_argument);
}
