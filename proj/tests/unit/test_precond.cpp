#include <doctest.h>

#include <algorithm>

#include "mrcg/precond.hpp"
#include "support.hpp"

using namespace mrcg;
using namespace testing;

namespace {

// L (unit diagonal added) and U as dense matrices.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dense_lu(const IluFactors& f) {
  Eigen::MatrixXd l = dense(f.lower);
  l += Eigen::MatrixXd::Identity(l.rows(), l.cols());
  return {l, dense(f.upper)};
}

SparseSymMatrix tridiagonal(Gen& g, std::size_t n) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, g.uniform(3.0, 6.0) * (g.coin() ? 1.0 : -1.0)});
    if (i > 0) t.push_back({i, i - 1, g.uniform(-1.0, 1.0)});
  }
  return SparseSymMatrix::from_triangle(n, t);
}

DeflationBasis unit_basis(std::size_t n, std::size_t index, double lambda) {
  DeflationBasis b{DenseColumnBlock(n, 1), Vector{lambda}, Vector{0.0}};
  b.vectors(index, 0) = 1.0;
  return b;
}

}  // namespace

TEST_SUITE("ilu") {

TEST_CASE("ilu0 examples") {
  SUBCASE("diagonal") {
    const auto f = ilu0(sym(Eigen::Vector2d(2, 3).asDiagonal().toDenseMatrix()));
    const auto [l, u] = dense_lu(f);
    CHECK(l.isApprox(Eigen::Matrix2d::Identity()));
    CHECK(u(0, 0) == 2.0);
    CHECK(u(1, 1) == 3.0);
    CHECK(u(0, 1) == 0.0);
  }
  SUBCASE("2x2 with no fill") {
    Eigen::Matrix2d a{{4, 1}, {1, 4}};
    const auto [l, u] = dense_lu(ilu0(sym(a)));
    CHECK(l(1, 0) == doctest::Approx(0.25));
    CHECK(u(0, 0) == 4.0);
    CHECK(u(0, 1) == 1.0);
    CHECK(u(1, 1) == doctest::Approx(3.75));
    CHECK(u(1, 0) == 0.0);
  }
  SUBCASE("zero pivot names the first row") {
    Eigen::Matrix2d a{{0, 1}, {1, 0}};
    try {
      ilu0(sym(a));
      FAIL("expected ZeroPivotError");
    } catch (const ZeroPivotError& e) {
      CHECK(e.row() == 0);
      CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
  }
}

TEST_CASE("ilu0 is exact when the pattern admits no fill") {
  Gen g(101);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = tridiagonal(g, g.index(2, 40));
    const auto [l, u] = dense_lu(ilu0(a));
    const Eigen::MatrixXd ad = dense(a);
    CHECK((l * u - ad).norm() <= 1e-12 * ad.norm());
    // Factors stay on the pattern of A.
    for (Eigen::Index i = 0; i < ad.rows(); ++i)
      for (Eigen::Index j = 0; j < ad.cols(); ++j)
        if (ad(i, j) == 0.0) CHECK((l(i, j) == 0.0 && u(i, j) == 0.0));
  }
}

TEST_CASE("ilu0 matches the dense incomplete elimination oracle") {
  // Gaussian elimination restricted to the pattern of A.
  Gen g(102);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.index(3, 30);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      a(i, i) = g.uniform(4.0, 8.0);
      for (std::size_t j = 0; j < i; ++j)
        if (g.coin(0.2)) a(i, j) = a(j, i) = g.uniform(-1.0, 1.0);
    }
    Eigen::MatrixXd w = a;
    const auto m = static_cast<Eigen::Index>(n);
    for (Eigen::Index i = 1; i < m; ++i)
      for (Eigen::Index k = 0; k < i; ++k) {
        if (a(i, k) == 0.0) continue;
        w(i, k) /= w(k, k);
        for (Eigen::Index j = k + 1; j < m; ++j)
          if (a(i, j) != 0.0) w(i, j) -= w(i, k) * w(k, j);
      }
    const auto [l, u] = dense_lu(ilu0(sym(a)));
    const Eigen::MatrixXd ref_l = w.triangularView<Eigen::StrictlyLower>().toDenseMatrix() +
                                  Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd ref_u = w.triangularView<Eigen::Upper>();
    CHECK((l - ref_l).norm() <= 1e-12 * ref_l.norm());
    CHECK((u - ref_u).norm() <= 1e-12 * ref_u.norm());
  }
}

TEST_CASE("ilut examples") {
  Gen g(103);
  SUBCASE("zero tolerance without fill equals ilu0") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = tridiagonal(g, g.index(2, 30));
      const auto [l0, u0] = dense_lu(ilu0(a));
      const auto [l1, u1] = dense_lu(ilut(a, 0.0, false));
      CHECK((l0 - l1).norm() <= 1e-14 * l0.norm());
      CHECK((u0 - u1).norm() <= 1e-14 * u0.norm());
    }
  }
  SUBCASE("identity, modified") {
    const auto [l, u] = dense_lu(ilut(sym(Eigen::MatrixXd::Identity(4, 4)), 0.5, true));
    CHECK(l.isApprox(Eigen::MatrixXd::Identity(4, 4)));
    CHECK(u.isApprox(Eigen::MatrixXd::Identity(4, 4)));
  }
  SUBCASE("dropped off-diagonals are lumped into the diagonal") {
    Eigen::Matrix2d a{{4, 0.01}, {0.01, 4}};
    const auto f = ilut(sym(a), 0.1, true);
    const auto [l, u] = dense_lu(f);
    CHECK(l.isApprox(Eigen::Matrix2d::Identity()));
    CHECK(u(0, 0) == doctest::Approx(4.01));
    CHECK(u(1, 1) == doctest::Approx(4.01));
    CHECK(u(0, 1) == 0.0);
    CHECK(f.modified);
  }
  SUBCASE("zero pivot") {
    Eigen::Matrix2d a{{0, 1}, {1, 0}};
    CHECK_THROWS_AS(ilut(sym(a), 0.0, false), ZeroPivotError);
  }
}

TEST_CASE("modified ilut preserves row sums of A") {
  // With lumping, L U e = A e whenever no fill survives (tridiagonal A).
  Gen g(104);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = tridiagonal(g, g.index(2, 30));
    const double tau = g.uniform(0.0, 0.3);
    const auto f = ilut(a, tau, true);
    const auto [l, u] = dense_lu(f);
    const Eigen::MatrixXd ad = dense(a);
    const Eigen::VectorXd e = Eigen::VectorXd::Ones(ad.rows());
    CHECK((l * u * e - ad * e).norm() <= 1e-11 * (ad * e).norm() + 1e-12);
  }
}

TEST_CASE("ilu factors have a unit lower and a nonzero upper diagonal") {
  Gen g(105);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = tridiagonal(g, g.index(2, 30));
    for (const auto& f : {ilu0(a), ilut(a, 1e-2, true), ilut(a, 1e-1, false)}) {
      const Eigen::MatrixXd lo = dense(f.lower);
      CHECK(lo.diagonal().isZero());
      CHECK(lo.triangularView<Eigen::Upper>().toDenseMatrix().isZero());
      const Eigen::MatrixXd up = dense(f.upper);
      CHECK(up.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero());
      CHECK(up.diagonal().cwiseAbs().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("ilu solve inverts L U") {
  Gen g(106);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = tridiagonal(g, g.index(2, 30));
    const auto f = ilut(a, g.uniform(0.0, 0.1), g.coin());
    const auto [l, u] = dense_lu(f);
    const Vector x = g.vector(a.n());
    Vector t(a.n());
    f.solve(x, t);
    CHECK((l * u * ev(t) - ev(x)).norm() <= 1e-11 * ev(x).norm());
  }
}

}  // TEST_SUITE("ilu")

TEST_SUITE("precond") {

TEST_CASE("deflated_apply examples") {
  SUBCASE("diag(1,-2) with e2") {
    const auto a = sym(Eigen::Vector2d(1, -2).asDiagonal().toDenseMatrix());
    const auto basis = unit_basis(2, 1, -2.0);
    const DeflatedOperator op(a, basis);
    const Vector y = deflated_apply(op, Vector{1, 1});
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 2.0);
  }
  SUBCASE("empty basis gives A u") {
    Gen g(111);
    const auto p = planted(g, 12, 3);
    const auto a = sym(p.a);
    const auto basis = DeflationBasis::empty(12);
    const DeflatedOperator op(a, basis);
    const Vector u = g.vector(12);
    CHECK(deflated_apply(op, u) == matvec(a, u));
  }
  SUBCASE("scalar: M_mr = |A|") {
    const auto a = sym(Eigen::MatrixXd::Constant(1, 1, -1.0));
    const auto basis = unit_basis(1, 0, -1.0);
    const DeflatedOperator op(a, basis);
    CHECK(deflated_apply(op, Vector{3})[0] == 3.0);
  }
  SUBCASE("dimension mismatch") {
    const auto a = sym(Eigen::MatrixXd::Identity(3, 3));
    const auto basis = DeflationBasis::empty(3);
    const DeflatedOperator op(a, basis);
    CHECK_THROWS_AS(deflated_apply(op, Vector{1, 2}), DimensionError);
    const auto wrong = unit_basis(4, 0, -1.0);
    CHECK_THROWS_AS(DeflatedOperator(a, wrong), DimensionError);
  }
}

TEST_CASE("deflated_apply agrees with the dense assembly") {
  Gen g(112);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = g.index(2, 200);
    const std::size_t k = g.index(0, std::min<std::size_t>(n, 10));
    const auto p = planted(g, n, k);
    const auto a = sym(p.a);
    // Any orthonormal block will do for the identity; use a perturbed one.
    auto basis = planted_basis(p);
    for (std::size_t j = 0; j < k; ++j) basis.lambda[j] *= g.uniform(0.5, 2.0);
    const DeflatedOperator op(a, basis);
    Eigen::MatrixXd v(n, k);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < n; ++i) v(i, j) = basis.vectors(i, j);
    const Eigen::VectorXd abs_l = ev(basis.lambda).cwiseAbs();
    const Eigen::MatrixXd m = dense(a) + 2.0 * v * abs_l.asDiagonal() * v.transpose();
    const Vector u = g.vector(n);
    const Eigen::VectorXd ref = m * ev(u);
    CHECK((ev(deflated_apply(op, u)) - ref).norm() <= 1e-12 * ref.norm());
  }
}

TEST_CASE("exact deflation makes M_mr = |A|") {
  Gen g(113);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = g.index(2, 100);
    const auto p = planted(g, n, g.index(0, std::min<std::size_t>(n, 12)));
    const auto a = sym(p.a);
    const auto basis = planted_basis(p);
    const DeflatedOperator op(a, basis);
    const Eigen::MatrixXd m = assemble(op);
    Eigen::VectorXd ref = p.lambda.cwiseAbs();
    std::sort(ref.data(), ref.data() + ref.size());
    const Eigen::VectorXd got = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                    0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly)
                                    .eigenvalues();
    CHECK((got - ref).norm() <= 1e-10 * ref.norm());
    CHECK(got.minCoeff() > 0.0);
  }
}

TEST_CASE("smw_apply examples") {
  const Eigen::Matrix2d ad = Eigen::Vector2d(1, -2).asDiagonal();
  const auto basis = unit_basis(2, 1, -2.0);
  SUBCASE("exact inner solve gives M_mr^-1 g") {
    const SmwInverse s(dense_inverse(ad), basis);
    const Vector y = smw_apply(s, Vector{1, 2});
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(1.0));
  }
  SUBCASE("empty basis passes the inner solve through") {
    const auto empty = DeflationBasis::empty(2);
    const SmwInverse s(dense_inverse(ad), empty);
    const Vector y = smw_apply(s, Vector{1, 2});
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(-1.0));
  }
  SUBCASE("zero maps to zero") {
    const SmwInverse s(dense_inverse(ad), basis);
    CHECK(smw_apply(s, Vector{0, 0}) == Vector{0, 0});
  }
  SUBCASE("errors") {
    const SmwInverse s(dense_inverse(ad), basis);
    CHECK_THROWS_AS(smw_apply(s, Vector{1}), DimensionError);
    CHECK_THROWS_AS(SmwInverse(nullptr, basis), InvalidArgument);
  }
}

TEST_CASE("SMW identity with an exact inner solve") {
  Gen g(114);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.index(2, 100);
    const auto p = planted(g, n, g.index(0, std::min<std::size_t>(n, 10)));
    const auto a = sym(p.a);
    const auto basis = planted_basis(p);
    const DeflatedOperator m(a, basis);
    const SmwInverse s(dense_inverse(p.a), basis);
    for (int rep = 0; rep < 3; ++rep) {
      const Vector u = g.vector(n);
      CHECK(rel_err(deflated_apply(m, smw_apply(s, u)), u) <= 1e-10);
    }
  }
}

TEST_CASE("preconditioner actions are linear") {
  Gen g(115);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = g.index(5, 60);
    Eigen::MatrixXd d = g.gaussian(n, n);
    d = (d + d.transpose()).eval();
    d.diagonal().array() += 3.0 * std::sqrt(double(n));
    const auto a = sym(d);
    const EigConfig cfg;
    const auto basis = negative_eigenpairs(a, cfg);
    for (const char* text : {"ilu0", "milu:0.01", "ilut:0.01", "ildlt:1:0.01", "ildlt-mod:2:0.001",
                             "smw:ildlt:1:0.01"}) {
      CAPTURE(text);
      std::shared_ptr<const PreconditionerAction> pre;
      try {
        pre = build_preconditioner(parse_precond_spec(text), a, &basis);
      } catch (const ZeroPivotError&) {
        continue;
      } catch (const PivotBreakdownError&) {
        continue;
      }
      const Vector x = g.vector(n), y = g.vector(n);
      const double al = g.normal(), be = g.normal();
      Vector comb(n);
      for (std::size_t i = 0; i < n; ++i) comb[i] = al * x[i] + be * y[i];
      const Vector px = (*pre)(x), py = (*pre)(y), pc = (*pre)(comb);
      Vector ref(n);
      for (std::size_t i = 0; i < n; ++i) ref[i] = al * px[i] + be * py[i];
      CHECK(rel_err(pc, ref) <= 1e-10);
    }
  }
}

TEST_CASE("preconditioner spec strings") {
  CHECK(parse_precond_spec("none").kind == PrecondKind::None);
  CHECK(parse_precond_spec("ilu0").kind == PrecondKind::Ilu0);
  const auto milu = parse_precond_spec("milu:1e-2");
  CHECK(milu.kind == PrecondKind::Milu);
  CHECK(milu.drop_tol == 1e-2);
  const auto il = parse_precond_spec("ildlt:3:0.001");
  CHECK(il.kind == PrecondKind::Ildlt);
  CHECK(il.fill_level == 3);
  CHECK(il.drop_tol == 1e-3);
  CHECK(parse_precond_spec("ildlt-mod:1:0.01").kind == PrecondKind::IldltModified);
  const auto s = parse_precond_spec("smw:ildlt:1:0.01");
  CHECK(s.kind == PrecondKind::Smw);
  REQUIRE(s.inner);
  CHECK(s.inner->kind == PrecondKind::Ildlt);
  for (const char* bad : {"", "ilu1", "milu", "milu:abc", "milu:-1", "ildlt:1", "ildlt:x:0.1",
                          "smw:none", "smw:smw:ilu0", "ilu0:3"})
    CHECK_THROWS_AS(parse_precond_spec(bad), SpecError);
}

TEST_CASE("smw preconditioner needs a basis") {
  const auto a = sym(Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(build_preconditioner(parse_precond_spec("smw:ilu0"), a, nullptr), SpecError);
}

}  // TEST_SUITE("precond")
