#include <doctest.h>

#include <algorithm>
#include <limits>

#include "mrcg/eigdefl.hpp"
#include "mrcg/precond.hpp"
#include "support.hpp"

using namespace mrcg;
using namespace testing;

namespace {

IldltOptions plain(std::size_t level, double tol) {
  IldltOptions o;
  o.fill_level = level;
  o.drop_tol = tol;
  o.reorder = false;
  o.equilibrate = false;
  return o;
}

// Dense D assembled from the pivot blocks.
Eigen::MatrixXd block_diagonal(const BlockLdlFactors& f) {
  const auto n = static_cast<Eigen::Index>(f.n());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (const auto& b : f.blocks) {
    const auto s = static_cast<Eigen::Index>(b.start);
    d(s, s) = b.a;
    if (b.size == 2) {
      d(s, s + 1) = d(s + 1, s) = b.b;
      d(s + 1, s + 1) = b.c;
    }
  }
  return d;
}

Eigen::MatrixXd unit_lower(const BlockLdlFactors& f) {
  return dense(f.lower) + Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(f.n()),
                                                    static_cast<Eigen::Index>(f.n()));
}

// Textbook ILU(p) by levels (row-wise IKJ, no pivoting): entries whose final
// level exceeds p are dropped, every contribution to kept entries counts.
struct DenseIluk {
  Eigen::MatrixXd l;
  Eigen::VectorXd d;
};

DenseIluk textbook_iluk(const Eigen::MatrixXd& a, std::size_t p) {
  const Eigen::Index n = a.rows();
  const std::size_t inf = std::numeric_limits<std::size_t>::max() / 4;
  Eigen::MatrixXd w = a;
  std::vector<std::vector<std::size_t>> lev(static_cast<std::size_t>(n),
                                            std::vector<std::size_t>(static_cast<std::size_t>(n), inf));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (a(i, j) != 0.0 || i == j) lev[i][j] = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < i; ++k) {
      if (lev[i][k] > p) continue;
      w(i, k) /= w(k, k);
      for (Eigen::Index j = k + 1; j < n; ++j) {
        if (lev[k][j] > p) continue;
        w(i, j) -= w(i, k) * w(k, j);
        lev[i][j] = std::min(lev[i][j], lev[i][k] + lev[k][j] + 1);
      }
    }
    for (Eigen::Index j = 0; j < n; ++j)
      if (lev[i][j] > p) w(i, j) = 0.0;
  }
  DenseIluk r;
  r.d = w.diagonal();
  r.l = Eigen::MatrixXd(w.triangularView<Eigen::StrictlyLower>()) +
        Eigen::MatrixXd::Identity(n, n);
  return r;
}

}  // namespace

TEST_SUITE("ildlt") {

TEST_CASE("diagonal input factors trivially") {
  const auto a = sym(Eigen::Vector2d(1.0, -2.0).asDiagonal().toDenseMatrix());
  const auto f = ildlt(a, plain(2, 0.0));
  CHECK(f.lower.nnz() == 0);
  REQUIRE(f.blocks.size() == 2);
  CHECK(f.blocks[0].a == doctest::Approx(1.0));
  CHECK(f.blocks[1].a == doctest::Approx(-2.0));
}

TEST_CASE("zero diagonal forces a 2x2 pivot") {
  Eigen::Matrix2d m;
  m << 0, 1, 1, 0;
  const auto f = ildlt(sym(m), plain(2, 0.0));
  REQUIRE(f.blocks.size() == 1);
  CHECK(f.blocks[0].size == 2);
  CHECK(f.blocks[0].a == 0.0);
  CHECK(f.blocks[0].b == doctest::Approx(1.0));
  CHECK(f.blocks[0].c == 0.0);
  CHECK(f.lower.nnz() == 0);
}

TEST_CASE("hand elimination of a 2x2 SPD matrix") {
  Eigen::Matrix2d m;
  m << 4, 2, 2, 5;
  const auto f = ildlt(sym(m), plain(2, 0.0));
  CHECK(f.is_complete);
  REQUIRE(f.blocks.size() == 2);
  CHECK(f.perm == std::vector<std::size_t>{0, 1});
  CHECK(f.lower.at(1, 0) == doctest::Approx(0.5));
  CHECK(f.blocks[0].a == doctest::Approx(4.0));
  CHECK(f.blocks[1].a == doctest::Approx(4.0));
}

TEST_CASE("complete factorization reconstructs random indefinite matrices") {
  Gen g(11);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = g.index(5, 60);
    const auto p = planted(g, n, g.index(1, n / 2));
    IldltOptions o;
    o.fill_level = n;
    o.drop_tol = 0.0;
    o.reorder = g.coin();
    o.equilibrate = g.coin();
    const auto a = sym(p.a);
    const auto f = ildlt(a, o);
    CHECK(f.is_complete);
    CHECK(reconstruction_error(a, f) <= 1e-10);
    // Sylvester: the block diagonal carries the planted inertia.
    const Inertia in = inertia_count(f);
    CHECK(in.negative == p.k);
    CHECK(in.positive == n - p.k);
  }
}

TEST_CASE("blocks partition the index range and L is strictly lower") {
  Gen g(5);
  int factored = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.index(4, 40);
    Eigen::MatrixXd m = g.gaussian(n, n);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (g.coin(0.7)) m(i, j) = 0.0;
    m = (m + m.transpose()).eval();
    m.diagonal() *= 0.1;
    BlockLdlFactors f;
    try {
      f = ildlt(sym(m), IldltOptions{g.index(0, 3), g.uniform(0.0, 0.1), g.coin(), g.coin()});
    } catch (const PivotBreakdownError&) {
      continue;  // a legitimate outcome for incomplete factors
    }
    ++factored;
    std::size_t next = 0;
    for (const auto& b : f.blocks) {
      CHECK(b.start == next);
      next += b.size;
    }
    CHECK(next == n);
    const auto off = f.lower.row_offsets();
    const auto col = f.lower.col_indices();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = off[i]; q < off[i + 1]; ++q) CHECK(col[q] < i);
    std::vector<std::size_t> sorted = f.perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
  }
  CHECK(factored >= 10);
}

TEST_CASE("level-of-fill matches textbook ILU(p) when no pivoting happens") {
  int compared = 0;
  for (const double shift : {0.0, 0.4, 1.2}) {
    const auto a = laplacian2d(7, shift);
    const Eigen::MatrixXd ad = dense(a);
    for (const std::size_t p : {0u, 1u, 2u, 3u, 5u}) {
      CAPTURE(shift);
      CAPTURE(p);
      const auto f = ildlt(a, plain(p, 0.0));
      bool all_one = true;
      for (const auto& b : f.blocks) all_one = all_one && b.size == 1;
      std::vector<std::size_t> id(a.n());
      std::iota(id.begin(), id.end(), std::size_t{0});
      if (!all_one || f.perm != id) continue;  // pivoting changes the ordering
      ++compared;
      const DenseIluk ref = textbook_iluk(ad, p);
      CHECK((unit_lower(f) - ref.l).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((block_diagonal(f).diagonal() - ref.d).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  CHECK(compared >= 8);
}

TEST_CASE("threshold dropping only removes small entries") {
  const auto a = laplacian2d(6, 0.3);
  const auto loose = ildlt(a, plain(36, 0.2));
  const auto tight = ildlt(a, plain(36, 0.0));
  CHECK(loose.lower.nnz() < tight.lower.nnz());
  CHECK(reconstruction_error(a, tight) <= 1e-12);
  CHECK(reconstruction_error(a, loose) > 1e-6);
}

TEST_CASE("2x2 eigen decomposition is orthogonal and exact") {
  Gen g(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = g.normal(), b = g.normal(), c = g.normal();
    const TwoByTwoEigen e = eigen_2x2(a, b, c);
    CHECK(e.cs * e.cs + e.sn * e.sn == doctest::Approx(1.0).epsilon(1e-14));
    Eigen::Matrix2d q;
    q << e.cs, -e.sn, e.sn, e.cs;
    Eigen::Matrix2d m;
    m << a, b, b, c;
    const Eigen::Matrix2d rec = q * Eigen::Vector2d(e.lambda1, e.lambda2).asDiagonal() * q.transpose();
    CHECK((rec - m).norm() <= 1e-13 * std::max(1.0, m.norm()));
  }
}

TEST_CASE("modify_block_diagonal examples") {
  SUBCASE("1x1 blocks take absolute values") {
    const auto f = ildlt(sym(Eigen::Vector2d(1.0, -2.0).asDiagonal().toDenseMatrix()), plain(2, 0.0));
    const auto m = modify_block_diagonal(f);
    CHECK(m.blocks[0].a == doctest::Approx(1.0));
    CHECK(m.blocks[1].a == doctest::Approx(2.0));
  }
  SUBCASE("indefinite 2x2 block becomes 2I") {
    Eigen::Matrix2d d;
    d << 0, 2, 2, 0;
    const auto f = ildlt(sym(d), plain(2, 0.0));
    REQUIRE(f.blocks.size() == 1);
    const auto m = modify_block_diagonal(f);
    CHECK(m.blocks[0].a == doctest::Approx(2.0));
    CHECK(m.blocks[0].b == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m.blocks[0].c == doctest::Approx(2.0));
  }
  SUBCASE("positive blocks are unchanged") {
    Gen g(8);
    const auto p = planted(g, 20, 0);
    const auto f = ildlt(sym(p.a), plain(20, 0.0));
    const auto m = modify_block_diagonal(f);
    for (std::size_t i = 0; i < f.blocks.size(); ++i) {
      CHECK(m.blocks[i].a == f.blocks[i].a);
      CHECK(m.blocks[i].b == f.blocks[i].b);
      CHECK(m.blocks[i].c == f.blocks[i].c);
    }
    CHECK(m.perm == f.perm);
  }
}

TEST_CASE("modified D keeps eigenvalue magnitudes and gives an SPD preconditioner") {
  Gen g(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = g.index(6, 40);
    const auto p = planted(g, n, g.index(1, n - 1), 0.1, 5.0);
    const auto f = ildlt(sym(p.a), IldltOptions{g.index(0, 4), g.uniform(0.0, 0.05), g.coin(), g.coin()});
    const auto m = modify_block_diagonal(f);
    Eigen::VectorXd before = block_diagonal(f).selfadjointView<Eigen::Lower>().eigenvalues().cwiseAbs();
    Eigen::VectorXd after = block_diagonal(m).selfadjointView<Eigen::Lower>().eigenvalues();
    std::sort(before.data(), before.data() + before.size());
    std::sort(after.data(), after.data() + after.size());
    CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-12 * before.maxCoeff());
    CHECK(after.minCoeff() > 0.0);
    CHECK(m.lower.nnz() == f.lower.nnz());

    const LdlPreconditioner prec(m, "mod");
    const Eigen::MatrixXd w = assemble(prec);
    CHECK((w - w.transpose()).norm() <= 1e-10 * w.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (w + w.transpose())).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("singular block cannot be positivized") {
  BlockLdlFactors f;
  f.perm = {0, 1};
  f.scaling = {1.0, 1.0};
  f.lower = CsrMatrix(2, 2, {0, 0, 0}, {}, {});
  f.blocks = {{0, 1, 3.0, 0, 0}, {1, 1, 0.0, 0, 0}};
  CHECK_THROWS_AS(modify_block_diagonal(f), SingularBlockError);
}

TEST_CASE("complete factors solve exactly through the preconditioner") {
  Gen g(17);
  const auto p = planted(g, 30, 6);
  const auto a = sym(p.a);
  const LdlPreconditioner prec(ildlt(a, IldltOptions{30, 0.0, true, true}), "full");
  const Vector b = g.vector(30);
  const Vector x = prec(b);
  CHECK(rel_err(matvec(a, x), b) <= 1e-10);
}

TEST_CASE("minimum degree ordering eliminates a star hub last") {
  // Star: vertex 0 joined to all others. Eliminating the hub first would
  // create a dense clique; any minimum degree ordering puts it last.
  const std::size_t n = 8;
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 4.0});
  for (std::size_t i = 1; i < n; ++i) t.push_back({i, 0, 1.0});
  const auto a = SparseSymMatrix::from_triangle(n, t);
  const auto order = minimum_degree_order(a.csr());
  REQUIRE(order.size() == n);
  CHECK(order.back() == 0);
  const auto f = ildlt(a, IldltOptions{0, 0.0, true, false});
  CHECK(f.lower.nnz() == n - 1);  // no fill
  CHECK(f.perm.back() == 0);
}

TEST_CASE("pivot breakdown is reported") {
  CHECK_THROWS_AS(ildlt(sym(Eigen::Matrix2d::Zero()), plain(2, 0.0)), PivotBreakdownError);
}

TEST_CASE("inertia examples") {
  BlockLdlFactors f;
  f.perm = {0, 1, 2};
  f.scaling = {1, 1, 1};
  f.lower = CsrMatrix(3, 3, {0, 0, 0, 0}, {}, {});
  f.is_complete = true;
  f.blocks = {{0, 1, 1.0, 0, 0}, {1, 1, -2.0, 0, 0}, {2, 1, 3.0, 0, 0}};
  CHECK(inertia_count(f) == Inertia{1, 0, 2});

  f.perm = {0, 1};
  f.scaling = {1, 1};
  f.lower = CsrMatrix(2, 2, {0, 0, 0}, {}, {});
  f.blocks = {{0, 2, 0.0, 1.0, 0.0}};
  CHECK(inertia_count(f) == Inertia{1, 0, 1});

  f.perm = {0};
  f.scaling = {1};
  f.lower = CsrMatrix(1, 1, {0, 0}, {}, {});
  f.blocks = {{0, 1, 4.0, 0, 0}};
  CHECK(inertia_count(f) == Inertia{0, 0, 1});

  f.is_complete = false;
  CHECK_THROWS_AS(inertia_count(f), InvalidArgument);
}

}  // TEST_SUITE
