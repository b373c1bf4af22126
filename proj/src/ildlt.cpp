#include <Eigen/Dense>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/minimum_degree_ordering.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mrcg/error.hpp"
#include "mrcg/precond.hpp"

namespace mrcg {

namespace {

// Bunch-Kaufman growth constant.
const double kAlpha = (1.0 + std::sqrt(17.0)) / 8.0;

struct Cell {
  double v;
  std::size_t lev;
};
using Row = std::map<std::size_t, Cell>;

Vector equilibration(const CsrMatrix& a, bool enabled) {
  Vector s(a.rows(), 1.0);
  if (!enabled) return s;
  const auto off = a.row_offsets();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double m = 0.0;
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) m = std::max(m, std::abs(val[p]));
    if (m > 0.0) s[i] = 1.0 / std::sqrt(m);
  }
  return s;
}

// Right-looking elimination on a symmetric adjacency structure. Rows are
// keyed by label (the index after preordering); symmetric pivoting only
// swaps which label sits at which elimination position.
class Eliminator {
 public:
  Eliminator(std::vector<Row> rows, std::size_t level, double drop_tol, double tiny)
      : adj_(std::move(rows)),
        level_(level),
        tol_(drop_tol),
        tiny_(tiny),
        label_at_(adj_.size()),
        pos_of_(adj_.size()) {
    std::iota(label_at_.begin(), label_at_.end(), std::size_t{0});
    std::iota(pos_of_.begin(), pos_of_.end(), std::size_t{0});
  }

  void run() {
    const std::size_t n = adj_.size();
    std::size_t s = 0;
    while (s < n) {
      const std::size_t p = label_at_[s];
      const double app = diag(p);
      const auto [lambda, r] = offdiag_max(p);

      bool two = false;
      std::size_t q = p;
      if (lambda > 0.0 && std::abs(app) < kAlpha * lambda) {
        const double sigma = offdiag_max(r).first;
        if (std::abs(app) * sigma >= kAlpha * lambda * lambda) {
          q = p;
        } else if (std::abs(diag(r)) >= kAlpha * sigma) {
          q = r;
        } else {
          two = true;
        }
      }

      if (two && min_abs_eig(p, r) <= tiny_) {
        two = false;
        q = std::abs(diag(p)) >= std::abs(diag(r)) ? p : r;
        if (std::abs(diag(q)) <= tiny_) throw PivotBreakdownError(s);
      } else if (!two && std::abs(diag(q)) <= tiny_) {
        if (lambda > 0.0 && min_abs_eig(p, r) > tiny_) two = true;
        else throw PivotBreakdownError(s);
      }

      if (two) {
        move_to(p, s);
        move_to(r, s + 1);
        eliminate2(p, r, s);
        s += 2;
      } else {
        move_to(q, s);
        eliminate1(q, s);
        s += 1;
      }
    }
  }

  std::vector<std::size_t> label_at_result() const { return label_at_; }
  std::vector<PivotBlock> blocks() const { return blocks_; }

  CsrMatrix lower() const {
    std::vector<Triplet> t;
    t.reserve(lcols_.size());
    for (const auto& e : lcols_) t.push_back({pos_of_[e.row], e.col, e.value});
    const std::size_t n = adj_.size();
    return CsrMatrix::from_triplets(n, n, std::move(t), Duplicates::Reject);
  }

 private:
  double diag(std::size_t lab) const {
    const auto it = adj_[lab].find(lab);
    return it == adj_[lab].end() ? 0.0 : it->second.v;
  }

  double offdiag(std::size_t i, std::size_t j) const {
    const auto it = adj_[i].find(j);
    return it == adj_[i].end() ? 0.0 : it->second.v;
  }

  std::pair<double, std::size_t> offdiag_max(std::size_t lab) const {
    double best = 0.0;
    std::size_t arg = lab;
    for (const auto& [j, c] : adj_[lab])
      if (j != lab && active(c) && std::abs(c.v) > best) {
        best = std::abs(c.v);
        arg = j;
      }
    return {best, arg};
  }

  double min_abs_eig(std::size_t p, std::size_t r) const {
    const TwoByTwoEigen e = eigen_2x2(diag(p), offdiag(p, r), diag(r));
    return std::min(std::abs(e.lambda1), std::abs(e.lambda2));
  }

  void move_to(std::size_t lab, std::size_t pos) {
    const std::size_t cur = pos_of_[lab];
    const std::size_t other = label_at_[pos];
    std::swap(label_at_[pos], label_at_[cur]);
    pos_of_[lab] = pos;
    pos_of_[other] = cur;
  }

  // Entries above the level cap are kept as shadows: they still collect
  // updates, and become active if a lower-level path reaches them before
  // their row is eliminated, but they never act as pivots or multipliers.
  bool active(const Cell& c) const { return c.lev <= level_; }

  // a_ij -= upd on both triangles.
  void update(std::size_t i, std::size_t j, double upd, std::size_t lev) {
    const auto it = adj_[i].try_emplace(j, Cell{0.0, lev}).first;
    it->second.v -= upd;
    it->second.lev = std::min(it->second.lev, lev);
    if (i != j) adj_[j][i] = it->second;
  }

  struct Multiplier {
    std::size_t label;
    double l1;
    double l2;
    std::size_t lev;
  };

  void eliminate1(std::size_t q, std::size_t s) {
    const double d = diag(q);
    Row col = std::move(adj_[q]);
    adj_[q].clear();
    col.erase(q);
    double norm2 = d * d;
    for (const auto& [i, c] : col)
      if (active(c)) norm2 += c.v * c.v;
    const double cut = tol_ * std::sqrt(norm2);

    std::vector<Multiplier> ls;
    for (const auto& [i, c] : col) {
      adj_[i].erase(q);
      if (!active(c) || std::abs(c.v) < cut) continue;
      ls.push_back({i, c.v / d, 0.0, c.lev});
      lcols_.push_back({i, s, c.v / d});
    }
    for (std::size_t u = 0; u < ls.size(); ++u)
      for (std::size_t w = u; w < ls.size(); ++w)
        update(ls[u].label, ls[w].label, ls[u].l1 * d * ls[w].l1,
               ls[u].lev + ls[w].lev + 1);
    blocks_.push_back({s, 1, d, 0.0, 0.0});
  }

  void eliminate2(std::size_t p, std::size_t r, std::size_t s) {
    const double a = diag(p);
    const double b = offdiag(p, r);
    const double c = diag(r);
    const double det = a * c - b * b;
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max() / 4;

    struct Pair {
      double wp = 0.0;
      double wr = 0.0;
      std::size_t lev = kNone;
    };
    std::map<std::size_t, Pair> rows;
    double np = a * a + b * b;
    double nr = b * b + c * c;
    for (const auto& [i, cell] : adj_[p])
      if (i != p && i != r) {
        if (!active(cell)) {
          rows[i];
          continue;
        }
        rows[i].wp = cell.v;
        rows[i].lev = std::min(rows[i].lev, cell.lev);
        np += cell.v * cell.v;
      }
    for (const auto& [i, cell] : adj_[r])
      if (i != p && i != r) {
        if (!active(cell)) {
          rows[i];
          continue;
        }
        rows[i].wr = cell.v;
        rows[i].lev = std::min(rows[i].lev, cell.lev);
        nr += cell.v * cell.v;
      }
    adj_[p].clear();
    adj_[r].clear();
    const double cut = tol_ * std::sqrt(std::max(np, nr));

    std::vector<Multiplier> ls;
    for (const auto& [i, w] : rows) {
      adj_[i].erase(p);
      adj_[i].erase(r);
      if (w.lev == kNone || std::max(std::abs(w.wp), std::abs(w.wr)) < cut) continue;
      const double lp = (w.wp * c - w.wr * b) / det;
      const double lr = (w.wr * a - w.wp * b) / det;
      ls.push_back({i, lp, lr, w.lev});
      lcols_.push_back({i, s, lp});
      lcols_.push_back({i, s + 1, lr});
    }
    for (std::size_t u = 0; u < ls.size(); ++u)
      for (std::size_t w = u; w < ls.size(); ++w) {
        const Multiplier& x = ls[u];
        const Multiplier& y = ls[w];
        const double upd = x.l1 * (a * y.l1 + b * y.l2) + x.l2 * (b * y.l1 + c * y.l2);
        update(x.label, y.label, upd, x.lev + y.lev + 1);
      }
    blocks_.push_back({s, 2, a, b, c});
  }

  std::vector<Row> adj_;
  std::size_t level_;
  double tol_;
  double tiny_;
  std::vector<std::size_t> label_at_;
  std::vector<std::size_t> pos_of_;
  std::vector<Triplet> lcols_;  // row holds a label until lower() converts it
  std::vector<PivotBlock> blocks_;
};

}  // namespace

std::vector<std::size_t> minimum_degree_order(const CsrMatrix& pattern) {
  const std::size_t n = pattern.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (n < 3) return perm;

  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;
  Graph g(n);
  const auto off = pattern.row_offsets();
  const auto col = pattern.col_indices();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p)
      if (col[p] != i) boost::add_edge(i, col[p], g);

  std::vector<int> inverse_perm(n, 0), order(n, 0), degree(n, 0), supernode(n, 1);
  const auto id = boost::get(boost::vertex_index, g);
  boost::minimum_degree_ordering(
      g, boost::make_iterator_property_map(degree.data(), id, degree[0]),
      inverse_perm.data(), order.data(),
      boost::make_iterator_property_map(supernode.data(), id, supernode[0]), 0, id);
  // Boost's `perm` output maps new -> old.
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::size_t>(order[i]);
  return perm;
}

BlockLdlFactors ildlt(const SparseSymMatrix& a, const IldltOptions& options) {
  if (!(options.drop_tol >= 0.0)) throw InvalidArgument("drop tolerance must be >= 0");
  const std::size_t n = a.n();
  const CsrMatrix& m = a.csr();
  const Vector s = equilibration(m, options.equilibrate);
  std::vector<std::size_t> q(n);
  std::iota(q.begin(), q.end(), std::size_t{0});
  if (options.reorder) q = minimum_degree_order(m);
  std::vector<std::size_t> qinv(n);
  for (std::size_t i = 0; i < n; ++i) qinv[q[i]] = i;

  std::vector<Row> rows(n);
  const auto off = m.row_offsets();
  const auto col = m.col_indices();
  const auto val = m.values();
  double fro2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      const double v = s[i] * val[p] * s[col[p]];
      rows[qinv[i]][qinv[col[p]]] = {v, 0};
      fro2 += v * v;
    }

  Eliminator e(std::move(rows), options.fill_level, options.drop_tol,
               1e-14 * std::sqrt(fro2));
  e.run();

  BlockLdlFactors f;
  const auto labels = e.label_at_result();
  f.perm.resize(n);
  for (std::size_t k = 0; k < n; ++k) f.perm[k] = q[labels[k]];
  f.scaling = s;
  f.lower = e.lower();
  f.blocks = e.blocks();
  f.fill_level = options.fill_level;
  f.drop_tol = options.drop_tol;
  f.is_complete = options.drop_tol == 0.0 && options.fill_level >= n;
  return f;
}

BlockLdlFactors ildlt(const SparseSymMatrix& a, std::size_t fill_level, double drop_tol) {
  IldltOptions o;
  o.fill_level = fill_level;
  o.drop_tol = drop_tol;
  return ildlt(a, o);
}

void BlockLdlFactors::solve(std::span<const double> g, std::span<double> t) const {
  const std::size_t n = this->n();
  Vector y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = scaling[perm[k]] * g[perm[k]];

  const auto off = lower.row_offsets();
  const auto col = lower.col_indices();
  const auto val = lower.values();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = y[i];
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) acc -= val[p] * y[col[p]];
    y[i] = acc;
  }
  for (const auto& b : blocks) {
    if (b.size == 1) {
      y[b.start] /= b.a;
    } else {
      const double det = b.a * b.c - b.b * b.b;
      const double u = y[b.start];
      const double v = y[b.start + 1];
      y[b.start] = (b.c * u - b.b * v) / det;
      y[b.start + 1] = (b.a * v - b.b * u) / det;
    }
  }
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) y[col[p]] -= val[p] * y[i];

  for (std::size_t k = 0; k < n; ++k) t[perm[k]] = scaling[perm[k]] * y[k];
}

std::size_t BlockLdlFactors::factor_nnz() const noexcept {
  std::size_t d = 0;
  for (const auto& b : blocks) d += b.size == 1 ? 1 : 3;
  return lower.nnz() + n() + d;
}

TwoByTwoEigen eigen_2x2(double a, double b, double c) {
  TwoByTwoEigen e;
  if (b == 0.0) {
    e.lambda1 = a;
    e.lambda2 = c;
    return e;
  }
  const double mean = 0.5 * (a + c);
  const double rad = std::hypot(0.5 * (a - c), b);
  e.lambda1 = mean + rad;
  e.lambda2 = mean - rad;
  // Eigenvector of lambda1; pick the better conditioned of two formulas.
  double x = b, y = e.lambda1 - a;
  const double x2 = e.lambda1 - c, y2 = b;
  if (std::hypot(x2, y2) > std::hypot(x, y)) {
    x = x2;
    y = y2;
  }
  const double h = std::hypot(x, y);
  e.cs = x / h;
  e.sn = y / h;
  return e;
}

BlockLdlFactors modify_block_diagonal(const BlockLdlFactors& factors) {
  BlockLdlFactors out = factors;
  double scale = 0.0;
  for (const auto& b : out.blocks)
    scale = std::max({scale, std::abs(b.a), std::abs(b.b), std::abs(b.c)});
  const double tiny = 1e-14 * scale;
  for (std::size_t k = 0; k < out.blocks.size(); ++k) {
    PivotBlock& b = out.blocks[k];
    if (b.size == 1) {
      if (std::abs(b.a) < tiny || b.a == 0.0) throw SingularBlockError(k);
      b.a = std::abs(b.a);
      continue;
    }
    const TwoByTwoEigen e = eigen_2x2(b.a, b.b, b.c);
    const double l1 = std::abs(e.lambda1);
    const double l2 = std::abs(e.lambda2);
    if (l1 < tiny || l2 < tiny || l1 == 0.0 || l2 == 0.0) throw SingularBlockError(k);
    if (e.lambda1 > 0.0 && e.lambda2 > 0.0) continue;
    b.a = l1 * e.cs * e.cs + l2 * e.sn * e.sn;
    b.b = (l1 - l2) * e.cs * e.sn;
    b.c = l1 * e.sn * e.sn + l2 * e.cs * e.cs;
  }
  return out;
}

double reconstruction_error(const SparseSymMatrix& a, const BlockLdlFactors& f) {
  const std::size_t n = a.n();
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(ni, ni);
  std::vector<std::size_t> inv(n);
  for (std::size_t k = 0; k < n; ++k) inv[f.perm[k]] = k;
  for (const auto& t : a.csr().triplets())
    b(static_cast<Eigen::Index>(inv[t.row]), static_cast<Eigen::Index>(inv[t.col])) =
        f.scaling[t.row] * t.value * f.scaling[t.col];

  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(ni, ni);
  for (const auto& t : f.lower.triplets())
    l(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(ni, ni);
  for (const auto& blk : f.blocks) {
    const auto s = static_cast<Eigen::Index>(blk.start);
    d(s, s) = blk.a;
    if (blk.size == 2) {
      d(s, s + 1) = d(s + 1, s) = blk.b;
      d(s + 1, s + 1) = blk.c;
    }
  }
  const double denom = b.norm();
  const double err = (b - l * d * l.transpose()).norm();
  return denom > 0.0 ? err / denom : err;
}

LdlPreconditioner::LdlPreconditioner(BlockLdlFactors factors, std::string label)
    : factors_(std::move(factors)), label_(std::move(label)) {}

void LdlPreconditioner::apply(std::span<const double> x, std::span<double> y) const {
  factors_.solve(x, y);
}

}  // namespace mrcg
