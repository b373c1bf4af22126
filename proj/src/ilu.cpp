#include <cmath>
#include <set>

#include "mrcg/error.hpp"
#include "mrcg/precond.hpp"

namespace mrcg {

namespace {

struct SplitRows {
  std::vector<Triplet> lower;
  std::vector<Triplet> upper;
};

IluFactors assemble(std::size_t n, SplitRows rows, bool modified, double drop_tol) {
  IluFactors f;
  f.lower = CsrMatrix::from_triplets(n, n, std::move(rows.lower), Duplicates::Reject);
  f.upper = CsrMatrix::from_triplets(n, n, std::move(rows.upper), Duplicates::Reject);
  f.modified = modified;
  f.drop_tol = drop_tol;
  return f;
}

}  // namespace

void IluFactors::solve(std::span<const double> g, std::span<double> t) const {
  const std::size_t n = this->n();
  const auto lo = lower.row_offsets();
  const auto lc = lower.col_indices();
  const auto lv = lower.values();
  for (std::size_t i = 0; i < n; ++i) {
    double s = g[i];
    for (std::size_t p = lo[i]; p < lo[i + 1]; ++p) s -= lv[p] * t[lc[p]];
    t[i] = s;
  }
  const auto uo = upper.row_offsets();
  const auto uc = upper.col_indices();
  const auto uv = upper.values();
  for (std::size_t i = n; i-- > 0;) {
    double s = t[i];
    // The diagonal is the first entry of each U row.
    for (std::size_t p = uo[i] + 1; p < uo[i + 1]; ++p) s -= uv[p] * t[uc[p]];
    t[i] = s / uv[uo[i]];
  }
}

IluFactors ilu0(const SparseSymMatrix& a) {
  const CsrMatrix& m = a.csr();
  const std::size_t n = a.n();
  const auto off = m.row_offsets();
  const auto col = m.col_indices();
  Vector lu(m.values().begin(), m.values().end());
  std::vector<std::size_t> diag(n);
  std::vector<std::size_t> pos(n, SIZE_MAX);

  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = SIZE_MAX;
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      pos[col[p]] = p;
      if (col[p] == i) diag[i] = p;
    }
    for (std::size_t p = off[i]; p < off[i + 1] && col[p] < i; ++p) {
      const std::size_t k = col[p];
      const double l = lu[p] / lu[diag[k]];
      lu[p] = l;
      for (std::size_t q = diag[k] + 1; q < off[k + 1]; ++q)
        if (pos[col[q]] != SIZE_MAX) lu[pos[col[q]]] -= l * lu[q];
    }
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) pos[col[p]] = SIZE_MAX;
    if (diag[i] == SIZE_MAX || lu[diag[i]] == 0.0) throw ZeroPivotError(i);
  }

  SplitRows rows;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p)
      (col[p] < i ? rows.lower : rows.upper).push_back({i, col[p], lu[p]});
  return assemble(n, std::move(rows), false, 0.0);
}

IluFactors ilut(const SparseSymMatrix& a, double drop_tol, bool modified) {
  if (!(drop_tol >= 0.0)) throw InvalidArgument("drop tolerance must be >= 0");
  const CsrMatrix& m = a.csr();
  const std::size_t n = a.n();
  const auto off = m.row_offsets();
  const auto col = m.col_indices();
  const auto val = m.values();

  // U rows kept as (col, value) lists with the diagonal first.
  std::vector<std::vector<std::pair<std::size_t, double>>> urows(n);
  SplitRows rows;
  Vector w(n, 0.0);
  std::vector<char> present(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::size_t> nz;
    double row_norm2 = 0.0;
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      w[col[p]] = val[p];
      present[col[p]] = 1;
      nz.insert(col[p]);
      row_norm2 += val[p] * val[p];
    }
    const double tau = drop_tol * std::sqrt(row_norm2);
    double lumped = 0.0;

    for (auto it = nz.begin(); it != nz.end() && *it < i; ++it) {
      const std::size_t k = *it;
      const double pivot_entry = w[k];
      const double l = pivot_entry / urows[k].front().second;
      if (std::abs(l) < tau) {
        if (modified) lumped += pivot_entry;
        w[k] = 0.0;
        present[k] = 2;  // dropped
        continue;
      }
      w[k] = l;
      for (std::size_t q = 1; q < urows[k].size(); ++q) {
        const auto [j, ukj] = urows[k][q];
        if (!present[j]) {
          present[j] = 1;
          w[j] = 0.0;
          nz.insert(j);
        }
        w[j] -= l * ukj;
      }
    }

    double diag = present[i] == 1 ? w[i] : 0.0;
    std::vector<std::pair<std::size_t, double>> urow;
    urow.emplace_back(i, 0.0);
    for (std::size_t j : nz) {
      if (j < i) {
        if (present[j] == 1) rows.lower.push_back({i, j, w[j]});
      } else if (j > i) {
        if (std::abs(w[j]) < tau) {
          if (modified) lumped += w[j];
        } else {
          urow.emplace_back(j, w[j]);
        }
      }
      w[j] = 0.0;
      present[j] = 0;
    }
    diag += lumped;
    if (diag == 0.0) throw ZeroPivotError(i);
    urow.front().second = diag;
    for (const auto& [j, v] : urow) rows.upper.push_back({i, j, v});
    urows[i] = std::move(urow);
  }
  return assemble(n, std::move(rows), modified, drop_tol);
}

IluPreconditioner::IluPreconditioner(IluFactors factors, std::string label)
    : factors_(std::move(factors)), label_(std::move(label)) {}

void IluPreconditioner::apply(std::span<const double> x, std::span<double> y) const {
  factors_.solve(x, y);
}

}  // namespace mrcg
