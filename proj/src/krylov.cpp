#include "mrcg/krylov.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>

#include "mrcg/error.hpp"
#include "mrcg/kernels.hpp"
#include "mrcg/precond.hpp"

namespace mrcg {

namespace k = kernels;

const char* status_symbol(FailureKind kind) noexcept {
  switch (kind) {
    case FailureKind::None: return "ok";
    case FailureKind::MaxIters: return "†";
    case FailureKind::Stagnation: return "‡";
    case FailureKind::ScalarBreakdown: return "∗";
  }
  return "?";
}

const char* status_name(FailureKind kind) noexcept {
  switch (kind) {
    case FailureKind::None: return "ok";
    case FailureKind::MaxIters: return "max_iters";
    case FailureKind::Stagnation: return "stagnation";
    case FailureKind::ScalarBreakdown: return "breakdown";
  }
  return "?";
}

double relative_residual(const LinearOperator& op, std::span<const double> b,
                         std::span<const double> x) {
  Vector r(b.size());
  op.apply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const double bn = k::nrm2(b);
  const double rn = k::nrm2(r);
  return bn > 0.0 ? rn / bn : rn;
}

namespace {

void check_sizes(const LinearOperator& op, const LinearOperator& precond,
                 std::span<const double> b, const SolveConfig& cfg) {
  if (op.size() != b.size() || precond.size() != b.size())
    throw DimensionError("solver: operator, preconditioner and rhs sizes differ");
  if (!cfg.x0.empty() && cfg.x0.size() != b.size())
    throw DimensionError("solver: initial guess has the wrong length");
  if (!(cfg.rel_tol > 0.0)) throw InvalidArgument("rel_tol must be positive");
  if (cfg.max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
}

// Tracks ||b - A x|| / ||b|| with one extra matvec per call.
class TrueResidual {
 public:
  TrueResidual(const LinearOperator& op, std::span<const double> b)
      : op_(op), b_(b), r_(b.size()), bnorm_(k::nrm2(b)) {}

  double operator()(std::span<const double> x) {
    op_.apply(x, r_);
    k::xpby(b_, -1.0, r_);
    const double rn = k::nrm2(r_);
    return bnorm_ > 0.0 ? rn / bnorm_ : rn;
  }

  /// Residual vector of the last evaluation.
  std::span<const double> vector() const { return r_; }
  double bnorm() const { return bnorm_; }

 private:
  const LinearOperator& op_;
  std::span<const double> b_;
  Vector r_;
  double bnorm_;
};

// Stagnation: the best residual of the last `window` entries is not better
// than the best before them by a relative 1e-14.
class StagnationMonitor {
 public:
  explicit StagnationMonitor(std::size_t window) : window_(window) {}

  bool push(double v) {
    values_.push_back(v);
    if (window_ == 0 || values_.size() <= window_) return false;
    const std::size_t split = values_.size() - window_;
    best_before_ = std::min(best_before_, values_[split - 1]);
    const double recent = *std::min_element(values_.begin() + static_cast<long>(split),
                                            values_.end());
    return !(recent < best_before_ * (1.0 - 1e-14));
  }

 private:
  std::size_t window_;
  Vector values_;
  double best_before_ = std::numeric_limits<double>::infinity();
};

Vector initial_guess(const SolveConfig& cfg, std::size_t n) {
  return cfg.x0.empty() ? Vector(n, 0.0) : cfg.x0;
}

void record(SolveReport& rep, double index, double relres) {
  rep.history.push_back(relres);
  rep.history_index.push_back(index);
  rep.final_rel_residual = relres;
}

void finish(SolveReport& rep, bool converged, FailureKind failure, double iters) {
  rep.converged = converged;
  rep.failure = converged ? FailureKind::None : failure;
  rep.outer_iters = iters;
  rep.total_iters = iters;
}

bool bad(double v) { return !std::isfinite(v); }

using StopPredicate = std::function<bool()>;

// Preconditioned MINRES (Paige-Saunders recurrences). `stop` is polled
// after every iteration and turns an unfinished run into MaxIters.
SolveResult minres_impl(const LinearOperator& op, const LinearOperator& precond,
                        std::span<const double> b, const SolveConfig& cfg,
                        const StopPredicate& stop) {
  check_sizes(op, precond, b, cfg);
  const std::size_t n = b.size();
  SolveResult res;
  SolveReport& rep = res.report;
  Vector& x = res.x;
  x = initial_guess(cfg, n);
  TrueResidual true_res(op, b);
  double relres = true_res(x);
  record(rep, 0, relres);
  if (relres <= cfg.rel_tol) {
    finish(rep, true, FailureKind::None, 0);
    return res;
  }

  Vector r1(true_res.vector().begin(), true_res.vector().end());
  Vector r2 = r1;
  Vector y(n), v(n), w(n, 0.0), w1(n), w2(n, 0.0);
  precond.apply(r1, y);
  double beta1 = k::dot(r1, y);
  if (beta1 <= 0.0 || bad(beta1)) {
    finish(rep, false, FailureKind::ScalarBreakdown, 0);
    return res;
  }
  beta1 = std::sqrt(beta1);

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  StagnationMonitor stag(cfg.stagnation_window);

  for (std::size_t itn = 1; itn <= cfg.max_iters; ++itn) {
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
    op.apply(v, y);
    if (itn >= 2) k::axpy(-beta / oldb, r1, y);
    const double alfa = k::dot(v, y);
    k::axpy(-alfa / beta, r2, y);
    std::swap(r1, r2);
    k::copy(y, r2);
    precond.apply(r2, y);
    oldb = beta;
    const double beta_sq = k::dot(r2, y);
    if (beta_sq < 0.0 || bad(beta_sq) || bad(alfa)) {
      finish(rep, false, FailureKind::ScalarBreakdown, static_cast<double>(itn - 1));
      return res;
    }
    beta = std::sqrt(beta_sq);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), std::numeric_limits<double>::epsilon());
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    std::swap(w1, w2);
    std::swap(w2, w);
    for (std::size_t i = 0; i < n; ++i) w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
    k::axpy(phi, w, x);

    relres = true_res(x);
    record(rep, static_cast<double>(itn), relres);
    if (bad(relres)) {
      finish(rep, false, FailureKind::ScalarBreakdown, static_cast<double>(itn));
      return res;
    }
    if (relres <= cfg.rel_tol) {
      finish(rep, true, FailureKind::None, static_cast<double>(itn));
      return res;
    }
    // Exhausted Krylov space without meeting the tolerance on the true residual.
    if (beta == 0.0) {
      finish(rep, false, FailureKind::Stagnation, static_cast<double>(itn));
      return res;
    }
    if (stag.push(relres)) {
      finish(rep, false, FailureKind::Stagnation, static_cast<double>(itn));
      return res;
    }
    if (stop && stop()) {
      finish(rep, false, FailureKind::MaxIters, static_cast<double>(itn));
      return res;
    }
  }
  finish(rep, false, FailureKind::MaxIters, static_cast<double>(cfg.max_iters));
  return res;
}

// Upper triangular solve on the leading j x j block of a column-major
// (m+1) x m Hessenberg array already reduced by Givens rotations.
Vector hessenberg_solve(const Vector& h, std::size_t ld, const Vector& g, std::size_t j) {
  Vector y(j);
  for (std::size_t i = j; i-- > 0;) {
    double s = g[i];
    for (std::size_t c = i + 1; c < j; ++c) s -= h[c * ld + i] * y[c];
    y[i] = s / h[i * ld + i];
  }
  return y;
}

// Shared GMRES/FGMRES cycles. Left preconditioning builds the Krylov space
// of M^-1 A; the flexible variant keeps the directions Z_j = inner(V_j).
SolveResult gmres_core(const LinearOperator& op, const LinearOperator& precond,
                       std::span<const double> b, const SolveConfig& cfg, bool flexible,
                       const std::function<void(std::span<const double>, std::span<double>)>&
                           inner) {
  check_sizes(op, precond, b, cfg);
  if (cfg.restart < 1) throw InvalidArgument("GMRES restart must be at least 1");
  const std::size_t n = b.size();
  const std::size_t m = cfg.restart;
  const std::size_t ld = m + 1;

  SolveResult res;
  SolveReport& rep = res.report;
  Vector& x = res.x;
  x = initial_guess(cfg, n);
  TrueResidual true_res(op, b);
  double relres = true_res(x);
  record(rep, 0, relres);
  if (relres <= cfg.rel_tol) {
    finish(rep, true, FailureKind::None, 0);
    return res;
  }

  std::vector<Vector> vs(m + 1, Vector(n));
  std::vector<Vector> zs(flexible ? m : 0, Vector(n));
  Vector h(ld * m), cs(m), sn(m), g(m + 1), w(n), tmp(n), trial(n);
  StagnationMonitor stag(cfg.stagnation_window);
  std::size_t total = 0;
  std::size_t cycle = 0;

  auto done = [&](bool ok, FailureKind kind, std::size_t in_cycle) {
    finish(rep, ok, kind, static_cast<double>(total));
    rep.cycles = cycle;
    rep.cycle_iters = in_cycle;
  };

  while (total < cfg.max_iters) {
    ++cycle;
    // Starting vector: preconditioned residual (left) or residual (flexible).
    true_res(x);
    if (flexible) {
      k::copy(true_res.vector(), vs[0]);
    } else {
      precond.apply(true_res.vector(), vs[0]);
    }
    const double beta = k::nrm2(vs[0]);
    if (beta == 0.0 || bad(beta)) {
      done(false, FailureKind::ScalarBreakdown, 0);
      return res;
    }
    k::scale(1.0 / beta, vs[0]);
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;

    std::size_t j = 0;
    for (; j < m && total < cfg.max_iters; ++j) {
      ++total;
      if (flexible) {
        inner(vs[j], zs[j]);
        op.apply(zs[j], w);
      } else {
        op.apply(vs[j], tmp);
        precond.apply(tmp, w);
      }
      double* hj = &h[j * ld];
      for (std::size_t i = 0; i <= j; ++i) {
        hj[i] = k::dot(w, vs[i]);
        k::axpy(-hj[i], vs[i], w);
      }
      const double hnext = k::nrm2(w);
      hj[j + 1] = hnext;
      for (std::size_t i = 0; i < j; ++i) {
        const double t = cs[i] * hj[i] + sn[i] * hj[i + 1];
        hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
        hj[i] = t;
      }
      const double rr = std::hypot(hj[j], hj[j + 1]);
      if (rr == 0.0 || bad(rr)) {
        done(false, FailureKind::ScalarBreakdown, j + 1);
        return res;
      }
      cs[j] = hj[j] / rr;
      sn[j] = hj[j + 1] / rr;
      hj[j] = rr;
      hj[j + 1] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];

      const Vector yv = hessenberg_solve(h, ld, g, j + 1);
      k::copy(x, trial);
      for (std::size_t i = 0; i <= j; ++i) k::axpy(yv[i], flexible ? zs[i] : vs[i], trial);
      relres = true_res(trial);
      record(rep, static_cast<double>(total), relres);
      if (bad(relres)) {
        done(false, FailureKind::ScalarBreakdown, j + 1);
        return res;
      }
      if (relres <= cfg.rel_tol) {
        k::copy(trial, x);
        done(true, FailureKind::None, j + 1);
        return res;
      }
      if (stag.push(relres)) {
        k::copy(trial, x);
        done(false, FailureKind::Stagnation, j + 1);
        return res;
      }
      if (hnext == 0.0) {  // lucky breakdown: the cycle cannot grow further
        ++j;
        break;
      }
      k::copy(w, vs[j + 1]);
      k::scale(1.0 / hnext, vs[j + 1]);
    }
    const Vector yv = hessenberg_solve(h, ld, g, j);
    for (std::size_t i = 0; i < j; ++i) k::axpy(yv[i], flexible ? zs[i] : vs[i], x);
    rep.cycle_iters = j;
  }
  done(false, FailureKind::MaxIters, rep.cycle_iters);
  return res;
}

SolveResult pcg_impl(const LinearOperator& op, const LinearOperator& precond,
                     std::span<const double> b, const SolveConfig& cfg) {
  check_sizes(op, precond, b, cfg);
  const std::size_t n = b.size();
  SolveResult res;
  SolveReport& rep = res.report;
  Vector& x = res.x;
  x = initial_guess(cfg, n);
  TrueResidual true_res(op, b);
  double relres = true_res(x);
  record(rep, 0, relres);
  if (relres <= cfg.rel_tol) {
    finish(rep, true, FailureKind::None, 0);
    return res;
  }
  Vector r(true_res.vector().begin(), true_res.vector().end());
  Vector z(n), p(n), q(n);
  precond.apply(r, z);
  k::copy(z, p);
  double rz = k::dot(r, z);
  StagnationMonitor stag(cfg.stagnation_window);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    op.apply(p, q);
    const double pq = k::dot(p, q);
    const double pp = k::dot(p, p);
    if (bad(pq) || std::abs(pq) < 1e-300 * pp || rz == 0.0 || bad(rz)) {
      finish(rep, false, FailureKind::ScalarBreakdown, static_cast<double>(it - 1));
      return res;
    }
    const double alpha = rz / pq;
    k::axpy(alpha, p, x);
    k::axpy(-alpha, q, r);
    relres = true_res(x);
    record(rep, static_cast<double>(it), relres);
    if (bad(relres)) {
      finish(rep, false, FailureKind::ScalarBreakdown, static_cast<double>(it));
      return res;
    }
    if (relres <= cfg.rel_tol) {
      finish(rep, true, FailureKind::None, static_cast<double>(it));
      return res;
    }
    if (stag.push(relres)) {
      finish(rep, false, FailureKind::Stagnation, static_cast<double>(it));
      return res;
    }
    precond.apply(r, z);
    const double rz_new = k::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    k::xpby(z, beta, p);
  }
  finish(rep, false, FailureKind::MaxIters, static_cast<double>(cfg.max_iters));
  return res;
}

void fill_inner_stats(SolveReport& rep, std::vector<std::size_t> counts) {
  rep.inner_iters = std::move(counts);
  rep.inner_iters_total = 0;
  for (std::size_t c : rep.inner_iters) rep.inner_iters_total += c;
  rep.inner_iters_avg = rep.outer_iters > 0.0
                            ? static_cast<double>(rep.inner_iters_total) / rep.outer_iters
                            : static_cast<double>(rep.inner_iters_total);
}

SolveResult nested_minres(const LinearOperator& a, const DeflationBasis& basis,
                          const LinearOperator& inner_precond, std::span<const double> b,
                          const SolveConfig& cfg) {
  if (basis.k() > 0 && basis.n() != a.size())
    throw DimensionError("deflation basis rows differ from the operator size");
  const std::size_t n = a.size();
  // DeflatedOperator wants a SparseSymMatrix; route through a generic
  // operator so any symmetric A works.
  Vector abs2(basis.k());
  for (std::size_t i = 0; i < basis.k(); ++i) abs2[i] = 2.0 * std::abs(basis.lambda[i]);
  FunctionOperator mmr(
      n,
      [&](std::span<const double> u, std::span<double> y) {
        a.apply(u, y);
        if (basis.k() == 0) return;
        Vector c(basis.k());
        k::gemv_t(n, basis.k(), basis.vectors.data(), u, c);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= abs2[i];
        k::gemv_acc(n, basis.k(), basis.vectors.data(), c, y);
      },
      "M_mr");

  SolveConfig icfg;
  icfg.rel_tol = cfg.inner_tol;
  icfg.max_iters = std::max<std::size_t>(1, cfg.inner_max_iters);
  icfg.stagnation_window = cfg.stagnation_window;

  std::vector<std::size_t> counts;
  std::size_t inner_total = 0;
  FunctionOperator outer_precond(
      n,
      [&](std::span<const double> y, std::span<double> z) {
        SolveResult r = pcg_impl(mmr, inner_precond, y, icfg);
        k::copy(r.x, z);
        const auto its = static_cast<std::size_t>(r.report.outer_iters);
        counts.push_back(its);
        inner_total += its;
      },
      "inner-pcg");

  SolveResult res = minres_impl(a, outer_precond, b, cfg,
                                [&] { return inner_total >= cfg.max_iters; });
  fill_inner_stats(res.report, std::move(counts));
  res.report.total_iters = static_cast<double>(res.report.inner_iters_total);
  // Report the history against cumulative inner iterations.
  std::size_t cum = res.report.inner_iters.empty() ? 0 : res.report.inner_iters[0];
  for (std::size_t i = 1; i < res.report.history_index.size(); ++i) {
    if (i < res.report.inner_iters.size()) cum += res.report.inner_iters[i];
    res.report.history_index[i] = static_cast<double>(cum);
  }
  if (!res.report.history_index.empty()) res.report.history_index[0] = 0.0;
  return res;
}

std::size_t parse_count(std::string_view s, const std::string& whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || v == 0)
    throw SpecError("bad restart '" + std::string(s) + "' in solver spec '" + whole + "'");
  return v;
}

}  // namespace

SolveResult minres(const LinearOperator& op, const LinearOperator& precond,
                   std::span<const double> b, const SolveConfig& cfg) {
  return minres_impl(op, precond, b, cfg, nullptr);
}

SolveResult pcg(const LinearOperator& op, const LinearOperator& precond,
                std::span<const double> b, const SolveConfig& cfg) {
  return pcg_impl(op, precond, b, cfg);
}

SolveResult gmres_restarted(const LinearOperator& op, const LinearOperator& precond,
                            std::span<const double> b, const SolveConfig& cfg) {
  return gmres_core(op, precond, b, cfg, false, nullptr);
}

SolveResult fgmres_gmres(const LinearOperator& op, const LinearOperator& precond,
                         std::span<const double> b, const SolveConfig& cfg) {
  SolveConfig icfg;
  icfg.rel_tol = cfg.inner_tol;
  icfg.max_iters = std::max<std::size_t>(1, cfg.inner_max_iters);
  icfg.restart = std::max<std::size_t>(1, cfg.inner_restart);
  icfg.stagnation_window = cfg.stagnation_window;
  std::vector<std::size_t> counts;
  auto inner = [&](std::span<const double> v, std::span<double> z) {
    if (cfg.inner_tol <= 0.0) {
      precond.apply(v, z);
      counts.push_back(0);
      return;
    }
    SolveResult r = gmres_core(op, precond, v, icfg, false, nullptr);
    k::copy(r.x, z);
    counts.push_back(static_cast<std::size_t>(r.report.outer_iters));
  };
  SolveResult res = gmres_core(op, precond, b, cfg, true, inner);
  fill_inner_stats(res.report, std::move(counts));
  res.report.total_iters =
      res.report.outer_iters + static_cast<double>(res.report.inner_iters_total);
  return res;
}

SolveResult bicgstab(const LinearOperator& op, const LinearOperator& precond,
                     std::span<const double> b, const SolveConfig& cfg) {
  check_sizes(op, precond, b, cfg);
  const std::size_t n = b.size();
  SolveResult res;
  SolveReport& rep = res.report;
  Vector& x = res.x;
  x = initial_guess(cfg, n);
  TrueResidual true_res(op, b);
  double relres = true_res(x);
  record(rep, 0, relres);
  if (relres <= cfg.rel_tol) {
    finish(rep, true, FailureKind::None, 0);
    return res;
  }
  constexpr double kTiny = 1e-300;
  Vector r(true_res.vector().begin(), true_res.vector().end());
  const Vector rt = r;
  Vector p(n, 0.0), v(n, 0.0), ph(n), s(n), sh(n), t(n), xh(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  StagnationMonitor stag(cfg.stagnation_window);

  auto breakdown = [&](double iters) {
    finish(rep, false, FailureKind::ScalarBreakdown, iters);
    return res;
  };

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    const double itd = static_cast<double>(it);
    const double rho1 = k::dot(rt, r);
    if (std::abs(rho1) < kTiny || bad(rho1)) return breakdown(itd - 1);
    if (it == 1) {
      k::copy(r, p);
    } else {
      const double beta = (rho1 / rho) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    precond.apply(p, ph);
    op.apply(ph, v);
    const double rtv = k::dot(rt, v);
    if (std::abs(rtv) < kTiny || bad(rtv)) return breakdown(itd - 1);
    alpha = rho1 / rtv;
    if (bad(alpha)) return breakdown(itd - 1);
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    k::copy(x, xh);
    k::axpy(alpha, ph, xh);
    relres = true_res(xh);
    record(rep, itd - 0.5, relres);
    if (relres <= cfg.rel_tol) {
      k::copy(xh, x);
      finish(rep, true, FailureKind::None, itd - 0.5);
      return res;
    }
    precond.apply(s, sh);
    op.apply(sh, t);
    const double tt = k::dot(t, t);
    if (tt < kTiny || bad(tt)) return breakdown(itd - 0.5);
    omega = k::dot(t, s) / tt;
    if (std::abs(omega) < kTiny || bad(omega)) return breakdown(itd - 0.5);
    k::copy(xh, x);
    k::axpy(omega, sh, x);
    for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
    relres = true_res(x);
    record(rep, itd, relres);
    if (bad(relres)) return breakdown(itd);
    if (relres <= cfg.rel_tol) {
      finish(rep, true, FailureKind::None, itd);
      return res;
    }
    if (stag.push(relres)) {
      finish(rep, false, FailureKind::Stagnation, itd);
      return res;
    }
    rho = rho1;
  }
  finish(rep, false, FailureKind::MaxIters, static_cast<double>(cfg.max_iters));
  return res;
}

SolveResult minres_cg(const LinearOperator& a, const DeflationBasis& basis,
                      const LinearOperator& m_cg, std::span<const double> b,
                      const SolveConfig& cfg) {
  if (m_cg.size() != a.size()) throw DimensionError("minres_cg: preconditioner size differs");
  return nested_minres(a, basis, m_cg, b, cfg);
}

SolveResult minres_cg_star(const LinearOperator& a, const DeflationBasis& basis,
                           std::shared_ptr<const LinearOperator> inverse_approx,
                           std::span<const double> b, const SolveConfig& cfg) {
  const SmwInverse smw(std::move(inverse_approx), basis);
  if (smw.size() != a.size()) throw DimensionError("minres_cg_star: preconditioner size differs");
  return nested_minres(a, basis, smw, b, cfg);
}

SolverSpec parse_solver_spec(const std::string& text) {
  SolverSpec spec;
  spec.text = text;
  if (text == "minres-cg") {
    spec.kind = SolverKind::MinresCg;
  } else if (text == "minres-cg-star") {
    spec.kind = SolverKind::MinresCgStar;
  } else if (text == "minres") {
    spec.kind = SolverKind::Minres;
  } else if (text == "cg") {
    spec.kind = SolverKind::Cg;
  } else if (text == "bicgstab") {
    spec.kind = SolverKind::Bicgstab;
  } else if (text.rfind("gmres:", 0) == 0) {
    spec.kind = SolverKind::Gmres;
    spec.restart = parse_count(std::string_view(text).substr(6), text);
  } else if (text.rfind("fgmres:", 0) == 0) {
    spec.kind = SolverKind::Fgmres;
    const std::string_view rest = std::string_view(text).substr(7);
    const std::size_t c = rest.find(':');
    if (c == std::string_view::npos)
      throw SpecError("solver spec '" + text + "' expects fgmres:<m1>:<m2>");
    spec.restart = parse_count(rest.substr(0, c), text);
    spec.inner_restart = parse_count(rest.substr(c + 1), text);
  } else {
    throw SpecError("unknown solver '" + text +
                    "' (expected minres-cg, minres-cg-star, minres, cg, gmres:<m>, "
                    "fgmres:<m1>:<m2> or bicgstab)");
  }
  return spec;
}

std::size_t storage_vectors(const SolverSpec& spec, std::size_t kdim) {
  switch (spec.kind) {
    case SolverKind::MinresCg:
    case SolverKind::MinresCgStar: return 11 + kdim;
    case SolverKind::Minres: return 7;
    case SolverKind::Cg: return 4;
    case SolverKind::Gmres: return spec.restart + 2;
    case SolverKind::Fgmres: return 2 * spec.restart + spec.inner_restart + 4;
    case SolverKind::Bicgstab: return 6;
  }
  return 0;
}

}  // namespace mrcg
