#include "mrcg/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "mrcg/kernels.hpp"
#include "mrcg/matrix_market.hpp"
#include "mrcg/precond.hpp"
#include "mrcg/rng.hpp"

namespace mrcg {

namespace fs = std::filesystem;

void apply_profile(ExperimentSpec& spec, const std::string& profile) {
  if (profile == "suitesparse") {
    spec.rel_tol = 1e-5;
    spec.inner_tol = 1e-3;
    spec.max_iters = 20000;
  } else if (profile == "brake-small") {
    spec.rel_tol = 1e-3;
    spec.inner_tol = 1e-2;
    spec.max_iters = 2000;
  } else if (profile == "brake-large") {
    spec.rel_tol = 1e-3;
    spec.inner_tol = 1e-2;
    spec.max_iters = 15000;
  } else {
    throw SpecError("unknown profile '" + profile +
                    "' (expected suitesparse, brake-small or brake-large)");
  }
}

std::string ResultRow::status() const {
  if (setup_error) return "setup_error";
  return status_symbol(report.failure);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool gmres_type(const std::string& solver) {
  return solver.rfind("gmres:", 0) == 0 || solver.rfind("fgmres:", 0) == 0;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string file_stem(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '-';
  return out;
}

bool needs_basis(const SolverSpec& s, const PrecondSpec& p) {
  return s.kind == SolverKind::MinresCg || s.kind == SolverKind::MinresCgStar ||
         p.kind == PrecondKind::Smw;
}

Vector read_vector_file(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open right-hand side file " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ls(line);
    double v;
    while (ls >> v) values.push_back(v);
  }
  // Matrix Market array files carry an "n 1" size line first.
  if (values.size() == n + 2 && values[0] == static_cast<double>(n) && values[1] == 1.0)
    values.erase(values.begin(), values.begin() + 2);
  if (values.size() != n)
    throw IoError(path.string() + " holds " + std::to_string(values.size()) +
                  " values, expected " + std::to_string(n));
  return values;
}

}  // namespace

std::string ResultRow::outer_text() const {
  if (setup_error) return "";
  if (gmres_type(solver))
    return std::to_string(report.cycles) + "(" + std::to_string(report.cycle_iters) + ")";
  return fmt("%g", report.outer_iters);
}

SparseSymMatrix load_experiment_matrix(const ExperimentSpec& spec, std::string* display_name) {
  fs::path path;
  std::string name;
  if (const MatrixInfo* info = find_matrix(spec.matrix);
      info && !fs::exists(fs::path(spec.matrix))) {
    path = fetch_matrix(info->id, spec.fetch);
    name = info->name;
  } else {
    path = spec.matrix;
    if (!fs::exists(path))
      throw IoError("'" + spec.matrix + "' is neither a file nor a known matrix id (" +
                    known_matrix_ids() + ")");
    name = path.stem().string();
  }
  SparseSymMatrix a = load_matrix_market(path);
  if (spec.shift != 0.0) {
    a = a.shifted(spec.shift);
    name += "(sigma=" + fmt("%g", spec.shift) + ")";
  }
  if (display_name) *display_name = name;
  return a;
}

Vector experiment_rhs(const ExperimentSpec& spec, std::size_t n) {
  switch (spec.rhs) {
    case RhsKind::Random: return random_vector(n, spec.seed);
    case RhsKind::Ones: return Vector(n, 1.0);
    case RhsKind::File: return read_vector_file(spec.rhs_file, n);
  }
  return {};
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.solvers.empty()) throw SpecError("at least one solver is required");
  if (spec.preconds.empty()) throw SpecError("at least one preconditioner is required");
  if (!(spec.rel_tol > 0.0 && spec.rel_tol < 1.0))
    throw SpecError("rel_tol must lie in (0, 1)");
  if (spec.max_iters == 0) throw SpecError("max_iters must be positive");

  std::vector<SolverSpec> solvers;
  for (const auto& s : spec.solvers) solvers.push_back(parse_solver_spec(s));
  std::vector<PrecondSpec> preconds;
  for (const auto& p : spec.preconds) preconds.push_back(parse_precond_spec(p));

  ExperimentResult result;
  const SparseSymMatrix a = load_experiment_matrix(spec, &result.matrix);
  const std::size_t n = a.n();
  result.n = n;
  result.nnz = a.nnz();
  result.nnz_lower = a.nnz_triangle();
  const Vector b = experiment_rhs(spec, n);

  // The basis is computed once and only if some cell needs it.
  bool want_basis = false;
  for (const auto& s : solvers)
    for (const auto& p : preconds) want_basis = want_basis || needs_basis(s, p);
  std::shared_ptr<const DeflationBasis> basis;
  std::string basis_error;
  if (want_basis) {
    try {
      if (!spec.basis_cache_dir.empty()) {
        BasisCache cache(spec.basis_cache_dir);
        basis = cache.get_or_compute(a, spec.eig);
      } else {
        basis = std::make_shared<const DeflationBasis>(negative_eigenpairs(a, spec.eig));
      }
      result.k = basis->k();
    } catch (const Error& e) {
      basis_error = std::string("deflation basis: ") + e.what();
    }
  }

  // Preconditioners are built once each and shared by all solvers.
  std::vector<std::shared_ptr<const PreconditionerAction>> built(preconds.size());
  std::vector<std::string> build_error(preconds.size());
  for (std::size_t j = 0; j < preconds.size(); ++j) {
    if (preconds[j].kind == PrecondKind::Smw && !basis) {
      build_error[j] = basis_error;
      continue;
    }
    try {
      built[j] = build_preconditioner(preconds[j], a, basis.get(), spec.reorder, spec.equilibrate);
    } catch (const Error& e) {
      build_error[j] = spec.preconds[j] + ": " + e.what();
    }
  }

  const std::size_t cells = solvers.size() * preconds.size();
  result.rows.resize(cells);
  auto run_cell = [&](std::size_t c) {
    const std::size_t i = c / preconds.size();
    const std::size_t j = c % preconds.size();
    ResultRow& row = result.rows[c];
    row.matrix = result.matrix;
    row.n = n;
    row.nnz = result.nnz;
    row.nnz_lower = result.nnz_lower;
    row.k = result.k;
    row.solver = spec.solvers[i];
    row.precond = spec.preconds[j];
    row.storage_vectors = storage_vectors(solvers[i], result.k);
    if (!built[j]) {
      row.setup_error = true;
      row.message = build_error[j];
      return;
    }
    if (needs_basis(solvers[i], preconds[j]) && !basis) {
      row.setup_error = true;
      row.message = basis_error;
      return;
    }
    SolveConfig cfg;
    cfg.rel_tol = spec.rel_tol;
    cfg.inner_tol = spec.inner_tol;
    cfg.max_iters = spec.max_iters;
    cfg.inner_max_iters = spec.max_iters;
    cfg.restart = std::max<std::size_t>(solvers[i].restart, 1);
    cfg.inner_restart = std::max<std::size_t>(solvers[i].inner_restart, 1);
    const LinearOperator& m = *built[j];
    const auto start = std::chrono::steady_clock::now();
    try {
      SolveResult r;
      switch (solvers[i].kind) {
        case SolverKind::MinresCg: r = minres_cg(a, *basis, m, b, cfg); break;
        case SolverKind::MinresCgStar: r = minres_cg_star(a, *basis, built[j], b, cfg); break;
        case SolverKind::Minres: r = minres(a, m, b, cfg); break;
        case SolverKind::Cg: r = pcg(a, m, b, cfg); break;
        case SolverKind::Gmres: r = gmres_restarted(a, m, b, cfg); break;
        case SolverKind::Fgmres: r = fgmres_gmres(a, m, b, cfg); break;
        case SolverKind::Bicgstab: r = bicgstab(a, m, b, cfg); break;
      }
      row.report = std::move(r.report);
    } catch (const Error& e) {
      row.setup_error = true;
      row.message = e.what();
    }
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const std::size_t workers = std::min(std::max<std::size_t>(spec.threads, 1), cells);
  if (workers <= 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        kernels::set_threads_for_this_thread(1);
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
    for (auto& t : pool) t.join();
  }
  return result;
}

std::string results_csv(const ExperimentResult& result, bool with_wall_time) {
  std::string out =
      "matrix,n,nnz,k,solver,precond,outer,inner_avg,total,status,final_rel_residual,"
      "storage_vectors";
  out += with_wall_time ? ",wall_time,message\n" : ",message\n";
  for (const auto& r : result.rows) {
    const bool nested = !r.setup_error && !r.report.inner_iters.empty();
    out += csv_field(r.matrix) + "," + std::to_string(r.n) + "," + std::to_string(r.nnz) + "," +
           std::to_string(r.k) + "," + csv_field(r.solver) + "," + csv_field(r.precond) + "," +
           r.outer_text() + "," + (nested ? fmt("%.2f", r.report.inner_iters_avg) : "") + "," +
           (r.setup_error ? "" : fmt("%g", r.report.total_iters)) + "," + r.status() + "," +
           (r.setup_error ? "" : fmt("%.6e", r.report.final_rel_residual)) + "," +
           std::to_string(r.storage_vectors);
    if (with_wall_time) out += "," + fmt("%.6f", r.wall_time);
    out += "," + csv_field(r.message) + "\n";
  }
  return out;
}

nlohmann::json results_json(const ExperimentSpec& spec, const ExperimentResult& result) {
  using nlohmann::json;
  json meta = {
      {"matrix_source", spec.matrix},
      {"shift", spec.shift},
      {"seed", spec.seed},
      {"rel_tol", spec.rel_tol},
      {"inner_tol", spec.inner_tol},
      {"max_iters", spec.max_iters},
      {"reorder", spec.reorder},
      {"equilibrate", spec.equilibrate},
      {"drop_tolerance", "relative to the 2-norm of the active column"},
  };
  switch (spec.rhs) {
    case RhsKind::Random:
      meta["rhs"] = "uniform(-1,1) from mt19937_64, top 53 bits of each draw";
      break;
    case RhsKind::Ones: meta["rhs"] = "ones"; break;
    case RhsKind::File: meta["rhs"] = "file:" + spec.rhs_file.string(); break;
  }
  json rows = json::array();
  for (const auto& r : result.rows) {
    json row = {{"solver", r.solver},
                {"precond", r.precond},
                {"status", r.status()},
                {"storage_vectors", r.storage_vectors},
                {"wall_time", r.wall_time}};
    if (r.setup_error) {
      row["message"] = r.message;
    } else {
      const SolveReport& rep = r.report;
      row["converged"] = rep.converged;
      row["failure"] = status_name(rep.failure);
      row["outer"] = r.outer_text();
      row["outer_iters"] = rep.outer_iters;
      row["total_iters"] = rep.total_iters;
      row["final_rel_residual"] = rep.final_rel_residual;
      if (!rep.inner_iters.empty()) {
        row["inner_iters"] = rep.inner_iters;
        row["inner_iters_total"] = rep.inner_iters_total;
        row["inner_iters_avg"] = rep.inner_iters_avg;
      }
    }
    rows.push_back(std::move(row));
  }
  return {{"matrix", result.matrix},
          {"n", result.n},
          {"nnz", result.nnz},
          {"nnz_lower", result.nnz_lower},
          {"k", result.k},
          {"metadata", meta},
          {"rows", rows}};
}

std::string residual_history_csv(const SolveReport& report) {
  std::string out = "iteration_index,relative_residual\n";
  for (std::size_t i = 0; i < report.history.size(); ++i) {
    const double idx = i < report.history_index.size() ? report.history_index[i]
                                                       : static_cast<double>(i);
    out += fmt("%g", idx) + "," + fmt("%.17g", report.history[i]) + "\n";
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace

void residual_history_export(const SolveReport& report, const fs::path& path) {
  write_text(path, residual_history_csv(report));
}

void write_experiment_outputs(const ExperimentSpec& spec, const ExperimentResult& result) {
  if (spec.out_dir.empty()) return;
  std::error_code ec;
  fs::create_directories(spec.out_dir / "histories", ec);
  if (ec) throw IoError("cannot create " + spec.out_dir.string() + ": " + ec.message());
  write_text(spec.out_dir / "results.csv", results_csv(result));
  write_text(spec.out_dir / "results.json", results_json(spec, result).dump(2) + "\n");
  for (const auto& r : result.rows) {
    if (r.setup_error) continue;
    residual_history_export(
        r.report, spec.out_dir / "histories" / (file_stem(r.solver) + "__" + file_stem(r.precond) + ".csv"));
  }
}

}  // namespace mrcg
