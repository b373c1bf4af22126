// Command line front end: solve grids, shift sweeps, matrix downloads and
// synthetic QEP generation.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "mrcg/bench.hpp"
#include "mrcg/matrix_market.hpp"
#include "mrcg/shiftreal.hpp"

namespace {

constexpr int kAllOk = 0;
constexpr int kSolverFailed = 1;
constexpr int kSetupError = 2;

void print_table(const mrcg::ExperimentResult& r) {
  std::printf("%s  n=%zu  nnz=%zu  k=%zu\n", r.matrix.c_str(), r.n, r.nnz, r.k);
  std::printf("%-16s %-20s %12s %10s %10s %-12s %12s %8s\n", "solver", "precond", "outer",
              "inner_avg", "total", "status", "rel_res", "vectors");
  for (const auto& row : r.rows) {
    if (row.setup_error) {
      std::printf("%-16s %-20s %12s %10s %10s %-12s %12s %8zu  %s\n", row.solver.c_str(),
                  row.precond.c_str(), "-", "-", "-", "setup_error", "-", row.storage_vectors,
                  row.message.c_str());
      continue;
    }
    const auto& rep = row.report;
    char inner[32] = "-";
    if (!rep.inner_iters.empty()) std::snprintf(inner, sizeof inner, "%.2f", rep.inner_iters_avg);
    std::printf("%-16s %-20s %12s %10s %10g %-12s %12.3e %8zu\n", row.solver.c_str(),
                row.precond.c_str(), row.outer_text().c_str(), inner, rep.total_iters,
                row.status().c_str(), rep.final_rel_residual, row.storage_vectors);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MINRES-CG and companion Krylov solvers for symmetric indefinite systems"};
  app.require_subcommand(1);

  // solve
  mrcg::ExperimentSpec spec;
  std::string rhs = "random";
  std::string profile;
  std::string cache_dir;
  bool no_reorder = false;
  bool no_equilibrate = false;
  auto* solve = app.add_subcommand("solve", "run a solver x preconditioner grid on one matrix");
  solve->add_option("--matrix", spec.matrix, "Matrix Market path or collection id")->required();
  solve->add_option("--shift", spec.shift, "solve with A - shift*I");
  solve->add_option("--solver", spec.solvers,
                    "minres-cg, minres-cg-star, minres, cg, gmres:<m>, fgmres:<m1>:<m2>, bicgstab")
      ->required();
  solve->add_option("--precond", spec.preconds,
                    "none, ilu0, milu:<t>, ilut:<t>, ildlt:<l>:<t>, ildlt-mod:<l>:<t>, smw:<spec>");
  solve->add_option("--profile", profile, "suitesparse, brake-small or brake-large")
      ->check(CLI::IsMember({"suitesparse", "brake-small", "brake-large"}));
  solve->add_option("--rtol", spec.rel_tol, "relative residual tolerance");
  solve->add_option("--itol", spec.inner_tol, "inner tolerance of nested solvers");
  solve->add_option("--maxit", spec.max_iters, "iteration cap");
  solve->add_option("--seed", spec.seed, "seed of the random right-hand side");
  solve->add_option("--rhs", rhs, "random, ones or a vector file");
  solve->add_option("--out", spec.out_dir, "directory for results.csv, results.json, histories/");
  solve->add_option("--threads", spec.threads, "grid cells run concurrently");
  solve->add_option("--basis-cache", spec.basis_cache_dir, "directory caching deflation bases");
  solve->add_option("--eig-tol", spec.eig.eig_tol, "eigenpair residual tolerance");
  solve->add_option("--cache-dir", cache_dir, "matrix download cache (default $MRCG_CACHE_DIR)");
  solve->add_flag("--offline", spec.fetch.offline, "never download");
  solve->add_flag("--no-reorder", no_reorder, "skip minimum-degree ordering in ILDLT");
  solve->add_flag("--no-equilibrate", no_equilibrate, "skip diagonal scaling in ILDLT");

  // sweep
  std::string sweep_config;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "shifted quadratic eigenproblem solves over a grid");
  sweep->add_option("--config", sweep_config, "key = value sweep file")->required();
  sweep->add_option("--out", sweep_out, "CSV output file (default stdout)");

  // fetch
  std::vector<std::string> fetch_ids;
  bool fetch_offline = false;
  auto* fetch = app.add_subcommand("fetch", "download collection matrices into the cache");
  fetch->add_option("ids", fetch_ids, "collection ids")->required();
  fetch->add_option("--cache-dir", cache_dir, "matrix download cache (default $MRCG_CACHE_DIR)");
  fetch->add_flag("--offline", fetch_offline, "only verify the cache");

  // gen-qep
  mrcg::SyntheticQepOptions qep;
  std::string qep_out;
  auto* gen = app.add_subcommand("gen-qep", "write a synthetic QEP instance and a sweep config");
  gen->add_option("--nx", qep.nx);
  gen->add_option("--ny", qep.ny);
  gen->add_option("--seed", qep.seed);
  gen->add_option("--out", qep_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kAllOk : kSetupError;
  }

  try {
    if (*solve) {
      const mrcg::ExperimentSpec cli = spec;
      if (!profile.empty()) {
        mrcg::apply_profile(spec, profile);
        // Explicit flags win over the profile.
        if (solve->count("--rtol")) spec.rel_tol = cli.rel_tol;
        if (solve->count("--itol")) spec.inner_tol = cli.inner_tol;
        if (solve->count("--maxit")) spec.max_iters = cli.max_iters;
      }
      if (spec.preconds.empty()) spec.preconds = {"none"};
      if (rhs == "random") {
        spec.rhs = mrcg::RhsKind::Random;
      } else if (rhs == "ones") {
        spec.rhs = mrcg::RhsKind::Ones;
      } else {
        spec.rhs = mrcg::RhsKind::File;
        spec.rhs_file = rhs;
      }
      spec.reorder = !no_reorder;
      spec.equilibrate = !no_equilibrate;
      if (!cache_dir.empty()) spec.fetch.cache_dir = cache_dir;
      const auto result = mrcg::run_experiment(spec);
      mrcg::write_experiment_outputs(spec, result);
      print_table(result);
      for (const auto& row : result.rows)
        if (!row.ok()) return kSolverFailed;
      return kAllOk;
    }
    if (*sweep) {
      const auto cfg = mrcg::parse_sweep_config(sweep_config);
      const auto parts = mrcg::load_qep_parts(cfg);
      const auto rows = mrcg::run_sweep(cfg, parts);
      const std::string csv = mrcg::sweep_csv(rows);
      if (sweep_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(sweep_out);
        if (!(out << csv)) throw mrcg::IoError("cannot write " + sweep_out);
      }
      for (const auto& r : rows)
        if (!r.converged) return kSolverFailed;
      return kAllOk;
    }
    if (*fetch) {
      mrcg::FetchOptions opt;
      opt.offline = fetch_offline;
      if (!cache_dir.empty()) opt.cache_dir = cache_dir;
      for (const auto& id : fetch_ids) std::cout << mrcg::fetch_matrix(id, opt).string() << "\n";
      return kAllOk;
    }
    if (*gen) {
      const std::filesystem::path dir = qep_out;
      std::filesystem::create_directories(dir);
      const mrcg::QepParts p = mrcg::synthetic_qep(qep);
      const std::pair<const char*, const mrcg::CsrMatrix*> files[] = {
          {"mass", &p.mass}, {"k_e", &p.k_e}, {"d_m", &p.d_m}, {"d_r", &p.d_r},
          {"d_g", &p.d_g},   {"k_r", &p.k_r}, {"k_g", &p.k_g}};
      std::ofstream cfg(dir / "sweep.cfg");
      for (const auto& [key, m] : files) {
        const std::string name = std::string(key) + ".mtx";
        mrcg::save_matrix_market(dir / name, *m);
        cfg << key << " = " << name << "\n";
      }
      cfg << "gamma = -20 20 3 5 60 3\nmode = inner\nprecond = ilu0\n";
      if (!cfg) throw mrcg::IoError("cannot write " + (dir / "sweep.cfg").string());
      std::cout << (dir / "sweep.cfg").string() << "\n";
      return kAllOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "mrcg: " << e.what() << "\n";
    return kSetupError;
  }
  return kSetupError;
}
