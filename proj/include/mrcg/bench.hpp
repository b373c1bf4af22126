#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrcg/eigdefl.hpp"
#include "mrcg/error.hpp"
#include "mrcg/krylov.hpp"

namespace mrcg {

// ---------------------------------------------------------------------------
// Test matrix registry and download

struct MatrixInfo {
  std::string id;     ///< lower-case registry id
  std::string group;  ///< collection group
  std::string name;   ///< collection name (archive and .mtx stem)
  std::size_t n = 0;
  std::size_t nnz = 0;  ///< full-pattern count from the published table
  std::size_t k = 0;    ///< negative eigenvalues of A
  /// Published diagonal shifts sigma with the negative count of A - sigma I.
  std::vector<std::pair<double, std::size_t>> shifts;
};

const std::vector<MatrixInfo>& matrix_registry();
/// Case-insensitive lookup; nullptr if unknown.
const MatrixInfo* find_matrix(const std::string& id);
/// Comma separated list of registry ids.
std::string known_matrix_ids();

class FetchError : public Error {
 public:
  using Error::Error;
};

struct FetchOptions {
  std::filesystem::path cache_dir;  ///< empty means default_cache_dir()
  bool offline = false;
  std::string base_url = "https://sparse.tamu.edu/MM";
};

/// $MRCG_CACHE_DIR, else $XDG_CACHE_HOME/mrcg, else ~/.cache/mrcg.
std::filesystem::path default_cache_dir();

/// Returns the cached Matrix Market file for `id`, downloading the archive
/// over HTTPS on a cold cache. Every cached file has a SHA-256 sidecar that
/// is checked on reuse, and the header size is checked against the registry.
/// Throws FetchError (unknown id, offline with cold cache, HTTP failure,
/// hash or size mismatch).
std::filesystem::path fetch_matrix(const std::string& id, const FetchOptions& opt = {});

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

/// Decompresses gzip data in memory.
std::string gunzip(const std::string& compressed);
/// Contents of the first regular file in a tar archive whose path ends with
/// `suffix`; nullopt if none.
std::optional<std::string> tar_member(const std::string& tar, const std::string& suffix);

// ---------------------------------------------------------------------------
// Experiments

enum class RhsKind { Random, Ones, File };

struct ExperimentSpec {
  std::string matrix;  ///< Matrix Market path or registry id
  double shift = 0.0;  ///< solve with A - shift I
  RhsKind rhs = RhsKind::Random;
  std::uint64_t seed = 42;
  std::filesystem::path rhs_file;
  std::vector<std::string> solvers;
  std::vector<std::string> preconds;
  double rel_tol = 1e-5;
  double inner_tol = 1e-3;
  std::size_t max_iters = 20000;
  bool reorder = true;
  bool equilibrate = true;
  EigConfig eig;
  std::filesystem::path basis_cache_dir;  ///< empty disables the disk cache
  std::filesystem::path out_dir;          ///< empty writes nothing
  std::size_t threads = 1;
  FetchOptions fetch;
};

/// Applies a named default profile: "suitesparse" (1e-5 / 1e-3, 20000),
/// "brake-small" (1e-3 / 1e-2, 2000) or "brake-large" (1e-3 / 1e-2, 15000).
void apply_profile(ExperimentSpec& spec, const std::string& profile);

struct ResultRow {
  std::string matrix;
  std::size_t n = 0;
  std::size_t nnz = 0;        ///< full pattern
  std::size_t nnz_lower = 0;  ///< lower triangle with diagonal
  std::size_t k = 0;
  std::string solver;
  std::string precond;
  /// Preconditioner or basis construction failed; report is empty.
  bool setup_error = false;
  std::string message;
  SolveReport report;
  std::size_t storage_vectors = 0;
  double wall_time = 0.0;

  bool ok() const noexcept { return !setup_error && report.converged; }
  /// "ok", "†", "‡", "∗" or "setup_error".
  std::string status() const;
  /// "o(i)" for GMRES-type solvers, else the outer count.
  std::string outer_text() const;
};

struct ExperimentResult {
  std::string matrix;
  std::size_t n = 0;
  std::size_t nnz = 0;
  std::size_t nnz_lower = 0;
  std::size_t k = 0;
  std::vector<ResultRow> rows;
};

/// Runs every (solver, preconditioner) pair. Rows come back in spec order
/// (solver-major). Setup problems with the matrix or spec strings throw;
/// failures of individual preconditioners or solves become rows.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Loads a path or registry id and applies the shift.
SparseSymMatrix load_experiment_matrix(const ExperimentSpec& spec, std::string* display_name);

/// Deterministic right-hand side for the spec.
Vector experiment_rhs(const ExperimentSpec& spec, std::size_t n);

std::string results_csv(const ExperimentResult& result, bool with_wall_time = true);
nlohmann::json results_json(const ExperimentSpec& spec, const ExperimentResult& result);

/// CSV rows (iteration_index, relative_residual); nested solvers are indexed
/// by cumulative inner iterations at each outer step.
std::string residual_history_csv(const SolveReport& report);
void residual_history_export(const SolveReport& report, const std::filesystem::path& path);

/// Writes results.csv, results.json and one history file per row.
void write_experiment_outputs(const ExperimentSpec& spec, const ExperimentResult& result);

}  // namespace mrcg
