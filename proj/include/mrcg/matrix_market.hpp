#pragma once

#include <filesystem>
#include <string>

#include "mrcg/sparse.hpp"

namespace mrcg {

struct MatrixMarketHeader {
  std::string object;
  std::string format;
  std::string field;
  std::string symmetry;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t entries = 0;
};

/// Reads only the banner and size line. Gzip-compressed files are read
/// transparently.
MatrixMarketHeader read_matrix_market_header(const std::filesystem::path& path);

/// Loads a `coordinate real symmetric` file and expands it to the full
/// pattern. Throws ParseError with a distinct kind for each failure class;
/// files declared general or skew-symmetric are rejected.
SparseSymMatrix load_matrix_market(const std::filesystem::path& path);

/// Loads a coordinate real file declared general, symmetric or
/// skew-symmetric into a general CSR matrix (triangle storage is expanded).
CsrMatrix load_matrix_market_general(const std::filesystem::path& path);

/// Writes the lower triangle with `symmetric` symmetry. Values are printed
/// with 17 significant digits so a reload is bit-identical.
void save_matrix_market(const std::filesystem::path& path, const SparseSymMatrix& a);
/// Writes every stored entry with `general` symmetry.
void save_matrix_market(const std::filesystem::path& path, const CsrMatrix& a);

}  // namespace mrcg
