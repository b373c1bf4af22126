#include "mrcg/matrix_market.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "mrcg/error.hpp"

namespace mrcg {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Line reader over zlib, which also handles uncompressed files.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path)
      : file_(gzopen(path.string().c_str(), "rb"), &gzclose) {
    if (!file_)
      throw ParseError(ParseErrorKind::Io, "cannot open " + path.string());
    gzbuffer(file_.get(), 1 << 17);
  }

  bool next(std::string& line) {
    line.clear();
    char buf[4096];
    while (gzgets(file_.get(), buf, sizeof buf) != nullptr) {
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++number_;
        return true;
      }
    }
    if (!line.empty()) {
      ++number_;
      return true;
    }
    int err = 0;
    gzerror(file_.get(), &err);
    if (err != Z_OK && err != Z_STREAM_END)
      throw ParseError(ParseErrorKind::Io, "read failure");
    return false;
  }

  std::size_t line_number() const noexcept { return number_; }

 private:
  std::unique_ptr<gzFile_s, int (*)(gzFile)> file_;
  std::size_t number_ = 0;
};

bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '%') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

MatrixMarketHeader parse_header(LineReader& in) {
  std::string line;
  if (!in.next(line))
    throw ParseError(ParseErrorKind::MalformedHeader, "empty file");
  std::istringstream banner(line);
  std::string tag;
  MatrixMarketHeader h;
  banner >> tag >> h.object >> h.format >> h.field >> h.symmetry;
  if (tag != "%%MatrixMarket" || h.symmetry.empty())
    throw ParseError(ParseErrorKind::MalformedHeader,
                     "expected '%%MatrixMarket object format field symmetry'");
  h.object = lower(h.object);
  h.format = lower(h.format);
  h.field = lower(h.field);
  h.symmetry = lower(h.symmetry);
  if (h.object != "matrix")
    throw ParseError(ParseErrorKind::UnsupportedObject, h.object);
  if (h.format != "coordinate")
    throw ParseError(ParseErrorKind::UnsupportedFormat, h.format);
  if (h.field != "real")
    throw ParseError(ParseErrorKind::UnsupportedField, h.field);

  while (in.next(line))
    if (!blank_or_comment(line)) break;
  std::istringstream size(line);
  long long r = -1, c = -1, e = -1;
  if (!(size >> r >> c >> e) || r < 0 || c < 0 || e < 0)
    throw ParseError(ParseErrorKind::MalformedSize,
                     "line " + std::to_string(in.line_number()));
  h.rows = static_cast<std::size_t>(r);
  h.cols = static_cast<std::size_t>(c);
  h.entries = static_cast<std::size_t>(e);
  return h;
}

const char* skip_space(const char* p, const char* end) {
  while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
  return p;
}

struct RawEntries {
  MatrixMarketHeader header;
  std::vector<Triplet> entries;  // as stored in the file, 0-based
};

RawEntries read_entries(const std::filesystem::path& path) {
  LineReader in(path);
  RawEntries raw;
  raw.header = parse_header(in);
  const auto& h = raw.header;
  raw.entries.reserve(h.entries);
  std::string line;
  while (raw.entries.size() < h.entries && in.next(line)) {
    if (blank_or_comment(line)) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    long long i = 0, j = 0;
    double v = 0.0;
    auto bad = [&] {
      return ParseError(ParseErrorKind::MalformedEntry,
                        "line " + std::to_string(in.line_number()));
    };
    p = skip_space(p, end);
    auto ri = std::from_chars(p, end, i);
    if (ri.ec != std::errc()) throw bad();
    p = skip_space(ri.ptr, end);
    auto rj = std::from_chars(p, end, j);
    if (rj.ec != std::errc()) throw bad();
    p = skip_space(rj.ptr, end);
    auto rv = std::from_chars(p, end, v);
    if (rv.ec != std::errc()) throw bad();
    if (skip_space(rv.ptr, end) != end) throw bad();
    if (i < 1 || j < 1 || static_cast<std::size_t>(i) > h.rows ||
        static_cast<std::size_t>(j) > h.cols)
      throw ParseError(ParseErrorKind::IndexOutOfRange,
                       "(" + std::to_string(i) + ", " + std::to_string(j) +
                           ") at line " + std::to_string(in.line_number()));
    raw.entries.push_back({static_cast<std::size_t>(i - 1),
                           static_cast<std::size_t>(j - 1), v});
  }
  if (raw.entries.size() != h.entries)
    throw ParseError(ParseErrorKind::EntryCountMismatch,
                     "expected " + std::to_string(h.entries) + " entries, read " +
                         std::to_string(raw.entries.size()));
  return raw;
}

CsrMatrix expand(const RawEntries& raw, double mirror_sign) {
  const auto& h = raw.header;
  std::vector<Triplet> full;
  full.reserve(2 * raw.entries.size());
  for (const auto& e : raw.entries) {
    if (e.row == e.col) {
      if (mirror_sign < 0.0 && e.value != 0.0)
        throw ParseError(ParseErrorKind::MalformedEntry,
                         "nonzero diagonal in skew-symmetric file");
      full.push_back(e);
    } else {
      full.push_back(e);
      full.push_back({e.col, e.row, mirror_sign * e.value});
    }
  }
  try {
    return CsrMatrix::from_triplets(h.rows, h.cols, std::move(full),
                                    Duplicates::Reject);
  } catch (const InvalidArgument& ex) {
    throw ParseError(ParseErrorKind::DuplicateEntry, ex.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& banner,
                std::size_t rows, std::size_t cols,
                const std::vector<Triplet>& entries) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (f == nullptr) throw IoError("cannot write " + path.string());
  std::fprintf(f, "%s\n%zu %zu %zu\n", banner.c_str(), rows, cols, entries.size());
  for (const auto& e : entries)
    std::fprintf(f, "%zu %zu %.17g\n", e.row + 1, e.col + 1, e.value);
  if (std::fclose(f) != 0) throw IoError("cannot write " + path.string());
}

}  // namespace

MatrixMarketHeader read_matrix_market_header(const std::filesystem::path& path) {
  LineReader in(path);
  return parse_header(in);
}

SparseSymMatrix load_matrix_market(const std::filesystem::path& path) {
  RawEntries raw = read_entries(path);
  if (raw.header.symmetry != "symmetric")
    throw ParseError(ParseErrorKind::UnsupportedSymmetry,
                     "expected symmetric, got " + raw.header.symmetry);
  if (raw.header.rows != raw.header.cols)
    throw ParseError(ParseErrorKind::MalformedSize, "symmetric matrix must be square");
  return SparseSymMatrix(expand(raw, 1.0));
}

CsrMatrix load_matrix_market_general(const std::filesystem::path& path) {
  RawEntries raw = read_entries(path);
  const auto& sym = raw.header.symmetry;
  if (sym == "general") {
    try {
      return CsrMatrix::from_triplets(raw.header.rows, raw.header.cols,
                                      std::move(raw.entries), Duplicates::Reject);
    } catch (const InvalidArgument& ex) {
      throw ParseError(ParseErrorKind::DuplicateEntry, ex.what());
    }
  }
  if (raw.header.rows != raw.header.cols)
    throw ParseError(ParseErrorKind::MalformedSize, "matrix must be square");
  if (sym == "symmetric") return expand(raw, 1.0);
  if (sym == "skew-symmetric") return expand(raw, -1.0);
  throw ParseError(ParseErrorKind::UnsupportedSymmetry, sym);
}

void save_matrix_market(const std::filesystem::path& path, const SparseSymMatrix& a) {
  std::vector<Triplet> lower;
  for (const auto& t : a.csr().triplets())
    if (t.col <= t.row) lower.push_back(t);
  write_file(path, "%%MatrixMarket matrix coordinate real symmetric", a.n(), a.n(),
             lower);
}

void save_matrix_market(const std::filesystem::path& path, const CsrMatrix& a) {
  write_file(path, "%%MatrixMarket matrix coordinate real general", a.rows(),
             a.cols(), a.triplets());
}

}  // namespace mrcg
