#include <curl/curl.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "mrcg/bench.hpp"
#include "mrcg/matrix_market.hpp"

namespace mrcg {

namespace fs = std::filesystem;

const std::vector<MatrixInfo>& matrix_registry() {
  static const std::vector<MatrixInfo> registry = {
      {"bcsstm10", "HB", "bcsstm10", 1086, 22092, 54, {}},
      {"bcsstm27", "HB", "bcsstm27", 1224, 56126, 31, {}},
      {"nasa1824", "Nasa", "nasa1824", 1824, 39208, 20, {}},
      {"meg4", "HB", "meg4", 5860, 25258, 54, {}},
      {"benzene", "PARSEC", "benzene", 8219, 242669, 2, {}},
      {"si10h16", "PARSEC", "Si10H16", 17077, 875923, 41, {}},
      {"si5h12", "PARSEC", "Si5H12", 19898, 738598, 6, {}},
      {"sio", "PARSEC", "SiO", 33401, 1317655, 8, {{0.25, 16}, {0.5, 26}, {0.75, 41}}},
  };
  return registry;
}

const MatrixInfo* find_matrix(const std::string& id) {
  std::string lower = id;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& m : matrix_registry())
    if (m.id == lower) return &m;
  return nullptr;
}

std::string known_matrix_ids() {
  std::string out;
  for (const auto& m : matrix_registry()) {
    if (!out.empty()) out += ", ";
    out += m.id;
  }
  return out;
}

fs::path default_cache_dir() {
  if (const char* d = std::getenv("MRCG_CACHE_DIR"); d && *d) return d;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return fs::path(x) / "mrcg";
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".cache" / "mrcg";
  return fs::temp_directory_path() / "mrcg-cache";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw FetchError("SHA-256 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FetchError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& bytes) {
  fs::path tmp = p;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FetchError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FetchError("short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::size_t collect(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  static_cast<std::string*>(user)->append(ptr, size * nmemb);
  return size * nmemb;
}

std::string http_get(const std::string& url) {
  static std::once_flag init;
  std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
  CURL* h = curl_easy_init();
  if (!h) throw FetchError("libcurl initialization failed");
  std::string body;
  char err[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(h, CURLOPT_URL, url.c_str());
  curl_easy_setopt(h, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(h, CURLOPT_WRITEFUNCTION, collect);
  curl_easy_setopt(h, CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(h, CURLOPT_ERRORBUFFER, err);
  curl_easy_setopt(h, CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(h, CURLOPT_USERAGENT, "mrcg-fetch/1.0");
  const CURLcode rc = curl_easy_perform(h);
  long status = 0;
  curl_easy_getinfo(h, CURLINFO_RESPONSE_CODE, &status);
  curl_easy_cleanup(h);
  if (rc != CURLE_OK)
    throw FetchError("download of " + url + " failed: " +
                     (err[0] ? std::string(err) : curl_easy_strerror(rc)));
  if (status != 200)
    throw FetchError("download of " + url + " failed with HTTP status " + std::to_string(status));
  return body;
}

std::uint64_t octal_field(const char* p, std::size_t len) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < len && p[i]; ++i) {
    if (p[i] == ' ') continue;
    if (p[i] < '0' || p[i] > '7') break;
    v = v * 8 + static_cast<std::uint64_t>(p[i] - '0');
  }
  return v;
}

std::string cstr_field(const char* p, std::size_t len) {
  return std::string(p, strnlen(p, len));
}

void check_header(const fs::path& p, const MatrixInfo& info) {
  const MatrixMarketHeader h = read_matrix_market_header(p);
  if (h.rows != info.n || h.cols != info.n)
    throw FetchError(p.string() + " has size " + std::to_string(h.rows) + "x" +
                     std::to_string(h.cols) + ", expected " + std::to_string(info.n));
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string gunzip(const std::string& compressed) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FetchError("zlib initialization failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FetchError("corrupt gzip data");
    }
    out.append(buf, sizeof buf - zs.avail_out);
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::optional<std::string> tar_member(const std::string& tar, const std::string& suffix) {
  std::size_t pos = 0;
  while (pos + 512 <= tar.size()) {
    const char* h = tar.data() + pos;
    if (h[0] == '\0') break;  // end-of-archive block
    std::string name = cstr_field(h, 100);
    const std::string prefix = cstr_field(h + 345, 155);
    if (std::string(h + 257, 5) == "ustar" && !prefix.empty()) name = prefix + "/" + name;
    const std::uint64_t size = octal_field(h + 124, 12);
    const char type = h[156];
    const std::size_t data = pos + 512;
    if (data + size > tar.size()) throw FetchError("truncated tar archive");
    const bool regular = type == '0' || type == '\0';
    if (regular && name.size() >= suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      return tar.substr(data, size);
    pos = data + (size + 511) / 512 * 512;
  }
  return std::nullopt;
}

fs::path fetch_matrix(const std::string& id, const FetchOptions& opt) {
  const MatrixInfo* info = find_matrix(id);
  if (!info)
    throw FetchError("unknown matrix id '" + id + "'; known ids: " + known_matrix_ids());
  const fs::path dir = opt.cache_dir.empty() ? default_cache_dir() : opt.cache_dir;
  const fs::path file = dir / (info->name + ".mtx");
  fs::path sidecar = file;
  sidecar += ".sha256";

  if (fs::exists(file)) {
    const std::string actual = sha256_file(file);
    if (fs::exists(sidecar)) {
      std::string recorded = read_file(sidecar);
      recorded = recorded.substr(0, recorded.find_first_of(" \t\r\n"));
      if (recorded != actual)
        throw FetchError("hash mismatch for cached " + file.string() + ": recorded " + recorded +
                         ", found " + actual);
    } else {
      write_file_atomic(sidecar, actual + "  " + file.filename().string() + "\n");
    }
    check_header(file, *info);
    return file;
  }
  if (opt.offline)
    throw FetchError("offline and " + file.string() + " is not cached (cold cache)");

  fs::create_directories(dir);
  const std::string url = opt.base_url + "/" + info->group + "/" + info->name + ".tar.gz";
  const std::string tar = gunzip(http_get(url));
  const auto mtx = tar_member(tar, "/" + info->name + ".mtx");
  if (!mtx) throw FetchError("archive " + url + " has no " + info->name + ".mtx");
  write_file_atomic(file, *mtx);
  write_file_atomic(sidecar, sha256_hex(*mtx) + "  " + file.filename().string() + "\n");
  check_header(file, *info);
  return file;
}

}  // namespace mrcg
