#pragma once

// File, CSV, digest and worker-pool helpers shared by the commands.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>

#include "detkit/error.hpp"

namespace detkit::cli {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

/// Files with the given extension directly inside `dir`, sorted by name.
inline std::vector<fs::path> list_files(const fs::path& dir, std::string_view ext) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 digest failed");
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Comma-separated rows without quoting. Blank lines and lines starting with
/// '#' are skipped. When `header` is non-empty the first row must equal it.
inline std::vector<CsvRow> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  const std::string text = read_file(path);
  std::vector<CsvRow> rows;
  std::size_t line_no = 0, start = 0;
  bool header_seen = header.empty();
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    CsvRow row{line_no, {}};
    std::size_t p = 0;
    while (true) {
      std::size_t q = line.find(',', p);
      row.fields.emplace_back(trim(line.substr(p, q == std::string_view::npos ? q : q - p)));
      if (q == std::string_view::npos) break;
      p = q + 1;
    }
    if (!header_seen) {
      if (row.fields != header)
        throw ParseError(fmt::format("expected header '{}'", fmt::join(header, ",")), line_no,
                         path.string());
      header_seen = true;
      continue;
    }
    if (!header.empty() && row.fields.size() != header.size())
      throw ParseError(fmt::format("expected {} fields, found {}", header.size(), row.fields.size()),
                       line_no, path.string());
    rows.push_back(std::move(row));
  }
  if (!header_seen)
    throw ParseError(fmt::format("missing header '{}'", fmt::join(header, ",")), 0, path.string());
  return rows;
}

inline double parse_double(const std::string& s, std::size_t line, const fs::path& file,
                           const char* what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("invalid {} '{}'", what, s), line, file.string());
  }
}

inline long parse_long(const std::string& s, std::size_t line, const fs::path& file,
                       const char* what) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("invalid {} '{}'", what, s), line, file.string());
  }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must write
/// only to their own slot. If several items throw, the exception of the
/// lowest index is rethrown, so failures are also independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned count = unsigned(std::min<std::size_t>(jobs, n));
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detkit::cli
