#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "memop/error.hpp"
#include "memop/numerics.hpp"
#include "memop/text.hpp"

namespace memop {

namespace fs = std::filesystem;

// Write-temp-then-rename so readers never observe a half-written file.
inline void atomic_write(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return lines;
}

// ---- key = value files ----

struct KeyValue {
  std::string value;
  int line = 0;
};

using KeyValueMap = std::map<std::string, KeyValue>;

// `key = value` per line; `#` starts a comment; blank lines ignored; keys unique.
inline KeyValueMap parse_key_values(std::string_view text, const std::string& source) {
  KeyValueMap out;
  int n = 0;
  for (std::string_view raw : lines_of(text)) {
    ++n;
    std::string_view line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string_view::npos) throw FormatError(where + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (out.count(key)) throw FormatError(where + ": duplicate key '" + key + "'");
    out[key] = {value, n};
  }
  return out;
}

// ---- trajectory CSV ----

inline std::string csv_header(int dim, bool with_i, bool flag) {
  std::string h = "t";
  auto block = [&](const char* what) {
    for (const char* part : {"re", "im"})
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) h += std::string(",") + part + "_" + what + "_" + std::to_string(r) + std::to_string(c);
  };
  block("G");
  if (with_i) block("I");
  if (flag) h += ",extrapolated";
  return h;
}

struct CsvTrajectory {
  int dim = 1;
  std::vector<double> t;
  std::vector<ComplexMatrix> g;
  std::vector<ComplexMatrix> i_int;  // NaN-filled where a method produces no I
  std::vector<int> extrapolated;     // empty when the column is absent
};

inline void append_matrix(std::string& s, const ComplexMatrix& m) {
  for (std::size_t k = 0; k < m.size(); ++k) (s += ',') += format_real(m[k].real());
  for (std::size_t k = 0; k < m.size(); ++k) (s += ',') += format_real(m[k].imag());
}

inline std::string format_csv(const CsvTrajectory& tr) {
  const bool flag = !tr.extrapolated.empty();
  std::string s = csv_header(tr.dim, true, flag) + "\n";
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    s += format_real(tr.t[k]);
    append_matrix(s, tr.g[k]);
    append_matrix(s, tr.i_int[k]);
    if (flag) (s += ',') += std::to_string(tr.extrapolated[k]);
    s += '\n';
  }
  return s;
}

inline CsvTrajectory parse_csv(std::string_view text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError(source + ": empty CSV");
  const auto head = split(lines[0], ',');
  CsvTrajectory tr;
  bool flag = false;
  if (head.size() == 1 + 4 + 1 || head.size() == 1 + 16 + 1) flag = true;
  const std::size_t body = head.size() - 1 - (flag ? 1 : 0);
  if (body == 4) tr.dim = 1;
  else if (body == 16) tr.dim = 2;
  else throw FormatError(source + ":1: unexpected column count " + std::to_string(head.size()));
  if (std::string(lines[0]) != csv_header(tr.dim, true, flag)) throw FormatError(source + ":1: unexpected header");
  const std::size_t n = static_cast<std::size_t>(tr.dim * tr.dim);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split(lines[li], ',');
    const std::string where = source + ":" + std::to_string(li + 1);
    if (f.size() != head.size()) throw FormatError(where + ": expected " + std::to_string(head.size()) + " fields");
    tr.t.push_back(parse_number<double>(f[0], where));
    ComplexMatrix g(tr.dim), i(tr.dim);
    for (std::size_t k = 0; k < n; ++k) {
      g[k] = Complex(parse_number<double>(f[1 + k], where), parse_number<double>(f[1 + n + k], where));
      i[k] = Complex(parse_number<double>(f[1 + 2 * n + k], where), parse_number<double>(f[1 + 3 * n + k], where));
    }
    tr.g.push_back(g);
    tr.i_int.push_back(i);
    if (flag) tr.extrapolated.push_back(parse_number<int>(f.back(), where));
  }
  return tr;
}

}  // namespace memop
