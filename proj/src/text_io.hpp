#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fuse2d/error.hpp"

namespace fuse2d::detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Splits on '\n', tolerating a trailing '\r' and a missing final newline.
/// A final empty line is not reported.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto end = line.find(sep, pos);
    if (end == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      break;
    }
    out.push_back(trim(line.substr(pos, end - pos)));
    pos = end + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string where(const std::filesystem::path& file, std::size_t line_no) {
  return file.string() + ":" + std::to_string(line_no);
}

/// Fixed-precision decimal used by every text writer in the project.
inline void append_fixed(std::string& out, double v, int digits = 6) {
  char buf[64];
  int n = std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  // Avoid "-0.000000" so equal values print identically.
  if (n > 0 && buf[0] == '-') {
    bool all_zero = true;
    for (int i = 1; i < n; ++i) {
      if (buf[i] != '0' && buf[i] != '.') {
        all_zero = false;
        break;
      }
    }
    if (all_zero) {
      out.append(buf + 1, static_cast<std::size_t>(n - 1));
      return;
    }
  }
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace fuse2d::detail
