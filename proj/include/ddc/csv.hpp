#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddc/core.hpp"

namespace ddc {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(where + ": not a number: `" + s + "`");
  return v;
}

inline unsigned long long parse_uint(const std::string& s, const std::string& where) {
  unsigned long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(where + ": not an unsigned integer: `" + s + "`");
  return v;
}

/// Minimal reader for the comma-separated files this library writes
/// (no quoting; the first line is a header).
class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(in_, line)) throw FormatError(path + ": empty file");
    header_ = split(line);
  }

  const std::vector<std::string>& header() const { return header_; }

  void expect_header(const std::vector<std::string>& cols) const {
    if (header_ != cols) {
      std::string want;
      for (const auto& c : cols) want += (want.empty() ? "" : ",") + c;
      throw FormatError(path_ + ": unexpected header, want `" + want + "`");
    }
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields = split(line);
      if (fields.size() != header_.size())
        throw FormatError(where() + ": expected " + std::to_string(header_.size()) + " fields");
      return true;
    }
    return false;
  }

  std::string where() const { return path_ + ":" + std::to_string(line_ + 1); }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(line);
    while (std::getline(in, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

}  // namespace ddc
