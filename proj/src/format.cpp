#include "qsd/format.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "qsd/error.hpp"

namespace qsd {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(ErrorCode::kParse, where + ": not a number '" + std::string(text) + "'");
  }
  return v;
}

long long parse_int(std::string_view text, const std::string& where) {
  long long v = 0;
  const char* last = text.data() + text.size();
  auto res = std::from_chars(text.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(ErrorCode::kParse, where + ": not an integer '" + std::string(text) + "'");
  }
  return v;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kInvalidArgument, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::kInvalidArgument, "short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace qsd
