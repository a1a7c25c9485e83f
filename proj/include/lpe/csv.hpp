#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpe {

/// 17-significant-digit formatting; round-trips any double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Comma-separated, '.' decimal, LF line endings, header row.
class CsvTable {
 public:
  explicit CsvTable(std::string header) : body_(std::move(header)) { body_ += '\n'; }

  CsvTable& cell(const std::string& v) {
    if (!at_line_start_) body_ += ',';
    body_ += v;
    at_line_start_ = false;
    return *this;
  }
  CsvTable& cell(double v) { return cell(format_double(v)); }
  CsvTable& cell(std::int64_t v) { return cell(std::to_string(v)); }
  CsvTable& cell(int v) { return cell(std::to_string(v)); }
  CsvTable& endrow() {
    body_ += '\n';
    at_line_start_ = true;
    return *this;
  }

  [[nodiscard]] const std::string& str() const { return body_; }

 private:
  std::string body_;
  bool at_line_start_ = true;
};

/// Writes via a temp file plus rename, so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace lpe
