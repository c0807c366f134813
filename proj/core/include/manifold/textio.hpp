#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "manifold/tensor.hpp"

namespace manifold {

// Shortest round-trip decimal form; the same bits always print the same text.
std::string format_double(double v);

// FNV-1a 64-bit content hash, reported as "0x" + 16 hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const std::string& bytes);

// RFC-4180-style CSV with '.' decimal separator and LF line endings. Values
// here never need quoting (numbers and plain identifiers).
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(const std::vector<std::string>& cells);
  const std::string& str() const { return out_; }

 private:
  std::size_t columns_;
  std::string out_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace manifold
