#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

#include "fddlab/types.hpp"

namespace fddlab::io {

/// Little-endian primitive writer over an ostream; throws IoError on failure.
class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}
  void bytes(std::string_view raw);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void complex_block(const Complex* data, std::size_t count);
  void matrix(const CMatrix& m);

 private:
  std::ostream& out_;
};

/// Little-endian primitive reader; throws FormatError on truncation.
class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}
  void expect_magic(std::string_view magic, std::string_view what);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void complex_block(Complex* data, std::size_t count);
  CMatrix matrix(Index rows, Index cols);
  /// True when the stream has no bytes left.
  bool at_end();

 private:
  void read_raw(char* dst, std::size_t n);
  std::istream& in_;
};

}  // namespace fddlab::io
