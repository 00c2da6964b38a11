#include "fddlab/binary_io.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>
#include <string>

namespace fddlab::io {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf.data(), buf.size());
}

template <typename U>
U get_le(const char* raw) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(raw[i])) << (8 * i);
  return v;
}

}  // namespace

void LeWriter::bytes(std::string_view raw) {
  out_.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out_) throw IoError("write failed");
}

void LeWriter::u32(std::uint32_t v) {
  put_le(out_, v);
  if (!out_) throw IoError("write failed");
}

void LeWriter::u64(std::uint64_t v) {
  put_le(out_, v);
  if (!out_) throw IoError("write failed");
}

void LeWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void LeWriter::complex_block(const Complex* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    f64(data[i].real());
    f64(data[i].imag());
  }
}

void LeWriter::matrix(const CMatrix& m) { complex_block(m.data(), static_cast<std::size_t>(m.size())); }

void LeReader::read_raw(char* dst, std::size_t n) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("unexpected end of file");
}

void LeReader::expect_magic(std::string_view magic, std::string_view what) {
  std::string buf(magic.size(), '\0');
  in_.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in_.gcount()) != magic.size() || buf != magic)
    throw FormatError(std::string(what) + ": bad magic bytes");
}

std::uint32_t LeReader::u32() {
  char raw[4];
  read_raw(raw, 4);
  return get_le<std::uint32_t>(raw);
}

std::uint64_t LeReader::u64() {
  char raw[8];
  read_raw(raw, 8);
  return get_le<std::uint64_t>(raw);
}

double LeReader::f64() { return std::bit_cast<double>(u64()); }

void LeReader::complex_block(Complex* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const double re = f64();
    const double im = f64();
    data[i] = Complex(re, im);
  }
}

CMatrix LeReader::matrix(Index rows, Index cols) {
  CMatrix m(rows, cols);
  complex_block(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

bool LeReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

}  // namespace fddlab::io
