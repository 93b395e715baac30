#include "tdmcl/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace tdmcl {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ByteWriter::matrix_f32(const MatrixF& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) f32(m(r, c));
}

void ByteWriter::bitmask(const MatrixF& m) {
  std::uint8_t acc = 0;
  int bit = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0f) acc |= static_cast<std::uint8_t>(1u << bit);
      if (++bit == 8) {
        u8(acc);
        acc = 0;
        bit = 0;
      }
    }
  if (bit != 0) u8(acc);
}

MatrixF ByteReader::matrix_f32(Index rows, Index cols) {
  MatrixF m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = f32();
  return m;
}

MatrixF ByteReader::bitmask(Index rows, Index cols) {
  MatrixF m(rows, cols);
  std::uint8_t acc = 0;
  int bit = 8;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      if (bit == 8) {
        acc = u8();
        bit = 0;
      }
      m(r, c) = (acc >> bit) & 1u ? 1.0f : 0.0f;
      ++bit;
    }
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

void seal(ByteWriter& w) { w.u64(fnv1a64(w.data())); }

std::string_view unseal(std::string_view file, std::string_view magic, const std::string& what) {
  if (file.size() < magic.size() || file.substr(0, magic.size()) != magic) {
    const std::size_t n = std::min(file.size(), magic.size());
    throw CorruptFileError(what + ": format error, expected magic '" + std::string(magic) +
                               "' but found '" + std::string(file.substr(0, n)) + "'",
                           0);
  }
  if (file.size() < magic.size() + 8) {
    throw CorruptFileError(what + ": unexpected end of file (truncated)", file.size());
  }
  const std::string_view body = file.substr(0, file.size() - 8);
  ByteReader tail(file.substr(file.size() - 8), what);
  const std::uint64_t stored = tail.u64();
  if (stored != fnv1a64(body)) {
    throw CorruptFileError(what + ": checksum mismatch (file truncated or corrupted)",
                           file.size() - 8);
  }
  return body.substr(magic.size());
}

}  // namespace tdmcl
