#include "navgrpo/common/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

namespace navgrpo {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text) {
  return fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ByteWriter::put_string(std::string_view s) {
  put<std::uint64_t>(s.size());
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::put_doubles(std::span<const double> values) {
  put<std::uint64_t>(values.size());
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  bytes_.insert(bytes_.end(), p, p + values.size_bytes());
}

void ByteWriter::put_bytes(std::span<const std::uint8_t> values) {
  put<std::uint64_t>(values.size());
  bytes_.insert(bytes_.end(), values.begin(), values.end());
}

void ByteReader::need(std::size_t n) const {
  if (pos_ + n > bytes_.size()) throw IoError("truncated binary record");
}

std::string ByteReader::get_string() {
  auto n = get<std::uint64_t>();
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::vector<double> ByteReader::get_doubles() {
  auto n = get<std::uint64_t>();
  need(n * sizeof(double));
  std::vector<double> v(n);
  std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
  pos_ += n * sizeof(double);
  return v;
}

std::vector<std::uint8_t> ByteReader::get_bytes() {
  auto n = get<std::uint64_t>();
  need(n);
  std::vector<std::uint8_t> v(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                              bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return v;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed for " + path + ": " + ec.message());
}

}  // namespace navgrpo
