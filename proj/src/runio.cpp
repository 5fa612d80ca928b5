#include "softdsl/runio.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "softdsl/error.hpp"

namespace sdsl {

namespace {

constexpr char kMagic[10] = {'S', 'D', 'S', 'L', '-', 'T', 'A', 'S', 'K', '\0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCode::Parse, path + ": truncated binary file");
  return v;
}

}  // namespace

void write_bin_arrays(const std::string& path, const std::vector<BinArray>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open for write: " + path);
  out.write(kMagic, 10);
  put<uint16_t>(out, 0);
  put<uint32_t>(out, kVersion);
  put<uint64_t>(out, arrays.size());
  for (const auto& a : arrays) {
    if (a.data.size() != a.rows * a.cols)
      fail(ErrorCode::InvalidArgument, "array shape mismatch writing " + path);
    put<uint64_t>(out, a.rows);
    put<uint64_t>(out, a.cols);
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

std::vector<BinArray> read_bin_arrays(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  char magic[10];
  in.read(magic, 10);
  if (!in || std::memcmp(magic, kMagic, 10) != 0)
    fail(ErrorCode::Parse, path + ": bad magic header");
  get<uint16_t>(in, path);
  uint32_t version = get<uint32_t>(in, path);
  if (version != kVersion)
    fail(ErrorCode::Parse, path + ": unsupported version " + std::to_string(version));
  uint64_t count = get<uint64_t>(in, path);
  if (count > (1ull << 32)) fail(ErrorCode::Parse, path + ": implausible array count");
  std::vector<BinArray> arrays(count);
  for (auto& a : arrays) {
    a.rows = get<uint64_t>(in, path);
    a.cols = get<uint64_t>(in, path);
    uint64_t n = a.rows * a.cols;
    if (n > (1ull << 34)) fail(ErrorCode::Parse, path + ": implausible array size");
    a.data.resize(n);
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) fail(ErrorCode::Parse, path + ": truncated array data");
  }
  return arrays;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open for write: " + path);
  out << content;
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

}  // namespace sdsl
