#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdsl {

// Binary sidecar container shared by task particle payloads and trajectory
// frame exports. Layout, little endian:
//   bytes 0..9   magic "SDSL-TASK\0"
//   bytes 10..11 zero padding
//   bytes 12..15 u32 version (currently 1)
//   u64 array count, then per array: u64 rows, u64 cols, rows*cols f64.
struct BinArray {
  uint64_t rows = 0;
  uint64_t cols = 0;
  std::vector<double> data;
};

void write_bin_arrays(const std::string& path, const std::vector<BinArray>& arrays);
std::vector<BinArray> read_bin_arrays(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sdsl
