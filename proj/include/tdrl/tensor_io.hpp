#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdrl/common.hpp"

namespace tdrl {

// Array payload format: magic "TDRL", format_version u32, rank u32, one u32
// per dim, dtype tag u8, then raw little-endian data, row-major.
enum class Dtype : uint8_t { f64 = 0, f32 = 1, i64 = 2, i32 = 3, u8 = 4 };

inline size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f64: return 8;
    case Dtype::f32: return 4;
    case Dtype::i64: return 8;
    case Dtype::i32: return 4;
    case Dtype::u8: return 1;
  }
  return 0;
}

struct Tensor {
  Dtype dtype = Dtype::f64;
  std::vector<uint32_t> shape;
  std::vector<uint8_t> bytes;  // raw little-endian payload

  size_t count() const {
    size_t c = 1;
    for (uint32_t d : shape) c *= d;
    return c;
  }
  double* f64() { return reinterpret_cast<double*>(bytes.data()); }
  const double* f64() const { return reinterpret_cast<const double*>(bytes.data()); }
  int32_t* i32() { return reinterpret_cast<int32_t*>(bytes.data()); }
  const int32_t* i32() const { return reinterpret_cast<const int32_t*>(bytes.data()); }
  uint8_t* u8() { return bytes.data(); }
  const uint8_t* u8() const { return bytes.data(); }

  static Tensor zeros(Dtype dt, std::vector<uint32_t> shp);
  // Row-major copy of an Eigen matrix.
  static Tensor from_matrix(const MatrixXd& m);
  MatrixXd to_matrix() const;  // rank-2 f64 only
};

constexpr uint32_t kTensorFormatVersion = 1;

uint64_t fnv1a64(const uint8_t* data, size_t len);

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

// Serialized record bytes (exactly what write_tensor emits).
std::vector<uint8_t> tensor_record_bytes(const Tensor& t);

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file_bytes(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace tdrl
