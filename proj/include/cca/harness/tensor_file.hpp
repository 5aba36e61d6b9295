// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Binary tensor container.
//
//   offset  size  field
//        0     4  magic "CCAT"
//        4     4  version (u32, currently 1)
//        8     4  dtype (u32: 0 = f32, 1 = f64)
//       12     4  ndim (u32, always 4)
//       16    16  extents n, c, h, w (u32 each)
//       32     -  payload, row-major, little-endian IEEE-754
//
// All integers are little-endian.

#include "cca/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <variant>
#include <vector>

namespace cca::harness {

inline constexpr std::uint32_t kTensorFileVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 32;

/// Malformed tensor bytes; `offset` is where decoding stopped.
class TensorFileError : public std::runtime_error {
 public:
  TensorFileError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <typename Scalar>
std::vector<std::uint8_t> encode_tensor(const Tensor<Scalar>& t);

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes);

template <typename Scalar>
void save_tensor(const std::filesystem::path& path, const Tensor<Scalar>& t);

/// Throws std::runtime_error when the file cannot be read and
/// TensorFileError when its contents are malformed.
AnyTensor load_tensor(const std::filesystem::path& path);

/// Loads and converts to the requested precision.
template <typename Scalar>
Tensor<Scalar> load_tensor_as(const std::filesystem::path& path);

DType dtype_of(const AnyTensor& t);
Shape shape_of(const AnyTensor& t);

}  // namespace cca::harness
