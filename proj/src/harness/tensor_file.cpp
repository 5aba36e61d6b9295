// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/tensor_file.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

namespace cca::harness {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'C', 'A', 'T'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(std::uint8_t(value >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(bytes[offset + i]) << (8 * i);
  return v;
}

template <typename Scalar>
using Bits = std::conditional_t<sizeof(Scalar) == 4, std::uint32_t, std::uint64_t>;

template <typename Scalar>
Tensor<Scalar> decode_payload(std::span<const std::uint8_t> bytes, const Shape& shape) {
  Tensor<Scalar> t(shape);
  std::size_t offset = kTensorHeaderBytes;
  for (auto& v : t.data()) {
    v = std::bit_cast<Scalar>(get_le<Bits<Scalar>>(bytes, offset));
    offset += sizeof(Scalar);
  }
  return t;
}

}  // namespace

template <typename Scalar>
std::vector<std::uint8_t> encode_tensor(const Tensor<Scalar>& t) {
  const Shape s = t.shape();
  for (std::size_t e : {s.n, s.c, s.h, s.w}) {
    if (e > std::numeric_limits<std::uint32_t>::max())
      throw ShapeError("encode_tensor: extent does not fit in 32 bits");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kTensorHeaderBytes + t.size() * sizeof(Scalar));
  put_le<std::uint32_t>(out, kTensorFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cca::dtype_of<Scalar>()));
  put_le<std::uint32_t>(out, 4);
  for (std::size_t e : {s.n, s.c, s.h, s.w}) put_le<std::uint32_t>(out, std::uint32_t(e));
  for (Scalar v : t.data()) put_le(out, std::bit_cast<Bits<Scalar>>(v));
  return out;
}

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTensorHeaderBytes) {
    throw TensorFileError("truncated header: " + std::to_string(bytes.size()) + " bytes",
                          bytes.size());
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != kMagic[i]) throw TensorFileError("bad magic, expected \"CCAT\"", i);
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kTensorFileVersion) {
    throw TensorFileError("unsupported version " + std::to_string(version), 4);
  }
  const auto dtype = get_le<std::uint32_t>(bytes, 8);
  if (dtype > 1) throw TensorFileError("unknown dtype code " + std::to_string(dtype), 8);
  const auto ndim = get_le<std::uint32_t>(bytes, 12);
  if (ndim != 4) throw TensorFileError("ndim must be 4, got " + std::to_string(ndim), 12);
  const Shape shape{get_le<std::uint32_t>(bytes, 16), get_le<std::uint32_t>(bytes, 20),
                    get_le<std::uint32_t>(bytes, 24), get_le<std::uint32_t>(bytes, 28)};
  const std::size_t elem = dtype == 0 ? 4 : 8;
  std::size_t count = 1;
  for (std::size_t e : {shape.n, shape.c, shape.h, shape.w}) {
    if (e != 0 && count > (bytes.size() / elem) / e + 1) {
      throw TensorFileError("extents exceed available payload", 16);
    }
    count *= e;
  }
  const std::size_t expected = kTensorHeaderBytes + count * elem;
  if (bytes.size() < expected) {
    throw TensorFileError("truncated payload: expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(bytes.size()),
                          bytes.size());
  }
  if (bytes.size() > expected) {
    throw TensorFileError("trailing bytes after payload", expected);
  }
  if (dtype == 0) return decode_payload<float>(bytes, shape);
  return decode_payload<double>(bytes, shape);
}

template <typename Scalar>
void save_tensor(const std::filesystem::path& path, const Tensor<Scalar>& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

AnyTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

template <typename Scalar>
Tensor<Scalar> load_tensor_as(const std::filesystem::path& path) {
  return std::visit([](const auto& t) { return t.template cast<Scalar>(); }, load_tensor(path));
}

DType dtype_of(const AnyTensor& t) {
  return t.index() == 0 ? DType::f32 : DType::f64;
}

Shape shape_of(const AnyTensor& t) {
  return std::visit([](const auto& x) { return x.shape(); }, t);
}

template std::vector<std::uint8_t> encode_tensor<float>(const Tensor<float>&);
template std::vector<std::uint8_t> encode_tensor<double>(const Tensor<double>&);
template void save_tensor<float>(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_tensor_as<float>(const std::filesystem::path&);
template Tensor<double> load_tensor_as<double>(const std::filesystem::path&);

}  // namespace cca::harness
