#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "oodret/grid.hpp"

namespace oodret {

enum class DType : std::uint8_t { f32 = 1, u8 = 2 };

/// Row-major array as stored in an "OODT" file.
struct Tensor {
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;       // used when dtype == f32
  std::vector<std::uint8_t> u8;  // used when dtype == u8

  std::size_t element_count() const noexcept;
  friend bool operator==(const Tensor&, const Tensor&) = default;

  static Tensor from_f32(std::vector<std::uint32_t> dims, std::vector<float> values);
  static Tensor from_u8(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values);
};

// Layout: "OODT", u8 version (1), u8 dtype, u8 ndim, ndim x u32 dims, payload.
// Everything little-endian.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

struct TensorHeader {
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
};
/// Reads and checks only the header plus the payload length.
TensorHeader peek_tensor(const std::filesystem::path& path);

// Typed helpers; shape errors name the expected rank.
BinaryMask mask_from_tensor(const Tensor& t);
Tensor mask_to_tensor(const BinaryMask& mask);
Grid<float> grid_from_tensor(const Tensor& t);
Tensor grid_to_tensor(const Grid<float>& grid);

/// H x W x K float tensor.
FrameScoreTensor scores_from_tensor(const Tensor& t);
Tensor scores_to_tensor(const FrameScoreTensor& q);

/// Masks as u8 N x H x W (value / 255) plus probabilities f32 N x (K+1).
MaskPredictionSet predictions_from_tensors(const Tensor& masks, const Tensor& probs);
std::pair<Tensor, Tensor> predictions_to_tensors(const MaskPredictionSet& preds);

/// N x d float tensor <-> list of rows.
std::vector<std::vector<float>> rows_from_tensor(const Tensor& t);
Tensor rows_to_tensor(const std::vector<std::vector<float>>& rows);

}  // namespace oodret
