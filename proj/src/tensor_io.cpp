#include "oodret/tensor_io.hpp"

#include <fstream>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "le_io.hpp"

namespace oodret {

namespace {

constexpr char kMagic[4] = {'O', 'O', 'D', 'T'};
constexpr std::uint8_t kVersion = 1;

std::size_t product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string dims_text(const std::vector<std::uint32_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s.empty() ? "scalar" : s;
}

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.dims.size() != rank) {
    throw Error(Errc::shape_mismatch, std::string(what) + " needs a rank-" + std::to_string(rank) +
                                          " tensor, got " + dims_text(t.dims));
  }
}

void expect_dtype(const Tensor& t, DType dt, const char* what) {
  if (t.dtype != dt) {
    throw Error(Errc::bad_dtype, std::string(what) + " needs dtype " + (dt == DType::f32 ? "f32" : "u8"));
  }
}

TensorHeader read_header(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw Error(Errc::truncated, "file truncated in tensor magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw Error(Errc::bad_magic, "not a tensor file (bad magic)");
  const auto version = le::get<std::uint8_t>(in, "tensor version");
  if (version != kVersion) {
    throw Error(Errc::bad_version, "unsupported tensor version " + std::to_string(version));
  }
  const auto code = le::get<std::uint8_t>(in, "tensor dtype");
  if (code != 1 && code != 2) throw Error(Errc::bad_dtype, "unknown tensor dtype code " + std::to_string(code));
  const auto ndim = le::get<std::uint8_t>(in, "tensor rank");
  TensorHeader h;
  h.dtype = static_cast<DType>(code);
  for (int i = 0; i < ndim; ++i) h.dims.push_back(le::get<std::uint32_t>(in, "tensor dims"));
  return h;
}

}  // namespace

std::size_t Tensor::element_count() const noexcept { return product(dims); }

Tensor Tensor::from_f32(std::vector<std::uint32_t> dims, std::vector<float> values) {
  Tensor t;
  t.dtype = DType::f32;
  t.dims = std::move(dims);
  if (values.size() != t.element_count()) {
    throw Error(Errc::shape_mismatch, "tensor of shape " + dims_text(t.dims) + " given " +
                                          std::to_string(values.size()) + " values");
  }
  t.f32 = std::move(values);
  return t;
}

Tensor Tensor::from_u8(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values) {
  Tensor t;
  t.dtype = DType::u8;
  t.dims = std::move(dims);
  if (values.size() != t.element_count()) {
    throw Error(Errc::shape_mismatch, "tensor of shape " + dims_text(t.dims) + " given " +
                                          std::to_string(values.size()) + " values");
  }
  t.u8 = std::move(values);
  return t;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.dims.size() > 255) throw Error(Errc::invalid_argument, "tensor rank above 255");
  const std::size_t n = t.element_count();
  if ((t.dtype == DType::f32 ? t.f32.size() : t.u8.size()) != n) {
    throw Error(Errc::shape_mismatch, "tensor payload does not match shape " + dims_text(t.dims));
  }
  out.write(kMagic, 4);
  le::put<std::uint8_t>(out, kVersion);
  le::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
  le::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) le::put<std::uint32_t>(out, d);
  if (t.dtype == DType::f32) {
    le::put_array(out, t.f32.data(), n);
  } else {
    le::put_array(out, t.u8.data(), n);
  }
  if (!out) throw Error(Errc::io_error, "tensor write failed");
}

Tensor read_tensor(std::istream& in) {
  const TensorHeader h = read_header(in);
  Tensor t;
  t.dtype = h.dtype;
  t.dims = h.dims;
  const std::size_t n = t.element_count();
  if (t.dtype == DType::f32) {
    t.f32.resize(n);
    le::get_array(in, t.f32.data(), n, "tensor payload");
  } else {
    t.u8.resize(n);
    le::get_array(in, t.u8.data(), n, "tensor payload");
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  write_tensor(out, t);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path.string());
  try {
    Tensor t = read_tensor(in);
    if (in.peek() != std::char_traits<char>::eof()) {
      throw Error(Errc::parse_error, "trailing bytes after tensor payload");
    }
    return t;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

TensorHeader peek_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path.string());
  try {
    TensorHeader h = read_header(in);
    const auto header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const auto payload = static_cast<std::size_t>(in.tellg() - header_end);
    const std::size_t want = product(h.dims) * (h.dtype == DType::f32 ? 4 : 1);
    if (payload < want) throw Error(Errc::truncated, "file truncated in tensor payload");
    if (payload > want) throw Error(Errc::parse_error, "trailing bytes after tensor payload");
    return h;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

BinaryMask mask_from_tensor(const Tensor& t) {
  expect_rank(t, 2, "mask");
  expect_dtype(t, DType::u8, "mask");
  BinaryMask m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  std::copy(t.u8.begin(), t.u8.end(), m.values().begin());
  return m;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
  return Tensor::from_u8({static_cast<std::uint32_t>(mask.height()), static_cast<std::uint32_t>(mask.width())},
                         {mask.values().begin(), mask.values().end()});
}

Grid<float> grid_from_tensor(const Tensor& t) {
  expect_rank(t, 2, "map");
  expect_dtype(t, DType::f32, "map");
  Grid<float> g(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  std::copy(t.f32.begin(), t.f32.end(), g.values().begin());
  return g;
}

Tensor grid_to_tensor(const Grid<float>& grid) {
  return Tensor::from_f32({static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())},
                          {grid.values().begin(), grid.values().end()});
}

FrameScoreTensor scores_from_tensor(const Tensor& t) {
  expect_rank(t, 3, "score tensor");
  expect_dtype(t, DType::f32, "score tensor");
  return FrameScoreTensor(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                          t.f32);
}

Tensor scores_to_tensor(const FrameScoreTensor& q) {
  return Tensor::from_f32({static_cast<std::uint32_t>(q.height()), static_cast<std::uint32_t>(q.width()),
                           static_cast<std::uint32_t>(q.num_classes())},
                          {q.values().begin(), q.values().end()});
}

MaskPredictionSet predictions_from_tensors(const Tensor& masks, const Tensor& probs) {
  expect_rank(masks, 3, "mask stack");
  expect_dtype(masks, DType::u8, "mask stack");
  expect_rank(probs, 2, "class probabilities");
  expect_dtype(probs, DType::f32, "class probabilities");
  if (masks.dims[0] != probs.dims[0]) {
    throw Error(Errc::shape_mismatch, "mask stack has " + std::to_string(masks.dims[0]) + " masks but " +
                                          std::to_string(probs.dims[0]) + " probability rows");
  }
  if (probs.dims[1] < 2) throw Error(Errc::shape_mismatch, "probability rows need K+1 >= 2 entries");
  MaskPredictionSet p;
  p.height = static_cast<int>(masks.dims[1]);
  p.width = static_cast<int>(masks.dims[2]);
  p.num_classes = static_cast<int>(probs.dims[1]) - 1;
  const std::size_t pixels = static_cast<std::size_t>(p.height) * p.width;
  const std::size_t cols = probs.dims[1];
  for (std::size_t i = 0; i < masks.dims[0]; ++i) {
    Grid<float> m(p.height, p.width);
    auto out = m.values();
    for (std::size_t j = 0; j < pixels; ++j) out[j] = static_cast<float>(masks.u8[i * pixels + j]) / 255.0f;
    p.masks.push_back(std::move(m));
    p.class_probs.emplace_back(probs.f32.begin() + static_cast<std::ptrdiff_t>(i * cols),
                               probs.f32.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
  }
  return p;
}

std::pair<Tensor, Tensor> predictions_to_tensors(const MaskPredictionSet& preds) {
  const auto n = static_cast<std::uint32_t>(preds.num_pairs());
  const std::size_t pixels = static_cast<std::size_t>(preds.height) * preds.width;
  std::vector<std::uint8_t> bytes;
  bytes.reserve(n * pixels);
  for (const auto& m : preds.masks) {
    for (float v : m.values()) bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  std::vector<float> probs;
  for (const auto& p : preds.class_probs) probs.insert(probs.end(), p.begin(), p.end());
  return {Tensor::from_u8({n, static_cast<std::uint32_t>(preds.height), static_cast<std::uint32_t>(preds.width)},
                          std::move(bytes)),
          Tensor::from_f32({n, static_cast<std::uint32_t>(preds.num_classes + 1)}, std::move(probs))};
}

std::vector<std::vector<float>> rows_from_tensor(const Tensor& t) {
  expect_rank(t, 2, "embedding table");
  expect_dtype(t, DType::f32, "embedding table");
  std::vector<std::vector<float>> rows;
  const std::size_t d = t.dims[1];
  for (std::size_t i = 0; i < t.dims[0]; ++i) {
    rows.emplace_back(t.f32.begin() + static_cast<std::ptrdiff_t>(i * d),
                      t.f32.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
  return rows;
}

Tensor rows_to_tensor(const std::vector<std::vector<float>>& rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  std::vector<float> flat;
  for (const auto& r : rows) {
    if (r.size() != d) throw Error(Errc::dimension_mismatch, "embedding rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor::from_f32({static_cast<std::uint32_t>(rows.size()), static_cast<std::uint32_t>(d)}, std::move(flat));
}

}  // namespace oodret
