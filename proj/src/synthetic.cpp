#include "oodret/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "oodret/error.hpp"
#include "oodret/rle.hpp"
#include "oodret/roi.hpp"
#include "oodret/tensor_io.hpp"
#include "oodret/tracker.hpp"

namespace oodret {

using nlohmann::json;

namespace {

constexpr int kRoad = 0;
constexpr int kSidewalk = 1;
constexpr int kBackground = 2;
constexpr int kRegions = 3;
constexpr int kMasksPerRegion = 3;
constexpr double kResidual = 0.02;
constexpr double kCropPadding = 0.1;

struct Layout {
  int background_left = 0;  // columns [0, background_left)
  int road_begin = 0;
  int road_end = 0;
  int background_right = 0;  // columns [background_right, W)
  int shoulder = 0;
  int lane_begin[3] = {0, 0, 0};
  int lane_width = 0;
  int leak_row_begin = 0;
  int leak_row_end = 0;

  int lane_center(int lane) const { return lane_begin[lane] + (lane_width - 1) / 2; }
};

Layout make_layout(int height, int width) {
  auto s = [&](int x) { return static_cast<int>(std::lround(x * width / 96.0)); };
  Layout l;
  l.background_left = s(14);
  l.road_begin = s(22);
  l.road_end = s(74);
  l.background_right = s(82);
  l.shoulder = s(7);
  const int lanes_begin = l.road_begin + l.shoulder;
  l.lane_width = (l.road_end - l.shoulder - lanes_begin) / 3;
  for (int i = 0; i < 3; ++i) l.lane_begin[i] = lanes_begin + i * l.lane_width;
  l.leak_row_begin = static_cast<int>(std::lround(0.15 * height));
  l.leak_row_end = static_cast<int>(std::lround(0.85 * height));
  return l;
}

int gt_region(const Layout& l, int col) {
  if (col < l.background_left || col >= l.background_right) return kBackground;
  if (col < l.road_begin || col >= l.road_end) return kSidewalk;
  return kRoad;
}

bool in_leak(const Layout& l, bool leak, int row, int col) {
  return leak && col >= l.road_end && col < l.background_right && row >= l.leak_row_begin && row < l.leak_row_end;
}

struct Obstacle {
  int id = 0;
  int cls = 0;
  int lane = 0;
  int start = 0;
  int end = 0;  // exclusive
  double row0 = 0.0;
  double speed = 0.0;
  double radius0 = 0.0;
};

enum class BlobKind { on_road, leak, off_road };

const char* blob_kind_name(BlobKind k) {
  switch (k) {
    case BlobKind::on_road: return "on_road";
    case BlobKind::leak: return "leak";
    case BlobKind::off_road: return "off_road";
  }
  return "?";
}

struct Blob {
  BlobKind kind = BlobKind::on_road;
  int row = 0;
  int col = 0;
  int half = 1;
  int start = 0;
  int end = 0;  // exclusive
  double void_value = 1.0;
  int cls = 0;  // class whose centroid the content imitates
};

class Generator {
 public:
  Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed), layout_(make_layout(spec.height, spec.width)) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::vector<double> gaussian(std::size_t d) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(d);
    for (auto& x : v) x = n(rng_);
    return v;
  }
  std::vector<double> unit(std::size_t d) {
    auto v = gaussian(d);
    normalize(v);
    return v;
  }
  static void normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
  }

  const SyntheticSpec& spec_;
  std::mt19937_64 rng_;
  Layout layout_;
};

int half_extent(const SyntheticSpec& spec, const Obstacle& o, int frame) {
  const double r = std::min(spec.max_radius, o.radius0 + spec.growth * (frame - o.start));
  return static_cast<int>(std::floor(r));
}

BBox obstacle_box(const SyntheticSpec& spec, const Layout& l, const Obstacle& o, int frame) {
  const int h = half_extent(spec, o, frame);
  const int cr = static_cast<int>(std::lround(o.row0 + o.speed * (frame - o.start)));
  const int cc = l.lane_center(o.lane);
  return {cr - h, cc - h, cr + h, cc + h};
}

BBox blob_box(const Blob& b) { return {b.row - b.half, b.col - b.half, b.row + b.half, b.col + b.half}; }

bool boxes_near(const BBox& a, const BBox& b, int margin) {
  return !(a.bottom + margin < b.top || b.bottom + margin < a.top || a.right + margin < b.left ||
           b.right + margin < a.left);
}

std::string frame_file(int frame, const char* what) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "f%04d_%s.oodt", frame, what);
  return buf;
}

std::string video_name(int v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v%03d", v);
  return buf;
}

const std::uint8_t kRegionColor[3][3] = {{96, 96, 96}, {170, 160, 150}, {60, 120, 60}};

}  // namespace

// ---- spec ------------------------------------------------------------------

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_argument, "synthetic spec: " + msg); };
  if (height < 32 || width < 64) fail("frames must be at least 64 wide and 32 high");
  if (videos < 1 || frames < 1) fail("need at least one video and one frame");
  if (classes.empty()) fail("need at least one obstacle class");
  if (min_radius < 1.0) fail("obstacle radius below 1 px");
  if (max_radius < min_radius) fail("max_radius below min_radius");
  if (growth < 0.0 || max_speed < 0.0) fail("growth and max_speed must be >= 0");
  if (min_life < 1 || max_life < min_life) fail("need 1 <= min_life <= max_life");
  if (!(anomaly_contrast > 0.0 && anomaly_contrast <= 1.0)) fail("anomaly_contrast must be in (0, 1]");
  if (!(fp_void > 0.0 && fp_void <= 1.0)) fail("fp_void must be in (0, 1]");
  if (fp_rate < 0.0 || fp_rate > 1.0) fail("fp_rate must be in [0, 1]");
  if (noise < 0.0 || far_noise_boost < 0.0 || background_noise < 0.0) fail("noise scales must be >= 0");
  if (centroid_cosine < 0.0 || centroid_cosine >= 1.0) fail("centroid_cosine must be in [0, 1)");
  if (embedding_dim < static_cast<int>(classes.size()) + kRegions + 1) {
    fail("embedding_dim must exceed the number of classes + 3");
  }
  const Layout l = make_layout(height, width);
  const int hmax = static_cast<int>(std::floor(max_radius));
  if (hmax > (l.lane_width - 1) / 2 - 1) fail("max_radius does not fit a lane");
  if (height < 4 * hmax + 8) fail("frames too short for max_radius");
  if (l.shoulder < 7) fail("frames too narrow for road shoulders");
  // Class margin against the worst-case content deviation.
  if (!((1.0 - centroid_cosine) > 2.0 * noise_bound())) {
    fail("class margin " + std::to_string(1.0 - centroid_cosine) + " must exceed twice the noise bound " +
         std::to_string(noise_bound()));
  }
}

json SyntheticSpec::to_json() const {
  return {{"seed", seed},
          {"height", height},
          {"width", width},
          {"videos", videos},
          {"frames", frames},
          {"classes", classes},
          {"min_radius", min_radius},
          {"max_radius", max_radius},
          {"growth", growth},
          {"max_speed", max_speed},
          {"min_life", min_life},
          {"max_life", max_life},
          {"anomaly_contrast", anomaly_contrast},
          {"embedding_dim", embedding_dim},
          {"centroid_cosine", centroid_cosine},
          {"noise", noise},
          {"far_noise_boost", far_noise_boost},
          {"background_noise", background_noise},
          {"fp_rate", fp_rate},
          {"fp_void", fp_void},
          {"leak_zone", leak_zone}};
}

SyntheticSpec SyntheticSpec::from_json(const json& doc) {
  SyntheticSpec s;
  try {
    s.seed = doc.value("seed", s.seed);
    s.height = doc.value("height", s.height);
    s.width = doc.value("width", s.width);
    s.videos = doc.value("videos", s.videos);
    s.frames = doc.value("frames", s.frames);
    s.classes = doc.value("classes", s.classes);
    s.min_radius = doc.value("min_radius", s.min_radius);
    s.max_radius = doc.value("max_radius", s.max_radius);
    s.growth = doc.value("growth", s.growth);
    s.max_speed = doc.value("max_speed", s.max_speed);
    s.min_life = doc.value("min_life", s.min_life);
    s.max_life = doc.value("max_life", s.max_life);
    s.anomaly_contrast = doc.value("anomaly_contrast", s.anomaly_contrast);
    s.embedding_dim = doc.value("embedding_dim", s.embedding_dim);
    s.centroid_cosine = doc.value("centroid_cosine", s.centroid_cosine);
    s.noise = doc.value("noise", s.noise);
    s.far_noise_boost = doc.value("far_noise_boost", s.far_noise_boost);
    s.background_noise = doc.value("background_noise", s.background_noise);
    s.fp_rate = doc.value("fp_rate", s.fp_rate);
    s.fp_void = doc.value("fp_void", s.fp_void);
    s.leak_zone = doc.value("leak_zone", s.leak_zone);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("synthetic spec JSON: ") + e.what());
  }
  return s;
}

SyntheticSpec SyntheticSpec::clean(std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  return s;
}

SyntheticSpec SyntheticSpec::noisy(std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  s.noise = 0.15;
  s.far_noise_boost = 1.0;
  s.background_noise = 0.2;
  s.fp_rate = 0.06;
  s.leak_zone = true;
  return s;
}

// ---- generation ------------------------------------------------------------

CorpusManifest generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  Generator gen(spec);
  const Layout& lay = gen.layout_;
  const int H = spec.height;
  const int W = spec.width;
  const auto HW = static_cast<std::size_t>(H) * W;
  const int K = kRegions;
  const std::size_t C = spec.classes.size();
  const auto d = static_cast<std::size_t>(spec.embedding_dim);
  fs::create_directories(out_dir);

  // Orthonormal basis: shared direction, one per class, one per region.
  std::vector<std::vector<double>> basis;
  while (basis.size() < 1 + C + kRegions) {
    auto v = gen.gaussian(d);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += v[j] * b[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= dot * b[j];
    }
    Generator::normalize(v);
    basis.push_back(std::move(v));
  }
  std::vector<std::vector<double>> class_centroid(C, std::vector<double>(d));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      class_centroid[c][j] =
          std::sqrt(1.0 - spec.centroid_cosine) * basis[1 + c][j] + std::sqrt(spec.centroid_cosine) * basis[0][j];
    }
  }
  auto region_centroid = [&](int r) -> const std::vector<double>& { return basis[1 + C + static_cast<std::size_t>(r)]; };
  auto noisy_vector = [&](const std::vector<double>& centre, double scale) {
    std::vector<double> v = centre;
    if (scale > 0.0) {
      const auto u = gen.unit(d);
      for (std::size_t j = 0; j < d; ++j) v[j] += scale * u[j];
    }
    Generator::normalize(v);
    return v;
  };

  // Mask probabilities: three masks per region, void mask last.
  std::vector<float> probs;
  for (int r = 0; r < kRegions; ++r) {
    for (int j = 0; j < kMasksPerRegion; ++j) {
      for (int k = 0; k < K; ++k) probs.push_back(k == r ? 0.5f : static_cast<float>(0.5 / (K - 1)));
      probs.push_back(0.0f);
    }
  }
  for (int k = 0; k < K; ++k) probs.push_back(0.0f);
  probs.push_back(1.0f);
  const auto n_masks = static_cast<std::uint32_t>(kRegions * kMasksPerRegion + 1);
  const Tensor probs_tensor = Tensor::from_f32({n_masks, static_cast<std::uint32_t>(K + 1)}, probs);

  CorpusManifest manifest;
  manifest.root = fs::absolute(out_dir).lexically_normal();
  manifest.dataset = "synthetic-" + std::to_string(spec.seed);
  manifest.frame_rate = 10.0;
  manifest.class_names = synthetic_known_classes();
  manifest.road_index = kRoad;
  manifest.ood_classes = spec.classes;

  json gt_videos = json::array();
  const int hmax = static_cast<int>(std::floor(spec.max_radius));
  const int hmin = static_cast<int>(std::floor(spec.min_radius));
  int class_cursor = gen.uniform_int(0, static_cast<int>(C) - 1);

  for (int vi = 0; vi < spec.videos; ++vi) {
    const std::string vid = video_name(vi);
    const fs::path vdir = manifest.root / "videos" / vid;
    fs::create_directories(vdir);

    // Lane schedules.
    std::vector<Obstacle> obstacles;
    for (int lane = 0; lane < 3; ++lane) {
      int t = gen.uniform_int(0, 4);
      while (t + spec.min_life <= spec.frames) {
        Obstacle o;
        o.id = static_cast<int>(obstacles.size());
        o.cls = class_cursor;
        class_cursor = (class_cursor + 1) % static_cast<int>(C);
        o.lane = lane;
        o.start = t;
        o.end = t + gen.uniform_int(spec.min_life, std::min(spec.max_life, spec.frames - t));
        o.radius0 = gen.uniform(spec.min_radius, 0.5 * (spec.min_radius + spec.max_radius));
        o.speed = gen.uniform(-spec.max_speed, spec.max_speed);
        const double travel = o.speed * (o.end - 1 - o.start);
        const double lo = 1 + hmax - std::min(0.0, travel) + 0.5;
        const double hi = H - 2 - hmax - std::max(0.0, travel) - 0.5;
        if (lo > hi) {
          o.speed = 0.0;
          o.row0 = gen.uniform(1 + hmax + 0.5, H - 2 - hmax - 0.5);
        } else {
          o.row0 = gen.uniform(lo, hi);
        }
        obstacles.push_back(o);
        t = o.end + gen.uniform_int(6, 12);
      }
    }

    // False-positive blobs.
    std::vector<Blob> blobs;
    for (int f = 0; f < spec.frames; ++f) {
      if (spec.fp_rate <= 0.0 || gen.uniform(0.0, 1.0) >= spec.fp_rate) continue;
      Blob b;
      const int kinds = spec.leak_zone ? 3 : 2;
      const int pick = gen.uniform_int(0, kinds - 1);
      b.kind = pick == 0 ? BlobKind::on_road : (pick == 1 && spec.leak_zone ? BlobKind::leak : BlobKind::off_road);
      b.half = gen.uniform_int(1, 2);
      b.start = f;
      b.end = std::min(spec.frames, f + gen.uniform_int(12, 30));
      b.cls = gen.uniform_int(0, static_cast<int>(C) - 1);
      b.void_value = b.kind == BlobKind::on_road ? spec.fp_void : spec.anomaly_contrast;
      int col_lo = 0, col_hi = 0, row_lo = 1 + b.half, row_hi = H - 2 - b.half;
      const bool left = gen.uniform_int(0, 1) == 0;
      switch (b.kind) {
        case BlobKind::on_road:
          col_lo = left ? lay.road_begin + 1 : lay.road_end - lay.shoulder + 1;
          col_hi = left ? lay.road_begin + lay.shoulder - 2 : lay.road_end - 2;
          break;
        case BlobKind::leak:
          col_lo = lay.road_end + 1;
          col_hi = lay.background_right - 2;
          row_lo = lay.leak_row_begin + 1 + b.half;
          row_hi = lay.leak_row_end - 2 - b.half;
          break;
        case BlobKind::off_road:
          col_lo = left ? 1 : lay.background_right + 1;
          col_hi = left ? lay.background_left - 2 : W - 2;
          break;
      }
      col_lo += b.half;
      col_hi -= b.half;
      bool placed = false;
      for (int attempt = 0; attempt < 20 && !placed && col_lo <= col_hi && row_lo <= row_hi; ++attempt) {
        b.row = gen.uniform_int(row_lo, row_hi);
        b.col = gen.uniform_int(col_lo, col_hi);
        placed = true;
        for (const auto& other : blobs) {
          if (other.end > b.start && other.start < b.end && boxes_near(blob_box(b), blob_box(other), 2)) {
            placed = false;
            break;
          }
        }
      }
      if (placed) blobs.push_back(b);
    }

    const std::size_t slots = kRegions + obstacles.size() + blobs.size();
    if (slots > 255) throw Error(Errc::invalid_argument, "synthetic spec: too many content slots per video");
    std::vector<float> table(static_cast<std::size_t>(spec.frames) * slots * d, 0.0f);

    VideoEntry ve;
    ve.id = vid;
    ve.height = H;
    ve.width = W;
    ve.content_table = vdir / "content_table.oodt";

    json gt_objects = json::array();
    std::vector<json> gt_obs(obstacles.size(), json::array());

    for (int f = 0; f < spec.frames; ++f) {
      std::vector<std::uint8_t> inst(HW, 0), content(HW, 0), road(HW, 0), ood(HW, 0);
      std::vector<double> void_value(HW, 0.0);
      std::vector<std::uint8_t> image(HW * 3, 0);
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * W + c;
          const int g = gt_region(lay, c);
          content[p] = static_cast<std::uint8_t>(g);
          road[p] = g == kRoad ? 1 : 0;
          ood[p] = g == kRoad ? 0 : 255;
          for (int ch = 0; ch < 3; ++ch) image[p * 3 + ch] = kRegionColor[g][ch];
        }
      }
      float* frame_table = table.data() + static_cast<std::size_t>(f) * slots * d;
      auto store = [&](std::size_t slot, const std::vector<double>& v) {
        for (std::size_t j = 0; j < d; ++j) frame_table[slot * d + j] = static_cast<float>(v[j]);
      };
      for (int r = 0; r < kRegions; ++r) store(static_cast<std::size_t>(r), noisy_vector(region_centroid(r), spec.background_noise));

      for (const auto& o : obstacles) {
        if (f < o.start || f >= o.end) continue;
        const BBox box = obstacle_box(spec, lay, o, f);
        const int h = half_extent(spec, o, f);
        const double frac = hmax > hmin ? static_cast<double>(h - hmin) / (hmax - hmin) : 1.0;
        const double scale = spec.noise * (1.0 + spec.far_noise_boost * (1.0 - frac));
        const std::size_t slot = kRegions + static_cast<std::size_t>(o.id);
        store(slot, noisy_vector(class_centroid[static_cast<std::size_t>(o.cls)], scale));
        const std::uint8_t colour = static_cast<std::uint8_t>(200 + 20 * (o.cls % 3));
        for (int r = box.top; r <= box.bottom; ++r) {
          for (int c = box.left; c <= box.right; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * W + c;
            inst[p] = static_cast<std::uint8_t>(o.id + 1);
            content[p] = static_cast<std::uint8_t>(slot);
            ood[p] = 1;
            void_value[p] = spec.anomaly_contrast;
            image[p * 3 + 0] = colour;
            image[p * 3 + 1] = static_cast<std::uint8_t>(40 + 60 * (o.cls % 4));
            image[p * 3 + 2] = static_cast<std::uint8_t>(30 * (o.cls % 7));
          }
        }
        const BBox crop = pad_box(box, kCropPadding, H, W);
        gt_obs[static_cast<std::size_t>(o.id)].push_back(
            {{"frame", f},
             {"bbox", oodret::to_json(box)},
             {"crop", oodret::to_json(crop)},
             {"centroid", {0.5 * (box.top + box.bottom), 0.5 * (box.left + box.right)}},
             {"area", box.area()}});
      }
      for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
        const Blob& b = blobs[bi];
        if (f < b.start || f >= b.end) continue;
        const std::size_t slot = kRegions + obstacles.size() + bi;
        store(slot, noisy_vector(class_centroid[static_cast<std::size_t>(b.cls)], spec.noise));
        const BBox box = blob_box(b);
        for (int r = box.top; r <= box.bottom; ++r) {
          for (int c = box.left; c <= box.right; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * W + c;
            content[p] = static_cast<std::uint8_t>(slot);
            void_value[p] = b.void_value;
            for (int ch = 0; ch < 3; ++ch) image[p * 3 + ch] = static_cast<std::uint8_t>(image[p * 3 + ch] / 2 + 40);
          }
        }
      }

      std::vector<std::uint8_t> masks(static_cast<std::size_t>(n_masks) * HW, 0);
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * W + c;
          const int region = in_leak(lay, spec.leak_zone, r, c) ? kRoad : gt_region(lay, c);
          const double v = void_value[p];
          const double m = v > 0.0 ? std::max(kResidual, 1.0 - v) : 1.0;
          const auto q = static_cast<std::uint8_t>(std::lround(m * 255.0));
          for (int j = 0; j < kMasksPerRegion; ++j) {
            masks[static_cast<std::size_t>(region * kMasksPerRegion + j) * HW + p] = q;
          }
          masks[static_cast<std::size_t>(n_masks - 1) * HW + p] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }

      FrameEntry fe;
      fe.index = f;
      fe.masks = vdir / frame_file(f, "masks");
      fe.probs = vdir / frame_file(f, "probs");
      fe.road_gt = vdir / frame_file(f, "road");
      fe.ood_gt = vdir / frame_file(f, "ood");
      fe.instances = vdir / frame_file(f, "inst");
      fe.content = vdir / frame_file(f, "content");
      fe.image = vdir / frame_file(f, "image");
      const std::uint32_t h32 = static_cast<std::uint32_t>(H), w32 = static_cast<std::uint32_t>(W);
      write_tensor(fe.masks, Tensor::from_u8({n_masks, h32, w32}, std::move(masks)));
      write_tensor(fe.probs, probs_tensor);
      write_tensor(fe.road_gt, Tensor::from_u8({h32, w32}, std::move(road)));
      write_tensor(fe.ood_gt, Tensor::from_u8({h32, w32}, std::move(ood)));
      write_tensor(fe.instances, Tensor::from_u8({h32, w32}, std::move(inst)));
      write_tensor(fe.content, Tensor::from_u8({h32, w32}, std::move(content)));
      write_tensor(fe.image, Tensor::from_u8({h32, w32, 3}, std::move(image)));
      ve.frames.push_back(std::move(fe));
    }
    write_tensor(ve.content_table,
                 Tensor::from_f32({static_cast<std::uint32_t>(spec.frames), static_cast<std::uint32_t>(slots),
                                   static_cast<std::uint32_t>(d)},
                                  std::move(table)));

    for (const auto& o : obstacles) {
      gt_objects.push_back({{"object_id", o.id},
                            {"class", spec.classes[static_cast<std::size_t>(o.cls)]},
                            {"class_index", o.cls},
                            {"lane", o.lane},
                            {"observations", std::move(gt_obs[static_cast<std::size_t>(o.id)])}});
    }
    json fps = json::array();
    for (const auto& b : blobs) {
      fps.push_back({{"kind", blob_kind_name(b.kind)},
                     {"bbox", oodret::to_json(blob_box(b))},
                     {"first_frame", b.start},
                     {"last_frame", b.end - 1},
                     {"imitates", spec.classes[static_cast<std::size_t>(b.cls)]}});
    }
    gt_videos.push_back({{"id", vid}, {"objects", std::move(gt_objects)}, {"false_positives", std::move(fps)}});
    manifest.videos.push_back(std::move(ve));
  }

  // Vocabulary: the class centroids.
  json terms = json::array();
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<float> e(class_centroid[c].begin(), class_centroid[c].end());
    terms.push_back({{"term", spec.classes[c]}, {"embedding", e}});
  }
  manifest.vocabulary = manifest.root / "vocabulary.json";
  write_json_file(manifest.vocabulary, {{"dimension", d}, {"terms", std::move(terms)}});
  manifest.gt_tracks = manifest.root / "gt_tracks.json";
  write_json_file(manifest.gt_tracks, {{"classes", spec.classes}, {"videos", std::move(gt_videos)}});

  // Retrieval margin over the ground-truth crops.
  double min_relevant = 1.0, max_irrelevant = -1.0;
  const json gt = read_json_file(manifest.gt_tracks);
  for (std::size_t vi = 0; vi < manifest.videos.size(); ++vi) {
    const ContentEncoder enc(manifest.videos[vi]);
    for (const auto& obj : gt.at("videos").at(vi).at("objects")) {
      const auto cls = obj.at("class_index").get<std::size_t>();
      for (const auto& obs : obj.at("observations")) {
        const auto e = enc.encode(obs.at("frame").get<int>(), bbox_from_json(obs.at("crop")));
        for (std::size_t c = 0; c < C; ++c) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(e[j]) * class_centroid[c][j];
          if (c == cls) {
            min_relevant = std::min(min_relevant, dot);
          } else {
            max_irrelevant = std::max(max_irrelevant, dot);
          }
        }
      }
    }
  }
  const double tau = min_relevant > max_irrelevant ? 0.5 * (min_relevant + max_irrelevant) : 0.25;

  manifest.config = manifest.root / "config.json";
  write_json_file(manifest.config, {{"anomaly_threshold", default_anomaly_threshold(K)},
                                    {"roi", {{"radius", default_roi_radius(W)}}},
                                    {"retrieval", {{"tau", tau}}}});
  json info = spec.to_json();
  info["retrieval_margin"] = {{"min_relevant", min_relevant}, {"max_irrelevant", max_irrelevant}, {"tau", tau}};
  write_json_file(manifest.root / "synthetic.json", info);

  const fs::path manifest_path = manifest.root / "manifest.json";
  save_manifest(manifest, manifest_path);
  return load_manifest(manifest_path);
}

// ---- encoder ---------------------------------------------------------------

ContentEncoder::ContentEncoder(const VideoEntry& video) : height_(video.height), width_(video.width) {
  if (video.content_table.empty()) {
    throw Error(Errc::missing_embeddings, "video " + video.id + " has no content table for the content encoder");
  }
  const Tensor table = read_tensor(video.content_table);
  if (table.dtype != DType::f32 || table.dims.size() != 3 || table.dims[0] != video.frames.size()) {
    throw Error(Errc::shape_mismatch, video.content_table.string() + ": content table must be f32 F x C x d");
  }
  slots_ = table.dims[1];
  dim_ = table.dims[2];
  table_ = table.f32;
  first_frame_ = video.frames.empty() ? 0 : video.frames.front().index;
  for (const auto& f : video.frames) {
    if (f.content.empty()) throw Error(Errc::missing_embeddings, "video " + video.id + " lacks content maps");
    const BinaryMask map = mask_from_tensor(read_tensor(f.content));
    content_.emplace_back(map.values().begin(), map.values().end());
    for (auto s : content_.back()) {
      if (s >= slots_) throw Error(Errc::out_of_bounds, f.content.string() + ": content slot beyond the table");
    }
  }
}

std::vector<float> ContentEncoder::encode(int frame_index, const BBox& box) const {
  const int fi = frame_index - first_frame_;
  if (fi < 0 || fi >= static_cast<int>(content_.size())) {
    throw Error(Errc::out_of_bounds, "frame " + std::to_string(frame_index) + " outside the video");
  }
  if (box.empty() || box.top < 0 || box.left < 0 || box.bottom >= height_ || box.right >= width_) {
    throw Error(Errc::out_of_bounds, "encoder box outside the frame");
  }
  std::vector<long long> counts(slots_, 0);
  const auto& map = content_[static_cast<std::size_t>(fi)];
  for (int r = box.top; r <= box.bottom; ++r) {
    for (int c = box.left; c <= box.right; ++c) ++counts[map[static_cast<std::size_t>(r) * width_ + c]];
  }
  std::vector<double> acc(dim_, 0.0);
  const float* frame_table = table_.data() + static_cast<std::size_t>(fi) * slots_ * dim_;
  for (std::size_t s = 0; s < slots_; ++s) {
    if (counts[s] == 0) continue;
    for (std::size_t j = 0; j < dim_; ++j) acc[j] += static_cast<double>(counts[s]) * frame_table[s * dim_ + j];
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(dim_);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = static_cast<float>(norm > 0.0 ? acc[j] / norm : 0.0);
  return out;
}

std::vector<float> ContentEncoder::encode_frame(int frame_index) const {
  return encode(frame_index, BBox{0, 0, height_ - 1, width_ - 1});
}

// ---- validator -------------------------------------------------------------

std::vector<std::string> validate_synthetic(const CorpusManifest& manifest) {
  std::vector<std::string> problems;
  auto report = [&](const std::string& msg) {
    if (problems.size() < 50) problems.push_back(msg);
  };
  if (manifest.gt_tracks.empty()) return {"manifest has no gt_tracks file"};
  const json gt = read_json_file(manifest.gt_tracks);
  std::map<std::string, const json*> gt_by_video;
  for (const auto& v : gt.at("videos")) gt_by_video[v.at("id").get<std::string>()] = &v;

  for (const auto& video : manifest.videos) {
    const auto it = gt_by_video.find(video.id);
    if (it == gt_by_video.end()) {
      report(video.id + ": no ground-truth tracks");
      continue;
    }
    // (frame, object id) -> expected box and crop
    std::map<std::pair<int, int>, std::pair<BBox, BBox>> expected;
    std::map<int, int> slot_of;  // object id -> content slot
    for (const auto& obj : it->second->at("objects")) {
      const int id = obj.at("object_id").get<int>();
      slot_of[id] = 3 + id;
      int prev = -1;
      for (const auto& obs : obj.at("observations")) {
        const int f = obs.at("frame").get<int>();
        if (prev >= 0 && f != prev + 1) report(video.id + " object " + std::to_string(id) + ": frames not contiguous");
        prev = f;
        expected[{f, id}] = {bbox_from_json(obs.at("bbox")), bbox_from_json(obs.at("crop"))};
        const BBox b = bbox_from_json(obs.at("bbox"));
        const auto area = obs.at("area").get<long long>();
        const auto cen = obs.at("centroid");
        if (area != b.area()) report(video.id + " object " + std::to_string(id) + ": area disagrees with bbox");
        if (std::abs(cen.at(0).get<double>() - 0.5 * (b.top + b.bottom)) > 1e-9 ||
            std::abs(cen.at(1).get<double>() - 0.5 * (b.left + b.right)) > 1e-9) {
          report(video.id + " object " + std::to_string(id) + ": centroid disagrees with bbox");
        }
      }
    }
    for (const auto& frame : video.frames) {
      const BinaryMask inst = mask_from_tensor(read_tensor(frame.instances));
      const BinaryMask ood = mask_from_tensor(read_tensor(frame.ood_gt));
      const BinaryMask road = mask_from_tensor(read_tensor(frame.road_gt));
      const BinaryMask content = mask_from_tensor(read_tensor(frame.content));
      std::map<int, BBox> seen;
      std::map<int, long long> count;
      for (int r = 0; r < inst.height(); ++r) {
        for (int c = 0; c < inst.width(); ++c) {
          const int id = inst(r, c) - 1;
          const bool is_obj = id >= 0;
          if (is_obj != (ood(r, c) == 1)) report(video.id + " frame " + std::to_string(frame.index) + ": OoD mask and instances disagree");
          if (ood(r, c) == 255 && road(r, c)) report(video.id + " frame " + std::to_string(frame.index) + ": ignore label on road");
          if (ood(r, c) != 255 && !road(r, c)) report(video.id + " frame " + std::to_string(frame.index) + ": label off road not ignored");
          if (!is_obj) continue;
          if (content(r, c) != slot_of[id]) report(video.id + " frame " + std::to_string(frame.index) + ": content slot disagrees");
          auto [pos, fresh] = seen.try_emplace(id, BBox{r, c, r, c});
          BBox& b = pos->second;
          if (!fresh) {
            b.top = std::min(b.top, r);
            b.left = std::min(b.left, c);
            b.bottom = std::max(b.bottom, r);
            b.right = std::max(b.right, c);
          }
          ++count[id];
        }
      }
      for (const auto& [id, box] : seen) {
        const auto e = expected.find({frame.index, id});
        const std::string where = video.id + " frame " + std::to_string(frame.index) + " object " + std::to_string(id);
        if (e == expected.end()) {
          report(where + ": present in instance map but not in tracks");
          continue;
        }
        if (!(e->second.first == box)) report(where + ": bbox disagrees with instance map");
        if (count[id] != box.area()) report(where + ": instance pixels do not fill the bbox");
        // Independent padding arithmetic.
        const auto pr = static_cast<int>(std::lround(0.1 * box.height()));
        const auto pc = static_cast<int>(std::lround(0.1 * box.width()));
        const BBox crop{std::max(0, box.top - pr), std::max(0, box.left - pc),
                        std::min(inst.height() - 1, box.bottom + pr), std::min(inst.width() - 1, box.right + pc)};
        if (!(e->second.second == crop)) report(where + ": crop disagrees with the padding rule");
      }
      for (const auto& [key, boxes] : expected) {
        if (key.first == frame.index && !seen.count(key.second)) {
          report(video.id + " frame " + std::to_string(frame.index) + " object " + std::to_string(key.second) +
                 ": in tracks but absent from instance map");
        }
      }
    }
  }
  return problems;
}

}  // namespace oodret
