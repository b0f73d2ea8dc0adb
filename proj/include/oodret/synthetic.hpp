#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodret/manifest.hpp"
#include "oodret/scoring.hpp"

namespace oodret {

/// Parameters of a generated corpus. Frames show a vertical road band with
/// sidewalks and background on both sides; obstacles are rectangles moving
/// along three lanes.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  int height = 64;
  int width = 96;
  int videos = 2;
  int frames = 60;
  std::vector<std::string> classes{"dog", "cone", "tire"};

  double min_radius = 2.0;  // obstacle half-extent at spawn, px
  double max_radius = 4.0;  // cap reached by growth
  double growth = 0.03;     // half-extent px per frame
  double max_speed = 0.4;   // rows per frame
  int min_life = 20;
  int max_life = 60;
  double anomaly_contrast = 1.0;  // void-mask value on obstacle pixels

  int embedding_dim = 32;
  double centroid_cosine = 0.0;  // pairwise cosine of class centroids
  double noise = 0.0;            // object content noise scale
  double far_noise_boost = 0.0;  // extra relative noise on the smallest obstacles
  double background_noise = 0.0;

  double fp_rate = 0.0;  // probability per frame and video of a new false-positive blob
  double fp_void = 0.8;  // void-mask value of on-road false positives
  bool leak_zone = false;  // part of a sidewalk predicted as road

  /// Largest content noise scale of any obstacle.
  double noise_bound() const noexcept { return noise * (1.0 + far_noise_boost); }
  void validate() const;

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& doc);

  /// All-clean corpus: no noise, no false positives.
  static SyntheticSpec clean(std::uint64_t seed);
  /// False positives on the road shoulder, in a leaking sidewalk and off road.
  static SyntheticSpec noisy(std::uint64_t seed);
};

/// Known-class layout shared by every synthetic corpus.
inline const std::vector<std::string>& synthetic_known_classes() {
  static const std::vector<std::string> names{"road", "sidewalk", "background"};
  return names;
}

/// Writes the corpus below `out_dir` and returns its validated manifest.
/// Identical specs produce byte-identical files.
CorpusManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Independent consistency check of a generated corpus: instance maps, OoD
/// and road masks, content maps and the ground-truth track file must agree
/// pixel for pixel. Returns the problems found (empty when consistent).
std::vector<std::string> validate_synthetic(const CorpusManifest& manifest);

/// Stand-in image encoder: the embedding of a box is the pixel-count
/// weighted sum of the per-frame content vectors under it, normalized.
class ContentEncoder {
 public:
  explicit ContentEncoder(const VideoEntry& video);

  std::vector<float> encode(int frame_index, const BBox& box) const;
  std::vector<float> encode_frame(int frame_index) const;
  std::size_t dimension() const noexcept { return dim_; }

 private:
  int first_frame_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::size_t slots_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::vector<std::uint8_t>> content_;  // per frame
  std::vector<float> table_;                        // F x C x d
};

}  // namespace oodret
