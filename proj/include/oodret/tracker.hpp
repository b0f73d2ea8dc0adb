#pragma once

#include <string>
#include <vector>

#include "oodret/scoring.hpp"

namespace oodret {

struct TrackerConfig {
  double iou_min = 0.25;
  /// Maximum centroid distance in pixels; negative means 5% of the frame diagonal.
  double center_max = -1.0;
  int max_gap = 3;
  int regression_window = 5;
  int min_track_length = 10;
  double crop_padding = 0.1;

  double center_limit(int height, int width) const noexcept;
  void validate() const;
};

struct CenterPoint {
  double row = 0.0;
  double col = 0.0;
};

enum class TrackState { active, terminated };

struct Observation {
  int frame_index = 0;
  SegmentInstance segment;
};

struct PredictedCenter {
  int frame_index = 0;
  CenterPoint center;
};

struct Track {
  int track_id = 0;
  std::vector<Observation> observations;  // strictly increasing frames
  std::vector<PredictedCenter> predicted_centers;
  int gap_count = 0;
  TrackState state = TrackState::active;
};

struct Assignment {
  std::size_t track = 0;    // position in the track list
  std::size_t segment = 0;  // position in the segment list
  double iou = 0.0;
  double center_distance = 0.0;
};

/// Ordinary least squares per coordinate over the last `window` observations,
/// evaluated at `frame`. Falls back to the last centroid below two points.
CenterPoint predict_center(const Track& track, int frame, int window = 5);

/// Pixel-set IoU of two raster-sorted pixel lists, the first translated by
/// (shift_row, shift_col).
double pixel_iou(const std::vector<Pixel>& a, const std::vector<Pixel>& b, int shift_row = 0,
                 int shift_col = 0);

/// Greedy one-to-one matching of active tracks to the segments of `frame`:
/// candidates need IoU >= iou_min and centroid distance <= center_max; picked
/// by descending IoU, then smaller distance, then older track id.
std::vector<Assignment> match_segments(const std::vector<Track>& tracks, const std::vector<SegmentInstance>& segments,
                                       int frame, double iou_min, double center_max, int regression_window = 5);

/// Crop reference of one observed frame of a finalized track.
struct CropRef {
  int frame_index = 0;
  BBox bbox;          // padded crop window, clamped to the frame
  BBox segment_bbox;  // tight box of the observed segment
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  std::string image;  // crop image path relative to the sequence directory; may be empty
};

struct SequenceRecord {
  std::string sequence_id;
  std::string source_video;
  int track_id = 0;
  std::vector<CropRef> crops;
  std::vector<std::vector<float>> embeddings;  // empty or aligned with crops

  std::size_t length() const noexcept { return crops.size(); }
};

/// Stateful tracker for one video.
class Tracker {
 public:
  Tracker(TrackerConfig config, int height, int width);

  /// Advances to `frame_index` (which must exceed the previous one) with the
  /// segments detected there. Skipped frames age the tracks as empty frames.
  void step(int frame_index, std::vector<SegmentInstance> segments);

  const std::vector<Track>& tracks() const noexcept { return tracks_; }
  const TrackerConfig& config() const noexcept { return config_; }
  int last_frame() const noexcept { return last_frame_; }

 private:
  void advance(int frame_index, std::vector<SegmentInstance> segments);

  TrackerConfig config_;
  int height_;
  int width_;
  std::vector<Track> tracks_;
  int next_id_ = 0;
  int last_frame_ = -1;
};

/// Box grown by `padding` times its height/width on each side (rounded per
/// axis), clamped to the frame.
BBox pad_box(const BBox& box, double padding, int height, int width);

/// Tracks with at least `min_track_length` observed frames become sequences;
/// predicted-only frames contribute no crop.
std::vector<SequenceRecord> finalize_tracks(const std::vector<Track>& tracks, const std::string& video_id,
                                            int height, int width, const TrackerConfig& config);

std::string make_sequence_id(const std::string& video_id, int track_id);

}  // namespace oodret
