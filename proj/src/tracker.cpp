#include "oodret/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace oodret {

double TrackerConfig::center_limit(int height, int width) const noexcept {
  if (center_max >= 0.0) return center_max;
  return 0.05 * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

void TrackerConfig::validate() const {
  if (!(iou_min >= 0.0 && iou_min <= 1.0)) throw Error(Errc::invalid_argument, "iou_min must lie in [0,1]");
  if (max_gap < 0) throw Error(Errc::invalid_argument, "max_gap must be >= 0");
  if (regression_window < 2) throw Error(Errc::invalid_argument, "regression_window must be >= 2");
  if (min_track_length < 1) throw Error(Errc::invalid_argument, "min_track_length must be >= 1");
  if (!(crop_padding >= 0.0)) throw Error(Errc::invalid_argument, "crop_padding must be >= 0");
}

CenterPoint predict_center(const Track& track, int frame, int window) {
  const auto& obs = track.observations;
  if (obs.empty()) throw Error(Errc::invalid_argument, "cannot predict the center of an empty track");
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(window, 1)), obs.size());
  if (n < 2) return {obs.back().segment.centroid_row, obs.back().segment.centroid_col};
  const std::size_t first = obs.size() - n;
  double t_mean = 0.0, r_mean = 0.0, c_mean = 0.0;
  for (std::size_t i = first; i < obs.size(); ++i) {
    t_mean += obs[i].frame_index;
    r_mean += obs[i].segment.centroid_row;
    c_mean += obs[i].segment.centroid_col;
  }
  t_mean /= static_cast<double>(n);
  r_mean /= static_cast<double>(n);
  c_mean /= static_cast<double>(n);
  double stt = 0.0, str = 0.0, stc = 0.0;
  for (std::size_t i = first; i < obs.size(); ++i) {
    const double dt = obs[i].frame_index - t_mean;
    stt += dt * dt;
    str += dt * (obs[i].segment.centroid_row - r_mean);
    stc += dt * (obs[i].segment.centroid_col - c_mean);
  }
  const double dt = frame - t_mean;
  return {r_mean + str / stt * dt, c_mean + stc / stt * dt};
}

double pixel_iou(const std::vector<Pixel>& a, const std::vector<Pixel>& b, int shift_row, int shift_col) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    const Pixel pa{a[i].row + shift_row, a[i].col + shift_col};
    if (pa < b[j]) {
      ++i;
    } else if (b[j] < pa) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct Reference {
  CenterPoint center;
  int shift_row = 0;
  int shift_col = 0;
};

Reference reference_for(const Track& track, int frame, int window) {
  const auto& last = track.observations.back().segment;
  if (track.gap_count == 0) return {{last.centroid_row, last.centroid_col}, 0, 0};
  const CenterPoint p = predict_center(track, frame, window);
  return {p, static_cast<int>(std::lround(p.row - last.centroid_row)),
          static_cast<int>(std::lround(p.col - last.centroid_col))};
}

bool boxes_touch(const BBox& a, const BBox& b, int shift_row, int shift_col) {
  return a.top + shift_row <= b.bottom && b.top <= a.bottom + shift_row && a.left + shift_col <= b.right &&
         b.left <= a.right + shift_col;
}

}  // namespace

std::vector<Assignment> match_segments(const std::vector<Track>& tracks, const std::vector<SegmentInstance>& segments,
                                       int frame, double iou_min, double center_max, int regression_window) {
  std::vector<Assignment> candidates;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const Track& track = tracks[t];
    if (track.state != TrackState::active || track.observations.empty()) continue;
    const Reference ref = reference_for(track, frame, regression_window);
    const auto& last = track.observations.back().segment;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& seg = segments[s];
      const double dist = std::hypot(seg.centroid_row - ref.center.row, seg.centroid_col - ref.center.col);
      if (dist > center_max) continue;
      if (!boxes_touch(last.bbox, seg.bbox, ref.shift_row, ref.shift_col)) continue;
      const double iou = pixel_iou(last.pixels, seg.pixels, ref.shift_row, ref.shift_col);
      if (iou < iou_min || iou <= 0.0) continue;
      candidates.push_back({t, s, iou, dist});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Assignment& a, const Assignment& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.center_distance != b.center_distance) return a.center_distance < b.center_distance;
    if (tracks[a.track].track_id != tracks[b.track].track_id) {
      return tracks[a.track].track_id < tracks[b.track].track_id;
    }
    return a.segment < b.segment;
  });
  std::vector<bool> track_used(tracks.size(), false);
  std::vector<bool> seg_used(segments.size(), false);
  std::vector<Assignment> out;
  for (const auto& c : candidates) {
    if (track_used[c.track] || seg_used[c.segment]) continue;
    track_used[c.track] = true;
    seg_used[c.segment] = true;
    out.push_back(c);
  }
  return out;
}

Tracker::Tracker(TrackerConfig config, int height, int width)
    : config_(config), height_(height), width_(width) {
  config_.validate();
}

void Tracker::step(int frame_index, std::vector<SegmentInstance> segments) {
  if (frame_index <= last_frame_) {
    throw Error(Errc::frame_regression, "frame " + std::to_string(frame_index) + " does not follow frame " +
                                            std::to_string(last_frame_));
  }
  if (last_frame_ >= 0) {
    for (int f = last_frame_ + 1; f < frame_index; ++f) advance(f, {});
  }
  advance(frame_index, std::move(segments));
}

void Tracker::advance(int frame_index, std::vector<SegmentInstance> segments) {
  for (auto& seg : segments) seg.frame_index = frame_index;
  const auto assignments = match_segments(tracks_, segments, frame_index, config_.iou_min,
                                          config_.center_limit(height_, width_), config_.regression_window);
  std::vector<bool> track_matched(tracks_.size(), false);
  std::vector<bool> seg_matched(segments.size(), false);
  for (const auto& a : assignments) {
    track_matched[a.track] = true;
    seg_matched[a.segment] = true;
  }
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    Track& track = tracks_[t];
    if (track.state != TrackState::active || track_matched[t]) continue;
    track.predicted_centers.push_back(
        {frame_index, predict_center(track, frame_index, config_.regression_window)});
    ++track.gap_count;
    if (track.gap_count > config_.max_gap) track.state = TrackState::terminated;
  }
  for (const auto& a : assignments) {
    Track& track = tracks_[a.track];
    track.observations.push_back({frame_index, std::move(segments[a.segment])});
    track.gap_count = 0;
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (seg_matched[s]) continue;
    Track track;
    track.track_id = next_id_++;
    track.observations.push_back({frame_index, std::move(segments[s])});
    tracks_.push_back(std::move(track));
  }
  last_frame_ = frame_index;
}

std::string make_sequence_id(const std::string& video_id, int track_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-t%04d", track_id);
  return video_id + buf;
}

BBox pad_box(const BBox& b, double padding, int height, int width) {
  const int pad_r = static_cast<int>(std::lround(padding * b.height()));
  const int pad_c = static_cast<int>(std::lround(padding * b.width()));
  return {std::max(0, b.top - pad_r), std::max(0, b.left - pad_c), std::min(height - 1, b.bottom + pad_r),
          std::min(width - 1, b.right + pad_c)};
}

std::vector<SequenceRecord> finalize_tracks(const std::vector<Track>& tracks, const std::string& video_id,
                                            int height, int width, const TrackerConfig& config) {
  std::vector<SequenceRecord> out;
  for (const auto& track : tracks) {
    if (static_cast<int>(track.observations.size()) < config.min_track_length) continue;
    SequenceRecord rec;
    rec.sequence_id = make_sequence_id(video_id, track.track_id);
    rec.source_video = video_id;
    rec.track_id = track.track_id;
    for (const auto& obs : track.observations) {
      CropRef crop;
      crop.frame_index = obs.frame_index;
      crop.segment_bbox = obs.segment.bbox;
      crop.bbox = pad_box(obs.segment.bbox, config.crop_padding, height, width);
      crop.centroid_row = obs.segment.centroid_row;
      crop.centroid_col = obs.segment.centroid_col;
      rec.crops.push_back(crop);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace oodret
