#include "oodret/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "oodret/error.hpp"
#include "oodret/rle.hpp"
#include "oodret/roi.hpp"
#include "oodret/synthetic.hpp"
#include "oodret/tensor_io.hpp"

namespace oodret {

using nlohmann::json;

namespace {

const char* roi_name(RoiSource s) {
  switch (s) {
    case RoiSource::predicted: return "predicted";
    case RoiSource::ground_truth: return "ground_truth";
    case RoiSource::none: return "none";
  }
  return "predicted";
}

RoiSource roi_from_name(const std::string& name) {
  if (name == "predicted") return RoiSource::predicted;
  if (name == "ground_truth") return RoiSource::ground_truth;
  if (name == "none") return RoiSource::none;
  throw Error(Errc::invalid_argument, "roi source must be predicted, ground_truth or none, got '" + name + "'");
}

std::int64_t instance_key(std::size_t video, int frame, int object) {
  return (static_cast<std::int64_t>(video) << 32) | (static_cast<std::int64_t>(frame) << 16) |
         static_cast<std::int64_t>(object & 0xffff);
}

}  // namespace

// ---- config ----------------------------------------------------------------

int PipelineConfig::roi_radius_for(int width) const {
  return roi_radius >= 0 ? roi_radius : default_roi_radius(width);
}

double PipelineConfig::match_radius_for(int height, int width) const {
  return match_radius >= 0.0 ? match_radius : 0.05 * std::hypot(height, width);
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_argument, "config: " + msg); };
  if (!std::isfinite(anomaly_threshold)) fail("anomaly_threshold must be finite");
  if (!(meta_cutoff >= 0.0 && meta_cutoff <= 1.0)) fail("meta cutoff must lie in [0, 1]");
  if (!(tau >= -1.0 && tau <= 1.0)) fail("retrieval tau must lie in [-1, 1]");
  if (f1_thresholds.empty()) fail("f1_thresholds must not be empty");
  for (double t : f1_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) fail("f1 thresholds must lie in (0, 1]");
  }
  if (!std::isfinite(match_radius)) fail("match_radius must be finite");
  tracker.validate();
}

json PipelineConfig::to_json() const {
  return {{"anomaly_threshold", anomaly_threshold},
          {"connectivity", connectivity == Connectivity::eight ? 8 : 4},
          {"meta", {{"model", meta_model}, {"cutoff", meta_cutoff}}},
          {"roi", {{"source", roi_name(roi_source)}, {"radius", roi_radius}}},
          {"tracker",
           {{"iou_min", tracker.iou_min},
            {"center_max", tracker.center_max},
            {"max_gap", tracker.max_gap},
            {"regression_window", tracker.regression_window},
            {"min_track_length", tracker.min_track_length},
            {"crop_padding", tracker.crop_padding}}},
          {"retrieval", {{"tau", tau}}},
          {"evaluation",
           {{"match_radius", match_radius}, {"f1_thresholds", f1_thresholds}, {"roi", roi_name(f1_roi)}}}};
}

PipelineConfig PipelineConfig::from_json(const json& doc) {
  PipelineConfig c;
  try {
    c.anomaly_threshold = doc.value("anomaly_threshold", c.anomaly_threshold);
    const int conn = doc.value("connectivity", 8);
    if (conn != 4 && conn != 8) throw Error(Errc::invalid_argument, "config: connectivity must be 4 or 8");
    c.connectivity = conn == 8 ? Connectivity::eight : Connectivity::four;
    if (doc.contains("meta")) {
      const auto& m = doc.at("meta");
      c.meta_model = m.value("model", std::string{});
      c.meta_cutoff = m.value("cutoff", c.meta_cutoff);
    }
    if (doc.contains("roi")) {
      const auto& r = doc.at("roi");
      c.roi_source = roi_from_name(r.value("source", std::string("predicted")));
      c.roi_radius = r.value("radius", c.roi_radius);
    }
    if (doc.contains("tracker")) {
      const auto& t = doc.at("tracker");
      c.tracker.iou_min = t.value("iou_min", c.tracker.iou_min);
      c.tracker.center_max = t.value("center_max", c.tracker.center_max);
      c.tracker.max_gap = t.value("max_gap", c.tracker.max_gap);
      c.tracker.regression_window = t.value("regression_window", c.tracker.regression_window);
      c.tracker.min_track_length = t.value("min_track_length", c.tracker.min_track_length);
      c.tracker.crop_padding = t.value("crop_padding", c.tracker.crop_padding);
    }
    if (doc.contains("retrieval")) c.tau = doc.at("retrieval").value("tau", c.tau);
    if (doc.contains("evaluation")) {
      const auto& e = doc.at("evaluation");
      c.match_radius = e.value("match_radius", c.match_radius);
      c.f1_thresholds = e.value("f1_thresholds", c.f1_thresholds);
      c.f1_roi = roi_from_name(e.value("roi", std::string("predicted")));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  PipelineConfig c = PipelineConfig::from_json(read_json_file(path));
  if (!c.meta_model.empty() && fs::path(c.meta_model).is_relative()) {
    c.meta_model = (fs::absolute(path).parent_path() / c.meta_model).lexically_normal().string();
  }
  return c;
}

PipelineConfig resolve_config(const std::optional<fs::path>& explicit_path, const CorpusManifest* manifest) {
  if (explicit_path) return load_config(*explicit_path);
  if (manifest && !manifest->config.empty()) return load_config(manifest->config);
  return PipelineConfig{};
}

// ---- per-frame inputs ------------------------------------------------------

FrameScoreTensor load_frame_scores(const FrameEntry& frame) {
  if (!frame.scores.empty()) {
    FrameScoreTensor q = scores_from_tensor(read_tensor(frame.scores));
    q.validate();
    return q;
  }
  const MaskPredictionSet preds = predictions_from_tensors(read_tensor(frame.masks), read_tensor(frame.probs));
  return fuse_masks(preds);
}

BinaryMask load_plane(const fs::path& path) {
  if (path.empty()) throw Error(Errc::missing_file, "required mask is not listed in the manifest");
  return mask_from_tensor(read_tensor(path));
}

BinaryMask predicted_roi(const FrameScoreTensor& scores, int road_index, int radius) {
  return morphological_close(road_mask_from_scores(scores, road_index), radius);
}

// ---- segmentation ----------------------------------------------------------

FrameSegments segment_frame(const FrameScoreTensor& scores, const AnomalyMap& map, const BinaryMask& roi,
                            const PipelineConfig& config, const MetaModel* meta, int frame_index) {
  FrameSegments out;
  out.frame_index = frame_index;
  const BinaryMask mask = threshold_anomaly(map, config.anomaly_threshold);
  std::vector<SegmentInstance> raw = extract_components(mask, map, frame_index, config.connectivity);
  out.raw_count = raw.size();
  if (meta) {
    MetaModel model = *meta;
    model.cutoff = config.meta_cutoff;
    raw = filter_segments(raw, map, model);
  }
  out.meta_removed = out.raw_count - raw.size();
  const BinaryMask kept = segments_to_mask(raw, scores.height(), scores.width());
  out.segments = extract_components(apply_roi(kept, roi), map, frame_index, config.connectivity);
  return out;
}

BinaryMask frame_roi(RoiSource source, const FrameScoreTensor& scores, const FrameEntry& frame,
                     const CorpusManifest& manifest, const PipelineConfig& config) {
  switch (source) {
    case RoiSource::predicted:
      return predicted_roi(scores, manifest.road_index, config.roi_radius_for(scores.width()));
    case RoiSource::ground_truth:
      if (frame.road_gt.empty()) {
        throw Error(Errc::missing_file, "ground-truth ROI requested but frame " + std::to_string(frame.index) +
                                            " has no road_gt");
      }
      return load_plane(frame.road_gt);
    case RoiSource::none:
      break;
  }
  return BinaryMask(scores.height(), scores.width(), 1);
}

VideoSegments segment_video(const CorpusManifest& manifest, const VideoEntry& video, const PipelineConfig& config,
                            const MetaModel* meta) {
  VideoSegments out;
  out.video = video.id;
  out.height = video.height;
  out.width = video.width;
  for (const auto& frame : video.frames) {
    const FrameScoreTensor q = load_frame_scores(frame);
    if (q.num_classes() != manifest.num_classes()) {
      throw Error(Errc::class_count_mismatch, "video " + video.id + " frame " + std::to_string(frame.index) +
                                                  ": scores have " + std::to_string(q.num_classes()) + " classes");
    }
    const AnomalyMap map = rba_score(q);
    const BinaryMask roi = frame_roi(config.roi_source, q, frame, manifest, config);
    out.frames.push_back(segment_frame(q, map, roi, config, meta, frame.index));
  }
  return out;
}

// ---- meta-classifier training ----------------------------------------------

MetaExamples collect_meta_examples(const CorpusManifest& manifest, const PipelineConfig& config) {
  MetaExamples ex;
  for (const auto& video : manifest.videos) {
    for (const auto& frame : video.frames) {
      const FrameScoreTensor q = load_frame_scores(frame);
      const AnomalyMap map = rba_score(q);
      const BinaryMask labels = load_plane(frame.ood_gt);
      BinaryMask ood(labels.height(), labels.width());
      for (std::size_t i = 0; i < labels.size(); ++i) ood.values()[i] = labels.values()[i] == 1 ? 1 : 0;
      const BinaryMask mask = threshold_anomaly(map, config.anomaly_threshold);
      for (const auto& seg : extract_components(mask, map, frame.index, config.connectivity)) {
        std::size_t ignored = 0;
        for (const auto& px : seg.pixels) ignored += labels(px.row, px.col) == 255 ? 1 : 0;
        if (2 * ignored > seg.pixels.size()) {
          ++ex.skipped_off_road;
          continue;
        }
        ex.features.push_back(compute_features(seg, map));
        ex.labels.push_back(label_segment(seg, ood));
      }
    }
  }
  return ex;
}

MetaModel train_meta_on_corpus(const CorpusManifest& manifest, const PipelineConfig& config) {
  const MetaExamples ex = collect_meta_examples(manifest, config);
  MetaModel model = train_meta(ex.features, ex.labels);
  model.cutoff = config.meta_cutoff;
  return model;
}

// ---- tracking and embedding ------------------------------------------------

std::vector<SequenceRecord> track_video(const VideoSegments& segments, const PipelineConfig& config) {
  Tracker tracker(config.tracker, segments.height, segments.width);
  for (const auto& f : segments.frames) tracker.step(f.frame_index, f.segments);
  return finalize_tracks(tracker.tracks(), segments.video, segments.height, segments.width, config.tracker);
}

namespace {

class ContentCropEncoder : public CropEncoder {
 public:
  explicit ContentCropEncoder(const CorpusManifest& manifest) : manifest_(manifest) {}

  std::vector<float> encode(const std::string& video, int frame_index, const BBox& box) override {
    return encoder(video).encode(frame_index, box);
  }
  const ContentEncoder& encoder(const std::string& video) {
    auto it = cache_.find(video);
    if (it == cache_.end()) it = cache_.emplace(video, ContentEncoder(manifest_.video(video))).first;
    return it->second;
  }

 private:
  const CorpusManifest& manifest_;
  std::map<std::string, ContentEncoder> cache_;
};

using CropKey = std::tuple<std::string, int, int, int, int, int>;

class TableCropEncoder : public CropEncoder {
 public:
  void add(const fs::path& tensor, const fs::path& sidecar, const std::string& default_video) {
    const auto rows = rows_from_tensor(read_tensor(tensor));
    const json doc = read_json_file(sidecar);
    try {
      const auto& crops = doc.at("crops");
      if (crops.size() != rows.size()) {
        throw Error(Errc::shape_mismatch, sidecar.string() + ": " + std::to_string(crops.size()) +
                                              " crops for " + std::to_string(rows.size()) + " embedding rows");
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& c = crops.at(i);
        const BBox b = bbox_from_json(c.at("bbox"));
        const std::string video = c.value("video", default_video);
        table_[CropKey{video, c.at("frame").get<int>(), b.top, b.left, b.bottom, b.right}] = rows[i];
      }
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error, sidecar.string() + ": " + e.what());
    }
  }

  std::vector<float> encode(const std::string& video, int frame_index, const BBox& box) override {
    const auto it = table_.find(CropKey{video, frame_index, box.top, box.left, box.bottom, box.right});
    if (it == table_.end()) {
      throw Error(Errc::missing_embeddings, "no embedding for crop of video " + video + " frame " +
                                                std::to_string(frame_index) + " box " + to_json(box).dump());
    }
    return it->second;
  }

 private:
  std::map<CropKey, std::vector<float>> table_;
};

}  // namespace

std::unique_ptr<CropEncoder> make_content_encoder(const CorpusManifest& manifest) {
  return std::make_unique<ContentCropEncoder>(manifest);
}

std::unique_ptr<CropEncoder> make_table_encoder(const fs::path& tensor, const fs::path& sidecar) {
  auto enc = std::make_unique<TableCropEncoder>();
  enc->add(tensor, sidecar, "");
  return enc;
}

std::unique_ptr<CropEncoder> make_manifest_table_encoder(const CorpusManifest& manifest) {
  auto enc = std::make_unique<TableCropEncoder>();
  for (const auto& v : manifest.videos) {
    if (!v.embeddings.empty()) enc->add(v.embeddings.tensor, v.embeddings.crops, v.id);
  }
  return enc;
}

void embed_sequences(std::vector<SequenceRecord>& sequences, CropEncoder& encoder) {
  for (auto& seq : sequences) {
    seq.embeddings.clear();
    for (const auto& crop : seq.crops) seq.embeddings.push_back(encoder.encode(seq.source_video, crop.frame_index, crop.bbox));
  }
}

json crop_sidecar(const std::vector<SequenceRecord>& sequences) {
  json crops = json::array();
  for (const auto& seq : sequences) {
    for (const auto& c : seq.crops) {
      crops.push_back({{"video", seq.source_video},
                       {"sequence_id", seq.sequence_id},
                       {"frame", c.frame_index},
                       {"bbox", to_json(c.bbox)}});
    }
  }
  return {{"crops", std::move(crops)}};
}

// ---- evaluation ------------------------------------------------------------

GroundTruth GroundTruth::load(const fs::path& path) {
  const json doc = read_json_file(path);
  GroundTruth gt;
  try {
    gt.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& v : doc.at("videos")) {
      auto& objects = gt.videos[v.at("id").get<std::string>()];
      for (const auto& o : v.at("objects")) {
        GroundTruthObject obj;
        obj.object_id = o.at("object_id").get<int>();
        obj.class_index = o.at("class_index").get<int>();
        obj.class_name = o.value("class", std::string{});
        for (const auto& obs : o.at("observations")) {
          obj.centers[obs.at("frame").get<int>()] = {obs.at("centroid").at(0).get<double>(),
                                                     obs.at("centroid").at(1).get<double>()};
        }
        objects.push_back(std::move(obj));
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return gt;
}

std::size_t GroundTruth::observations(int class_index) const {
  std::size_t n = 0;
  for (const auto& [id, objects] : videos) {
    for (const auto& o : objects) {
      if (o.class_index == class_index) n += o.centers.size();
    }
  }
  return n;
}

CropLabel label_box(const Grid<std::uint8_t>& instances, const BBox& box,
                    const std::vector<GroundTruthObject>& objects) {
  std::map<int, long long> per_object;
  for (int r = std::max(0, box.top); r <= std::min(instances.height() - 1, box.bottom); ++r) {
    for (int c = std::max(0, box.left); c <= std::min(instances.width() - 1, box.right); ++c) {
      if (instances(r, c)) ++per_object[instances(r, c) - 1];
    }
  }
  std::map<int, long long> per_class;
  std::map<int, std::pair<long long, int>> best;  // class -> (count, object)
  for (const auto& [id, count] : per_object) {
    const auto it = std::find_if(objects.begin(), objects.end(), [&](const auto& o) { return o.object_id == id; });
    if (it == objects.end()) continue;
    per_class[it->class_index] += count;
    auto& b = best[it->class_index];
    if (count > b.first) b = {count, id};
  }
  for (const auto& [cls, count] : per_class) {
    if (2 * count > box.area()) return {cls, best[cls].second};
  }
  return {};
}

EvalReport evaluate(const EvalInputs& in, RetrievalVariants* variants) {
  if (!in.manifest || !in.config || !in.segments || !in.index || !in.vocabulary) {
    throw Error(Errc::invalid_argument, "evaluate needs manifest, config, segments, index and vocabulary");
  }
  const CorpusManifest& manifest = *in.manifest;
  const PipelineConfig& config = *in.config;
  if (manifest.gt_tracks.empty()) throw Error(Errc::missing_file, "evaluation needs a gt_tracks file");
  const GroundTruth gt = GroundTruth::load(manifest.gt_tracks);
  const int K = manifest.num_classes();

  EvalReport report;
  report.config = config.to_json();

  std::map<std::string, const VideoSegments*> seg_by_video;
  for (const auto& v : *in.segments) seg_by_video[v.video] = &v;

  // Sequences per video from the index.
  std::map<std::string, std::vector<SequenceRecord>> seqs_by_video;
  for (const auto& id : in.index->sequence_ids()) {
    auto rec = in.index->sequence(id);
    seqs_by_video[rec->source_video].push_back(std::move(*rec));
  }

  PixelEvalInput pixels;
  ComponentF1 f1(config.f1_thresholds);
  ClearMotResult mot;
  double distance_sum = 0.0;
  // (video, frame) -> instance map, kept for crop labelling.
  std::map<std::pair<std::string, int>, BinaryMask> instance_maps;

  for (const auto& video : manifest.videos) {
    const auto seg_it = seg_by_video.find(video.id);
    if (seg_it == seg_by_video.end()) throw Error(Errc::missing_file, "no segments for video " + video.id);
    std::map<int, const FrameSegments*> seg_frames;
    for (const auto& f : seg_it->second->frames) seg_frames[f.frame_index] = &f;
    const auto gt_it = gt.videos.find(video.id);
    static const std::vector<GroundTruthObject> kNone;
    const auto& objects = gt_it == gt.videos.end() ? kNone : gt_it->second;

    std::vector<FrameObjects> pred_frames, gt_frames;
    std::map<int, std::size_t> frame_pos;
    for (const auto& frame : video.frames) {
      const FrameScoreTensor q = load_frame_scores(frame);
      AnomalyMap map = rba_score(q);
      const BinaryMask roi = frame_roi(config.f1_roi, q, frame, manifest, config);
      const BinaryMask labels = load_plane(frame.ood_gt);
      for (std::size_t i = 0; i < map.size(); ++i) {
        if (!roi.values()[i]) map.values()[i] = static_cast<float>(-K);
      }
      pixels.append(map, labels);

      const BinaryMask inst = load_plane(frame.instances);
      std::map<int, std::vector<Pixel>> gt_pixels;
      for (int r = 0; r < inst.height(); ++r) {
        for (int c = 0; c < inst.width(); ++c) {
          if (inst(r, c)) gt_pixels[inst(r, c) - 1].push_back({r, c});
        }
      }
      std::vector<std::vector<Pixel>> gt_comps, pred_comps;
      for (auto& [id, px] : gt_pixels) gt_comps.push_back(std::move(px));
      const auto sf = seg_frames.find(frame.index);
      if (sf == seg_frames.end()) {
        throw Error(Errc::missing_file, "segments of video " + video.id + " lack frame " + std::to_string(frame.index));
      }
      for (const auto& s : sf->second->segments) pred_comps.push_back(s.pixels);
      f1.add_frame(pred_comps, gt_comps, roi);
      instance_maps.emplace(std::make_pair(video.id, frame.index), inst);

      frame_pos[frame.index] = gt_frames.size();
      FrameObjects g{frame.index, {}}, p{frame.index, {}};
      for (const auto& o : objects) {
        const auto c = o.centers.find(frame.index);
        if (c != o.centers.end()) g.objects.push_back({o.object_id, c->second.row, c->second.col});
      }
      gt_frames.push_back(std::move(g));
      pred_frames.push_back(std::move(p));
    }
    for (const auto& seq : seqs_by_video[video.id]) {
      for (const auto& crop : seq.crops) {
        const auto pos = frame_pos.find(crop.frame_index);
        if (pos == frame_pos.end()) continue;
        pred_frames[pos->second].objects.push_back({seq.track_id, crop.centroid_row, crop.centroid_col});
      }
    }
    const ClearMotResult r = clear_mot(pred_frames, gt_frames, config.match_radius_for(video.height, video.width));
    mot.ground_truth += r.ground_truth;
    mot.matches += r.matches;
    mot.misses += r.misses;
    mot.false_positives += r.false_positives;
    mot.id_switches += r.id_switches;
    distance_sum += r.motp * static_cast<double>(r.matches);
  }
  report.auprc = pixel_auprc(pixels);
  report.fpr95 = fpr_at_95_tpr(pixels);
  report.f1_bar = f1.f1_bar();
  mot.mota = 1.0 - static_cast<double>(mot.misses + mot.false_positives + mot.id_switches) /
                       static_cast<double>(std::max<long long>(mot.ground_truth, 1));
  mot.motp = mot.matches > 0 ? distance_sum / static_cast<double>(mot.matches) : 0.0;
  report.tracking = mot;
  report.mota = mot.mota;
  report.motp = mot.motp;

  // Retrieval.
  std::vector<std::string> queries = manifest.ood_classes.empty() ? gt.classes : manifest.ood_classes;
  std::map<std::string, std::size_t> video_pos;
  for (std::size_t i = 0; i < manifest.videos.size(); ++i) video_pos[manifest.videos[i].id] = i;

  struct CropInfo {
    CropLabel label;
    std::int64_t key = -1;
  };
  std::map<std::string, std::vector<CropInfo>> crop_info;
  for (const auto& [video, seqs] : seqs_by_video) {
    const auto gt_it = gt.videos.find(video);
    static const std::vector<GroundTruthObject> kNone;
    const auto& objects = gt_it == gt.videos.end() ? kNone : gt_it->second;
    for (const auto& seq : seqs) {
      auto& infos = crop_info[seq.sequence_id];
      for (const auto& crop : seq.crops) {
        CropInfo info;
        const auto m = instance_maps.find({video, crop.frame_index});
        if (m != instance_maps.end()) info.label = label_box(m->second, crop.segment_bbox, objects);
        if (info.label.class_index >= 0) info.key = instance_key(video_pos[video], crop.frame_index, info.label.object_id);
        infos.push_back(info);
      }
    }
  }

  std::vector<QueryEvalInput> tracked, per_crop, full_frame;
  json undefined = json::array();
  for (const auto& term : queries) {
    const QueryEmbedding q = in.vocabulary->resolve(term);
    int cls = -1;
    for (std::size_t c = 0; c < gt.classes.size(); ++c) {
      if (fold_case(gt.classes[c]) == fold_case(term)) cls = static_cast<int>(c);
    }
    QueryEvalInput t{term, {}, cls >= 0 ? gt.observations(cls) : 0};
    QueryEvalInput p = t;
    for (const auto& [video, seqs] : seqs_by_video) {
      for (const auto& seq : seqs) {
        const auto sims = in.index->crop_similarities(seq.sequence_id, q);
        const double best = sims.empty() ? -1.0 : *std::max_element(sims.begin(), sims.end());
        const auto& infos = crop_info[seq.sequence_id];
        for (std::size_t j = 0; j < sims.size(); ++j) {
          const bool relevant = cls >= 0 && infos[j].label.class_index == cls;
          const std::int64_t key = relevant ? infos[j].key : -1;
          t.instances.push_back({best, relevant, key});
          p.instances.push_back({sims[j], relevant, key});
        }
      }
    }
    if (t.num_relevant == 0) undefined.push_back(term);
    tracked.push_back(std::move(t));
    per_crop.push_back(std::move(p));

    if (in.frame_encoder) {
      QueryEvalInput ff{term, {}, 0};
      for (std::size_t vi = 0; vi < manifest.videos.size(); ++vi) {
        const auto& video = manifest.videos[vi];
        const auto gt_it = gt.videos.find(video.id);
        for (const auto& frame : video.frames) {
          bool present = false;
          if (gt_it != gt.videos.end()) {
            for (const auto& o : gt_it->second) present |= o.class_index == cls && o.centers.count(frame.index) > 0;
          }
          const auto e = in.frame_encoder(video.id, frame.index);
          const double s = cosine_similarity(e, q.values);
          ff.instances.push_back({s, present, present ? instance_key(vi, frame.index, 0) : -1});
          ff.num_relevant += present ? 1 : 0;
        }
      }
      full_frame.push_back(std::move(ff));
    }
  }
  report.retrieval = retrieval_pr(tracked);
  report.notes["queries"] = queries;
  report.notes["undefined_recall"] = undefined;
  report.notes["f1_no_components"] = f1.empty();
  report.notes["meta_model"] = config.meta_model;
  if (variants) {
    variants->tracked = report.retrieval;
    variants->per_crop = retrieval_pr(per_crop);
    variants->has_full_frame = static_cast<bool>(in.frame_encoder);
    if (variants->has_full_frame) variants->full_frame = retrieval_pr(full_frame);
    report.notes["per_crop_auprc"] = variants->per_crop.auprc;
    if (variants->has_full_frame) report.notes["full_frame_auprc"] = variants->full_frame.auprc;
  }
  return report;
}

// ---- whole runs ------------------------------------------------------------

CorpusRun run_corpus(const CorpusManifest& manifest, const PipelineConfig& config, const MetaModel* meta,
                     CropEncoder& encoder) {
  CorpusRun run;
  for (const auto& video : manifest.videos) {
    run.segments.push_back(segment_video(manifest, video, config, meta));
    auto seqs = track_video(run.segments.back(), config);
    embed_sequences(seqs, encoder);
    for (const auto& s : seqs) {
      run.index.ingest(s);
      run.sequences.push_back(s);
    }
  }
  run.index.provenance = {{"config", config.to_json()}};
  return run;
}

double select_threshold(const CorpusManifest& manifest, const PipelineConfig& config, const MetaModel* meta,
                        const std::vector<double>& candidates) {
  if (candidates.empty()) throw Error(Errc::invalid_argument, "select_threshold needs candidates");
  double best_t = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {
    PipelineConfig c = config;
    c.anomaly_threshold = t;
    ComponentF1 f1(c.f1_thresholds);
    for (const auto& video : manifest.videos) {
      for (const auto& frame : video.frames) {
        const FrameScoreTensor q = load_frame_scores(frame);
        const AnomalyMap map = rba_score(q);
        const BinaryMask roi = frame_roi(c.roi_source, q, frame, manifest, c);
        const FrameSegments fs = segment_frame(q, map, roi, c, meta, frame.index);
        const BinaryMask inst = load_plane(frame.instances);
        std::map<int, std::vector<Pixel>> gt_pixels;
        for (int r = 0; r < inst.height(); ++r) {
          for (int col = 0; col < inst.width(); ++col) {
            if (inst(r, col)) gt_pixels[inst(r, col) - 1].push_back({r, col});
          }
        }
        std::vector<std::vector<Pixel>> gt_comps, pred;
        for (auto& [id, px] : gt_pixels) gt_comps.push_back(std::move(px));
        for (const auto& s : fs.segments) pred.push_back(s.pixels);
        f1.add_frame(pred, gt_comps, frame_roi(c.f1_roi, q, frame, manifest, c));
      }
    }
    const double score = f1.f1_bar();
    if (score > best_f1) {
      best_f1 = score;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace oodret
