#include "oodret/manifest.hpp"

#include <fstream>
#include <set>

#include "oodret/error.hpp"
#include "oodret/tensor_io.hpp"

namespace oodret {

using nlohmann::json;

namespace {

std::string dims_text(const std::vector<std::uint32_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s;
}

fs::path resolve(const json& obj, const char* key, const fs::path& root) {
  if (!obj.contains(key) || obj.at(key).is_null()) return {};
  const fs::path p = obj.at(key).get<std::string>();
  return p.is_absolute() ? p : (root / p).lexically_normal();
}

std::string relative_text(const fs::path& p, const fs::path& root) {
  if (p.empty()) return {};
  const fs::path rel = p.lexically_relative(root);
  return (rel.empty() ? p : rel).generic_string();
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw Error(Errc::missing_file, what + ": missing file " + p.string());
}

void check_plane(const fs::path& p, const VideoEntry& v, int frame, const char* what, std::uint32_t channels = 0) {
  if (p.empty()) return;
  require_file(p, "video " + v.id + " frame " + std::to_string(frame) + " " + what);
  const TensorHeader h = peek_tensor(p);
  std::vector<std::uint32_t> want{static_cast<std::uint32_t>(v.height), static_cast<std::uint32_t>(v.width)};
  if (channels) want.push_back(channels);
  if (h.dtype != DType::u8 || h.dims != want) {
    throw Error(Errc::shape_mismatch, p.string() + ": " + what + " must be u8 " + dims_text(want) + ", found " +
                                          dims_text(h.dims));
  }
}

}  // namespace

const VideoEntry& CorpusManifest::video(const std::string& id) const {
  for (const auto& v : videos) {
    if (v.id == id) return v;
  }
  throw Error(Errc::unknown_sequence, "no video '" + id + "' in manifest");
}

CorpusManifest manifest_from_json(const json& doc, const fs::path& root_in) {
  CorpusManifest m;
  m.root = root_in.empty() ? fs::current_path() : fs::absolute(root_in).lexically_normal();
  try {
    m.dataset = doc.value("dataset", std::string("unnamed"));
    m.frame_rate = doc.value("frame_rate", 0.0);
    const auto& cls = doc.at("classes");
    m.class_names = cls.at("names").get<std::vector<std::string>>();
    m.road_index = cls.value("road_index", 0);
    m.ood_classes = doc.value("ood_classes", std::vector<std::string>{});
    m.vocabulary = resolve(doc, "vocabulary", m.root);
    m.gt_tracks = resolve(doc, "gt_tracks", m.root);
    m.config = resolve(doc, "config", m.root);
    for (const auto& jv : doc.at("videos")) {
      VideoEntry v;
      v.id = jv.at("id").get<std::string>();
      v.height = jv.at("height").get<int>();
      v.width = jv.at("width").get<int>();
      v.content_table = resolve(jv, "content_table", m.root);
      if (jv.contains("embeddings")) {
        v.embeddings.tensor = resolve(jv.at("embeddings"), "tensor", m.root);
        v.embeddings.crops = resolve(jv.at("embeddings"), "crops", m.root);
      }
      for (const auto& jf : jv.at("frames")) {
        FrameEntry f;
        f.index = jf.at("index").get<int>();
        f.scores = resolve(jf, "scores", m.root);
        f.masks = resolve(jf, "masks", m.root);
        f.probs = resolve(jf, "probs", m.root);
        f.road_gt = resolve(jf, "road_gt", m.root);
        f.ood_gt = resolve(jf, "ood_gt", m.root);
        f.instances = resolve(jf, "instances", m.root);
        f.content = resolve(jf, "content", m.root);
        f.image = resolve(jf, "image", m.root);
        v.frames.push_back(std::move(f));
      }
      m.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("manifest: ") + e.what());
  }

  if (m.class_names.empty()) throw Error(Errc::invalid_argument, "manifest declares no known classes");
  if (m.road_index < 0 || m.road_index >= m.num_classes()) {
    throw Error(Errc::out_of_bounds, "road_index " + std::to_string(m.road_index) + " outside the " +
                                         std::to_string(m.num_classes()) + " known classes");
  }
  if (!m.vocabulary.empty()) require_file(m.vocabulary, "vocabulary");
  if (!m.gt_tracks.empty()) require_file(m.gt_tracks, "gt_tracks");
  if (!m.config.empty()) require_file(m.config, "config");

  std::set<std::string> ids;
  const auto K = static_cast<std::uint32_t>(m.num_classes());
  for (const auto& v : m.videos) {
    if (!ids.insert(v.id).second) throw Error(Errc::invalid_argument, "duplicate video id " + v.id);
    if (v.height <= 0 || v.width <= 0) throw Error(Errc::invalid_argument, "video " + v.id + " has no pixels");
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      const FrameEntry& f = v.frames[i];
      if (i > 0 && f.index != v.frames[i - 1].index + 1) {
        throw Error(Errc::frame_gap, "video " + v.id + ": frame " + std::to_string(v.frames[i - 1].index) +
                                         " is followed by frame " + std::to_string(f.index) +
                                         " (frames must be contiguous)");
      }
      const std::string where = "video " + v.id + " frame " + std::to_string(f.index);
      if (!f.scores.empty()) {
        require_file(f.scores, where + " scores");
        const TensorHeader h = peek_tensor(f.scores);
        if (h.dtype != DType::f32 || h.dims.size() != 3 || h.dims[0] != static_cast<std::uint32_t>(v.height) ||
            h.dims[1] != static_cast<std::uint32_t>(v.width)) {
          throw Error(Errc::shape_mismatch, f.scores.string() + ": score tensor must be f32 " +
                                                std::to_string(v.height) + "x" + std::to_string(v.width) + "xK");
        }
        if (h.dims[2] != K) {
          throw Error(Errc::class_count_mismatch, f.scores.string() + ": tensor has " + std::to_string(h.dims[2]) +
                                                      " classes, manifest declares " + std::to_string(K));
        }
      } else if (!f.masks.empty() && !f.probs.empty()) {
        require_file(f.masks, where + " masks");
        require_file(f.probs, where + " probs");
        const TensorHeader hm = peek_tensor(f.masks);
        const TensorHeader hp = peek_tensor(f.probs);
        if (hm.dtype != DType::u8 || hm.dims.size() != 3 || hm.dims[1] != static_cast<std::uint32_t>(v.height) ||
            hm.dims[2] != static_cast<std::uint32_t>(v.width)) {
          throw Error(Errc::shape_mismatch, f.masks.string() + ": mask stack must be u8 Nx" +
                                                std::to_string(v.height) + "x" + std::to_string(v.width));
        }
        if (hp.dtype != DType::f32 || hp.dims.size() != 2 || hp.dims[0] != hm.dims[0]) {
          throw Error(Errc::shape_mismatch, f.probs.string() + ": probabilities must be f32 Nx(K+1) with N = " +
                                                std::to_string(hm.dims[0]));
        }
        if (hp.dims[1] != K + 1) {
          throw Error(Errc::class_count_mismatch, f.probs.string() + ": " + std::to_string(hp.dims[1]) +
                                                      " probability columns, expected K+1 = " + std::to_string(K + 1));
        }
      } else {
        throw Error(Errc::invalid_argument, where + ": needs either scores or masks + probs");
      }
      check_plane(f.road_gt, v, f.index, "road_gt");
      check_plane(f.ood_gt, v, f.index, "ood_gt");
      check_plane(f.instances, v, f.index, "instances");
      check_plane(f.content, v, f.index, "content");
      check_plane(f.image, v, f.index, "image", 3);
    }
    if (!v.content_table.empty()) {
      require_file(v.content_table, "video " + v.id + " content_table");
      const TensorHeader h = peek_tensor(v.content_table);
      if (h.dtype != DType::f32 || h.dims.size() != 3 || h.dims[0] != v.frames.size()) {
        throw Error(Errc::shape_mismatch, v.content_table.string() + ": content table must be f32 " +
                                              std::to_string(v.frames.size()) + "xCxd");
      }
    }
    if (!v.embeddings.empty()) {
      require_file(v.embeddings.tensor, "video " + v.id + " embeddings");
      require_file(v.embeddings.crops, "video " + v.id + " embedding crops");
      peek_tensor(v.embeddings.tensor);
    }
  }
  return m;
}

CorpusManifest load_manifest(const fs::path& path) {
  require_file(path, "manifest");
  return manifest_from_json(read_json_file(path), fs::absolute(path).parent_path());
}

json CorpusManifest::to_json() const {
  auto put = [&](json& obj, const char* key, const fs::path& p) {
    if (!p.empty()) obj[key] = relative_text(p, root);
  };
  json doc{{"dataset", dataset},
           {"frame_rate", frame_rate},
           {"classes", {{"names", class_names}, {"road_index", road_index}}},
           {"ood_classes", ood_classes}};
  put(doc, "vocabulary", vocabulary);
  put(doc, "gt_tracks", gt_tracks);
  put(doc, "config", config);
  json vids = json::array();
  for (const auto& v : videos) {
    json jv{{"id", v.id}, {"height", v.height}, {"width", v.width}};
    put(jv, "content_table", v.content_table);
    if (!v.embeddings.empty()) {
      jv["embeddings"] = json::object();
      put(jv["embeddings"], "tensor", v.embeddings.tensor);
      put(jv["embeddings"], "crops", v.embeddings.crops);
    }
    json frames = json::array();
    for (const auto& f : v.frames) {
      json jf{{"index", f.index}};
      put(jf, "scores", f.scores);
      put(jf, "masks", f.masks);
      put(jf, "probs", f.probs);
      put(jf, "road_gt", f.road_gt);
      put(jf, "ood_gt", f.ood_gt);
      put(jf, "instances", f.instances);
      put(jf, "content", f.content);
      put(jf, "image", f.image);
      frames.push_back(std::move(jf));
    }
    jv["frames"] = std::move(frames);
    vids.push_back(std::move(jv));
  }
  doc["videos"] = std::move(vids);
  return doc;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
  CorpusManifest copy = manifest;
  copy.root = fs::absolute(path).parent_path().lexically_normal();
  write_json_file(path, copy.to_json());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc, int indent) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out << doc.dump(indent) << '\n';
    if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

}  // namespace oodret
