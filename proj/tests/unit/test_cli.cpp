#include <doctest.h>

#include "fixture.hpp"
#include "oodret/artifacts.hpp"
#include "oodret/pipeline.hpp"
#include "oodret/tensor_io.hpp"

using namespace oodret;

TEST_CASE("query by term returns only that class") {
  const auto& run = CleanRun::get();
  const auto r = cli({"query", "--work", run.work.string(), "--manifest", run.manifest.string(), "--term", "dog"});
  REQUIRE(r.status == 0);
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(!doc["results"].empty());

  const auto m = load_manifest(run.manifest);
  const auto gt = GroundTruth::load(m.gt_tracks);
  const auto index = RetrievalIndex::load(WorkDir{run.work}.index());
  for (const auto& res : doc["results"]) {
    const auto seq = *index.sequence(res["sequence_id"].get<std::string>());
    const auto& crop = seq.crops[0];
    const auto inst = mask_from_tensor(read_tensor(m.video(seq.source_video).frames.at(crop.frame_index).instances));
    const auto label = label_box(inst, crop.segment_bbox, gt.videos.at(seq.source_video));
    REQUIRE(label.class_index >= 0);
    CHECK(gt.classes[label.class_index] == "dog");
  }

  const auto table =
      cli({"query", "--work", run.work.string(), "--manifest", run.manifest.string(), "--term", "dog", "--format", "table"});
  CHECK(table.status == 0);
  CHECK(table.out.rfind("rank", 0) == 0);
}

TEST_CASE("query errors are JSON on stderr with a nonzero status") {
  const auto& run = CleanRun::get();
  const auto bad_tau =
      cli({"query", "--work", run.work.string(), "--manifest", run.manifest.string(), "--term", "dog", "--tau", "2.0"});
  CHECK(bad_tau.status != 0);
  CHECK(bad_tau.out.empty());
  const auto err = nlohmann::json::parse(bad_tau.err);
  CHECK(err["error"]["code"] == "invalid_argument");
  CHECK(err["error"]["message"].get<std::string>().find("tau") != std::string::npos);

  const auto unknown = cli({"query", "--work", run.work.string(), "--manifest", run.manifest.string(), "--term", "dgo"});
  CHECK(unknown.status != 0);
  const auto uerr = nlohmann::json::parse(unknown.err);
  CHECK(uerr["error"]["code"] == "unknown_term");
  CHECK(uerr["error"]["suggestions"][0] == "dog");

  const auto both = cli({"query", "--work", run.work.string(), "--term", "dog", "--vector", "1,0"});
  CHECK(both.status != 0);
  const auto missing = cli({"segment", "--manifest", (run.dir.path / "none.json").string(), "--work", "x"});
  CHECK(missing.status != 0);
  CHECK(nlohmann::json::parse(missing.err)["error"]["code"] == "missing_file");
  CHECK(cli({"no-such-command"}).status == 2);
}

TEST_CASE("segment is idempotent") {
  const auto& run = CleanRun::get();
  TempDir d;
  const auto m = load_manifest(run.manifest);
  REQUIRE(cli({"segment", "--manifest", run.manifest.string(), "--work", d.path.string()}).status == 0);
  const std::string first = slurp(WorkDir{d.path}.segments(m.videos[0].id));
  REQUIRE(cli({"segment", "--manifest", run.manifest.string(), "--work", d.path.string()}).status == 0);
  CHECK(slurp(WorkDir{d.path}.segments(m.videos[0].id)) == first);
  CHECK(slurp(WorkDir{run.work}.segments(m.videos[0].id)) == first);
}

TEST_CASE("stages refuse artifacts made with another config") {
  const auto& run = CleanRun::get();
  TempDir d;
  const auto cfg = d.path / "cfg.json";
  auto c = resolve_config(std::nullopt, nullptr);
  c.tracker.max_gap = 1;
  write_json_file(cfg, c.to_json());
  const auto work = d.path / "work";
  REQUIRE(cli({"segment", "--manifest", run.manifest.string(), "--work", work.string()}).status == 0);
  const auto refused =
      cli({"track", "--manifest", run.manifest.string(), "--work", work.string(), "--config", cfg.string()});
  CHECK(refused.status != 0);
  CHECK(nlohmann::json::parse(refused.err)["error"]["code"] == "config_mismatch");
  const auto forced = cli(
      {"track", "--manifest", run.manifest.string(), "--work", work.string(), "--config", cfg.string(), "--force"});
  CHECK(forced.status == 0);
}

TEST_CASE("ingest from an embedding table") {
  const auto& run = CleanRun::get();
  const auto m = load_manifest(run.manifest);
  std::vector<std::vector<float>> rows;
  for (const auto& v : m.videos) {
    for (const auto& s : read_sequences(WorkDir{run.work}.sequences(v.id))) {
      rows.insert(rows.end(), s.embeddings.begin(), s.embeddings.end());
    }
  }
  TempDir d;
  const auto work = d.path / "work";
  fs::create_directories(work);
  for (const char* stage : {"segment", "track"}) {
    REQUIRE(cli({stage, "--manifest", run.manifest.string(), "--work", work.string()}).status == 0);
  }
  write_tensor(d.path / "emb.oodt", rows_to_tensor(rows));
  REQUIRE(cli({"ingest", "--manifest", run.manifest.string(), "--work", work.string(), "--embeddings",
               (d.path / "emb.oodt").string()})
              .status == 0);
  CHECK(slurp(WorkDir{work}.index()) == slurp(WorkDir{run.work}.index()));

  write_tensor(d.path / "short.oodt", rows_to_tensor({rows[0]}));
  const auto r = cli({"ingest", "--manifest", run.manifest.string(), "--work", work.string(), "--embeddings",
                      (d.path / "short.oodt").string()});
  CHECK(r.status != 0);
}

TEST_CASE("train-meta and calibrate write their outputs") {
  TempDir d;
  const auto corpus = d.path / "c";
  REQUIRE(cli({"synth", "--out", corpus.string(), "--preset", "noisy", "--seed", "3", "--videos", "1", "--frames",
               "40"})
              .status == 0);
  const auto manifest = (corpus / "manifest.json").string();
  const auto model = d.path / "meta.json";
  const auto t = cli({"train-meta", "--manifest", manifest, "--out", model.string()});
  REQUIRE(t.status == 0);
  CHECK(fs::exists(model));
  const auto cfg = d.path / "cfg.json";
  const auto c = cli({"calibrate", "--manifest", manifest, "--out", cfg.string(), "--candidates", "-2.0", "-1.5"});
  REQUIRE(c.status == 0);
  const double th = read_json_file(cfg)["anomaly_threshold"];
  CHECK((th == -2.0 || th == -1.5));
}
