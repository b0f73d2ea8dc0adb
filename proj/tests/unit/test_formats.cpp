#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "oodret/bitmap.hpp"
#include "oodret/manifest.hpp"
#include "oodret/rle.hpp"
#include "oodret/tensor_io.hpp"
#include "test_util.hpp"

using namespace oodret;

namespace {

std::string bytes_of(const Tensor& t) {
  std::ostringstream out;
  write_tensor(out, t);
  return out.str();
}

Errc read_error(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_tensor(in);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::invalid_argument;  // no error at all
}

}  // namespace

TEST_CASE("tensor round trips are bit-exact") {
  const Tensor t = Tensor::from_f32({2, 2}, {1.5f, -0.0f, 3.25e-30f, 7.0f});
  std::istringstream in(bytes_of(t));
  const Tensor back = read_tensor(in);
  CHECK(back == t);
  CHECK(std::signbit(back.f32[1]));
  CHECK(bytes_of(back) == bytes_of(t));

  std::mt19937_64 rng(5);
  std::vector<std::uint8_t> u(3 * 4 * 5);
  for (auto& v : u) v = static_cast<std::uint8_t>(rng());
  const Tensor t8 = Tensor::from_u8({3, 4, 5}, u);
  std::istringstream in8(bytes_of(t8));
  CHECK(read_tensor(in8) == t8);
}

TEST_CASE("tensor header layout") {
  const std::string b = bytes_of(Tensor::from_u8({1, 2}, {7, 9}));
  CHECK(b.substr(0, 4) == "OODT");
  CHECK(b[4] == 1);
  CHECK(b[5] == 2);
  CHECK(b[6] == 2);
  CHECK(b.size() == 4 + 3 + 8 + 2);
  CHECK(static_cast<unsigned char>(b[7]) == 1);  // little-endian dims
  CHECK(static_cast<unsigned char>(b[11]) == 2);
}

TEST_CASE("corrupt tensors are rejected with distinct errors") {
  const std::string good = bytes_of(Tensor::from_f32({4, 4}, std::vector<float>(16, 1.0f)));
  std::string bad = good;
  std::memcpy(bad.data(), "XXXX", 4);
  CHECK(read_error(bad) == Errc::bad_magic);
  bad = good;
  bad[4] = 2;
  CHECK(read_error(bad) == Errc::bad_version);
  bad = good;
  bad[5] = 9;
  CHECK(read_error(bad) == Errc::bad_dtype);
  CHECK(read_error(good.substr(0, good.size() - 4)) == Errc::truncated);  // 15 values
  CHECK(read_error(good.substr(0, 9)) == Errc::truncated);
  CHECK(read_error("") == Errc::truncated);

  TempDir dir;
  const auto path = dir.path / "t.oodt";
  {
    std::ofstream out(path, std::ios::binary);
    out << good << "zz";
  }
  CHECK_THROWS_AS(read_tensor(path), Error);
  CHECK_THROWS_AS(read_tensor(dir.path / "missing.oodt"), Error);
}

TEST_CASE("typed tensor helpers check shapes") {
  BinaryMask m(3, 2);
  m(1, 1) = 1;
  CHECK(mask_from_tensor(mask_to_tensor(m)) == m);
  FrameScoreTensor q(2, 3, 4);
  q.at(1, 2, 3) = 0.5f;
  CHECK(scores_from_tensor(scores_to_tensor(q)) == q);
  CHECK_THROWS_AS(mask_from_tensor(Tensor::from_f32({2, 2}, std::vector<float>(4))), Error);
  CHECK_THROWS_AS(scores_from_tensor(Tensor::from_f32({2, 2}, std::vector<float>(4))), Error);
}

TEST_CASE("run-length encoding round trip") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask m(7, 9);
    for (auto& v : m.values()) v = rng() % 3 == 0;
    const auto runs = encode_mask(m);
    CHECK(decode_mask(runs, 7, 9) == m);
    CHECK(runs_from_json(runs_to_json(runs)) == runs);
  }
  SegmentInstance s;
  s.pixels = {{1, 1}, {1, 2}, {2, 2}};
  s.bbox = {1, 1, 2, 2};
  s.area = 3;
  s.mean_score = -0.25;
  const auto back = segment_from_json(to_json(s));
  CHECK(back.pixels == s.pixels);
  CHECK(back.bbox == s.bbox);
  CHECK(back.mean_score == s.mean_score);
}

TEST_CASE("sequence record JSON round trip") {
  SequenceRecord r;
  r.sequence_id = "v-t0003";
  r.source_video = "v";
  r.track_id = 3;
  CropRef c;
  c.frame_index = 4;
  c.bbox = {1, 2, 3, 4};
  c.segment_bbox = {2, 2, 3, 3};
  c.centroid_row = 2.5;
  c.image = "crop_000.bmp";
  r.crops = {c};
  r.embeddings = {{0.1f, 0.2f}};
  const auto back = sequence_from_json(nlohmann::json::parse(to_json(r, true).dump()));
  CHECK(back.sequence_id == r.sequence_id);
  CHECK(back.crops[0].bbox == c.bbox);
  CHECK(back.crops[0].segment_bbox == c.segment_bbox);
  CHECK(back.crops[0].image == c.image);
  CHECK(back.embeddings == r.embeddings);
  CHECK(sequence_from_json(to_json(r, false)).embeddings.empty());
}

TEST_CASE("bitmap encode and decode") {
  RgbImage img(3, 5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 7);
  const std::string bmp = encode_bmp(img);
  CHECK(bmp.substr(0, 2) == "BM");
  CHECK(bmp.size() == 54 + 3 * 16);
  const auto back = decode_bmp(bmp);
  CHECK(back.pixels == img.pixels);
  const auto crop = crop_image(img, {1, 1, 2, 3});
  CHECK(crop.height == 2);
  CHECK(crop.width == 3);
  CHECK(crop.at(0, 0)[0] == img.at(1, 1)[0]);
  CHECK_THROWS_AS(crop_image(img, {0, 0, 3, 0}), Error);
  CHECK_THROWS_AS(decode_bmp("BMxx"), Error);
}

TEST_CASE("minimal manifest") {
  TempDir dir;
  FrameScoreTensor q(2, 2, 3);
  write_tensor(dir.path / "f0.oodt", scores_to_tensor(q));
  write_tensor(dir.path / "f1.oodt", scores_to_tensor(q));
  write_tensor(dir.path / "road.oodt", mask_to_tensor(BinaryMask(2, 2, 1)));
  nlohmann::json doc = {
      {"classes", {{"names", {"road", "sidewalk", "sky"}}, {"road_index", 0}}},
      {"videos",
       {{{"id", "v0"}, {"height", 2}, {"width", 2}, {"frames", {{{"index", 0}, {"scores", "f0.oodt"}}}}}}}};
  write_json_file(dir.path / "manifest.json", doc);

  const auto m = load_manifest(dir.path / "manifest.json");
  CHECK(m.videos.size() == 1);
  CHECK(m.num_classes() == 3);
  CHECK(m.videos[0].frames[0].scores == dir.path / "f0.oodt");

  SUBCASE("save and reload") {
    save_manifest(m, dir.path / "copy.json");
    const auto again = load_manifest(dir.path / "copy.json");
    CHECK(again.to_json() == m.to_json());
    CHECK(read_json_file(dir.path / "copy.json")["videos"][0]["frames"][0]["scores"] == "f0.oodt");
  }
  SUBCASE("missing file names the path") {
    doc["videos"][0]["frames"][0]["road_gt"] = "nope.oodt";
    try {
      manifest_from_json(doc, dir.path);
      FAIL("expected missing_file");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_file);
      CHECK(std::string(e.what()).find("nope.oodt") != std::string::npos);
    }
  }
  SUBCASE("frames must be contiguous") {
    doc["videos"][0]["frames"] = {{{"index", 0}, {"scores", "f0.oodt"}},
                                  {{"index", 1}, {"scores", "f1.oodt"}},
                                  {{"index", 3}, {"scores", "f1.oodt"}}};
    try {
      manifest_from_json(doc, dir.path);
      FAIL("expected frame_gap");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::frame_gap);
      const std::string msg = e.what();
      CHECK(msg.find("v0") != std::string::npos);
      CHECK(msg.find("frame 1 is followed by frame 3") != std::string::npos);
    }
  }
  SUBCASE("class count must match the tensors") {
    doc["classes"]["names"] = {"road", "sky"};
    CHECK_THROWS_WITH_AS(manifest_from_json(doc, dir.path), doctest::Contains("class"), Error);
  }
  SUBCASE("plane shapes are checked") {
    write_tensor(dir.path / "bad.oodt", mask_to_tensor(BinaryMask(3, 2, 1)));
    doc["videos"][0]["frames"][0]["road_gt"] = "bad.oodt";
    CHECK_THROWS_AS(manifest_from_json(doc, dir.path), Error);
    doc["videos"][0]["frames"][0]["road_gt"] = "road.oodt";
    CHECK_NOTHROW(manifest_from_json(doc, dir.path));
  }
  SUBCASE("frames need scores or mask predictions") {
    doc["videos"][0]["frames"][0].erase("scores");
    CHECK_THROWS_AS(manifest_from_json(doc, dir.path), Error);
  }
}
