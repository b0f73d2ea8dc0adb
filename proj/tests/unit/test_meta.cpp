#include <doctest.h>

#include <cmath>
#include <random>

#include "oodret/meta_classifier.hpp"

using namespace oodret;

namespace {

SegmentInstance block_segment(const AnomalyMap& map, int top, int left, int h, int w) {
  BinaryMask m(map.height(), map.width());
  for (int r = top; r < top + h; ++r) {
    for (int c = left; c < left + w; ++c) m(r, c) = 1;
  }
  return extract_components(m, map, 0, Connectivity::eight).at(0);
}

}  // namespace

TEST_CASE("features of a single pixel") {
  AnomalyMap map(100, 100, -2.0f);
  map(50, 50) = -0.3f;
  const auto f = compute_features(block_segment(map, 50, 50, 1, 1), map);
  CHECK(f.area == 1.0);
  CHECK(f.centroid_x_norm == doctest::Approx(0.505));
  CHECK(f.centroid_y_norm == doctest::Approx(0.505));
  CHECK(f.fill_ratio == 1.0);
  CHECK(f.boundary_interior_ratio == 1.0);
}

TEST_CASE("features of uniform and graded blocks") {
  AnomalyMap map(10, 10, -0.5f);
  const auto uniform = compute_features(block_segment(map, 2, 2, 3, 3), map);
  CHECK(uniform.std_score == 0.0);
  CHECK(uniform.boundary_interior_ratio == doctest::Approx(1.0));
  CHECK(uniform.bbox_aspect == doctest::Approx(1.0));

  for (int r = 2; r < 5; ++r) {
    for (int c = 2; c < 5; ++c) map(r, c) = -1.0f;
  }
  map(3, 3) = -0.1f;
  const auto graded = compute_features(block_segment(map, 2, 2, 3, 3), map);
  CHECK(graded.boundary_interior_ratio == doctest::Approx(10.0));
  CHECK(graded.min_score == doctest::Approx(-1.0));
  CHECK(graded.max_score == doctest::Approx(-0.1));
  for (double v : graded.as_array()) CHECK(std::isfinite(v));
}

TEST_CASE("separable one-dimensional data is fitted exactly") {
  std::vector<std::vector<double>> x;
  std::vector<SegmentLabel> y;
  for (int i = 0; i < 50; ++i) {
    x.push_back({1.0});
    y.push_back(SegmentLabel::true_positive);
    x.push_back({-1.0});
    y.push_back(SegmentLabel::false_positive);
  }
  const auto model = train_meta(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK((model.predict(x[i]) >= 0.5) == (y[i] == SegmentLabel::true_positive));
}

TEST_CASE("random labels give roughly the majority rate") {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::bernoulli_distribution label(0.7);
    auto draw = [&](int n, std::vector<std::vector<double>>& x, std::vector<SegmentLabel>& y) {
      for (int i = 0; i < n; ++i) {
        x.push_back({g(rng), g(rng), g(rng)});
        y.push_back(label(rng) ? SegmentLabel::true_positive : SegmentLabel::false_positive);
      }
    };
    std::vector<std::vector<double>> xt, xh;
    std::vector<SegmentLabel> yt, yh;
    draw(400, xt, yt);
    draw(400, xh, yh);
    const auto model = train_meta(xt, yt);
    int correct = 0, majority = 0;
    for (std::size_t i = 0; i < xh.size(); ++i) {
      correct += (model.predict(xh[i]) >= 0.5) == (yh[i] == SegmentLabel::true_positive);
      majority += yh[i] == SegmentLabel::true_positive;
    }
    CHECK(std::abs(correct - majority) / 400.0 <= 0.10);
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> x(40, std::vector<double>(4));
  std::vector<double> y(40);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (auto& v : x[i]) v = g(rng);
    y[i] = i % 3 == 0 ? 1.0 : 0.0;
  }
  for (int trial = 0; trial < 2; ++trial) {
    std::vector<double> params(5, 0.0);
    if (trial == 1) {
      for (auto& v : params) v = 0.3 * g(rng);
    }
    const auto grad = meta_gradient(x, y, params, 1e-3);
    if (trial == 0) {
      // At zero weights the data term is mean((0.5 - y) x).
      for (std::size_t j = 0; j < 4; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) m += (0.5 - y[i]) * x[i][j];
        CHECK(grad[j] == doctest::Approx(m / x.size()).epsilon(1e-9));
      }
    }
    for (std::size_t j = 0; j < params.size(); ++j) {
      const double h = 1e-6;
      auto up = params, down = params;
      up[j] += h;
      down[j] -= h;
      const double fd = (meta_objective(x, y, up, 1e-3) - meta_objective(x, y, down, 1e-3)) / (2 * h);
      CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
    }
  }
}

TEST_CASE("training needs both classes and aligned inputs") {
  std::vector<std::vector<double>> x{{1.0}, {2.0}};
  CHECK_THROWS_AS(train_meta(x, {SegmentLabel::true_positive, SegmentLabel::true_positive}), Error);
  CHECK_THROWS_AS(train_meta(x, {SegmentLabel::true_positive}), Error);
}

TEST_CASE("zero-variance features get unit std and zero weight") {
  std::vector<std::vector<double>> x;
  std::vector<SegmentLabel> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back({3.0, i < 10 ? -1.0 : 1.0});
    y.push_back(i < 10 ? SegmentLabel::false_positive : SegmentLabel::true_positive);
  }
  const auto m = train_meta(x, y);
  CHECK(m.feature_stds[0] == 1.0);
  CHECK(m.weights[0] == 0.0);
}

TEST_CASE("filter cutoffs and JSON round trip") {
  AnomalyMap map(20, 20, -3.0f);
  std::vector<SegmentInstance> segs;
  for (int i = 0; i < 4; ++i) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 2 + i; ++c) map(4 * i + r, c) = -0.2f * (i + 1);
    }
  }
  BinaryMask mask = threshold_anomaly(map, -1.0);
  segs = extract_components(mask, map, 0, Connectivity::eight);
  REQUIRE(segs.size() == 4);
  std::vector<SegmentFeatures> feats;
  std::vector<SegmentLabel> labels;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    feats.push_back(compute_features(segs[i], map));
    labels.push_back(i < 2 ? SegmentLabel::true_positive : SegmentLabel::false_positive);
  }
  MetaModel m = train_meta(feats, labels);
  m.cutoff = 0.0;
  CHECK(filter_segments(segs, map, m).size() == 4);
  m.cutoff = 1.0;
  CHECK(filter_segments(segs, map, m).size() <= 1);
  m.cutoff = 0.5;
  const auto kept = filter_segments(segs, map, m);
  CHECK(kept.size() == 2);

  const MetaModel back = meta_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.feature_means == m.feature_means);
  CHECK(back.cutoff == m.cutoff);
  CHECK_THROWS_AS(meta_model_from_json(nlohmann::json{{"bias", 1}}), Error);
}

TEST_CASE("segment labels use a strict majority of OoD pixels") {
  AnomalyMap map(4, 4, -0.1f);
  const auto seg = block_segment(map, 0, 0, 2, 2);
  BinaryMask gt(4, 4);
  gt(0, 0) = gt(0, 1) = 1;
  CHECK(label_segment(seg, gt) == SegmentLabel::false_positive);
  gt(1, 0) = 1;
  CHECK(label_segment(seg, gt) == SegmentLabel::true_positive);
}
