#include "oodret/meta_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oodret {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

constexpr double kNearZero = 1e-12;
constexpr double kRatioCap = 1e6;

}  // namespace

std::array<double, SegmentFeatures::kCount> SegmentFeatures::as_array() const noexcept {
  return {area,        mean_score,      std_score,   min_score,               max_score,
          centroid_x_norm, centroid_y_norm, bbox_aspect, boundary_interior_ratio, fill_ratio};
}

const std::array<std::string_view, SegmentFeatures::kCount>& SegmentFeatures::names() noexcept {
  static const std::array<std::string_view, kCount> kNames = {
      "area",        "mean_score",      "std_score",   "min_score",               "max_score",
      "centroid_x_norm", "centroid_y_norm", "bbox_aspect", "boundary_interior_ratio", "fill_ratio"};
  return kNames;
}

SegmentFeatures compute_features(const SegmentInstance& seg, const AnomalyMap& map) {
  if (seg.pixels.empty()) throw Error(Errc::invalid_argument, "segment has no pixels");
  for (const auto& px : seg.pixels) {
    if (!map.contains(px.row, px.col)) {
      throw Error(Errc::out_of_bounds, "segment pixel (" + std::to_string(px.row) + "," +
                                           std::to_string(px.col) + ") outside the anomaly map");
    }
  }
  // Membership lookup local to the bbox.
  const BBox& box = seg.bbox;
  Grid<std::uint8_t> inside(box.height(), box.width());
  for (const auto& px : seg.pixels) inside(px.row - box.top, px.col - box.left) = 1;
  auto member = [&](int r, int c) {
    return box.contains(r, c) && inside(r - box.top, c - box.left) != 0;
  };

  double boundary_sum = 0.0, interior_sum = 0.0;
  std::size_t boundary_n = 0, interior_n = 0;
  for (const auto& px : seg.pixels) {
    const bool interior = member(px.row - 1, px.col) && member(px.row + 1, px.col) &&
                          member(px.row, px.col - 1) && member(px.row, px.col + 1);
    const double v = map(px.row, px.col);
    if (interior) {
      interior_sum += v;
      ++interior_n;
    } else {
      boundary_sum += v;
      ++boundary_n;
    }
  }

  SegmentFeatures f;
  f.area = static_cast<double>(seg.area);
  f.mean_score = seg.mean_score;
  f.std_score = seg.std_score;
  f.min_score = seg.min_score;
  f.max_score = seg.max_score;
  f.centroid_x_norm = (seg.centroid_col + 0.5) / map.width();
  f.centroid_y_norm = (seg.centroid_row + 0.5) / map.height();
  f.bbox_aspect = static_cast<double>(box.width()) / box.height();
  f.fill_ratio = f.area / static_cast<double>(box.area());
  if (interior_n == 0) {
    f.boundary_interior_ratio = 1.0;
  } else {
    const double interior_mean = interior_sum / static_cast<double>(interior_n);
    const double boundary_mean = boundary_sum / static_cast<double>(boundary_n);
    if (std::abs(interior_mean) < kNearZero) {
      f.boundary_interior_ratio = std::abs(boundary_mean) < kNearZero ? 1.0 : kRatioCap;
    } else {
      f.boundary_interior_ratio = std::min(kRatioCap, std::abs(boundary_mean / interior_mean));
    }
  }
  return f;
}

double MetaModel::predict(const std::vector<double>& features) const {
  if (features.size() != weights.size()) {
    throw Error(Errc::dimension_mismatch, "meta model expects " + std::to_string(weights.size()) +
                                              " features, got " + std::to_string(features.size()));
  }
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    z += weights[j] * (features[j] - feature_means[j]) / feature_stds[j];
  }
  return sigmoid(z);
}

double MetaModel::predict(const SegmentFeatures& features) const {
  const auto a = features.as_array();
  return predict(std::vector<double>(a.begin(), a.end()));
}

void MetaModel::validate() const {
  const std::size_t d = weights.size();
  if (feature_means.size() != d || feature_stds.size() != d) {
    throw Error(Errc::dimension_mismatch, "meta model weight/standardization dimensions disagree");
  }
  if (!feature_names.empty() && feature_names.size() != d) {
    throw Error(Errc::dimension_mismatch, "meta model feature-name list has the wrong length");
  }
  for (double s : feature_stds) {
    if (!(s > 0.0)) throw Error(Errc::invalid_argument, "meta model standard deviations must be > 0");
  }
  if (!(cutoff >= 0.0 && cutoff <= 1.0)) throw Error(Errc::invalid_argument, "meta cutoff must lie in [0,1]");
}

double meta_objective(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                      const std::vector<double>& params, double l2) {
  const std::size_t d = params.size() - 1;
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = params[d];
    for (std::size_t j = 0; j < d; ++j) z += params[j] * x[i][j];
    // -[y log s(z) + (1-y) log(1-s(z))] = log(1+e^z) - y z
    loss += log1p_exp(z) - y[i] * z;
  }
  loss /= static_cast<double>(x.size());
  double reg = 0.0;
  for (std::size_t j = 0; j < d; ++j) reg += params[j] * params[j];
  return loss + 0.5 * l2 * reg;
}

std::vector<double> meta_gradient(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                  const std::vector<double>& params, double l2) {
  const std::size_t d = params.size() - 1;
  std::vector<double> grad(d + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = params[d];
    for (std::size_t j = 0; j < d; ++j) z += params[j] * x[i][j];
    const double r = sigmoid(z) - y[i];
    for (std::size_t j = 0; j < d; ++j) grad[j] += r * x[i][j];
    grad[d] += r;
  }
  const auto n = static_cast<double>(x.size());
  for (auto& g : grad) g /= n;
  for (std::size_t j = 0; j < d; ++j) grad[j] += l2 * params[j];
  return grad;
}

MetaModel train_meta(const std::vector<std::vector<double>>& features, const std::vector<SegmentLabel>& labels,
                     const MetaTrainOptions& options) {
  if (features.size() != labels.size()) {
    throw Error(Errc::shape_mismatch, "feature and label counts differ");
  }
  const bool has_tp = std::find(labels.begin(), labels.end(), SegmentLabel::true_positive) != labels.end();
  const bool has_fp = std::find(labels.begin(), labels.end(), SegmentLabel::false_positive) != labels.end();
  if (!has_tp || !has_fp) {
    throw Error(Errc::single_class, std::string("meta training set has no ") +
                                        (has_tp ? "false-positive" : "true-positive") + " examples");
  }
  const std::size_t n = features.size();
  const std::size_t d = features.front().size();
  for (const auto& row : features) {
    if (row.size() != d) throw Error(Errc::dimension_mismatch, "ragged meta feature matrix");
  }

  MetaModel model;
  model.feature_means.assign(d, 0.0);
  model.feature_stds.assign(d, 1.0);
  std::vector<bool> constant(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& row : features) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& row : features) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    model.feature_means[j] = mean;
    const double sd = std::sqrt(var);
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      model.feature_stds[j] = sd;
    } else {
      constant[j] = true;
    }
  }

  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x[i][j] = constant[j] ? 0.0 : (features[i][j] - model.feature_means[j]) / model.feature_stds[j];
    }
    y[i] = labels[i] == SegmentLabel::true_positive ? 1.0 : 0.0;
  }

  std::vector<double> params(d + 1, 0.0);
  for (int it = 0; it < options.max_iterations; ++it) {
    const auto grad = meta_gradient(x, y, params, options.l2);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    if (std::sqrt(norm) < options.gradient_tolerance) break;
    for (std::size_t j = 0; j <= d; ++j) params[j] -= options.learning_rate * grad[j];
  }

  model.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
  for (std::size_t j = 0; j < d; ++j) {
    if (constant[j]) model.weights[j] = 0.0;
  }
  model.bias = params[d];
  model.cutoff = 0.5;
  return model;
}

MetaModel train_meta(const std::vector<SegmentFeatures>& features, const std::vector<SegmentLabel>& labels,
                     const MetaTrainOptions& options) {
  std::vector<std::vector<double>> rows;
  rows.reserve(features.size());
  for (const auto& f : features) {
    const auto a = f.as_array();
    rows.emplace_back(a.begin(), a.end());
  }
  MetaModel model = train_meta(rows, labels, options);
  for (auto name : SegmentFeatures::names()) model.feature_names.emplace_back(name);
  return model;
}

std::vector<SegmentInstance> filter_segments(const std::vector<SegmentInstance>& segs, const AnomalyMap& map,
                                             const MetaModel& model) {
  model.validate();
  if (model.weights.size() != SegmentFeatures::kCount) {
    throw Error(Errc::dimension_mismatch, "meta model has " + std::to_string(model.weights.size()) +
                                              " weights, segment features have " +
                                              std::to_string(SegmentFeatures::kCount));
  }
  std::vector<SegmentInstance> kept;
  for (const auto& seg : segs) {
    if (model.predict(compute_features(seg, map)) >= model.cutoff) kept.push_back(seg);
  }
  return kept;
}

SegmentLabel label_segment(const SegmentInstance& seg, const BinaryMask& gt_ood) {
  std::size_t hits = 0;
  for (const auto& px : seg.pixels) {
    if (gt_ood.contains(px.row, px.col) && gt_ood(px.row, px.col)) ++hits;
  }
  return 2 * hits > seg.pixels.size() ? SegmentLabel::true_positive : SegmentLabel::false_positive;
}

nlohmann::json to_json(const MetaModel& model) {
  return {{"weights", model.weights},           {"bias", model.bias},
          {"feature_means", model.feature_means}, {"feature_stds", model.feature_stds},
          {"cutoff", model.cutoff},             {"feature_names", model.feature_names}};
}

MetaModel meta_model_from_json(const nlohmann::json& doc) {
  MetaModel model;
  try {
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<double>();
    model.feature_means = doc.at("feature_means").get<std::vector<double>>();
    model.feature_stds = doc.at("feature_stds").get<std::vector<double>>();
    model.cutoff = doc.value("cutoff", 0.5);
    model.feature_names = doc.value("feature_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("meta model JSON: ") + e.what());
  }
  model.validate();
  if (!model.feature_names.empty()) {
    const auto& expected = SegmentFeatures::names();
    if (model.feature_names.size() == expected.size()) {
      for (std::size_t j = 0; j < expected.size(); ++j) {
        if (model.feature_names[j] != expected[j]) {
          throw Error(Errc::dimension_mismatch, "meta model feature '" + model.feature_names[j] +
                                                    "' does not match '" + std::string(expected[j]) + "'");
        }
      }
    }
  }
  return model;
}

}  // namespace oodret
