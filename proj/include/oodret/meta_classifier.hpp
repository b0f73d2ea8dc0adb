#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "oodret/scoring.hpp"

namespace oodret {

/// Hand-crafted per-segment features fed to the false-positive classifier.
struct SegmentFeatures {
  static constexpr std::size_t kCount = 10;

  double area = 0.0;
  double mean_score = 0.0;
  double std_score = 0.0;
  double min_score = 0.0;
  double max_score = 0.0;
  double centroid_x_norm = 0.0;
  double centroid_y_norm = 0.0;
  double bbox_aspect = 0.0;
  double boundary_interior_ratio = 1.0;
  double fill_ratio = 0.0;

  std::array<double, kCount> as_array() const noexcept;
  static const std::array<std::string_view, kCount>& names() noexcept;
};

SegmentFeatures compute_features(const SegmentInstance& seg, const AnomalyMap& map);

enum class SegmentLabel { false_positive = 0, true_positive = 1 };

struct MetaModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_means;
  std::vector<double> feature_stds;
  double cutoff = 0.5;
  std::vector<std::string> feature_names;

  /// Probability that the feature vector belongs to a true positive.
  double predict(const std::vector<double>& features) const;
  double predict(const SegmentFeatures& features) const;

  void validate() const;
};

struct MetaTrainOptions {
  double l2 = 1e-3;
  double learning_rate = 0.1;
  int max_iterations = 2000;
  double gradient_tolerance = 1e-6;
};

/// L2-regularized logistic regression on standardized features, fitted by
/// full-batch gradient descent.
MetaModel train_meta(const std::vector<std::vector<double>>& features,
                     const std::vector<SegmentLabel>& labels, const MetaTrainOptions& options = {});
MetaModel train_meta(const std::vector<SegmentFeatures>& features, const std::vector<SegmentLabel>& labels,
                     const MetaTrainOptions& options = {});

/// Objective and its gradient in the standardized space; exposed so the
/// analytic gradient can be checked against finite differences.
/// Layout of `params` and the returned gradient: weights..., bias.
double meta_objective(const std::vector<std::vector<double>>& standardized, const std::vector<double>& targets,
                      const std::vector<double>& params, double l2);
std::vector<double> meta_gradient(const std::vector<std::vector<double>>& standardized,
                                  const std::vector<double>& targets, const std::vector<double>& params,
                                  double l2);

/// Segments whose TP probability reaches the model cutoff, input order kept.
std::vector<SegmentInstance> filter_segments(const std::vector<SegmentInstance>& segs, const AnomalyMap& map,
                                             const MetaModel& model);

/// TP iff more than half of the segment's pixels are ground-truth OoD.
SegmentLabel label_segment(const SegmentInstance& seg, const BinaryMask& gt_ood);

nlohmann::json to_json(const MetaModel& model);
MetaModel meta_model_from_json(const nlohmann::json& doc);

}  // namespace oodret
