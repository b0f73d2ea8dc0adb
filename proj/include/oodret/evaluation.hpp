#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodret/scoring.hpp"

namespace oodret {

// ---- pixel level -----------------------------------------------------------

enum class PixelLabel : std::uint8_t { not_ood = 0, ood = 1, ignore = 255 };

/// Scores and labels of the evaluated pixels, flattened over any number of
/// frames. Ignore-labelled pixels are skipped.
struct PixelEvalInput {
  std::vector<float> scores;
  std::vector<std::uint8_t> labels;

  void append(const AnomalyMap& map, const Grid<std::uint8_t>& labels);
};

/// Step-wise average precision over distinct score thresholds (ties share a
/// step), as a percentage.
double pixel_auprc(const PixelEvalInput& input);

/// FPR at the largest threshold whose TPR reaches 0.95, as a percentage.
double fpr_at_95_tpr(const PixelEvalInput& input);

// ---- component level -------------------------------------------------------

/// Per-frame tallies for the averaged component-wise F1.
struct ComponentCounts {
  std::vector<double> thresholds;
  std::vector<long long> tp, fn, fp;
};

std::vector<double> default_f1_thresholds();

/// Component F1 accumulator. Predicted and ground-truth components are
/// clipped to `roi` before matching; sIoU >= tau and PPV >= tau count as hits.
class ComponentF1 {
 public:
  explicit ComponentF1(std::vector<double> thresholds = default_f1_thresholds());

  void add_frame(const std::vector<std::vector<Pixel>>& predicted, const std::vector<std::vector<Pixel>>& ground_truth,
                 const BinaryMask& roi);

  /// Mean F1 over thresholds as a percentage; 0 with `empty()` set when
  /// neither side has any component.
  double f1_bar() const;
  bool empty() const noexcept { return components_seen_ == 0; }
  const ComponentCounts& counts() const noexcept { return counts_; }

 private:
  ComponentCounts counts_;
  long long components_seen_ = 0;
};

/// Single-frame convenience wrapper.
double component_f1(const std::vector<std::vector<Pixel>>& predicted,
                    const std::vector<std::vector<Pixel>>& ground_truth, const BinaryMask& roi,
                    const std::vector<double>& thresholds = default_f1_thresholds());

// ---- tracking --------------------------------------------------------------

struct TrackedObject {
  int object_id = 0;
  double row = 0.0;
  double col = 0.0;
};

/// Objects present in one frame.
struct FrameObjects {
  int frame_index = 0;
  std::vector<TrackedObject> objects;
};

struct ClearMotResult {
  double mota = 1.0;
  double motp = 0.0;  // mean matched centroid distance, pixels
  long long ground_truth = 0;
  long long matches = 0;
  long long misses = 0;
  long long false_positives = 0;
  long long id_switches = 0;
};

/// CLEAR-MOT over frame-aligned sequences (same frame indices, same order).
ClearMotResult clear_mot(const std::vector<FrameObjects>& predicted, const std::vector<FrameObjects>& ground_truth,
                         double match_radius);

// ---- retrieval -------------------------------------------------------------

struct RetrievalInstance {
  double score = 0.0;
  bool relevant = false;
  /// Ground-truth object the instance depicts; relevant instances with the
  /// same key count once toward recall. -1 means "use the instance itself".
  std::int64_t gt_key = -1;
};

struct QueryEvalInput {
  std::string query;
  std::vector<RetrievalInstance> instances;
  std::size_t num_relevant = 0;  // recall denominator
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
};

struct QueryCurve {
  std::string query;
  std::vector<PrPoint> points;  // descending threshold, first point retrieves nothing
  double auprc = 0.0;           // percentage
  bool undefined_recall = false;
};

struct RetrievalEval {
  std::vector<QueryCurve> per_query;
  std::vector<PrPoint> mean_curve;
  double auprc = 0.0;             // area under the mean curve, percentage
  double pooled_auprc = 0.0;      // all queries' instances pooled into one curve
  double mean_query_auprc = 0.0;  // mean of per-query areas
};

/// Precision/recall at threshold tau: instances with score >= tau retrieved.
PrPoint pr_at(const QueryEvalInput& input, double tau);

QueryCurve query_curve(const QueryEvalInput& input);

/// Step-wise area sum_n (R_n - R_{n-1}) P_n of a descending-threshold curve.
double step_area(const std::vector<PrPoint>& points);

RetrievalEval retrieval_pr(const std::vector<QueryEvalInput>& queries);

// ---- report ----------------------------------------------------------------

struct EvalReport {
  double auprc = 0.0;
  double fpr95 = 0.0;
  double f1_bar = 0.0;
  double mota = 0.0;
  double motp = 0.0;
  ClearMotResult tracking;
  RetrievalEval retrieval;
  nlohmann::json config;
  nlohmann::json notes = nlohmann::json::object();
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);

/// "query,threshold,precision,recall" rows for every per-query curve and the
/// mean curve (query "__mean__").
std::string curves_csv(const RetrievalEval& eval);

}  // namespace oodret
