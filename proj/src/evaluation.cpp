#include "oodret/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace oodret {

using nlohmann::json;

// ---- pixel level -----------------------------------------------------------

void PixelEvalInput::append(const AnomalyMap& map, const Grid<std::uint8_t>& gt) {
  if (!map.same_shape(gt)) throw Error(Errc::shape_mismatch, "anomaly map and labels differ in shape");
  const auto s = map.values();
  const auto l = gt.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] == static_cast<std::uint8_t>(PixelLabel::ignore)) continue;
    scores.push_back(s[i]);
    labels.push_back(l[i] ? 1 : 0);
  }
}

namespace {

struct Sorted {
  std::vector<std::pair<float, std::uint8_t>> items;  // descending score
  long long positives = 0;
  long long negatives = 0;
};

Sorted sort_pixels(const PixelEvalInput& input) {
  if (input.scores.size() != input.labels.size()) {
    throw Error(Errc::shape_mismatch, "pixel scores and labels differ in length");
  }
  Sorted out;
  out.items.reserve(input.scores.size());
  for (std::size_t i = 0; i < input.scores.size(); ++i) {
    if (input.labels[i] == static_cast<std::uint8_t>(PixelLabel::ignore)) continue;
    const std::uint8_t positive = input.labels[i] ? 1 : 0;
    out.items.emplace_back(input.scores[i], positive);
    positive ? ++out.positives : ++out.negatives;
  }
  if (out.positives == 0 || out.negatives == 0) {
    throw Error(Errc::single_class, std::string("pixel evaluation needs both classes; no ") +
                                        (out.positives == 0 ? "OoD" : "non-OoD") + " pixels present");
  }
  std::sort(out.items.begin(), out.items.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  return out;
}

}  // namespace

double pixel_auprc(const PixelEvalInput& input) {
  const Sorted s = sort_pixels(input);
  long long tp = 0, fp = 0;
  double prev_recall = 0.0, area = 0.0;
  std::size_t i = 0;
  while (i < s.items.size()) {
    const float score = s.items[i].first;
    while (i < s.items.size() && s.items[i].first == score) {
      s.items[i].second ? ++tp : ++fp;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(s.positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return 100.0 * area;
}

double fpr_at_95_tpr(const PixelEvalInput& input) {
  const Sorted s = sort_pixels(input);
  long long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < s.items.size()) {
    const float score = s.items[i].first;
    while (i < s.items.size() && s.items[i].first == score) {
      s.items[i].second ? ++tp : ++fp;
      ++i;
    }
    if (tp * 100 >= 95 * s.positives) return 100.0 * static_cast<double>(fp) / static_cast<double>(s.negatives);
  }
  return 100.0;  // unreachable: the last group admits every pixel
}

// ---- component level -------------------------------------------------------

std::vector<double> default_f1_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 10; ++i) t.push_back((25 + 5 * i) / 100.0);
  return t;
}

ComponentF1::ComponentF1(std::vector<double> thresholds) {
  counts_.thresholds = std::move(thresholds);
  const std::size_t n = counts_.thresholds.size();
  counts_.tp.assign(n, 0);
  counts_.fn.assign(n, 0);
  counts_.fp.assign(n, 0);
}

void ComponentF1::add_frame(const std::vector<std::vector<Pixel>>& predicted,
                            const std::vector<std::vector<Pixel>>& ground_truth, const BinaryMask& roi) {
  auto clip = [&](const std::vector<std::vector<Pixel>>& comps) {
    std::vector<std::vector<Pixel>> out;
    for (const auto& comp : comps) {
      std::vector<Pixel> kept;
      for (const auto& px : comp) {
        if (roi.contains(px.row, px.col) && roi(px.row, px.col)) kept.push_back(px);
      }
      if (!kept.empty()) out.push_back(std::move(kept));
    }
    return out;
  };
  const auto pred = clip(predicted);
  const auto gt = clip(ground_truth);
  components_seen_ += static_cast<long long>(pred.size() + gt.size());

  Grid<int> gt_label(roi.height(), roi.width(), -1);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    for (const auto& px : gt[k]) gt_label(px.row, px.col) = static_cast<int>(k);
  }
  // Per predicted component: pixels on no GT component, and overlap per GT id.
  std::vector<long long> free_pixels(pred.size(), 0), on_gt(pred.size(), 0);
  std::map<std::pair<std::size_t, int>, long long> overlap;
  std::vector<std::set<std::size_t>> touching(gt.size());
  std::vector<long long> gt_hit(gt.size(), 0);
  BinaryMask pred_any(roi.height(), roi.width());
  for (std::size_t l = 0; l < pred.size(); ++l) {
    for (const auto& px : pred[l]) {
      const int k = gt_label(px.row, px.col);
      if (k < 0) {
        ++free_pixels[l];
      } else {
        ++on_gt[l];
        ++overlap[{l, k}];
        touching[static_cast<std::size_t>(k)].insert(l);
      }
      pred_any(px.row, px.col) = 1;
    }
  }
  for (std::size_t k = 0; k < gt.size(); ++k) {
    for (const auto& px : gt[k]) gt_hit[k] += pred_any(px.row, px.col) ? 1 : 0;
  }

  std::vector<double> siou(gt.size(), 0.0);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    long long pred_outside_others = 0;  // |K^(k) \ A(k)|
    for (std::size_t l : touching[k]) pred_outside_others += free_pixels[l] + overlap[{l, static_cast<int>(k)}];
    const long long inter = gt_hit[k];
    const long long uni = static_cast<long long>(gt[k].size()) + pred_outside_others - inter;
    siou[k] = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  }
  std::vector<double> ppv(pred.size(), 0.0);
  for (std::size_t l = 0; l < pred.size(); ++l) {
    ppv[l] = static_cast<double>(on_gt[l]) / static_cast<double>(pred[l].size());
  }

  for (std::size_t t = 0; t < counts_.thresholds.size(); ++t) {
    const double tau = counts_.thresholds[t];
    for (double v : siou) v >= tau ? ++counts_.tp[t] : ++counts_.fn[t];
    for (double v : ppv) {
      if (v < tau) ++counts_.fp[t];
    }
  }
}

double ComponentF1::f1_bar() const {
  if (empty() || counts_.thresholds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < counts_.thresholds.size(); ++t) {
    const long long denom = 2 * counts_.tp[t] + counts_.fn[t] + counts_.fp[t];
    sum += denom > 0 ? 2.0 * static_cast<double>(counts_.tp[t]) / static_cast<double>(denom) : 0.0;
  }
  return 100.0 * sum / static_cast<double>(counts_.thresholds.size());
}

double component_f1(const std::vector<std::vector<Pixel>>& predicted,
                    const std::vector<std::vector<Pixel>>& ground_truth, const BinaryMask& roi,
                    const std::vector<double>& thresholds) {
  ComponentF1 acc(thresholds);
  acc.add_frame(predicted, ground_truth, roi);
  return acc.f1_bar();
}

// ---- tracking --------------------------------------------------------------

ClearMotResult clear_mot(const std::vector<FrameObjects>& predicted, const std::vector<FrameObjects>& ground_truth,
                         double match_radius) {
  if (predicted.size() != ground_truth.size()) {
    throw Error(Errc::shape_mismatch, "CLEAR-MOT needs frame-aligned inputs: " + std::to_string(predicted.size()) +
                                          " predicted frames vs " + std::to_string(ground_truth.size()) +
                                          " ground-truth frames");
  }
  ClearMotResult res;
  std::map<int, int> previous;    // gt id -> pred id matched in the previous frame
  std::map<int, int> last_match;  // gt id -> last pred id ever matched
  double distance_sum = 0.0;

  for (std::size_t f = 0; f < predicted.size(); ++f) {
    const auto& pred = predicted[f].objects;
    const auto& gt = ground_truth[f].objects;
    if (predicted[f].frame_index != ground_truth[f].frame_index) {
      throw Error(Errc::shape_mismatch, "CLEAR-MOT frame ranges differ at position " + std::to_string(f));
    }
    res.ground_truth += static_cast<long long>(gt.size());
    std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
    std::map<int, int> current;
    auto distance = [&](std::size_t g, std::size_t p) {
      return std::hypot(gt[g].row - pred[p].row, gt[g].col - pred[p].col);
    };
    auto record = [&](std::size_t g, std::size_t p) {
      gt_used[g] = pred_used[p] = true;
      const double d = distance(g, p);
      distance_sum += d;
      ++res.matches;
      const auto prior = last_match.find(gt[g].object_id);
      if (prior != last_match.end() && prior->second != pred[p].object_id) ++res.id_switches;
      last_match[gt[g].object_id] = pred[p].object_id;
      current[gt[g].object_id] = pred[p].object_id;
    };

    // Keep last frame's correspondences that are still within the radius.
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const auto it = previous.find(gt[g].object_id);
      if (it == previous.end()) continue;
      for (std::size_t p = 0; p < pred.size(); ++p) {
        if (pred_used[p] || pred[p].object_id != it->second) continue;
        if (distance(g, p) <= match_radius) record(g, p);
        break;
      }
    }
    struct Candidate {
      double d;
      int gt_id;
      int pred_id;
      std::size_t g, p;
    };
    std::vector<Candidate> cands;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_used[g]) continue;
      for (std::size_t p = 0; p < pred.size(); ++p) {
        if (pred_used[p]) continue;
        const double d = distance(g, p);
        if (d <= match_radius) cands.push_back({d, gt[g].object_id, pred[p].object_id, g, p});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.d != b.d) return a.d < b.d;
      if (a.gt_id != b.gt_id) return a.gt_id < b.gt_id;
      return a.pred_id < b.pred_id;
    });
    for (const auto& c : cands) {
      if (gt_used[c.g] || pred_used[c.p]) continue;
      record(c.g, c.p);
    }
    for (bool used : gt_used) res.misses += used ? 0 : 1;
    for (bool used : pred_used) res.false_positives += used ? 0 : 1;
    previous = std::move(current);
  }

  const long long errors = res.misses + res.false_positives + res.id_switches;
  res.mota = 1.0 - static_cast<double>(errors) / static_cast<double>(std::max<long long>(res.ground_truth, 1));
  res.motp = res.matches > 0 ? distance_sum / static_cast<double>(res.matches) : 0.0;
  return res;
}

// ---- retrieval -------------------------------------------------------------

namespace {

struct CurveBuilder {
  // Instances sorted by descending score with running tallies per distinct score.
  std::vector<double> thresholds;  // descending
  std::vector<PrPoint> points;     // aligned with thresholds
};

CurveBuilder build_curve(const QueryEvalInput& input) {
  std::vector<std::size_t> order(input.instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return input.instances[a].score > input.instances[b].score;
  });
  CurveBuilder out;
  std::set<std::int64_t> keys;
  std::size_t retrieved = 0, relevant_retrieved = 0, anonymous_relevant = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = input.instances[order[i]].score;
    while (i < order.size() && input.instances[order[i]].score == score) {
      const auto& inst = input.instances[order[i]];
      ++retrieved;
      if (inst.relevant) {
        ++relevant_retrieved;
        if (inst.gt_key < 0) {
          ++anonymous_relevant;
        } else {
          keys.insert(inst.gt_key);
        }
      }
      ++i;
    }
    PrPoint p;
    p.threshold = score;
    p.precision = static_cast<double>(relevant_retrieved) / static_cast<double>(retrieved);
    const std::size_t found = keys.size() + anonymous_relevant;
    p.recall = input.num_relevant > 0
                   ? std::min(1.0, static_cast<double>(found) / static_cast<double>(input.num_relevant))
                   : 0.0;
    out.thresholds.push_back(score);
    out.points.push_back(p);
  }
  return out;
}

double top_threshold(double max_score) {
  return std::nextafter(max_score, std::numeric_limits<double>::infinity());
}

}  // namespace

PrPoint pr_at(const QueryEvalInput& input, double tau) {
  std::size_t retrieved = 0, relevant_retrieved = 0, anonymous = 0;
  std::set<std::int64_t> keys;
  for (const auto& inst : input.instances) {
    if (inst.score < tau) continue;
    ++retrieved;
    if (!inst.relevant) continue;
    ++relevant_retrieved;
    inst.gt_key < 0 ? static_cast<void>(++anonymous) : static_cast<void>(keys.insert(inst.gt_key));
  }
  PrPoint p;
  p.threshold = tau;
  p.precision = retrieved > 0 ? static_cast<double>(relevant_retrieved) / static_cast<double>(retrieved) : 1.0;
  p.recall = input.num_relevant > 0 ? std::min(1.0, static_cast<double>(keys.size() + anonymous) /
                                                        static_cast<double>(input.num_relevant))
                                    : 0.0;
  return p;
}

double step_area(const std::vector<PrPoint>& points) {
  double area = 0.0, prev = 0.0;
  for (const auto& p : points) {
    area += (p.recall - prev) * p.precision;
    prev = p.recall;
  }
  return area;
}

QueryCurve query_curve(const QueryEvalInput& input) {
  QueryCurve curve;
  curve.query = input.query;
  curve.undefined_recall = input.num_relevant == 0;
  const CurveBuilder b = build_curve(input);
  const double top = b.thresholds.empty() ? 1.0 : top_threshold(b.thresholds.front());
  curve.points.push_back({top, 1.0, 0.0});
  curve.points.insert(curve.points.end(), b.points.begin(), b.points.end());
  curve.auprc = curve.undefined_recall ? 0.0 : 100.0 * step_area(curve.points);
  return curve;
}

namespace {

// Point of `curve` in effect at threshold tau (curve thresholds descending).
PrPoint curve_at(const QueryCurve& curve, double tau) {
  // Last point whose threshold >= tau.
  std::size_t lo = 0, hi = curve.points.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (curve.points[mid].threshold >= tau) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == 0) return {tau, 1.0, 0.0};
  PrPoint p = curve.points[lo - 1];
  p.threshold = tau;
  return p;
}

}  // namespace

RetrievalEval retrieval_pr(const std::vector<QueryEvalInput>& queries) {
  RetrievalEval out;
  std::vector<std::size_t> defined;
  std::set<double, std::greater<>> thresholds;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    out.per_query.push_back(query_curve(queries[q]));
    if (out.per_query.back().undefined_recall) continue;
    defined.push_back(q);
    for (const auto& inst : queries[q].instances) thresholds.insert(inst.score);
  }
  if (defined.empty()) return out;

  const double top = thresholds.empty() ? 1.0 : top_threshold(*thresholds.begin());
  std::vector<double> grid{top};
  grid.insert(grid.end(), thresholds.begin(), thresholds.end());
  for (double tau : grid) {
    PrPoint mean{tau, 0.0, 0.0};
    for (std::size_t q : defined) {
      const PrPoint p = curve_at(out.per_query[q], tau);
      mean.precision += p.precision;
      mean.recall += p.recall;
    }
    mean.precision /= static_cast<double>(defined.size());
    mean.recall /= static_cast<double>(defined.size());
    out.mean_curve.push_back(mean);
  }
  out.auprc = 100.0 * step_area(out.mean_curve);

  QueryEvalInput pooled;
  pooled.query = "__pooled__";
  double mean_ap = 0.0;
  for (std::size_t q : defined) {
    mean_ap += out.per_query[q].auprc;
    pooled.num_relevant += queries[q].num_relevant;
    for (auto inst : queries[q].instances) {
      if (inst.gt_key >= 0) inst.gt_key += static_cast<std::int64_t>(q) << 48;
      pooled.instances.push_back(inst);
    }
  }
  out.mean_query_auprc = mean_ap / static_cast<double>(defined.size());
  out.pooled_auprc = query_curve(pooled).auprc;
  return out;
}

// ---- report ----------------------------------------------------------------

namespace {

json points_to_json(const std::vector<PrPoint>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back({p.threshold, p.precision, p.recall});
  return out;
}

std::vector<PrPoint> points_from_json(const json& doc) {
  std::vector<PrPoint> out;
  for (const auto& p : doc) out.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
  return out;
}

}  // namespace

json to_json(const EvalReport& report) {
  json curves = json::array();
  for (const auto& c : report.retrieval.per_query) {
    curves.push_back({{"query", c.query},
                      {"auprc", c.auprc},
                      {"undefined_recall", c.undefined_recall},
                      {"points", points_to_json(c.points)}});
  }
  const auto& t = report.tracking;
  return {{"segmentation", {{"auprc", report.auprc}, {"fpr95", report.fpr95}, {"f1_bar", report.f1_bar}}},
          {"tracking",
           {{"mota", report.mota},
            {"motp", report.motp},
            {"ground_truth", t.ground_truth},
            {"matches", t.matches},
            {"misses", t.misses},
            {"false_positives", t.false_positives},
            {"id_switches", t.id_switches}}},
          {"retrieval",
           {{"auprc", report.retrieval.auprc},
            {"pooled_auprc", report.retrieval.pooled_auprc},
            {"mean_query_auprc", report.retrieval.mean_query_auprc},
            {"mean_curve", points_to_json(report.retrieval.mean_curve)},
            {"curves", std::move(curves)}}},
          {"config", report.config},
          {"notes", report.notes}};
}

EvalReport eval_report_from_json(const json& doc) {
  try {
    EvalReport r;
    const auto& seg = doc.at("segmentation");
    r.auprc = seg.at("auprc").get<double>();
    r.fpr95 = seg.at("fpr95").get<double>();
    r.f1_bar = seg.at("f1_bar").get<double>();
    const auto& trk = doc.at("tracking");
    r.mota = trk.at("mota").get<double>();
    r.motp = trk.at("motp").get<double>();
    r.tracking.mota = r.mota;
    r.tracking.motp = r.motp;
    r.tracking.ground_truth = trk.value("ground_truth", 0LL);
    r.tracking.matches = trk.value("matches", 0LL);
    r.tracking.misses = trk.value("misses", 0LL);
    r.tracking.false_positives = trk.value("false_positives", 0LL);
    r.tracking.id_switches = trk.value("id_switches", 0LL);
    const auto& ret = doc.at("retrieval");
    r.retrieval.auprc = ret.at("auprc").get<double>();
    r.retrieval.pooled_auprc = ret.value("pooled_auprc", 0.0);
    r.retrieval.mean_query_auprc = ret.value("mean_query_auprc", 0.0);
    r.retrieval.mean_curve = points_from_json(ret.at("mean_curve"));
    for (const auto& c : ret.at("curves")) {
      QueryCurve qc;
      qc.query = c.at("query").get<std::string>();
      qc.auprc = c.at("auprc").get<double>();
      qc.undefined_recall = c.value("undefined_recall", false);
      qc.points = points_from_json(c.at("points"));
      r.retrieval.per_query.push_back(std::move(qc));
    }
    r.config = doc.value("config", json());
    r.notes = doc.value("notes", json::object());
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("eval report JSON: ") + e.what());
  }
}

std::string curves_csv(const RetrievalEval& eval) {
  std::ostringstream out;
  out.precision(17);
  out << "query,threshold,precision,recall\n";
  for (const auto& c : eval.per_query) {
    for (const auto& p : c.points) out << c.query << ',' << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  }
  for (const auto& p : eval.mean_curve) {
    out << "__mean__," << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  }
  return out.str();
}

}  // namespace oodret
