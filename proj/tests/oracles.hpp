// Brute-force reference implementations used by the tests. Each follows the
// textbook definition directly and shares no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oodret/evaluation.hpp"
#include "oodret/grid.hpp"
#include "oodret/retrieval_index.hpp"

namespace oracle {

using namespace oodret;

// ---- scoring ---------------------------------------------------------------

inline double rba_at(const FrameScoreTensor& q, int r, int c) {
  double s = 0.0;
  for (int k = 0; k < q.num_classes(); ++k) s -= std::tanh(static_cast<double>(q.at(r, c, k)));
  return s;
}

inline double fused_at(const MaskPredictionSet& p, int r, int c, int k) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.masks.size(); ++i) s += static_cast<double>(p.class_probs[i][k]) * p.masks[i](r, c);
  return s;
}

// ---- morphology ------------------------------------------------------------

inline BinaryMask dilate(const BinaryMask& m, int radius) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      bool any = false;
      for (int dr = -radius; dr <= radius && !any; ++dr) {
        for (int dc = -radius; dc <= radius && !any; ++dc) {
          any = m.contains(r + dr, c + dc) && m(r + dr, c + dc);
        }
      }
      out(r, c) = any;
    }
  }
  return out;
}

// Adjoint of `dilate`: pixels outside the frame never block.
inline BinaryMask erode(const BinaryMask& m, int radius) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      bool all = true;
      for (int dr = -radius; dr <= radius && all; ++dr) {
        for (int dc = -radius; dc <= radius && all; ++dc) {
          if (m.contains(r + dr, c + dc)) all = m(r + dr, c + dc) != 0;
        }
      }
      out(r, c) = all;
    }
  }
  return out;
}

inline BinaryMask close(const BinaryMask& m, int radius) { return oracle::erode(oracle::dilate(m, radius), radius); }

inline bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values()[i] && !b.values()[i]) return false;
  }
  return true;
}

// ---- connected components --------------------------------------------------

/// Component label per pixel (0 = background) by repeated flood fill.
inline Grid<int> label_components(const BinaryMask& m, bool eight) {
  Grid<int> lab(m.height(), m.width(), 0);
  int next = 0;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c) || lab(r, c)) continue;
      ++next;
      std::vector<Pixel> stack{{r, c}};
      lab(r, c) = next;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0)) continue;
            const int rr = p.row + dr, cc = p.col + dc;
            if (m.contains(rr, cc) && m(rr, cc) && !lab(rr, cc)) {
              lab(rr, cc) = next;
              stack.push_back({rr, cc});
            }
          }
        }
      }
    }
  }
  return lab;
}

// ---- pixel metrics ---------------------------------------------------------

/// Every distinct score taken as a threshold; recall and precision of
/// "score >= t" recomputed from scratch each time.
inline double pixel_ap(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
  std::set<float, std::greater<>> ts(scores.begin(), scores.end());
  long long pos = 0;
  for (auto l : labels) pos += l == 1;
  double area = 0.0, prev = 0.0;
  for (float t : ts) {
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp)++;
    }
    const double rec = static_cast<double>(tp) / pos;
    area += (rec - prev) * static_cast<double>(tp) / static_cast<double>(tp + fp);
    prev = rec;
  }
  return 100.0 * area;
}

inline double fpr95(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
  std::set<float, std::greater<>> ts(scores.begin(), scores.end());
  long long pos = 0, neg = 0;
  for (auto l : labels) (l == 1 ? pos : neg)++;
  for (float t : ts) {
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp)++;
    }
    if (static_cast<double>(tp) / pos >= 0.95 - 1e-12) return 100.0 * static_cast<double>(fp) / neg;
  }
  return 100.0;
}

// ---- retrieval metrics -----------------------------------------------------

inline PrPoint pr(const QueryEvalInput& q, double tau) {
  long long retrieved = 0, hits = 0;
  std::set<std::int64_t> found;
  long long anon = 0;
  for (std::size_t i = 0; i < q.instances.size(); ++i) {
    const auto& x = q.instances[i];
    if (!(x.score >= tau)) continue;
    ++retrieved;
    if (x.relevant) {
      ++hits;
      if (x.gt_key < 0) {
        ++anon;
      } else {
        found.insert(x.gt_key);
      }
    }
  }
  PrPoint p;
  p.threshold = tau;
  p.precision = retrieved ? static_cast<double>(hits) / retrieved : 1.0;
  p.recall = q.num_relevant ? std::min(1.0, static_cast<double>(found.size() + anon) / q.num_relevant) : 0.0;
  return p;
}

inline double area(const std::vector<PrPoint>& pts) {
  double a = 0.0, prev = 0.0;
  for (const auto& p : pts) {
    a += (p.recall - prev) * p.precision;
    prev = p.recall;
  }
  return 100.0 * a;
}

inline std::vector<double> sweep(const std::vector<const QueryEvalInput*>& qs) {
  std::set<double, std::greater<>> ts;
  for (auto* q : qs) {
    for (const auto& x : q->instances) ts.insert(x.score);
  }
  std::vector<double> out;
  out.push_back(ts.empty() ? 1.0 : std::nextafter(*ts.begin(), std::numeric_limits<double>::infinity()));
  out.insert(out.end(), ts.begin(), ts.end());
  return out;
}

inline double query_ap(const QueryEvalInput& q) {
  if (q.num_relevant == 0) return 0.0;
  std::vector<PrPoint> pts;
  for (double t : sweep({&q})) pts.push_back(pr(q, t));
  return area(pts);
}

struct RetrievalOracle {
  double mean_curve_ap = 0.0;
  double pooled_ap = 0.0;
  double mean_query_ap = 0.0;
};

inline RetrievalOracle retrieval(const std::vector<QueryEvalInput>& qs) {
  RetrievalOracle out;
  std::vector<const QueryEvalInput*> defined;
  for (const auto& q : qs) {
    if (q.num_relevant > 0) defined.push_back(&q);
  }
  if (defined.empty()) return out;
  std::vector<PrPoint> mean;
  for (double t : sweep(defined)) {
    PrPoint m{t, 0.0, 0.0};
    for (auto* q : defined) {
      const PrPoint p = pr(*q, t);
      m.precision += p.precision / defined.size();
      m.recall += p.recall / defined.size();
    }
    mean.push_back(m);
  }
  out.mean_curve_ap = area(mean);
  QueryEvalInput pooled;
  for (std::size_t i = 0; i < defined.size(); ++i) {
    out.mean_query_ap += query_ap(*defined[i]) / defined.size();
    pooled.num_relevant += defined[i]->num_relevant;
    for (auto x : defined[i]->instances) {
      // Offset keys per query so objects of different queries stay distinct.
      if (x.gt_key >= 0) x.gt_key = x.gt_key * 1000 + static_cast<std::int64_t>(i);
      pooled.instances.push_back(x);
    }
  }
  out.pooled_ap = query_ap(pooled);
  return out;
}

// ---- retrieval index -------------------------------------------------------

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  const double v = static_cast<double>(dot / std::sqrt(na * nb));
  return std::clamp(v, -1.0, 1.0);
}

struct Hit {
  std::string id;
  double score;
};

/// {S : max_j cos(g_j, f) >= tau}, by score descending then id.
inline std::vector<Hit> query(const std::vector<SequenceRecord>& seqs, const std::vector<float>& f, double tau) {
  std::vector<Hit> out;
  for (const auto& s : seqs) {
    double best = -2.0;
    for (const auto& g : s.embeddings) best = std::max(best, cosine(g, f));
    if (best >= tau) out.push_back({s.sequence_id, best});
  }
  std::sort(out.begin(), out.end(), [](const Hit& a, const Hit& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return out;
}

// ---- random inputs ---------------------------------------------------------

inline BinaryMask random_mask(std::mt19937_64& rng, int h, int w, double density) {
  std::bernoulli_distribution on(density);
  BinaryMask m(h, w);
  for (auto& v : m.values()) v = on(rng);
  return m;
}

inline FrameScoreTensor random_scores(std::mt19937_64& rng, int h, int w, int k, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(0.0f, hi);
  FrameScoreTensor q(h, w, k);
  for (auto& v : q.values()) v = u(rng);
  return q;
}

}  // namespace oracle
