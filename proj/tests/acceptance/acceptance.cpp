// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "oodret/artifacts.hpp"
#include "oodret/evaluation.hpp"
#include "oodret/manifest.hpp"
#include "oodret/pipeline.hpp"
#include "oodret/retrieval_index.hpp"
#include "oodret/roi.hpp"
#include "oodret/scoring.hpp"
#include "oodret/synthetic.hpp"
#include "oodret/tensor_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace oodret;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failing check with a short message.
struct Checker {
  Outcome out;
  int checks = 0;
  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << ", want " << want;
    expect(std::abs(got - want) <= tol, s.str());
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

QueryEmbedding vec(std::vector<float> v) { return {std::move(v), QuerySource::raw_vector, ""}; }

std::vector<SequenceRecord> random_sequences(std::mt19937_64& rng, int n, std::size_t d, int max_len) {
  std::normal_distribution<float> g;
  std::uniform_int_distribution<int> len(1, max_len);
  std::vector<SequenceRecord> out;
  for (int i = 0; i < n; ++i) {
    SequenceRecord s;
    char id[16];
    std::snprintf(id, sizeof id, "s%03d", i);
    s.sequence_id = id;
    s.source_video = "v";
    s.track_id = i;
    for (int j = len(rng); j > 0; --j) {
      CropRef c;
      c.frame_index = static_cast<int>(s.crops.size());
      c.bbox = {0, 0, 3, 3};
      c.segment_bbox = {1, 1, 2, 2};
      s.crops.push_back(c);
      std::vector<float> e(d);
      for (auto& x : e) x = g(rng);
      s.embeddings.push_back(std::move(e));
    }
    out.push_back(std::move(s));
  }
  return out;
}

RetrievalIndex index_of(const std::vector<SequenceRecord>& seqs) {
  RetrievalIndex idx;
  for (const auto& s : seqs) idx.ingest(s);
  return idx;
}

// ---- criteria ----------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(20240601);
  const int corpora = 120;
  for (int trial = 0; trial < corpora; ++trial) {
    // Pixel metrics on up to 1000 pixels with heavy score ties.
    std::uniform_int_distribution<int> size(2, 1000), levels(1, 50);
    const int n = size(rng);
    const int L = levels(rng);
    std::uniform_int_distribution<int> lv(0, L);
    std::bernoulli_distribution pos(std::uniform_real_distribution<double>(0.05, 0.6)(rng));
    PixelEvalInput px;
    for (int i = 0; i < n; ++i) {
      px.scores.push_back(static_cast<float>(lv(rng)) / L - 0.5f);
      px.labels.push_back(pos(rng));
    }
    px.labels[0] = 1;
    px.labels[1] = 0;
    c.near(pixel_auprc(px), oracle::pixel_ap(px.scores, px.labels), 1e-9, "pixel_auprc");
    c.near(fpr_at_95_tpr(px), oracle::fpr95(px.scores, px.labels), 1e-9, "fpr_at_95_tpr");

    // Retrieval PR over a few queries, at most 1000 instances in total.
    std::uniform_int_distribution<int> nq(1, 5), ni(1, 200), key(0, 30), slv(0, 40);
    std::bernoulli_distribution rel(0.35);
    std::vector<QueryEvalInput> qs;
    for (int k = nq(rng); k > 0; --k) {
      QueryEvalInput q;
      q.query = "q" + std::to_string(k);
      std::set<int> keys;
      for (int i = ni(rng); i > 0; --i) {
        const bool r = rel(rng);
        const int kk = key(rng);
        q.instances.push_back({slv(rng) / 20.0 - 1.0, r, r ? kk : -1});
        if (r) keys.insert(kk);
      }
      q.num_relevant = keys.size() + (trial % 4 == 0 ? 3 : 0);
      qs.push_back(std::move(q));
    }
    const auto got = retrieval_pr(qs);
    const auto want = oracle::retrieval(qs);
    c.near(got.auprc, want.mean_curve_ap, 1e-9, "retrieval_pr mean curve");
    c.near(got.pooled_auprc, want.pooled_ap, 1e-9, "retrieval_pr pooled");
    c.near(got.mean_query_auprc, want.mean_query_ap, 1e-9, "retrieval_pr mean of queries");

    // Index query against a brute scan: at most 1000 stored vectors.
    std::uniform_int_distribution<int> nseq(1, 60), dim(2, 24);
    const auto seqs = random_sequences(rng, nseq(rng), static_cast<std::size_t>(dim(rng)), 16);
    const auto idx = index_of(seqs);
    std::normal_distribution<float> g;
    std::vector<float> f(idx.dimension());
    for (auto& x : f) x = g(rng);
    const double tau = std::uniform_real_distribution<double>(-0.5, 0.8)(rng);
    const auto res = idx.query(vec(f), tau);
    const auto brute = oracle::query(seqs, f, tau);
    c.expect(res.size() == brute.size(), "query result count");
    for (std::size_t i = 0; i < std::min(res.size(), brute.size()); ++i) {
      c.expect(res[i].sequence_id == brute[i].id, "query order");
      c.near(res[i].score, brute[i].score, 1e-9, "query score");
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime over one minute");
  if (c.out.pass) {
    std::ostringstream s;
    s << corpora << " corpora, " << c.checks << " checks, " << secs << " s";
    c.out.detail = s.str();
  }
  return c.out;
}

Outcome rba_correctness() {
  Checker c;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 24), kk(1, 19);
  for (int trial = 0; trial < 200 && c.out.pass; ++trial) {
    const int h = dim(rng), w = dim(rng), k = kk(rng);
    const float hi = std::uniform_real_distribution<float>(0.5f, 6.0f)(rng);
    const auto q = oracle::random_scores(rng, h, w, k, hi);
    const auto map = rba_score(q);
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        const double v = map(r, col);
        c.near(v, oracle::rba_at(q, r, col), 1e-6, "rba vs direct evaluation");
        c.expect(v <= 0.0 && v >= -k * std::tanh(static_cast<double>(hi)) - 1e-6, "rba range bound");
      }
    }
    // Antitonicity: raising any class score never raises RbA.
    auto bumped = q;
    std::uniform_int_distribution<int> pr(0, h - 1), pc(0, w - 1), pk(0, k - 1);
    const int r = pr(rng), col = pc(rng);
    bumped.at(r, col, pk(rng)) += std::uniform_real_distribution<float>(0.0f, 2.0f)(rng);
    c.expect(rba_score(bumped)(r, col) <= map(r, col), "rba antitonicity");

    // Threshold rankings under a positive affine shift of scores and threshold.
    // Scores on a 1/64 grid with power-of-two scales and integer offsets keep
    // the shifted values exact in float.
    const double scales[] = {0.25, 0.5, 2.0, 4.0, 8.0};
    const double a = scales[std::uniform_int_distribution<int>(0, 4)(rng)];
    const double b = std::uniform_int_distribution<int>(-5, 5)(rng);
    AnomalyMap base(h, w), shifted(h, w);
    for (std::size_t i = 0; i < map.size(); ++i) {
      base.values()[i] = static_cast<float>(std::round(map.values()[i] * 64.0) / 64.0);
      shifted.values()[i] = static_cast<float>(a * base.values()[i] + b);
    }
    std::uniform_int_distribution<std::size_t> pick(0, map.size() - 1);
    const double t = base.values()[pick(rng)];
    c.expect(threshold_anomaly(base, t) == threshold_anomaly(shifted, a * t + b),
             "threshold mask changes under an affine shift");
    PixelEvalInput p1, p2;
    std::bernoulli_distribution lab(0.3);
    for (std::size_t i = 0; i < map.size(); ++i) {
      const std::uint8_t l = lab(rng);
      p1.scores.push_back(base.values()[i]);
      p2.scores.push_back(shifted.values()[i]);
      p1.labels.push_back(l);
      p2.labels.push_back(l);
    }
    p1.labels[0] = p2.labels[0] = 1;
    if (p1.labels.size() > 1) {
      p1.labels[1] = p2.labels[1] = 0;
      c.near(pixel_auprc(p1), pixel_auprc(p2), 1e-9, "AP changes under an affine shift");
      c.near(fpr_at_95_tpr(p1), fpr_at_95_tpr(p2), 1e-9, "FPR95 changes under an affine shift");
    }
  }
  if (c.out.pass) c.out.detail = std::to_string(c.checks) + " checks";
  return c.out;
}

Outcome morphology_laws() {
  Checker c;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 64), rad(0, 6);
  const int cases = 1000;
  for (int trial = 0; trial < cases && c.out.pass; ++trial) {
    const int h = dim(rng), w = dim(rng), r = rad(rng);
    const double density = std::uniform_real_distribution<double>(0.02, 0.7)(rng);
    const auto m = oracle::random_mask(rng, h, w, density);
    const auto closed = morphological_close(m, r);
    c.expect(closed == oracle::close(m, r), "closing differs from the brute-force oracle");
    c.expect(oracle::subset(m, closed), "closing is not extensive");
    c.expect(morphological_close(closed, r) == closed, "closing is not idempotent");
    auto bigger = m;
    for (auto& v : bigger.values()) v = v || std::bernoulli_distribution(0.1)(rng);
    c.expect(oracle::subset(closed, morphological_close(bigger, r)), "closing is not increasing");
  }
  if (c.out.pass) c.out.detail = std::to_string(cases) + " random masks";
  return c.out;
}

Outcome perfect_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  TempDir dir;
  auto spec = SyntheticSpec::clean(42);
  spec.videos = 10;
  spec.frames = 100;
  const auto m = generate_synthetic(spec, dir.path);
  const auto config = resolve_config(std::nullopt, &m);
  auto encoder = make_content_encoder(m);
  const auto run = run_corpus(m, config, nullptr, *encoder);
  const auto vocab = Vocabulary::load(m.vocabulary);
  EvalInputs in;
  in.manifest = &m;
  in.config = &config;
  in.segments = &run.segments;
  in.index = &run.index;
  in.vocabulary = &vocab;
  const auto report = evaluate(in);
  const double secs = seconds_since(t0);

  c.expect(report.mota == 1.0, "MOTA " + std::to_string(report.mota));
  c.expect(report.tracking.id_switches == 0, "ID switches " + std::to_string(report.tracking.id_switches));
  c.near(report.f1_bar, 100.0, 1e-9, "F1 bar");

  // Precision and recall of the returned sequences at the configured tau.
  const auto gt = GroundTruth::load(m.gt_tracks);
  std::map<std::string, Grid<std::uint8_t>> first_instances;
  for (const auto& term : vocab.terms()) {
    std::set<std::pair<std::string, int>> want;
    for (const auto& [v, objs] : gt.videos) {
      for (const auto& o : objs) {
        if (gt.classes[o.class_index] == term) want.insert({v, o.object_id});
      }
    }
    std::set<std::pair<std::string, int>> found;
    std::size_t correct = 0;
    const auto results = run.index.query(vocab.resolve(term), config.tau);
    for (const auto& r : results) {
      const auto seq = *run.index.sequence(r.sequence_id);
      bool all_match = true;
      std::set<int> objects;
      for (const auto& crop : seq.crops) {
        const auto inst =
            mask_from_tensor(read_tensor(m.video(seq.source_video).frames.at(crop.frame_index).instances));
        const auto label = label_box(inst, crop.segment_bbox, gt.videos.at(seq.source_video));
        all_match = all_match && label.class_index >= 0 && gt.classes[label.class_index] == term;
        if (label.object_id >= 0) objects.insert(label.object_id);
      }
      if (all_match && objects.size() == 1) {
        ++correct;
        found.insert({seq.source_video, *objects.begin()});
      }
    }
    const double precision = results.empty() ? 0.0 : static_cast<double>(correct) / results.size();
    const double recall = want.empty() ? 1.0 : static_cast<double>(found.size()) / want.size();
    c.expect(precision == 1.0, "precision for '" + term + "' " + std::to_string(precision));
    c.expect(recall == 1.0, "recall for '" + term + "' " + std::to_string(recall));
  }
  c.expect(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  if (c.out.pass) {
    std::ostringstream s;
    s << "10 videos x 100 frames, " << run.index.size() << " sequences, " << secs << " s";
    c.out.detail = s.str();
  }
  return c.out;
}

std::string triple(const EvalReport& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "F1 %.1f MOTA %.3f AUPRC %.1f", r.f1_bar, r.mota, r.retrieval.auprc);
  return buf;
}

// Full pipeline over a corpus, evaluated; `variants` adds the full-frame
// baseline.
EvalReport run_and_evaluate(const CorpusManifest& m, const PipelineConfig& config, const MetaModel* meta,
                            RetrievalVariants* variants) {
  const auto vocab = Vocabulary::load(m.vocabulary);
  auto encoder = make_content_encoder(m);
  const auto r = run_corpus(m, config, meta, *encoder);
  std::map<std::string, ContentEncoder> frames;
  EvalInputs in;
  in.manifest = &m;
  in.config = &config;
  in.segments = &r.segments;
  in.index = &r.index;
  in.vocabulary = &vocab;
  if (variants) {
    for (const auto& v : m.videos) frames.emplace(v.id, ContentEncoder(v));
    in.frame_encoder = [&frames](const std::string& video, int frame) { return frames.at(video).encode_frame(frame); };
  }
  return evaluate(in, variants);
}

bool verbose() { return std::getenv("OODRET_ACCEPTANCE_VERBOSE") != nullptr; }

struct AblationRun {
  EvalReport meta_off, meta_on, gt_roi;
};

// Meta model trained once on a separate noisy seed, saved as root/meta.json.
const MetaModel& shared_meta(const fs::path& root) {
  static const MetaModel meta = [&] {
    auto train_spec = SyntheticSpec::noisy(1001);
    train_spec.videos = 4;
    train_spec.frames = 100;
    const auto train = generate_synthetic(train_spec, root / "train");
    MetaModel m = train_meta_on_corpus(train, resolve_config(std::nullopt, &train));
    write_json_file(root / "meta.json", to_json(m));
    return m;
  }();
  return meta;
}

std::vector<AblationRun> ablation_runs(const fs::path& root) {
  const MetaModel& meta = shared_meta(root);

  std::vector<AblationRun> out;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto spec = SyntheticSpec::noisy(seed);
    spec.videos = 4;
    spec.frames = 100;
    const auto m = generate_synthetic(spec, root / ("seed" + std::to_string(seed)));
    PipelineConfig off = resolve_config(std::nullopt, &m);
    off.meta_model.clear();
    PipelineConfig on = off;
    on.meta_model = (root / "meta.json").string();
    PipelineConfig gt = on;
    gt.roi_source = RoiSource::ground_truth;
    AblationRun r;
    r.meta_off = run_and_evaluate(m, off, nullptr, nullptr);
    r.meta_on = run_and_evaluate(m, on, &meta, nullptr);
    r.gt_roi = run_and_evaluate(m, gt, &meta, nullptr);
    if (verbose()) {
      std::fprintf(stderr, "ablation seed %d: off[%s] on[%s] gt-roi[%s]\n", static_cast<int>(seed),
                   triple(r.meta_off).c_str(), triple(r.meta_on).c_str(), triple(r.gt_roi).c_str());
    }
    out.push_back(std::move(r));
  }
  return out;
}

Outcome ablation(const fs::path& root) {
  const auto runs = ablation_runs(root);
  Checker c;
  int seed = 0;
  for (const auto& r : runs) {
    ++seed;
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    const std::string values = " (off " + triple(r.meta_off) + ", on " + triple(r.meta_on) + ")";
    c.expect(r.meta_off.f1_bar < r.meta_on.f1_bar, tag + "meta off does not lower F1" + values);
    c.expect(r.meta_off.mota < r.meta_on.mota, tag + "meta off does not lower MOTA" + values);
    c.expect(r.meta_off.retrieval.auprc < r.meta_on.retrieval.auprc,
             tag + "meta off does not lower retrieval AUPRC" + values);
    const std::string gt_values = " (on " + triple(r.meta_on) + ", GT ROI " + triple(r.gt_roi) + ")";
    c.expect(r.gt_roi.f1_bar >= r.meta_on.f1_bar, tag + "GT ROI lowers F1" + gt_values);
    c.expect(r.gt_roi.mota >= r.meta_on.mota, tag + "GT ROI lowers MOTA" + gt_values);
    c.expect(r.gt_roi.retrieval.auprc >= r.meta_on.retrieval.auprc, tag + "GT ROI lowers retrieval AUPRC" + gt_values);
  }
  c.expect(runs.size() == 5, "expected 5 seeds");
  if (c.out.pass) {
    c.out.detail = "5/5 seeds; seed 1: off " + triple(runs[0].meta_off) + ", on " + triple(runs[0].meta_on) +
                   ", GT ROI " + triple(runs[0].gt_roi);
  }
  return c.out;
}

double largest_object_fraction(const CorpusManifest& m) {
  double out = 0.0;
  for (const auto& v : m.videos) {
    for (const auto& f : v.frames) {
      const auto inst = mask_from_tensor(read_tensor(f.instances));
      std::map<int, int> area;
      for (auto x : inst.values()) {
        if (x) ++area[x];
      }
      for (const auto& [_, a] : area) out = std::max(out, static_cast<double>(a) / inst.size());
    }
  }
  return out;
}

// Obstacles with noisy content and no injected false positives, so retrieval
// differences come from the embedding granularity alone.
Outcome crop_vs_frame(const fs::path& root) {
  Checker c;
  std::ostringstream s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto spec = SyntheticSpec::noisy(seed);
    spec.fp_rate = 0.0;
    spec.leak_zone = false;
    spec.noise = 0.24;
    const auto m = generate_synthetic(spec, root / ("frames" + std::to_string(seed)));
    RetrievalVariants v;
    run_and_evaluate(m, resolve_config(std::nullopt, &m), nullptr, &v);
    const double area = largest_object_fraction(m);
    char buf[160];
    std::snprintf(buf, sizeof buf, "seed %d: tracked %.1f, per-crop %.1f, full-frame %.1f, largest object %.2f%%",
                  static_cast<int>(seed), v.tracked.auprc, v.per_crop.auprc, v.full_frame.auprc, 100.0 * area);
    if (verbose()) std::fprintf(stderr, "%s\n", buf);
    if (seed == 1) s << buf;
    c.expect(area < 0.05, std::string(buf) + ": an obstacle covers 5% of a frame or more");
    c.expect(v.has_full_frame, std::string(buf) + ": no full-frame baseline");
    c.expect(v.per_crop.auprc > v.full_frame.auprc, std::string(buf) + ": crop AUPRC not above full-frame");
    c.expect(v.tracked.auprc >= v.per_crop.auprc, std::string(buf) + ": tracked AUPRC below per-crop");

    // The default noisy preset through the full pipeline, where imperfect
    // crops separate the two.
    const auto noisy = generate_synthetic(SyntheticSpec::noisy(seed), root / ("noisy" + std::to_string(seed)));
    PipelineConfig full = resolve_config(std::nullopt, &noisy);
    full.meta_model = (root / "meta.json").string();
    RetrievalVariants nv;
    run_and_evaluate(noisy, full, &shared_meta(root), &nv);
    std::snprintf(buf, sizeof buf, "noisy seed %d: tracked %.1f, per-crop %.1f", static_cast<int>(seed),
                  nv.tracked.auprc, nv.per_crop.auprc);
    if (verbose()) std::fprintf(stderr, "%s\n", buf);
    if (seed == 1) s << "; " << buf;
    c.expect(nv.tracked.auprc >= nv.per_crop.auprc, std::string(buf) + ": tracked AUPRC below per-crop");
  }
  if (c.out.pass) c.out.detail = "5/5 seeds; " + s.str();
  return c.out;
}

Outcome eq6_semantics() {
  Checker c;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> nseq(1, 40), dim(2, 16);
  for (int trial = 0; trial < 100 && c.out.pass; ++trial) {
    const auto seqs = random_sequences(rng, nseq(rng), static_cast<std::size_t>(dim(rng)), 12);
    const auto idx = index_of(seqs);
    std::normal_distribution<float> g;
    std::vector<float> f(idx.dimension());
    for (auto& x : f) x = g(rng);
    // max_j s(g_j, f) per sequence, evaluated crop by crop.
    std::map<std::string, double> best;
    for (const auto& seq : seqs) {
      double m = -2.0;
      for (const auto& g : seq.embeddings) m = std::max(m, cosine_similarity(g, f));
      best[seq.sequence_id] = m;
    }
    // Every sequence score is a threshold (the boundary case), plus a grid.
    std::vector<double> taus;
    for (const auto& [_, v] : best) taus.push_back(v);
    for (int i = 0; i <= 20; ++i) taus.push_back(-1.0 + 0.1 * i);
    std::sort(taus.begin(), taus.end());
    std::set<std::string> previous;
    bool first = true;
    for (double tau : taus) {
      const auto res = idx.query(vec(f), tau);
      std::set<std::string> got;
      for (const auto& r : res) got.insert(r.sequence_id);
      std::set<std::string> want;
      for (const auto& [id, v] : best) {
        if (v >= tau) want.insert(id);
      }
      c.expect(got == want, "returned set differs from the exhaustive definition");
      c.expect(res.size() == got.size(), "duplicate sequence in results");
      if (!first) {
        c.expect(std::includes(previous.begin(), previous.end(), got.begin(), got.end()),
                 "raising tau added a sequence");
      }
      previous = got;
      first = false;
    }
  }
  if (c.out.pass) c.out.detail = std::to_string(c.checks) + " checks over 100 corpora";
  return c.out;
}

bool rejected(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error&) {
    return true;
  }
  return false;
}

Outcome format_round_trips() {
  Checker c;
  std::mt19937_64 rng(5);

  // Tensors.
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> rank(1, 3), ext(1, 9);
    std::vector<std::uint32_t> shape(rank(rng));
    std::size_t n = 1;
    for (auto& s : shape) n *= (s = ext(rng));
    std::string bytes;
    Tensor t;
    if (trial % 2) {
      std::vector<float> v(n);
      for (auto& x : v) {
        std::uint32_t bits;
        do {
          bits = static_cast<std::uint32_t>(rng());
          std::memcpy(&x, &bits, 4);
        } while (!std::isfinite(x));
      }
      t = Tensor::from_f32(shape, v);
    } else {
      std::vector<std::uint8_t> v(n);
      for (auto& x : v) x = static_cast<std::uint8_t>(rng());
      t = Tensor::from_u8(shape, v);
    }
    std::ostringstream a;
    write_tensor(a, t);
    bytes = a.str();
    std::istringstream in(bytes);
    const Tensor back = read_tensor(in);
    std::ostringstream b;
    write_tensor(b, back);
    c.expect(b.str() == bytes, "tensor write/read/write is not bit-exact");
    for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + bytes.size() / 16) {
      c.expect(rejected([&] {
                 std::istringstream s(bytes.substr(0, cut));
                 read_tensor(s);
               }),
               "truncated tensor accepted");
    }
    std::string bad = bytes;
    bad[0] ^= 0x20;
    c.expect(rejected([&] {
               std::istringstream s(bad);
               read_tensor(s);
             }),
             "tensor with a bad magic accepted");
    bad = bytes;
    bad[5] = 7;
    c.expect(rejected([&] {
               std::istringstream s(bad);
               read_tensor(s);
             }),
             "tensor with a bad dtype accepted");
  }

  // Manifests.
  TempDir dir;
  auto spec = SyntheticSpec::noisy(3);
  spec.videos = 1;
  spec.frames = 20;
  const auto m = generate_synthetic(spec, dir.path / "c");
  save_manifest(m, dir.path / "c" / "copy.json");
  const auto again = load_manifest(dir.path / "c" / "copy.json");
  c.expect(again.to_json() == m.to_json(), "manifest read/write changes the content");
  save_manifest(again, dir.path / "c" / "copy2.json");
  c.expect(slurp(dir.path / "c" / "copy.json") == slurp(dir.path / "c" / "copy2.json"),
           "manifest write is not byte-stable");
  {
    std::ofstream out(dir.path / "c" / "broken.json");
    out << slurp(dir.path / "c" / "copy.json").substr(0, 40);
  }
  c.expect(rejected([&] { load_manifest(dir.path / "c" / "broken.json"); }), "truncated manifest accepted");
  auto doc = read_json_file(dir.path / "c" / "copy.json");
  doc["videos"][0]["frames"].erase(3);
  c.expect(rejected([&] { manifest_from_json(doc, dir.path / "c"); }), "manifest with a frame gap accepted");

  // Index snapshots.
  for (int trial = 0; trial < 20; ++trial) {
    auto idx = index_of(random_sequences(rng, 1 + trial, 8, 6));
    idx.provenance = {{"trial", trial}};
    std::ostringstream a;
    idx.write(a);
    const std::string bytes = a.str();
    std::istringstream in(bytes);
    const auto back = RetrievalIndex::read(in);
    std::ostringstream b;
    back.write(b);
    c.expect(b.str() == bytes, "snapshot write/read/write is not bit-exact");
    for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + bytes.size() / 16) {
      c.expect(rejected([&] {
                 std::istringstream s(bytes.substr(0, cut));
                 RetrievalIndex::read(s);
               }),
               "truncated snapshot accepted");
    }
    std::string bad = bytes;
    bad[1] = 'X';
    c.expect(rejected([&] {
               std::istringstream s(bad);
               RetrievalIndex::read(s);
             }),
             "snapshot with a bad magic accepted");
  }
  if (c.out.pass) c.out.detail = std::to_string(c.checks) + " checks";
  return c.out;
}

FrameObjects objs(int f, std::vector<TrackedObject> o) { return {f, std::move(o)}; }

Outcome clear_mot_cases() {
  Checker c;
  {
    std::vector<FrameObjects> gt, pr;
    for (int f = 0; f < 4; ++f) {
      gt.push_back(objs(f, {{1, 10, 10}}));
      pr.push_back(objs(f, f == 2 ? std::vector<TrackedObject>{} : std::vector<TrackedObject>{{3, 11, 10}}));
    }
    c.expect(clear_mot(pr, gt, 5.0).mota == 0.75, "one miss in four frames");
  }
  {
    std::vector<FrameObjects> gt, pr;
    for (int f = 0; f < 10; ++f) {
      gt.push_back(objs(f, {{1, 10, 10}}));
      pr.push_back(objs(f, {{f < 5 ? 3 : 4, 10, 10}}));
    }
    const auto r = clear_mot(pr, gt, 5.0);
    c.expect(r.mota == 0.9 && r.id_switches == 1, "one identity switch in ten frames");
  }
  {
    std::vector<FrameObjects> gt, pr;
    for (int f = 0; f < 4; ++f) {
      gt.push_back(objs(f, {{1, 10, 10}}));
      pr.push_back(objs(f, {{2, 10, 10}, {3, 50, 50}, {4, 80, 80}}));
    }
    c.expect(clear_mot(pr, gt, 5.0).mota == -1.0, "two false positives per frame");
  }
  if (c.out.pass) c.out.detail = "0.75, 0.9, -1";
  return c.out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << ")" << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report("metric-oracle-equivalence", guarded(metric_oracles));
  report("rba-correctness", guarded(rba_correctness));
  report("morphology-laws", guarded(morphology_laws));
  report("perfect-input-end-to-end", guarded(perfect_end_to_end));

  TempDir scratch;
  report("ablation-directions", guarded([&] { return ablation(scratch.path); }));
  report("object-vs-image-level", guarded([&] { return crop_vs_frame(scratch.path); }));

  report("query-set-semantics", guarded(eq6_semantics));
  report("format-round-trips", guarded(format_round_trips));
  report("clear-mot-hand-cases", guarded(clear_mot_cases));
  return failures == 0 ? 0 : 1;
}
