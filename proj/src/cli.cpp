#include "oodret/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "oodret/artifacts.hpp"
#include "oodret/error.hpp"
#include "oodret/meta_classifier.hpp"
#include "oodret/rle.hpp"
#include "oodret/service.hpp"
#include "oodret/synthetic.hpp"
#include "oodret/tensor_io.hpp"

namespace oodret {

using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  std::string work;
  bool force = false;

  // synth
  std::string out_dir;
  std::string preset = "clean";
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::optional<int> videos;
  std::optional<int> frames;

  // train-meta / calibrate
  std::string out;
  std::vector<double> candidates;

  // ingest
  std::string embeddings;
  std::string crops;

  // query
  std::string index;
  std::string vocabulary;
  std::string term;
  std::string vector;
  std::optional<double> tau;
  std::optional<std::size_t> top_k;
  bool traces = false;
  std::string format = "json";

  // eval
  std::string csv;

  // serve
  std::string eval;
  std::string listen;
};

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(Errc::invalid_argument, flag + " is required");
}

CorpusManifest need_manifest(const Options& o) {
  require(o.manifest, "--manifest");
  return load_manifest(o.manifest);
}

std::optional<MetaModel> load_meta(const PipelineConfig& config) {
  if (config.meta_model.empty()) return std::nullopt;
  return meta_model_from_json(read_json_file(config.meta_model));
}

void emit(std::ostream& out, const json& doc) { out << doc.dump(1) << "\n"; }

// ---- subcommands -----------------------------------------------------------

int cmd_synth(const Options& o, std::ostream& out) {
  require(o.out_dir, "--out");
  const std::uint64_t seed = o.seed.value_or(1);
  SyntheticSpec spec;
  if (!o.spec.empty()) {
    spec = SyntheticSpec::from_json(read_json_file(o.spec));
    if (o.seed) spec.seed = seed;
  } else if (o.preset == "clean") {
    spec = SyntheticSpec::clean(seed);
  } else if (o.preset == "noisy") {
    spec = SyntheticSpec::noisy(seed);
  } else {
    throw Error(Errc::invalid_argument, "--preset must be clean or noisy");
  }
  if (o.videos) spec.videos = *o.videos;
  if (o.frames) spec.frames = *o.frames;
  const CorpusManifest m = generate_synthetic(spec, o.out_dir);
  const auto problems = validate_synthetic(m);
  emit(out, {{"manifest", (fs::path(o.out_dir) / "manifest.json").string()},
             {"videos", m.videos.size()},
             {"problems", problems}});
  return problems.empty() ? 0 : 1;
}

int cmd_train_meta(const Options& o, std::ostream& out) {
  const CorpusManifest m = need_manifest(o);
  require(o.out, "--out");
  const PipelineConfig config = resolve_config(opt_path(o.config), &m);
  const MetaExamples ex = collect_meta_examples(m, config);
  MetaModel model = train_meta(ex.features, ex.labels);
  model.cutoff = config.meta_cutoff;
  write_json_file(o.out, to_json(model));
  std::size_t positives = 0;
  for (auto l : ex.labels) positives += l == SegmentLabel::true_positive ? 1 : 0;
  emit(out, {{"model", o.out},
             {"examples", ex.labels.size()},
             {"true_positives", positives},
             {"skipped_off_road", ex.skipped_off_road}});
  return 0;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
  const CorpusManifest m = need_manifest(o);
  require(o.out, "--out");
  PipelineConfig config = resolve_config(opt_path(o.config), &m);
  std::vector<double> candidates = o.candidates;
  if (candidates.empty()) {
    const double K = m.num_classes();
    for (int i = 1; i < 20; ++i) candidates.push_back(-K + 2.0 * K * i / 20.0);
  }
  const auto meta = load_meta(config);
  config.anomaly_threshold = select_threshold(m, config, meta ? &*meta : nullptr, candidates);
  write_json_file(o.out, config.to_json());
  emit(out, {{"config", o.out}, {"anomaly_threshold", config.anomaly_threshold}});
  return 0;
}

int cmd_segment(const Options& o, std::ostream& out) {
  const CorpusManifest m = need_manifest(o);
  require(o.work, "--work");
  const WorkDir work{o.work};
  const PipelineConfig config = resolve_config(opt_path(o.config), &m);
  const auto meta = load_meta(config);
  std::size_t segments = 0;
  for (const auto& v : m.videos) {
    const VideoSegments vs = segment_video(m, v, config, meta ? &*meta : nullptr);
    for (const auto& f : vs.frames) segments += f.segments.size();
    write_segments(work.segments(v.id), vs, config);
  }
  emit(out, {{"videos", m.videos.size()}, {"segments", segments}, {"meta", meta.has_value()}});
  return 0;
}

int cmd_track(const Options& o, std::ostream& out) {
  const CorpusManifest m = need_manifest(o);
  require(o.work, "--work");
  const WorkDir work{o.work};
  const PipelineConfig config = resolve_config(opt_path(o.config), &m);
  std::vector<SequenceRecord> all;
  for (const auto& v : m.videos) {
    json found;
    const VideoSegments vs = read_segments(work.segments(v.id), &found);
    check_config(config.to_json(), found, work.segments(v.id).string(), o.force);
    auto seqs = track_video(vs, config);
    write_crop_images(v, seqs, work.sequence_root());
    write_sequences(work.sequences(v.id), v.id, seqs, config);
    all.insert(all.end(), seqs.begin(), seqs.end());
  }
  write_json_file(work.crops_sidecar(), crop_sidecar(all));
  emit(out, {{"sequences", all.size()}, {"crops", work.crops_sidecar().string()}});
  return 0;
}

int cmd_ingest(const Options& o, std::ostream& out) {
  const CorpusManifest m = need_manifest(o);
  require(o.work, "--work");
  const WorkDir work{o.work};
  const PipelineConfig config = resolve_config(opt_path(o.config), &m);
  std::unique_ptr<CropEncoder> encoder;
  if (!o.embeddings.empty()) {
    encoder = make_table_encoder(o.embeddings, o.crops.empty() ? work.crops_sidecar() : fs::path(o.crops));
  } else {
    bool has_tables = false;
    for (const auto& v : m.videos) has_tables |= !v.embeddings.empty();
    encoder = has_tables ? make_manifest_table_encoder(m) : make_content_encoder(m);
  }
  RetrievalIndex index;
  for (const auto& v : m.videos) {
    json found;
    auto seqs = read_sequences(work.sequences(v.id), &found);
    check_config(config.to_json(), found, work.sequences(v.id).string(), o.force);
    embed_sequences(seqs, *encoder);
    write_sequences(work.sequences(v.id), v.id, seqs, config);
    for (auto& s : seqs) index.ingest(std::move(s));
  }
  index.provenance = {{"config", config.to_json()}, {"sequence_root", "sequences"}};
  index.save(work.index());
  emit(out, {{"index", work.index().string()},
             {"sequences", index.size()},
             {"vectors", index.vector_count()},
             {"dimension", index.dimension()}});
  return 0;
}

std::vector<float> parse_vector(const std::string& text) {
  json doc;
  std::error_code ec;
  if (text.front() != '[' && fs::is_regular_file(text, ec)) {
    doc = read_json_file(text);
  } else {
    try {
      doc = json::parse(text.front() == '[' ? text : "[" + text + "]");
    } catch (const json::exception&) {
      throw Error(Errc::parse_error, "--vector must be a JSON array, a comma-separated list or a file");
    }
  }
  if (doc.is_object() && doc.contains("embedding")) doc = doc["embedding"];
  if (!doc.is_array()) throw Error(Errc::parse_error, "--vector must hold an array of numbers");
  std::vector<float> v;
  for (const auto& x : doc) {
    if (!x.is_number()) throw Error(Errc::parse_error, "--vector must hold an array of numbers");
    v.push_back(x.get<float>());
  }
  return v;
}

int cmd_query(const Options& o, std::ostream& out) {
  std::optional<CorpusManifest> m;
  if (!o.manifest.empty()) m = load_manifest(o.manifest);
  const PipelineConfig config = resolve_config(opt_path(o.config), m ? &*m : nullptr);
  const double tau = o.tau.value_or(config.tau);
  if (!(tau >= -1.0 && tau <= 1.0)) {
    throw Error(Errc::invalid_argument, "--tau must lie in [-1, 1], got " + std::to_string(tau));
  }
  if (o.top_k && *o.top_k == 0) throw Error(Errc::invalid_argument, "--top-k must be positive");
  if (o.term.empty() == o.vector.empty()) throw Error(Errc::invalid_argument, "give exactly one of --term or --vector");
  fs::path index_path = o.index;
  if (index_path.empty()) {
    require(o.work, "--index or --work");
    index_path = WorkDir{o.work}.index();
  }
  QueryEmbedding q;
  if (!o.term.empty()) {
    fs::path vocab = o.vocabulary;
    if (vocab.empty() && m) vocab = m->vocabulary;
    require(vocab.string(), "--vocabulary or --manifest");
    q = Vocabulary::load(vocab).resolve(o.term);
  } else {
    q.values = parse_vector(o.vector);
  }
  const RetrievalIndex index = RetrievalIndex::load(index_path);
  const auto results = index.query(q, tau, o.top_k, o.traces);
  if (o.format == "table") {
    out << std::left << std::setw(6) << "rank" << std::setw(24) << "sequence" << std::setw(12) << "score"
        << std::setw(8) << "length" << "best_crop\n";
    for (const auto& r : results) {
      std::ostringstream score;
      score << std::fixed << std::setprecision(6) << r.score;
      out << std::setw(6) << r.rank << std::setw(24) << r.sequence_id << std::setw(12) << score.str()
          << std::setw(8) << index.sequence(r.sequence_id)->length() << r.best_crop << "\n";
    }
  } else if (o.format == "json") {
    out << query_results_to_json(results, tau, o.traces).dump() << "\n";
  } else {
    throw Error(Errc::invalid_argument, "--format must be json or table");
  }
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const CorpusManifest m = need_manifest(o);
  require(o.work, "--work");
  const WorkDir work{o.work};
  const PipelineConfig config = resolve_config(opt_path(o.config), &m);
  const json expected = config.to_json();
  std::vector<VideoSegments> segments;
  for (const auto& v : m.videos) {
    json found;
    segments.push_back(read_segments(work.segments(v.id), &found));
    check_config(expected, found, work.segments(v.id).string(), o.force);
    read_sequences(work.sequences(v.id), &found);
    check_config(expected, found, work.sequences(v.id).string(), o.force);
  }
  const RetrievalIndex index = RetrievalIndex::load(work.index());
  const json prov = index.provenance.is_object() ? index.provenance.value("config", json()) : json();
  check_config(expected, prov, work.index().string(), o.force);
  require(m.vocabulary.string(), "manifest vocabulary");
  const Vocabulary vocab = Vocabulary::load(m.vocabulary);
  EvalInputs in;
  in.manifest = &m;
  in.config = &config;
  in.segments = &segments;
  in.index = &index;
  in.vocabulary = &vocab;
  const EvalReport report = evaluate(in);
  const fs::path out_path = o.out.empty() ? work.eval() : fs::path(o.out);
  const fs::path csv_path = o.csv.empty() ? work.curves() : fs::path(o.csv);
  write_json_file(out_path, to_json(report));
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << curves_csv(report.retrieval);
    if (!csv) throw Error(Errc::io_error, "cannot write " + csv_path.string());
  }
  emit(out, {{"report", out_path.string()},
             {"segmentation", {{"auprc", report.auprc}, {"fpr95", report.fpr95}, {"f1_bar", report.f1_bar}}},
             {"tracking", {{"mota", report.mota}, {"motp", report.motp}}},
             {"retrieval", {{"auprc", report.retrieval.auprc}}}});
  return 0;
}

HttpServer* g_server = nullptr;

int cmd_serve(const Options& o, std::ostream& out) {
  ServiceSources src;
  src.index = o.index;
  src.vocabulary = o.vocabulary;
  src.eval = o.eval;
  if (!o.work.empty()) {
    const WorkDir work{o.work};
    if (src.index.empty()) src.index = work.index();
    if (src.eval.empty() && fs::exists(work.eval())) src.eval = work.eval();
  }
  if (src.vocabulary.empty() && !o.manifest.empty()) src.vocabulary = load_manifest(o.manifest).vocabulary;
  if (!src.index.empty() && !fs::exists(src.index)) src.index.clear();
  std::string listen = o.listen;
  if (listen.empty()) {
    const char* env = std::getenv("OODRET_LISTEN");
    listen = env && *env ? env : "127.0.0.1:8080";
  }
  const auto [host, port] = parse_listen(listen);
  QueryService service(src);
  HttpServer server(service);
  const int bound = server.start(host, port);
  emit(out, {{"listening", host + ":" + std::to_string(bound)}, {"index_loaded", !src.index.empty()}});
  out.flush();
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.wait();
  g_server = nullptr;
  return 0;
}

void print_error(std::ostream& err, std::string_view code, const std::string& message, json extra = {}) {
  json e = {{"code", code}, {"message", message}};
  if (extra.is_object()) e.update(extra);
  err << json{{"error", e}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-of-distribution road obstacle segmentation, tracking and retrieval"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Pipeline config JSON");
  };
  auto with_corpus = [&](CLI::App* sub) {
    common(sub);
    sub->add_option("--manifest", o.manifest, "Corpus manifest");
    sub->add_option("--work", o.work, "Work directory for artifacts");
    sub->add_flag("--force", o.force, "Accept artifacts produced with another config");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  common(synth);
  synth->add_option("--out", o.out_dir, "Output directory")->required();
  synth->add_option("--preset", o.preset, "clean or noisy");
  synth->add_option("--spec", o.spec, "Synthetic spec JSON");
  synth->add_option("--seed", o.seed, "Random seed");
  synth->add_option("--videos", o.videos, "Number of videos");
  synth->add_option("--frames", o.frames, "Frames per video");

  auto* train = app.add_subcommand("train-meta", "Fit the meta-classifier on a labelled corpus");
  with_corpus(train);
  train->add_option("--out", o.out, "Model JSON")->required();

  auto* calibrate = app.add_subcommand("calibrate", "Pick the anomaly threshold with the best component F1");
  with_corpus(calibrate);
  calibrate->add_option("--out", o.out, "Config JSON to write")->required();
  calibrate->add_option("--candidates", o.candidates, "Thresholds to try");

  auto* segment = app.add_subcommand("segment", "Score, meta-filter and ROI-restrict every frame");
  with_corpus(segment);
  auto* track = app.add_subcommand("track", "Link segments into obstacle sequences");
  with_corpus(track);
  auto* ingest = app.add_subcommand("ingest", "Embed crops and build the index snapshot");
  with_corpus(ingest);
  ingest->add_option("--embeddings", o.embeddings, "N x d crop embedding tensor");
  ingest->add_option("--crops", o.crops, "Crop sidecar JSON for --embeddings");

  auto* query = app.add_subcommand("query", "Retrieve sequences for a term or vector");
  with_corpus(query);
  query->add_option("--index", o.index, "Index snapshot");
  query->add_option("--vocabulary", o.vocabulary, "Vocabulary JSON");
  query->add_option("--term", o.term, "Query term");
  query->add_option("--vector", o.vector, "Query vector: JSON array, comma list or file");
  query->add_option("--tau", o.tau, "Similarity threshold in [-1, 1]");
  query->add_option("--top-k", o.top_k, "Keep at most this many results");
  query->add_flag("--traces", o.traces, "Include per-crop similarities");
  query->add_option("--format", o.format, "json or table");

  auto* eval = app.add_subcommand("eval", "Evaluate segmentation, tracking and retrieval");
  with_corpus(eval);
  eval->add_option("--out", o.out, "Report JSON (default <work>/eval.json)");
  eval->add_option("--csv", o.csv, "PR curves CSV (default <work>/curves.csv)");

  auto* serve = app.add_subcommand("serve", "Start the HTTP query service");
  with_corpus(serve);
  serve->add_option("--index", o.index, "Index snapshot");
  serve->add_option("--vocabulary", o.vocabulary, "Vocabulary JSON");
  serve->add_option("--eval", o.eval, "Evaluation report JSON");
  serve->add_option("--listen", o.listen, "host:port (default $OODRET_LISTEN or 127.0.0.1:8080)");

  std::vector<const char*> argv{"oodret"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*train) return cmd_train_meta(o, out);
    if (*calibrate) return cmd_calibrate(o, out);
    if (*segment) return cmd_segment(o, out);
    if (*track) return cmd_track(o, out);
    if (*ingest) return cmd_ingest(o, out);
    if (*query) return cmd_query(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*serve) return cmd_serve(o, out);
  } catch (const UnknownTermError& e) {
    print_error(err, errc_name(e.code()), e.what(), {{"suggestions", e.suggestions()}});
    return 1;
  } catch (const Error& e) {
    print_error(err, errc_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
  return 2;
}

}  // namespace oodret
