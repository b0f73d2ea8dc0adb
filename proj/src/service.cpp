#include "oodret/service.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "oodret/manifest.hpp"
#include "oodret/rle.hpp"

namespace oodret {

using nlohmann::json;

namespace {

HttpResponse json_response(int status, const json& doc) { return {status, "application/json", doc.dump()}; }

HttpResponse error_response(int status, std::string_view code, const std::string& message, json extra = {}) {
  json err = {{"code", code}, {"message", message}};
  if (extra.is_object()) err.update(extra);
  return json_response(status, {{"error", std::move(err)}});
}

HttpResponse bad_request(const std::string& field, const std::string& message) {
  return error_response(400, "invalid_argument", field + ": " + message, {{"field", field}});
}

int status_for(Errc code) {
  switch (code) {
    case Errc::unknown_sequence:
    case Errc::unknown_term:
      return 404;
    case Errc::invalid_argument:
    case Errc::dimension_mismatch:
    case Errc::zero_vector:
    case Errc::parse_error:
      return 400;
    default:
      return 500;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

}  // namespace

QueryService::QueryService(ServiceSources sources) { reload(std::move(sources)); }

std::shared_ptr<const QueryService::Snapshot> QueryService::build(const ServiceSources& sources) {
  auto snap = std::make_shared<Snapshot>();
  if (!sources.index.empty()) {
    snap->index = RetrievalIndex::load(sources.index);
    const auto& prov = snap->index->provenance;
    fs::path root = prov.is_object() ? fs::path(prov.value("sequence_root", std::string{})) : fs::path();
    if (!root.empty() && root.is_relative()) root = sources.index.parent_path() / root;
    snap->sequence_root = root;
  }
  if (!sources.vocabulary.empty()) snap->vocabulary = Vocabulary::load(sources.vocabulary);
  if (!sources.eval.empty() && fs::exists(sources.eval)) snap->eval = read_json_file(sources.eval);
  return snap;
}

void QueryService::reload() {
  ServiceSources sources;
  {
    std::lock_guard lock(mutex_);
    sources = sources_;
  }
  reload(std::move(sources));
}

void QueryService::reload(ServiceSources sources) {
  auto snap = build(sources);
  std::lock_guard lock(mutex_);
  sources_ = std::move(sources);
  snapshot_ = std::move(snap);
}

std::shared_ptr<const QueryService::Snapshot> QueryService::current() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

HttpResponse QueryService::handle(const std::string& method, const std::string& path, const std::string& body) const {
  const auto snap = current();
  const auto parts = split_path(path.substr(0, path.find('?')));
  try {
    if (method == "POST" && parts == std::vector<std::string>{"query"}) return query(*snap, body);
    if (method == "POST" && parts == std::vector<std::string>{"reload"}) {
      const_cast<QueryService*>(this)->reload();
      return json_response(200, {{"status", "reloaded"}});
    }
    if (method == "GET" && parts.size() == 1 && parts[0] == "health") {
      json doc = {{"status", "ok"}, {"version", kServiceVersion}, {"index_loaded", snap->index.has_value()}};
      if (snap->index) {
        doc["index"] = {{"sequences", snap->index->size()},
                        {"vectors", snap->index->vector_count()},
                        {"dimension", snap->index->dimension()}};
      }
      doc["vocabulary_terms"] = snap->vocabulary.terms().size();
      doc["eval_loaded"] = snap->eval.has_value();
      return json_response(200, doc);
    }
    if (method == "GET" && parts.size() == 1 && parts[0] == "vocabulary") {
      return json_response(200, {{"terms", snap->vocabulary.terms()}, {"dimension", snap->vocabulary.dimension()}});
    }
    if (method == "GET" && parts.size() == 1 && parts[0] == "eval") {
      if (!snap->eval) return error_response(404, "missing_file", "no evaluation report loaded");
      return json_response(200, *snap->eval);
    }
    if (method == "GET" && parts.size() == 2 && parts[0] == "sequences") return sequence(*snap, parts[1]);
    if (method == "GET" && parts.size() == 4 && parts[0] == "sequences" && parts[2] == "crops") {
      return crop(*snap, parts[1], parts[3]);
    }
    return error_response(404, "not_found", method + " " + path + " is not an endpoint");
  } catch (const UnknownTermError& e) {
    return error_response(404, errc_name(e.code()), e.what(), {{"suggestions", e.suggestions()}});
  } catch (const Error& e) {
    return error_response(status_for(e.code()), errc_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

HttpResponse QueryService::query(const Snapshot& snap, const std::string& body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    return bad_request("body", std::string("not valid JSON: ") + e.what());
  }
  if (!req.is_object()) return bad_request("body", "expected a JSON object");
  const bool has_term = req.contains("term");
  const bool has_vec = req.contains("embedding");
  if (has_term == has_vec) return bad_request("term", "give exactly one of term or embedding");

  double tau = 0.25;
  if (req.contains("tau")) {
    if (!req["tau"].is_number()) return bad_request("tau", "must be a number");
    tau = req["tau"].get<double>();
    if (!(tau >= -1.0 && tau <= 1.0)) return bad_request("tau", "must lie in [-1, 1]");
  }
  std::optional<std::size_t> top_k;
  if (req.contains("top_k") && !req["top_k"].is_null()) {
    if (!req["top_k"].is_number_integer() || req["top_k"].get<long long>() < 1) {
      return bad_request("top_k", "must be a positive integer");
    }
    top_k = req["top_k"].get<std::size_t>();
  }
  bool traces = true;
  if (req.contains("traces")) {
    if (!req["traces"].is_boolean()) return bad_request("traces", "must be a boolean");
    traces = req["traces"].get<bool>();
  }

  QueryEmbedding q;
  if (has_term) {
    if (!req["term"].is_string()) return bad_request("term", "must be a string");
    if (snap.vocabulary.empty()) return error_response(409, "missing_file", "no vocabulary loaded");
    q = snap.vocabulary.resolve(req["term"].get<std::string>());
  } else {
    const auto& e = req["embedding"];
    if (!e.is_array() || e.empty()) return bad_request("embedding", "must be a non-empty array of numbers");
    for (const auto& v : e) {
      if (!v.is_number()) return bad_request("embedding", "must be a non-empty array of numbers");
      q.values.push_back(v.get<float>());
    }
  }
  if (!snap.index) return error_response(409, "missing_file", "no index loaded");
  if (q.values.size() != snap.index->dimension()) {
    return bad_request(has_term ? "term" : "embedding",
                       "dimension " + std::to_string(q.values.size()) + " does not match index dimension " +
                           std::to_string(snap.index->dimension()));
  }
  const auto results = snap.index->query(q, tau, top_k, traces);
  return {200, "application/json", query_results_to_json(results, tau, traces).dump() + "\n"};
}

HttpResponse QueryService::sequence(const Snapshot& snap, const std::string& id) const {
  if (!snap.index) return error_response(409, "missing_file", "no index loaded");
  const auto rec = snap.index->sequence(id);
  if (!rec) return error_response(404, "unknown_sequence", "unknown sequence '" + id + "'");
  return json_response(200, to_json(*rec, false));
}

HttpResponse QueryService::crop(const Snapshot& snap, const std::string& id, const std::string& n) const {
  if (!snap.index) return error_response(409, "missing_file", "no index loaded");
  const auto rec = snap.index->sequence(id);
  if (!rec) return error_response(404, "unknown_sequence", "unknown sequence '" + id + "'");
  std::size_t pos = 0;
  const auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), pos);
  if (ec != std::errc() || ptr != n.data() + n.size()) return bad_request("n", "crop number must be an integer");
  if (pos >= rec->crops.size()) {
    return error_response(404, "out_of_bounds",
                          "sequence '" + id + "' has " + std::to_string(rec->crops.size()) + " crops");
  }
  const auto& name = rec->crops[pos].image;
  if (name.empty() || snap.sequence_root.empty()) return error_response(404, "missing_file", "crop has no image");
  const fs::path file = snap.sequence_root / id / name;
  std::ifstream in(file, std::ios::binary);
  if (!in) return error_response(404, "missing_file", "crop image " + file.string() + " not found");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return {200, "image/bmp", bytes.str()};
}

std::pair<std::string, int> parse_listen(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(Errc::invalid_argument, "listen address must be host:port, got '" + text + "'");
  }
  int port = -1;
  const std::string p = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
  if (ec != std::errc() || ptr != p.data() + p.size() || port < 0 || port > 65535) {
    throw Error(Errc::invalid_argument, "bad port in listen address '" + text + "'");
  }
  return {text.substr(0, colon), port};
}

HttpServer::HttpServer(QueryService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = service_.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server_->Get(R"(/.*)", forward);
  server_->Post(R"(/.*)", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(Errc::io_error, "cannot listen on " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void HttpServer::wait() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace oodret
