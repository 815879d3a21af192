#include "embprobe/api.hpp"

#include <httplib.h>

#include <charconv>
#include <regex>

#include "embprobe/error.hpp"
#include "embprobe/schema.hpp"

namespace embprobe {

using json = nlohmann::json;

namespace {

json tensor_triples(const CooccurrenceTensor& t) {
  json out = json::array();
  for (Label a = 0; a < t.k; ++a) {
    for (Label b = 0; b < t.k; ++b) {
      for (std::uint32_t s = 0; s <= t.max_spacing; ++s) {
        if (const auto c = t.at(a, b, s); c > 0) out.push_back({a, b, s, c});
      }
    }
  }
  return out;
}

template <typename T>
T field(const json& body, const char* name) {
  if (!body.is_object() || !body.contains(name)) {
    throw QueryError(std::string("missing field '") + name + "'");
  }
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw QueryError(std::string("field '") + name + "' has the wrong type");
  }
}

std::uint32_t cluster_field(const json& body, const char* name) {
  const auto v = field<std::int64_t>(body, name);
  if (v < 0 || v > std::numeric_limits<Label>::max()) {
    throw QueryError(std::string("field '") + name + "' out of range");
  }
  return static_cast<std::uint32_t>(v);
}

std::uint32_t count_field(const json& body, const char* name) {
  const auto v = field<std::int64_t>(body, name);
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max()) {
    throw QueryError(std::string("field '") + name + "' out of range");
  }
  return static_cast<std::uint32_t>(v);
}

std::uint32_t parse_layer(const std::string& text) {
  std::uint32_t n = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw QueryError("bad layer '" + text + "'");
  }
  return n;
}

json brush_json(const Brush& brush) {
  if (const auto* m = std::get_if<MembershipBrush>(&brush)) {
    return {{"type", "membership"}, {"cluster", m->cluster}, {"lo", m->lo}, {"hi", m->hi}};
  }
  if (const auto* s = std::get_if<SpanBrush>(&brush)) {
    return {{"type", "span"}, {"cluster", s->cluster}, {"lo", s->lo}, {"hi", s->hi}};
  }
  return nullptr;
}

}  // namespace

json error_json(const std::string& message) {
  return {{"schema_version", kSchemaVersion}, {"error", message}};
}

json layers_json(const QueryEngine& engine) {
  json layers = json::array();
  for (const auto& l : engine.list_layers()) {
    layers.push_back({{"layer", l.layer}, {"k", l.k}, {"records", l.records}});
  }
  return {{"schema_version", kSchemaVersion}, {"model", engine.model_name()}, {"layers", layers}};
}

json membership_brush_json(std::uint32_t layer, const MembershipBrush& brush,
                           const MembershipBrushResult& result, const LayerStatistics& stats) {
  json words = json::array();
  for (auto t : result.words) words.push_back(stats.membership.type(t));
  json hist = json::array();
  for (Label l = 0; l < result.histograms.size(); ++l) {
    hist.push_back({{"cluster", l}, {"counts", result.histograms[l]}});
  }
  return {{"schema_version", kSchemaVersion},
          {"layer", layer},
          {"brush", brush_json(brush)},
          {"words", words},
          {"histograms", hist},
          {"cooccurrence", tensor_triples(result.overlay)}};
}

json span_brush_json(std::uint32_t layer, const SpanBrush& brush, const SpanBrushResult& result,
                     const LayerStatistics& stats) {
  json row = json::array();
  const std::uint32_t width = stats.options.max_spacing + 1;
  for (std::size_t i = 0; i < result.row.size(); ++i) {
    if (result.row[i] > 0) {
      row.push_back({static_cast<std::uint32_t>(i / width), static_cast<std::uint32_t>(i % width),
                     result.row[i]});
    }
  }
  return {{"schema_version", kSchemaVersion},
          {"layer", layer},
          {"brush", brush_json(brush)},
          {"cluster", result.cluster},
          {"row", row}};
}

json sentences_json(std::uint32_t layer, const CellSelection& sel, const SentencePage& page) {
  json hits = json::array();
  for (const auto& h : page.hits) {
    json phrases = json::array();
    for (const auto& p : h.phrases) {
      phrases.push_back({{"cluster", p.cluster}, {"start", p.start}, {"end", p.end}});
    }
    json matches = json::array();
    for (const auto& [a, b] : h.matches) matches.push_back({a, b});
    hits.push_back({{"sentence_id", h.sentence_id},
                    {"words", h.words},
                    {"labels", h.labels},
                    {"phrases", phrases},
                    {"matches", matches},
                    {"highlight", matches.front()}});
  }
  return {{"schema_version", kSchemaVersion},
          {"layer", layer},
          {"left", sel.left},
          {"right", sel.right},
          {"spacing", sel.spacing},
          {"brush", brush_json(sel.brush)},
          {"total", page.total},
          {"page", page.page},
          {"page_size", page.page_size},
          {"sentences", hits}};
}

MembershipBrush parse_membership_brush(const json& body) {
  MembershipBrush b;
  b.cluster = cluster_field(body, "cluster");
  b.lo = field<double>(body, "lo");
  b.hi = field<double>(body, "hi");
  return b;
}

SpanBrush parse_span_brush(const json& body) {
  SpanBrush b;
  b.cluster = cluster_field(body, "cluster");
  b.lo = count_field(body, "lo");
  b.hi = count_field(body, "hi");
  return b;
}

Brush parse_brush(const json& body) {
  if (body.is_null()) return std::monostate{};
  const auto type = field<std::string>(body, "type");
  if (type == "membership") return parse_membership_brush(body);
  if (type == "span") return parse_span_brush(body);
  throw QueryError("unknown brush type '" + type + "'");
}

SentenceRequest parse_sentence_request(const json& body) {
  SentenceRequest r;
  r.selection.left = cluster_field(body, "left");
  r.selection.right = cluster_field(body, "right");
  r.selection.spacing = count_field(body, "spacing");
  if (body.contains("brush")) r.selection.brush = parse_brush(body.at("brush"));
  if (body.contains("page")) r.page = count_field(body, "page");
  if (body.contains("page_size")) r.page_size = count_field(body, "page_size");
  return r;
}

ApiResponse handle_request(const QueryEngine& engine, const std::string& method,
                           const std::string& path, const std::string& top_param,
                           const std::string& body) {
  static const std::regex kStats(R"(^/layers/([0-9]+)/stats$)");
  static const std::regex kMembership(R"(^/layers/([0-9]+)/brush/membership$)");
  static const std::regex kSpan(R"(^/layers/([0-9]+)/brush/span$)");
  static const std::regex kSentences(R"(^/layers/([0-9]+)/sentences$)");
  std::smatch m;
  try {
    auto parse_body = [&]() {
      try {
        return json::parse(body.empty() ? std::string("{}") : body);
      } catch (const json::exception& e) {
        throw QueryError(std::string("invalid JSON body: ") + e.what());
      }
    };
    if (method == "GET" && path == "/layers") return {200, layers_json(engine)};
    if (method == "GET" && std::regex_match(path, m, kStats)) {
      std::size_t top = 0;
      if (!top_param.empty()) {
        const auto [p, ec] =
            std::from_chars(top_param.data(), top_param.data() + top_param.size(), top);
        if (ec != std::errc() || p != top_param.data() + top_param.size() || top == 0) {
          throw QueryError("top must be a positive integer");
        }
      }
      return {200, engine.get_statistics(parse_layer(m[1]), top)};
    }
    if (method == "POST" && std::regex_match(path, m, kMembership)) {
      const auto layer = parse_layer(m[1]);
      const auto brush = parse_membership_brush(parse_body());
      const auto st = engine.layer(layer);
      return {200, membership_brush_json(layer, brush, engine.apply_membership_brush(layer, brush), *st)};
    }
    if (method == "POST" && std::regex_match(path, m, kSpan)) {
      const auto layer = parse_layer(m[1]);
      const auto brush = parse_span_brush(parse_body());
      const auto st = engine.layer(layer);
      return {200, span_brush_json(layer, brush, engine.apply_span_brush(layer, brush), *st)};
    }
    if (method == "POST" && std::regex_match(path, m, kSentences)) {
      const auto layer = parse_layer(m[1]);
      const auto req = parse_sentence_request(parse_body());
      return {200, sentences_json(layer, req.selection,
                                  engine.select_cell(layer, req.selection, req.page, req.page_size))};
    }
    return {404, error_json("no route for " + method + " " + path)};
  } catch (const QueryError& e) {
    const bool unknown_layer = std::string_view(e.what()).starts_with("unknown layer");
    return {unknown_layer ? 404 : 400, error_json(e.what())};
  }
}

ApiServer::ApiServer(std::shared_ptr<const QueryEngine> engine)
    : engine_(std::move(engine)), server_(std::make_unique<httplib::Server>()) {
  // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    const std::string top = req.has_param("top") ? req.get_param_value("top") : std::string();
    ApiResponse r;
    try {
      r = handle_request(*engine_, req.method, req.path, top, req.body);
    } catch (const std::exception& e) {
      r = {500, error_json(e.what())};
    }
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(R"(/layers)", dispatch);
  server_->Get(R"(/layers/\d+/stats)", dispatch);
  server_->Post(R"(/layers/\d+/brush/(membership|span))", dispatch);
  server_->Post(R"(/layers/\d+/sentences)", dispatch);
}

ApiServer::~ApiServer() { stop(); }

bool ApiServer::mount_static(const std::filesystem::path& dir) {
  return server_->set_mount_point("/", dir.string());
}

int ApiServer::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (server_->bind_to_port(host, port)) {
    bound = port;
  }
  if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ApiServer::run() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

bool ApiServer::running() const { return server_->is_running(); }

void ApiServer::wait_until_ready() const { server_->wait_until_ready(); }

std::vector<EndpointCheck> probe_endpoints(const std::string& host, int port) {
  httplib::Client client(host, port);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  std::vector<EndpointCheck> out;

  auto record = [&](const std::string& endpoint, const std::string& definition,
                    const httplib::Result& res) -> const json* {
    EndpointCheck c;
    c.endpoint = endpoint;
    if (!res) {
      c.schema_errors.push_back("no response: " + httplib::to_string(res.error()));
      out.push_back(std::move(c));
      return nullptr;
    }
    c.status = res->status;
    try {
      c.body = json::parse(res->body);
      c.schema_errors = api_payload_errors(res->status == 200 ? definition : "error", c.body);
    } catch (const json::exception& e) {
      c.schema_errors.push_back(std::string("invalid JSON: ") + e.what());
    }
    out.push_back(std::move(c));
    return out.back().ok() ? &out.back().body : nullptr;
  };

  const json* layers = record("GET /layers", "layers", client.Get("/layers"));
  if (!layers || (*layers)["layers"].empty()) return out;
  const auto layer = (*layers)["layers"][0]["layer"].get<std::uint32_t>();
  const std::string base = "/layers/" + std::to_string(layer);

  const json* stats = record("GET " + base + "/stats", "stats", client.Get(base + "/stats?top=5"));
  if (!stats) return out;
  const json stats_copy = *stats;
  const auto anchor = stats_copy["priority"][0].get<std::uint32_t>();
  const auto max_span = stats_copy["max_span"].get<std::uint32_t>();

  const json mb = {{"cluster", anchor}, {"lo", 0.5}, {"hi", 1.0}};
  record("POST " + base + "/brush/membership", "membership_brush",
         client.Post(base + "/brush/membership", mb.dump(), "application/json"));
  const json sb = {{"cluster", anchor}, {"lo", 1}, {"hi", max_span}};
  record("POST " + base + "/brush/span", "span_brush",
         client.Post(base + "/brush/span", sb.dump(), "application/json"));

  json sel = {{"left", anchor}, {"right", anchor}, {"spacing", 1}, {"page", 0}, {"page_size", 5}};
  if (!stats_copy["cooccurrence"].empty()) {
    const auto& t = stats_copy["cooccurrence"][0];
    sel["left"] = t[0];
    sel["right"] = t[1];
    sel["spacing"] = t[2];
  }
  record("POST " + base + "/sentences", "sentences",
         client.Post(base + "/sentences", sel.dump(), "application/json"));
  return out;
}

}  // namespace embprobe
