#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "embprobe/query_engine.hpp"

namespace httplib {
class Server;
}

namespace embprobe {

// JSON views of query results. Field names are fixed by schema/api.schema.json.
nlohmann::json layers_json(const QueryEngine& engine);
nlohmann::json membership_brush_json(std::uint32_t layer, const MembershipBrush& brush,
                                     const MembershipBrushResult& result,
                                     const LayerStatistics& stats);
nlohmann::json span_brush_json(std::uint32_t layer, const SpanBrush& brush,
                               const SpanBrushResult& result, const LayerStatistics& stats);
nlohmann::json sentences_json(std::uint32_t layer, const CellSelection& selection,
                              const SentencePage& page);
nlohmann::json error_json(const std::string& message);

// Request decoding. Throws QueryError on malformed input.
MembershipBrush parse_membership_brush(const nlohmann::json& body);
SpanBrush parse_span_brush(const nlohmann::json& body);
Brush parse_brush(const nlohmann::json& body);  // {"type": "membership"|"span", ...} or null

struct SentenceRequest {
  CellSelection selection;
  std::size_t page = 0;
  std::size_t page_size = kDefaultPageSize;
};
SentenceRequest parse_sentence_request(const nlohmann::json& body);

// Handles one API call given method, path, query `top` value and body. Used by
// the HTTP server and directly by tests and bindings. Returns (status, body).
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};
ApiResponse handle_request(const QueryEngine& engine, const std::string& method,
                           const std::string& path, const std::string& top_param,
                           const std::string& body);

// HTTP front end over a QueryEngine.
//   GET  /layers
//   GET  /layers/{n}/stats?top=N
//   POST /layers/{n}/brush/membership   {cluster, lo, hi}
//   POST /layers/{n}/brush/span         {cluster, lo, hi}
//   POST /layers/{n}/sentences          {left, right, spacing, brush?, page, page_size}
class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<const QueryEngine> engine);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Serves files under `dir` at "/" (the UI bundle). Returns false if missing.
  bool mount_static(const std::filesystem::path& dir);

  // Binds and returns the bound port; port 0 picks a free one. Throws IoError.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void run();
  void stop();
  bool running() const;
  void wait_until_ready() const;

 private:
  std::shared_ptr<const QueryEngine> engine_;
  std::unique_ptr<httplib::Server> server_;
};

struct EndpointCheck {
  std::string endpoint;
  int status = 0;
  std::vector<std::string> schema_errors;
  nlohmann::json body;

  bool ok() const { return status == 200 && schema_errors.empty(); }
};

// Calls all five endpoints of a running server over HTTP and validates each
// payload against the API schema. Request parameters are derived from the
// first layer's statistics.
std::vector<EndpointCheck> probe_endpoints(const std::string& host, int port);

}  // namespace embprobe
