#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "embprobe/clustering.hpp"
#include "embprobe/embedding_store.hpp"
#include "embprobe/query_engine.hpp"

namespace embprobe {

struct SynthConfig {
  std::size_t sentences = 500;
  std::size_t words_per_sentence = 10;
  std::uint32_t dim = 32;
  std::uint32_t modes = 10;
  std::uint32_t layers = 2;
  std::size_t vocab = 200;
  std::uint64_t seed = 7;
};

struct PipelineConfig {
  std::filesystem::path corpus;          // raw text, one sentence per line
  std::filesystem::path embeddings_dir;  // defaults to <out_dir>/embeddings
  std::filesystem::path out_dir = "run";
  std::vector<std::uint32_t> layers;     // empty: every layer in the catalog
  std::uint32_t k = kDefaultK;
  std::uint32_t restarts = kDefaultRestarts;
  std::uint64_t rng_seed = 0;
  double tol = kDefaultTol;
  std::uint32_t max_iters = kDefaultMaxIters;
  std::uint32_t max_span = kDefaultMaxSpan;
  std::uint32_t max_spacing = kDefaultMaxSpacing;
  double bandwidth = kDefaultBandwidth;
  std::string host = "127.0.0.1";
  int port = 8080;
  unsigned threads = 1;
  std::filesystem::path static_dir;
  SynthConfig synth;

  std::filesystem::path manifest_path() const { return out_dir / "manifest.json"; }
  std::filesystem::path embeddings_path() const {
    return embeddings_dir.empty() ? out_dir / "embeddings" : embeddings_dir;
  }
  std::filesystem::path model_path(std::uint32_t layer) const;
  std::filesystem::path stats_path(std::uint32_t layer) const;
  std::filesystem::path run_manifest_path() const { return out_dir / "run_manifest.json"; }

  // Throws ValidationError on out-of-range values.
  void validate() const;
};

// Reads a config document and overlays it on `base`. Unknown keys and type
// errors are ValidationErrors (checked against schema/config.schema.json).
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& config);

// Stages. Each writes its outputs atomically and records them, with content
// hashes and a config snapshot, in <out_dir>/run_manifest.json.
std::vector<Sentence> cmd_ingest(const PipelineConfig& config);
SyntheticData cmd_synth(const PipelineConfig& config);
ModelFile cmd_cluster(const PipelineConfig& config, std::uint32_t layer);
nlohmann::json cmd_stats(const PipelineConfig& config, std::uint32_t layer);

// Builds a query engine over every configured layer that has a model.
std::shared_ptr<QueryEngine> load_engine(const PipelineConfig& config);

// Layers the stage should process: config.layers, or every catalog layer.
std::vector<std::uint32_t> resolve_layers(const PipelineConfig& config);

// Called with the bound port once the server is accepting requests. The
// server stops when the callback returns false; returning true keeps serving
// until the process is interrupted.
using ServeHook = std::function<bool(int port)>;

void cmd_serve(const PipelineConfig& config, const ServeHook& on_ready = {});

// ingest (or synth when no corpus is configured) -> cluster -> stats -> serve.
void cmd_all(const PipelineConfig& config, const ServeHook& on_ready = {});

}  // namespace embprobe
