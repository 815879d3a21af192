#include "embprobe/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <regex>
#include <thread>

#include "embprobe/api.hpp"
#include "embprobe/error.hpp"
#include "embprobe/io_util.hpp"
#include "embprobe/layer_stats.hpp"
#include "embprobe/schema.hpp"

namespace embprobe {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Exclusive advisory lock on a sidecar file, held for the object's lifetime.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError("cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::string relative_to(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  auto rel = fs::relative(p, base, ec);
  return (ec || rel.empty()) ? p.generic_string() : rel.generic_string();
}

void record_artifacts(const PipelineConfig& config, const std::string& stage,
                      std::optional<std::uint32_t> layer, const std::vector<fs::path>& paths) {
  const auto manifest = config.run_manifest_path();
  fs::path lock_path = manifest;
  lock_path += ".lock";
  FileLock lock(lock_path);

  json doc = {{"schema_version", kSchemaVersion}, {"artifacts", json::array()}};
  if (fs::exists(manifest)) {
    try {
      doc = json::parse(read_file(manifest));
    } catch (const json::exception&) {
      throw ValidationError("run manifest " + manifest.string() + " is not valid JSON");
    }
  }
  auto& artifacts = doc["artifacts"];
  for (const auto& p : paths) {
    json entry = {{"stage", stage},
                  {"path", relative_to(p, config.out_dir)},
                  {"sha256", sha256_file(p)},
                  {"bytes", fs::file_size(p)},
                  {"config", config_to_json(config)}};
    if (layer) entry["layer"] = *layer;
    auto it = std::find_if(artifacts.begin(), artifacts.end(),
                           [&](const json& a) { return a.at("path") == entry["path"]; });
    if (it != artifacts.end()) {
      *it = entry;
    } else {
      artifacts.push_back(entry);
    }
  }
  write_file_atomic(manifest, doc.dump(2) + "\n");
}

std::vector<Sentence> require_manifest(const PipelineConfig& config) {
  const auto path = config.manifest_path();
  if (!fs::exists(path)) {
    throw IoError("missing corpus manifest " + path.string() + "; run ingest or synth first");
  }
  return read_manifest(path);
}

std::string stats_file_name(std::uint32_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer_%02u.json", layer);
  return buf;
}

StatsOptions stats_options(const PipelineConfig& c) {
  return {c.max_span, c.max_spacing, c.bandwidth};
}

std::shared_ptr<const LayerStatistics> layer_statistics(
    const PipelineConfig& config, std::shared_ptr<const std::vector<Sentence>> corpus,
    std::uint32_t layer) {
  const auto path = config.model_path(layer);
  if (!fs::exists(path)) {
    throw IoError("missing model for layer " + std::to_string(layer) + " (" + path.string() +
                  "); run cluster first");
  }
  auto model = read_model(path);
  if (model.labels.size() != token_count(*corpus)) {
    throw FormatError(FormatErrorCode::kCountMismatch,
                      path.string() + ": " + std::to_string(model.labels.size()) +
                          " labels for " + std::to_string(token_count(*corpus)) + " tokens");
  }
  Assignments a{model.model.k, std::move(model.labels)};
  return std::make_shared<const LayerStatistics>(
      compute_layer_statistics(std::move(corpus), std::move(a), layer, stats_options(config)));
}

template <typename T>
void take(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

fs::path PipelineConfig::model_path(std::uint32_t layer) const {
  return out_dir / "models" / model_file_name(layer);
}

fs::path PipelineConfig::stats_path(std::uint32_t layer) const {
  return out_dir / "stats" / stats_file_name(layer);
}

void PipelineConfig::validate() const {
  if (k < 1 || k > 65535) throw ValidationError("k must be in [1, 65535]");
  if (restarts < 1) throw ValidationError("restarts must be at least 1");
  if (max_iters < 1) throw ValidationError("max_iters must be at least 1");
  if (!(tol >= 0.0)) throw ValidationError("tol must be non-negative");
  if (max_span < 1) throw ValidationError("max_span must be at least 1");
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  if (port < 0 || port > 65535) throw ValidationError("port must be in [0, 65535]");
  if (threads < 1) throw ValidationError("threads must be at least 1");
  if (out_dir.empty()) throw ValidationError("out_dir must be set");
}

PipelineConfig config_from_json(const json& doc, PipelineConfig c) {
  const auto errors = schema_errors(config_schema(), doc);
  if (!errors.empty()) {
    std::string msg = "config: ";
    for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
    throw ValidationError(msg);
  }
  if (doc.contains("corpus")) c.corpus = doc["corpus"].get<std::string>();
  if (doc.contains("embeddings_dir")) c.embeddings_dir = doc["embeddings_dir"].get<std::string>();
  if (doc.contains("out_dir")) c.out_dir = doc["out_dir"].get<std::string>();
  if (doc.contains("static_dir")) c.static_dir = doc["static_dir"].get<std::string>();
  take(doc, "layers", c.layers);
  take(doc, "k", c.k);
  take(doc, "restarts", c.restarts);
  take(doc, "rng_seed", c.rng_seed);
  take(doc, "tol", c.tol);
  take(doc, "max_iters", c.max_iters);
  take(doc, "max_span", c.max_span);
  take(doc, "max_spacing", c.max_spacing);
  take(doc, "bandwidth", c.bandwidth);
  take(doc, "host", c.host);
  take(doc, "port", c.port);
  take(doc, "threads", c.threads);
  if (doc.contains("synth")) {
    const auto& sy = doc["synth"];
    take(sy, "sentences", c.synth.sentences);
    take(sy, "words_per_sentence", c.synth.words_per_sentence);
    take(sy, "dim", c.synth.dim);
    take(sy, "modes", c.synth.modes);
    take(sy, "layers", c.synth.layers);
    take(sy, "vocab", c.synth.vocab);
    take(sy, "seed", c.synth.seed);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path, PipelineConfig base) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, std::move(base));
}

json config_to_json(const PipelineConfig& c) {
  return {{"corpus", c.corpus.generic_string()},
          {"embeddings_dir", c.embeddings_path().generic_string()},
          {"out_dir", c.out_dir.generic_string()},
          {"layers", c.layers},
          {"k", c.k},
          {"restarts", c.restarts},
          {"rng_seed", c.rng_seed},
          {"tol", c.tol},
          {"max_iters", c.max_iters},
          {"max_span", c.max_span},
          {"max_spacing", c.max_spacing},
          {"bandwidth", c.bandwidth},
          {"host", c.host},
          {"port", c.port},
          {"threads", c.threads},
          {"static_dir", c.static_dir.generic_string()},
          {"synth",
           {{"sentences", c.synth.sentences},
            {"words_per_sentence", c.synth.words_per_sentence},
            {"dim", c.synth.dim},
            {"modes", c.synth.modes},
            {"layers", c.synth.layers},
            {"vocab", c.synth.vocab},
            {"seed", c.synth.seed}}}};
}

std::vector<Sentence> cmd_ingest(const PipelineConfig& config) {
  config.validate();
  if (config.corpus.empty()) throw ValidationError("ingest: no corpus path configured");
  if (!fs::exists(config.corpus)) throw IoError("corpus not found: " + config.corpus.string());
  auto sentences = load_corpus_file(config.corpus);
  write_manifest(sentences, config.manifest_path());
  record_artifacts(config, "ingest", std::nullopt, {config.manifest_path()});
  return sentences;
}

SyntheticData cmd_synth(const PipelineConfig& config) {
  config.validate();
  SyntheticParams p;
  p.num_sentences = config.synth.sentences;
  p.words_per_sentence = config.synth.words_per_sentence;
  p.dim = config.synth.dim;
  p.num_modes = config.synth.modes;
  p.num_layers = config.synth.layers;
  p.vocab_size = config.synth.vocab;
  p.seed = config.synth.seed;
  auto data = generate_synthetic(p);

  std::vector<fs::path> written;
  try {
    write_manifest(data.sentences, config.manifest_path());
    written.push_back(config.manifest_path());
    LayerCatalog catalog;
    catalog.model = "synthetic";
    catalog.num_layers = p.num_layers;
    catalog.dim = p.dim;
    const auto dir = config.embeddings_path();
    for (const auto& set : data.layers) {
      const auto path = dir / embedding_file_name(set.layer());
      write_embeddings(set, path);
      written.push_back(path);
      catalog.layers.push_back({set.layer(), embedding_file_name(set.layer()), set.size()});
    }
    write_catalog(catalog, dir / kCatalogFileName);
    written.push_back(dir / kCatalogFileName);
  } catch (...) {
    std::error_code ec;
    for (const auto& p2 : written) fs::remove(p2, ec);
    throw;
  }
  record_artifacts(config, "synth", std::nullopt, written);
  return data;
}

ModelFile cmd_cluster(const PipelineConfig& config, std::uint32_t layer) {
  config.validate();
  const auto corpus = require_manifest(config);
  const auto emb_path = config.embeddings_path() / embedding_file_name(layer);
  if (!fs::exists(emb_path)) {
    throw IoError("missing embeddings for layer " + std::to_string(layer) + " (" +
                  emb_path.string() + ")");
  }
  const auto set = read_embeddings(emb_path, std::span<const Sentence>(corpus));
  FitOptions opts;
  opts.k = config.k;
  opts.restarts = config.restarts;
  opts.rng_seed = config.rng_seed;
  opts.lloyd.max_iters = config.max_iters;
  opts.lloyd.tol = config.tol;
  opts.lloyd.num_threads = config.threads;
  auto best = fit_best_of(set, opts).best;
  ModelFile file{std::move(best.model), std::move(best.labels)};
  write_model(file, config.model_path(layer));
  record_artifacts(config, "cluster", layer, {config.model_path(layer)});
  return file;
}

json cmd_stats(const PipelineConfig& config, std::uint32_t layer) {
  config.validate();
  auto corpus = std::make_shared<const std::vector<Sentence>>(require_manifest(config));
  const auto stats = layer_statistics(config, corpus, layer);
  auto bundle = statistics_bundle(*stats);
  write_file_atomic(config.stats_path(layer), bundle.dump() + "\n");
  record_artifacts(config, "stats", layer, {config.stats_path(layer)});
  return bundle;
}

std::vector<std::uint32_t> resolve_layers(const PipelineConfig& config) {
  if (!config.layers.empty()) return config.layers;
  const auto catalog_path = config.embeddings_path() / kCatalogFileName;
  std::vector<std::uint32_t> out;
  if (fs::exists(catalog_path)) {
    for (const auto& e : read_catalog(catalog_path).layers) out.push_back(e.layer);
  } else if (fs::exists(config.out_dir / "models")) {
    static const std::regex kModel(R"(^layer_([0-9]+)\.model$)");
    for (const auto& entry : fs::directory_iterator(config.out_dir / "models")) {
      std::smatch m;
      const auto name = entry.path().filename().string();
      if (std::regex_match(name, m, kModel)) out.push_back(static_cast<std::uint32_t>(std::stoul(m[1])));
    }
  }
  if (out.empty()) {
    throw ValidationError("no layers configured and no catalog or models found under " +
                          config.out_dir.string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::shared_ptr<QueryEngine> load_engine(const PipelineConfig& config) {
  config.validate();
  auto corpus = std::make_shared<const std::vector<Sentence>>(require_manifest(config));
  std::string model_name = "unknown";
  const auto catalog_path = config.embeddings_path() / kCatalogFileName;
  if (fs::exists(catalog_path)) model_name = read_catalog(catalog_path).model;
  auto engine = std::make_shared<QueryEngine>(model_name);
  for (auto layer : resolve_layers(config)) {
    engine->load_layer(layer_statistics(config, corpus, layer));
  }
  return engine;
}

void cmd_serve(const PipelineConfig& config, const ServeHook& on_ready) {
  auto engine = load_engine(config);
  ApiServer server(engine);
  if (!config.static_dir.empty() && !server.mount_static(config.static_dir)) {
    throw IoError("static directory not found: " + config.static_dir.string());
  }
  const int port = server.bind(config.host, config.port);
  std::thread worker([&server] { server.run(); });
  server.wait_until_ready();
  bool keep = true;
  try {
    if (on_ready) keep = on_ready(port);
  } catch (...) {
    server.stop();
    worker.join();
    throw;
  }
  if (!keep) server.stop();
  worker.join();
}

void cmd_all(const PipelineConfig& config, const ServeHook& on_ready) {
  config.validate();
  if (!config.corpus.empty()) {
    cmd_ingest(config);
  } else {
    cmd_synth(config);
  }
  for (auto layer : resolve_layers(config)) {
    cmd_cluster(config, layer);
    cmd_stats(config, layer);
  }
  cmd_serve(config, on_ready);
}

}  // namespace embprobe
