// embprobe: corpus ingestion, clustering, statistics and the query server.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal
// invariant violation.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "embprobe/api.hpp"
#include "embprobe/error.hpp"
#include "embprobe/pipeline.hpp"

namespace {

using embprobe::ErrorKind;
using embprobe::PipelineConfig;

enum ExitCode { kOk = 0, kValidation = 1, kIo = 2, kInternal = 3 };

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> corpus;
  std::optional<std::string> embeddings_dir;
  std::optional<std::string> out_dir;
  std::vector<std::uint32_t> layers;
  std::optional<std::uint32_t> k;
  std::optional<std::uint32_t> restarts;
  std::optional<std::uint64_t> rng_seed;
  std::optional<double> tol;
  std::optional<std::uint32_t> max_iters;
  std::optional<std::uint32_t> max_span;
  std::optional<std::uint32_t> max_spacing;
  std::optional<double> bandwidth;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<unsigned> threads;
  std::optional<std::string> static_dir;
  std::optional<std::size_t> synth_sentences;
  std::optional<std::size_t> synth_words;
  std::optional<std::uint32_t> synth_dim;
  std::optional<std::uint32_t> synth_modes;
  std::optional<std::uint32_t> synth_layers;
  std::optional<std::size_t> synth_vocab;
  std::optional<std::uint64_t> synth_seed;
  bool smoke = false;
};

template <typename T, typename U>
void apply(const std::optional<T>& v, U& target) {
  if (v) target = *v;
}

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig c;
  if (o.config) c = embprobe::load_config(*o.config);
  apply(o.corpus, c.corpus);
  apply(o.embeddings_dir, c.embeddings_dir);
  apply(o.out_dir, c.out_dir);
  if (!o.layers.empty()) c.layers = o.layers;
  apply(o.k, c.k);
  apply(o.restarts, c.restarts);
  apply(o.rng_seed, c.rng_seed);
  apply(o.tol, c.tol);
  apply(o.max_iters, c.max_iters);
  apply(o.max_span, c.max_span);
  apply(o.max_spacing, c.max_spacing);
  apply(o.bandwidth, c.bandwidth);
  apply(o.host, c.host);
  apply(o.port, c.port);
  apply(o.threads, c.threads);
  apply(o.static_dir, c.static_dir);
  apply(o.synth_sentences, c.synth.sentences);
  apply(o.synth_words, c.synth.words_per_sentence);
  apply(o.synth_dim, c.synth.dim);
  apply(o.synth_modes, c.synth.modes);
  apply(o.synth_layers, c.synth.layers);
  apply(o.synth_vocab, c.synth.vocab);
  apply(o.synth_seed, c.synth.seed);
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file; flags override its values");
  cmd->add_option("--out-dir", o.out_dir, "Working directory for all artifacts");
  cmd->add_option("--embeddings-dir", o.embeddings_dir, "Embedding files (default <out-dir>/embeddings)");
}

void add_cluster_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--layers", o.layers, "Layers to process (default: all in catalog)");
  cmd->add_option("--k", o.k, "Number of clusters");
  cmd->add_option("--restarts", o.restarts, "k-means restarts");
  cmd->add_option("--seed", o.rng_seed, "RNG seed");
  cmd->add_option("--tol", o.tol, "Convergence tolerance on centroid movement");
  cmd->add_option("--max-iters", o.max_iters, "Lloyd iteration cap");
  cmd->add_option("--threads", o.threads, "Assignment threads");
}

void add_stats_flags(CLI::App* cmd, Overrides& o, bool with_layers = true) {
  if (with_layers) cmd->add_option("--layers", o.layers, "Layers to process (default: all in catalog)");
  cmd->add_option("--max-span", o.max_span, "Span heatmap columns");
  cmd->add_option("--max-spacing", o.max_spacing, "Largest phrase spacing counted");
  cmd->add_option("--bandwidth", o.bandwidth, "KDE bandwidth");
}

void add_serve_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--host", o.host, "Bind address");
  cmd->add_option("--port", o.port, "Port (0 picks a free one)");
  cmd->add_option("--static-dir", o.static_dir, "UI bundle served at /");
  cmd->add_flag("--smoke", o.smoke, "Query every endpoint once, then exit");
}

void add_synth_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--sentences", o.synth_sentences, "Synthetic sentence count");
  cmd->add_option("--words-per-sentence", o.synth_words, "Words per synthetic sentence");
  cmd->add_option("--dim", o.synth_dim, "Vector dimension");
  cmd->add_option("--modes", o.synth_modes, "Gaussian mixture modes");
  cmd->add_option("--synth-layers", o.synth_layers, "Pseudo-layers to generate");
  cmd->add_option("--vocab", o.synth_vocab, "Synthetic vocabulary size");
  cmd->add_option("--synth-seed", o.synth_seed, "Generator seed");
}

embprobe::ServeHook serve_hook(const Overrides& o, const PipelineConfig& c, bool& smoke_ok) {
  return [&o, &c, &smoke_ok](int port) {
    std::cerr << "listening on http://" << c.host << ":" << port << "\n";
    if (!o.smoke) return true;
    smoke_ok = true;
    for (const auto& check : embprobe::probe_endpoints(c.host, port)) {
      std::cout << (check.ok() ? "ok   " : "FAIL ") << check.endpoint << " -> " << check.status << "\n";
      for (const auto& e : check.schema_errors) std::cout << "     " << e << "\n";
      smoke_ok = smoke_ok && check.ok();
    }
    return false;
  };
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kQuery:
      return kValidation;
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
      return kIo;
    case ErrorKind::kInvariant:
      return kInternal;
  }
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster contextual word embeddings and serve cluster statistics"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "Tokenize a corpus into a manifest");
  add_common(ingest, o);
  ingest->add_option("--corpus", o.corpus, "UTF-8 text, one sentence per line");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and embeddings");
  add_common(synth, o);
  add_synth_flags(synth, o);

  auto* cluster = app.add_subcommand("cluster", "Fit k-means per layer");
  add_common(cluster, o);
  add_cluster_flags(cluster, o);

  auto* stats = app.add_subcommand("stats", "Compute cluster statistics per layer");
  add_common(stats, o);
  add_stats_flags(stats, o);

  auto* serve = app.add_subcommand("serve", "Run the query API");
  add_common(serve, o);
  add_stats_flags(serve, o);
  add_serve_flags(serve, o);

  auto* all = app.add_subcommand("all", "ingest or synth, cluster, stats, serve");
  add_common(all, o);
  all->add_option("--corpus", o.corpus, "UTF-8 text, one sentence per line");
  add_synth_flags(all, o);
  add_cluster_flags(all, o);
  add_stats_flags(all, o, false);
  add_serve_flags(all, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(o);
    bool smoke_ok = true;
    if (*ingest) {
      const auto sentences = embprobe::cmd_ingest(config);
      std::cerr << "ingested " << sentences.size() << " sentences -> "
                << config.manifest_path().string() << "\n";
    } else if (*synth) {
      const auto data = embprobe::cmd_synth(config);
      std::cerr << "synthesized " << data.sentences.size() << " sentences, "
                << data.layers.size() << " layers\n";
    } else if (*cluster) {
      for (auto layer : embprobe::resolve_layers(config)) {
        const auto model = embprobe::cmd_cluster(config, layer);
        std::cerr << "layer " << layer << ": k=" << model.model.k << " sse=" << model.model.sse
                  << " restart=" << model.model.restart_index << "\n";
      }
    } else if (*stats) {
      for (auto layer : embprobe::resolve_layers(config)) {
        embprobe::cmd_stats(config, layer);
        std::cerr << "layer " << layer << " -> " << config.stats_path(layer).string() << "\n";
      }
    } else if (*serve) {
      embprobe::cmd_serve(config, serve_hook(o, config, smoke_ok));
    } else if (*all) {
      embprobe::cmd_all(config, serve_hook(o, config, smoke_ok));
    }
    return smoke_ok ? kOk : kInternal;
  } catch (const embprobe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
