#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "embprobe/statistics.hpp"

namespace embprobe {

inline constexpr int kSchemaVersion = 1;

struct StatsOptions {
  std::uint32_t max_span = kDefaultMaxSpan;
  std::uint32_t max_spacing = kDefaultMaxSpacing;
  double bandwidth = kDefaultBandwidth;
};

// Everything computed for one layer, immutable once built. Sentences are
// shared between layers of the same corpus.
struct LayerStatistics {
  std::uint32_t layer = 0;
  StatsOptions options;
  std::shared_ptr<const std::vector<Sentence>> corpus;
  Assignments assignments;
  std::vector<std::size_t> sentence_token_offset;  // first flat token index per sentence
  std::vector<std::size_t> token_type;             // MembershipTable type id per token
  MembershipTable membership;
  std::vector<DensityCurve> densities;             // indexed by cluster
  PhraseIndex phrases;
  SpanHistogram spans;
  CooccurrenceTensor cooccurrence;
  std::vector<Label> priority;
  std::vector<std::size_t> distinct_words;         // per cluster

  std::uint32_t k() const { return assignments.k; }
};

LayerStatistics compute_layer_statistics(std::shared_ptr<const std::vector<Sentence>> corpus,
                                         Assignments assignments, std::uint32_t layer,
                                         const StatsOptions& options = {});

// Versioned statistics bundle, restricted to the first `top_n` clusters in
// priority order (top_n >= k or 0 means all). The co-occurrence tensor is
// sent as sparse [left, right, spacing, count] triples among shown clusters.
nlohmann::json statistics_bundle(const LayerStatistics& stats, std::size_t top_n = 0);

}  // namespace embprobe
