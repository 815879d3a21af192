#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "embprobe/layer_stats.hpp"

namespace embprobe {

inline constexpr std::size_t kDefaultPageSize = 25;

// Words w with lo <= p(w, cluster) <= hi, 0 < lo <= hi <= 1.
struct MembershipBrush {
  Label cluster = 0;
  double lo = 0.0;
  double hi = 1.0;
};

// Phrases of `cluster` with lo <= length <= hi. hi == max_span also takes the
// longer phrases that the heatmap's last column aggregates.
struct SpanBrush {
  Label cluster = 0;
  std::uint32_t lo = 1;
  std::uint32_t hi = 1;
};

using Brush = std::variant<std::monostate, MembershipBrush, SpanBrush>;

struct CellSelection {
  Label left = 0;
  Label right = 0;
  std::uint32_t spacing = 0;
  Brush brush;
};

struct MembershipBrushResult {
  std::vector<std::size_t> words;                      // type ids in W, ascending
  std::vector<std::vector<std::uint64_t>> histograms;  // per cluster, restricted to W
  CooccurrenceTensor overlay;                          // left phrase holds a word in W
};

struct SpanBrushResult {
  Label cluster = 0;
  // overlay[right * (max_spacing+1) + spacing]; rows of other clusters carry no overlay.
  std::vector<std::uint64_t> row;
};

struct SentenceHit {
  std::uint64_t sentence_id = 0;
  std::vector<std::string> words;
  std::vector<Label> labels;
  std::vector<Phrase> phrases;
  // (left, right) phrase indices within `phrases` matching the selection.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
};

struct SentencePage {
  std::size_t total = 0;  // matching sentences across all pages
  std::size_t page = 0;
  std::size_t page_size = kDefaultPageSize;
  std::vector<SentenceHit> hits;
};

struct LayerSummary {
  std::uint32_t layer = 0;
  std::uint32_t k = 0;
  std::size_t records = 0;
};

// Serves precomputed per-layer statistics. Every query is read-only; layers
// can be (re)loaded concurrently with queries, replacing the bundle atomically.
class QueryEngine {
 public:
  QueryEngine() = default;
  explicit QueryEngine(std::string model_name) : model_name_(std::move(model_name)) {}

  void load_layer(std::shared_ptr<const LayerStatistics> stats);

  const std::string& model_name() const { return model_name_; }
  std::vector<LayerSummary> list_layers() const;
  // Throws QueryError for an unknown layer.
  std::shared_ptr<const LayerStatistics> layer(std::uint32_t n) const;

  nlohmann::json get_statistics(std::uint32_t layer, std::size_t top_n) const;

  MembershipBrushResult apply_membership_brush(std::uint32_t layer,
                                               const MembershipBrush& brush) const;
  SpanBrushResult apply_span_brush(std::uint32_t layer, const SpanBrush& brush) const;
  SentencePage select_cell(std::uint32_t layer, const CellSelection& selection,
                           std::size_t page = 0, std::size_t page_size = kDefaultPageSize) const;

  // Tensor of co-occurrences whose left phrase passes the brush; the base
  // tensor when no brush is active.
  CooccurrenceTensor brushed_tensor(std::uint32_t layer, const Brush& brush) const;

 private:
  std::string model_name_ = "unknown";
  mutable std::shared_mutex mutex_;
  std::map<std::uint32_t, std::shared_ptr<const LayerStatistics>> layers_;
};

// Brush predicates over LayerStatistics, exposed for the query layer and tests.
void validate_brush(const LayerStatistics& stats, const MembershipBrush& brush);
void validate_brush(const LayerStatistics& stats, const SpanBrush& brush);
std::vector<bool> brushed_words(const LayerStatistics& stats, const MembershipBrush& brush);
bool phrase_has_word(const LayerStatistics& stats, const Phrase& phrase,
                     const std::vector<bool>& words);
bool span_brush_accepts(const LayerStatistics& stats, const SpanBrush& brush, const Phrase& phrase);

}  // namespace embprobe
