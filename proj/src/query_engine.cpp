#include "embprobe/query_engine.hpp"

#include <cmath>
#include <functional>
#include <mutex>

#include "embprobe/error.hpp"

namespace embprobe {

namespace {

void check_cluster(const LayerStatistics& stats, std::uint32_t cluster) {
  if (cluster >= stats.k()) {
    throw QueryError("unknown cluster " + std::to_string(cluster) + " (k=" +
                     std::to_string(stats.k()) + ")");
  }
}

}  // namespace

void validate_brush(const LayerStatistics& stats, const MembershipBrush& brush) {
  check_cluster(stats, brush.cluster);
  if (!(brush.lo > 0.0) || !(brush.lo <= brush.hi) || !(brush.hi <= 1.0)) {
    throw QueryError("membership brush needs 0 < lo <= hi <= 1");
  }
}

void validate_brush(const LayerStatistics& stats, const SpanBrush& brush) {
  check_cluster(stats, brush.cluster);
  if (brush.lo < 1 || brush.lo > brush.hi || brush.hi > stats.options.max_span) {
    throw QueryError("span brush needs 1 <= lo <= hi <= " + std::to_string(stats.options.max_span));
  }
}

std::vector<bool> brushed_words(const LayerStatistics& stats, const MembershipBrush& brush) {
  validate_brush(stats, brush);
  std::vector<bool> in(stats.membership.num_types(), false);
  for (std::size_t t = 0; t < in.size(); ++t) {
    const double p = stats.membership.percentage(t, brush.cluster);
    in[t] = p >= brush.lo && p <= brush.hi;
  }
  return in;
}

bool phrase_has_word(const LayerStatistics& stats, const Phrase& phrase,
                     const std::vector<bool>& words) {
  const std::size_t base = stats.sentence_token_offset[phrase.sentence_id];
  for (std::uint32_t pos = phrase.start; pos <= phrase.end; ++pos) {
    if (words[stats.token_type[base + pos]]) return true;
  }
  return false;
}

bool span_brush_accepts(const LayerStatistics& stats, const SpanBrush& brush, const Phrase& phrase) {
  if (phrase.cluster != brush.cluster) return false;
  const auto len = phrase.length();
  if (len < brush.lo) return false;
  return brush.hi >= stats.options.max_span || len <= brush.hi;
}

void QueryEngine::load_layer(std::shared_ptr<const LayerStatistics> stats) {
  if (!stats) throw ValidationError("load_layer: null statistics");
  std::unique_lock lock(mutex_);
  layers_[stats->layer] = std::move(stats);
}

std::vector<LayerSummary> QueryEngine::list_layers() const {
  std::shared_lock lock(mutex_);
  std::vector<LayerSummary> out;
  for (const auto& [n, st] : layers_) out.push_back({n, st->k(), st->assignments.labels.size()});
  return out;
}

std::shared_ptr<const LayerStatistics> QueryEngine::layer(std::uint32_t n) const {
  std::shared_lock lock(mutex_);
  const auto it = layers_.find(n);
  if (it == layers_.end()) throw QueryError("unknown layer " + std::to_string(n));
  return it->second;
}

nlohmann::json QueryEngine::get_statistics(std::uint32_t n, std::size_t top_n) const {
  return statistics_bundle(*layer(n), top_n);
}

MembershipBrushResult QueryEngine::apply_membership_brush(std::uint32_t n,
                                                          const MembershipBrush& brush) const {
  const auto st = layer(n);
  const auto words = brushed_words(*st, brush);
  MembershipBrushResult out;
  for (std::size_t t = 0; t < words.size(); ++t) {
    if (words[t]) out.words.push_back(t);
  }
  out.histograms.reserve(st->k());
  for (Label l = 0; l < st->k(); ++l) {
    out.histograms.push_back(membership_histogram(st->membership, l, &words));
  }
  out.overlay = cooccurrence_tensor_filtered(
      st->phrases, st->k(), st->options.max_spacing,
      [&](std::size_t a) { return phrase_has_word(*st, st->phrases.phrases[a], words); });
  return out;
}

SpanBrushResult QueryEngine::apply_span_brush(std::uint32_t n, const SpanBrush& brush) const {
  const auto st = layer(n);
  validate_brush(*st, brush);
  const auto tensor = cooccurrence_tensor_filtered(
      st->phrases, st->k(), st->options.max_spacing,
      [&](std::size_t a) { return span_brush_accepts(*st, brush, st->phrases.phrases[a]); });
  SpanBrushResult out;
  out.cluster = brush.cluster;
  const std::size_t width = static_cast<std::size_t>(st->k()) * (st->options.max_spacing + 1);
  const auto begin = tensor.counts.begin() + static_cast<std::ptrdiff_t>(brush.cluster * width);
  out.row.assign(begin, begin + static_cast<std::ptrdiff_t>(width));
  return out;
}

CooccurrenceTensor QueryEngine::brushed_tensor(std::uint32_t n, const Brush& brush) const {
  const auto st = layer(n);
  if (const auto* mb = std::get_if<MembershipBrush>(&brush)) {
    return apply_membership_brush(n, *mb).overlay;
  }
  if (const auto* sb = std::get_if<SpanBrush>(&brush)) {
    validate_brush(*st, *sb);
    return cooccurrence_tensor_filtered(
        st->phrases, st->k(), st->options.max_spacing,
        [&](std::size_t a) { return span_brush_accepts(*st, *sb, st->phrases.phrases[a]); });
  }
  return st->cooccurrence;
}

SentencePage QueryEngine::select_cell(std::uint32_t n, const CellSelection& sel,
                                      std::size_t page, std::size_t page_size) const {
  const auto st = layer(n);
  check_cluster(*st, sel.left);
  check_cluster(*st, sel.right);
  if (sel.spacing > st->options.max_spacing) {
    throw QueryError("spacing " + std::to_string(sel.spacing) + " exceeds max_spacing " +
                     std::to_string(st->options.max_spacing));
  }
  if (page_size == 0) throw QueryError("page_size must be positive");

  std::function<bool(const Phrase&)> left_ok = [](const Phrase&) { return true; };
  std::vector<bool> words;
  if (const auto* mb = std::get_if<MembershipBrush>(&sel.brush)) {
    words = brushed_words(*st, *mb);
    left_ok = [&](const Phrase& p) { return phrase_has_word(*st, p, words); };
  } else if (const auto* sb = std::get_if<SpanBrush>(&sel.brush)) {
    validate_brush(*st, *sb);
    left_ok = [&, brush = *sb](const Phrase& p) { return span_brush_accepts(*st, brush, p); };
  }

  SentencePage out;
  out.page = page;
  out.page_size = page_size;
  const std::size_t first = page * page_size;
  const auto& corpus = *st->corpus;
  for (std::size_t s = 0; s < st->phrases.num_sentences(); ++s) {
    const auto phrases = st->phrases.sentence(s);
    std::vector<std::pair<std::size_t, std::size_t>> matches;
    for (std::size_t a = 0; a + sel.spacing + 1 < phrases.size(); ++a) {
      const std::size_t b = a + sel.spacing + 1;
      if (phrases[a].cluster == sel.left && phrases[b].cluster == sel.right && left_ok(phrases[a])) {
        matches.emplace_back(a, b);
      }
    }
    if (matches.empty()) continue;
    const std::size_t ordinal = out.total++;
    if (ordinal < first || ordinal >= first + page_size) continue;
    SentenceHit hit;
    hit.sentence_id = corpus[s].id;
    hit.words = corpus[s].words;
    const auto base = st->sentence_token_offset[s];
    hit.labels.assign(st->assignments.labels.begin() + static_cast<std::ptrdiff_t>(base),
                      st->assignments.labels.begin() +
                          static_cast<std::ptrdiff_t>(base + corpus[s].words.size()));
    hit.phrases.assign(phrases.begin(), phrases.end());
    hit.matches = std::move(matches);
    out.hits.push_back(std::move(hit));
  }
  return out;
}

}  // namespace embprobe
