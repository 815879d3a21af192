#include "embprobe/layer_stats.hpp"

#include "embprobe/error.hpp"

namespace embprobe {

using json = nlohmann::json;

LayerStatistics compute_layer_statistics(std::shared_ptr<const std::vector<Sentence>> corpus,
                                         Assignments assignments, std::uint32_t layer,
                                         const StatsOptions& options) {
  if (!corpus) throw ValidationError("statistics: no corpus");
  if (options.max_span == 0) throw ValidationError("max_span must be at least 1");
  LayerStatistics st;
  st.layer = layer;
  st.options = options;
  st.corpus = std::move(corpus);
  st.assignments = std::move(assignments);
  const auto& sentences = *st.corpus;
  st.assignments.check_covers(sentences);
  const std::uint32_t k = st.assignments.k;

  st.membership = MembershipTable(k);
  st.token_type.reserve(st.assignments.labels.size());
  st.sentence_token_offset.reserve(sentences.size());
  std::size_t tok = 0;
  for (const auto& s : sentences) {
    st.sentence_token_offset.push_back(tok);
    for (const auto& w : s.words) {
      st.token_type.push_back(st.membership.add_occurrence(w, st.assignments.labels[tok]));
      ++tok;
    }
  }

  st.densities.reserve(k);
  for (Label l = 0; l < k; ++l) {
    st.densities.push_back(membership_density(st.membership, l, options.bandwidth));
  }
  st.phrases = extract_phrases(st.assignments, sentences);
  st.spans = span_histogram(st.phrases, k, options.max_span);
  st.cooccurrence = cooccurrence_tensor(st.phrases, k, options.max_spacing);
  st.priority = cluster_priority(st.membership);
  st.distinct_words.assign(k, 0);
  for (std::size_t t = 0; t < st.membership.num_types(); ++t) {
    for (Label l = 0; l < k; ++l) {
      if (st.membership.count(t, l) > 0) ++st.distinct_words[l];
    }
  }
  return st;
}

json statistics_bundle(const LayerStatistics& st, std::size_t top_n) {
  const std::uint32_t k = st.k();
  const std::size_t shown = (top_n == 0 || top_n > k) ? k : top_n;
  std::vector<bool> visible(k, false);
  json clusters = json::array();
  json priority = json::array();
  for (std::size_t rank = 0; rank < shown; ++rank) {
    const Label l = st.priority[rank];
    visible[l] = true;
    priority.push_back(l);
    json spans = json::array();
    for (std::uint32_t len = 1; len <= st.options.max_span; ++len) spans.push_back(st.spans.at(l, len));
    clusters.push_back({
        {"cluster", l},
        {"rank", rank},
        {"glyph_id", l},
        {"distinct_words", st.distinct_words[l]},
        {"membership_histogram", membership_histogram(st.membership, l)},
        {"density", {{"word_count", st.densities[l].word_count}, {"y", st.densities[l].y}}},
        {"span_histogram", spans},
    });
  }

  json triples = json::array();
  for (Label a = 0; a < k; ++a) {
    if (!visible[a]) continue;
    for (Label b = 0; b < k; ++b) {
      if (!visible[b]) continue;
      for (std::uint32_t s = 0; s <= st.options.max_spacing; ++s) {
        if (const auto c = st.cooccurrence.at(a, b, s); c > 0) triples.push_back({a, b, s, c});
      }
    }
  }

  std::vector<double> grid;
  grid.reserve(kDensityGridPoints);
  for (std::size_t j = 0; j < kDensityGridPoints; ++j) {
    grid.push_back(density_grid_x(j));
  }

  return {
      {"schema_version", kSchemaVersion},
      {"layer", st.layer},
      {"k", k},
      {"num_sentences", st.corpus->size()},
      {"num_tokens", st.assignments.labels.size()},
      {"num_word_types", st.membership.num_types()},
      {"max_span", st.options.max_span},
      {"max_spacing", st.options.max_spacing},
      {"bandwidth", st.options.bandwidth},
      {"membership_bins", kMembershipBins},
      {"density_grid", grid},
      {"priority", priority},
      {"clusters", clusters},
      {"cooccurrence", triples},
  };
}

}  // namespace embprobe
