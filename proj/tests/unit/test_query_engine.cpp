#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "embprobe/error.hpp"
#include "embprobe/query_engine.hpp"
#include "hand_corpus.hpp"

using namespace embprobe;

namespace {

std::shared_ptr<const LayerStatistics> stats_for(const oracle::LabeledCorpus& c, std::uint32_t layer,
                                                 StatsOptions opt = {}) {
  auto corpus = std::make_shared<const std::vector<Sentence>>(c.sentences);
  return std::make_shared<const LayerStatistics>(compute_layer_statistics(
      corpus, {static_cast<std::uint32_t>(c.k), c.flat_labels()}, layer, opt));
}

std::unique_ptr<QueryEngine> engine_for(const oracle::LabeledCorpus& c, StatsOptions opt = {}) {
  auto e = std::make_unique<QueryEngine>("test-model");
  e->load_layer(stats_for(c, 1, opt));
  return e;
}

std::uint64_t at(const oracle::Cooc& m, int l, int r, std::uint32_t s) {
  const auto it = m.find({l, r, s});
  return it == m.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("layers and unknown layer errors") {
  const auto c = oracle::hand_corpus();
  const auto ep = engine_for(c);
  auto& e = *ep;
  e.load_layer(stats_for(c, 4));
  const auto layers = e.list_layers();
  REQUIRE(layers.size() == 2);
  CHECK(layers[0].layer == 1);
  CHECK(layers[1].layer == 4);
  CHECK(layers[0].k == 3);
  CHECK(layers[0].records == c.tokens());
  CHECK_THROWS_AS(e.layer(2), QueryError);
  CHECK_THROWS_AS(e.get_statistics(2, 0), QueryError);
  CHECK_THROWS_AS(e.apply_membership_brush(9, {0, 0.5, 1.0}), QueryError);
}

TEST_CASE("membership brush matches a brute-force recount") {
  const auto c = oracle::hand_corpus();
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto st = e.layer(1);
  for (int anchor = 0; anchor < 3; ++anchor) {
    for (auto [lo, hi] : {std::pair{0.01, 1.0}, std::pair{1.0, 1.0}, std::pair{0.3, 0.7},
                          std::pair{0.5, 0.5}, std::pair{0.2, 0.34}}) {
      CAPTURE(anchor);
      CAPTURE(lo);
      CAPTURE(hi);
      const auto r = e.apply_membership_brush(1, {static_cast<Label>(anchor), lo, hi});
      const auto w = oracle::brushed_words(c, anchor, lo, hi);
      std::set<std::string> got;
      for (auto t : r.words) got.insert(st->membership.type(t));
      CHECK(got == w);

      const auto ref = oracle::cooccurrence(
          c, st->options.max_spacing, [&](const oracle::Run& run) { return oracle::run_has_word(c, run, w); });
      for (int l = 0; l < 3; ++l)
        for (int rr = 0; rr < 3; ++rr)
          for (std::uint32_t s = 0; s <= st->options.max_spacing; ++s) {
            const auto got_count = r.overlay.at(static_cast<Label>(l), static_cast<Label>(rr), s);
            CHECK(got_count == at(ref, l, rr, s));
            CHECK(got_count <= st->cooccurrence.at(static_cast<Label>(l), static_cast<Label>(rr), s));
          }

      // Overlay histograms: every cluster, only brushed words with p > 0.
      const auto pct = oracle::percentages(c);
      REQUIRE(r.histograms.size() == 3);
      for (int l = 0; l < 3; ++l) {
        std::vector<std::uint64_t> want(kMembershipBins, 0);
        for (const auto& word : w) {
          const double p = pct.at(word)[static_cast<std::size_t>(l)];
          if (p > 0) ++want[static_cast<std::size_t>(std::ceil(p * kMembershipBins)) - 1];
        }
        CHECK(r.histograms[static_cast<std::size_t>(l)] == want);
      }
    }
  }
}

TEST_CASE("membership brush [1,1]: only exclusive words, nothing elsewhere") {
  const auto c = oracle::hand_corpus();
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto r = e.apply_membership_brush(1, {0, 1.0, 1.0});
  REQUIRE_FALSE(r.words.empty());
  for (Label l = 1; l < 3; ++l) {
    for (auto v : r.histograms[l]) CHECK(v == 0);
  }
}

TEST_CASE("membership brush only filters the left position") {
  // "x" lives only in cluster 0. Sentence: [y:1][x:0][z:1]
  const auto c = oracle::corpus_from({{"y", "x", "z"}, {"x", "y"}}, {{1, 0, 1}, {0, 1}}, 2);
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto r = e.apply_membership_brush(1, {0, 1.0, 1.0});
  CHECK(r.overlay.at(0, 1, 0) == 2);  // x first: counted both times
  CHECK(r.overlay.at(1, 0, 0) == 0);  // x only on the right: not counted
  CHECK(r.overlay.at(1, 1, 1) == 0);
  CHECK(e.layer(1)->cooccurrence.at(1, 0, 0) == 1);
}

TEST_CASE("membership brush validation") {
  const auto c = oracle::hand_corpus();
  const auto ep = engine_for(c);
  auto& e = *ep;
  CHECK_THROWS_AS(e.apply_membership_brush(1, {3, 0.5, 1.0}), QueryError);
  CHECK_THROWS_AS(e.apply_membership_brush(1, {0, 0.0, 1.0}), QueryError);
  CHECK_THROWS_AS(e.apply_membership_brush(1, {0, 0.6, 0.5}), QueryError);
  CHECK_THROWS_AS(e.apply_membership_brush(1, {0, 0.5, 1.1}), QueryError);
}

TEST_CASE("span brush matches a brute-force recount of the brushed row") {
  const auto c = oracle::hand_corpus();
  StatsOptions opt;
  opt.max_span = 3;
  opt.max_spacing = 4;
  const auto ep = engine_for(c, opt);
  auto& e = *ep;
  const std::uint32_t width = opt.max_spacing + 1;
  for (int cl = 0; cl < 3; ++cl) {
    for (auto [lo, hi] : {std::pair{1u, 3u}, std::pair{2u, 3u}, std::pair{1u, 1u}, std::pair{2u, 2u},
                          std::pair{3u, 3u}}) {
      CAPTURE(cl);
      CAPTURE(lo);
      CAPTURE(hi);
      const auto r = e.apply_span_brush(1, {static_cast<Label>(cl), lo, hi});
      CHECK(r.cluster == cl);
      REQUIRE(r.row.size() == 3 * width);
      const auto ref = oracle::cooccurrence(c, opt.max_spacing, [&](const oracle::Run& run) {
        return oracle::span_keeps(run, cl, lo, hi, opt.max_span);
      });
      for (int right = 0; right < 3; ++right)
        for (std::uint32_t s = 0; s < width; ++s) {
          const auto v = r.row[static_cast<std::size_t>(right) * width + s];
          CHECK(v == at(ref, cl, right, s));
          CHECK(v <= e.layer(1)->cooccurrence.at(static_cast<Label>(cl), static_cast<Label>(right), s));
        }
      // Other rows carry nothing: the brush is restricted to its cluster.
      const auto full = e.brushed_tensor(1, SpanBrush{static_cast<Label>(cl), lo, hi});
      for (int l = 0; l < 3; ++l) {
        if (l == cl) continue;
        for (int right = 0; right < 3; ++right)
          for (std::uint32_t s = 0; s < width; ++s)
            CHECK(full.at(static_cast<Label>(l), static_cast<Label>(right), s) == 0);
      }
    }
  }
}

TEST_CASE("span brush [1, max] equals the base row") {
  const auto c = oracle::hand_corpus();
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto st = e.layer(1);
  const std::uint32_t width = st->options.max_spacing + 1;
  for (Label cl = 0; cl < 3; ++cl) {
    const auto r = e.apply_span_brush(1, {cl, 1, st->options.max_span});
    for (Label right = 0; right < 3; ++right)
      for (std::uint32_t s = 0; s < width; ++s)
        CHECK(r.row[right * width + s] == st->cooccurrence.at(cl, right, s));
  }
}

TEST_CASE("span brush [2, max] on length-1 phrases is all zero") {
  const auto c = oracle::corpus_from({{"a", "b", "c", "d"}}, {{0, 1, 0, 1}}, 2);
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto r = e.apply_span_brush(1, {0, 2, kDefaultMaxSpan});
  for (auto v : r.row) CHECK(v == 0);
  CHECK_THROWS_AS(e.apply_span_brush(1, {2, 1, 2}), QueryError);
  CHECK_THROWS_AS(e.apply_span_brush(1, {0, 0, 2}), QueryError);
  CHECK_THROWS_AS(e.apply_span_brush(1, {0, 3, 2}), QueryError);
  CHECK_THROWS_AS(e.apply_span_brush(1, {0, 1, kDefaultMaxSpan + 1}), QueryError);
}

TEST_CASE("select_cell: order matters and the diagonal at spacing 0 is empty") {
  // Phrase clusters: sentence 0 = [A,B], sentence 1 = [B,A]
  const auto c = oracle::corpus_from({{"a", "b"}, {"b", "a"}}, {{0, 1}, {1, 0}}, 2);
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto page = e.select_cell(1, {0, 1, 0, {}});
  REQUIRE(page.total == 1);
  REQUIRE(page.hits.size() == 1);
  CHECK(page.hits[0].sentence_id == 0);
  CHECK(page.hits[0].matches == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  for (Label l = 0; l < 2; ++l) CHECK(e.select_cell(1, {l, l, 0, {}}).total == 0);
}

TEST_CASE("select_cell matches a brute-force scan, with and without brushes") {
  const auto c = oracle::hand_corpus();
  StatsOptions opt;
  opt.max_span = 3;
  const auto ep = engine_for(c, opt);
  auto& e = *ep;
  const auto st = e.layer(1);
  auto check_same = [&](const CellSelection& sel, auto keep) {
    const auto want = oracle::scan_cells(c, sel.left, sel.right, sel.spacing, keep);
    const auto got = e.select_cell(1, sel, 0, 100);
    REQUIRE(got.total == want.size());
    REQUIRE(got.hits.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.hits[i].sentence_id == want[i].first);
      CHECK(got.hits[i].matches == want[i].second);
      CHECK(got.hits[i].words == c.sentences[want[i].first].words);
      for (const auto& [a, b] : got.hits[i].matches) {
        CHECK(got.hits[i].phrases[a].cluster == sel.left);
        CHECK(got.hits[i].phrases[b].cluster == sel.right);
        CHECK(b - a - 1 == sel.spacing);
      }
    }
    // Non-empty exactly when the brushed tensor cell is positive.
    const auto t = e.brushed_tensor(1, sel.brush);
    CHECK((got.total > 0) == (t.at(sel.left, sel.right, sel.spacing) > 0));
  };
  for (Label l = 0; l < 3; ++l)
    for (Label r = 0; r < 3; ++r)
      for (std::uint32_t s = 0; s <= 4; ++s) {
        CAPTURE(l);
        CAPTURE(r);
        CAPTURE(s);
        check_same({l, r, s, {}}, [](const oracle::Run&) { return true; });
        const auto w = oracle::brushed_words(c, 1, 0.5, 1.0);
        check_same({l, r, s, MembershipBrush{1, 0.5, 1.0}},
                   [&](const oracle::Run& run) { return oracle::run_has_word(c, run, w); });
        check_same({l, r, s, SpanBrush{l, 2, 3}},
                   [&](const oracle::Run& run) { return oracle::span_keeps(run, l, 2, 3, 3); });
      }
}

TEST_CASE("select_cell pagination and errors") {
  const auto c = oracle::hand_corpus();
  const auto ep = engine_for(c);
  auto& e = *ep;
  const auto all = e.select_cell(1, {0, 1, 0, {}}, 0, 100);
  REQUIRE(all.total >= 3);
  std::vector<std::uint64_t> ids;
  for (std::size_t p = 0; p * 2 < all.total; ++p) {
    const auto page = e.select_cell(1, {0, 1, 0, {}}, p, 2);
    CHECK(page.total == all.total);
    for (const auto& h : page.hits) ids.push_back(h.sentence_id);
  }
  std::vector<std::uint64_t> want;
  for (const auto& h : all.hits) want.push_back(h.sentence_id);
  CHECK(ids == want);
  CHECK(std::is_sorted(ids.begin(), ids.end()));

  const auto past = e.select_cell(1, {0, 1, 0, {}}, 50, 25);
  CHECK(past.hits.empty());
  CHECK(past.total == all.total);

  CHECK_THROWS_AS(e.select_cell(1, {3, 0, 0, {}}), QueryError);
  CHECK_THROWS_AS(e.select_cell(1, {0, 0, kDefaultMaxSpacing + 1, {}}), QueryError);
  CHECK_THROWS_AS(e.select_cell(1, {0, 1, 0, {}}, 0, 0), QueryError);
  CHECK_THROWS_AS(e.select_cell(1, {0, 1, 0, SpanBrush{0, 0, 1}}), QueryError);
}

TEST_CASE("queries are pure and safe alongside layer reloads") {
  const auto c = oracle::hand_corpus();
  auto e = std::make_shared<QueryEngine>("m");
  e->load_layer(stats_for(c, 1));
  const auto first = e->apply_membership_brush(1, {0, 0.2, 1.0});
  std::atomic<bool> stop{false};
  std::thread reloader([&] {
    while (!stop) e->load_layer(stats_for(c, 1));
  });
  std::vector<std::thread> readers;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        const auto r = e->apply_membership_brush(1, {0, 0.2, 1.0});
        if (!(r.overlay == first.overlay) || r.words != first.words) ++mismatches;
        if (e->select_cell(1, {0, 1, 0, {}}).total == 0) ++mismatches;
      }
    });
  }
  for (auto& r : readers) r.join();
  stop = true;
  reloader.join();
  CHECK(mismatches == 0);
}
