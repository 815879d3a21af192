#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They deliberately avoid the library's statistics code and favour the
// most literal reading of each definition over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "embprobe/corpus.hpp"
#include "embprobe/rng.hpp"

namespace oracle {

using embprobe::Sentence;

// A corpus together with one label per token, grouped by sentence.
struct LabeledCorpus {
  std::vector<Sentence> sentences;
  std::vector<std::vector<int>> labels;
  int k = 0;

  std::vector<std::uint16_t> flat_labels() const {
    std::vector<std::uint16_t> out;
    for (const auto& s : labels)
      for (int l : s) out.push_back(static_cast<std::uint16_t>(l));
    return out;
  }
  std::size_t tokens() const {
    std::size_t n = 0;
    for (const auto& s : labels) n += s.size();
    return n;
  }
};

// Random corpus with at most max_tokens tokens. Small vocabularies and few
// clusters so that repeated words, runs and every spacing show up often.
inline LabeledCorpus random_corpus(std::uint64_t seed, std::size_t max_tokens = 500) {
  std::mt19937_64 gen(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  LabeledCorpus c;
  c.k = pick(1, 8);
  const int vocab = pick(1, 40);
  const double stay = std::uniform_real_distribution<double>(0.0, 0.8)(gen);
  std::size_t budget = static_cast<std::size_t>(pick(1, static_cast<int>(max_tokens)));
  std::uint64_t id = 0;
  while (budget > 0) {
    const std::size_t len = std::min<std::size_t>(budget, static_cast<std::size_t>(pick(1, 25)));
    Sentence s;
    s.id = id++;
    std::vector<int> labels;
    for (std::size_t i = 0; i < len; ++i) {
      const int w = pick(0, vocab - 1);
      // Mixed case on purpose: "w3" and "W3" are different word types.
      s.words.push_back((w % 7 == 0 ? "W" : "w") + std::to_string(w));
      if (!labels.empty() && std::uniform_real_distribution<double>(0, 1)(gen) < stay) {
        labels.push_back(labels.back());
      } else {
        labels.push_back(pick(0, c.k - 1));
      }
    }
    for (std::size_t i = 0; i < s.words.size(); ++i) s.raw_text += (i ? " " : "") + s.words[i];
    c.sentences.push_back(std::move(s));
    c.labels.push_back(std::move(labels));
    budget -= len;
  }
  return c;
}

// Builds a corpus from label rows, naming word i of sentence s by `word`.
inline LabeledCorpus corpus_from(const std::vector<std::vector<std::string>>& words,
                                 const std::vector<std::vector<int>>& labels, int k) {
  LabeledCorpus c;
  c.k = k;
  for (std::size_t s = 0; s < words.size(); ++s) {
    Sentence sent;
    sent.id = s;
    sent.words = words[s];
    for (std::size_t i = 0; i < sent.words.size(); ++i)
      sent.raw_text += (i ? " " : "") + sent.words[i];
    c.sentences.push_back(sent);
  }
  c.labels = labels;
  return c;
}

// c(w,l) by direct recount.
inline std::map<std::string, std::vector<std::uint64_t>> membership_counts(const LabeledCorpus& c) {
  std::map<std::string, std::vector<std::uint64_t>> out;
  for (std::size_t s = 0; s < c.sentences.size(); ++s) {
    for (std::size_t i = 0; i < c.sentences[s].words.size(); ++i) {
      auto& row = out[c.sentences[s].words[i]];
      row.resize(static_cast<std::size_t>(c.k), 0);
      row[static_cast<std::size_t>(c.labels[s][i])] += 1;
    }
  }
  return out;
}

struct Run {
  std::size_t sentence;
  int cluster;
  std::size_t start;
  std::size_t end;  // inclusive
};

// Maximal runs: a new phrase starts wherever the label differs from the
// previous word's label.
inline std::vector<std::vector<Run>> phrases(const LabeledCorpus& c) {
  std::vector<std::vector<Run>> out(c.sentences.size());
  for (std::size_t s = 0; s < c.labels.size(); ++s) {
    const auto& l = c.labels[s];
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (i == 0 || l[i] != l[i - 1]) {
        out[s].push_back({s, l[i], i, i});
      } else {
        out[s].back().end = i;
      }
    }
  }
  return out;
}

// spans[l][len-1], last column collects len >= max_span.
inline std::vector<std::vector<std::uint64_t>> spans(const LabeledCorpus& c, std::uint32_t max_span) {
  std::vector<std::vector<std::uint64_t>> out(static_cast<std::size_t>(c.k),
                                              std::vector<std::uint64_t>(max_span, 0));
  for (const auto& sent : phrases(c)) {
    for (const auto& p : sent) {
      const std::size_t len = p.end - p.start + 1;
      out[static_cast<std::size_t>(p.cluster)][std::min<std::size_t>(len, max_span) - 1] += 1;
    }
  }
  return out;
}

using Cooc = std::map<std::tuple<int, int, std::uint32_t>, std::uint64_t>;

// Every ordered pair (a, b), a < b, with b - a - 1 <= max_spacing and
// keep(sentence phrases, a) true.
template <typename Keep>
Cooc cooccurrence(const LabeledCorpus& c, std::uint32_t max_spacing, Keep keep) {
  Cooc out;
  for (const auto& sent : phrases(c)) {
    for (std::size_t a = 0; a < sent.size(); ++a) {
      for (std::size_t b = a + 1; b < sent.size(); ++b) {
        const auto spacing = static_cast<std::uint32_t>(b - a - 1);
        if (spacing > max_spacing) continue;
        if (!keep(sent[a])) continue;
        out[{sent[a].cluster, sent[b].cluster, spacing}] += 1;
      }
    }
  }
  return out;
}

inline Cooc cooccurrence(const LabeledCorpus& c, std::uint32_t max_spacing) {
  return cooccurrence(c, max_spacing, [](const Run&) { return true; });
}

// Clusters ordered by distinct word types, descending; lower index on ties.
inline std::vector<int> priority(const LabeledCorpus& c) {
  std::vector<std::set<std::string>> types(static_cast<std::size_t>(c.k));
  for (std::size_t s = 0; s < c.sentences.size(); ++s)
    for (std::size_t i = 0; i < c.sentences[s].words.size(); ++i)
      types[static_cast<std::size_t>(c.labels[s][i])].insert(c.sentences[s].words[i]);
  std::vector<int> order(static_cast<std::size_t>(c.k));
  for (int l = 0; l < c.k; ++l) order[static_cast<std::size_t>(l)] = l;
  // Insertion sort: plain, stable, obviously correct.
  for (std::size_t i = 1; i < order.size(); ++i) {
    for (std::size_t j = i; j > 0; --j) {
      const auto a = types[static_cast<std::size_t>(order[j - 1])].size();
      const auto b = types[static_cast<std::size_t>(order[j])].size();
      if (b > a) std::swap(order[j - 1], order[j]);
    }
  }
  return order;
}

// Gaussian KDE with reflection about 0 and 1, evaluated at x.
inline double kde_at(const std::vector<double>& samples, double h, double x) {
  if (samples.empty()) return 0.0;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h);
  double acc = 0.0;
  for (double p : samples) {
    for (double mirror : {p, -p, 2.0 - p}) {
      const double z = (x - mirror) / h;
      acc += norm * std::exp(-0.5 * z * z);
    }
  }
  return acc / static_cast<double>(samples.size());
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("embprobe_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// Replays a fixed list of uniform draws.
class ScriptedUniform final : public embprobe::UniformSource {
 public:
  explicit ScriptedUniform(std::vector<double> draws) : draws_(std::move(draws)) {}
  double uniform() override { return draws_.at(next_++); }
  std::size_t used() const { return next_; }

 private:
  std::vector<double> draws_;
  std::size_t next_ = 0;
};

}  // namespace oracle
