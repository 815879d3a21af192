#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "embprobe/clustering.hpp"
#include "embprobe/corpus.hpp"

namespace embprobe {

inline constexpr std::uint32_t kDefaultMaxSpan = 10;
inline constexpr std::uint32_t kDefaultMaxSpacing = 9;
inline constexpr double kDefaultBandwidth = 0.05;
inline constexpr std::size_t kDensityGridPoints = 128;
// x_j = j / (N - 1): both ends included so the trapezoid sees all the mass.
inline double density_grid_x(std::size_t j) {
  return static_cast<double>(j) / static_cast<double>(kDensityGridPoints - 1);
}
inline constexpr std::size_t kMembershipBins = 64;

// Cluster label of every corpus token, in (sentence, position) order.
struct Assignments {
  std::uint32_t k = 0;
  std::vector<Label> labels;

  // Throws ValidationError unless labels cover the corpus and are < k.
  void check_covers(std::span<const Sentence> corpus) const;
};

// c(w,l) for every word type w (exact cased surface form) and cluster l.
// Types are numbered in order of first occurrence.
class MembershipTable {
 public:
  MembershipTable() = default;
  explicit MembershipTable(std::uint32_t k) : k_(k) {}

  std::uint32_t k() const noexcept { return k_; }
  std::size_t num_types() const noexcept { return types_.size(); }
  const std::string& type(std::size_t t) const { return types_[t]; }
  // -1 when the word does not occur.
  std::ptrdiff_t find(const std::string& word) const;

  std::uint64_t count(std::size_t t, Label l) const { return counts_[t * k_ + l]; }
  std::uint64_t total(std::size_t t) const { return totals_[t]; }
  // p(w,l) = c(w,l) / sum_j c(w,j)
  double percentage(std::size_t t, Label l) const;

  std::size_t add_occurrence(const std::string& word, Label l);

 private:
  std::uint32_t k_ = 0;
  std::vector<std::string> types_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> totals_;
};

struct DensityCurve {
  Label cluster = 0;
  std::vector<double> x;  // kDensityGridPoints points, density_grid_x(j)
  std::vector<double> y;  // empty when no word type has p > 0
  double bandwidth = kDefaultBandwidth;
  std::size_t word_count = 0;
};

struct Phrase {
  std::uint64_t sentence_id = 0;
  Label cluster = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;  // inclusive

  std::uint32_t length() const { return end - start + 1; }
  bool operator==(const Phrase&) const = default;
};

// Phrases grouped by sentence: sentence s owns phrases[offsets[s], offsets[s+1]).
struct PhraseIndex {
  std::vector<Phrase> phrases;
  std::vector<std::size_t> offsets;

  std::size_t num_sentences() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const Phrase> sentence(std::size_t s) const {
    return std::span<const Phrase>(phrases).subspan(offsets[s], offsets[s + 1] - offsets[s]);
  }
};

struct SpanHistogram {
  std::uint32_t k = 0;
  std::uint32_t max_span = kDefaultMaxSpan;
  std::vector<std::uint64_t> counts;  // k x max_span; column len-1, last column aggregates

  std::uint64_t at(Label l, std::uint32_t length) const {
    return counts[static_cast<std::size_t>(l) * max_span + (length - 1)];
  }
};

// counts[left][right][spacing], spacing = phrases strictly between the pair.
struct CooccurrenceTensor {
  std::uint32_t k = 0;
  std::uint32_t max_spacing = kDefaultMaxSpacing;
  std::vector<std::uint64_t> counts;

  std::size_t index(Label left, Label right, std::uint32_t spacing) const {
    return (static_cast<std::size_t>(left) * k + right) * (max_spacing + 1) + spacing;
  }
  std::uint64_t at(Label left, Label right, std::uint32_t spacing) const {
    return counts[index(left, right, spacing)];
  }

  bool operator==(const CooccurrenceTensor&) const = default;
};

MembershipTable membership_percentages(const Assignments& assignments,
                                       std::span<const Sentence> corpus);

// Gaussian KDE over {p(w,l) : p(w,l) > 0}, one sample per word type, on the
// uniform grid over [0,1] with reflection at both boundaries. Throws ValidationError for a
// non-positive bandwidth.
DensityCurve membership_density(const MembershipTable& table, Label cluster,
                                double bandwidth = kDefaultBandwidth);

// Same estimator over an explicit sample of percentages.
DensityCurve density_of(std::span<const double> samples, double bandwidth);

// Histogram of p(w,l) > 0 over kMembershipBins equal bins of (0,1]. When
// `words` is non-null only types with words[t] set contribute.
std::vector<std::uint64_t> membership_histogram(const MembershipTable& table, Label cluster,
                                                const std::vector<bool>* words = nullptr,
                                                std::size_t bins = kMembershipBins);

PhraseIndex extract_phrases(const Assignments& assignments, std::span<const Sentence> corpus);

SpanHistogram span_histogram(const PhraseIndex& phrases, std::uint32_t k,
                             std::uint32_t max_span = kDefaultMaxSpan);

// Counts every ordered phrase pair (a < b) in a sentence with
// b - a - 1 <= max_spacing. Pairs further apart are not counted.
CooccurrenceTensor cooccurrence_tensor(const PhraseIndex& phrases, std::uint32_t k,
                                       std::uint32_t max_spacing = kDefaultMaxSpacing);

// As above, but only pairs whose left phrase satisfies `keep_left` (given the
// phrase's index into phrases.phrases).
CooccurrenceTensor cooccurrence_tensor_filtered(
    const PhraseIndex& phrases, std::uint32_t k, std::uint32_t max_spacing,
    const std::function<bool(std::size_t)>& keep_left);

// Clusters by descending number of distinct word types, ascending index on ties.
std::vector<Label> cluster_priority(const Assignments& assignments,
                                    std::span<const Sentence> corpus);
std::vector<Label> cluster_priority(const MembershipTable& table);

// Trapezoid rule over the curve's grid.
double integrate(const DensityCurve& curve);

}  // namespace embprobe
