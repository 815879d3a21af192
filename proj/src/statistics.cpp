#include "embprobe/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "embprobe/error.hpp"

namespace embprobe {

void Assignments::check_covers(std::span<const Sentence> corpus) const {
  if (labels.size() != token_count(corpus)) {
    throw ValidationError("assignments: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(token_count(corpus)) + " tokens");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) {
      throw ValidationError("assignments: label " + std::to_string(labels[i]) +
                            " at token " + std::to_string(i) + " not below k=" + std::to_string(k));
    }
  }
}

std::ptrdiff_t MembershipTable::find(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

double MembershipTable::percentage(std::size_t t, Label l) const {
  const auto total = totals_[t];
  return total == 0 ? 0.0 : static_cast<double>(count(t, l)) / static_cast<double>(total);
}

std::size_t MembershipTable::add_occurrence(const std::string& word, Label l) {
  auto [it, inserted] = index_.try_emplace(word, types_.size());
  if (inserted) {
    types_.push_back(word);
    counts_.resize(counts_.size() + k_, 0);
    totals_.push_back(0);
  }
  ++counts_[it->second * k_ + l];
  ++totals_[it->second];
  return it->second;
}

MembershipTable membership_percentages(const Assignments& assignments,
                                       std::span<const Sentence> corpus) {
  assignments.check_covers(corpus);
  MembershipTable table(assignments.k);
  std::size_t tok = 0;
  for (const auto& s : corpus) {
    for (const auto& w : s.words) table.add_occurrence(w, assignments.labels[tok++]);
  }
  return table;
}

DensityCurve density_of(std::span<const double> samples, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ValidationError("bandwidth must be positive");
  }
  DensityCurve curve;
  curve.bandwidth = bandwidth;
  curve.word_count = samples.size();
  curve.x.resize(kDensityGridPoints);
  for (std::size_t j = 0; j < kDensityGridPoints; ++j) {
    curve.x[j] = density_grid_x(j);
  }
  if (samples.empty()) return curve;

  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  auto kernel = [bandwidth](double u) {
    const double z = u / bandwidth;
    return std::exp(-0.5 * z * z);
  };
  curve.y.assign(kDensityGridPoints, 0.0);
  for (std::size_t j = 0; j < kDensityGridPoints; ++j) {
    const double x = curve.x[j];
    double acc = 0.0;
    for (double p : samples) {
      // Mirror images at 0 and 1 fold the spilled mass back into the domain.
      acc += kernel(x - p) + kernel(x + p) + kernel(x - (2.0 - p));
    }
    curve.y[j] = acc * norm;
  }
  return curve;
}

DensityCurve membership_density(const MembershipTable& table, Label cluster, double bandwidth) {
  if (cluster >= table.k()) throw ValidationError("unknown cluster " + std::to_string(cluster));
  std::vector<double> samples;
  for (std::size_t t = 0; t < table.num_types(); ++t) {
    const double p = table.percentage(t, cluster);
    if (p > 0.0) samples.push_back(p);
  }
  auto curve = density_of(samples, bandwidth);
  curve.cluster = cluster;
  return curve;
}

std::vector<std::uint64_t> membership_histogram(const MembershipTable& table, Label cluster,
                                                const std::vector<bool>* words, std::size_t bins) {
  std::vector<std::uint64_t> hist(bins, 0);
  for (std::size_t t = 0; t < table.num_types(); ++t) {
    if (words && !(*words)[t]) continue;
    const double p = table.percentage(t, cluster);
    if (p <= 0.0) continue;
    auto bin = static_cast<std::size_t>(std::ceil(p * static_cast<double>(bins)));
    bin = std::clamp<std::size_t>(bin, 1, bins) - 1;
    ++hist[bin];
  }
  return hist;
}

double integrate(const DensityCurve& curve) {
  double area = 0.0;
  for (std::size_t j = 1; j < curve.y.size(); ++j) {
    area += 0.5 * (curve.y[j] + curve.y[j - 1]) * (curve.x[j] - curve.x[j - 1]);
  }
  return area;
}

PhraseIndex extract_phrases(const Assignments& assignments, std::span<const Sentence> corpus) {
  assignments.check_covers(corpus);
  PhraseIndex index;
  index.offsets.reserve(corpus.size() + 1);
  index.offsets.push_back(0);
  std::size_t tok = 0;
  for (const auto& s : corpus) {
    const auto n = static_cast<std::uint32_t>(s.words.size());
    std::uint32_t start = 0;
    for (std::uint32_t pos = 1; pos <= n; ++pos) {
      if (pos == n || assignments.labels[tok + pos] != assignments.labels[tok + start]) {
        index.phrases.push_back({s.id, assignments.labels[tok + start], start, pos - 1});
        start = pos;
      }
    }
    tok += n;
    index.offsets.push_back(index.phrases.size());
  }
  return index;
}

namespace {

void check_phrase_labels(const PhraseIndex& phrases, std::uint32_t k) {
  for (const auto& p : phrases.phrases) {
    if (p.cluster >= k) {
      throw ValidationError("phrase label " + std::to_string(p.cluster) + " outside k=" +
                            std::to_string(k));
    }
  }
}

}  // namespace

SpanHistogram span_histogram(const PhraseIndex& phrases, std::uint32_t k, std::uint32_t max_span) {
  if (max_span == 0) throw ValidationError("max_span must be at least 1");
  check_phrase_labels(phrases, k);
  SpanHistogram h;
  h.k = k;
  h.max_span = max_span;
  h.counts.assign(static_cast<std::size_t>(k) * max_span, 0);
  for (const auto& p : phrases.phrases) {
    const auto col = std::min(p.length(), max_span) - 1;
    ++h.counts[static_cast<std::size_t>(p.cluster) * max_span + col];
  }
  return h;
}

CooccurrenceTensor cooccurrence_tensor_filtered(
    const PhraseIndex& phrases, std::uint32_t k, std::uint32_t max_spacing,
    const std::function<bool(std::size_t)>& keep_left) {
  check_phrase_labels(phrases, k);
  CooccurrenceTensor t;
  t.k = k;
  t.max_spacing = max_spacing;
  t.counts.assign(static_cast<std::size_t>(k) * k * (max_spacing + 1), 0);
  for (std::size_t s = 0; s < phrases.num_sentences(); ++s) {
    const std::size_t begin = phrases.offsets[s];
    const std::size_t end = phrases.offsets[s + 1];
    for (std::size_t a = begin; a < end; ++a) {
      if (keep_left && !keep_left(a)) continue;
      const std::size_t last = std::min(end, a + 2 + max_spacing);
      for (std::size_t b = a + 1; b < last; ++b) {
        const auto spacing = static_cast<std::uint32_t>(b - a - 1);
        ++t.counts[t.index(phrases.phrases[a].cluster, phrases.phrases[b].cluster, spacing)];
      }
    }
  }
  return t;
}

CooccurrenceTensor cooccurrence_tensor(const PhraseIndex& phrases, std::uint32_t k,
                                       std::uint32_t max_spacing) {
  return cooccurrence_tensor_filtered(phrases, k, max_spacing, {});
}

std::vector<Label> cluster_priority(const MembershipTable& table) {
  std::vector<std::size_t> distinct(table.k(), 0);
  for (std::size_t t = 0; t < table.num_types(); ++t) {
    for (Label l = 0; l < table.k(); ++l) {
      if (table.count(t, l) > 0) ++distinct[l];
    }
  }
  std::vector<Label> order(table.k());
  std::iota(order.begin(), order.end(), Label{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Label a, Label b) { return distinct[a] > distinct[b]; });
  return order;
}

std::vector<Label> cluster_priority(const Assignments& assignments,
                                    std::span<const Sentence> corpus) {
  return cluster_priority(membership_percentages(assignments, corpus));
}

}  // namespace embprobe
