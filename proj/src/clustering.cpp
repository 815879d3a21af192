#include "embprobe/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>
#include <unordered_map>

#include "binary_io.hpp"
#include "embprobe/error.hpp"
#include "embprobe/io_util.hpp"

namespace embprobe {

namespace {

// Runs fn(begin, end) over [0, n) split into contiguous blocks. Each index is
// handled by exactly one call, so per-index outputs do not depend on threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned num_threads, Fn&& fn) {
  const unsigned threads = std::max(1u, std::min<unsigned>(num_threads, static_cast<unsigned>(
                                                                            std::max<std::size_t>(n / 1024, 1))));
  if (threads == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  const std::size_t block = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * block);
    const std::size_t end = std::min(n, begin + block);
    if (begin == end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

// Nearest centroid per vector plus its squared distance.
template <typename Centroid>
void assign_into(std::span<const float> vectors, std::span<const Centroid> centroids,
                 std::uint32_t dim, unsigned num_threads, std::span<Label> labels,
                 std::span<double> dist) {
  const std::size_t n = dim ? vectors.size() / dim : 0;
  const std::size_t k = dim ? centroids.size() / dim : 0;
  parallel_for(n, num_threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = vectors.subspan(i * dim, dim);
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const auto cen = centroids.subspan(c * dim, dim);
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double diff = static_cast<double>(x[j]) - static_cast<double>(cen[j]);
          acc += diff * diff;
        }
        if (acc < best) {
          best = acc;
          best_c = c;
        }
      }
      labels[i] = static_cast<Label>(best_c);
      dist[i] = best;
    }
  });
}

void check_k(std::uint32_t k) {
  if (k == 0) throw ValidationError("k must be at least 1");
  if (k > std::numeric_limits<Label>::max()) {
    throw ValidationError("k must not exceed " + std::to_string(std::numeric_limits<Label>::max()));
  }
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ValidationError("squared_distance: dim mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    acc += diff * diff;
  }
  return acc;
}

std::vector<Label> assign(std::span<const float> vectors, std::span<const float> centroids,
                          std::uint32_t dim, unsigned num_threads) {
  if (dim == 0 || vectors.size() % dim != 0 || centroids.size() % dim != 0 ||
      centroids.empty()) {
    throw ValidationError("assign: dim mismatch between vectors and centroids");
  }
  check_k(static_cast<std::uint32_t>(centroids.size() / dim));
  const std::size_t n = vectors.size() / dim;
  std::vector<Label> labels(n);
  std::vector<double> dist(n);
  assign_into<float>(vectors, centroids, dim, num_threads, labels, dist);
  return labels;
}

double sum_squared_error(std::span<const float> vectors, std::span<const float> centroids,
                         std::uint32_t dim, std::span<const Label> labels) {
  double sse = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sse += squared_distance(vectors.subspan(i * dim, dim),
                            centroids.subspan(static_cast<std::size_t>(labels[i]) * dim, dim));
  }
  return sse;
}

std::vector<float> seed_unique_words(const EmbeddingSet& set, std::uint32_t k,
                                     UniformSource& rng) {
  std::vector<std::size_t> chosen;
  return seed_unique_words(set, k, rng, chosen);
}

std::vector<float> seed_unique_words(const EmbeddingSet& set, std::uint32_t k,
                                     UniformSource& rng, std::vector<std::size_t>& chosen) {
  check_k(k);
  const std::size_t n = set.size();
  const std::uint32_t dim = set.dim();

  std::unordered_map<std::string_view, std::uint32_t> type_ids;
  std::vector<std::uint32_t> type_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    type_of[i] = type_ids.try_emplace(set.word(i), static_cast<std::uint32_t>(type_ids.size()))
                     .first->second;
  }
  if (type_ids.size() < k) {
    throw ValidationError("seeding needs at least k=" + std::to_string(k) +
                          " distinct word types but the data has " +
                          std::to_string(type_ids.size()) + "; use a smaller k");
  }

  chosen.clear();
  std::vector<float> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * dim);
  std::vector<bool> excluded_type(type_ids.size(), false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t idx) {
    chosen.push_back(idx);
    const auto v = set.vector(idx);
    centroids.insert(centroids.end(), v.begin(), v.end());
    excluded_type[type_of[idx]] = true;
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(set.vector(i), v));
  };

  const auto first = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
  take(first);

  for (std::uint32_t c = 1; c < k; ++c) {
    double total = 0.0;
    std::size_t candidates = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (excluded_type[type_of[i]]) continue;
      total += d2[i];
      ++candidates;
    }
    const double u = rng.uniform();
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = u * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (excluded_type[type_of[i]] || d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      // Every remaining candidate coincides with a seed: fall back to uniform.
      auto nth = std::min(candidates - 1, static_cast<std::size_t>(u * static_cast<double>(candidates)));
      for (std::size_t i = 0; i < n; ++i) {
        if (excluded_type[type_of[i]]) continue;
        if (nth-- == 0) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) throw InvariantError("seeding: no candidate selected");
    take(pick);
  }
  return centroids;
}

FitResult lloyd_fit(const EmbeddingSet& set, std::span<const float> initial_centroids,
                    std::uint32_t k, const LloydOptions& options) {
  check_k(k);
  const std::uint32_t dim = set.dim();
  const std::size_t n = set.size();
  if (initial_centroids.size() != static_cast<std::size_t>(k) * dim) {
    throw ValidationError("lloyd_fit: initial centroids must be k x dim");
  }
  for (float v : initial_centroids) {
    if (!std::isfinite(v)) throw ValidationError("lloyd_fit: non-finite initial centroid");
  }
  if (n == 0) throw ValidationError("lloyd_fit: no vectors");

  const auto data = set.data();
  std::vector<double> centroids(initial_centroids.begin(), initial_centroids.end());
  std::vector<double> next(centroids.size());
  std::vector<std::size_t> counts(k);
  std::vector<Label> labels(n);
  std::vector<double> dist(n);

  FitResult result;
  std::uint32_t iter = 0;
  while (iter < options.max_iters) {
    assign_into<double>(data, centroids, dim, options.num_threads, labels, dist);
    double sse = 0.0;
    for (double d : dist) sse += d;
    if (!result.sse_history.empty()) {
      const double prev = result.sse_history.back();
      if (sse > prev * (1.0 + 1e-9) + 1e-12) {
        throw InvariantError("lloyd_fit: SSE increased from " + std::to_string(prev) + " to " +
                             std::to_string(sse) + " at iteration " + std::to_string(iter));
      }
    }
    result.sse_history.push_back(sse);
    ++iter;

    // Update in record order; fixed reduction order keeps results bitwise stable.
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.subspan(i * dim, dim);
      double* row = next.data() + static_cast<std::size_t>(labels[i]) * dim;
      for (std::size_t j = 0; j < dim; ++j) row[j] += x[j];
      ++counts[labels[i]];
    }
    std::vector<bool> used(n, false);
    for (std::uint32_t c = 0; c < k; ++c) {
      double* row = next.data() + static_cast<std::size_t>(c) * dim;
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) row[j] /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the vector farthest from its assigned
      // centroid, lowest index on ties, each vector used at most once.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) {
        std::copy_n(centroids.data() + static_cast<std::size_t>(c) * dim, dim, row);
        continue;
      }
      used[far] = true;
      const auto x = data.subspan(far * dim, dim);
      for (std::size_t j = 0; j < dim; ++j) row[j] = x[j];
    }

    double max_shift = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) {
      const std::span<const double> a(centroids.data() + static_cast<std::size_t>(c) * dim, dim);
      const std::span<const double> b(next.data() + static_cast<std::size_t>(c) * dim, dim);
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
      max_shift = std::max(max_shift, std::sqrt(s));
    }
    centroids.swap(next);
    if (max_shift < options.tol) break;
  }

  auto& model = result.model;
  model.layer = set.layer();
  model.k = k;
  model.dim = dim;
  model.iterations = iter;
  model.centroids.assign(centroids.begin(), centroids.end());
  for (float v : model.centroids) {
    if (!std::isfinite(v)) throw InvariantError("lloyd_fit: non-finite centroid");
  }
  // Final labels and SSE are taken against the stored float centroids so the
  // model and its labels agree exactly.
  result.labels.resize(n);
  assign_into<float>(data, model.centroids, dim, options.num_threads, result.labels, dist);
  model.sse = 0.0;
  for (double d : dist) model.sse += d;
  return result;
}

BestOfResult fit_best_of(const EmbeddingSet& set, const FitOptions& options) {
  if (options.restarts < 1) throw ValidationError("restarts must be at least 1");
  BestOfResult out;
  bool have = false;
  for (std::uint32_t r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(options.rng_seed, r));
    const auto init = seed_unique_words(set, options.k, rng);
    auto fit = lloyd_fit(set, init, options.k, options.lloyd);
    fit.model.restart_index = r;
    fit.model.rng_seed = options.rng_seed;
    out.restart_sse.push_back(fit.model.sse);
    if (!have || fit.model.sse < out.best.model.sse) {
      out.best = std::move(fit);
      have = true;
    }
  }
  return out;
}

std::string encode_model(const ModelFile& file) {
  const auto& m = file.model;
  if (m.centroids.size() != static_cast<std::size_t>(m.k) * m.dim) {
    throw ValidationError("model: centroid matrix is not k x dim");
  }
  detail::ByteWriter w;
  w.reserve(64 + m.centroids.size() * 4 + file.labels.size() * 2);
  w.bytes(kModelMagic);
  w.u32(kModelFormatVersion);
  w.u32(m.k);
  w.u32(m.dim);
  w.u32(m.layer);
  w.f64(m.sse);
  w.u64(m.rng_seed);
  w.u32(m.restart_index);
  w.u32(m.iterations);
  w.u64(file.labels.size());
  for (float v : m.centroids) w.f32(v);
  for (Label l : file.labels) w.u16(l);
  return w.take();
}

ModelFile decode_model(std::string_view bytes) {
  detail::ByteReader r(bytes);
  std::string_view magic;
  if (!r.bytes(kModelMagic.size(), magic) || magic != kModelMagic) {
    throw FormatError(FormatErrorCode::kBadMagic, "bad magic: not a model file");
  }
  std::uint32_t version = 0;
  if (!r.u32(version)) throw FormatError(FormatErrorCode::kTruncated, "truncated header");
  if (version != kModelFormatVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch,
                      "unsupported model format version " + std::to_string(version));
  }
  ModelFile f;
  auto& m = f.model;
  std::uint64_t count = 0;
  if (!r.u32(m.k) || !r.u32(m.dim) || !r.u32(m.layer) || !r.f64(m.sse) || !r.u64(m.rng_seed) ||
      !r.u32(m.restart_index) || !r.u32(m.iterations) || !r.u64(count)) {
    throw FormatError(FormatErrorCode::kTruncated, "truncated header");
  }
  const std::size_t cells = static_cast<std::size_t>(m.k) * m.dim;
  if (r.remaining() < cells * 4) {
    throw FormatError(FormatErrorCode::kTruncated, "truncated in centroid matrix");
  }
  if (m.k == 0 || m.dim == 0) {
    throw FormatError(FormatErrorCode::kInvalidRecord, "model header declares k or dim of 0");
  }
  m.centroids.resize(cells);
  for (auto& v : m.centroids) {
    r.f32(v);
    if (!std::isfinite(v)) throw FormatError(FormatErrorCode::kInvalidRecord, "non-finite centroid");
  }
  if (count > r.remaining() / 2) {
    throw FormatError(FormatErrorCode::kTruncated,
                      "truncated at label " + std::to_string(r.remaining() / 2));
  }
  f.labels.resize(count);
  for (auto& l : f.labels) {
    r.u16(l);
    if (l >= m.k) {
      throw FormatError(FormatErrorCode::kInvalidRecord,
                        "label " + std::to_string(l) + " out of range for k=" + std::to_string(m.k));
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorCode::kCountMismatch, "trailing bytes after labels");
  }
  return f;
}

void write_model(const ModelFile& file, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(file));
}

ModelFile read_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

std::string model_file_name(std::uint32_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer_%02u.model", layer);
  return buf;
}

}  // namespace embprobe
