#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embprobe/embedding_store.hpp"
#include "embprobe/rng.hpp"

namespace embprobe {

using Label = std::uint16_t;  // 0-based cluster index

inline constexpr std::uint32_t kDefaultK = 50;
inline constexpr std::uint32_t kDefaultRestarts = 5;
inline constexpr std::uint32_t kDefaultMaxIters = 300;
inline constexpr double kDefaultTol = 1e-4;

struct ClusterModel {
  std::uint32_t layer = 0;
  std::uint32_t k = 0;
  std::uint32_t dim = 0;
  std::vector<float> centroids;  // k x dim, row-major
  double sse = 0.0;
  std::uint32_t restart_index = 0;
  std::uint64_t rng_seed = 0;
  std::uint32_t iterations = 0;

  std::span<const float> centroid(std::size_t c) const {
    return std::span<const float>(centroids).subspan(c * dim, dim);
  }

  bool operator==(const ClusterModel&) const = default;
};

struct FitResult {
  ClusterModel model;
  std::vector<Label> labels;        // one per record, EmbeddingSet order
  std::vector<double> sse_history;  // SSE after each assignment step
};

struct LloydOptions {
  std::uint32_t max_iters = kDefaultMaxIters;
  double tol = kDefaultTol;          // max centroid movement, embedding units
  unsigned num_threads = 1;          // assignment step only; results do not depend on it
};

struct FitOptions {
  std::uint32_t k = kDefaultK;
  std::uint32_t restarts = kDefaultRestarts;
  std::uint64_t rng_seed = 0;
  LloydOptions lloyd;
};

struct BestOfResult {
  FitResult best;
  std::vector<double> restart_sse;  // final SSE of every restart, in order
};

// k-means++ D^2 sampling where, once a seed is chosen, every vector sharing
// its surface form drops out of the candidate pool. The first seed is uniform
// over all vectors. Returns k x dim centroids. Throws ValidationError when
// there are fewer than k distinct word types.
std::vector<float> seed_unique_words(const EmbeddingSet& set, std::uint32_t k,
                                     UniformSource& rng);

// Same as above, also reporting the chosen record indices in draw order.
std::vector<float> seed_unique_words(const EmbeddingSet& set, std::uint32_t k,
                                     UniformSource& rng, std::vector<std::size_t>& chosen);

// Lloyd iteration from the given centroids. A cluster left empty by an
// assignment step is moved onto the vector farthest from its own centroid.
FitResult lloyd_fit(const EmbeddingSet& set, std::span<const float> initial_centroids,
                    std::uint32_t k, const LloydOptions& options = {});

// `restarts` seeded runs; restart i draws from Rng(derive_seed(rng_seed, i)).
// Lowest final SSE wins, earliest restart on ties.
BestOfResult fit_best_of(const EmbeddingSet& set, const FitOptions& options);

// Nearest centroid under Euclidean distance, lowest index on ties.
std::vector<Label> assign(std::span<const float> vectors, std::span<const float> centroids,
                          std::uint32_t dim, unsigned num_threads = 1);

double squared_distance(std::span<const float> a, std::span<const float> b);

double sum_squared_error(std::span<const float> vectors, std::span<const float> centroids,
                         std::uint32_t dim, std::span<const Label> labels);

// Model file: "EMBMODEL" | version u32 | k u32 | dim u32 | layer u32 | sse f64 |
// rng_seed u64 | restart_index u32 | iterations u32 | count u64 |
// centroids k*dim f32 | labels count u16.
inline constexpr std::string_view kModelMagic = "EMBMODEL";
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  ClusterModel model;
  std::vector<Label> labels;

  bool operator==(const ModelFile&) const = default;
};

std::string encode_model(const ModelFile& file);
ModelFile decode_model(std::string_view bytes);
void write_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile read_model(const std::filesystem::path& path);

std::string model_file_name(std::uint32_t layer);

}  // namespace embprobe
