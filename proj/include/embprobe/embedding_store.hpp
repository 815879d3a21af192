#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embprobe/corpus.hpp"

namespace embprobe {

inline constexpr std::string_view kEmbeddingMagic = "EMBPROBE";
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

// Per-layer word vectors with provenance. Vectors are stored row-major in one
// contiguous buffer; record i occupies data[i*dim, (i+1)*dim).
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::uint32_t layer, std::uint32_t dim) : layer_(layer), dim_(dim) {}

  std::uint32_t layer() const noexcept { return layer_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return refs_.size(); }
  bool empty() const noexcept { return refs_.empty(); }

  // Throws FormatError(kDimMismatch) naming the record if vector.size() != dim.
  void add(WordRef ref, std::string word, std::span<const float> vector);
  void reserve(std::size_t n);

  const WordRef& ref(std::size_t i) const { return refs_[i]; }
  const std::string& word(std::size_t i) const { return words_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const WordRef> refs() const noexcept { return refs_; }
  std::span<const std::string> words() const noexcept { return words_; }

  // Checks finiteness and strict (sentence_id, position) ordering. Throws
  // ValidationError naming the first offending record.
  void validate() const;

  // Checks every record against the corpus: ref resolves, surface form
  // matches, and (if require_full) every corpus word has a record.
  void check_against(std::span<const Sentence> corpus, bool require_full = true) const;

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::uint32_t layer_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<WordRef> refs_;
  std::vector<std::string> words_;
  std::vector<float> data_;
};

// Binary layout (little-endian):
//   "EMBPROBE" | version u32 | layer u32 | dim u32 | count u64 |
//   count x { sentence_id u64 | position u32 | len u32 | utf8[len] | dim x f32 }
std::string encode_embeddings(const EmbeddingSet& set);
EmbeddingSet decode_embeddings(std::string_view bytes);

// Validates before writing; nothing is written if validation fails.
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

// When a manifest is given, the set is cross-checked against it and a record
// count mismatch raises FormatError(kCountMismatch).
EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             std::optional<std::span<const Sentence>> manifest = std::nullopt);

struct LayerEntry {
  std::uint32_t layer = 0;
  std::string path;  // relative to the catalog's directory
  std::uint64_t records = 0;
};

struct LayerCatalog {
  std::string model;
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::vector<LayerEntry> layers;

  // Throws ValidationError when record counts disagree across layers.
  void validate() const;
};

std::string catalog_to_json(const LayerCatalog& catalog);
LayerCatalog catalog_from_json(std::string_view text);
void write_catalog(const LayerCatalog& catalog, const std::filesystem::path& path);
LayerCatalog read_catalog(const std::filesystem::path& path);

// Conventional file name inside an embeddings directory: layer_07.emb
std::string embedding_file_name(std::uint32_t layer);
inline constexpr std::string_view kCatalogFileName = "catalog.json";

struct SyntheticParams {
  std::size_t num_sentences = 100;
  std::size_t words_per_sentence = 10;
  std::uint32_t dim = 16;
  std::uint32_t num_modes = 4;
  std::uint64_t seed = 0;
  std::uint32_t num_layers = 2;
  std::size_t vocab_size = 64;
  // Distance scale between mode means, in units of the noise stddev.
  double separation = 20.0;
  double stddev = 1.0;
};

struct SyntheticData {
  std::vector<Sentence> sentences;
  std::vector<EmbeddingSet> layers;    // layers 1..num_layers
  std::vector<std::uint32_t> modes;    // generating mode of each token, record order
  std::vector<std::vector<float>> mode_means;
};

// Gaussian mixture with known ground truth. Word type t is tied to mode
// t mod num_modes; every third type is additionally tied to the next mode and
// picks one of its two modes per token. Deterministic in the seed.
SyntheticData generate_synthetic(const SyntheticParams& params);

}  // namespace embprobe
