#include "embprobe/embedding_store.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "binary_io.hpp"
#include "embprobe/error.hpp"
#include "embprobe/io_util.hpp"
#include "embprobe/rng.hpp"

namespace embprobe {

namespace {

using json = nlohmann::json;
using detail::ByteReader;
using detail::ByteWriter;

std::string record_label(std::size_t i) { return "record " + std::to_string(i); }

[[noreturn]] void truncated(std::size_t i) {
  throw FormatError(FormatErrorCode::kTruncated, "truncated at " + record_label(i));
}

bool valid_word(std::string_view w) {
  if (w.empty()) return false;
  std::int32_t i = 0;
  const auto n = static_cast<std::int32_t>(w.size());
  while (i < n) {
    UChar32 c;
    U8_NEXT(w.data(), i, n, c);
    // tokens never hold whitespace or control characters
    if (c < 0 || u_iscntrl(c) || u_isUWhiteSpace(c)) return false;
  }
  return true;
}

// Called once a payload turned out not to line up with its header. Records
// carry no dim of their own, so a record with the wrong number of floats
// shows up as the following record header being garbage (or as leftover
// bytes after the last one). Returns the first record whose successor does
// not look like a record, or nullopt when the data is simply cut short.
std::optional<std::uint64_t> find_misaligned_record(ByteReader r, std::uint32_t dim,
                                                    std::uint64_t count) {
  constexpr std::uint64_t kMaxPlausibleId = std::uint64_t{1} << 40;
  constexpr std::uint32_t kMaxPlausibleLen = 1u << 16;
  WordRef prev;
  for (std::uint64_t i = 0; i < count; ++i) {
    WordRef ref;
    std::uint32_t len = 0;
    std::string_view word;
    if (!r.u64(ref.sentence_id) || !r.u32(ref.position) || !r.u32(len)) return std::nullopt;
    if (!r.bytes(len, word) || r.remaining() < 4 * static_cast<std::size_t>(dim)) return std::nullopt;
    std::string_view skip;
    r.bytes(4 * static_cast<std::size_t>(dim), skip);
    prev = ref;
    if (i + 1 == count) return r.remaining() != 0 ? std::optional<std::uint64_t>(i) : std::nullopt;

    ByteReader peek = r;
    WordRef next;
    std::uint32_t next_len = 0;
    if (!peek.u64(next.sentence_id) || !peek.u32(next.position) || !peek.u32(next_len)) {
      return std::nullopt;
    }
    std::string_view next_word;
    const bool plausible = next.sentence_id < kMaxPlausibleId && prev < next &&
                           next_len <= kMaxPlausibleLen && peek.bytes(next_len, next_word) &&
                           valid_word(next_word);
    if (!plausible) return i;
  }
  return std::nullopt;
}

}  // namespace

void EmbeddingSet::add(WordRef ref, std::string word, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw FormatError(FormatErrorCode::kDimMismatch,
                      "dim mismatch at " + record_label(refs_.size()) + ": expected " +
                          std::to_string(dim_) + " got " + std::to_string(vector.size()));
  }
  refs_.push_back(ref);
  words_.push_back(std::move(word));
  data_.insert(data_.end(), vector.begin(), vector.end());
}

void EmbeddingSet::reserve(std::size_t n) {
  refs_.reserve(n);
  words_.reserve(n);
  data_.reserve(n * dim_);
}

void EmbeddingSet::validate() const {
  if (dim_ == 0 && !refs_.empty()) throw ValidationError("embedding set: dim must be positive");
  if (data_.size() != refs_.size() * dim_ || words_.size() != refs_.size()) {
    throw InvariantError("embedding set: storage size mismatch");
  }
  for (std::size_t i = 0; i < refs_.size(); ++i) {
    for (float v : vector(i)) {
      if (!std::isfinite(v)) {
        throw ValidationError("embedding set: non-finite value in " + record_label(i));
      }
    }
    if (i > 0 && !(refs_[i - 1] < refs_[i])) {
      throw ValidationError("embedding set: " + record_label(i) +
                            " out of (sentence, position) order or duplicated");
    }
  }
}

void EmbeddingSet::check_against(std::span<const Sentence> corpus, bool require_full) const {
  for (std::size_t i = 0; i < refs_.size(); ++i) {
    const auto& r = refs_[i];
    if (r.sentence_id >= corpus.size() || r.position >= corpus[r.sentence_id].words.size()) {
      throw ValidationError("embedding set: " + record_label(i) +
                            " does not resolve against the manifest");
    }
    if (corpus[r.sentence_id].words[r.position] != words_[i]) {
      throw ValidationError("embedding set: " + record_label(i) + " surface form '" +
                            words_[i] + "' does not match manifest word '" +
                            corpus[r.sentence_id].words[r.position] + "'");
    }
  }
  if (require_full && refs_.size() != token_count(corpus)) {
    throw FormatError(FormatErrorCode::kCountMismatch,
                      "record count " + std::to_string(refs_.size()) +
                          " does not match manifest token count " +
                          std::to_string(token_count(corpus)));
  }
}

std::string encode_embeddings(const EmbeddingSet& set) {
  ByteWriter w;
  std::size_t payload = 0;
  for (const auto& word : set.words()) payload += 16 + word.size() + 4 * set.dim();
  w.reserve(28 + payload);
  w.bytes(kEmbeddingMagic);
  w.u32(kEmbeddingFormatVersion);
  w.u32(set.layer());
  w.u32(set.dim());
  w.u64(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.u64(set.ref(i).sentence_id);
    w.u32(set.ref(i).position);
    w.u32(static_cast<std::uint32_t>(set.word(i).size()));
    w.bytes(set.word(i));
    for (float v : set.vector(i)) w.f32(v);
  }
  return w.take();
}

EmbeddingSet decode_embeddings(std::string_view bytes) {
  ByteReader r(bytes);
  std::string_view magic;
  if (!r.bytes(kEmbeddingMagic.size(), magic) || magic != kEmbeddingMagic) {
    throw FormatError(FormatErrorCode::kBadMagic, "bad magic: not an embedding file");
  }
  std::uint32_t version = 0, layer = 0, dim = 0;
  std::uint64_t count = 0;
  if (!r.u32(version)) throw FormatError(FormatErrorCode::kTruncated, "truncated header");
  if (version != kEmbeddingFormatVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch,
                      "unsupported format version " + std::to_string(version));
  }
  if (!r.u32(layer) || !r.u32(dim) || !r.u64(count)) {
    throw FormatError(FormatErrorCode::kTruncated, "truncated header");
  }
  if (dim == 0 && count > 0) {
    throw FormatError(FormatErrorCode::kDimMismatch, "header declares dim 0");
  }
  const ByteReader payload = r;
  auto fail = [&](std::uint64_t i) {
    if (const auto bad = find_misaligned_record(payload, dim, count)) {
      throw FormatError(FormatErrorCode::kDimMismatch,
                        "dim mismatch at " + record_label(*bad) + ": record does not hold " +
                            std::to_string(dim) + " floats");
    }
    truncated(i);
  };

  // Smallest possible record is 16 bytes of ids plus the vector.
  const std::size_t min_record = 16 + 4 * static_cast<std::size_t>(dim);
  if (count > r.remaining() / min_record) {
    // Report the first record index that cannot fit.
    fail(r.remaining() / min_record);
  }

  EmbeddingSet set(layer, dim);
  set.reserve(count);
  std::vector<float> vec(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    WordRef ref;
    std::uint32_t len = 0;
    std::string_view word;
    if (!r.u64(ref.sentence_id) || !r.u32(ref.position) || !r.u32(len)) fail(i);
    if (!r.bytes(len, word)) fail(i);
    for (auto& v : vec) {
      if (!r.f32(v)) fail(i);
    }
    set.add(ref, std::string(word), vec);
  }
  if (r.remaining() != 0) {
    if (const auto bad = find_misaligned_record(payload, dim, count)) {
      throw FormatError(FormatErrorCode::kDimMismatch,
                        "dim mismatch at " + record_label(*bad) + ": record does not hold " +
                            std::to_string(dim) + " floats");
    }
    throw FormatError(FormatErrorCode::kDimMismatch,
                      std::to_string(r.remaining()) +
                          " trailing bytes after last record; header dim does not match records");
  }
  try {
    set.validate();
  } catch (const ValidationError& e) {
    throw FormatError(FormatErrorCode::kInvalidRecord, e.what());
  }
  return set;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  set.validate();
  write_file_atomic(path, encode_embeddings(set));
}

EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             std::optional<std::span<const Sentence>> manifest) {
  auto set = decode_embeddings(read_file(path));
  if (manifest) {
    if (set.size() != token_count(*manifest)) {
      throw FormatError(FormatErrorCode::kCountMismatch,
                        path.string() + ": record count " + std::to_string(set.size()) +
                            " does not match manifest token count " +
                            std::to_string(token_count(*manifest)));
    }
    set.check_against(*manifest);
  }
  return set;
}

void LayerCatalog::validate() const {
  for (const auto& entry : layers) {
    if (entry.records != layers.front().records) {
      throw ValidationError("catalog: layer " + std::to_string(entry.layer) + " has " +
                            std::to_string(entry.records) + " records, layer " +
                            std::to_string(layers.front().layer) + " has " +
                            std::to_string(layers.front().records));
    }
  }
}

std::string catalog_to_json(const LayerCatalog& catalog) {
  json layers = json::array();
  for (const auto& e : catalog.layers) {
    layers.push_back({{"layer", e.layer}, {"path", e.path}, {"records", e.records}});
  }
  json doc = {{"model", catalog.model},
              {"num_layers", catalog.num_layers},
              {"dim", catalog.dim},
              {"layers", layers}};
  return doc.dump(2) + "\n";
}

LayerCatalog catalog_from_json(std::string_view text) {
  LayerCatalog c;
  try {
    const json doc = json::parse(text);
    c.model = doc.at("model").get<std::string>();
    c.num_layers = doc.at("num_layers").get<std::uint32_t>();
    c.dim = doc.at("dim").get<std::uint32_t>();
    for (const auto& e : doc.at("layers")) {
      c.layers.push_back({e.at("layer").get<std::uint32_t>(), e.at("path").get<std::string>(),
                          e.at("records").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("catalog: ") + e.what());
  }
  c.validate();
  return c;
}

void write_catalog(const LayerCatalog& catalog, const std::filesystem::path& path) {
  catalog.validate();
  write_file_atomic(path, catalog_to_json(catalog));
}

LayerCatalog read_catalog(const std::filesystem::path& path) {
  return catalog_from_json(read_file(path));
}

std::string embedding_file_name(std::uint32_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer_%02u.emb", layer);
  return buf;
}

SyntheticData generate_synthetic(const SyntheticParams& p) {
  if (p.num_sentences == 0 || p.words_per_sentence == 0 || p.dim == 0 || p.num_modes == 0 ||
      p.num_layers == 0 || p.vocab_size == 0) {
    throw ValidationError("synthetic: all size parameters must be positive");
  }
  if (!(p.separation > 0.0) || !(p.stddev > 0.0)) {
    throw ValidationError("synthetic: separation and stddev must be positive");
  }

  SyntheticData out;
  out.mode_means.assign(p.num_modes, std::vector<float>(p.dim, 0.0f));
  for (std::uint32_t m = 0; m < p.num_modes; ++m) {
    // Axis m mod dim, pushed further out on each wrap so no two means coincide.
    const double scale = p.separation * p.stddev * (1.0 + static_cast<double>(m / p.dim));
    out.mode_means[m][m % p.dim] = static_cast<float>(scale);
  }

  std::vector<std::string> vocab(p.vocab_size);
  for (std::size_t t = 0; t < p.vocab_size; ++t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "w%03zu", t);
    vocab[t] = buf;
  }

  Rng rng(p.seed);
  std::vector<std::size_t> types;
  out.sentences.reserve(p.num_sentences);
  for (std::size_t s = 0; s < p.num_sentences; ++s) {
    Sentence sentence;
    sentence.id = s;
    for (std::size_t j = 0; j < p.words_per_sentence; ++j) {
      const auto t = static_cast<std::size_t>(rng.below(p.vocab_size));
      types.push_back(t);
      sentence.words.push_back(vocab[t]);
    }
    for (std::size_t j = 0; j < sentence.words.size(); ++j) {
      if (j) sentence.raw_text += ' ';
      sentence.raw_text += sentence.words[j];
    }
    out.sentences.push_back(std::move(sentence));
  }

  out.modes.reserve(types.size());
  for (std::size_t t : types) {
    auto mode = static_cast<std::uint32_t>(t % p.num_modes);
    if (p.num_modes > 1 && t % 3 == 0 && rng.uniform() < 0.5) {
      mode = (mode + 1) % p.num_modes;
    }
    out.modes.push_back(mode);
  }

  std::vector<float> vec(p.dim);
  for (std::uint32_t layer = 1; layer <= p.num_layers; ++layer) {
    Rng noise(derive_seed(p.seed, layer));
    // Deeper pseudo-layers are noisier; modes stay far apart relative to it.
    const double sigma = p.stddev * (1.0 + 0.25 * (layer - 1));
    EmbeddingSet set(layer, p.dim);
    set.reserve(types.size());
    std::size_t rec = 0;
    for (const auto& sentence : out.sentences) {
      for (std::uint32_t pos = 0; pos < sentence.words.size(); ++pos, ++rec) {
        const auto& mean = out.mode_means[out.modes[rec]];
        for (std::uint32_t d = 0; d < p.dim; ++d) {
          vec[d] = static_cast<float>(mean[d] + sigma * noise.normal());
        }
        set.add({sentence.id, pos}, sentence.words[pos], vec);
      }
    }
    out.layers.push_back(std::move(set));
  }
  return out;
}

}  // namespace embprobe
