#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace embprobe {

struct Sentence {
  std::uint64_t id = 0;
  std::vector<std::string> words;
  std::string raw_text;

  bool operator==(const Sentence&) const = default;
};

struct WordRef {
  std::uint64_t sentence_id = 0;
  std::uint32_t position = 0;

  auto operator<=>(const WordRef&) const = default;
};

// Inclusive subword index range covering one word.
struct SubwordRange {
  std::uint32_t first = 0;
  std::uint32_t last = 0;
};

// Word -> subword mapping for one sentence; ranges[i] belongs to word i.
// Special tokens are never part of any range.
struct SubwordAlignment {
  std::uint64_t sentence_id = 0;
  std::vector<SubwordRange> ranges;

  // Throws ValidationError if ranges are empty, reversed, or not strictly
  // increasing across positions.
  void validate() const;
};

// Splits one line into words: whitespace separated chunks, with leading and
// trailing Unicode punctuation characters detached as single-character words.
// Case is preserved. Throws EncodingError on invalid UTF-8 (offset relative to
// the start of `line`).
std::vector<std::string> tokenize(std::string_view line);

// One Sentence per non-blank line, ids dense in file order. Throws
// EncodingError with the absolute byte offset of invalid input and
// ValidationError("empty corpus") when no sentence is produced.
std::vector<Sentence> load_corpus(std::istream& in);
std::vector<Sentence> load_corpus_file(const std::filesystem::path& path);

// Row-major subword vectors of one sentence (rows x dim).
struct SubwordMatrix {
  std::span<const float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t r) const {
    return data.subspan(r * dim, dim);
  }
};

// The word's vector is the vector of its last subword.
std::span<const float> word_vector_of(const SubwordAlignment& alignment,
                                      const SubwordMatrix& subword_vectors,
                                      std::size_t position);

// Manifest: JSON array of {id, words, raw_text}.
std::string manifest_to_json(std::span<const Sentence> sentences);
std::vector<Sentence> manifest_from_json(std::string_view text);
void write_manifest(std::span<const Sentence> sentences,
                    const std::filesystem::path& path);
std::vector<Sentence> read_manifest(const std::filesystem::path& path);

std::size_t token_count(std::span<const Sentence> sentences);

}  // namespace embprobe
