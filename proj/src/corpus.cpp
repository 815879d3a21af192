#include "embprobe/corpus.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <json.hpp>
#include <sstream>

#include "embprobe/error.hpp"
#include "embprobe/io_util.hpp"

namespace embprobe {

namespace {

using json = nlohmann::json;

struct CodePoint {
  UChar32 value;
  std::size_t begin;
  std::size_t end;
};

std::vector<CodePoint> decode_utf8(std::string_view text, std::size_t base_offset) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) {
      throw EncodingError(base_offset + static_cast<std::size_t>(start),
                          "invalid UTF-8 at byte offset " +
                              std::to_string(base_offset + static_cast<std::size_t>(start)));
    }
    out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
  }
  return out;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c); }

std::vector<std::string> tokenize_at(std::string_view line, std::size_t base_offset) {
  const auto cps = decode_utf8(line, base_offset);
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (is_space(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j].value)) ++j;
    // chunk = cps[i, j)
    std::size_t lo = i;
    std::size_t hi = j;
    while (lo < hi && u_ispunct(cps[lo].value)) ++lo;
    std::size_t tail = hi;
    while (tail > lo && u_ispunct(cps[tail - 1].value)) --tail;
    auto slice = [&](std::size_t a, std::size_t b) {
      return std::string(line.substr(cps[a].begin, cps[b - 1].end - cps[a].begin));
    };
    for (std::size_t p = i; p < lo; ++p) words.push_back(slice(p, p + 1));
    if (lo < tail) words.push_back(slice(lo, tail));
    for (std::size_t p = tail; p < hi; ++p) words.push_back(slice(p, p + 1));
    i = j;
  }
  return words;
}

}  // namespace

void SubwordAlignment::validate() const {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].first > ranges[i].last) {
      throw ValidationError("alignment: empty range at position " + std::to_string(i));
    }
    if (i > 0 && ranges[i].first <= ranges[i - 1].last) {
      throw ValidationError("alignment: overlapping ranges at position " + std::to_string(i));
    }
  }
}

std::vector<std::string> tokenize(std::string_view line) { return tokenize_at(line, 0); }

std::vector<Sentence> load_corpus(std::istream& in) {
  std::vector<Sentence> sentences;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t consumed = line.size() + (in.eof() ? 0 : 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto words = tokenize_at(line, offset);
    offset += consumed;
    if (words.empty()) continue;
    Sentence s;
    s.id = sentences.size();
    s.words = std::move(words);
    s.raw_text = line;
    sentences.push_back(std::move(s));
  }
  if (in.bad()) throw IoError("corpus read failed");
  if (sentences.empty()) throw ValidationError("empty corpus");
  return sentences;
}

std::vector<Sentence> load_corpus_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return load_corpus(in);
}

std::span<const float> word_vector_of(const SubwordAlignment& alignment,
                                      const SubwordMatrix& subword_vectors,
                                      std::size_t position) {
  if (position >= alignment.ranges.size()) {
    throw ValidationError("alignment: position " + std::to_string(position) +
                          " has no subword range");
  }
  const auto last = alignment.ranges[position].last;
  if (last >= subword_vectors.rows) {
    throw ValidationError("alignment: subword " + std::to_string(last) +
                          " outside vector matrix of " +
                          std::to_string(subword_vectors.rows) + " rows");
  }
  return subword_vectors.row(last);
}

std::string manifest_to_json(std::span<const Sentence> sentences) {
  json arr = json::array();
  for (const auto& s : sentences) {
    arr.push_back({{"id", s.id}, {"words", s.words}, {"raw_text", s.raw_text}});
  }
  return arr.dump() + "\n";
}

std::vector<Sentence> manifest_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("manifest: expected a JSON array");
  std::vector<Sentence> out;
  out.reserve(doc.size());
  for (const auto& item : doc) {
    Sentence s;
    try {
      s.id = item.at("id").get<std::uint64_t>();
      s.words = item.at("words").get<std::vector<std::string>>();
      s.raw_text = item.at("raw_text").get<std::string>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("manifest entry: ") + e.what());
    }
    if (s.id != out.size()) {
      throw ValidationError("manifest: ids must be dense, expected " +
                            std::to_string(out.size()) + " got " + std::to_string(s.id));
    }
    if (s.words.empty()) {
      throw ValidationError("manifest: sentence " + std::to_string(s.id) + " has no words");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(std::span<const Sentence> sentences, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_json(sentences));
}

std::vector<Sentence> read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path));
}

std::size_t token_count(std::span<const Sentence> sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.words.size();
  return n;
}

}  // namespace embprobe
