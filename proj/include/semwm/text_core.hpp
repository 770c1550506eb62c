#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semwm/common.hpp"

namespace semwm {

/// Lowercased word tokens; every non-space punctuation byte is its own token.
/// Letters, digits, apostrophes and UTF-8 continuation bytes form words.
std::vector<std::string> split_words(std::string_view text);

/// Number of whitespace-delimited words, the unit of the corpus length filter.
std::size_t count_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  /// Builds from an id-ordered token list; tokens[0] must be the UNK token.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// FNV-1a over the id-ordered token list; binds models to this vocabulary.
  std::uint64_t hash() const { return hash_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::uint64_t hash_ = 0;
};

struct TokenSeq {
  std::vector<TokenId> ids;
  std::string source_text;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

/// Most frequent word types first, ties broken lexicographically, UNK at id 0.
/// max_size counts the UNK entry. Throws DataError("empty corpus").
Vocabulary build_vocab(std::span<const std::string> corpus_texts, std::size_t max_size = 2000);

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

struct CorpusProvenance {
  std::string source_path;
  std::size_t min_words = 0;
  std::size_t max_words = 0;
  std::size_t records_read = 0;
  std::size_t dropped_short = 0;
  std::size_t truncated = 0;
};

/// Filtered raw documents. Tokenization happens once a vocabulary exists; see
/// tokenize_corpus.
struct Corpus {
  std::vector<std::string> documents;
  CorpusProvenance provenance;
};

constexpr std::size_t kNoWordLimit = std::numeric_limits<std::size_t>::max();

/// Reads one document per line (.txt) or newline-delimited JSON records with
/// a "text" field (.jsonl). Documents with fewer than min_words words are
/// dropped; longer than max_words are truncated to their first max_words.
Corpus ingest_corpus(const std::filesystem::path& path, std::size_t min_words = 200,
                     std::size_t max_words = 300);

/// Same filter applied to in-memory documents.
Corpus filter_documents(std::vector<std::string> raw, std::size_t min_words, std::size_t max_words,
                        std::string source = "<memory>");

std::vector<TokenSeq> tokenize_corpus(std::span<const std::string> docs, const Vocabulary& vocab);

/// Reads a plain text file of one document per line, skipping blank lines.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines,
                 std::string_view header = {});

}  // namespace semwm
