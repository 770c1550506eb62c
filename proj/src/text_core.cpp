#include "semwm/text_core.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace semwm {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' ||
         c >= 0x80;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::uint64_t hash_tokens(const std::vector<std::string>& tokens) {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      std::string word;
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
        auto b = static_cast<unsigned char>(text[i]);
        word.push_back(b >= 'A' && b <= 'Z' ? static_cast<char>(b - 'A' + 'a') : static_cast<char>(b));
        ++i;
      }
      out.push_back(std::move(word));
    } else {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kUnkToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != kUnkToken) {
    throw FormatError("vocabulary must start with the " + std::string(kUnkToken) + " token");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw FormatError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
  hash_ = hash_tokens(tokens_);
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary: " + path.string());
  out << "vocab v1 " << tokens_.size() << '\n';
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw DataError("failed writing vocabulary: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary: " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  std::size_t size = 0;
  if (!(hs >> magic >> version >> size) || magic != "vocab") {
    throw FormatError("not a vocabulary file: " + path.string());
  }
  if (version != "v1") throw FormatError("unsupported vocabulary version: " + version);
  std::vector<std::string> tokens;
  tokens.reserve(size);
  std::string line;
  while (tokens.size() < size && std::getline(in, line)) tokens.push_back(line);
  if (tokens.size() != size) throw FormatError("truncated vocabulary file: " + path.string());
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocab(std::span<const std::string> corpus_texts, std::size_t max_size) {
  if (max_size < 1) throw UsageError("vocabulary size must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus_texts) {
    for (auto& w : split_words(text)) ++counts[std::move(w)];
  }
  counts.erase(std::string(Vocabulary::kUnkToken));
  if (counts.empty()) throw DataError("empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // alone yields the lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens{std::string(Vocabulary::kUnkToken)};
  for (auto& [word, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(word);
  }
  return Vocabulary(std::move(tokens));
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSeq seq;
  seq.source_text = std::string(text);
  for (const auto& w : split_words(text)) seq.ids.push_back(vocab.id_of(w));
  return seq;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

Corpus filter_documents(std::vector<std::string> raw, std::size_t min_words, std::size_t max_words,
                        std::string source) {
  if (min_words > max_words) throw UsageError("min_words exceeds max_words");
  Corpus corpus;
  corpus.provenance.source_path = std::move(source);
  corpus.provenance.min_words = min_words;
  corpus.provenance.max_words = max_words;
  corpus.provenance.records_read = raw.size();
  for (auto& doc : raw) {
    std::size_t n = count_words(doc);
    if (n < min_words || n == 0) {
      ++corpus.provenance.dropped_short;
      continue;
    }
    if (n > max_words) {
      std::istringstream words(doc);
      std::string w, kept;
      for (std::size_t i = 0; i < max_words && words >> w; ++i) {
        if (i) kept.push_back(' ');
        kept += w;
      }
      doc = std::move(kept);
      ++corpus.provenance.truncated;
    }
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw DataError("no documents survived the length filter");
  return corpus;
}

Corpus ingest_corpus(const std::filesystem::path& path, std::size_t min_words, std::size_t max_words) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus: " + path.string());
  const bool jsonl = path.extension() == ".jsonl";
  std::vector<std::string> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (jsonl) {
      try {
        auto rec = nlohmann::json::parse(line);
        raw.push_back(rec.at("text").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad record: " + e.what());
      }
    } else {
      raw.push_back(line);
    }
  }
  return filter_documents(std::move(raw), min_words, max_words, path.string());
}

std::vector<TokenSeq> tokenize_corpus(std::span<const std::string> docs, const Vocabulary& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(tokenize(d, vocab));
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines,
                 std::string_view header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path.string());
  if (!header.empty()) out << header << '\n';
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace semwm
