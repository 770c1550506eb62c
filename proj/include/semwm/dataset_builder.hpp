#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semwm/common.hpp"
#include "semwm/llm_client.hpp"
#include "semwm/text_core.hpp"
#include "semwm/trainer.hpp"

namespace semwm {

enum class Sentiment { negative, neutral, positive };
std::string_view to_string(Sentiment s);

enum class TransformKind { paraphrase, sentiment_reversal, latter_half_reversal, hate_insertion };
std::string_view to_string(TransformKind k);
/// Throws UsageError on an unknown name.
TransformKind parse_transform_kind(std::string_view name);

enum class Permissibility { permissible, impermissible };

struct TransformSpec {
  TransformKind kind = TransformKind::paraphrase;
  double replace_rate = 0.15;   // paraphrase
  std::size_t max_edits = 10;   // sentiment kinds
  std::size_t n_phrases = 1;    // hate insertion
  std::uint64_t seed = 0;

  /// Only paraphrase is permissible.
  Permissibility permissibility() const {
    return kind == TransformKind::paraphrase ? Permissibility::permissible : Permissibility::impermissible;
  }
};

/// Lexicon directory layout (all UTF-8, '#' comments and blank lines ignored):
///   synonyms.tsv        one synset per line, members tab-separated
///   polarity.tsv        "positive<TAB>negative" antonym pairs
///   hate_templates.txt  one template per line with exactly one [GROUP]
///   groups.txt          one group name per line
struct Lexicons {
  std::unordered_map<std::string, std::vector<std::string>> synonyms;  // word -> other members, sorted
  std::unordered_map<std::string, Sentiment> polarity;
  std::unordered_map<std::string, std::string> antonym;
  std::vector<std::string> hate_templates;
  std::vector<std::string> groups;

  static Lexicons load(const std::filesystem::path& dir);
  /// Adds a synset; every member becomes a synonym of every other.
  void add_synset(std::span<const std::string> members);
  void add_antonym_pair(const std::string& positive, const std::string& negative);
  /// Throws FormatError: asymmetric or conflicting antonyms, templates
  /// without exactly one [GROUP], multi-token synonyms, empty lists.
  void validate() const;
  /// Every word the lexicons can emit, for vocabulary construction.
  std::vector<std::string> vocabulary_texts() const;
};

inline constexpr std::string_view kGroupPlaceholder = "[GROUP]";

std::string join_words(std::span<const std::string> words);
/// max(|a|, |b|) / min(|a|, |b|) in word tokens; infinity if either is empty.
double length_ratio(std::string_view a, std::string_view b);
inline constexpr double kMaxLengthRatio = 1.5;

// --- local transforms ---------------------------------------------------

/// Each word with synonyms is replaced, with probability replace_rate, by a
/// uniformly drawn synonym. Word count is unchanged.
std::vector<std::string> paraphrase_words(std::span<const std::string> words, const Lexicons& lex,
                                          double replace_rate, Rng& rng);
std::string paraphrase_local(std::string_view text, const Lexicons& lex, double replace_rate, Rng& rng);

Sentiment classify_sentiment_words(std::span<const std::string> words, const Lexicons& lex);
Sentiment classify_sentiment_local(std::string_view text, const Lexicons& lex);

enum class FlipRegion { whole, latter_half };

/// First 0-based word index a latter-half edit may touch: ceil(L / 2), i.e.
/// 1-based positions strictly after ceil(L / 2).
std::size_t latter_half_start(std::size_t length);

struct FlipResult {
  bool ok = false;
  std::vector<std::string> words;
  std::vector<std::size_t> edited;  // 0-based positions
  Sentiment original = Sentiment::neutral;
  Sentiment target = Sentiment::neutral;
  std::string reason;  // set on rejection
};

/// Target: positive <-> negative; neutral draws a random target. Up to
/// max_edits polarity words of the opposite sentiment inside the region are
/// swapped for their antonyms. Accepted only if the edited region now
/// classifies as the target (the whole text, for region = whole).
FlipResult sentiment_flip_words(std::span<const std::string> words, const Lexicons& lex, std::size_t max_edits,
                                Rng& rng, FlipRegion region);
std::optional<std::string> sentiment_flip(std::string_view text, const Lexicons& lex, std::size_t max_edits, Rng& rng,
                                          FlipRegion region);

/// 0, L, and every index just after a '.', '!' or '?' token.
std::vector<std::size_t> sentence_boundaries(std::span<const std::string> words);

struct InsertResult {
  std::vector<std::string> words;
  std::vector<std::size_t> offsets;  // start of each inserted phrase in `words`
  std::vector<std::string> phrases;  // instantiated phrases, same order
};

std::string instantiate_template(std::string_view tmpl, std::string_view group);

/// Inserts n instantiated templates at uniformly drawn sentence boundaries.
InsertResult insert_hate_words(std::span<const std::string> words, std::span<const std::string> templates,
                               std::span<const std::string> groups, std::size_t n_phrases, Rng& rng);
std::string insert_hate(std::string_view text, const Lexicons& lex, std::size_t n_phrases, Rng& rng);

/// True if the word sequence of `phrase` occurs contiguously in `text`.
bool contains_phrase(std::string_view text, std::string_view phrase);

struct TransformOutcome {
  std::optional<std::string> text;
  std::string reason;        // rejection reason
  std::string verification;  // lexicon | phrase_match | llm_judge | none
  std::string raw_response;  // LLM mode: kept for rejected responses
};

/// Dispatches to the local transform for spec.kind and applies the length
/// filter. Randomness comes from `rng`.
TransformOutcome apply_local(const TransformSpec& spec, std::string_view text, const Lexicons& lex, Rng& rng);

// --- LLM-backed transforms ----------------------------------------------

struct PromptSet {
  std::string paraphrase;
  std::string sentiment_spoof;  // {modified_sentiment} and {x} placeholders
  std::string sentiment_judge;
  std::string hate_templates;

  /// Reads paraphrase.txt, sentiment_spoof.txt, sentiment_judge.txt and
  /// hate_templates.txt.
  static PromptSet load(const std::filesystem::path& dir);
};

/// Text between [MODIFIED_TEXT] and [/MODIFIED_TEXT], trimmed.
std::optional<std::string> parse_modified_text(std::string_view response);
/// Last "[[positive|negative|neutral]]" in a judge response.
std::optional<Sentiment> parse_judge_sentiment(std::string_view response);
/// Contents of <phraseN>...</phraseN> tags in order.
std::vector<std::string> parse_phrases(std::string_view response);

struct LLMTransformOptions {
  bool llm_judge = false;  // verify sentiment with the judge prompt instead of the lexicon
};

/// Sends the prompt for spec.kind, parses the delimited response, verifies it
/// and applies the length filter. Parse or verification failures are
/// rejections carrying the raw response; transport errors propagate.
TransformOutcome llm_transform(LLMClient& client, const TransformSpec& spec, std::string_view text,
                               const Lexicons& lex, const PromptSet& prompts, Rng& rng,
                               const LLMTransformOptions& options = {});

// --- triplet dataset ------------------------------------------------------

struct TripletRecord {
  std::string anchor;
  std::string positive;
  std::string negative;
  TransformKind pos_kind = TransformKind::paraphrase;
  TransformKind neg_kind = TransformKind::sentiment_reversal;
  std::string verification;
  double length_ratio = 1.0;  // worse of the positive and negative ratios
};

struct DatasetConfig {
  std::size_t n_positives = 4;
  std::vector<TransformKind> negative_kinds = {TransformKind::sentiment_reversal,
                                               TransformKind::latter_half_reversal, TransformKind::hate_insertion};
  double positive_rate_min = 0.1;  // paraphrase replace rate drawn per positive
  double positive_rate_max = 0.5;
  std::size_t max_edits = 10;
  std::size_t n_phrases = 1;
  std::uint64_t seed = 0;
};

struct KindTally {
  std::size_t attempted = 0;
  std::size_t retained = 0;
  std::map<std::string, std::size_t> rejected;  // reason -> count
};

struct DatasetStats {
  std::size_t anchors = 0;
  std::size_t triplets = 0;
  std::vector<std::size_t> positives_per_anchor;
  std::vector<std::size_t> negatives_per_anchor;
  std::map<std::string, KindTally> by_kind;
};

struct DatasetResult {
  std::vector<TripletRecord> records;
  DatasetStats stats;
};

struct LLMBackend {
  LLMClient* client = nullptr;
  const PromptSet* prompts = nullptr;
  LLMTransformOptions options;
};

/// Per anchor: n_positives paraphrases and one negative per configured kind,
/// each from an rng stream keyed by (seed, anchor, slot); every
/// positive x negative pair becomes a record. Anchors run in parallel; the
/// output order is anchor order.
DatasetResult build_triplets(std::span<const std::string> anchors, const Lexicons& lex, const DatasetConfig& config,
                             const LLMBackend* llm = nullptr);

void write_triplets(const std::filesystem::path& path, std::span<const TripletRecord> records,
                    std::string_view header = {});
std::vector<TripletRecord> read_triplets(const std::filesystem::path& path);

std::vector<Triplet> to_training_triplets(std::span<const TripletRecord> records, const Vocabulary& vocab);

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> heldout;
};

/// Deterministic shuffle-and-cut; heldout gets round(fraction * n) documents.
CorpusSplit split_documents(std::span<const std::string> docs, double heldout_fraction, std::uint64_t seed);

}  // namespace semwm
