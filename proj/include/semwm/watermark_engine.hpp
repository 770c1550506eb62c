#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semwm/common.hpp"
#include "semwm/dataset_builder.hpp"
#include "semwm/mapping_model.hpp"
#include "semwm/parallel.hpp"
#include "semwm/text_core.hpp"
#include "semwm/toy_lm.hpp"

namespace semwm {

enum class Scheme { semantic, kgw, unigram };
enum class Conditioning { global, prefix };
enum class PerturbMode { multiplicative, additive };

std::string_view to_string(Scheme s);
std::string_view to_string(Conditioning c);
std::string_view to_string(PerturbMode m);
Scheme parse_scheme(std::string_view s);
Conditioning parse_conditioning(std::string_view s);
PerturbMode parse_perturb_mode(std::string_view s);

struct WatermarkParams {
  double delta = 0.13;
  double entropy_threshold = 2.0;  // nats
  double temperature = 0.7;
  double top_p = 0.9;
  Conditioning conditioning = Conditioning::global;
  Scheme scheme = Scheme::semantic;
  double fidelity_weight = 4.0;  // log-space bonus for the original token and its synonyms; inf = hard mask
  PerturbMode perturb = PerturbMode::multiplicative;
  double gamma = 0.5;            // green fraction of the kgw/unigram splits
  std::uint64_t key = 0;         // kgw/unigram hash key
  std::uint64_t seed = 0;

  /// Throws UsageError on out-of-range values.
  void validate() const;
};

/// multiplicative: l[v] * (1 + delta) for green v; additive: l[v] + delta.
/// Red coordinates are never touched.
std::vector<double> perturb_logits(std::span<const double> logits, const GreenRedSplit& green, double delta,
                                   PerturbMode mode = PerturbMode::multiplicative);

/// hash(key, prev) seeds a Fisher-Yates permutation of V; the first
/// floor(gamma |V|) entries are green.
GreenRedSplit kgw_split(TokenId prev_token, std::uint64_t key, double gamma, std::size_t vocab_size);
/// Same construction seeded by hash(key) alone.
GreenRedSplit unigram_split(std::uint64_t key, double gamma, std::size_t vocab_size);
/// Previous-token id used by kgw at position 0.
inline TokenId kgw_bos(std::size_t vocab_size) { return static_cast<TokenId>(vocab_size); }

/// Semantic split at one position. global: green_list(x). prefix: the split
/// of the prefix, or of `first_token` alone when the prefix is empty.
GreenRedSplit semantic_split_for(const MappingModel& mapper, Conditioning conditioning, const TokenSeq* x,
                                 std::span<const TokenId> prefix, TokenId first_token);

/// Candidate sets for constrained regeneration: entry v holds v and the ids
/// of its in-vocabulary synonyms, sorted.
using CandidateTable = std::vector<std::vector<TokenId>>;
CandidateTable build_candidate_table(const Vocabulary& vocab, const Lexicons& lex);

struct WatermarkContext {
  const NGramLM* lm = nullptr;
  const MappingModel* mapper = nullptr;  // required for the semantic scheme
  const CandidateTable* candidates = nullptr;
  std::size_t vocab_size = 0;
};

struct WatermarkedRecord {
  TokenSeq original;
  TokenSeq output;
  std::vector<std::uint8_t> perturbed;  // gate passed and perturbation applied
  std::vector<std::uint8_t> green;      // output token in the split used at that position
  std::vector<double> gate_entropy;
  WatermarkParams params;
};

/// Constrained regeneration of x with a watermark. Output length = |x|.
/// Throws DataError on empty x.
WatermarkedRecord watermark_text(const WatermarkContext& ctx, const TokenSeq& x, const WatermarkParams& params);

/// Plain nucleus sampling of `length` tokens after `context`.
std::vector<TokenId> sample_continuation(const NGramLM& lm, std::span<const TokenId> context, std::size_t length,
                                         const SamplingParams& sampling, Rng& rng);

/// Samples an unwatermarked response, then watermarks it as the target text.
/// Stage 1 uses the stream stream_seed(params.seed, 1); stage 2 uses
/// params.seed as usual.
WatermarkedRecord generate_then_watermark(const WatermarkContext& ctx, std::span<const TokenId> prompt_context,
                                          std::size_t length, const WatermarkParams& params);

/// Record i uses seed stream_seed(params.seed, i). Both paths give identical
/// results.
std::vector<WatermarkedRecord> watermark_batch(const WatermarkContext& ctx, std::span<const TokenSeq> texts,
                                               const WatermarkParams& params, Exec exec);

/// Per-position green membership of `tokens` under the detection rule of the
/// scheme: semantic splits come from the text itself (whole text in global
/// mode, its own prefixes in prefix mode).
std::vector<std::uint8_t> detection_flags(const WatermarkContext& ctx, std::span<const TokenId> tokens,
                                          const WatermarkParams& params);

void write_records(const std::filesystem::path& path, std::span<const WatermarkedRecord> records,
                   const Vocabulary& vocab, std::string_view header = {});

/// Run-length encoding of per-position codes (bit 0 green, bit 1 perturbed)
/// as "code:run" pairs joined by commas.
std::string encode_flags(std::span<const std::uint8_t> green, std::span<const std::uint8_t> perturbed);

}  // namespace semwm
