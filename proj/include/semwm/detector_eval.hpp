#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semwm/dataset_builder.hpp"
#include "semwm/parallel.hpp"
#include "semwm/toy_lm.hpp"
#include "semwm/watermark_engine.hpp"

namespace semwm {

struct DetectionResult {
  double green_fraction = 0.0;
  double z_score = 0.0;
  std::size_t n_tokens = 0;
  std::size_t greens = 0;
  std::string split_source;  // "self" (semantic, global), "self_prefix", "previous_token", "fixed"
};

/// z = (greens - gamma n) / sqrt(gamma (1 - gamma) n)
double z_score(std::size_t greens, std::size_t n, double gamma = 0.5);

DetectionResult detection_from_flags(std::span<const std::uint8_t> green_flags);

/// Throws DataError on an empty token sequence.
DetectionResult detect(const WatermarkContext& ctx, const TokenSeq& text, const WatermarkParams& params);

/// P(pos > neg) + 0.5 P(pos == neg) via midranks. Throws UsageError when a
/// list is empty.
double roc_auc(std::span<const double> pos, std::span<const double> neg);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};
std::vector<RocPoint> roc_curve(std::span<const double> pos, std::span<const double> neg);

/// Percentages in, percentage out: (det + para + (100 - sent) + (100 - hate)) / 4.
double overall_auc(double det, double para, double sent, double hate);

/// exp(-mean log P(y_t | y_<t)). Throws DataError on an empty sequence.
double perplexity(const NGramLM& lm, std::span<const TokenId> tokens);

/// Spearman rank correlation with midranks for ties; 0 if either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct SuiteConfig {
  WatermarkParams params;
  double paraphrase_rate = 0.15;
  std::size_t max_edits = 10;
  std::size_t n_phrases = 1;
  std::uint64_t attack_seed = 0;
  Exec exec = Exec::parallel;
};

struct ConditionResult {
  std::string name;
  std::vector<double> pos;               // scores of watermarked (attacked) texts
  std::vector<double> neg;               // scores of unwatermarked (attacked) texts
  std::vector<std::size_t> pos_index;    // input index of each score
  std::vector<std::size_t> neg_index;
  std::map<std::string, std::size_t> skipped;  // "pos:reason" / "neg:reason" -> count
  double auc = 0.5;
  bool valid = false;  // both classes non-empty

  std::size_t skip_count() const;
};

struct EvalReport {
  std::vector<ConditionResult> conditions;  // detect, paraphrase, sentiment_spoof, sentiment_spoof_latter_half, hate_spoof
  double overall = 0.0;                     // percentage
  double mean_ppl_watermarked = 0.0;
  double mean_ppl_original = 0.0;
  std::size_t n_texts = 0;
  std::vector<std::size_t> stealing_ks;
  std::vector<double> stealing_rates;
  std::map<std::string, std::string> provenance;

  const ConditionResult& condition(std::string_view name) const;
};

inline constexpr std::string_view kCondDetect = "detect";
inline constexpr std::string_view kCondParaphrase = "paraphrase";
inline constexpr std::string_view kCondSentiment = "sentiment_spoof";
inline constexpr std::string_view kCondSentimentLatter = "sentiment_spoof_latter_half";
inline constexpr std::string_view kCondHate = "hate_spoof";

/// Watermarks every text, attacks watermarked and original copies with the
/// local transforms and scores both with `detect`. Positives are watermarked
/// (attacked) texts, negatives the original (attacked) texts. Rejected
/// attacks are recorded as skips.
EvalReport run_suite(const WatermarkContext& ctx, const Lexicons& lex, const Vocabulary& vocab,
                     std::span<const TokenSeq> texts, const SuiteConfig& config);

struct StealingResult {
  std::vector<std::size_t> ks;
  std::vector<double> rates;
  std::size_t n_samples = 0;
};

/// Generates n_samples watermarked rewrites of one target, ranks tokens by
/// occurrence count (ties by id) and reports |top-k intersect G| / k, where G
/// is the scheme's true split for the target. kgw has no single split and is
/// rejected with UsageError.
StealingResult stealing_attack(const WatermarkContext& ctx, const TokenSeq& target, const WatermarkParams& params,
                               std::size_t n_samples, std::span<const std::size_t> ks = std::vector<std::size_t>{
                                                                                         50, 100, 200});

/// Rate computation on given outputs and split; exposed for tests.
std::vector<double> decryption_rates(std::span<const std::vector<TokenId>> outputs, const GreenRedSplit& truth,
                                     std::span<const std::size_t> ks);

struct SweepRow {
  double delta = 0.0;
  double overall = 0.0;
  double mean_ppl = 0.0;
  double auc_det = 0.0, auc_para = 0.0, auc_sent = 0.0, auc_hate = 0.0;
};

/// One run_suite per delta, rows sorted by delta.
std::vector<SweepRow> delta_sweep(const WatermarkContext& ctx, const Lexicons& lex, const Vocabulary& vocab,
                                  std::span<const TokenSeq> texts, std::vector<double> deltas,
                                  const SuiteConfig& config);

// --- reports ----------------------------------------------------------------

void print_report(std::ostream& os, const EvalReport& report);
/// summary.csv plus scores_<condition>.csv and roc.svg under `dir`.
void write_report(const std::filesystem::path& dir, const EvalReport& report, std::string_view header);
void write_sweep(const std::filesystem::path& dir, std::span<const SweepRow> rows, std::string_view header);
void write_stealing(const std::filesystem::path& path, std::span<const std::string> schemes,
                    std::span<const StealingResult> results, std::string_view header);

/// Shortest round-trip decimal form used in every CSV.
std::string fmt_num(double v);

}  // namespace semwm
