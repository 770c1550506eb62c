#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "semwm/common.hpp"
#include "semwm/text_core.hpp"

namespace semwm {

struct NextTokenDist {
  std::vector<double> logits;  // log(pseudo_count + k), >= 0 when k >= 1
  std::vector<double> probs;   // softmax(logits)
  double entropy_nats = 0.0;
};

/// Count-based n-gram model with additive smoothing and interpolated backoff.
///
/// For a context, let j* be the longest suffix order whose context was seen in
/// training. Each seen order j <= j* contributes its counts rescaled to the
/// mass of order j*, with weight 0.6 at j*, 0.4 * 0.6 one level down, and so
/// on; the unigram level takes the remaining weight. The resulting pseudo
/// counts c(v) sum to N(j*), so
///
///   logit(v) = log(c(v) + k),   P(v) = (c(v) + k) / (N(j*) + k |V|)
///
/// is an exactly normalized distribution whose logits are its log pseudo
/// counts.
class NGramLM {
 public:
  static constexpr double kBackoffWeight = 0.4;
  static constexpr int kMaxOrder = 4;

  NGramLM() = default;

  int order() const { return order_; }
  double smoothing() const { return k_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }

  NextTokenDist next_dist(std::span<const TokenId> context) const;
  /// log P(token | context), same distribution as next_dist.
  double log_prob(std::span<const TokenId> context, TokenId token) const;

  void save(const std::filesystem::path& path) const;
  /// Validates the format version and that the model was trained against
  /// `vocab`.
  static NGramLM load(const std::filesystem::path& path, const Vocabulary& vocab);

  bool operator==(const NGramLM& other) const;

  friend NGramLM train_lm(std::span<const TokenSeq> corpus, const Vocabulary& vocab, int order,
                          double smoothing_k);

 private:
  struct Row {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint32_t>> counts;  // sorted by token
  };
  using Table = std::unordered_map<std::uint64_t, Row>;

  static std::uint64_t context_key(std::span<const TokenId> ctx);
  void pseudo_counts(std::span<const TokenId> context, std::vector<double>& out, double& mass) const;

  int order_ = 0;
  double k_ = 1.0;
  std::size_t vocab_size_ = 0;
  std::uint64_t vocab_hash_ = 0;
  std::vector<Table> levels_;  // levels_[j]: contexts of length j
};

/// Throws DataError on an empty corpus, UsageError on order outside [1, 4] or
/// smoothing_k <= 0.
NGramLM train_lm(std::span<const TokenSeq> corpus, const Vocabulary& vocab, int order = 3,
                 double smoothing_k = 1.0);

double entropy_nats(std::span<const double> probs);
std::vector<double> softmax(std::span<const double> logits);

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.9;
};

/// Nucleus sampling: logits are divided by the temperature, the smallest
/// prefix of probability-sorted tokens (ties by id) whose mass reaches top_p
/// is kept and renormalized, and one token is drawn.
TokenId sample(std::span<const double> logits, const SamplingParams& params, Rng& rng);

/// The renormalized nucleus distribution `sample` draws from (tokens outside
/// the nucleus have probability 0).
std::vector<double> nucleus_probs(std::span<const double> logits, const SamplingParams& params);

}  // namespace semwm
