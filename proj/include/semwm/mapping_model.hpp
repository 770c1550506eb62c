#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "semwm/common.hpp"
#include "semwm/parallel.hpp"
#include "semwm/text_core.hpp"

namespace semwm {

/// Sparse vector with strictly increasing indices.
struct SparseVec {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
};

std::uint32_t unigram_bucket(TokenId id, std::size_t feature_dim);
std::uint32_t bigram_bucket(TokenId prev, TokenId id, std::size_t feature_dim);

/// Word unigram and bigram counts hashed into feature_dim buckets, then
/// L2-normalized. Empty input gives the zero vector.
SparseVec featurize(std::span<const TokenId> ids, std::size_t feature_dim);

struct ModelDims {
  std::size_t feature_dim = 4096;
  std::size_t hidden_dim = 256;
  std::size_t vocab_size = 0;

  bool operator==(const ModelDims&) const = default;
};

/// f(x) = tanh(W_out h2 + b_out), h2 = h1 + tanh(W_res h1 + b_res),
/// h1 = tanh(W_in^T phi(x) + b_in), phi = featurize(x).
///
/// Parameters live in one flat block, in this order (also the on-disk order):
///   W_in  [feature_dim x hidden_dim]   feature-major rows
///   b_in  [hidden_dim]
///   W_res [hidden_dim x hidden_dim]    row j feeds hidden unit j
///   b_res [hidden_dim]
///   W_out [vocab_size x hidden_dim]    row v feeds output v
///   b_out [vocab_size]
/// Values are kept float32-representable so saving is lossless.
class MappingModel {
 public:
  struct Offsets {
    std::size_t w_in, b_in, w_res, b_res, w_out, b_out, total;
  };

  MappingModel() = default;
  /// Zero-initialized parameters.
  MappingModel(ModelDims dims, std::uint64_t vocab_hash);
  static MappingModel random(ModelDims dims, std::uint64_t vocab_hash, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  const Offsets& offsets() const { return off_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  std::span<const double> w_in() const { return block(off_.w_in, off_.b_in); }
  std::span<const double> b_in() const { return block(off_.b_in, off_.w_res); }
  std::span<const double> w_res() const { return block(off_.w_res, off_.b_res); }
  std::span<const double> b_res() const { return block(off_.b_res, off_.w_out); }
  std::span<const double> w_out() const { return block(off_.w_out, off_.b_out); }
  std::span<const double> b_out() const { return block(off_.b_out, off_.total); }

  /// Throws FormatError unless the model was built for `vocab`.
  void check_vocab(const Vocabulary& vocab) const;

  std::vector<double> embed(const TokenSeq& text) const;
  std::vector<double> embed(const Vocabulary& vocab, const TokenSeq& text) const;
  std::vector<double> embed_features(const SparseVec& x) const;
  /// Output head applied to a first-layer pre-activation a1 = b_in + W_in^T x.
  std::vector<double> embed_from_pre_activation(std::span<const double> a1) const;

  /// Free-form provenance stored with the model (training config, corpus).
  std::map<std::string, std::string> metadata;

  /// Rounds every parameter to the nearest float32.
  void round_to_float();

 private:
  std::span<const double> block(std::size_t a, std::size_t b) const {
    return std::span<const double>(params_).subspan(a, b - a);
  }

  ModelDims dims_;
  std::uint64_t vocab_hash_ = 0;
  Offsets off_{};
  std::vector<double> params_;
};

struct GreenRedSplit {
  std::vector<std::uint8_t> green_mask;  // 1 = green

  std::size_t size() const { return green_mask.size(); }
  bool is_green(TokenId v) const { return green_mask[static_cast<std::size_t>(v)] != 0; }
  std::size_t green_count() const;
  double green_fraction() const;
  std::vector<TokenId> green_ids() const;
  std::vector<TokenId> red_ids() const;

  bool operator==(const GreenRedSplit&) const = default;
};

/// G = {v : f_v > 0}; f_v == 0 is red.
GreenRedSplit split_from_scores(std::span<const double> scores);
GreenRedSplit green_list(const MappingModel& model, const TokenSeq& text);

/// Incrementally embeds a growing prefix. Keeps the unnormalized feature
/// counts and the running W_in^T c product so each appended token costs
/// O(hidden) for the first layer instead of a full re-featurization.
class PrefixEmbedder {
 public:
  explicit PrefixEmbedder(const MappingModel& model);

  void push(TokenId id);
  std::size_t length() const { return length_; }
  std::vector<double> embed() const;
  GreenRedSplit split() const { return split_from_scores(embed()); }

 private:
  void bump(std::uint32_t bucket);

  const MappingModel* model_;
  std::unordered_map<std::uint32_t, double> counts_;
  std::vector<double> acc_;  // W_in^T c
  double norm_sq_ = 0.0;
  TokenId prev_ = -1;
  std::size_t length_ = 0;
};

void save_model(const MappingModel& model, const std::filesystem::path& path);
MappingModel load_model(const std::filesystem::path& path);
/// Also checks the model against `vocab`.
MappingModel load_model(const std::filesystem::path& path, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Batch kernels used by training. Both execution paths are bit-identical.

struct ForwardCache {
  std::vector<double> h1, r, h2, out;
};

void forward(const MappingModel& model, const SparseVec& x, ForwardCache& cache);

void forward_batch(const MappingModel& model, std::span<const SparseVec> xs,
                   std::vector<ForwardCache>& caches, Exec exec);

/// Accumulates d(loss)/d(theta) into `grad` (same layout as params) given
/// d(loss)/d(f) for each example. `grad` is overwritten.
void backward_batch(const MappingModel& model, std::span<const SparseVec> xs,
                    std::span<const ForwardCache> caches, std::span<const std::vector<double>> d_out,
                    std::span<double> grad, Exec exec);

}  // namespace semwm
