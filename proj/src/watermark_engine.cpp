#include "semwm/watermark_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace semwm {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::semantic: return "semantic";
    case Scheme::kgw: return "kgw";
    case Scheme::unigram: return "unigram";
  }
  return "semantic";
}

std::string_view to_string(Conditioning c) { return c == Conditioning::global ? "global" : "prefix"; }
std::string_view to_string(PerturbMode m) { return m == PerturbMode::multiplicative ? "multiplicative" : "additive"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "semantic") return Scheme::semantic;
  if (s == "kgw") return Scheme::kgw;
  if (s == "unigram") return Scheme::unigram;
  throw UsageError("unknown scheme: " + std::string(s) + " (expected semantic, kgw or unigram)");
}

Conditioning parse_conditioning(std::string_view s) {
  if (s == "global") return Conditioning::global;
  if (s == "prefix") return Conditioning::prefix;
  throw UsageError("unknown conditioning: " + std::string(s) + " (expected global or prefix)");
}

PerturbMode parse_perturb_mode(std::string_view s) {
  if (s == "multiplicative") return PerturbMode::multiplicative;
  if (s == "additive") return PerturbMode::additive;
  throw UsageError("unknown perturbation mode: " + std::string(s));
}

void WatermarkParams::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw UsageError("delta must be a finite value >= 0");
  if (!(entropy_threshold >= 0.0)) throw UsageError("entropy threshold must be >= 0");
  if (!(temperature >= 0.0)) throw UsageError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw UsageError("top-p must be in (0, 1]");
  if (!(fidelity_weight >= 0.0)) throw UsageError("fidelity weight must be >= 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("gamma must be in (0, 1)");
}

std::vector<double> perturb_logits(std::span<const double> logits, const GreenRedSplit& green, double delta,
                                   PerturbMode mode) {
  std::vector<double> out(logits.begin(), logits.end());
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (!green.green_mask[v]) continue;
    out[v] = mode == PerturbMode::multiplicative ? out[v] * (1.0 + delta) : out[v] + delta;
  }
  return out;
}

namespace {

GreenRedSplit permuted_split(std::uint64_t seed, double gamma, std::size_t n) {
  std::vector<TokenId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  shuffle(perm.begin(), perm.end(), rng);
  GreenRedSplit s;
  s.green_mask.assign(n, 0);
  const auto k = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n)));
  for (std::size_t i = 0; i < k; ++i) s.green_mask[static_cast<std::size_t>(perm[i])] = 1;
  return s;
}

constexpr std::uint64_t kUnigramStream = 0x756e6967ULL;

}  // namespace

GreenRedSplit kgw_split(TokenId prev_token, std::uint64_t key, double gamma, std::size_t vocab_size) {
  return permuted_split(stream_seed(key, static_cast<std::uint64_t>(prev_token) + 1), gamma, vocab_size);
}

GreenRedSplit unigram_split(std::uint64_t key, double gamma, std::size_t vocab_size) {
  return permuted_split(stream_seed(key, kUnigramStream), gamma, vocab_size);
}

GreenRedSplit semantic_split_for(const MappingModel& mapper, Conditioning conditioning, const TokenSeq* x,
                                 std::span<const TokenId> prefix, TokenId first_token) {
  if (conditioning == Conditioning::global) {
    if (!x) throw UsageError("global conditioning requires a target text");
    return green_list(mapper, *x);
  }
  TokenSeq p;
  if (prefix.empty()) {
    p.ids = {first_token};
  } else {
    p.ids.assign(prefix.begin(), prefix.end());
  }
  return green_list(mapper, p);
}

CandidateTable build_candidate_table(const Vocabulary& vocab, const Lexicons& lex) {
  CandidateTable table(vocab.size());
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    auto& c = table[v];
    c.push_back(static_cast<TokenId>(v));
    const auto it = lex.synonyms.find(vocab.token(static_cast<TokenId>(v)));
    if (it != lex.synonyms.end()) {
      for (const auto& s : it->second) {
        if (vocab.contains(s)) c.push_back(vocab.id_of(s));
      }
    }
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  return table;
}

namespace {

// Split provider shared by generation and detection. `anchor` is the text a
// global semantic split is computed from; prefix mode follows the tokens
// pushed so far.
class SplitTracker {
 public:
  SplitTracker(const WatermarkContext& ctx, const WatermarkParams& p, const TokenSeq* anchor, TokenId first_token)
      : ctx_(ctx), p_(p) {
    switch (p.scheme) {
      case Scheme::semantic:
        if (!ctx.mapper) throw UsageError("semantic scheme requires a mapping model");
        if (p.conditioning == Conditioning::global) {
          fixed_ = green_list(*ctx.mapper, *anchor);
        } else {
          prefix_.emplace(*ctx.mapper);
          TokenSeq one;
          one.ids = {first_token};
          fixed_ = green_list(*ctx.mapper, one);
        }
        break;
      case Scheme::unigram:
        fixed_ = unigram_split(p.key, p.gamma, ctx.vocab_size);
        break;
      case Scheme::kgw:
        fixed_ = kgw_split(kgw_bos(ctx.vocab_size), p.key, p.gamma, ctx.vocab_size);
        break;
    }
  }

  const GreenRedSplit& current() const { return fixed_; }

  void push(TokenId id) {
    if (p_.scheme == Scheme::kgw) {
      fixed_ = kgw_split(id, p_.key, p_.gamma, ctx_.vocab_size);
    } else if (prefix_) {
      prefix_->push(id);
      fixed_ = prefix_->split();
    }
  }

 private:
  const WatermarkContext& ctx_;
  const WatermarkParams& p_;
  GreenRedSplit fixed_;
  std::optional<PrefixEmbedder> prefix_;
};

void check_context(const WatermarkContext& ctx) {
  if (!ctx.lm) throw UsageError("watermarking requires a language model");
  if (!ctx.candidates) throw UsageError("watermarking requires a candidate table");
  if (ctx.vocab_size != ctx.lm->vocab_size() || ctx.candidates->size() != ctx.vocab_size) {
    throw FormatError("language model, candidate table and vocabulary sizes disagree");
  }
  if (ctx.mapper && ctx.mapper->dims().vocab_size != ctx.vocab_size) {
    throw FormatError("mapping model vocabulary size does not match the language model");
  }
}

}  // namespace

WatermarkedRecord watermark_text(const WatermarkContext& ctx, const TokenSeq& x, const WatermarkParams& params) {
  if (x.empty()) throw DataError("cannot watermark an empty text");
  params.validate();
  check_context(ctx);

  WatermarkedRecord rec;
  rec.original = x;
  rec.params = params;
  const std::size_t n = x.size();
  rec.output.ids.reserve(n);
  rec.perturbed.assign(n, 0);
  rec.green.assign(n, 0);
  rec.gate_entropy.assign(n, 0.0);

  SplitTracker splits(ctx, params, &x, x.ids.front());
  Rng rng(params.seed);
  const SamplingParams sampling{params.temperature, params.top_p};
  const bool hard = std::isinf(params.fidelity_weight);
  const std::size_t V = ctx.vocab_size;
  std::vector<double> m(V);

  for (std::size_t t = 0; t < n; ++t) {
    const auto dist = ctx.lm->next_dist(rec.output.ids);
    const auto& cand = (*ctx.candidates)[static_cast<std::size_t>(x.ids[t])];
    if (hard) {
      std::fill(m.begin(), m.end(), -std::numeric_limits<double>::infinity());
      for (TokenId c : cand) m[static_cast<std::size_t>(c)] = dist.logits[static_cast<std::size_t>(c)];
    } else {
      m = dist.logits;
      for (TokenId c : cand) m[static_cast<std::size_t>(c)] += params.fidelity_weight;
    }
    const double h = entropy_nats(softmax(m));
    rec.gate_entropy[t] = h;
    const GreenRedSplit& split = splits.current();
    if (h >= params.entropy_threshold) {
      m = perturb_logits(m, split, params.delta, params.perturb);
      rec.perturbed[t] = 1;
    }
    const TokenId y = sample(m, sampling, rng);
    rec.green[t] = split.is_green(y) ? 1 : 0;
    rec.output.ids.push_back(y);
    splits.push(y);
  }
  return rec;
}

std::vector<TokenId> sample_continuation(const NGramLM& lm, std::span<const TokenId> context, std::size_t length,
                                         const SamplingParams& sampling, Rng& rng) {
  std::vector<TokenId> hist(context.begin(), context.end());
  std::vector<TokenId> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto dist = lm.next_dist(hist);
    const TokenId y = sample(dist.logits, sampling, rng);
    out.push_back(y);
    hist.push_back(y);
  }
  return out;
}

WatermarkedRecord generate_then_watermark(const WatermarkContext& ctx, std::span<const TokenId> prompt_context,
                                          std::size_t length, const WatermarkParams& params) {
  check_context(ctx);
  Rng rng(stream_seed(params.seed, 1));
  TokenSeq x;
  x.ids = sample_continuation(*ctx.lm, prompt_context, length, {params.temperature, params.top_p}, rng);
  return watermark_text(ctx, x, params);
}

std::vector<WatermarkedRecord> watermark_batch(const WatermarkContext& ctx, std::span<const TokenSeq> texts,
                                               const WatermarkParams& params, Exec exec) {
  std::vector<WatermarkedRecord> out(texts.size());
  auto one = [&](std::size_t i) {
    WatermarkParams p = params;
    p.seed = stream_seed(params.seed, i);
    out[i] = watermark_text(ctx, texts[i], p);
  };
  if (exec == Exec::parallel) {
    // Exceptions cannot cross the OpenMP region; capture the first one.
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        one(i);
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (std::size_t i = 0; i < texts.size(); ++i) one(i);
  }
  return out;
}

std::vector<std::uint8_t> detection_flags(const WatermarkContext& ctx, std::span<const TokenId> tokens,
                                          const WatermarkParams& params) {
  std::vector<std::uint8_t> flags(tokens.size(), 0);
  if (tokens.empty()) return flags;
  TokenSeq self;
  self.ids.assign(tokens.begin(), tokens.end());
  SplitTracker splits(ctx, params, &self, tokens.front());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    flags[t] = splits.current().is_green(tokens[t]) ? 1 : 0;
    if (t + 1 < tokens.size()) splits.push(tokens[t]);
  }
  return flags;
}

std::string encode_flags(std::span<const std::uint8_t> green, std::span<const std::uint8_t> perturbed) {
  std::string out;
  std::size_t i = 0;
  while (i < green.size()) {
    const int code = (green[i] ? 1 : 0) | (perturbed[i] ? 2 : 0);
    std::size_t j = i + 1;
    while (j < green.size() && ((green[j] ? 1 : 0) | (perturbed[j] ? 2 : 0)) == code) ++j;
    if (!out.empty()) out.push_back(',');
    out += std::to_string(code) + ":" + std::to_string(j - i);
    i = j;
  }
  return out;
}

void write_records(const std::filesystem::path& path, std::span<const WatermarkedRecord> records,
                   const Vocabulary& vocab, std::string_view header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path.string());
  if (!header.empty()) out << header << '\n';
  for (const auto& r : records) {
    const auto& p = r.params;
    nlohmann::json params = {{"delta", p.delta},
                             {"entropy_threshold", p.entropy_threshold},
                             {"temperature", p.temperature},
                             {"top_p", p.top_p},
                             {"conditioning", to_string(p.conditioning)},
                             {"fidelity_weight", std::isinf(p.fidelity_weight) ? -1.0 : p.fidelity_weight},
                             {"perturb", to_string(p.perturb)},
                             {"gamma", p.gamma},
                             {"key", p.key}};
    nlohmann::json j = {{"original", detokenize(r.original.ids, vocab)},
                        {"output", detokenize(r.output.ids, vocab)},
                        {"scheme", to_string(p.scheme)},
                        {"params", params},
                        {"flags", encode_flags(r.green, r.perturbed)},
                        {"seed", p.seed}};
    out << j.dump() << '\n';
  }
}

}  // namespace semwm
