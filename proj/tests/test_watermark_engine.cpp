#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "semwm/watermark_engine.hpp"
#include "support.hpp"
#include "world.hpp"

using namespace semwm;
using semwm::test::world;

namespace {

GreenRedSplit mask_of(std::vector<std::uint8_t> m) { return GreenRedSplit{std::move(m)}; }

double mean_green(std::span<const std::uint8_t> g) {
  double s = 0;
  for (auto b : g) s += b;
  return g.empty() ? 0.0 : s / static_cast<double>(g.size());
}

}  // namespace

TEST(PerturbLogits, HandExamples) {
  auto out = perturb_logits(std::vector<double>{2.0, 1.0}, mask_of({1, 0}), 0.13);
  EXPECT_NEAR(out[0], 2.26, 1e-12);
  EXPECT_EQ(out[1], 1.0);
  out = perturb_logits(std::vector<double>{-1.0, 1.0}, mask_of({1, 0}), 0.5);
  EXPECT_EQ(out[0], -1.5);
  EXPECT_EQ(out[1], 1.0);
  out = perturb_logits(std::vector<double>{-1.0, 1.0}, mask_of({1, 1}), 0.5, PerturbMode::additive);
  EXPECT_EQ(out, (std::vector<double>{-0.5, 1.5}));
}

TEST(PerturbLogits, ZeroDeltaAndRedCoordinates) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> l(30);
    std::vector<std::uint8_t> g(30);
    for (std::size_t i = 0; i < l.size(); ++i) {
      l[i] = standard_normal(rng) * 3;
      g[i] = rng() & 1;
    }
    EXPECT_EQ(perturb_logits(l, mask_of(g), 0.0), l);
    const double delta = uniform01(rng) * 5;
    const auto out = perturb_logits(l, mask_of(g), delta);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (g[i]) {
        EXPECT_DOUBLE_EQ(out[i], l[i] * (1 + delta));
      } else {
        EXPECT_EQ(out[i], l[i]);
      }
    }
  }
}

TEST(PerturbLogits, GreenMassGrowsWithDeltaForNonNegativeLogits) {
  // LM logits are log pseudo counts, never negative, so the green share of
  // the softmax can only grow with delta.
  const auto& w = world();
  const auto split = green_list(w.mapper, w.doc(0));
  for (std::size_t i = 0; i < 20; ++i) {
    const auto d = w.lm.next_dist(std::span<const TokenId>(w.doc(i).ids).first(3));
    double prev = -1;
    for (double delta : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0}) {
      const auto p = softmax(perturb_logits(d.logits, split, delta));
      double g = 0;
      for (std::size_t v = 0; v < p.size(); ++v) g += split.green_mask[v] ? p[v] : 0.0;
      EXPECT_GE(g, prev - 1e-12);
      prev = g;
    }
  }
}

TEST(BaselineSplits, KgwDeterministicSizedAndKeyed) {
  const std::size_t V = 997;
  for (double gamma : {0.25, 0.5, 0.7}) {
    const auto a = kgw_split(17, 99, gamma, V);
    EXPECT_EQ(a, kgw_split(17, 99, gamma, V));
    EXPECT_EQ(a.green_count(), static_cast<std::size_t>(std::floor(gamma * V)));
    EXPECT_NE(a, kgw_split(18, 99, gamma, V));
    EXPECT_NE(a, kgw_split(17, 100, gamma, V));
  }
  EXPECT_EQ(kgw_bos(V), static_cast<TokenId>(V));
}

TEST(BaselineSplits, UnigramDeterministicSizedAndConstant) {
  const std::size_t V = 997;
  for (double gamma : {0.25, 0.5, 0.7}) {
    const auto a = unigram_split(99, gamma, V);
    EXPECT_EQ(a, unigram_split(99, gamma, V));
    EXPECT_EQ(a.green_count(), static_cast<std::size_t>(std::floor(gamma * V)));
    EXPECT_NE(a, unigram_split(100, gamma, V));
  }
}

namespace {

// Fraction of tokens whose green count over `n` splits falls outside the
// binomial 3-sigma band around n * p.
template <typename SplitFn>
double outside_three_sigma(SplitFn make, std::size_t n, std::size_t V, double gamma) {
  std::vector<std::size_t> count(V, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = make(i);
    for (std::size_t v = 0; v < V; ++v) count[v] += s.green_mask[v];
  }
  const double p = std::floor(gamma * V) / static_cast<double>(V);
  const double mu = p * n, sd = std::sqrt(n * p * (1 - p));
  std::size_t out = 0;
  for (auto c : count) out += std::abs(static_cast<double>(c) - mu) > 3 * sd;
  return static_cast<double>(out) / static_cast<double>(V);
}

}  // namespace

TEST(BaselineSplits, PerTokenGreenFrequencyMatchesGamma) {
  const std::size_t V = 500;
  for (double gamma : {0.25, 0.5}) {
    // Expected share outside 3 sigma is 0.27%; allow 1.5%.
    EXPECT_LE(outside_three_sigma([&](std::size_t i) { return kgw_split(static_cast<TokenId>(i), 7, gamma, V); }, 1000,
                                  V, gamma),
              0.015);
    EXPECT_LE(outside_three_sigma([&](std::size_t i) { return unigram_split(i, gamma, V); }, 1000, V, gamma), 0.015);
  }
}

TEST(SemanticSplit, GlobalIsConstantAcrossPositions) {
  const auto& w = world();
  const auto x = w.doc(3, 60);
  const auto g = semantic_split_for(w.mapper, Conditioning::global, &x, {}, 0);
  for (std::size_t t : {1u, 10u, 50u}) {
    EXPECT_EQ(semantic_split_for(w.mapper, Conditioning::global, &x, std::span<const TokenId>(x.ids).first(t), 0), g);
  }
  EXPECT_EQ(g, green_list(w.mapper, x));
  EXPECT_THROW(semantic_split_for(w.mapper, Conditioning::global, nullptr, {}, 0), UsageError);
}

TEST(SemanticSplit, PrefixEqualToTargetMatchesGlobal) {
  const auto& w = world();
  for (std::size_t i = 0; i < 10; ++i) {
    const auto x = w.doc(i);
    EXPECT_EQ(semantic_split_for(w.mapper, Conditioning::prefix, nullptr, x.ids, 0),
              semantic_split_for(w.mapper, Conditioning::global, &x, {}, 0));
  }
  const TokenId first = w.doc(0).ids[0];
  EXPECT_EQ(semantic_split_for(w.mapper, Conditioning::prefix, nullptr, {}, first),
            green_list(w.mapper, TokenSeq{{first}, {}}));
}

TEST(SemanticSplit, PrefixFollowsSentimentFlippedWord) {
  const auto& w = world();
  const TokenId bad = w.vocab.id_of("bad");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    auto prefix = w.doc(i, 12).ids;
    const auto before = semantic_split_for(w.mapper, Conditioning::prefix, nullptr, prefix, 0);
    prefix.push_back(bad);
    const auto after = semantic_split_for(w.mapper, Conditioning::prefix, nullptr, prefix, 0);
    // Sign scan of the raw mapper output.
    const auto f = w.mapper.embed(TokenSeq{prefix, {}});
    for (std::size_t v = 0; v < f.size(); ++v) ASSERT_EQ(after.green_mask[v], f[v] > 0 ? 1 : 0);
    changed += after != before;
  }
  EXPECT_EQ(changed, 20u);
}

TEST(CandidateTable, HoldsTokenAndSynonyms) {
  const auto& w = world();
  const auto& c = w.candidates[static_cast<std::size_t>(w.vocab.id_of("food"))];
  for (const auto& s : {"food", "cuisine", "fare"}) {
    EXPECT_NE(std::find(c.begin(), c.end(), w.vocab.id_of(s)), c.end()) << s;
  }
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  for (std::size_t v = 0; v < w.singletons.size(); ++v) {
    ASSERT_EQ(w.singletons[v], std::vector<TokenId>{static_cast<TokenId>(v)});
  }
}

TEST(WatermarkText, HardMaskWithoutSynonymsReproducesTarget) {
  const auto& w = world();
  WatermarkParams p;
  p.fidelity_weight = std::numeric_limits<double>::infinity();
  p.delta = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    p.seed = i;
    const auto x = w.doc(i);
    EXPECT_EQ(watermark_text(w.ctx(false), x, p).output.ids, x.ids);
  }
}

TEST(WatermarkText, ZeroDeltaMatchesPlainConstrainedSampling) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 0;
  p.seed = 77;
  const auto x = w.doc(4);
  const auto rec = watermark_text(w.ctx(), x, p);
  // Independent re-implementation of the unperturbed loop.
  Rng rng(p.seed);
  std::vector<TokenId> y;
  for (std::size_t t = 0; t < x.size(); ++t) {
    auto m = w.lm.next_dist(y).logits;
    for (TokenId c : w.candidates[static_cast<std::size_t>(x.ids[t])]) m[static_cast<std::size_t>(c)] += 4.0;
    y.push_back(sample(m, {0.7, 0.9}, rng));
  }
  EXPECT_EQ(rec.output.ids, y);
}

TEST(WatermarkText, GateEntropyAndPerturbedFlagsAreConsistent) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 2;
  std::size_t gated = 0, open = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    p.seed = i;
    const auto x = w.doc(i);
    const auto rec = watermark_text(w.ctx(), x, p);
    ASSERT_EQ(rec.output.size(), x.size());
    ASSERT_EQ(rec.perturbed.size(), x.size());
    const auto split = green_list(w.mapper, x);
    for (std::size_t t = 0; t < x.size(); ++t) {
      auto m = w.lm.next_dist(std::span<const TokenId>(rec.output.ids).first(t)).logits;
      for (TokenId c : w.candidates[static_cast<std::size_t>(x.ids[t])]) m[static_cast<std::size_t>(c)] += 4.0;
      const double h = entropy_nats(softmax(m));
      EXPECT_NEAR(rec.gate_entropy[t], h, 1e-12);
      EXPECT_EQ(rec.perturbed[t] != 0, h >= p.entropy_threshold);
      EXPECT_EQ(rec.green[t], split.is_green(rec.output.ids[t]) ? 1 : 0);
      (rec.perturbed[t] ? open : gated) += 1;
    }
  }
  EXPECT_GT(open, 0u);
  EXPECT_GT(gated, 0u);
}

TEST(WatermarkText, ClosedGateMakesDeltaIrrelevant) {
  const auto& w = world();
  WatermarkParams a, b;
  a.delta = 0;
  b.delta = 50;
  a.entropy_threshold = b.entropy_threshold = 1e9;
  for (std::size_t i = 0; i < 10; ++i) {
    a.seed = b.seed = i;
    const auto rb = watermark_text(w.ctx(), w.doc(i), b);
    EXPECT_EQ(watermark_text(w.ctx(), w.doc(i), a).output.ids, rb.output.ids);
    EXPECT_EQ(mean_green(rb.perturbed), 0.0);
  }
}

TEST(WatermarkText, StrongDeltaMakesMostTokensGreen) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 10;
  p.entropy_threshold = 0;
  double total = 0, base = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    p.seed = i;
    const auto x = w.doc(i);
    total += mean_green(watermark_text(w.ctx(), x, p).green);
    base += mean_green(detection_flags(w.ctx(), x.ids, p));
  }
  EXPECT_GE(total / 200, 0.6);
  EXPECT_GT(total, base);
}

TEST(WatermarkText, DetectionFlagsMatchGenerationFlags) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 2;
  for (auto scheme : {Scheme::kgw, Scheme::unigram}) {
    p.scheme = scheme;
    for (std::size_t i = 0; i < 5; ++i) {
      p.seed = i;
      const auto rec = watermark_text(w.ctx(), w.doc(i), p);
      EXPECT_EQ(detection_flags(w.ctx(), rec.output.ids, p), rec.green) << to_string(scheme);
    }
  }
  // Prefix mode: identical from position 1 on (position 0 is keyed by the
  // target's first token during generation and by y_0 during detection).
  p.scheme = Scheme::semantic;
  p.conditioning = Conditioning::prefix;
  for (std::size_t i = 0; i < 5; ++i) {
    p.seed = i;
    const auto rec = watermark_text(w.ctx(), w.doc(i), p);
    const auto flags = detection_flags(w.ctx(), rec.output.ids, p);
    EXPECT_TRUE(std::equal(flags.begin() + 1, flags.end(), rec.green.begin() + 1));
  }
  // Global mode recomputes the split from the output itself.
  p.conditioning = Conditioning::global;
  const auto rec = watermark_text(w.ctx(), w.doc(0), p);
  const auto split = green_list(w.mapper, rec.output);
  const auto flags = detection_flags(w.ctx(), rec.output.ids, p);
  for (std::size_t t = 0; t < flags.size(); ++t) EXPECT_EQ(flags[t], split.is_green(rec.output.ids[t]) ? 1 : 0);
  EXPECT_TRUE(detection_flags(w.ctx(), {}, p).empty());
}

TEST(WatermarkText, Errors) {
  const auto& w = world();
  WatermarkParams p;
  EXPECT_THROW(watermark_text(w.ctx(), TokenSeq{}, p), DataError);
  p.delta = -1;
  EXPECT_THROW(watermark_text(w.ctx(), w.doc(0), p), UsageError);
  p = {};
  p.top_p = 0;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  p.gamma = 1;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  auto ctx = w.ctx();
  ctx.mapper = nullptr;
  EXPECT_THROW(watermark_text(ctx, w.doc(0), p), UsageError);
  ctx = w.ctx();
  ctx.vocab_size -= 1;
  EXPECT_THROW(watermark_text(ctx, w.doc(0), p), FormatError);
  EXPECT_THROW(parse_scheme("kgw2"), UsageError);
  EXPECT_EQ(parse_conditioning("prefix"), Conditioning::prefix);
  EXPECT_EQ(parse_perturb_mode("additive"), PerturbMode::additive);
}

TEST(GenerateThenWatermark, StageOneIsPlainSampling) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 4;
  p.seed = 12;
  const auto prompt = w.doc(7, 5).ids;
  const auto rec = generate_then_watermark(w.ctx(), prompt, 30, p);
  Rng rng(stream_seed(p.seed, 1));
  const auto x = sample_continuation(w.lm, prompt, 30, {p.temperature, p.top_p}, rng);
  EXPECT_EQ(rec.original.ids, x);
  EXPECT_EQ(rec.output.ids, watermark_text(w.ctx(), rec.original, p).output.ids);
}

TEST(GenerateThenWatermark, ZeroDeltaWithHardMaskKeepsStageOne) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 0;
  p.fidelity_weight = std::numeric_limits<double>::infinity();
  const auto rec = generate_then_watermark(w.ctx(false), w.doc(2, 4).ids, 25, p);
  EXPECT_EQ(rec.output.ids, rec.original.ids);
}

TEST(GenerateThenWatermark, StageTwoRaisesGreenFraction) {
  const auto& w = world();
  WatermarkParams p;
  p.delta = 4;
  double before = 0, after = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    p.seed = i;
    const auto rec = generate_then_watermark(w.ctx(), w.doc(i, 4).ids, 40, p);
    before += mean_green(detection_flags(w.ctx(), rec.original.ids, p));
    after += mean_green(detection_flags(w.ctx(), rec.output.ids, p));
  }
  EXPECT_GT(after, before);
}

TEST(WatermarkBatch, SerialAndParallelAgreeWithSingleCalls) {
  const auto& w = world();
  std::vector<TokenSeq> texts;
  for (std::size_t i = 0; i < 12; ++i) texts.push_back(w.doc(i, 30));
  WatermarkParams p;
  p.delta = 2;
  p.seed = 4;
  for (auto cond : {Conditioning::global, Conditioning::prefix}) {
    p.conditioning = cond;
    const auto s = watermark_batch(w.ctx(), texts, p, Exec::serial);
    const auto q = watermark_batch(w.ctx(), texts, p, Exec::parallel);
    ASSERT_EQ(s.size(), texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      EXPECT_EQ(s[i].output.ids, q[i].output.ids);
      EXPECT_EQ(s[i].green, q[i].green);
      EXPECT_EQ(s[i].gate_entropy, q[i].gate_entropy);
      auto one = p;
      one.seed = stream_seed(p.seed, i);
      EXPECT_EQ(s[i].output.ids, watermark_text(w.ctx(), texts[i], one).output.ids);
    }
  }
  texts.push_back(TokenSeq{});
  EXPECT_THROW(watermark_batch(w.ctx(), texts, p, Exec::parallel), DataError);
}

TEST(Records, FlagEncodingAndJsonLines) {
  const std::vector<std::uint8_t> g{1, 1, 0, 0, 0, 1}, q{1, 1, 1, 0, 0, 0};
  EXPECT_EQ(encode_flags(g, q), "3:2,2:1,0:2,1:1");
  EXPECT_EQ(encode_flags({}, {}), "");

  const auto& w = world();
  WatermarkParams p;
  p.fidelity_weight = std::numeric_limits<double>::infinity();
  const auto rec = watermark_text(w.ctx(), w.doc(1, 10), p);
  const auto dir = semwm::test::scratch_dir("records");
  write_records(dir / "wm.jsonl", std::vector<WatermarkedRecord>{rec}, w.vocab, "# run");
  std::ifstream in(dir / "wm.jsonl");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, "# run");
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("output").get<std::string>(), detokenize(rec.output.ids, w.vocab));
  EXPECT_EQ(j.at("scheme"), "semantic");
  EXPECT_EQ(j.at("params").at("fidelity_weight").get<double>(), -1.0);
  EXPECT_EQ(j.at("flags").get<std::string>(), encode_flags(rec.green, rec.perturbed));
  std::filesystem::remove_all(dir);
}
