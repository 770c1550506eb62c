#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semwm/toy_lm.hpp"
#include "support.hpp"

using namespace semwm;

namespace {

Vocabulary vocab_of(std::initializer_list<const char*> words) {
  std::vector<std::string> t{std::string(Vocabulary::kUnkToken)};
  for (auto w : words) t.emplace_back(w);
  return Vocabulary(t);
}

std::vector<TokenSeq> corpus_of(const Vocabulary& v, std::initializer_list<const char*> docs) {
  std::vector<TokenSeq> out;
  for (auto d : docs) out.push_back(tokenize(d, v));
  return out;
}

// Straight-line restatement of the documented estimator: counts come from a
// scan over every corpus position instead of the model's tables.
std::vector<double> oracle_probs(const std::vector<TokenSeq>& corpus, std::size_t V, int order, double k,
                                 const std::vector<TokenId>& context) {
  const std::size_t top = std::min<std::size_t>(order - 1, context.size());
  struct Level {
    std::vector<double> counts;
    double total;
  };
  std::vector<Level> seen;
  for (std::size_t j = top + 1; j-- > 0;) {
    Level lv{std::vector<double>(V, 0.0), 0.0};
    for (const auto& doc : corpus) {
      for (std::size_t t = j; t < doc.ids.size(); ++t) {
        bool match = true;
        for (std::size_t i = 0; i < j; ++i) match &= doc.ids[t - j + i] == context[context.size() - j + i];
        if (match) {
          lv.counts[doc.ids[t]] += 1;
          lv.total += 1;
        }
      }
    }
    if (lv.total > 0) seen.push_back(lv);
  }
  std::vector<double> c(V, 0.0);
  double mass = seen.empty() ? 0.0 : seen[0].total;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    const double w = i + 1 == seen.size() ? std::pow(0.4, double(i)) : 0.6 * std::pow(0.4, double(i));
    for (std::size_t v = 0; v < V; ++v) c[v] += w * mass * seen[i].counts[v] / seen[i].total;
  }
  std::vector<double> p(V);
  for (std::size_t v = 0; v < V; ++v) p[v] = (c[v] + k) / (mass + k * double(V));
  return p;
}

double oracle_entropy(const std::vector<double>& p) {
  double h = 0;
  for (double x : p) h += x > 0 ? -x * std::log(x) : 0.0;
  return h;
}

}  // namespace

TEST(NGramLM, MatchesCountOracleOnTinyCorpus) {
  auto v = vocab_of({"a", "b"});
  auto corpus = corpus_of(v, {"a b a b"});
  auto lm = train_lm(corpus, v, 2, 1.0);
  auto d = lm.next_dist(std::vector<TokenId>{v.id_of("a")});
  // Bigram row after "a": b x2 (weight 0.6); unigram row: a x2, b x2 (weight 0.4), mass 2.
  // Pseudo counts: a 0.4, b 1.2 + 0.4 = 1.6, unk 0; denominator 2 + 3k.
  EXPECT_NEAR(d.probs[v.id_of("b")], 2.6 / 5.0, 1e-12);
  EXPECT_NEAR(d.probs[v.id_of("a")], 1.4 / 5.0, 1e-12);
  EXPECT_NEAR(d.probs[Vocabulary::kUnk], 1.0 / 5.0, 1e-12);
  EXPECT_NEAR(d.logits[v.id_of("b")], std::log(2.6), 1e-12);
}

TEST(NGramLM, MatchesCountOracleOnRandomCorpora) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t V = 3 + uniform_index(rng, 6);
    std::vector<std::string> toks{std::string(Vocabulary::kUnkToken)};
    for (std::size_t i = 1; i < V; ++i) toks.push_back("w" + std::to_string(i));
    Vocabulary vocab(toks);
    std::vector<TokenSeq> corpus(1 + uniform_index(rng, 4));
    for (auto& doc : corpus) {
      doc.ids.resize(1 + uniform_index(rng, 30));
      for (auto& id : doc.ids) id = static_cast<TokenId>(uniform_index(rng, V));
    }
    const int order = 1 + static_cast<int>(uniform_index(rng, 4));
    const double k = 0.5 + uniform01(rng);
    auto lm = train_lm(corpus, vocab, order, k);
    for (int q = 0; q < 10; ++q) {
      std::vector<TokenId> ctx(uniform_index(rng, 5));
      for (auto& id : ctx) id = static_cast<TokenId>(uniform_index(rng, V));
      auto d = lm.next_dist(ctx);
      auto p = oracle_probs(corpus, V, order, k, ctx);
      double sum = 0;
      for (std::size_t i = 0; i < V; ++i) {
        EXPECT_NEAR(d.probs[i], p[i], 1e-12);
        EXPECT_NEAR(std::exp(lm.log_prob(ctx, static_cast<TokenId>(i))), p[i], 1e-12);
        if (k >= 1.0) {
          EXPECT_GE(d.logits[i], 0.0);
        }
        sum += d.probs[i];
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
      EXPECT_NEAR(d.entropy_nats, oracle_entropy(p), 1e-9);
      EXPECT_LE(d.entropy_nats, std::log(double(V)) + 1e-12);
    }
  }
}

TEST(NGramLM, SingleTokenCorpusGivesSmoothedFrequencies) {
  auto v = vocab_of({"a", "b"});
  auto lm = train_lm(corpus_of(v, {"a a a"}), v, 1, 1.0);
  auto d = lm.next_dist({});
  EXPECT_NEAR(d.probs[v.id_of("a")], 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(d.probs[v.id_of("b")], 1.0 / 6.0, 1e-12);
}

TEST(NGramLM, EvenCountsGiveUniformDistribution) {
  auto v = vocab_of({"a", "b"});
  auto corpus = corpus_of(v, {"a b zzz"});
  auto lm = train_lm(corpus, v, 1, 1.0);
  auto d = lm.next_dist({});
  for (double p : d.probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.entropy_nats, std::log(3.0), 1e-12);
}

TEST(NGramLM, EntropyVanishesAsSmoothingShrinks) {
  auto v = vocab_of({"a", "b", "c"});
  auto corpus = corpus_of(v, {"a a a a"});
  double prev = 1e9;
  for (double k : {1.0, 1e-3, 1e-6, 1e-9}) {
    const double h = train_lm(corpus, v, 1, k).next_dist({}).entropy_nats;
    EXPECT_LT(h, prev);
    prev = h;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(NGramLM, DeterministicTraining) {
  const auto docs = test::bundled_corpus();
  auto v = build_vocab(docs, 500);
  auto corpus = tokenize_corpus(docs, v);
  EXPECT_EQ(train_lm(corpus, v, 3, 1.0), train_lm(corpus, v, 3, 1.0));
}

TEST(NGramLM, RejectsBadArguments) {
  auto v = vocab_of({"a"});
  auto corpus = corpus_of(v, {"a"});
  EXPECT_THROW(train_lm(corpus, v, 0, 1.0), UsageError);
  EXPECT_THROW(train_lm(corpus, v, 5, 1.0), UsageError);
  EXPECT_THROW(train_lm(corpus, v, 2, 0.0), UsageError);
  std::vector<TokenSeq> empty(2);
  EXPECT_THROW(train_lm(empty, v, 2, 1.0), DataError);
}

TEST(NGramLM, SaveLoadRoundTripAndVocabCheck) {
  auto dir = test::scratch_dir("lm");
  const auto docs = test::bundled_corpus();
  auto v = build_vocab(docs, 300);
  auto lm = train_lm(tokenize_corpus(docs, v), v, 3, 1.0);
  lm.save(dir / "lm.txt");
  EXPECT_EQ(NGramLM::load(dir / "lm.txt", v), lm);
  auto other = build_vocab(docs, 200);
  EXPECT_THROW(NGramLM::load(dir / "lm.txt", other), FormatError);
}

TEST(Sampling, GreedyLimit) {
  std::vector<double> logits{0.3, 2.0, 1.9, -1.0};
  Rng rng(1);
  for (double temp : {0.0, 1e-4}) {
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sample(logits, {temp, 1.0}, rng), 1);
  }
}

TEST(Sampling, NucleusExcludesTail) {
  std::vector<double> logits{std::log(0.95), std::log(0.05)};
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample(logits, {1.0, 0.9}, rng), 0);
}

TEST(Sampling, FrequenciesMatchAnalyticNucleus) {
  const std::vector<double> logits{2.0, 1.0, 0.5, 0.0, -1.0, 1.5};
  const double temp = 0.7, top_p = 0.9;
  // Analytic nucleus, computed here without the library.
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] / temp);
  for (double& x : p) x /= z;
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] > p[b]; });
  std::vector<double> expect(p.size(), 0.0);
  double cum = 0;
  std::size_t keep = 0;
  while (cum < top_p) cum += p[order[keep++]];
  for (std::size_t i = 0; i < keep; ++i) expect[order[i]] = p[order[i]] / cum;

  const auto lib = nucleus_probs(logits, {temp, top_p});
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(lib[i], expect[i], 1e-12);

  const int n = 100000;
  std::vector<int> hits(p.size(), 0);
  Rng rng(3);
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(sample(logits, {temp, top_p}, rng))];
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (expect[i] == 0.0) {
      EXPECT_EQ(hits[i], 0) << "token " << i << " is outside the nucleus";
      continue;
    }
    const double sigma = std::sqrt(n * expect[i] * (1 - expect[i]));
    EXPECT_NEAR(hits[i], n * expect[i], 3 * sigma) << "token " << i;
  }
}

TEST(Sampling, SeedDeterminism) {
  std::vector<double> logits{1.0, 1.1, 0.9, 1.2};
  Rng a(9), b(9);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample(logits, {0.7, 0.9}, a), sample(logits, {0.7, 0.9}, b));
}
