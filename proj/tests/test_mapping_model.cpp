#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "semwm/mapping_model.hpp"
#include "support.hpp"

using namespace semwm;

namespace {

TokenSeq seq(std::vector<TokenId> ids) { return TokenSeq{std::move(ids), {}}; }

MappingModel small_model(std::uint64_t seed, std::size_t V = 12, std::size_t H = 5, std::size_t F = 64) {
  auto m = MappingModel::random({F, H, V}, 0x1234, seed);
  // Default init keeps the input layer tiny; widen it so the forward pass is exercised.
  Rng rng(seed);
  for (auto& p : m.params()) p = static_cast<float>(standard_normal(rng) * 0.7);
  return m;
}

// Forward pass written out directly from the documented layout.
std::vector<double> oracle_forward(const MappingModel& m, const std::vector<TokenId>& ids) {
  const auto d = m.dims();
  std::map<std::uint32_t, double> c;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    c[unigram_bucket(ids[i], d.feature_dim)] += 1;
    if (i) c[bigram_bucket(ids[i - 1], ids[i], d.feature_dim)] += 1;
  }
  double norm = 0;
  for (auto& [k, v] : c) norm += v * v;
  norm = std::sqrt(norm);
  const auto p = m.params();
  const auto o = m.offsets();
  std::vector<double> h1(d.hidden_dim), h2(d.hidden_dim), out(d.vocab_size);
  for (std::size_t j = 0; j < d.hidden_dim; ++j) {
    double a = p[o.b_in + j];
    for (auto& [k, v] : c) a += p[o.w_in + k * d.hidden_dim + j] * v / norm;
    h1[j] = std::tanh(a);
  }
  for (std::size_t j = 0; j < d.hidden_dim; ++j) {
    double a = p[o.b_res + j];
    for (std::size_t i = 0; i < d.hidden_dim; ++i) a += p[o.w_res + j * d.hidden_dim + i] * h1[i];
    h2[j] = h1[j] + std::tanh(a);
  }
  for (std::size_t v = 0; v < d.vocab_size; ++v) {
    double a = p[o.b_out + v];
    for (std::size_t j = 0; j < d.hidden_dim; ++j) a += p[o.w_out + v * d.hidden_dim + j] * h2[j];
    out[v] = std::tanh(a);
  }
  return out;
}

}  // namespace

TEST(Featurize, EmptyTextIsZeroVector) {
  auto x = featurize(std::vector<TokenId>{}, 128);
  EXPECT_EQ(x.nnz(), 0u);
}

TEST(Featurize, UnitNormAndOrderSensitive) {
  auto ab = featurize(std::vector<TokenId>{1, 2}, 4096);
  auto ba = featurize(std::vector<TokenId>{2, 1}, 4096);
  double n = 0;
  for (double v : ab.value) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_NE(ab.index, ba.index);
  for (std::size_t i = 1; i < ab.index.size(); ++i) EXPECT_LT(ab.index[i - 1], ab.index[i]);
}

TEST(Featurize, AgreesWithExactNgramIndex) {
  const auto docs = test::bundled_corpus();
  auto vocab = build_vocab(docs, 2000);
  std::vector<TokenId> ids;
  for (std::size_t d = 0; ids.size() < 1000; ++d) {
    auto t = tokenize(docs[d], vocab);
    ids.insert(ids.end(), t.ids.begin(), t.ids.end());
  }
  ids.resize(1000);
  const std::size_t F = 4096;
  std::map<std::vector<TokenId>, double> exact;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    exact[{ids[i]}] += 1;
    if (i) exact[{ids[i - 1], ids[i]}] += 1;
  }
  std::map<std::uint32_t, double> buckets;
  for (auto& [g, c] : exact) {
    buckets[g.size() == 1 ? unigram_bucket(g[0], F) : bigram_bucket(g[0], g[1], F)] += c;
  }
  auto x = featurize(ids, F);
  ASSERT_EQ(x.nnz(), buckets.size());
  double norm = 0;
  for (auto& [b, c] : buckets) norm += c * c;
  norm = std::sqrt(norm);
  std::size_t i = 0;
  for (auto& [b, c] : buckets) {
    EXPECT_EQ(x.index[i], b);
    EXPECT_NEAR(x.value[i], c / norm, 1e-12);
    ++i;
  }
  const double collision_rate = 1.0 - double(buckets.size()) / double(exact.size());
  // Expected birthday-style rate for n items in F buckets is about n / (2F).
  EXPECT_LT(collision_rate, 2.0 * double(exact.size()) / (2.0 * F) + 0.02);
}

TEST(MappingModel, ZeroModelGivesZeroOutput) {
  MappingModel m({64, 4, 10}, 1);
  for (double v : m.embed(seq({1, 2, 3}))) EXPECT_EQ(v, 0.0);
  for (double v : m.embed(seq({}))) EXPECT_EQ(v, 0.0);
}

TEST(MappingModel, ForwardMatchesStraightLineOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto m = small_model(s);
    Rng rng(s + 100);
    std::vector<TokenId> ids(1 + uniform_index(rng, 20));
    for (auto& id : ids) id = static_cast<TokenId>(uniform_index(rng, 12));
    const auto got = m.embed(seq(ids));
    const auto want = oracle_forward(m, ids);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t v = 0; v < got.size(); ++v) {
      EXPECT_NEAR(got[v], want[v], 1e-6);
      EXPECT_LT(std::abs(got[v]), 1.0);
    }
    EXPECT_EQ(m.embed(seq(ids)), got);
  }
}

TEST(GreenList, StrictPositiveRule) {
  std::vector<double> f{0.5, -0.2, 0.0, 0.1};
  auto s = split_from_scores(f);
  EXPECT_EQ(s.green_ids(), (std::vector<TokenId>{0, 3}));
  EXPECT_EQ(s.red_ids(), (std::vector<TokenId>{1, 2}));
  std::vector<double> neg{-0.1, -1e-9, -0.5};
  EXPECT_EQ(split_from_scores(neg).green_count(), 0u);
}

TEST(GreenList, PartitionEqualsSignScan) {
  auto m = small_model(7, 40, 6, 128);
  auto text = seq({1, 5, 9, 3, 3, 20});
  auto f = m.embed(text);
  auto s = green_list(m, text);
  std::set<TokenId> green, red;
  for (auto id : s.green_ids()) green.insert(id);
  for (auto id : s.red_ids()) red.insert(id);
  EXPECT_EQ(green.size() + red.size(), 40u);
  for (std::size_t v = 0; v < f.size(); ++v) {
    EXPECT_EQ(green.count(static_cast<TokenId>(v)) == 1, f[v] > 0.0);
    EXPECT_EQ(red.count(static_cast<TokenId>(v)) == 1, !(f[v] > 0.0));
  }
}

TEST(PrefixEmbedder, MatchesFullEmbedAtEveryLength) {
  auto m = small_model(3, 20, 6, 256);
  std::vector<TokenId> ids{4, 8, 15, 16, 4, 8, 2};
  PrefixEmbedder pe(m);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    pe.push(ids[t]);
    std::vector<TokenId> prefix(ids.begin(), ids.begin() + static_cast<long>(t + 1));
    auto a = pe.embed();
    auto b = m.embed(seq(prefix));
    for (std::size_t v = 0; v < a.size(); ++v) EXPECT_NEAR(a[v], b[v], 1e-12);
  }
}

TEST(ModelFile, RoundTripIsBitExact) {
  auto dir = test::scratch_dir("model");
  const auto docs = test::bundled_corpus();
  auto vocab = build_vocab(docs, 30);
  auto m = MappingModel::random({128, 6, vocab.size()}, vocab.hash(), 5);
  m.metadata["note"] = "x";
  save_model(m, dir / "m.bin");
  auto l = load_model(dir / "m.bin", vocab);
  ASSERT_EQ(l.param_count(), m.param_count());
  for (std::size_t i = 0; i < m.param_count(); ++i) EXPECT_EQ(l.params()[i], m.params()[i]);
  EXPECT_EQ(l.metadata.at("note"), "x");
  auto t = tokenize(docs[0], vocab);
  EXPECT_EQ(l.embed(t), m.embed(t));
}

TEST(ModelFile, VocabMismatchAndTruncation) {
  auto dir = test::scratch_dir("model_bad");
  const auto docs = test::bundled_corpus();
  auto vocab = build_vocab(docs, 30);
  auto m = MappingModel::random({64, 4, vocab.size()}, vocab.hash(), 5);
  save_model(m, dir / "m.bin");
  EXPECT_THROW(load_model(dir / "m.bin", build_vocab(docs, 31)), FormatError);

  std::ifstream in(dir / "m.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  EXPECT_THROW(load_model(dir / "cut.bin"), FormatError);
  std::ofstream(dir / "junk.bin", std::ios::binary) << "hello";
  EXPECT_THROW(load_model(dir / "junk.bin"), FormatError);
}

TEST(Kernels, ParallelForwardAndBackwardAreBitIdentical) {
  auto m = small_model(21, 30, 8, 256);
  Rng rng(4);
  std::vector<SparseVec> xs;
  for (int i = 0; i < 37; ++i) {
    std::vector<TokenId> ids(3 + uniform_index(rng, 15));
    for (auto& id : ids) id = static_cast<TokenId>(uniform_index(rng, 30));
    xs.push_back(featurize(ids, 256));
  }
  std::vector<ForwardCache> cs, cp;
  forward_batch(m, xs, cs, Exec::serial);
  forward_batch(m, xs, cp, Exec::parallel);
  std::vector<std::vector<double>> d_out(xs.size(), std::vector<double>(30));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(cs[i].out, cp[i].out);
    for (auto& g : d_out[i]) g = standard_normal(rng);
  }
  std::vector<double> gs(m.param_count()), gp(m.param_count());
  backward_batch(m, xs, cs, d_out, gs, Exec::serial);
  backward_batch(m, xs, cp, d_out, gp, Exec::parallel);
  EXPECT_EQ(gs, gp);
}
