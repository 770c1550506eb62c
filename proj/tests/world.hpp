#pragma once

#include "semwm/toy_lm.hpp"
#include "semwm/watermark_engine.hpp"
#include "support.hpp"

namespace semwm::test {

// Shared LM, vocabulary and a random mapper with a wide input layer so the
// semantic split reacts to every token.
struct World {
  Lexicons lex;
  Vocabulary vocab;
  NGramLM lm;
  MappingModel mapper;
  CandidateTable candidates;
  CandidateTable singletons;
  std::vector<TokenSeq> docs;

  World() {
    lex = semwm::test::bundled_lexicons();
    auto texts = semwm::test::bundled_corpus();
    const auto corpus = texts;
    const auto extra = lex.vocabulary_texts();
    texts.insert(texts.end(), extra.begin(), extra.end());
    vocab = build_vocab(texts, 2000);
    docs = tokenize_corpus(corpus, vocab);
    lm = train_lm(docs, vocab, 3);
    mapper = MappingModel::random({512, 8, vocab.size()}, vocab.hash(), 5);
    Rng rng(5);
    for (auto& p : mapper.params()) p = static_cast<float>(standard_normal(rng) * 0.5);
    candidates = build_candidate_table(vocab, lex);
    singletons = build_candidate_table(vocab, Lexicons{});
  }

  WatermarkContext ctx(bool with_synonyms = true) const {
    return {&lm, &mapper, with_synonyms ? &candidates : &singletons, vocab.size()};
  }
  TokenSeq doc(std::size_t i, std::size_t len = 40) const {
    TokenSeq t = docs[i % docs.size()];
    if (t.ids.size() > len) t.ids.resize(len);
    return t;
  }
};

inline const World& world() {
  static const World w;
  return w;
}

}  // namespace semwm::test
