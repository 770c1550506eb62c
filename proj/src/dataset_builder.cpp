#include "semwm/dataset_builder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace semwm {

using nlohmann::json;

std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::negative: return "negative";
    case Sentiment::neutral: return "neutral";
    case Sentiment::positive: return "positive";
  }
  return "neutral";
}

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::paraphrase: return "paraphrase";
    case TransformKind::sentiment_reversal: return "sentiment_reversal";
    case TransformKind::latter_half_reversal: return "latter_half_reversal";
    case TransformKind::hate_insertion: return "hate_insertion";
  }
  return "paraphrase";
}

TransformKind parse_transform_kind(std::string_view name) {
  for (auto k : {TransformKind::paraphrase, TransformKind::sentiment_reversal, TransformKind::latter_half_reversal,
                 TransformKind::hate_insertion}) {
    if (to_string(k) == name) return k;
  }
  throw UsageError("unknown transform kind: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Lexicons

void Lexicons::add_synset(std::span<const std::string> members) {
  for (const auto& w : members) {
    auto& syn = synonyms[w];
    for (const auto& o : members) {
      if (o != w && std::find(syn.begin(), syn.end(), o) == syn.end()) syn.push_back(o);
    }
    std::sort(syn.begin(), syn.end());
  }
}

void Lexicons::add_antonym_pair(const std::string& positive, const std::string& negative) {
  polarity[positive] = Sentiment::positive;
  polarity[negative] = Sentiment::negative;
  auto put = [&](const std::string& a, const std::string& b) {
    auto [it, inserted] = antonym.emplace(a, b);
    if (!inserted && it->second != b) throw FormatError("conflicting antonyms for '" + a + "'");
  };
  put(positive, negative);
  put(negative, positive);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, '\t')) {
    while (!cur.empty() && (cur.back() == ' ' || cur.back() == '\r')) cur.pop_back();
    std::size_t a = cur.find_first_not_of(' ');
    if (a != std::string::npos) out.push_back(cur.substr(a));
  }
  return out;
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

bool single_token(const std::string& w) {
  const auto t = split_words(w);
  return t.size() == 1 && t[0] == w;
}

}  // namespace

Lexicons Lexicons::load(const std::filesystem::path& dir) {
  Lexicons lex;
  for (const auto& line : read_lines(dir / "synonyms.tsv")) {
    const auto members = split_tabs(line);
    if (members.size() < 2) throw FormatError("synonyms.tsv: synset with fewer than two members: " + line);
    lex.add_synset(members);
  }
  for (const auto& line : read_lines(dir / "polarity.tsv")) {
    const auto pair = split_tabs(line);
    if (pair.size() != 2) throw FormatError("polarity.tsv: expected 'positive<TAB>negative': " + line);
    lex.add_antonym_pair(pair[0], pair[1]);
  }
  lex.hate_templates = read_lines(dir / "hate_templates.txt");
  lex.groups = read_lines(dir / "groups.txt");
  lex.validate();
  return lex;
}

void Lexicons::validate() const {
  for (const auto& [w, syn] : synonyms) {
    if (!single_token(w)) throw FormatError("synonym entry is not a single word token: '" + w + "'");
    for (const auto& s : syn) {
      if (!single_token(s)) throw FormatError("synonym entry is not a single word token: '" + s + "'");
    }
  }
  for (const auto& [w, a] : antonym) {
    const auto back = antonym.find(a);
    if (back == antonym.end() || back->second != w) throw FormatError("antonym pair not symmetric: " + w + "/" + a);
    if (!single_token(w)) throw FormatError("polarity entry is not a single word token: '" + w + "'");
    const auto pw = polarity.find(w), pa = polarity.find(a);
    if (pw == polarity.end() || pa == polarity.end() || pw->second == pa->second) {
      throw FormatError("antonym pair must have opposite polarity: " + w + "/" + a);
    }
  }
  if (hate_templates.empty()) throw FormatError("no hate templates");
  if (groups.empty()) throw FormatError("no group names");
  for (const auto& t : hate_templates) {
    if (count_occurrences(t, kGroupPlaceholder) != 1) {
      throw FormatError("template must contain exactly one [GROUP]: " + t);
    }
  }
}

std::vector<std::string> Lexicons::vocabulary_texts() const {
  std::vector<std::string> out;
  std::set<std::string> words;
  for (const auto& [w, syn] : synonyms) {
    words.insert(w);
    words.insert(syn.begin(), syn.end());
  }
  for (const auto& [w, a] : antonym) words.insert(w);
  out.assign(words.begin(), words.end());
  for (const auto& t : hate_templates) {
    for (const auto& g : groups) out.push_back(instantiate_template(t, g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// helpers

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

double length_ratio(std::string_view a, std::string_view b) {
  const double la = static_cast<double>(split_words(a).size());
  const double lb = static_cast<double>(split_words(b).size());
  if (la == 0.0 || lb == 0.0) return std::numeric_limits<double>::infinity();
  return std::max(la, lb) / std::min(la, lb);
}

// ---------------------------------------------------------------------------
// local transforms

std::vector<std::string> paraphrase_words(std::span<const std::string> words, const Lexicons& lex,
                                          double replace_rate, Rng& rng) {
  std::vector<std::string> out(words.begin(), words.end());
  if (replace_rate <= 0.0) return out;
  for (auto& w : out) {
    const auto it = lex.synonyms.find(w);
    if (it == lex.synonyms.end() || it->second.empty()) continue;
    if (uniform01(rng) < replace_rate) w = it->second[uniform_index(rng, it->second.size())];
  }
  return out;
}

std::string paraphrase_local(std::string_view text, const Lexicons& lex, double replace_rate, Rng& rng) {
  return join_words(paraphrase_words(split_words(text), lex, replace_rate, rng));
}

Sentiment classify_sentiment_words(std::span<const std::string> words, const Lexicons& lex) {
  long score = 0;
  for (const auto& w : words) {
    const auto it = lex.polarity.find(w);
    if (it == lex.polarity.end()) continue;
    if (it->second == Sentiment::positive) ++score;
    if (it->second == Sentiment::negative) --score;
  }
  return score > 0 ? Sentiment::positive : score < 0 ? Sentiment::negative : Sentiment::neutral;
}

Sentiment classify_sentiment_local(std::string_view text, const Lexicons& lex) {
  return classify_sentiment_words(split_words(text), lex);
}

std::size_t latter_half_start(std::size_t length) { return (length + 1) / 2; }

FlipResult sentiment_flip_words(std::span<const std::string> words, const Lexicons& lex, std::size_t max_edits,
                                Rng& rng, FlipRegion region) {
  FlipResult r;
  r.words.assign(words.begin(), words.end());
  r.original = classify_sentiment_words(words, lex);
  if (words.size() < 2) {
    r.reason = "too_short";
    return r;
  }
  if (r.original == Sentiment::positive) {
    r.target = Sentiment::negative;
  } else if (r.original == Sentiment::negative) {
    r.target = Sentiment::positive;
  } else {
    r.target = uniform01(rng) < 0.5 ? Sentiment::positive : Sentiment::negative;
  }
  const Sentiment source = r.target == Sentiment::positive ? Sentiment::negative : Sentiment::positive;
  const std::size_t lo = region == FlipRegion::latter_half ? latter_half_start(words.size()) : 0;

  std::vector<std::size_t> candidates;
  for (std::size_t i = lo; i < words.size(); ++i) {
    const auto p = lex.polarity.find(words[i]);
    if (p != lex.polarity.end() && p->second == source && lex.antonym.count(words[i])) candidates.push_back(i);
  }
  if (candidates.empty()) {
    r.reason = "no_polarity_word";
    return r;
  }
  if (candidates.size() > max_edits) {
    shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(max_edits);
    std::sort(candidates.begin(), candidates.end());
  }
  for (std::size_t i : candidates) r.words[i] = lex.antonym.at(r.words[i]);
  r.edited = candidates;

  const auto region_words = std::span<const std::string>(r.words).subspan(lo);
  if (classify_sentiment_words(region_words, lex) != r.target) {
    r.reason = "verification_failed";
    return r;
  }
  r.ok = true;
  return r;
}

std::optional<std::string> sentiment_flip(std::string_view text, const Lexicons& lex, std::size_t max_edits, Rng& rng,
                                          FlipRegion region) {
  auto r = sentiment_flip_words(split_words(text), lex, max_edits, rng, region);
  if (!r.ok) return std::nullopt;
  return join_words(r.words);
}

namespace {

bool terminal(const std::string& w) { return w == "." || w == "!" || w == "?"; }

}  // namespace

std::vector<std::size_t> sentence_boundaries(std::span<const std::string> words) {
  std::vector<std::size_t> b{0};
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (terminal(words[i]) && i + 1 != b.back()) b.push_back(i + 1);
  }
  if (b.back() != words.size()) b.push_back(words.size());
  return b;
}

std::string instantiate_template(std::string_view tmpl, std::string_view group) {
  std::string out(tmpl);
  const auto pos = out.find(kGroupPlaceholder);
  if (pos != std::string::npos) out.replace(pos, kGroupPlaceholder.size(), group);
  return out;
}

InsertResult insert_hate_words(std::span<const std::string> words, std::span<const std::string> templates,
                               std::span<const std::string> groups, std::size_t n_phrases, Rng& rng) {
  InsertResult r;
  if (n_phrases == 0) {
    r.words.assign(words.begin(), words.end());
    return r;
  }
  if (templates.empty() || groups.empty()) throw DataError("hate insertion needs templates and group names");
  const auto bounds = sentence_boundaries(words);
  struct Pick {
    std::size_t boundary;
    std::size_t order;
    std::string phrase;
  };
  std::vector<Pick> picks;
  for (std::size_t k = 0; k < n_phrases; ++k) {
    const auto& t = templates[uniform_index(rng, templates.size())];
    const auto& g = groups[uniform_index(rng, groups.size())];
    const std::size_t b = bounds[uniform_index(rng, bounds.size())];
    picks.push_back({b, k, join_words(split_words(instantiate_template(t, g)))});
  }
  std::stable_sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) { return a.boundary < b.boundary; });

  std::size_t next = 0;
  for (std::size_t i = 0; i <= words.size(); ++i) {
    while (next < picks.size() && picks[next].boundary == i) {
      r.offsets.push_back(r.words.size());
      r.phrases.push_back(picks[next].phrase);
      for (auto& w : split_words(picks[next].phrase)) r.words.push_back(std::move(w));
      ++next;
    }
    if (i < words.size()) r.words.push_back(words[i]);
  }
  return r;
}

std::string insert_hate(std::string_view text, const Lexicons& lex, std::size_t n_phrases, Rng& rng) {
  return join_words(insert_hate_words(split_words(text), lex.hate_templates, lex.groups, n_phrases, rng).words);
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
  const auto t = split_words(text);
  const auto p = split_words(phrase);
  if (p.empty()) return true;
  return std::search(t.begin(), t.end(), p.begin(), p.end()) != t.end();
}

namespace {

TransformOutcome finish(std::string original, std::string modified, std::string verification) {
  TransformOutcome out;
  out.verification = std::move(verification);
  if (split_words(modified).empty()) {
    out.reason = "empty";
  } else if (length_ratio(original, modified) > kMaxLengthRatio) {
    out.reason = "length_ratio";
  } else {
    out.text = std::move(modified);
  }
  return out;
}

TransformOutcome reject(std::string reason, std::string verification, std::string raw = {}) {
  TransformOutcome out;
  out.reason = std::move(reason);
  out.verification = std::move(verification);
  out.raw_response = std::move(raw);
  return out;
}

}  // namespace

TransformOutcome apply_local(const TransformSpec& spec, std::string_view text, const Lexicons& lex, Rng& rng) {
  const std::string original(text);
  switch (spec.kind) {
    case TransformKind::paraphrase:
      return finish(original, paraphrase_local(text, lex, spec.replace_rate, rng), "none");
    case TransformKind::sentiment_reversal:
    case TransformKind::latter_half_reversal: {
      const auto region =
          spec.kind == TransformKind::latter_half_reversal ? FlipRegion::latter_half : FlipRegion::whole;
      auto r = sentiment_flip_words(split_words(text), lex, spec.max_edits, rng, region);
      if (!r.ok) return reject(r.reason, "lexicon");
      return finish(original, join_words(r.words), "lexicon");
    }
    case TransformKind::hate_insertion: {
      auto r = insert_hate_words(split_words(text), lex.hate_templates, lex.groups, spec.n_phrases, rng);
      std::string out = join_words(r.words);
      for (const auto& p : r.phrases) {
        if (!contains_phrase(out, p)) return reject("verification_failed", "phrase_match");
      }
      return finish(original, std::move(out), "phrase_match");
    }
  }
  return reject("unknown_kind", "none");
}

// ---------------------------------------------------------------------------
// LLM transforms

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

}  // namespace

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  PromptSet p;
  p.paraphrase = read_file(dir / "paraphrase.txt");
  p.sentiment_spoof = read_file(dir / "sentiment_spoof.txt");
  p.sentiment_judge = read_file(dir / "sentiment_judge.txt");
  p.hate_templates = read_file(dir / "hate_templates.txt");
  return p;
}

std::optional<std::string> parse_modified_text(std::string_view response) {
  constexpr std::string_view open = "[MODIFIED_TEXT]", close = "[/MODIFIED_TEXT]";
  const auto a = response.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  const auto b = response.find(close, a + open.size());
  if (b == std::string_view::npos) return std::nullopt;
  auto text = trim(response.substr(a + open.size(), b - a - open.size()));
  if (text.empty()) return std::nullopt;
  return text;
}

std::optional<Sentiment> parse_judge_sentiment(std::string_view response) {
  std::optional<Sentiment> found;
  for (auto pos = response.find("[["); pos != std::string_view::npos; pos = response.find("[[", pos + 2)) {
    const auto end = response.find("]]", pos + 2);
    if (end == std::string_view::npos) break;
    std::string label = trim(response.substr(pos + 2, end - pos - 2));
    std::transform(label.begin(), label.end(), label.begin(), [](unsigned char c) { return std::tolower(c); });
    if (label == "positive") found = Sentiment::positive;
    if (label == "negative") found = Sentiment::negative;
    if (label == "neutral") found = Sentiment::neutral;
  }
  return found;
}

std::vector<std::string> parse_phrases(std::string_view response) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = response.find("<phrase", pos)) != std::string_view::npos) {
    const auto gt = response.find('>', pos);
    if (gt == std::string_view::npos) break;
    const std::string tag(response.substr(pos + 1, gt - pos - 1));
    if (tag.empty() || tag[0] == '/') {
      pos = gt;
      continue;
    }
    const std::string close = "</" + tag + ">";
    const auto end = response.find(close, gt + 1);
    if (end == std::string_view::npos) break;
    auto phrase = trim(response.substr(gt + 1, end - gt - 1));
    if (!phrase.empty()) out.push_back(std::move(phrase));
    pos = end + close.size();
  }
  return out;
}

TransformOutcome llm_transform(LLMClient& client, const TransformSpec& spec, std::string_view text,
                               const Lexicons& lex, const PromptSet& prompts, Rng& rng,
                               const LLMTransformOptions& options) {
  const std::string original(text);
  switch (spec.kind) {
    case TransformKind::paraphrase: {
      const std::string raw = client.chat(prompts.paraphrase, original);
      // The paraphrase prompt asks for bare text; accept the delimited form too.
      std::string modified = parse_modified_text(raw).value_or(trim(raw));
      if (modified.empty()) return reject("parse_failed", "none", raw);
      return finish(original, std::move(modified), "none");
    }
    case TransformKind::sentiment_reversal:
    case TransformKind::latter_half_reversal: {
      const Sentiment orig = classify_sentiment_local(original, lex);
      Sentiment target = orig == Sentiment::positive   ? Sentiment::negative
                         : orig == Sentiment::negative ? Sentiment::positive
                         : (uniform01(rng) < 0.5 ? Sentiment::positive : Sentiment::negative);
      std::string system = replace_all(prompts.sentiment_spoof, "{modified_sentiment}", to_string(target));
      system = replace_all(system, "{x}", std::to_string(spec.max_edits));
      if (spec.kind == TransformKind::latter_half_reversal) {
        system += "\nOnly modify words in the latter half of the text; leave the first half unchanged.\n";
      }
      const std::string raw = client.chat(system, original);
      auto modified = parse_modified_text(raw);
      if (!modified) return reject("parse_failed", options.llm_judge ? "llm_judge" : "lexicon", raw);
      Sentiment got;
      if (options.llm_judge) {
        const auto verdict = parse_judge_sentiment(client.chat(prompts.sentiment_judge, *modified));
        if (!verdict) return reject("judge_parse_failed", "llm_judge", raw);
        got = *verdict;
      } else {
        const auto words = split_words(*modified);
        const std::size_t lo =
            spec.kind == TransformKind::latter_half_reversal ? latter_half_start(words.size()) : 0;
        got = classify_sentiment_words(std::span<const std::string>(words).subspan(lo), lex);
      }
      if (got != target) return reject("verification_failed", options.llm_judge ? "llm_judge" : "lexicon", raw);
      return finish(original, std::move(*modified), options.llm_judge ? "llm_judge" : "lexicon");
    }
    case TransformKind::hate_insertion: {
      const std::string raw = client.chat(prompts.hate_templates, "");
      std::vector<std::string> templates;
      for (auto& p : parse_phrases(raw)) {
        if (count_occurrences(p, kGroupPlaceholder) == 1) templates.push_back(std::move(p));
      }
      if (templates.empty()) return reject("parse_failed", "phrase_match", raw);
      auto r = insert_hate_words(split_words(original), templates, lex.groups, spec.n_phrases, rng);
      std::string out = join_words(r.words);
      for (const auto& p : r.phrases) {
        if (!contains_phrase(out, p)) return reject("verification_failed", "phrase_match", raw);
      }
      return finish(original, std::move(out), "phrase_match");
    }
  }
  return reject("unknown_kind", "none");
}

// ---------------------------------------------------------------------------
// dataset

namespace {

struct AnchorOutput {
  std::vector<TripletRecord> records;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::vector<std::pair<std::string, TransformOutcome>> outcomes;  // kind name, outcome
};

constexpr std::uint64_t kNegativeSlotBase = 1000;

}  // namespace

DatasetResult build_triplets(std::span<const std::string> anchors, const Lexicons& lex, const DatasetConfig& config,
                             const LLMBackend* llm) {
  if (config.positive_rate_min < 0.0 || config.positive_rate_max > 1.0 ||
      config.positive_rate_min > config.positive_rate_max) {
    throw UsageError("positive replace-rate range must satisfy 0 <= min <= max <= 1");
  }
  std::vector<AnchorOutput> per(anchors.size());

  auto run = [&](const TransformSpec& spec, const std::string& text, Rng& rng) {
    if (llm && llm->client) return llm_transform(*llm->client, spec, text, lex, *llm->prompts, rng, llm->options);
    return apply_local(spec, text, lex, rng);
  };

#pragma omp parallel for schedule(dynamic)
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const std::string& anchor = anchors[a];
    AnchorOutput& out = per[a];
    std::vector<std::pair<TransformSpec, std::string>> pos, neg;
    std::vector<double> pos_ratio, neg_ratio;
    std::vector<std::string> neg_verif;
    for (std::size_t j = 0; j < config.n_positives; ++j) {
      Rng rng(stream_seed(config.seed, a, j));
      TransformSpec spec;
      spec.kind = TransformKind::paraphrase;
      spec.replace_rate =
          config.positive_rate_min + (config.positive_rate_max - config.positive_rate_min) * uniform01(rng);
      spec.seed = stream_seed(config.seed, a, j);
      auto o = run(spec, anchor, rng);
      out.outcomes.emplace_back(std::string(to_string(spec.kind)), o);
      if (o.text) {
        pos_ratio.push_back(length_ratio(anchor, *o.text));
        pos.emplace_back(spec, std::move(*o.text));
      }
    }
    for (std::size_t j = 0; j < config.negative_kinds.size(); ++j) {
      Rng rng(stream_seed(config.seed, a, kNegativeSlotBase + j));
      TransformSpec spec;
      spec.kind = config.negative_kinds[j];
      spec.max_edits = config.max_edits;
      spec.n_phrases = config.n_phrases;
      spec.seed = stream_seed(config.seed, a, kNegativeSlotBase + j);
      auto o = run(spec, anchor, rng);
      out.outcomes.emplace_back(std::string(to_string(spec.kind)), o);
      if (o.text) {
        neg_ratio.push_back(length_ratio(anchor, *o.text));
        neg_verif.push_back(o.verification);
        neg.emplace_back(spec, std::move(*o.text));
      }
    }
    out.positives = pos.size();
    out.negatives = neg.size();
    for (std::size_t p = 0; p < pos.size(); ++p) {
      for (std::size_t n = 0; n < neg.size(); ++n) {
        TripletRecord r;
        r.anchor = anchor;
        r.positive = pos[p].second;
        r.negative = neg[n].second;
        r.pos_kind = pos[p].first.kind;
        r.neg_kind = neg[n].first.kind;
        r.verification = neg_verif[n];
        r.length_ratio = std::max(pos_ratio[p], neg_ratio[n]);
        out.records.push_back(std::move(r));
      }
    }
  }

  DatasetResult result;
  result.stats.anchors = anchors.size();
  for (auto& out : per) {
    result.stats.positives_per_anchor.push_back(out.positives);
    result.stats.negatives_per_anchor.push_back(out.negatives);
    for (const auto& [kind, o] : out.outcomes) {
      auto& t = result.stats.by_kind[kind];
      ++t.attempted;
      if (o.text) {
        ++t.retained;
      } else {
        ++t.rejected[o.reason];
      }
    }
    for (auto& r : out.records) result.records.push_back(std::move(r));
  }
  result.stats.triplets = result.records.size();
  return result;
}

void write_triplets(const std::filesystem::path& path, std::span<const TripletRecord> records,
                    std::string_view header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path.string());
  if (!header.empty()) out << header << '\n';
  for (const auto& r : records) {
    json j = {{"anchor", r.anchor},
              {"positive", r.positive},
              {"negative", r.negative},
              {"pos_kind", to_string(r.pos_kind)},
              {"neg_kind", to_string(r.neg_kind)},
              {"verification", r.verification},
              {"length_ratio", r.length_ratio}};
    out << j.dump() << '\n';
  }
}

std::vector<TripletRecord> read_triplets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read: " + path.string());
  std::vector<TripletRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      const auto j = json::parse(line);
      TripletRecord r;
      r.anchor = j.at("anchor").get<std::string>();
      r.positive = j.at("positive").get<std::string>();
      r.negative = j.at("negative").get<std::string>();
      r.pos_kind = parse_transform_kind(j.at("pos_kind").get<std::string>());
      r.neg_kind = parse_transform_kind(j.at("neg_kind").get<std::string>());
      r.verification = j.value("verification", "");
      r.length_ratio = j.value("length_ratio", 1.0);
      records.push_back(std::move(r));
    } catch (const json::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad triplet record");
    } catch (const UsageError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (records.empty()) throw DataError("no triplet records in " + path.string());
  return records;
}

std::vector<Triplet> to_training_triplets(std::span<const TripletRecord> records, const Vocabulary& vocab) {
  std::vector<Triplet> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Triplet t;
    t.anchor = tokenize(r.anchor, vocab);
    t.positive = tokenize(r.positive, vocab);
    t.negative = tokenize(r.negative, vocab);
    t.pos_kind = std::string(to_string(r.pos_kind));
    t.neg_kind = std::string(to_string(r.neg_kind));
    out.push_back(std::move(t));
  }
  return out;
}

CorpusSplit split_documents(std::span<const std::string> docs, double heldout_fraction, std::uint64_t seed) {
  if (heldout_fraction < 0.0 || heldout_fraction > 1.0) throw UsageError("heldout fraction must be in [0, 1]");
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(stream_seed(seed, 0x73706c6974ULL));
  shuffle(order.begin(), order.end(), rng);
  const auto n_held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(docs.size())));
  CorpusSplit s;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_held ? s.heldout : s.train).push_back(docs[order[k]]);
  }
  return s;
}

}  // namespace semwm
