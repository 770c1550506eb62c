#include "semwm/toy_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace semwm {

namespace {

constexpr int kIdBits = 20;
constexpr std::uint64_t kIdMask = (1ULL << kIdBits) - 1;

}  // namespace

std::uint64_t NGramLM::context_key(std::span<const TokenId> ctx) {
  std::uint64_t key = static_cast<std::uint64_t>(ctx.size()) << 60;
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    key |= (static_cast<std::uint64_t>(ctx[i]) & kIdMask) << (kIdBits * i);
  }
  return key;
}

NGramLM train_lm(std::span<const TokenSeq> corpus, const Vocabulary& vocab, int order, double smoothing_k) {
  if (order < 1 || order > NGramLM::kMaxOrder) throw UsageError("n-gram order must be in [1, 4]");
  if (!(smoothing_k > 0.0)) throw UsageError("smoothing constant must be positive");
  if (vocab.size() > (1u << kIdBits)) throw UsageError("vocabulary too large for the n-gram key");

  std::vector<std::unordered_map<std::uint64_t, std::map<TokenId, std::uint32_t>>> raw(
      static_cast<std::size_t>(order));
  std::size_t tokens = 0;
  for (const auto& doc : corpus) {
    const auto& ids = doc.ids;
    for (std::size_t t = 0; t < ids.size(); ++t) {
      if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= vocab.size()) {
        throw DataError("token id out of vocabulary range");
      }
      const std::size_t max_ctx = std::min<std::size_t>(static_cast<std::size_t>(order - 1), t);
      for (std::size_t j = 0; j <= max_ctx; ++j) {
        auto key = NGramLM::context_key(std::span<const TokenId>(ids).subspan(t - j, j));
        ++raw[j][key][ids[t]];
      }
      ++tokens;
    }
  }
  if (tokens == 0) throw DataError("empty corpus");

  NGramLM lm;
  lm.order_ = order;
  lm.k_ = smoothing_k;
  lm.vocab_size_ = vocab.size();
  lm.vocab_hash_ = vocab.hash();
  lm.levels_.resize(static_cast<std::size_t>(order));
  for (std::size_t j = 0; j < raw.size(); ++j) {
    for (auto& [key, counts] : raw[j]) {
      NGramLM::Row row;
      row.counts.reserve(counts.size());
      for (auto [tok, c] : counts) {
        row.counts.emplace_back(tok, c);
        row.total += c;
      }
      lm.levels_[j].emplace(key, std::move(row));
    }
  }
  return lm;
}

void NGramLM::pseudo_counts(std::span<const TokenId> context, std::vector<double>& out,
                            double& mass) const {
  out.assign(vocab_size_, 0.0);
  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), context.size());
  std::vector<const Row*> seen;
  for (std::size_t j = top + 1; j-- > 0;) {
    auto it = levels_[j].find(context_key(context.subspan(context.size() - j, j)));
    if (it != levels_[j].end() && it->second.total > 0) seen.push_back(&it->second);
  }
  if (seen.empty()) {
    mass = 0.0;
    return;
  }
  mass = static_cast<double>(seen.front()->total);
  double weight = 1.0 - kBackoffWeight;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    const bool last = i + 1 == seen.size();
    const double w = last ? std::pow(kBackoffWeight, static_cast<double>(i)) : weight;
    const double scale = w * mass / static_cast<double>(seen[i]->total);
    for (auto [tok, c] : seen[i]->counts) out[static_cast<std::size_t>(tok)] += scale * c;
    weight *= kBackoffWeight;
  }
}

NextTokenDist NGramLM::next_dist(std::span<const TokenId> context) const {
  NextTokenDist d;
  double mass = 0.0;
  pseudo_counts(context, d.logits, mass);
  const double z = mass + k_ * static_cast<double>(vocab_size_);
  d.probs.resize(vocab_size_);
  for (std::size_t v = 0; v < vocab_size_; ++v) {
    const double c = d.logits[v] + k_;
    d.probs[v] = c / z;
    d.logits[v] = std::log(c);
  }
  d.entropy_nats = entropy_nats(d.probs);
  return d;
}

double NGramLM::log_prob(std::span<const TokenId> context, TokenId token) const {
  std::vector<double> counts;
  double mass = 0.0;
  pseudo_counts(context, counts, mass);
  const double z = mass + k_ * static_cast<double>(vocab_size_);
  return std::log((counts.at(static_cast<std::size_t>(token)) + k_) / z);
}

bool NGramLM::operator==(const NGramLM& other) const {
  if (order_ != other.order_ || k_ != other.k_ || vocab_size_ != other.vocab_size_ ||
      vocab_hash_ != other.vocab_hash_ || levels_.size() != other.levels_.size()) {
    return false;
  }
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    if (levels_[j].size() != other.levels_[j].size()) return false;
    for (const auto& [key, row] : levels_[j]) {
      auto it = other.levels_[j].find(key);
      if (it == other.levels_[j].end() || it->second.total != row.total || it->second.counts != row.counts) {
        return false;
      }
    }
  }
  return true;
}

void NGramLM::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write n-gram model: " + path.string());
  out.precision(17);
  out << "ngram v1\n";
  out << "order " << order_ << '\n';
  out << "k " << k_ << '\n';
  out << "vocab_size " << vocab_size_ << '\n';
  out << "vocab_hash " << to_hex(vocab_hash_) << '\n';
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    std::vector<std::uint64_t> keys;
    keys.reserve(levels_[j].size());
    for (const auto& kv : levels_[j]) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    out << "level " << j << ' ' << keys.size() << '\n';
    for (auto key : keys) {
      const Row& row = levels_[j].at(key);
      out << key << ' ' << row.counts.size();
      for (auto [tok, c] : row.counts) out << ' ' << tok << ':' << c;
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw DataError("failed writing n-gram model: " + path.string());
}

NGramLM NGramLM::load(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read n-gram model: " + path.string());
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw FormatError("corrupt n-gram model: expected '" + word + "'");
  };
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "ngram") throw FormatError("not an n-gram model file");
  if (version != "v1") throw FormatError("unsupported n-gram model version: " + version);

  NGramLM lm;
  std::string hash_hex;
  expect("order");
  in >> lm.order_;
  expect("k");
  in >> lm.k_;
  expect("vocab_size");
  in >> lm.vocab_size_;
  expect("vocab_hash");
  in >> hash_hex;
  if (!in || lm.order_ < 1 || lm.order_ > kMaxOrder) throw FormatError("corrupt n-gram model header");
  lm.vocab_hash_ = std::stoull(hash_hex, nullptr, 16);
  if (lm.vocab_hash_ != vocab.hash() || lm.vocab_size_ != vocab.size()) {
    throw FormatError("n-gram model was trained against a different vocabulary");
  }
  lm.levels_.resize(static_cast<std::size_t>(lm.order_));
  for (std::size_t j = 0; j < lm.levels_.size(); ++j) {
    std::size_t level = 0, rows = 0;
    expect("level");
    if (!(in >> level >> rows) || level != j) throw FormatError("corrupt n-gram level header");
    for (std::size_t r = 0; r < rows; ++r) {
      std::uint64_t key = 0;
      std::size_t n = 0;
      if (!(in >> key >> n)) throw FormatError("truncated n-gram model");
      Row row;
      row.counts.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::string item;
        if (!(in >> item)) throw FormatError("truncated n-gram model");
        auto colon = item.find(':');
        if (colon == std::string::npos) throw FormatError("corrupt n-gram count entry");
        auto tok = static_cast<TokenId>(std::stol(item.substr(0, colon)));
        auto c = static_cast<std::uint32_t>(std::stoul(item.substr(colon + 1)));
        if (tok < 0 || static_cast<std::size_t>(tok) >= lm.vocab_size_) throw FormatError("token out of range");
        row.counts.emplace_back(tok, c);
        row.total += c;
      }
      lm.levels_[j].emplace(key, std::move(row));
    }
  }
  expect("end");
  return lm;
}

double entropy_nats(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> nucleus_probs(std::span<const double> logits, const SamplingParams& params) {
  const std::size_t n = logits.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (!(params.temperature > 0.0)) {
    out[static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin())] = 1.0;
    return out;
  }
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = logits[i] / params.temperature;
  auto p = softmax(scaled);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return p[a] != p[b] ? p[a] > p[b] : a < b;
  });
  const double top_p = std::clamp(params.top_p, 0.0, 1.0);
  double cum = 0.0;
  std::size_t keep = 0;
  while (keep < n) {
    cum += p[idx[keep]];
    ++keep;
    // A small slack keeps top_p = 1 from dropping tokens to rounding.
    if (cum >= top_p - 1e-12) break;
  }
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < keep; ++i) kept_mass += p[idx[i]];
  for (std::size_t i = 0; i < keep; ++i) out[idx[i]] = p[idx[i]] / kept_mass;
  return out;
}

TokenId sample(std::span<const double> logits, const SamplingParams& params, Rng& rng) {
  auto probs = nucleus_probs(logits, params);
  const double u = uniform01(rng);
  double cum = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_nonzero = i;
    cum += probs[i];
    if (u < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_nonzero);
}

}  // namespace semwm
