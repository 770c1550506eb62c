#include "semwm/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "semwm/common.hpp"

namespace semwm {

const std::vector<std::pair<std::string, std::string>>& config_defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      // inputs
      {"corpus", "data/corpus/mini_corpus.txt"},
      {"lexicons", "data/lexicons"},
      {"prompts", "data/prompts"},
      {"seed", "42"},
      {"jobs", "0"},
      // ingest
      {"min_words", "60"},
      {"max_words", "150"},
      {"heldout_fraction", "0.2"},
      {"vocab_max", "2000"},
      // toy LM
      {"lm_order", "3"},
      {"lm_smoothing", "1"},
      // dataset
      {"n_positives", "4"},
      {"pos_rate_min", "0.1"},
      {"pos_rate_max", "0.5"},
      {"max_edits", "10"},
      {"n_phrases", "1"},
      {"val_anchors", "50"},
      {"llm_transforms", "false"},
      {"llm_fixture", ""},
      // mapper
      {"feature_dim", "4096"},
      {"hidden_dim", "256"},
      {"margin", "0.3"},
      {"lambda_text", "1"},
      {"lambda_token", "1"},
      {"epochs", "15"},
      {"lr", "0.003"},
      {"batch_size", "64"},
      // watermark
      {"scheme", "semantic"},
      {"conditioning", "global"},
      {"delta", "0.13"},
      {"entropy_threshold", "2"},
      {"temperature", "0.7"},
      {"top_p", "0.9"},
      {"fidelity_weight", "4"},
      {"perturb", "multiplicative"},
      {"gamma", "0.5"},
      {"key", "15485863"},
      {"detect_threshold", "0.5"},
      // evaluation
      {"eval_texts", "100"},
      {"paraphrase_rate", "0.15"},
      {"attack_kind", "paraphrase"},
      {"steal_targets", "10"},
      {"steal_samples", "500"},
      {"steal_ks", "50,100,200"},
      {"steal_schemes", "semantic,unigram"},
      {"baseline_entropy_threshold", "0"},
      {"sweep_deltas", "0,0.5,1,2,4"},
  };
  return d;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : config_defaults()) values_[k] = v;
}

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

}  // namespace

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(std::string_view key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: " + std::string(key));
  it->second = std::move(value);
}

bool RunConfig::has(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& RunConfig::str(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: " + std::string(key));
  return it->second;
}

double RunConfig::num(std::string_view key) const {
  const auto& s = str(key);
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError("config key " + std::string(key) + " expects a number, got '" + s + "'");
  }
  return v;
}

long RunConfig::integer(std::string_view key) const {
  const auto& s = str(key);
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError("config key " + std::string(key) + " expects an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t RunConfig::u64(std::string_view key) const {
  const auto& s = str(key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError("config key " + std::string(key) + " expects a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool RunConfig::flag(std::string_view key) const {
  const auto& s = str(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no" || s.empty()) return false;
  throw UsageError("config key " + std::string(key) + " expects true/false, got '" + s + "'");
}

std::vector<double> RunConfig::num_list(std::string_view key) const {
  std::vector<double> out;
  std::istringstream is(str(key));
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) {
      throw UsageError("config key " + std::string(key) + " expects a comma-separated number list");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> RunConfig::size_list(std::string_view key) const {
  std::vector<std::size_t> out;
  for (double v : num_list(key)) {
    if (v < 0 || v != std::floor(v)) {
      throw UsageError("config key " + std::string(key) + " expects non-negative integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const { return to_hex(fnv1a64(serialize())); }

std::string RunConfig::provenance_header() const {
  std::string out = "# config_hash=" + hash();
  for (const auto& [k, v] : values_) out += "\n# " + k + "=" + v;
  return out;
}

}  // namespace semwm
