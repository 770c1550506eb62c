#include "semwm/mapping_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace semwm {

namespace {

constexpr std::string_view kModelMagic = "semwm-mapper v1";

MappingModel::Offsets layout(const ModelDims& d) {
  MappingModel::Offsets o{};
  o.w_in = 0;
  o.b_in = o.w_in + d.feature_dim * d.hidden_dim;
  o.w_res = o.b_in + d.hidden_dim;
  o.b_res = o.w_res + d.hidden_dim * d.hidden_dim;
  o.w_out = o.b_res + d.hidden_dim;
  o.b_out = o.w_out + d.vocab_size * d.hidden_dim;
  o.total = o.b_out + d.vocab_size;
  return o;
}

double as_float(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

std::uint32_t unigram_bucket(TokenId id, std::size_t feature_dim) {
  return static_cast<std::uint32_t>(mix64(0x5157ULL ^ static_cast<std::uint64_t>(id)) % feature_dim);
}

std::uint32_t bigram_bucket(TokenId prev, TokenId id, std::size_t feature_dim) {
  const std::uint64_t h = mix64(mix64(0xb16aULL ^ static_cast<std::uint64_t>(prev)) + static_cast<std::uint64_t>(id));
  return static_cast<std::uint32_t>(h % feature_dim);
}

SparseVec featurize(std::span<const TokenId> ids, std::size_t feature_dim) {
  if (feature_dim == 0) throw UsageError("feature_dim must be positive");
  std::map<std::uint32_t, double> counts;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    counts[unigram_bucket(ids[i], feature_dim)] += 1.0;
    if (i > 0) counts[bigram_bucket(ids[i - 1], ids[i], feature_dim)] += 1.0;
  }
  SparseVec x;
  double norm_sq = 0.0;
  for (auto [k, c] : counts) norm_sq += c * c;
  if (norm_sq == 0.0) return x;
  const double inv = 1.0 / std::sqrt(norm_sq);
  x.index.reserve(counts.size());
  x.value.reserve(counts.size());
  for (auto [k, c] : counts) {
    x.index.push_back(k);
    x.value.push_back(c * inv);
  }
  return x;
}

MappingModel::MappingModel(ModelDims dims, std::uint64_t vocab_hash)
    : dims_(dims), vocab_hash_(vocab_hash), off_(layout(dims)), params_(off_.total, 0.0) {
  if (dims.feature_dim == 0 || dims.hidden_dim == 0 || dims.vocab_size == 0) {
    throw UsageError("mapping model dimensions must be positive");
  }
}

MappingModel MappingModel::random(ModelDims dims, std::uint64_t vocab_hash, std::uint64_t seed) {
  MappingModel m(dims, vocab_hash);
  Rng rng(stream_seed(seed, 0x6d6f64656cULL));
  // Small so hashed features never seen in training stay near zero.
  const double s_in = 0.01;
  const double s_hidden = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
  auto fill = [&](std::size_t a, std::size_t b, double scale) {
    for (std::size_t i = a; i < b; ++i) m.params_[i] = as_float(scale * standard_normal(rng));
  };
  fill(m.off_.w_in, m.off_.b_in, s_in);
  fill(m.off_.w_res, m.off_.b_res, s_hidden);
  fill(m.off_.w_out, m.off_.b_out, s_hidden);
  return m;
}

void MappingModel::round_to_float() {
  for (double& p : params_) p = as_float(p);
}

void MappingModel::check_vocab(const Vocabulary& vocab) const {
  if (vocab.hash() != vocab_hash_ || vocab.size() != dims_.vocab_size) {
    throw FormatError("mapping model was built for a different vocabulary (model " + to_hex(vocab_hash_) +
                      ", vocabulary " + to_hex(vocab.hash()) + ")");
  }
}

std::vector<double> MappingModel::embed_from_pre_activation(std::span<const double> a1) const {
  const std::size_t H = dims_.hidden_dim;
  const std::size_t V = dims_.vocab_size;
  std::vector<double> h1(H), h2(H), out(V);
  for (std::size_t j = 0; j < H; ++j) h1[j] = std::tanh(a1[j]);
  const auto wr = w_res();
  const auto br = b_res();
  for (std::size_t j = 0; j < H; ++j) {
    const double* row = wr.data() + j * H;
    double a = br[j];
    for (std::size_t i = 0; i < H; ++i) a += row[i] * h1[i];
    h2[j] = h1[j] + std::tanh(a);
  }
  const auto wo = w_out();
  const auto bo = b_out();
  for (std::size_t v = 0; v < V; ++v) {
    const double* row = wo.data() + v * H;
    double a = bo[v];
    for (std::size_t i = 0; i < H; ++i) a += row[i] * h2[i];
    out[v] = std::tanh(a);
  }
  return out;
}

std::vector<double> MappingModel::embed_features(const SparseVec& x) const {
  const std::size_t H = dims_.hidden_dim;
  std::vector<double> a1(b_in().begin(), b_in().end());
  const auto wi = w_in();
  for (std::size_t n = 0; n < x.nnz(); ++n) {
    const double* row = wi.data() + static_cast<std::size_t>(x.index[n]) * H;
    const double xv = x.value[n];
    for (std::size_t j = 0; j < H; ++j) a1[j] += xv * row[j];
  }
  return embed_from_pre_activation(a1);
}

std::vector<double> MappingModel::embed(const TokenSeq& text) const {
  for (TokenId id : text.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= dims_.vocab_size) {
      throw FormatError("token id outside the mapping model's vocabulary");
    }
  }
  return embed_features(featurize(text.ids, dims_.feature_dim));
}

std::vector<double> MappingModel::embed(const Vocabulary& vocab, const TokenSeq& text) const {
  check_vocab(vocab);
  return embed(text);
}

std::size_t GreenRedSplit::green_count() const {
  return static_cast<std::size_t>(std::count(green_mask.begin(), green_mask.end(), std::uint8_t{1}));
}

double GreenRedSplit::green_fraction() const {
  return green_mask.empty() ? 0.0 : static_cast<double>(green_count()) / static_cast<double>(green_mask.size());
}

std::vector<TokenId> GreenRedSplit::green_ids() const {
  std::vector<TokenId> out;
  for (std::size_t v = 0; v < green_mask.size(); ++v) {
    if (green_mask[v]) out.push_back(static_cast<TokenId>(v));
  }
  return out;
}

std::vector<TokenId> GreenRedSplit::red_ids() const {
  std::vector<TokenId> out;
  for (std::size_t v = 0; v < green_mask.size(); ++v) {
    if (!green_mask[v]) out.push_back(static_cast<TokenId>(v));
  }
  return out;
}

GreenRedSplit split_from_scores(std::span<const double> scores) {
  GreenRedSplit s;
  s.green_mask.resize(scores.size());
  for (std::size_t v = 0; v < scores.size(); ++v) s.green_mask[v] = scores[v] > 0.0 ? 1 : 0;
  return s;
}

GreenRedSplit green_list(const MappingModel& model, const TokenSeq& text) {
  return split_from_scores(model.embed(text));
}

PrefixEmbedder::PrefixEmbedder(const MappingModel& model)
    : model_(&model), acc_(model.dims().hidden_dim, 0.0) {}

void PrefixEmbedder::bump(std::uint32_t bucket) {
  double& c = counts_[bucket];
  norm_sq_ += 2.0 * c + 1.0;
  c += 1.0;
  const std::size_t H = model_->dims().hidden_dim;
  const double* row = model_->w_in().data() + static_cast<std::size_t>(bucket) * H;
  for (std::size_t j = 0; j < H; ++j) acc_[j] += row[j];
}

void PrefixEmbedder::push(TokenId id) {
  const std::size_t F = model_->dims().feature_dim;
  bump(unigram_bucket(id, F));
  if (prev_ >= 0) bump(bigram_bucket(prev_, id, F));
  prev_ = id;
  ++length_;
}

std::vector<double> PrefixEmbedder::embed() const {
  const auto b = model_->b_in();
  std::vector<double> a1(b.begin(), b.end());
  if (norm_sq_ > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq_);
    for (std::size_t j = 0; j < a1.size(); ++j) a1[j] += acc_[j] * inv;
  }
  return model_->embed_from_pre_activation(a1);
}

void save_model(const MappingModel& model, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["feature_dim"] = model.dims().feature_dim;
  meta["hidden_dim"] = model.dims().hidden_dim;
  meta["vocab_size"] = model.dims().vocab_size;
  meta["vocab_hash"] = to_hex(model.vocab_hash());
  meta["param_count"] = model.param_count();
  meta["param_order"] = "w_in,b_in,w_res,b_res,w_out,b_out";
  meta["config"] = model.metadata;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write mapping model: " + path.string());
  out << kModelMagic << '\n' << meta.dump() << '\n';
  std::vector<unsigned char> buf(model.param_count() * 4);
  const auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(params[i]));
    buf[4 * i + 0] = static_cast<unsigned char>(bits & 0xff);
    buf[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    buf[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    buf[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing mapping model: " + path.string());
}

MappingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read mapping model: " + path.string());
  std::string magic, meta_line;
  if (!std::getline(in, magic) || magic.rfind("semwm-mapper", 0) != 0) {
    throw FormatError("not a mapping model file: " + path.string());
  }
  if (magic != kModelMagic) throw FormatError("unsupported mapping model version: " + magic);
  if (!std::getline(in, meta_line)) throw FormatError("truncated mapping model header");

  nlohmann::json meta;
  ModelDims dims;
  std::uint64_t hash = 0;
  std::size_t count = 0;
  std::map<std::string, std::string> config;
  try {
    meta = nlohmann::json::parse(meta_line);
    dims.feature_dim = meta.at("feature_dim").get<std::size_t>();
    dims.hidden_dim = meta.at("hidden_dim").get<std::size_t>();
    dims.vocab_size = meta.at("vocab_size").get<std::size_t>();
    hash = std::stoull(meta.at("vocab_hash").get<std::string>(), nullptr, 16);
    count = meta.at("param_count").get<std::size_t>();
    if (meta.contains("config")) config = meta["config"].get<std::map<std::string, std::string>>();
  } catch (const std::exception& e) {
    throw FormatError(std::string("corrupt mapping model metadata: ") + e.what());
  }
  MappingModel model(dims, hash);
  if (count != model.param_count()) throw FormatError("mapping model parameter count does not match its dims");

  std::vector<unsigned char> buf(count * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw FormatError("truncated mapping model: " + path.string());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in mapping model");
  auto params = model.params();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) | (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) throw FormatError("non-finite parameter in mapping model");
    params[i] = static_cast<double>(f);
  }
  model.metadata = std::move(config);
  return model;
}

MappingModel load_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto m = load_model(path);
  m.check_vocab(vocab);
  return m;
}

// ---------------------------------------------------------------------------

void forward(const MappingModel& model, const SparseVec& x, ForwardCache& cache) {
  const std::size_t H = model.dims().hidden_dim;
  const std::size_t V = model.dims().vocab_size;
  cache.h1.assign(model.b_in().begin(), model.b_in().end());
  const auto wi = model.w_in();
  for (std::size_t n = 0; n < x.nnz(); ++n) {
    const double* row = wi.data() + static_cast<std::size_t>(x.index[n]) * H;
    for (std::size_t j = 0; j < H; ++j) cache.h1[j] += x.value[n] * row[j];
  }
  for (double& h : cache.h1) h = std::tanh(h);
  cache.r.resize(H);
  cache.h2.resize(H);
  const auto wr = model.w_res();
  const auto br = model.b_res();
  for (std::size_t j = 0; j < H; ++j) {
    const double* row = wr.data() + j * H;
    double a = br[j];
    for (std::size_t i = 0; i < H; ++i) a += row[i] * cache.h1[i];
    cache.r[j] = std::tanh(a);
    cache.h2[j] = cache.h1[j] + cache.r[j];
  }
  cache.out.resize(V);
  const auto wo = model.w_out();
  const auto bo = model.b_out();
  for (std::size_t v = 0; v < V; ++v) {
    const double* row = wo.data() + v * H;
    double a = bo[v];
    for (std::size_t i = 0; i < H; ++i) a += row[i] * cache.h2[i];
    cache.out[v] = std::tanh(a);
  }
}

void forward_batch(const MappingModel& model, std::span<const SparseVec> xs, std::vector<ForwardCache>& caches,
                   Exec exec) {
  caches.resize(xs.size());
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) forward(model, xs[static_cast<std::size_t>(i)], caches[static_cast<std::size_t>(i)]);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) forward(model, xs[static_cast<std::size_t>(i)], caches[static_cast<std::size_t>(i)]);
  }
}

namespace {

struct Deltas {
  std::vector<double> g_out;  // d loss / d pre-activation of the output layer
  std::vector<double> g_res;  // ... of the residual branch
  std::vector<double> g_in;   // ... of the first layer
  bool active = false;
};

void example_deltas(const MappingModel& model, const ForwardCache& c, const std::vector<double>& d_out, Deltas& d) {
  const std::size_t H = model.dims().hidden_dim;
  const std::size_t V = model.dims().vocab_size;
  d.active = false;
  for (double g : d_out) {
    if (g != 0.0) {
      d.active = true;
      break;
    }
  }
  if (!d.active) return;
  d.g_out.resize(V);
  for (std::size_t v = 0; v < V; ++v) d.g_out[v] = d_out[v] * (1.0 - c.out[v] * c.out[v]);

  std::vector<double> gh2(H, 0.0);
  const auto wo = model.w_out();
  for (std::size_t v = 0; v < V; ++v) {
    const double g = d.g_out[v];
    if (g == 0.0) continue;
    const double* row = wo.data() + v * H;
    for (std::size_t i = 0; i < H; ++i) gh2[i] += g * row[i];
  }
  d.g_res.resize(H);
  for (std::size_t j = 0; j < H; ++j) d.g_res[j] = gh2[j] * (1.0 - c.r[j] * c.r[j]);

  std::vector<double> gh1 = gh2;
  const auto wr = model.w_res();
  for (std::size_t j = 0; j < H; ++j) {
    const double g = d.g_res[j];
    const double* row = wr.data() + j * H;
    for (std::size_t i = 0; i < H; ++i) gh1[i] += g * row[i];
  }
  d.g_in.resize(H);
  for (std::size_t j = 0; j < H; ++j) d.g_in[j] = gh1[j] * (1.0 - c.h1[j] * c.h1[j]);
}

}  // namespace

void backward_batch(const MappingModel& model, std::span<const SparseVec> xs, std::span<const ForwardCache> caches,
                    std::span<const std::vector<double>> d_out, std::span<double> grad, Exec exec) {
  const std::size_t H = model.dims().hidden_dim;
  const std::size_t V = model.dims().vocab_size;
  const auto& off = model.offsets();
  const std::size_t B = xs.size();
  std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<Deltas> deltas(B);
  const auto nb = static_cast<std::ptrdiff_t>(B);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < nb; ++i) {
      const auto u = static_cast<std::size_t>(i);
      example_deltas(model, caches[u], d_out[u], deltas[u]);
    }
  } else {
    for (std::size_t i = 0; i < B; ++i) example_deltas(model, caches[i], d_out[i], deltas[i]);
  }

  // Parameter gradients: each output row sums over examples in index order,
  // so the result does not depend on how rows are distributed over threads.
  auto out_row = [&](std::size_t v) {
    double* g = grad.data() + off.w_out + v * H;
    double gb = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      if (!deltas[i].active) continue;
      const double d = deltas[i].g_out[v];
      if (d == 0.0) continue;
      const double* h2 = caches[i].h2.data();
      for (std::size_t k = 0; k < H; ++k) g[k] += d * h2[k];
      gb += d;
    }
    grad[off.b_out + v] = gb;
  };
  auto res_row = [&](std::size_t j) {
    double* g = grad.data() + off.w_res + j * H;
    double gb = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      if (!deltas[i].active) continue;
      const double d = deltas[i].g_res[j];
      const double* h1 = caches[i].h1.data();
      for (std::size_t k = 0; k < H; ++k) g[k] += d * h1[k];
      gb += d;
    }
    grad[off.b_res + j] = gb;
  };
  for (std::size_t j = 0; j < H; ++j) {
    double gb = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      if (deltas[i].active) gb += deltas[i].g_in[j];
    }
    grad[off.b_in + j] = gb;
  }

  // First layer: group (example, value) pairs by feature bucket.
  std::map<std::uint32_t, std::vector<std::pair<std::size_t, double>>> by_feature;
  for (std::size_t i = 0; i < B; ++i) {
    if (!deltas[i].active) continue;
    for (std::size_t n = 0; n < xs[i].nnz(); ++n) by_feature[xs[i].index[n]].emplace_back(i, xs[i].value[n]);
  }
  std::vector<const std::pair<const std::uint32_t, std::vector<std::pair<std::size_t, double>>>*> features;
  features.reserve(by_feature.size());
  for (const auto& kv : by_feature) features.push_back(&kv);
  auto in_row = [&](std::size_t f) {
    const auto& [bucket, entries] = *features[f];
    double* g = grad.data() + off.w_in + static_cast<std::size_t>(bucket) * H;
    for (const auto& [i, xv] : entries) {
      const double* d = deltas[i].g_in.data();
      for (std::size_t k = 0; k < H; ++k) g[k] += xv * d[k];
    }
  };

  const auto nv = static_cast<std::ptrdiff_t>(V);
  const auto nh = static_cast<std::ptrdiff_t>(H);
  const auto nf = static_cast<std::ptrdiff_t>(features.size());
  if (exec == Exec::parallel) {
#pragma omp parallel
    {
#pragma omp for schedule(static) nowait
      for (std::ptrdiff_t v = 0; v < nv; ++v) out_row(static_cast<std::size_t>(v));
#pragma omp for schedule(static) nowait
      for (std::ptrdiff_t j = 0; j < nh; ++j) res_row(static_cast<std::size_t>(j));
#pragma omp for schedule(dynamic, 16)
      for (std::ptrdiff_t f = 0; f < nf; ++f) in_row(static_cast<std::size_t>(f));
    }
  } else {
    for (std::size_t v = 0; v < V; ++v) out_row(v);
    for (std::size_t j = 0; j < H; ++j) res_row(j);
    for (std::size_t f = 0; f < features.size(); ++f) in_row(f);
  }
}

}  // namespace semwm
