#include "semwm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace semwm {

CosineResult cosine_sim(std::span<const double> u, std::span<const double> v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return {0.0, true};
  return {dot / (std::sqrt(nu) * std::sqrt(nv)), false};
}

double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double margin) {
  return std::max(0.0, cosine_sim(a, n).value - cosine_sim(a, p).value + margin);
}

BalanceLosses balance_losses(std::span<const std::vector<double>> outputs) {
  BalanceLosses b;
  if (outputs.empty()) return b;
  const std::size_t V = outputs.front().size();
  std::vector<double> col(V, 0.0);
  for (const auto& f : outputs) {
    double s = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      s += f[v];
      col[v] += f[v];
    }
    b.text += s * s / static_cast<double>(V);
  }
  b.text /= static_cast<double>(outputs.size());
  for (double c : col) b.token += c * c / static_cast<double>(outputs.size());
  b.token /= static_cast<double>(V);
  return b;
}

std::vector<EncodedTriplet> encode_triplets(std::span<const Triplet> triplets, std::size_t feature_dim) {
  std::vector<EncodedTriplet> out(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    out[i].anchor = featurize(triplets[i].anchor.ids, feature_dim);
    out[i].positive = featurize(triplets[i].positive.ids, feature_dim);
    out[i].negative = featurize(triplets[i].negative.ids, feature_dim);
  }
  return out;
}

namespace {

// d cos(u, v) / du, accumulated into g with the given sign.
void add_cos_grad(std::span<const double> u, std::span<const double> v, double sign, std::vector<double>& g) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return;
  const double inv = 1.0 / (std::sqrt(nu) * std::sqrt(nv));
  const double c = dot * inv;
  for (std::size_t i = 0; i < u.size(); ++i) g[i] += sign * (v[i] * inv - c * u[i] / nu);
}

}  // namespace

LossBreakdown loss_and_grad(const MappingModel& model, std::span<const EncodedTriplet> batch,
                            const TrainConfig& config, std::span<double> grad, Exec exec) {
  LossBreakdown loss;
  const std::size_t B = batch.size();
  if (B == 0) return loss;
  const std::size_t V = model.dims().vocab_size;
  const std::size_t M = 3 * B;

  std::vector<SparseVec> xs;
  xs.reserve(M);
  for (const auto& t : batch) {
    xs.push_back(t.anchor);
    xs.push_back(t.positive);
    xs.push_back(t.negative);
  }
  std::vector<ForwardCache> caches;
  forward_batch(model, xs, caches, exec);

  std::vector<std::vector<double>> outputs(M);
  for (std::size_t m = 0; m < M; ++m) outputs[m] = caches[m].out;

  const bool want_grad = !grad.empty();
  std::vector<std::vector<double>> d_out;
  if (want_grad) d_out.assign(M, std::vector<double>(V, 0.0));

  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t i = 0; i < B; ++i) {
    const auto& a = outputs[3 * i];
    const auto& p = outputs[3 * i + 1];
    const auto& n = outputs[3 * i + 2];
    const double hinge = cosine_sim(a, n).value - cosine_sim(a, p).value + config.margin;
    if (hinge > 0.0) {
      loss.triplet += hinge * inv_b;
      if (want_grad) {
        std::vector<double> ga(V, 0.0), gp(V, 0.0), gn(V, 0.0);
        add_cos_grad(a, n, 1.0, ga);
        add_cos_grad(a, p, -1.0, ga);
        add_cos_grad(n, a, 1.0, gn);
        add_cos_grad(p, a, -1.0, gp);
        for (std::size_t v = 0; v < V; ++v) {
          d_out[3 * i][v] += ga[v] * inv_b;
          d_out[3 * i + 1][v] += gp[v] * inv_b;
          d_out[3 * i + 2][v] += gn[v] * inv_b;
        }
      }
    }
  }

  const auto bal = balance_losses(outputs);
  loss.text = bal.text;
  loss.token = bal.token;
  loss.total = loss.triplet + config.lambda_text * loss.text + config.lambda_token * loss.token;

  if (want_grad) {
    const double md = static_cast<double>(M);
    const double vd = static_cast<double>(V);
    std::vector<double> col(V, 0.0);
    for (const auto& f : outputs) {
      for (std::size_t v = 0; v < V; ++v) col[v] += f[v];
    }
    for (std::size_t m = 0; m < M; ++m) {
      const double row = std::accumulate(outputs[m].begin(), outputs[m].end(), 0.0);
      const double g_text = config.lambda_text * 2.0 * row / (md * vd);
      for (std::size_t v = 0; v < V; ++v) {
        d_out[m][v] += g_text + config.lambda_token * 2.0 * col[v] / (vd * md);
      }
    }
    backward_batch(model, xs, caches, d_out, grad, exec);
  }
  return loss;
}

double finite_diff_check(const MappingModel& model, std::span<const EncodedTriplet> batch, const TrainConfig& config,
                         double h, double floor) {
  std::vector<double> analytic(model.param_count());
  loss_and_grad(model, batch, config, analytic, Exec::serial);
  MappingModel probe = model;
  auto params = probe.params();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss_and_grad(probe, batch, config, {}, Exec::serial).total;
    params[i] = saved - h;
    const double down = loss_and_grad(probe, batch, config, {}, Exec::serial).total;
    params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

double dataset_loss(const MappingModel& model, std::span<const EncodedTriplet> data, const TrainConfig& config) {
  if (data.empty()) return 0.0;
  const std::size_t bs = std::max<std::size_t>(1, config.batch_size);
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += bs) {
    const std::size_t len = std::min(bs, data.size() - start);
    const auto l = loss_and_grad(model, data.subspan(start, len), config, {}, config.exec);
    total += l.total * static_cast<double>(len);
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(std::span<const Triplet> train_set, std::span<const Triplet> val_set, const TrainConfig& config,
                  MappingModel init) {
  if (train_set.empty()) throw DataError("empty triplet dataset");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0) || !(config.margin > 0.0)) {
    throw UsageError("invalid training configuration");
  }
  const std::size_t F = init.dims().feature_dim;
  const auto train_enc = encode_triplets(train_set, F);
  const auto val_enc = encode_triplets(val_set, F);

  MappingModel model = std::move(init);
  model.round_to_float();
  const std::size_t P = model.param_count();
  std::vector<double> grad(P), m1(P, 0.0), m2(P, 0.0);
  std::vector<std::size_t> order(train_enc.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(config.seed, 0x747261696eULL));

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  long step = 0;
  std::vector<EncodedTriplet> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    EpochLog row;
    row.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      batch.clear();
      for (std::size_t i = 0; i < len; ++i) batch.push_back(train_enc[order[start + i]]);
      const auto l = loss_and_grad(model, batch, config, grad, config.exec);
      if (!std::isfinite(l.total)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                               std::to_string(start) + " (loss " + std::to_string(l.total) + ")");
      }
      row.triplet_loss += l.triplet * static_cast<double>(len);
      row.text_loss += l.text * static_cast<double>(len);
      row.token_loss += l.token * static_cast<double>(len);

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto params = model.params();
      for (std::size_t i = 0; i < P; ++i) {
        const double g = grad[i];
        m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * g;
        m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * g * g;
        params[i] -= config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + config.epsilon);
      }
      model.round_to_float();
    }
    const double n = static_cast<double>(order.size());
    row.triplet_loss /= n;
    row.text_loss /= n;
    row.token_loss /= n;
    row.val_loss = val_enc.empty() ? row.triplet_loss + config.lambda_text * row.text_loss +
                                         config.lambda_token * row.token_loss
                                   : dataset_loss(model, val_enc, config);
    if (!std::isfinite(row.val_loss)) {
      throw TrainingDiverged("validation loss is not finite at epoch " + std::to_string(epoch));
    }
    result.log.push_back(row);
    if (row.val_loss < best) {
      best = row.val_loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  result.model.metadata = model.metadata;
  return result;
}

void write_train_log(const std::filesystem::path& path, std::span<const EpochLog> log, std::string_view header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write training log: " + path.string());
  if (!header.empty()) out << header << '\n';
  out << "epoch,triplet_loss,L_text,L_token,val_loss\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.triplet_loss, r.text_loss, r.token_loss,
                  r.val_loss);
    out << buf;
  }
}

}  // namespace semwm
