#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semwm/mapping_model.hpp"
#include "semwm/parallel.hpp"
#include "semwm/text_core.hpp"

namespace semwm {

struct TrainConfig {
  double margin = 0.3;
  double lambda_text = 1.0;
  double lambda_token = 1.0;
  int epochs = 15;
  // 3e-5 suits fine-tuning a pretrained encoder; the small randomly
  // initialized encoder here needs a larger step.
  double learning_rate = 3e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Exec exec = Exec::parallel;
};

struct Triplet {
  TokenSeq anchor;
  TokenSeq positive;
  TokenSeq negative;
  std::string pos_kind = "paraphrase";
  std::string neg_kind;
};

struct CosineResult {
  double value = 0.0;
  bool degenerate = false;  // a zero-norm input; value is 0
};

CosineResult cosine_sim(std::span<const double> u, std::span<const double> v);

/// max(0, sim(a, n) - sim(a, p) + margin)
double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                    double margin);

struct BalanceLosses {
  double text = 0.0;   // mean_x (sum_v f_v(x))^2 / |V|
  double token = 0.0;  // mean_v (sum_x f_v(x))^2 / batch
};

BalanceLosses balance_losses(std::span<const std::vector<double>> outputs);

struct EncodedTriplet {
  SparseVec anchor, positive, negative;
};

std::vector<EncodedTriplet> encode_triplets(std::span<const Triplet> triplets, std::size_t feature_dim);

struct LossBreakdown {
  double triplet = 0.0;
  double text = 0.0;
  double token = 0.0;
  double total = 0.0;
};

/// Loss of one batch: mean triplet hinge plus weighted balance penalties over
/// all 3B outputs. When `grad` is non-empty it receives d(total)/d(theta).
LossBreakdown loss_and_grad(const MappingModel& model, std::span<const EncodedTriplet> batch,
                            const TrainConfig& config, std::span<double> grad, Exec exec);

/// Max over parameters of |analytic - central difference| / max(|analytic|,
/// |central difference|, floor). Gradients below `floor` are compared
/// absolutely. Intended for models with at most ~1e4 parameters.
double finite_diff_check(const MappingModel& model, std::span<const EncodedTriplet> batch,
                         const TrainConfig& config, double h = 1e-4, double floor = 1e-7);

struct EpochLog {
  int epoch = 0;
  double triplet_loss = 0.0;
  double text_loss = 0.0;
  double token_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  MappingModel model;  // best checkpoint by validation loss
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

/// Mean total loss over `data` evaluated in consecutive batches.
double dataset_loss(const MappingModel& model, std::span<const EncodedTriplet> data, const TrainConfig& config);

/// Mini-batch Adam with bias correction. Throws TrainingDiverged if a loss
/// becomes non-finite.
TrainResult train(std::span<const Triplet> train_set, std::span<const Triplet> val_set, const TrainConfig& config,
                  MappingModel init);

void write_train_log(const std::filesystem::path& path, std::span<const EpochLog> log, std::string_view header = {});

}  // namespace semwm
