#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmcf/autodiff.hpp"
#include "gmcf/core.hpp"
#include "gmcf/model.hpp"
#include "gmcf/variant_config.hpp"

namespace gmcf {

struct TrainConfig {
  std::size_t dim = 64;
  std::size_t mlp_depth = 1;
  double learning_rate = 1e-3;
  double lambda = 1e-5;
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  std::size_t patience = 5;  // epochs without validation-AUC improvement; 0 disables
  std::uint64_t seed = 0;
  VariantConfig variant;
};

struct SplitDataset {
  std::vector<DataSample> train;
  std::vector<DataSample> validation;
  std::vector<DataSample> test;
  // User key of every sample in the matching list.
  std::vector<AttributeId> train_users;
  std::vector<AttributeId> validation_users;
  std::vector<AttributeId> test_users;
  // Users with fewer than five samples; all of their samples went to train.
  std::vector<AttributeId> undersized_users;
};

inline constexpr double kProbabilityEpsilon = 1e-12;

// -(y ln p + (1 - y) ln(1 - p)) with p clamped to [eps, 1 - eps].
double bce_loss(double probability, double label);

// lambda * sum of squared entries over the given parameters.
Var l2_penalty(Tape& tape, std::span<const Parameter* const> params, double lambda);

// Parameters regularized for a batch: the network weights plus the
// embeddings of attributes that occur in the batch, in registry order.
std::vector<const Parameter*> batch_parameters(const ModelParams& params, std::span<const DataSample> batch);

struct RiskTerms {
  Var risk;        // mean BCE + lambda * ||theta||^2
  double data_loss = 0.0;  // mean BCE alone
};

// Mean binary cross-entropy of sigmoid(score) plus the L2 penalty over
// batch_parameters(), recorded on the tape.
RiskTerms regularized_risk(Tape& tape, std::span<const DataSample> batch, const ModelParams& params, double lambda);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;  // t of the last update
};

// One bias-corrected Adam update from each parameter's accumulated gradient.
// The state is sized on first use; shape changes afterwards are a ShapeError.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& options);

// Per user, shuffles that user's samples and cuts them 60/20/20, with
// floor(n/5) in validation and test each and the rest in train. Users with
// fewer than five samples go to train entirely.
SplitDataset split_per_user(std::span<const DataSample> samples, std::uint64_t seed);

// For every user, draws as many items as that user has positives, without
// replacement, from the pool items the user has not interacted with. The
// pool is keyed by item_key(); user characteristics come from the user's
// first positive.
std::vector<DataSample> negative_sample(std::span<const DataSample> positives, std::span<const DataSample> item_pool,
                                        std::uint64_t seed, const Vocabulary* vocab = nullptr);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double val_logloss = 0.0;

  // epoch=<n> train_loss=<f> val_auc=<f> val_logloss=<f>
  std::string line() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0: initial parameters
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Mini-batch Adam on the regularized risk. Returns the parameters of the
// epoch with the best validation AUC (the last epoch when validation AUC is
// undefined). Deterministic given the seed.
TrainResult train(std::span<const AttributeId> universe, const SplitDataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace gmcf
