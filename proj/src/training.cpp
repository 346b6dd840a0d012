#include "gmcf/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "gmcf/errors.hpp"
#include "gmcf/evaluation.hpp"
#include "gmcf/random.hpp"

namespace gmcf {

double bce_loss(double probability, double label) {
  const double p = std::clamp(probability, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

Var l2_penalty(Tape& tape, std::span<const Parameter* const> params, double lambda) {
  std::vector<Var> squares;
  squares.reserve(params.size());
  for (const Parameter* p : params) {
    Var v = tape.param(*p);
    squares.push_back(tape.dot(v, v));
  }
  if (squares.empty()) return tape.zeros(1);
  return tape.scale(tape.add_all(squares), lambda);
}

std::vector<const Parameter*> batch_parameters(const ModelParams& params, std::span<const DataSample> batch) {
  std::vector<bool> used(params.embeddings.slots(), false);
  for (const auto& s : batch) {
    for (const auto& p : s.user) used.at(p.att.id) = true;
    for (const auto& p : s.item) used.at(p.att.id) = true;
  }
  std::vector<const Parameter*> out;
  for (std::uint32_t id = 0; id < used.size(); ++id) {
    if (used[id]) out.push_back(&params.embeddings.at(AttributeId{id, Side::kUser}));
  }
  auto net = params.network_parameters();
  out.insert(out.end(), net.begin(), net.end());
  return out;
}

RiskTerms regularized_risk(Tape& tape, std::span<const DataSample> batch, const ModelParams& params, double lambda) {
  if (batch.empty()) throw ContractError("regularized_risk: empty batch");
  std::vector<Var> losses;
  losses.reserve(batch.size());
  for (const auto& s : batch) {
    losses.push_back(tape.bce_with_logit(forward(tape, params, s).score, s.label));
  }
  Var data = tape.scale(tape.add_all(losses), 1.0 / static_cast<double>(batch.size()));
  const auto regularized = batch_parameters(params, batch);
  RiskTerms terms;
  terms.data_loss = data.scalar();
  terms.risk = lambda == 0.0 ? data : tape.add(data, l2_penalty(tape, regularized, lambda));
  return terms;
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& o) {
  if (state.m.empty() && state.step == 0) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state holds " + std::to_string(state.m.size()) +
                                                        " parameters, got " + std::to_string(params.size()));
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->values();
    auto g = params[i]->grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != w.size()) throw ShapeError("adam: parameter " + std::to_string(i) + " changed shape");
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

SplitDataset split_per_user(std::span<const DataSample> samples, std::uint64_t seed) {
  std::vector<AttributeId> users;
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(samples[i].user_key().id);
    if (inserted) users.push_back(samples[i].user_key());
    it->second.push_back(i);
  }

  Rng rng(seed);
  SplitDataset out;
  for (const AttributeId& user : users) {
    auto& idx = groups[user.id];
    if (idx.size() < 5) {
      out.undersized_users.push_back(user);
      for (std::size_t i : idx) {
        out.train.push_back(samples[i]);
        out.train_users.push_back(user);
      }
      continue;
    }
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t held = idx.size() / 5;
    const std::size_t n_train = idx.size() - 2 * held;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const DataSample& s = samples[idx[k]];
      if (k < n_train) {
        out.train.push_back(s);
        out.train_users.push_back(user);
      } else if (k < n_train + held) {
        out.validation.push_back(s);
        out.validation_users.push_back(user);
      } else {
        out.test.push_back(s);
        out.test_users.push_back(user);
      }
    }
  }
  return out;
}

std::vector<DataSample> negative_sample(std::span<const DataSample> positives, std::span<const DataSample> item_pool,
                                        std::uint64_t seed, const Vocabulary* vocab) {
  // Distinct pool items in first-appearance order.
  std::vector<const DataSample*> pool;
  {
    std::unordered_set<std::uint32_t> seen;
    for (const auto& s : item_pool) {
      if (seen.insert(s.item_key().id).second) pool.push_back(&s);
    }
  }

  std::vector<AttributeId> users;
  std::unordered_map<std::uint32_t, std::vector<const DataSample*>> by_user;
  for (const auto& s : positives) {
    if (s.label != 1.0) continue;
    auto [it, inserted] = by_user.try_emplace(s.user_key().id);
    if (inserted) users.push_back(s.user_key());
    it->second.push_back(&s);
  }

  Rng rng(seed);
  std::vector<DataSample> out;
  for (const AttributeId& user : users) {
    const auto& mine = by_user[user.id];
    std::unordered_set<std::uint32_t> interacted;
    for (const DataSample* s : mine) interacted.insert(s->item_key().id);
    std::vector<const DataSample*> candidates;
    for (const DataSample* p : pool) {
      if (!interacted.contains(p->item_key().id)) candidates.push_back(p);
    }
    if (candidates.size() < mine.size()) {
      const std::string name = vocab ? vocab->name(user) : "#" + std::to_string(user.id);
      throw SamplingError("item pool exhausted for user " + name + ": needs " + std::to_string(mine.size()) +
                          " negatives, " + std::to_string(candidates.size()) + " available");
    }
    // Partial Fisher-Yates draw without replacement.
    for (std::size_t k = 0; k < mine.size(); ++k) {
      std::swap(candidates[k], candidates[k + rng.below(candidates.size() - k)]);
      DataSample neg;
      neg.user = mine.front()->user;
      neg.item = candidates[k]->item;
      neg.label = 0.0;
      out.push_back(std::move(neg));
    }
  }
  return out;
}

std::string EpochLog::line() const {
  return fmt::format("epoch={} train_loss={:.6f} val_auc={:.6f} val_logloss={:.6f}", epoch, train_loss, val_auc,
                     val_logloss);
}

namespace {

struct Validation {
  double auc = std::numeric_limits<double>::quiet_NaN();
  double logloss = std::numeric_limits<double>::quiet_NaN();
};

Validation validate(std::span<const DataSample> samples, const ModelParams& params) {
  Validation v;
  if (samples.empty()) return v;
  const auto scored = score_samples(samples, params);
  std::vector<double> probs, labels;
  for (const auto& s : scored) {
    probs.push_back(sigmoid(s.score));
    labels.push_back(s.label);
  }
  v.logloss = logloss(probs, labels);
  try {
    v.auc = auc(scored);
  } catch (const UndefinedMetricError&) {
  }
  return v;
}

}  // namespace

TrainResult train(std::span<const AttributeId> universe, const SplitDataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (config.batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (config.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (config.epochs > 0 && data.train.empty()) throw EmptyDatasetError("training split is empty");

  TrainResult result;
  result.params = ModelParams::create(universe, ModelShape{config.dim, config.mlp_depth}, config.variant, config.seed);
  if (config.epochs == 0) return result;

  ModelParams& params = result.params;
  ModelParams best = params;
  double best_auc = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  auto registry = params.registry();
  AdamState adam;
  const AdamOptions adam_options{config.learning_rate};
  Rng rng(config.seed + 1);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<DataSample> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(data.train[order[k]]);

      params.zero_grad();
      Tape tape;
      const RiskTerms terms = regularized_risk(tape, batch, params, config.lambda);
      if (!std::isfinite(terms.risk.scalar())) {
        throw NumericError(fmt::format("non-finite loss at epoch {} batch {}; try a smaller learning rate", epoch,
                                       begin / config.batch_size + 1));
      }
      tape.backward(terms.risk);
      adam_step(registry, adam, adam_options);
      loss_sum += terms.data_loss * static_cast<double>(batch.size());
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    const Validation v = validate(data.validation, params);
    entry.val_auc = v.auc;
    entry.val_logloss = v.logloss;
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (std::isnan(v.auc)) {
      best = params;
      result.best_epoch = epoch;
      continue;
    }
    if (v.auc > best_auc) {
      best_auc = v.auc;
      best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  params = std::move(best);
  return result;
}

}  // namespace gmcf
