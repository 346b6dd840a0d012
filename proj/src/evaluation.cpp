#include "gmcf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "gmcf/errors.hpp"
#include "gmcf/training.hpp"

namespace gmcf {

double auc(std::span<const ScoredSample> scored) {
  std::size_t positives = 0;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw NumericError("auc: non-finite score");
    if (s.label == 1.0) ++positives;
  }
  const std::size_t negatives = scored.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc is undefined without both positive and negative samples");
  }

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });

  // Mann-Whitney: tied scores share their average rank (1-based). Ranks are
  // kept doubled so the sums stay integral.
  double doubled_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
    const double doubled_avg = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j) / 2
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].label == 1.0) doubled_rank_sum += doubled_avg;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  const double doubled_u = doubled_rank_sum - p * (p + 1.0);
  return (doubled_u / 2.0) / (p * n);
}

double logloss(std::span<const double> probabilities, std::span<const double> labels) {
  if (probabilities.size() != labels.size()) throw ShapeError("logloss: probabilities and labels differ in length");
  if (probabilities.empty()) throw UndefinedMetricError("logloss of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) total += bce_loss(probabilities[i], labels[i]);
  return total / static_cast<double>(probabilities.size());
}

std::vector<UserNdcg> ndcg_per_user(std::span<const ScoredSample> scored, std::size_t k) {
  if (k == 0) throw ConfigError("ndcg: k must be at least 1");
  std::vector<std::uint32_t> users;
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(scored[i].user);
    if (inserted) users.push_back(scored[i].user);
    it->second.push_back(i);
  }

  std::vector<UserNdcg> out;
  for (std::uint32_t user : users) {
    auto& idx = groups[user];
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
    std::size_t relevant = 0;
    for (std::size_t i : idx) relevant += scored[i].label == 1.0 ? 1 : 0;
    if (relevant == 0) continue;

    const std::size_t cutoff = std::min(k, idx.size());
    double dcg = 0.0;
    for (std::size_t r = 0; r < cutoff; ++r) {
      if (scored[idx[r]].label == 1.0) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    double ideal = 0.0;
    for (std::size_t r = 0; r < std::min(cutoff, relevant); ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    out.push_back({user, idx.size(), relevant, dcg / ideal});
  }
  return out;
}

double ndcg_at_k(std::span<const ScoredSample> scored, std::size_t k) {
  const auto per_user = ndcg_per_user(scored, k);
  if (per_user.empty()) throw UndefinedMetricError("ndcg is undefined: no user has a relevant sample");
  double total = 0.0;
  for (const auto& u : per_user) total += u.ndcg;
  return total / static_cast<double>(per_user.size());
}

std::string MetricReport::line() const {
  return fmt::format("auc={:.6f} logloss={:.6f} ndcg@5={:.6f} ndcg@10={:.6f}", auc, logloss, ndcg5, ndcg10);
}

std::vector<ScoredSample> score_samples(std::span<const DataSample> samples, const ModelParams& params) {
  std::vector<ScoredSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Tape tape;
    const double score = forward(tape, params, s).score.scalar();
    if (!std::isfinite(score)) throw NumericError("non-finite prediction score");
    out.push_back({s.user_key().id, score, s.label});
  }
  return out;
}

MetricReport evaluate(std::span<const ScoredSample> scored) {
  MetricReport r;
  r.auc = auc(scored);
  std::vector<double> probs, labels;
  probs.reserve(scored.size());
  labels.reserve(scored.size());
  for (const auto& s : scored) {
    probs.push_back(sigmoid(s.score));
    labels.push_back(s.label);
  }
  r.logloss = logloss(probs, labels);
  r.ndcg5 = ndcg_at_k(scored, 5);
  r.ndcg10 = ndcg_at_k(scored, 10);
  return r;
}

MetricReport evaluate(std::span<const DataSample> samples, const ModelParams& params) {
  if (samples.empty()) throw UndefinedMetricError("cannot evaluate an empty sample set");
  const auto scored = score_samples(samples, params);
  return evaluate(scored);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

MatchingMatrices export_matrices(const EmbeddingTable& table, const Vocabulary& vocab,
                                 std::span<const AttributeId> group_a, std::span<const AttributeId> group_b) {
  if (group_a.empty() || group_b.empty()) throw ConfigError("export_matrices: attribute groups must be nonempty");
  MatchingMatrices m;
  for (const auto& a : group_a) m.a_labels.push_back(vocab.name(a));
  for (const auto& b : group_b) m.b_labels.push_back(vocab.name(b));
  for (const auto& a : group_a) {
    auto va = table.at(a).values();
    std::vector<double> sim_row, match_row;
    for (const auto& a2 : group_a) sim_row.push_back(cosine(va, table.at(a2).values()));
    for (const auto& b : group_b) {
      auto vb = table.at(b).values();
      double s = 0.0;
      for (std::size_t k = 0; k < va.size(); ++k) s += va[k] * vb[k];
      match_row.push_back(s);
    }
    m.similarity.push_back(std::move(sim_row));
    m.matching.push_back(std::move(match_row));
  }
  return m;
}

std::string format_grid(std::span<const std::string> row_labels, std::span<const std::string> col_labels,
                        const std::vector<std::vector<double>>& values) {
  std::string out;
  for (const auto& c : col_labels) out += "\t" + c;
  out += "\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    out += row_labels[r];
    for (double v : values.at(r)) out += fmt::format("\t{:.6f}", v);
    out += "\n";
  }
  return out;
}

}  // namespace gmcf
