#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmcf/core.hpp"
#include "gmcf/model.hpp"

namespace gmcf {

struct ScoredSample {
  std::uint32_t user = 0;
  double score = 0.0;
  double label = 0.0;
};

// Probability that a random (positive, negative) pair is ordered correctly,
// ties counting one half, pooled over all users. Throws UndefinedMetricError
// without both classes.
double auc(std::span<const ScoredSample> scored);

// Mean clamped binary cross-entropy.
double logloss(std::span<const double> probabilities, std::span<const double> labels);

struct UserNdcg {
  std::uint32_t user = 0;
  std::size_t items = 0;
  std::size_t relevant = 0;
  double ndcg = 0.0;
};

// Per user (in first-appearance order), ranks that user's samples by score
// descending, ties kept in input order, and computes DCG@k / IDCG@k with
// binary gains. Users without a relevant sample are skipped.
std::vector<UserNdcg> ndcg_per_user(std::span<const ScoredSample> scored, std::size_t k);

// Mean of ndcg_per_user. Throws UndefinedMetricError if no user has a
// relevant sample.
double ndcg_at_k(std::span<const ScoredSample> scored, std::size_t k);

struct MetricReport {
  double auc = 0.0;
  double logloss = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;

  // auc=<f> logloss=<f> ndcg@5=<f> ndcg@10=<f>
  std::string line() const;
};

// Scores every sample with predict() under the parameters' own variant.
std::vector<ScoredSample> score_samples(std::span<const DataSample> samples, const ModelParams& params);

MetricReport evaluate(std::span<const ScoredSample> scored);
MetricReport evaluate(std::span<const DataSample> samples, const ModelParams& params);

// Attribute similarity (cosine within group A) and node matching
// (sum(v_a (.) v_b) between groups A and B).
struct MatchingMatrices {
  std::vector<std::string> a_labels;
  std::vector<std::string> b_labels;
  std::vector<std::vector<double>> similarity;  // |A| x |A|
  std::vector<std::vector<double>> matching;    // |A| x |B|
};

// Cosine of two vectors; 0 when either is the zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

MatchingMatrices export_matrices(const EmbeddingTable& table, const Vocabulary& vocab,
                                 std::span<const AttributeId> group_a, std::span<const AttributeId> group_b);

// Tab-separated grid with a header row and a label column.
std::string format_grid(std::span<const std::string> row_labels, std::span<const std::string> col_labels,
                        const std::vector<std::vector<double>>& values);

}  // namespace gmcf
