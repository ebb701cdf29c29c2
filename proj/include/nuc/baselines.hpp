#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nuc/knn_index.hpp"
#include "nuc/repr_store.hpp"

namespace nuc {

// Every scorer returns one value per query row; higher means more uncertain.

/// 1 - s(y_hat).
std::vector<double> softmax_score(const ReprSet& set);

struct TemperatureModel {
  double temperature = 1.0;
};

/// Mean negative log-likelihood of labels under softmax(logits / T).
double temperature_nll(const FloatMatrix& logits, std::span<const ClassId> labels,
                       double temperature);

/// Golden-section search for the NLL-minimizing T on [0.05, 20] to |dT| < 1e-4.
TemperatureModel fit_temperature(const FloatMatrix& logits,
                                 std::span<const ClassId> labels);

/// Max of softmax(logits / T) per row.
std::vector<double> calibrated_confidence(const FloatMatrix& logits,
                                          const TemperatureModel& model);

/// 1 - calibrated confidence.
std::vector<double> calibrated_softmax_score(const FloatMatrix& logits,
                                             const TemperatureModel& model);

/// Per-class means with one covariance shared by all classes.
struct MahalanobisModel {
  std::map<ClassId, Eigen::VectorXd> class_means;
  Eigen::MatrixXd shared_precision;

  double distance(std::span<const float> x, ClassId cls) const;
};

/// Tied covariance = class-centered scatter / (N - C), inverted after adding
/// 1e-6 * trace/dim to the diagonal.
MahalanobisModel fit_mahalanobis(const ReprSet& train);

std::vector<double> mahalanobis_score(const MahalanobisModel& model,
                                      const ReprSet& queries);

enum class KdeVariant { eq1, eq2, eq3 };

/// Neighborhood statistics as scores: mean distance (eq1), mean same-class
/// distance (eq2; points without a same-class neighbor get the largest value
/// seen plus one ulp), and negated agreement count (eq3).
std::vector<double> kde_baseline_scores(const KnnIndex& index, const ReprSet& queries,
                                        KdeVariant variant, std::size_t k = 200,
                                        bool self_exclude = false);

/// Scores from precomputed neighbor lists, for callers sharing one query.
std::vector<double> kde_scores_from_neighbors(std::span<const NeighborQuery> neighbors,
                                              std::span<const ClassId> pred_labels,
                                              KdeVariant variant);

}  // namespace nuc
