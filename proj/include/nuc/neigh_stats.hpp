#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nuc/knn_index.hpp"
#include "nuc/repr_store.hpp"

namespace nuc {

// All distance statistics here are dissimilarities: a larger value means a
// sparser neighborhood and therefore more uncertainty.

/// Mean distance to the k neighbors.
double kde_unconditional(const NeighborQuery& nq);

/// Mean distance over the neighbors whose label equals pred_label; empty when
/// no neighbor carries that label.
std::optional<double> kde_conditional(const NeighborQuery& nq, ClassId pred_label);

/// Number of neighbors whose label equals pred_label.
std::size_t agreement(const NeighborQuery& nq, ClassId pred_label);

struct NeighStats {
  double mean_distance = 0.0;
  std::optional<double> mean_same_class_distance;
  std::size_t agreement_count = 0;
  std::size_t k = 0;
};

NeighStats compute_stats(const NeighborQuery& nq, ClassId pred_label);

struct SweepRow {
  std::size_t k = 0;
  std::string split;  // "correct" or "incorrect"
  double mean_kde = 0.0;
  double mean_kde_cond = 0.0;  // over points with at least one same-class neighbor
  double mean_agreement = 0.0;  // agreement_count / k, averaged
  std::size_t n_points = 0;
};

/// Per-k means of the three statistics over the query points, split by
/// whether the upstream prediction was correct. One (max k) query per point;
/// smaller k reuse its prefix.
std::vector<SweepRow> stats_sweep(const ReprSet& queries, const KnnIndex& index,
                                  std::span<const std::size_t> k_values,
                                  bool self_exclude);

/// Header `k,split,mean_kde,mean_kde_cond,mean_agreement,n_points`.
std::string sweep_to_csv(std::span<const SweepRow> rows);

}  // namespace nuc
