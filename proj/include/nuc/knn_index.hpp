#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nuc/repr_store.hpp"

namespace nuc {

enum class DistanceKernel { euclidean, cosine_distance };

DistanceKernel parse_kernel(std::string_view name);
std::string_view kernel_name(DistanceKernel kernel);

/// The k nearest indexed points to a query, closest first. Ties in distance
/// are ordered by ascending point id.
struct NeighborQuery {
  std::vector<PointId> neighbor_ids;
  std::vector<double> distances;
  std::vector<ClassId> neighbor_labels;

  std::size_t k() const { return neighbor_ids.size(); }
  /// First k entries; equal to a direct k-NN query.
  NeighborQuery prefix(std::size_t k) const;
};

/// Exact k-nearest-neighbor search by full scan. Immutable after
/// construction; concurrent queries are safe.
class KnnIndex {
 public:
  KnnIndex(const ReprSet& set, DistanceKernel kernel = DistanceKernel::euclidean);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  DistanceKernel kernel() const { return kernel_; }
  bool contains(PointId id) const { return row_of_.contains(id); }
  ClassId label_of(PointId id) const { return labels_[row_of_.at(id)]; }

  NeighborQuery query(std::span<const float> q, std::size_t k,
                      std::optional<PointId> exclude_id = std::nullopt) const;

  /// One query per row of `set`. With self_exclude, row i excludes set.ids[i].
  /// Output order follows the rows regardless of NUC_THREADS.
  std::vector<NeighborQuery> query_batch(const ReprSet& set, std::size_t k,
                                         bool self_exclude) const;

 private:
  double distance_to_row(std::span<const float> q, double q_norm,
                         std::size_t row) const;

  DistanceKernel kernel_;
  std::size_t dim_;
  std::vector<float> vectors_;
  std::vector<double> norms_;
  std::vector<PointId> ids_;
  std::vector<ClassId> labels_;
  std::unordered_map<PointId, std::size_t> row_of_;
};

}  // namespace nuc
