#include "nuc/knn_index.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nuc/errors.hpp"
#include "nuc/parallel.hpp"

namespace nuc {
namespace {

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

struct Candidate {
  double distance;
  PointId id;
  std::size_t row;
  bool operator<(const Candidate& o) const {
    return distance < o.distance || (distance == o.distance && id < o.id);
  }
};

}  // namespace

DistanceKernel parse_kernel(std::string_view name) {
  if (name == "euclidean" || name == "l2") return DistanceKernel::euclidean;
  if (name == "cosine" || name == "cosine_distance")
    return DistanceKernel::cosine_distance;
  throw UsageError("unknown kernel '" + std::string(name) +
                   "' (expected euclidean or cosine)");
}

std::string_view kernel_name(DistanceKernel kernel) {
  return kernel == DistanceKernel::euclidean ? "euclidean" : "cosine";
}

NeighborQuery NeighborQuery::prefix(std::size_t k) const {
  if (k > this->k()) throw QueryError("prefix longer than neighbor list");
  NeighborQuery out;
  out.neighbor_ids.assign(neighbor_ids.begin(), neighbor_ids.begin() + k);
  out.distances.assign(distances.begin(), distances.begin() + k);
  out.neighbor_labels.assign(neighbor_labels.begin(), neighbor_labels.begin() + k);
  return out;
}

KnnIndex::KnnIndex(const ReprSet& set, DistanceKernel kernel)
    : kernel_(kernel),
      dim_(set.dim),
      vectors_(set.vectors),
      ids_(set.ids),
      labels_(set.labels) {
  set.validate();
  norms_.resize(ids_.size());
  row_of_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    norms_[i] = norm_of(set.row(i));
    if (kernel_ == DistanceKernel::cosine_distance && norms_[i] == 0.0)
      throw BuildError("zero vector (id " + std::to_string(ids_[i]) +
                       ") cannot be indexed under the cosine kernel");
    row_of_.emplace(ids_[i], i);
  }
}

double KnnIndex::distance_to_row(std::span<const float> q, double q_norm,
                                 std::size_t row) const {
  const float* r = vectors_.data() + row * dim_;
  if (kernel_ == DistanceKernel::euclidean) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      double diff = static_cast<double>(q[d]) - r[d];
      s += diff * diff;
    }
    return std::sqrt(s);
  }
  double dot = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) dot += static_cast<double>(q[d]) * r[d];
  double sim = dot / (q_norm * norms_[row]);
  return 1.0 - std::clamp(sim, -1.0, 1.0);
}

NeighborQuery KnnIndex::query(std::span<const float> q, std::size_t k,
                              std::optional<PointId> exclude_id) const {
  if (q.size() != dim_)
    throw ShapeError("query has dim " + std::to_string(q.size()) +
                     ", index has dim " + std::to_string(dim_));
  if (k == 0) throw QueryError("k must be >= 1");
  const bool excluding = exclude_id && contains(*exclude_id);
  const std::size_t available = size() - (excluding ? 1 : 0);
  if (k > available)
    throw QueryError("k=" + std::to_string(k) + " exceeds the " +
                     std::to_string(available) + " available points");
  const double q_norm = norm_of(q);
  if (kernel_ == DistanceKernel::cosine_distance && q_norm == 0.0)
    throw QueryError("zero query vector under the cosine kernel");

  // Fetch k+1 when excluding, then drop the excluded id.
  const std::size_t fetch = excluding ? k + 1 : k;
  std::vector<Candidate> best;
  best.reserve(fetch + 1);
  for (std::size_t row = 0; row < size(); ++row) {
    Candidate c{distance_to_row(q, q_norm, row), ids_[row], row};
    if (best.size() < fetch) {
      best.push_back(c);
      std::push_heap(best.begin(), best.end());
    } else if (c < best.front()) {
      std::pop_heap(best.begin(), best.end());
      best.back() = c;
      std::push_heap(best.begin(), best.end());
    }
  }
  std::sort_heap(best.begin(), best.end());

  NeighborQuery out;
  out.neighbor_ids.reserve(k);
  out.distances.reserve(k);
  out.neighbor_labels.reserve(k);
  for (const auto& c : best) {
    if (excluding && c.id == *exclude_id) continue;
    if (out.neighbor_ids.size() == k) break;
    out.neighbor_ids.push_back(c.id);
    out.distances.push_back(c.distance);
    out.neighbor_labels.push_back(labels_[c.row]);
  }
  return out;
}

std::vector<NeighborQuery> KnnIndex::query_batch(const ReprSet& set, std::size_t k,
                                                 bool self_exclude) const {
  std::vector<NeighborQuery> out(set.count());
  parallel_for(set.count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = query(set.row(i), k,
                     self_exclude ? std::optional<PointId>(set.ids[i]) : std::nullopt);
  });
  return out;
}

}  // namespace nuc
