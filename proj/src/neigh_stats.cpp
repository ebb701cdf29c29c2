#include "nuc/neigh_stats.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include "nuc/errors.hpp"

namespace nuc {

double kde_unconditional(const NeighborQuery& nq) {
  if (nq.k() == 0) throw QueryError("empty neighbor list");
  double sum = 0.0;
  for (double d : nq.distances) sum += d;
  return sum / static_cast<double>(nq.k());
}

std::optional<double> kde_conditional(const NeighborQuery& nq, ClassId pred_label) {
  if (nq.k() == 0) throw QueryError("empty neighbor list");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < nq.k(); ++j) {
    if (nq.neighbor_labels[j] == pred_label) {
      sum += nq.distances[j];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::size_t agreement(const NeighborQuery& nq, ClassId pred_label) {
  if (nq.k() == 0) throw QueryError("empty neighbor list");
  return static_cast<std::size_t>(
      std::count(nq.neighbor_labels.begin(), nq.neighbor_labels.end(), pred_label));
}

NeighStats compute_stats(const NeighborQuery& nq, ClassId pred_label) {
  return {kde_unconditional(nq), kde_conditional(nq, pred_label),
          agreement(nq, pred_label), nq.k()};
}

std::vector<SweepRow> stats_sweep(const ReprSet& queries, const KnnIndex& index,
                                  std::span<const std::size_t> k_values,
                                  bool self_exclude) {
  if (k_values.empty()) throw UsageError("k list is empty");
  const std::size_t k_max = *std::max_element(k_values.begin(), k_values.end());
  const auto neighbors = index.query_batch(queries, k_max, self_exclude);
  const auto correct = correctness_labels(queries);

  std::vector<SweepRow> rows;
  for (std::size_t k : k_values) {
    if (k == 0) throw QueryError("k must be >= 1");
    for (int split = 1; split >= 0; --split) {
      SweepRow row;
      row.k = k;
      row.split = split ? "correct" : "incorrect";
      double kde = 0.0, cond = 0.0, agree = 0.0;
      std::size_t n_cond = 0;
      for (std::size_t i = 0; i < queries.count(); ++i) {
        if (correct[i] != split) continue;
        NeighStats s = compute_stats(neighbors[i].prefix(k), queries.pred_labels[i]);
        kde += s.mean_distance;
        agree += static_cast<double>(s.agreement_count) / static_cast<double>(k);
        if (s.mean_same_class_distance) {
          cond += *s.mean_same_class_distance;
          ++n_cond;
        }
        ++row.n_points;
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.mean_kde = row.n_points ? kde / static_cast<double>(row.n_points) : nan;
      row.mean_agreement = row.n_points ? agree / static_cast<double>(row.n_points) : nan;
      row.mean_kde_cond = n_cond ? cond / static_cast<double>(n_cond) : nan;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  auto fmt = [](double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
  };
  std::string csv = "k,split,mean_kde,mean_kde_cond,mean_agreement,n_points\n";
  for (const auto& r : rows)
    csv += std::to_string(r.k) + ',' + r.split + ',' + fmt(r.mean_kde) + ',' +
           fmt(r.mean_kde_cond) + ',' + fmt(r.mean_agreement) + ',' +
           std::to_string(r.n_points) + '\n';
  return csv;
}

}  // namespace nuc
