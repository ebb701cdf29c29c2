#include "nuc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nuc/errors.hpp"

namespace nuc {
namespace {

std::pair<std::size_t, std::size_t> class_counts(std::span<const double> scores,
                                                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw ShapeError("scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw DataError("scores contain NaN");
  std::size_t pos = 0;
  for (auto l : labels) {
    if (l > 1) throw DataError("labels must be 0 or 1");
    pos += l;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw UndefinedMetricError("metric undefined: only one class present");
  return {pos, neg};
}

std::vector<std::size_t> ascending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const auto [n_pos, n_neg] = class_counts(scores, labels);
  const auto order = ascending_order(scores);
  // Twice the positive rank sum keeps midranks integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t twice_midrank = (i + 1) + j;  // ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) twice_rank_sum += twice_midrank;
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels,
            PositiveClass positive) {
  class_counts(scores, labels);
  const std::uint8_t pos_label = positive == PositiveClass::out ? 1 : 0;
  std::vector<double> oriented(scores.begin(), scores.end());
  if (positive == PositiveClass::in)
    for (double& s : oriented) s = -s;
  auto order = ascending_order(oriented);
  std::reverse(order.begin(), order.end());

  std::size_t total_pos = 0;
  for (auto l : labels) total_pos += (l == pos_label);

  double ap = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, group_pos = 0;
    while (j < order.size() && oriented[order[j]] == oriented[order[i]]) {
      if (labels[order[j]] == pos_label) ++group_pos; else ++fp;
      ++j;
    }
    tp += group_pos;
    if (group_pos)
      ap += static_cast<double>(group_pos) / static_cast<double>(total_pos) *
            (static_cast<double>(tp) / static_cast<double>(tp + fp));
    i = j;
  }
  return ap;
}

EvalReport evaluate_task(std::span<const double> scores,
                         std::span<const std::uint8_t> labels,
                         const std::string& method, const std::string& task) {
  const auto [n_pos, n_neg] = class_counts(scores, labels);
  EvalReport r;
  r.task = task;
  r.method = method;
  r.auroc = auroc(scores, labels);
  r.aupr_out = aupr(scores, labels, PositiveClass::out);
  r.aupr_in = aupr(scores, labels, PositiveClass::in);
  r.n_pos = n_pos;
  r.n_neg = n_neg;
  return r;
}

std::string reports_to_csv(std::span<const EvalReport> reports) {
  std::string csv = "task,method,auroc,aupr_out,aupr_in,n_pos,n_neg\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%zu,%zu\n", r.task.c_str(),
                  r.method.c_str(), r.auroc, r.aupr_out, r.aupr_in, r.n_pos, r.n_neg);
    csv += buf;
  }
  return csv;
}

std::string reports_to_table(std::span<const EvalReport> reports) {
  std::size_t task_w = 4, method_w = 6;
  for (const auto& r : reports) {
    task_w = std::max(task_w, r.task.size());
    method_w = std::max(method_w, r.method.size());
  }
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %7s  %8s  %7s  %7s  %7s\n",
                static_cast<int>(task_w), "task", static_cast<int>(method_w), "method",
                "AUROC", "AUPR-Out", "AUPR-In", "n_pos", "n_neg");
  out += buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %7.4f  %8.4f  %7.4f  %7zu  %7zu\n",
                  static_cast<int>(task_w), r.task.c_str(), static_cast<int>(method_w),
                  r.method.c_str(), r.auroc, r.aupr_out, r.aupr_in, r.n_pos, r.n_neg);
    out += buf;
  }
  out += "(AUPR = average precision, ties grouped per distinct score)\n";
  return out;
}

}  // namespace nuc
