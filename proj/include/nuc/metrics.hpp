#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nuc {

/// P(score_pos > score_neg) + 1/2 P(equal), from midrank sums. labels[i] = 1
/// marks a positive; positives are expected to score high.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

enum class PositiveClass {
  in,   // label 0 is positive, ranked by low score
  out,  // label 1 is positive, ranked by high score
};

/// Average precision: precision at each distinct score threshold, weighted by
/// the recall gained there, walking from the most positive-looking score.
double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels,
            PositiveClass positive);

/// labels[i] = 1 for an error / out-of-distribution point, and scores are
/// oriented so that higher means "error / out".
struct EvalReport {
  std::string task;
  std::string method;
  double auroc = 0.0;
  double aupr_out = 0.0;
  double aupr_in = 0.0;
  std::size_t n_pos = 0;  // error / out points
  std::size_t n_neg = 0;
};

EvalReport evaluate_task(std::span<const double> scores,
                         std::span<const std::uint8_t> labels,
                         const std::string& method, const std::string& task);

/// `task,method,auroc,aupr_out,aupr_in,n_pos,n_neg`
std::string reports_to_csv(std::span<const EvalReport> reports);

/// Aligned plain-text table.
std::string reports_to_table(std::span<const EvalReport> reports);

}  // namespace nuc
