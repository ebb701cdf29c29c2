#pragma once

// Independent reference implementations used to check the library. They are
// deliberately naive: full sorts, all-pairs loops, explicit per-row sums.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "nuc/baselines.hpp"
#include "nuc/knn_index.hpp"
#include "nuc/nuc_model.hpp"
#include "nuc/repr_store.hpp"

namespace nuc::oracle {

inline double distance(std::span<const float> a, std::span<const float> b,
                       DistanceKernel kernel) {
  if (kernel == DistanceKernel::euclidean) {
    long double s = 0;
    for (std::size_t d = 0; d < a.size(); ++d) {
      long double diff = static_cast<long double>(a[d]) - b[d];
      s += diff * diff;
    }
    return static_cast<double>(std::sqrt(s));
  }
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += static_cast<long double>(a[d]) * b[d];
    na += static_cast<long double>(a[d]) * a[d];
    nb += static_cast<long double>(b[d]) * b[d];
  }
  long double sim = dot / std::sqrt(na * nb);
  sim = std::clamp(sim, -1.0L, 1.0L);
  return static_cast<double>(1.0L - sim);
}

/// Full scan and full sort of (distance, id).
inline std::vector<std::pair<double, PointId>> knn(const ReprSet& set,
                                                   std::span<const float> q,
                                                   std::size_t k, DistanceKernel kernel,
                                                   const PointId* exclude = nullptr) {
  std::vector<std::pair<double, PointId>> all;
  for (std::size_t i = 0; i < set.count(); ++i) {
    if (exclude && set.ids[i] == *exclude) continue;
    all.emplace_back(distance(q, set.row(i), kernel), set.ids[i]);
  }
  std::sort(all.begin(), all.end());
  all.resize(std::min(k, all.size()));
  return all;
}

/// Ids must agree exactly and distances within `rel` relative.
inline bool knn_matches(const NeighborQuery& got,
                        const std::vector<std::pair<double, PointId>>& want,
                        double rel = 1e-6) {
  if (got.k() != want.size()) return false;
  for (std::size_t j = 0; j < want.size(); ++j) {
    if (got.neighbor_ids[j] != want[j].second) return false;
    const double a = got.distances[j], b = want[j].first;
    if (std::abs(a - b) > rel * std::max({std::abs(a), std::abs(b), 1e-9})) return false;
  }
  return true;
}

/// AUROC as an exact fraction: (2 * wins + ties) / (2 * n_pos * n_neg).
struct PairCount {
  std::uint64_t twice_wins = 0;
  std::uint64_t twice_total = 0;
  double value() const {
    return static_cast<double>(twice_wins) / static_cast<double>(twice_total);
  }
};

inline PairCount auroc_pairs(std::span<const double> scores,
                             std::span<const std::uint8_t> labels) {
  PairCount c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) c.twice_wins += 2;
      else if (scores[i] == scores[j]) c.twice_wins += 1;
      c.twice_total += 2;
    }
  }
  return c;
}

/// Average precision by enumerating every threshold t taken from the scores:
/// predict positive when score >= t, and add precision(t) * (recall(t) -
/// recall(previous t)). Positives are labels[i] == 1 scored high.
inline double average_precision(std::span<const double> scores,
                                std::span<const std::uint8_t> labels) {
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double n_pos = 0;
  for (auto l : labels) n_pos += l;
  double ap = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) (labels[i] ? tp : fp) += 1;
    const double recall = tp / n_pos;
    ap += (tp / (tp + fp)) * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

/// Forward pass written out per neighbor: the first layer maps every row and
/// sums the results; later layers map the aggregate, carrying k copies of
/// their bias; ReLU after the last aggregation when L > 1; linear head over the
/// aggregate and the standardized confidence logit.
inline double nuc_u(const NucNetwork& net, const NeighborhoodFeatures& f) {
  const auto& p = net.params();
  const auto& hy = net.hyper();
  const auto& n = hy.norm;
  const auto L = net.layers();
  const double k = static_cast<double>(f.k());
  std::vector<double> h(L[0].out, 0.0);
  for (std::size_t j = 0; j < f.k(); ++j) {
    const double x[2] = {(f.distances[j] - n.distance_shift) / n.distance_scale,
                         (f.flags[j] - n.flag_shift) / n.flag_scale};
    for (std::size_t o = 0; o < L[0].out; ++o)
      h[o] += p[L[0].weight + o * 2] * x[0] + p[L[0].weight + o * 2 + 1] * x[1] +
              p[L[0].bias + o];
  }
  for (std::size_t l = 1; l < L.size(); ++l) {
    std::vector<double> next(L[l].out, 0.0);
    for (std::size_t o = 0; o < L[l].out; ++o) {
      next[o] = k * p[L[l].bias + o];
      for (std::size_t i = 0; i < L[l].in; ++i)
        next[o] += p[L[l].weight + o * L[l].in + i] * h[i];
    }
    h = std::move(next);
  }
  if (L.size() > 1)
    for (double& v : h) v = v > 0 ? v : 0;
  if (hy.use_confidence) {
    const double c = std::clamp(f.confidence, 1e-12, 1.0 - 1e-12);
    h.push_back((std::log(c / (1.0 - c)) - n.confidence_shift) / n.confidence_scale);
  }
  const auto& H = net.head();
  double z[2];
  for (std::size_t o = 0; o < 2; ++o) {
    z[o] = p[H.bias + o];
    for (std::size_t i = 0; i < H.in; ++i) z[o] += p[H.weight + o * H.in + i] * h[i];
  }
  return std::exp(z[1]) / (std::exp(z[0]) + std::exp(z[1]));
}

/// Sign pattern of the last layer's pre-activations, used to keep finite
/// differences away from ReLU kinks.
inline std::vector<bool> relu_pattern(const NucNetwork& net, const NeighborhoodFeatures& f) {
  NucNetwork probe = net;
  const auto L = net.layers();
  std::vector<bool> pattern;
  if (L.size() < 2) return pattern;
  // Read each pre-activation through a head that passes it straight out.
  auto& p = probe.params();
  const auto& H = probe.head();
  for (std::size_t o = 0; o < L.back().out; ++o) {
    std::fill(p.begin() + H.weight, p.begin() + H.weight + 2 * H.in, 0.0);
    p[H.bias] = p[H.bias + 1] = 0.0;
    p[H.weight + H.in + o] = 1.0;
    const double u = probe.forward(f).u;
    pattern.push_back(u > 0.5);
  }
  return pattern;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // parameters whose perturbation crossed a kink
};

/// Central differences of the loss against the analytic gradient. The
/// relative error uses max(|analytic|, |numeric|, floor) as denominator.
inline GradCheck check_gradient(const NucNetwork& net, const NeighborhoodFeatures& f,
                                int correct, double h = 1e-4, double floor = 1e-3) {
  std::vector<double> grad(net.params().size(), 0.0);
  net.accumulate_gradient(f, correct, grad);
  const auto base = relu_pattern(net, f);
  GradCheck out;
  NucNetwork probe = net;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double keep = probe.params()[i];
    probe.params()[i] = keep + h;
    const double lp = loss_from_logits(probe.forward(f).logits, correct);
    const bool kink_p = relu_pattern(probe, f) != base;
    probe.params()[i] = keep - h;
    const double lm = loss_from_logits(probe.forward(f).logits, correct);
    const bool kink_m = relu_pattern(probe, f) != base;
    probe.params()[i] = keep;
    if (kink_p || kink_m) {
      ++out.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2 * h);
    const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(grad[i] - numeric) / denom);
    ++out.checked;
  }
  return out;
}

/// -t log(1-u) - (1-t) log(u), directly.
inline double bce(double u, int correct) {
  return correct ? -std::log(1.0 - u) : -std::log(u);
}

// Exhaustive search: 2000 points over [0.05, 20], then 2000 points across the
// two cells around the best coarse point.
inline double grid_temperature(const FloatMatrix& logits, std::span<const ClassId> labels) {
  auto search = [&](double lo, double hi) {
    double best_t = lo, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2000; ++i) {
      const double t = lo + (hi - lo) * i / 1999.0;
      const double v = temperature_nll(logits, labels, t);
      if (v < best) {
        best = v;
        best_t = t;
      }
    }
    return best_t;
  };
  const double step = (20.0 - 0.05) / 1999.0;
  const double coarse = search(0.05, 20.0);
  return search(std::max(0.05, coarse - step), std::min(20.0, coarse + step));
}


}  // namespace nuc::oracle
