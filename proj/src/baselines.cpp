#include "nuc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nuc/errors.hpp"
#include "nuc/neigh_stats.hpp"
#include "nuc/parallel.hpp"

namespace nuc {
namespace {

void check_logits(const FloatMatrix& logits, std::size_t n_labels) {
  if (logits.rows == 0 || logits.cols == 0)
    throw UnsupportedInputError("class logits are unavailable");
  if (logits.rows != n_labels)
    throw ConsistencyError("logits rows do not match the number of labels");
}

}  // namespace

std::vector<double> softmax_score(const ReprSet& set) {
  std::vector<double> out(set.count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - set.confidences[i];
  return out;
}

double temperature_nll(const FloatMatrix& logits, std::span<const ClassId> labels,
                       double temperature) {
  check_logits(logits, labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto row = logits.row(i);
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols)
      throw DataError("label outside the logit range");
    double m = -std::numeric_limits<double>::infinity();
    for (float v : row) m = std::max(m, v / temperature);
    double s = 0.0;
    for (float v : row) s += std::exp(v / temperature - m);
    total += m + std::log(s) - row[labels[i]] / temperature;
  }
  return total / static_cast<double>(logits.rows);
}

TemperatureModel fit_temperature(const FloatMatrix& logits,
                                 std::span<const ClassId> labels) {
  check_logits(logits, labels.size());
  // NLL is convex in 1/T, hence unimodal in T.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.05, b = 20.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = temperature_nll(logits, labels, c);
  double fd = temperature_nll(logits, labels, d);
  while (b - a >= 1e-4) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = temperature_nll(logits, labels, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = temperature_nll(logits, labels, d);
    }
  }
  return {0.5 * (a + b)};
}

std::vector<double> calibrated_confidence(const FloatMatrix& logits,
                                          const TemperatureModel& model) {
  if (!(model.temperature > 0.0)) throw DataError("temperature must be positive");
  std::vector<double> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto row = logits.row(i);
    double m = -std::numeric_limits<double>::infinity();
    for (float v : row) m = std::max(m, v / model.temperature);
    double s = 0.0;
    for (float v : row) s += std::exp(v / model.temperature - m);
    out[i] = 1.0 / s;  // the max term contributes exp(0)
  }
  return out;
}

std::vector<double> calibrated_softmax_score(const FloatMatrix& logits,
                                             const TemperatureModel& model) {
  auto conf = calibrated_confidence(logits, model);
  for (double& c : conf) c = 1.0 - c;
  return conf;
}

double MahalanobisModel::distance(std::span<const float> x, ClassId cls) const {
  auto it = class_means.find(cls);
  if (it == class_means.end())
    throw LookupError("class " + std::to_string(cls) + " was not in the fitted model");
  const auto& mu = it->second;
  if (static_cast<Eigen::Index>(x.size()) != mu.size())
    throw ShapeError("query dim does not match the Mahalanobis model");
  Eigen::VectorXd diff(mu.size());
  for (Eigen::Index d = 0; d < mu.size(); ++d) diff[d] = static_cast<double>(x[d]) - mu[d];
  const double sq = diff.dot(shared_precision * diff);
  return std::sqrt(std::max(0.0, sq));
}

MahalanobisModel fit_mahalanobis(const ReprSet& train) {
  train.validate();
  const auto dim = static_cast<Eigen::Index>(train.dim);
  std::map<ClassId, std::size_t> counts;
  MahalanobisModel model;
  for (std::size_t i = 0; i < train.count(); ++i) {
    auto [it, fresh] = model.class_means.try_emplace(train.labels[i], Eigen::VectorXd::Zero(dim));
    for (Eigen::Index d = 0; d < dim; ++d) it->second[d] += train.row(i)[d];
    ++counts[train.labels[i]];
  }
  for (auto& [cls, mean] : model.class_means) {
    if (counts[cls] < 2)
      throw DataError("class " + std::to_string(cls) + " has fewer than 2 training points");
    mean /= static_cast<double>(counts[cls]);
  }
  const double dof = static_cast<double>(train.count() - model.class_means.size());

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd diff(dim);
  for (std::size_t i = 0; i < train.count(); ++i) {
    const auto& mu = model.class_means[train.labels[i]];
    for (Eigen::Index d = 0; d < dim; ++d) diff[d] = train.row(i)[d] - mu[d];
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(diff);
  }
  Eigen::MatrixXd cov = scatter.selfadjointView<Eigen::Lower>();
  cov /= dof;

  const double lambda = 1e-6 * cov.trace() / static_cast<double>(dim);
  cov.diagonal().array() += lambda;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(lo > 0.0) ||
      condition > 1.0 / std::numeric_limits<double>::epsilon()) {
    std::ostringstream msg;
    msg << "tied covariance is singular after regularization (condition estimate "
        << condition << ")";
    throw NumericError(msg.str());
  }
  model.shared_precision = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  model.shared_precision =
      0.5 * (model.shared_precision + model.shared_precision.transpose()).eval();
  return model;
}

std::vector<double> mahalanobis_score(const MahalanobisModel& model,
                                      const ReprSet& queries) {
  std::vector<double> out(queries.count());
  parallel_for(queries.count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = model.distance(queries.row(i), queries.pred_labels[i]);
  });
  return out;
}

std::vector<double> kde_scores_from_neighbors(std::span<const NeighborQuery> neighbors,
                                              std::span<const ClassId> pred_labels,
                                              KdeVariant variant) {
  if (neighbors.size() != pred_labels.size())
    throw ShapeError("neighbor lists and predictions differ in length");
  std::vector<double> out(neighbors.size());
  switch (variant) {
    case KdeVariant::eq1:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = kde_unconditional(neighbors[i]);
      break;
    case KdeVariant::eq3:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = -static_cast<double>(agreement(neighbors[i], pred_labels[i]));
      break;
    case KdeVariant::eq2: {
      std::vector<std::optional<double>> cond(out.size());
      double max_seen = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < out.size(); ++i) {
        cond[i] = kde_conditional(neighbors[i], pred_labels[i]);
        if (cond[i]) max_seen = std::max(max_seen, *cond[i]);
      }
      // No same-class neighbor is the strongest evidence of an error.
      const double fallback = std::isfinite(max_seen)
                                  ? std::nextafter(max_seen, std::numeric_limits<double>::infinity())
                                  : 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = cond[i].value_or(fallback);
      break;
    }
  }
  return out;
}

std::vector<double> kde_baseline_scores(const KnnIndex& index, const ReprSet& queries,
                                        KdeVariant variant, std::size_t k,
                                        bool self_exclude) {
  const auto neighbors = index.query_batch(queries, k, self_exclude);
  return kde_scores_from_neighbors(neighbors, queries.pred_labels, variant);
}

}  // namespace nuc
