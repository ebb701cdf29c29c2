#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nuc/knn_index.hpp"
#include "nuc/repr_store.hpp"

namespace nuc {

/// Per-neighbor rows [distance, agreement flag] plus the upstream confidence.
/// Rows keep the neighbor order; the network does not depend on it.
struct NeighborhoodFeatures {
  std::vector<double> distances;
  std::vector<double> flags;  // 1 when the neighbor's label equals the prediction
  double confidence = 0.0;

  std::size_t k() const { return distances.size(); }
};

NeighborhoodFeatures featurize(const NeighborQuery& nq, ClassId pred_label,
                               double confidence);

inline constexpr const char* kFeatureSpecWithConfidence = "dist+flag+conf";
inline constexpr const char* kFeatureSpecNoConfidence = "dist+flag";

/// Affine standardization of the inputs, (value - shift) / scale, fitted on
/// the training neighborhoods. Identity by default. The confidence s enters
/// as log(s / (1 - s)) before standardization, which spreads out the
/// near-one values where most of its ranking information sits.
struct InputNorm {
  double distance_shift = 0.0, distance_scale = 1.0;
  double flag_shift = 0.0, flag_scale = 1.0;
  double confidence_shift = 0.0, confidence_scale = 1.0;
};

struct NucHyper {
  std::size_t layers = 2;   // L
  std::size_t hidden = 64;  // width of every per-neighbor map
  std::size_t k = 10;
  bool use_confidence = true;
  InputNorm norm;
  // Kernel the neighborhoods were measured with; scoring must reuse it.
  DistanceKernel kernel = DistanceKernel::euclidean;

  std::string feature_spec() const {
    return use_confidence ? kFeatureSpecWithConfidence : kFeatureSpecNoConfidence;
  }
};

struct NucOutput {
  double logits[2] = {0.0, 0.0};  // [correct, error]
  double u = 0.5;                 // P(upstream error)
};

/// Permutation-invariant scorer. Each layer applies a linear map to every
/// neighbor row and sums over the neighborhood; for L > 1 a ReLU follows the
/// final aggregation. The aggregate, with the confidence appended, feeds a
/// linear head with two logits.
///
/// All parameters live in one flat vector so optimizers and gradient checks
/// can treat them uniformly.
class NucNetwork {
 public:
  struct Linear {
    std::size_t in = 0, out = 0;
    std::size_t weight = 0;  // offset of the out x in row-major weight block
    std::size_t bias = 0;    // offset of the bias block
  };

  explicit NucNetwork(const NucHyper& hyper);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static NucNetwork initialized(const NucHyper& hyper, std::uint64_t seed);

  const NucHyper& hyper() const { return hyper_; }
  NucHyper& hyper() { return hyper_; }
  std::span<const Linear> layers() const { return layers_; }
  const Linear& head() const { return head_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  NucOutput forward(const NeighborhoodFeatures& f) const;

  /// Adds d loss / d params for one example to grad (same size as params) and
  /// returns the loss. correct = 1 when the upstream prediction was right.
  double accumulate_gradient(const NeighborhoodFeatures& f, int correct,
                             std::span<double> grad) const;

 private:
  NucHyper hyper_;
  std::vector<Linear> layers_;
  Linear head_;
  std::vector<double> params_;
};

/// Two-class cross entropy on the logits, target "correct" when correct == 1.
/// Evaluated with log-sum-exp.
double loss_from_logits(const double logits[2], int correct);

/// Same loss expressed through u = P(error); u must lie in (0,1).
double loss(double u, int correct);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr);

struct TrainConfig {
  std::size_t k = 10;
  double lr_initial = 1e-3;
  double lr_annealed = 1e-4;
  std::size_t anneal_step = 40000;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  bool use_confidence = true;
  DistanceKernel kernel = DistanceKernel::euclidean;

  void validate() const;
};

struct TrainLog {
  double initial_mean_loss = 0.0;        // untrained net over the training data
  std::vector<double> epoch_mean_loss;   // running loss seen during each epoch
  std::size_t steps = 0;
};

/// Per-input mean / standard deviation over the training neighborhoods.
InputNorm fit_input_norm(std::span<const NeighborhoodFeatures> features);

/// Training on precomputed neighborhoods. targets[i] = 1 when point i was
/// classified correctly.
NucNetwork train_on_features(std::span<const NeighborhoodFeatures> features,
                             std::span<const std::uint8_t> targets,
                             const TrainConfig& cfg, TrainLog* log = nullptr);

/// Queries every training point against `index` with self-exclusion,
/// featurizes, and trains.
NucNetwork train(const ReprSet& train_set, const KnnIndex& index,
                 const TrainConfig& cfg, TrainLog* log = nullptr);

/// Neighborhood features for every row of `set` (optionally self-excluded).
std::vector<NeighborhoodFeatures> featurize_set(const ReprSet& set,
                                                const KnnIndex& index,
                                                std::size_t k, bool self_exclude);

/// u for every row of `queries`; queries are not excluded from the index.
std::vector<double> score(const NucNetwork& net, const KnnIndex& index,
                          const ReprSet& queries);

struct KSweepRow {
  std::size_t k = 0;
  double auroc_with_confidence = 0.0;
  double auroc_without_confidence = 0.0;
};

/// Trains a network per k, with and without the confidence input, and reports
/// misclassification AUROC on `test_set`. One max-k query per point is shared
/// across all k.
std::vector<KSweepRow> k_sweep(const ReprSet& train_set, const ReprSet& test_set,
                               const KnnIndex& index, std::span<const std::size_t> k_values,
                               const TrainConfig& base);

void save_checkpoint(const NucNetwork& net, const std::filesystem::path& path);
NucNetwork load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const NucNetwork& net);
NucNetwork checkpoint_from_json(const std::string& text);

}  // namespace nuc
