#include "nuc/nuc_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <tuple>

#include <json.hpp>

#include "nuc/errors.hpp"
#include "nuc/metrics.hpp"
#include "nuc/parallel.hpp"

namespace nuc {
namespace {

constexpr std::size_t kRowWidth = 2;

double confidence_logit(double s) {
  s = std::clamp(s, 1e-12, 1.0 - 1e-12);
  return std::log(s) - std::log1p(-s);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Forward intermediates for one example.
struct Trace {
  double row_sum[kRowWidth] = {0.0, 0.0};
  std::vector<std::vector<double>> pre;  // pre[l]: layer l output before ReLU
  std::vector<double> head_in;
  NucOutput out;
};

void forward_trace(const NucNetwork& net, const NeighborhoodFeatures& f, Trace& t) {
  const NucHyper& h = net.hyper();
  if (f.flags.size() != f.distances.size())
    throw ShapeError("feature rows have mismatched distance/flag columns");
  if (f.k() == 0) throw ShapeError("neighborhood features hold no rows");
  const auto& p = net.params();
  const double k = static_cast<double>(f.k());

  // Every per-neighbor map is linear, so summing the rows first and mapping
  // the sum equals mapping each row and summing.
  const InputNorm& n = h.norm;
  for (std::size_t j = 0; j < f.k(); ++j) {
    t.row_sum[0] += (f.distances[j] - n.distance_shift) / n.distance_scale;
    t.row_sum[1] += (f.flags[j] - n.flag_shift) / n.flag_scale;
  }

  t.pre.resize(net.layers().size());
  const double* input = t.row_sum;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& L = net.layers()[l];
    auto& z = t.pre[l];
    z.assign(L.out, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* w = p.data() + L.weight + o * L.in;
      double acc = k * p[L.bias + o];
      for (std::size_t i = 0; i < L.in; ++i) acc += w[i] * input[i];
      z[o] = acc;
    }
    input = z.data();
  }

  const auto& last = t.pre.back();
  t.head_in.assign(last.begin(), last.end());
  if (h.layers > 1)
    for (double& v : t.head_in) v = std::max(0.0, v);
  if (h.use_confidence)
    t.head_in.push_back((confidence_logit(f.confidence) - n.confidence_shift) / n.confidence_scale);

  const auto& H = net.head();
  for (std::size_t o = 0; o < 2; ++o) {
    const double* w = p.data() + H.weight + o * H.in;
    double acc = p[H.bias + o];
    for (std::size_t i = 0; i < H.in; ++i) acc += w[i] * t.head_in[i];
    t.out.logits[o] = acc;
  }
  // u = softmax(logits)[error] = sigmoid(l1 - l0)
  const double diff = t.out.logits[1] - t.out.logits[0];
  t.out.u = diff >= 0 ? 1.0 / (1.0 + std::exp(-diff))
                      : std::exp(diff) / (1.0 + std::exp(diff));
}

}  // namespace

InputNorm fit_input_norm(std::span<const NeighborhoodFeatures> features) {
  auto mean_std = [](double sum, double sum_sq, double n) {
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    const double sd = std::sqrt(var);
    return std::pair{mean, sd > 1e-12 && std::isfinite(sd) ? sd : 1.0};
  };
  double d = 0, d2 = 0, fl = 0, fl2 = 0, c = 0, c2 = 0, rows = 0;
  for (const auto& f : features) {
    for (std::size_t j = 0; j < f.k(); ++j) {
      d += f.distances[j];
      d2 += f.distances[j] * f.distances[j];
      fl += f.flags[j];
      fl2 += f.flags[j] * f.flags[j];
    }
    rows += static_cast<double>(f.k());
    const double lc = confidence_logit(f.confidence);
    c += lc;
    c2 += lc * lc;
  }
  InputNorm n;
  if (features.empty() || rows == 0) return n;
  std::tie(n.distance_shift, n.distance_scale) = mean_std(d, d2, rows);
  std::tie(n.flag_shift, n.flag_scale) = mean_std(fl, fl2, rows);
  std::tie(n.confidence_shift, n.confidence_scale) =
      mean_std(c, c2, static_cast<double>(features.size()));
  return n;
}

NeighborhoodFeatures featurize(const NeighborQuery& nq, ClassId pred_label,
                               double confidence) {
  if (nq.k() == 0) throw QueryError("empty neighbor list");
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw DataError("confidence outside [0,1]");
  NeighborhoodFeatures f;
  f.distances = nq.distances;
  f.flags.resize(nq.k());
  for (std::size_t j = 0; j < nq.k(); ++j)
    f.flags[j] = nq.neighbor_labels[j] == pred_label ? 1.0 : 0.0;
  f.confidence = confidence;
  return f;
}

NucNetwork::NucNetwork(const NucHyper& hyper) : hyper_(hyper) {
  if (hyper_.layers == 0 || hyper_.hidden == 0 || hyper_.k == 0)
    throw ConfigError("layers, hidden width and k must be positive");
  const InputNorm& n = hyper_.norm;
  for (double scale : {n.distance_scale, n.flag_scale, n.confidence_scale})
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw ConfigError("input normalization scales must be positive and finite");
  for (double shift : {n.distance_shift, n.flag_shift, n.confidence_shift})
    if (!std::isfinite(shift)) throw ConfigError("input normalization shifts must be finite");
  std::size_t offset = 0;
  auto add = [&](std::size_t in, std::size_t out) {
    Linear L{in, out, offset, offset + in * out};
    offset += in * out + out;
    return L;
  };
  std::size_t in = kRowWidth;
  for (std::size_t l = 0; l < hyper_.layers; ++l) {
    layers_.push_back(add(in, hyper_.hidden));
    in = hyper_.hidden;
  }
  head_ = add(hyper_.hidden + (hyper_.use_confidence ? 1 : 0), 2);
  params_.assign(offset, 0.0);
}

NucNetwork NucNetwork::initialized(const NucHyper& hyper, std::uint64_t seed) {
  NucNetwork net(hyper);
  std::mt19937_64 rng(seed);
  auto fill = [&](const Linear& L) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    for (std::size_t i = 0; i < L.in * L.out; ++i)
      net.params_[L.weight + i] = (2.0 * uniform01(rng) - 1.0) * bound;
  };
  for (const auto& L : net.layers_) fill(L);
  fill(net.head_);
  return net;
}

NucOutput NucNetwork::forward(const NeighborhoodFeatures& f) const {
  Trace t;
  forward_trace(*this, f, t);
  return t.out;
}

double NucNetwork::accumulate_gradient(const NeighborhoodFeatures& f, int correct,
                                       std::span<double> grad) const {
  if (grad.size() != params_.size())
    throw ShapeError("gradient buffer does not match parameter count");
  Trace t;
  forward_trace(*this, f, t);
  const double k = static_cast<double>(f.k());

  // d loss / d logits = softmax - onehot(target), target 0 = correct, 1 = error
  const double p_error = t.out.u;
  double dlogits[2] = {1.0 - p_error, p_error};
  dlogits[correct ? 0 : 1] -= 1.0;

  std::vector<double> dhead_in(head_.in, 0.0);
  for (std::size_t o = 0; o < 2; ++o) {
    grad[head_.bias + o] += dlogits[o];
    const double* w = params_.data() + head_.weight + o * head_.in;
    double* gw = grad.data() + head_.weight + o * head_.in;
    for (std::size_t i = 0; i < head_.in; ++i) {
      gw[i] += dlogits[o] * t.head_in[i];
      dhead_in[i] += dlogits[o] * w[i];
    }
  }

  std::vector<double> dz(dhead_in.begin(), dhead_in.begin() + hyper_.hidden);
  if (hyper_.layers > 1)
    for (std::size_t o = 0; o < dz.size(); ++o)
      if (t.pre.back()[o] <= 0.0) dz[o] = 0.0;

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& L = layers_[l];
    const double* input = l == 0 ? t.row_sum : t.pre[l - 1].data();
    std::vector<double> dinput(L.in, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      grad[L.bias + o] += k * dz[o];
      const double* w = params_.data() + L.weight + o * L.in;
      double* gw = grad.data() + L.weight + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) {
        gw[i] += dz[o] * input[i];
        dinput[i] += dz[o] * w[i];
      }
    }
    dz = std::move(dinput);
  }
  return loss_from_logits(t.out.logits, correct);
}

double loss_from_logits(const double logits[2], int correct) {
  const double m = std::max(logits[0], logits[1]);
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  return lse - logits[correct ? 0 : 1];
}

double loss(double u, int correct) {
  if (!(u > 0.0 && u < 1.0)) throw DataError("u must lie in (0,1)");
  // logits (0, logit(u)) reproduce u = P(error)
  const double logits[2] = {0.0, std::log(u) - std::log1p(-u)};
  return loss_from_logits(logits, correct);
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr) {
  if (params.size() != grads.size())
    throw ShapeError("Adam: parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    throw ShapeError("Adam: state does not match parameter count");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void TrainConfig::validate() const {
  if (k == 0 || epochs == 0 || batch_size == 0 || layers == 0 || hidden == 0)
    throw ConfigError("k, epochs, batch size, layers and hidden width must be positive");
  if (!(lr_initial > 0.0) || !(lr_annealed > 0.0))
    throw ConfigError("learning rates must be positive");
}

NucNetwork train_on_features(std::span<const NeighborhoodFeatures> features,
                             std::span<const std::uint8_t> targets,
                             const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  if (features.size() != targets.size())
    throw ShapeError("features and targets differ in length");
  if (features.empty()) throw DegenerateTaskError("no training points");
  const auto n_correct = std::count(targets.begin(), targets.end(), 1);
  if (n_correct == 0 || n_correct == static_cast<long>(targets.size()))
    throw DegenerateTaskError(
        "all training targets are identical: the upstream model must make at "
        "least one mistake and one correct prediction on the training data");

  NucHyper hyper;
  hyper.layers = cfg.layers;
  hyper.hidden = cfg.hidden;
  hyper.k = cfg.k;
  hyper.use_confidence = cfg.use_confidence;
  hyper.kernel = cfg.kernel;
  for (const auto& f : features)
    if (f.k() != cfg.k) throw ShapeError("feature rows do not match k");
  hyper.norm = fit_input_norm(features);

  std::mt19937_64 rng(cfg.seed);
  NucNetwork net = NucNetwork::initialized(hyper, rng());

  if (log) {
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i)
      total += loss_from_logits(net.forward(features[i]).logits, targets[i]);
    log->initial_mean_loss = total / static_cast<double>(features.size());
    log->epoch_mean_loss.clear();
  }

  AdamState adam;
  std::vector<double> grad(net.params().size());
  std::vector<std::size_t> order(features.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng() % i]);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = begin; b < end; ++b)
        epoch_loss += net.accumulate_gradient(features[order[b]], targets[order[b]], grad);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (double& g : grad) g *= inv;
      const double lr = step < cfg.anneal_step ? cfg.lr_initial : cfg.lr_annealed;
      adam_step(adam, net.params(), grad, lr);
      ++step;
    }
    if (log) log->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  for (double v : net.params())
    if (!std::isfinite(v)) throw NumericError("training diverged: non-finite weight");
  if (log) log->steps = step;
  return net;
}

std::vector<NeighborhoodFeatures> featurize_set(const ReprSet& set,
                                                const KnnIndex& index,
                                                std::size_t k, bool self_exclude) {
  const auto neighbors = index.query_batch(set, k, self_exclude);
  std::vector<NeighborhoodFeatures> out(set.count());
  for (std::size_t i = 0; i < set.count(); ++i)
    out[i] = featurize(neighbors[i], set.pred_labels[i], set.confidences[i]);
  return out;
}

NucNetwork train(const ReprSet& train_set, const KnnIndex& index,
                 const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  const auto targets = correctness_labels(train_set);
  const auto n_correct = std::count(targets.begin(), targets.end(), 1);
  if (n_correct == 0 || n_correct == static_cast<long>(targets.size()))
    throw DegenerateTaskError(
        "all training targets are identical: the upstream model must make at "
        "least one mistake and one correct prediction on the training data");
  if (index.kernel() != cfg.kernel)
    throw ConfigError("index kernel differs from the configured kernel");
  const auto features = featurize_set(train_set, index, cfg.k, true);
  return train_on_features(features, targets, cfg, log);
}

std::vector<double> score(const NucNetwork& net, const KnnIndex& index,
                          const ReprSet& queries) {
  if (index.kernel() != net.hyper().kernel)
    throw ConfigError("index kernel differs from the kernel the network was trained with");
  const auto features = featurize_set(queries, index, net.hyper().k, false);
  std::vector<double> u(features.size());
  parallel_for(features.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) u[i] = net.forward(features[i]).u;
  });
  return u;
}

std::vector<KSweepRow> k_sweep(const ReprSet& train_set, const ReprSet& test_set,
                               const KnnIndex& index, std::span<const std::size_t> k_values,
                               const TrainConfig& base) {
  if (k_values.empty()) throw UsageError("k list is empty");
  if (index.kernel() != base.kernel)
    throw ConfigError("index kernel differs from the configured kernel");
  const std::size_t k_max = *std::max_element(k_values.begin(), k_values.end());
  const auto train_nb = index.query_batch(train_set, k_max, true);
  const auto test_nb = index.query_batch(test_set, k_max, false);
  const auto targets = correctness_labels(train_set);
  const auto test_correct = correctness_labels(test_set);
  std::vector<std::uint8_t> test_error(test_correct.size());
  for (std::size_t i = 0; i < test_error.size(); ++i) test_error[i] = 1 - test_correct[i];

  std::vector<KSweepRow> rows;
  for (std::size_t k : k_values) {
    std::vector<NeighborhoodFeatures> train_f(train_set.count()), test_f(test_set.count());
    for (std::size_t i = 0; i < train_f.size(); ++i)
      train_f[i] = featurize(train_nb[i].prefix(k), train_set.pred_labels[i],
                             train_set.confidences[i]);
    for (std::size_t i = 0; i < test_f.size(); ++i)
      test_f[i] = featurize(test_nb[i].prefix(k), test_set.pred_labels[i],
                            test_set.confidences[i]);
    KSweepRow row;
    row.k = k;
    for (bool with_conf : {true, false}) {
      TrainConfig cfg = base;
      cfg.k = k;
      cfg.use_confidence = with_conf;
      const NucNetwork net = train_on_features(train_f, targets, cfg);
      std::vector<double> u(test_f.size());
      parallel_for(u.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) u[i] = net.forward(test_f[i]).u;
      });
      (with_conf ? row.auroc_with_confidence : row.auroc_without_confidence) =
          auroc(u, test_error);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string checkpoint_json(const NucNetwork& net) {
  using nlohmann::json;
  const auto& p = net.params();
  auto linear_json = [&](const NucNetwork::Linear& L) {
    json weight = json::array();
    for (std::size_t o = 0; o < L.out; ++o)
      weight.push_back(std::vector<double>(p.begin() + L.weight + o * L.in,
                                           p.begin() + L.weight + (o + 1) * L.in));
    json bias = std::vector<double>(p.begin() + L.bias, p.begin() + L.bias + L.out);
    return json{{"weight", weight}, {"bias", bias}};
  };
  json layers = json::array();
  for (const auto& L : net.layers()) layers.push_back(linear_json(L));
  json doc = {{"format_version", 1},
              {"k", net.hyper().k},
              {"L", net.hyper().layers},
              {"hidden_width", net.hyper().hidden},
              {"feature_spec", net.hyper().feature_spec()},
              {"input_norm",
               {{"distance", {net.hyper().norm.distance_shift, net.hyper().norm.distance_scale}},
                {"flag", {net.hyper().norm.flag_shift, net.hyper().norm.flag_scale}},
                {"confidence",
                 {net.hyper().norm.confidence_shift, net.hyper().norm.confidence_scale}}}},
              {"kernel", std::string(kernel_name(net.hyper().kernel))},
              {"layers", layers},
              {"head", linear_json(net.head())}};
  return doc.dump(1) + "\n";
}

NucNetwork checkpoint_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(text);
    if (doc.at("format_version").get<int>() != 1)
      throw FormatError("unsupported checkpoint format_version");
    NucHyper hyper;
    const auto spec = doc.at("feature_spec").get<std::string>();
    if (spec == kFeatureSpecWithConfidence) {
      hyper.use_confidence = true;
    } else if (spec == kFeatureSpecNoConfidence) {
      hyper.use_confidence = false;
    } else {
      throw FormatError("unknown feature_spec '" + spec + "'");
    }
    hyper.k = doc.at("k").get<std::size_t>();
    hyper.layers = doc.at("L").get<std::size_t>();
    hyper.hidden = doc.at("hidden_width").get<std::size_t>();
    if (doc.contains("input_norm")) {
      const auto& n = doc.at("input_norm");
      auto pair = [&](const char* key, double& shift, double& scale) {
        const auto& v = n.at(key);
        if (v.size() != 2) throw FormatError(std::string("input_norm.") + key + " needs [shift, scale]");
        shift = v[0].get<double>();
        scale = v[1].get<double>();
      };
      pair("distance", hyper.norm.distance_shift, hyper.norm.distance_scale);
      pair("flag", hyper.norm.flag_shift, hyper.norm.flag_scale);
      pair("confidence", hyper.norm.confidence_shift, hyper.norm.confidence_scale);
    }
    hyper.kernel = parse_kernel(doc.value("kernel", std::string("euclidean")));
    NucNetwork net(hyper);
    auto& p = net.params();
    auto read_linear = [&](const json& j, const NucNetwork::Linear& L) {
      const auto& weight = j.at("weight");
      const auto& bias = j.at("bias");
      if (weight.size() != L.out || bias.size() != L.out)
        throw FormatError("checkpoint layer has the wrong output size");
      for (std::size_t o = 0; o < L.out; ++o) {
        if (weight[o].size() != L.in)
          throw FormatError("checkpoint layer has the wrong input size");
        for (std::size_t i = 0; i < L.in; ++i)
          p[L.weight + o * L.in + i] = weight[o][i].get<double>();
        p[L.bias + o] = bias[o].get<double>();
      }
    };
    const auto& layers = doc.at("layers");
    if (layers.size() != hyper.layers)
      throw FormatError("checkpoint layer count does not match L");
    for (std::size_t l = 0; l < hyper.layers; ++l) read_linear(layers[l], net.layers()[l]);
    read_linear(doc.at("head"), net.head());
    for (double v : p)
      if (!std::isfinite(v)) throw FormatError("checkpoint holds a non-finite weight");
    return net;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const NucNetwork& net, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_json(net));
}

NucNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  return checkpoint_from_json(
      {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace nuc
