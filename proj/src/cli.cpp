#include "nuc/cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "nuc/baselines.hpp"
#include "nuc/errors.hpp"
#include "nuc/knn_index.hpp"
#include "nuc/metrics.hpp"
#include "nuc/neigh_stats.hpp"
#include "nuc/nuc_model.hpp"
#include "nuc/repr_store.hpp"
#include "nuc/synth_bench.hpp"

namespace nuc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fnv1a64_hex(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string shortest(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
    if (ec != std::errc() || ptr != item.data() + item.size() || k == 0)
      throw UsageError("bad entry '" + item + "' in k list");
    ks.push_back(k);
  }
  if (ks.empty()) throw UsageError("k list is empty");
  return ks;
}

// Everything one subcommand run needs to record in its manifest.
struct Run {
  std::string subcommand;
  CLI::App* app = nullptr;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::uint64_t seed = 0;
};

void write_manifest(const Run& run, const fs::path& manifest_path, double seconds) {
  json params = json::object();
  for (const CLI::Option* opt : run.app->get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string name = opt->get_name();
    name.erase(0, name.find_first_not_of('-'));
    if (opt->get_expected_max() == 0) {
      params[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& res = opt->results();
      params[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      params[name] = opt->get_default_str();
    }
  }
  json inputs = json::object();
  for (const auto& in : run.inputs) inputs[in.string()] = fnv1a64_hex(in);
  json outputs = json::array();
  for (const auto& o : run.outputs) outputs.push_back(o.string());
  json doc = {{"subcommand", run.subcommand},
              {"tool_version", kToolVersion},
              {"seed", run.seed},
              {"parameters", params},
              {"input_digests_fnv1a64", inputs},
              {"outputs", outputs},
              {"duration_seconds", seconds}};
  write_file_atomic(manifest_path, doc.dump(2) + "\n");
}

fs::path manifest_for(const fs::path& output) {
  fs::path m = output;
  m += ".manifest.json";
  return m;
}

ReprSet load_set(Run& run, const std::string& vectors, const std::string& meta) {
  run.inputs.emplace_back(vectors);
  run.inputs.emplace_back(meta);
  return load_repr_set(vectors, meta);
}

std::unordered_map<PointId, double> read_scores(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,score", 0) != 0)
    throw FormatError(path.string() + ": expected header id,score");
  std::unordered_map<PointId, double> scores;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    PointId id = 0;
    double s = 0.0;
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(line.data(), line.data() + comma, id);
    auto r2 = comma == std::string::npos
                  ? std::from_chars_result{line.data(), std::errc::invalid_argument}
                  : std::from_chars(line.data() + comma + 1, end, s);
    if (comma == std::string::npos || r1.ec != std::errc() ||
        r1.ptr != line.data() + comma || r2.ec != std::errc() || r2.ptr != end)
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected id,score");
    scores[id] = s;
  }
  return scores;
}

void write_scores(const fs::path& path, std::span<const PointId> ids,
                  std::span<const double> scores) {
  std::string csv = "id,score\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    csv += std::to_string(ids[i]) + ',' + shortest(scores[i]) + '\n';
  write_file_atomic(path, csv);
}

std::pair<std::string, std::string> split_named(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
    throw UsageError("expected NAME=PATH, got '" + spec + "'");
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::optional<double> overlap, separation, ood_offset;
};

void cmd_synth(const SynthArgs& a, Run& run, std::ostream& out, std::ostream& err) {
  SynthConfig cfg;
  if (!a.config.empty()) {
    run.inputs.emplace_back(a.config);
    cfg = parse_synth_config(read_text(a.config));
  }
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.overlap) cfg.overlap = *a.overlap;
  if (a.separation) cfg.separation = *a.separation;
  if (a.ood_offset) cfg.ood_offset = *a.ood_offset;
  if (run.app->count("--seed")) cfg.seed = a.seed;
  run.seed = cfg.seed;

  SynthData data = generate(cfg);
  for (const auto& w : data.warnings) err << "warning: " << w << "\n";

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  auto emit = [&](const std::string& name, const ReprSet& set, const FloatMatrix& logits) {
    if (set.count() == 0) return;
    write_repr_set(set, dir / (name + ".nucr"), dir / (name + ".csv"));
    write_matrix(dir / (name + ".logits.nucr"), logits);
    for (const char* suffix : {".nucr", ".csv", ".logits.nucr"})
      run.outputs.push_back(dir / (name + suffix));
  };
  emit("train", data.train, data.train_logits);
  emit("test_in", data.test_in, data.test_in_logits);
  emit("test_ood", data.test_ood, data.test_ood_logits);

  std::ostringstream resolved;
  resolved << "n_classes=" << cfg.n_classes << "\ndim=" << cfg.dim
           << "\ntrain_per_class=" << cfg.train_per_class
           << "\ntest_per_class=" << cfg.test_per_class
           << "\nseparation=" << shortest(cfg.separation)
           << "\noverlap=" << shortest(cfg.overlap)
           << "\nhard_fraction=" << shortest(cfg.hard_fraction)
           << "\nhard_scale=" << shortest(cfg.hard_scale) << "\nood_clusters=" << cfg.ood_clusters
           << "\nood_points_per_cluster=" << cfg.ood_points_per_cluster
           << "\nood_offset=" << shortest(cfg.ood_offset) << "\nseed=" << cfg.seed << "\n";
  write_file_atomic(dir / "synth.conf", resolved.str());
  run.outputs.push_back(dir / "synth.conf");

  const auto acc = [](const ReprSet& s) {
    const auto f = correctness_labels(s);
    return 100.0 * static_cast<double>(std::count(f.begin(), f.end(), 1)) /
           static_cast<double>(f.size());
  };
  out << "train: " << data.train.count() << " points, upstream accuracy "
      << acc(data.train) << "%\n"
      << "test_in: " << data.test_in.count() << " points, upstream accuracy "
      << acc(data.test_in) << "%\n"
      << "test_ood: " << data.test_ood.count() << " points\n";
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string index_vectors, index_meta, query_vectors, query_meta;
  std::string k_list = "1,2,5,10,20,50,100,200";
  std::string kernel = "euclidean";
  bool self_exclude = false;
  std::string out;
};

void cmd_stats(const StatsArgs& a, Run& run, std::ostream& out) {
  const auto ks = parse_k_list(a.k_list);
  const DistanceKernel kernel = parse_kernel(a.kernel);
  const ReprSet index_set = load_set(run, a.index_vectors, a.index_meta);
  const bool separate = !a.query_vectors.empty();
  if (separate != !a.query_meta.empty())
    throw UsageError("--query-vectors and --query-meta go together");
  const ReprSet query_set =
      separate ? load_set(run, a.query_vectors, a.query_meta) : index_set;
  const KnnIndex index(index_set, kernel);
  const auto rows = stats_sweep(query_set, index, ks, a.self_exclude);
  const std::string csv = sweep_to_csv(rows);
  write_file_atomic(a.out, csv);
  run.outputs.emplace_back(a.out);
  out << csv;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string vectors, meta, out;
  std::string kernel = "euclidean";
  bool no_confidence = false;
  TrainConfig cfg;
};

void add_train_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--k", a.cfg.k, "Neighbors per point")->capture_default_str();
  sub->add_option("--lr", a.cfg.lr_initial, "Initial learning rate")->capture_default_str();
  sub->add_option("--lr-annealed", a.cfg.lr_annealed, "Learning rate after the anneal step")
      ->capture_default_str();
  sub->add_option("--anneal-step", a.cfg.anneal_step, "Optimizer step at which lr drops")
      ->capture_default_str();
  sub->add_option("--epochs", a.cfg.epochs, "Passes over the training set")
      ->capture_default_str();
  sub->add_option("--seed", a.cfg.seed, "Seed for initialization and data order")
      ->capture_default_str();
  sub->add_option("--batch", a.cfg.batch_size, "Mini-batch size")->capture_default_str();
  sub->add_option("--hidden", a.cfg.hidden, "Hidden width")->capture_default_str();
  sub->add_option("--layers", a.cfg.layers, "Aggregation layers (L)")->capture_default_str();
  sub->add_option("--kernel", a.kernel, "euclidean | cosine")->capture_default_str();
  sub->add_flag("--no-confidence", a.no_confidence,
                "Drop the upstream confidence input (ablation)");
}

TrainConfig resolved(const TrainArgs& a) {
  TrainConfig cfg = a.cfg;
  cfg.kernel = parse_kernel(a.kernel);
  cfg.use_confidence = !a.no_confidence;
  return cfg;
}

void cmd_train(const TrainArgs& a, Run& run, std::ostream& out) {
  const TrainConfig cfg = resolved(a);
  cfg.validate();
  run.seed = cfg.seed;
  const ReprSet set = load_set(run, a.vectors, a.meta);
  const KnnIndex index(set, cfg.kernel);
  TrainLog log;
  const NucNetwork net = train(set, index, cfg, &log);
  save_checkpoint(net, a.out);
  run.outputs.emplace_back(a.out);
  out << "trained " << log.steps << " steps; mean loss " << log.initial_mean_loss;
  for (double l : log.epoch_mean_loss) out << " -> " << l;
  out << "\n";
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string method;
  std::string index_vectors, index_meta, query_vectors, query_meta;
  std::string checkpoint, query_logits, calib_logits, calib_meta;
  std::string kernel = "euclidean";
  std::size_t k = 200;
  std::uint64_t seed = 0;
  std::string out;
};

std::vector<double> score_softmax_cal(const ScoreArgs& a, Run& run, const ReprSet& query) {
  if (a.query_logits.empty())
    throw UnsupportedInputError("softmax-cal needs class logits (--query-logits)");
  run.inputs.emplace_back(a.query_logits);
  const FloatMatrix logits = read_matrix(a.query_logits);
  if (logits.rows != query.count())
    throw ConsistencyError("logits file rows do not match the query metadata");

  if (!a.calib_logits.empty() || !a.calib_meta.empty()) {
    if (a.calib_logits.empty() || a.calib_meta.empty())
      throw UsageError("--calib-logits and --calib-meta go together");
    run.inputs.emplace_back(a.calib_logits);
    run.inputs.emplace_back(a.calib_meta);
    const FloatMatrix calib = read_matrix(a.calib_logits);
    const ReprSet calib_meta = load_metadata(a.calib_meta);
    return calibrated_softmax_score(logits, fit_temperature(calib, calib_meta.labels));
  }

  // Cross-fitting: each half is scored with the temperature fitted on the other.
  const std::array<double, 2> halves = {0.5, 0.5};
  const auto parts = split_rows(query.labels, halves, a.seed);
  std::vector<double> scores(query.count());
  for (std::size_t p = 0; p < 2; ++p) {
    const auto& fit_rows = parts[1 - p];
    FloatMatrix fit{fit_rows.size(), logits.cols, {}};
    std::vector<ClassId> fit_labels;
    for (std::size_t r : fit_rows) {
      auto row = logits.row(r);
      fit.data.insert(fit.data.end(), row.begin(), row.end());
      fit_labels.push_back(query.labels[r]);
    }
    const TemperatureModel t = fit_temperature(fit, fit_labels);
    for (std::size_t r : parts[p]) {
      FloatMatrix one{1, logits.cols, {logits.row(r).begin(), logits.row(r).end()}};
      scores[r] = calibrated_softmax_score(one, t)[0];
    }
  }
  return scores;
}

void cmd_score(const ScoreArgs& a, Run& run, std::ostream& out) {
  run.seed = a.seed;
  static const std::vector<std::string> methods = {
      "nuc", "softmax", "softmax-cal", "kde1", "kde2", "kde3", "mahalanobis"};
  if (std::find(methods.begin(), methods.end(), a.method) == methods.end())
    throw UsageError("unknown --method '" + a.method + "'");

  const bool meta_only = a.method == "softmax" || a.method == "softmax-cal";
  ReprSet query;
  if (meta_only) {
    run.inputs.emplace_back(a.query_meta);
    query = load_metadata(a.query_meta);
  } else {
    if (a.query_vectors.empty()) throw UsageError("--query-vectors is required for " + a.method);
    query = load_set(run, a.query_vectors, a.query_meta);
  }

  std::vector<double> scores;
  if (a.method == "softmax") {
    scores = softmax_score(query);
  } else if (a.method == "softmax-cal") {
    scores = score_softmax_cal(a, run, query);
  } else {
    if (a.index_vectors.empty() || a.index_meta.empty())
      throw UsageError("--index-vectors and --index-meta are required for " + a.method);
    const ReprSet index_set = load_set(run, a.index_vectors, a.index_meta);
    if (a.method == "mahalanobis") {
      scores = mahalanobis_score(fit_mahalanobis(index_set), query);
    } else if (a.method == "nuc") {
      if (a.checkpoint.empty()) throw UsageError("--checkpoint is required for nuc");
      run.inputs.emplace_back(a.checkpoint);
      const NucNetwork net = load_checkpoint(a.checkpoint);
      const KnnIndex index(index_set, net.hyper().kernel);
      scores = score(net, index, query);
    } else {
      const KnnIndex index(index_set, parse_kernel(a.kernel));
      const KdeVariant v = a.method == "kde1"   ? KdeVariant::eq1
                           : a.method == "kde2" ? KdeVariant::eq2
                                                : KdeVariant::eq3;
      scores = kde_baseline_scores(index, query, v, a.k);
    }
  }
  write_scores(a.out, query.ids, scores);
  run.outputs.emplace_back(a.out);
  out << "wrote " << scores.size() << " " << a.method << " scores to " << a.out << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string task = "misclassification";
  std::string meta, ood_meta;
  std::vector<std::string> scores, ood_scores;
  bool include_misclassified = false;
  std::string task_name;
  std::string out;
};

void cmd_eval(const EvalArgs& a, Run& run, std::ostream& out) {
  if (a.task != "misclassification" && a.task != "ood")
    throw UsageError("--task must be misclassification or ood");
  if (a.scores.empty()) throw UsageError("at least one --scores NAME=PATH is required");
  run.inputs.emplace_back(a.meta);
  const ReprSet in_meta = load_metadata(a.meta);
  ReprSet ood_meta;
  if (a.task == "ood") {
    if (a.ood_meta.empty()) throw UsageError("--ood-meta is required for the ood task");
    run.inputs.emplace_back(a.ood_meta);
    ood_meta = load_metadata(a.ood_meta);
  }
  std::map<std::string, std::string> ood_files;
  for (const auto& spec : a.ood_scores) ood_files.insert(split_named(spec));

  const auto correct = correctness_labels(in_meta);
  std::vector<EvalReport> reports;
  for (const auto& spec : a.scores) {
    const auto [method, path] = split_named(spec);
    run.inputs.emplace_back(path);
    const auto in_scores = read_scores(path);
    std::unordered_map<PointId, double> ood_scores;
    if (auto it = ood_files.find(method); it != ood_files.end()) {
      run.inputs.emplace_back(it->second);
      ood_scores = read_scores(it->second);
    }
    auto lookup = [&](const std::unordered_map<PointId, double>& m, PointId id,
                      const std::string& file) {
      auto it = m.find(id);
      if (it == m.end())
        throw ConsistencyError("no score for id " + std::to_string(id) + " in " + file);
      return it->second;
    };

    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < in_meta.count(); ++i) {
      if (a.task == "ood" && !correct[i] && !a.include_misclassified) continue;
      scores.push_back(lookup(in_scores, in_meta.ids[i], path));
      labels.push_back(a.task == "ood" ? 0 : static_cast<std::uint8_t>(1 - correct[i]));
    }
    if (a.task == "ood") {
      const auto& src = ood_scores.empty() ? in_scores : ood_scores;
      const std::string file = ood_scores.empty() ? path : ood_files[method];
      for (PointId id : ood_meta.ids) {
        scores.push_back(lookup(src, id, file));
        labels.push_back(1);
      }
    }
    reports.push_back(evaluate_task(scores, labels, method,
                                    a.task_name.empty() ? a.task : a.task_name));
  }
  write_file_atomic(a.out, reports_to_csv(reports));
  run.outputs.emplace_back(a.out);
  out << reports_to_table(reports);
}

// ---------------------------------------------------------------- ksweep

struct KsweepArgs {
  std::string train_vectors, train_meta, test_vectors, test_meta;
  std::string k_list = "1,2,5,10,20,50,100,200";
  std::string out;
  TrainArgs train;
};

void cmd_ksweep(const KsweepArgs& a, Run& run, std::ostream& out) {
  TrainConfig base = resolved(a.train);
  base.validate();
  const auto ks = parse_k_list(a.k_list);
  run.seed = base.seed;
  const ReprSet train_set = load_set(run, a.train_vectors, a.train_meta);
  const ReprSet test_set = load_set(run, a.test_vectors, a.test_meta);
  const KnnIndex index(train_set, base.kernel);
  std::string csv = "k,auroc_with_confidence,auroc_without_confidence\n";
  for (const auto& row : k_sweep(train_set, test_set, index, ks, base))
    csv += std::to_string(row.k) + ',' + shortest(row.auroc_with_confidence) + ',' +
           shortest(row.auroc_without_confidence) + '\n';
  write_file_atomic(a.out, csv);
  run.outputs.emplace_back(a.out);
  out << csv;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case Error::Category::usage: return 1;
    case Error::Category::data: return 2;
    case Error::Category::numeric: return 3;
  }
  return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neighborhood uncertainty classifier toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
  s_synth->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s_synth->add_option("--config", synth.config, "key=value config file");
  s_synth->add_option("--set", synth.sets, "Override one config key (key=value)");
  s_synth->add_option("--seed", synth.seed, "Generator seed");
  s_synth->add_option("--overlap", synth.overlap, "Share of points drawn between centers");
  s_synth->add_option("--separation", synth.separation, "Mean center distance (sigma)");
  s_synth->add_option("--ood-offset", synth.ood_offset, "OOD cluster offset (sigma)");

  StatsArgs stats;
  auto* s_stats = app.add_subcommand("stats", "Neighborhood statistics as a function of k");
  s_stats->add_option("--index-vectors", stats.index_vectors)->required();
  s_stats->add_option("--index-meta", stats.index_meta)->required();
  s_stats->add_option("--query-vectors", stats.query_vectors,
                      "Query set (defaults to the index set)");
  s_stats->add_option("--query-meta", stats.query_meta);
  s_stats->add_option("--k-list", stats.k_list)->capture_default_str();
  s_stats->add_option("--kernel", stats.kernel)->capture_default_str();
  s_stats->add_flag("--self-exclude", stats.self_exclude,
                    "Drop each query's own id from its neighbors");
  s_stats->add_option("--out", stats.out, "Sweep CSV")->required();

  TrainArgs train_args;
  auto* s_train = app.add_subcommand("train", "Train the neighborhood uncertainty classifier");
  s_train->add_option("--vectors", train_args.vectors)->required();
  s_train->add_option("--meta", train_args.meta)->required();
  s_train->add_option("--out", train_args.out, "Checkpoint JSON")->required();
  add_train_options(s_train, train_args);

  ScoreArgs score_args;
  auto* s_score = app.add_subcommand("score", "Score query points with one method");
  s_score->add_option("--method", score_args.method,
                      "nuc | softmax | softmax-cal | kde1 | kde2 | kde3 | mahalanobis")
      ->required();
  s_score->add_option("--index-vectors", score_args.index_vectors);
  s_score->add_option("--index-meta", score_args.index_meta);
  s_score->add_option("--query-vectors", score_args.query_vectors);
  s_score->add_option("--query-meta", score_args.query_meta)->required();
  s_score->add_option("--checkpoint", score_args.checkpoint);
  s_score->add_option("--query-logits", score_args.query_logits);
  s_score->add_option("--calib-logits", score_args.calib_logits);
  s_score->add_option("--calib-meta", score_args.calib_meta);
  s_score->add_option("--kernel", score_args.kernel)->capture_default_str();
  s_score->add_option("--k", score_args.k, "Neighbors for kde1/kde2/kde3")
      ->capture_default_str();
  s_score->add_option("--seed", score_args.seed, "Seed for the calibration split")
      ->capture_default_str();
  s_score->add_option("--out", score_args.out, "Scores CSV (id,score)")->required();

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "AUROC / AUPR-Out / AUPR-In report");
  s_eval->add_option("--task", eval.task, "misclassification | ood")->capture_default_str();
  s_eval->add_option("--meta", eval.meta, "In-distribution metadata")->required();
  s_eval->add_option("--ood-meta", eval.ood_meta, "OOD metadata (ood task)");
  s_eval->add_option("--scores", eval.scores, "NAME=PATH scores for the in-distribution set")
      ->required();
  s_eval->add_option("--ood-scores", eval.ood_scores, "NAME=PATH scores for the OOD set");
  s_eval->add_flag("--include-misclassified", eval.include_misclassified,
                   "Keep misclassified in-distribution points in the ood task");
  s_eval->add_option("--task-name", eval.task_name, "Label for the task column");
  s_eval->add_option("--out", eval.out, "Report CSV")->required();

  KsweepArgs ksweep;
  auto* s_ksweep = app.add_subcommand("ksweep", "NUC AUROC vs k, with and without confidence");
  s_ksweep->add_option("--train-vectors", ksweep.train_vectors)->required();
  s_ksweep->add_option("--train-meta", ksweep.train_meta)->required();
  s_ksweep->add_option("--test-vectors", ksweep.test_vectors)->required();
  s_ksweep->add_option("--test-meta", ksweep.test_meta)->required();
  s_ksweep->add_option("--k-list", ksweep.k_list)->capture_default_str();
  s_ksweep->add_option("--out", ksweep.out, "Sweep CSV")->required();
  add_train_options(s_ksweep, ksweep.train);
  s_ksweep->remove_option(s_ksweep->get_option("--k"));
  s_ksweep->remove_option(s_ksweep->get_option("--no-confidence"));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every other parse failure is a usage error.
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  Run run;
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::path manifest;
    if (*s_synth) {
      run.subcommand = "synth";
      run.app = s_synth;
      cmd_synth(synth, run, out, err);
      manifest = fs::path(synth.out_dir) / "manifest.json";
    } else if (*s_stats) {
      run.subcommand = "stats";
      run.app = s_stats;
      cmd_stats(stats, run, out);
      manifest = manifest_for(stats.out);
    } else if (*s_train) {
      run.subcommand = "train";
      run.app = s_train;
      cmd_train(train_args, run, out);
      manifest = manifest_for(train_args.out);
    } else if (*s_score) {
      run.subcommand = "score";
      run.app = s_score;
      cmd_score(score_args, run, out);
      manifest = manifest_for(score_args.out);
    } else if (*s_eval) {
      run.subcommand = "eval";
      run.app = s_eval;
      cmd_eval(eval, run, out);
      manifest = manifest_for(eval.out);
    } else {
      run.subcommand = "ksweep";
      run.app = s_ksweep;
      cmd_ksweep(ksweep, run, out);
      manifest = manifest_for(ksweep.out);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(run, manifest, seconds);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace nuc
