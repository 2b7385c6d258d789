#include "fedunlearn/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fedunlearn/checkpoint.hpp"
#include "fedunlearn/nn.hpp"
#include "fedunlearn/rng.hpp"
#include "json.hpp"

namespace fedunlearn {
namespace {

namespace fs = std::filesystem;

Dataset truncate(Dataset data, std::size_t limit) {
  if (limit == 0 || limit >= data.size()) return data;
  data.features.resize(limit * data.shape.size());
  data.labels.resize(limit);
  data.poisoned.resize(limit);
  return data;
}

std::string local_name(int client_id) {
  std::ostringstream os;
  os << "local_" << std::setw(2) << std::setfill('0') << client_id << ".ckpt";
  return os.str();
}

/// Accumulates artifacts and writes the MANIFEST.
class RunDirectory {
 public:
  RunDirectory(const ExperimentConfig& config, ScenarioResult& result) : config_(config), result_(result) {
    fs::create_directories(config.out_dir);
  }

  fs::path path(const std::string& file) const { return config_.out_dir / file; }

  void add(const std::string& file, const std::string& role) { result_.artifacts.push_back({file, role}); }

  void checkpoint(const ModelParams& model, const std::string& file, const std::string& role) {
    save_checkpoint(model, path(file));
    add(file, role);
  }

  void text(const std::string& content, const std::string& file, const std::string& role) {
    std::ofstream out(path(file), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path(file).string());
    out << content;
    add(file, role);
  }

  void manifest() const {
    std::ofstream out(path("MANIFEST"), std::ios::binary);
    out << "# fedunlearn run manifest; rerun with: fedunlearn " << (config_.scenario == Scenario::full_compare ? "compare" : std::string(to_string(config_.scenario)))
        << " --config MANIFEST\n";
    out << "status: " << (result_.exit_code == 0 ? "ok" : "failed") << "\n";
    if (result_.exit_code != 0) {
      out << "failed_stage: " << std::quoted(result_.failed_stage) << "\n";
      out << "error: " << std::quoted(result_.error) << "\n";
    }
    out << "files:\n";
    for (const auto& a : result_.artifacts) out << "  - {file: " << a.file << ", role: " << std::quoted(a.role) << "}\n";
    out << "  - {file: MANIFEST, role: \"this manifest\"}\n";
    out << "config:\n";
    std::istringstream cfg(serialize_config(config_));
    std::string line;
    while (std::getline(cfg, line)) out << "  " << line << "\n";
  }

 private:
  const ExperimentConfig& config_;
  ScenarioResult& result_;
};

void write_metrics(RunDirectory& dir, const ExperimentConfig& config, const std::vector<MetricsRecord>& records) {
  if (records.empty()) return;
  for (const auto& f : config.formats) {
    if (f == "csv") {
      export_metrics(records, MetricsFormat::csv, dir.path("metrics.csv"));
      dir.add("metrics.csv", "per-round metrics (CSV)");
    } else {
      export_metrics(records, MetricsFormat::jsonl, dir.path("metrics.jsonl"));
      dir.add("metrics.jsonl", "per-round metrics (line-delimited JSON)");
    }
  }
}

void check_invariants(const ScenarioResult& result) {
  for (const auto& r : result.metrics) {
    for (double acc : {r.clean_acc, r.backdoor_acc}) {
      if (!(acc >= 0.0 && acc <= 1.0)) throw std::logic_error("accuracy outside [0,1] in round " + std::to_string(r.round));
    }
  }
  for (std::size_t i = 1; i < result.metrics.size(); ++i) {
    const auto& a = result.metrics[i - 1];
    const auto& b = result.metrics[i];
    if (a.phase == b.phase && b.round <= a.round) throw std::logic_error("round indices not increasing");
  }
  if (result.outcome && !(result.outcome->distance <= result.outcome->delta + 1e-6)) {
    throw std::logic_error("unlearned model left the delta ball");
  }
}

struct Stage {
  std::string* name;
  void operator()(const char* s) const {
    *name = s;
    std::clog << "[fedunlearn] " << s << "\n";
  }
};

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
  const std::uint64_t seed = config.seed();
  Dataset train;
  Dataset test;
  if (config.data.source == DataSource::idx) {
    train = truncate(load_idx(config.data.train_images, config.data.train_labels, Origin::train), config.data.max_train);
    test = truncate(load_idx(config.data.test_images, config.data.test_labels, Origin::test), config.data.max_test);
  } else {
    train = make_synthetic(config.data.synthetic_train, derive_seed(seed, {tag_hash("synthetic-train")}),
                           config.data.synthetic, Origin::train);
    test = make_synthetic(config.data.synthetic_test, derive_seed(seed, {tag_hash("synthetic-test")}),
                          config.data.synthetic, Origin::test);
  }
  PreparedData out;
  out.arch = parse_layers(config.arch, train.shape);
  if (out.arch.num_classes() != train.num_classes) {
    throw std::invalid_argument("model output has " + std::to_string(out.arch.num_classes()) +
                                " classes, data has " + std::to_string(train.num_classes));
  }
  out.target_label = config.trigger.target_label;
  const int n = config.federation.num_clients;
  const int target = config.federation.target_client;
  auto shards = partition(train, n, derive_seed(seed, {tag_hash("partition")}));
  shards[static_cast<std::size_t>(target)] =
      inject_backdoor(shards[static_cast<std::size_t>(target)], config.trigger, derive_seed(seed, {tag_hash("poison")}));
  for (auto& shard : shards) {
    shard = split_train_val(shard, config.data.val_fraction,
                            derive_seed(seed, {tag_hash("split"), static_cast<std::uint64_t>(shard.client_id)}),
                            config.data.exclude_poisoned_validation);
  }
  out.clients = std::move(shards);
  out.clean_test = std::move(test);
  out.backdoor_test = make_backdoor_testset(out.clean_test, config.trigger);
  return out;
}

ScenarioResult run_scenario(const ExperimentConfig& config) {
  ScenarioResult result;
  std::string stage_name = "setup";
  Stage stage{&stage_name};
  std::unique_ptr<RunDirectory> dir;
  try {
    dir = std::make_unique<RunDirectory>(config, result);
    dir->text(serialize_config(config), "config.yaml", "resolved configuration");

    stage("prepare data");
    const PreparedData data = prepare_data(config);
    const Evaluator eval = data.evaluator();
    const auto& fed = config.federation;
    const int target = fed.target_client;
    const auto remaining = without_client(data.clients, target);
    nlohmann::ordered_json report;
    report["scenario"] = to_string(config.scenario);
    report["seed"] = config.seed();
    report["clients"] = fed.num_clients;
    report["target_client"] = target;
    report["params"] = param_count(data.arch);
    report["target_poisoned"] = data.clients[static_cast<std::size_t>(target)].poisoned_count();

    const bool wants_training = config.scenario != Scenario::retrain;
    const bool wants_unlearn = config.scenario == Scenario::unlearn || config.scenario == Scenario::full_compare;
    const bool wants_retrain = config.scenario == Scenario::retrain || config.scenario == Scenario::full_compare;

    RoundState state;
    if (wants_training && !config.resume_from.empty() && config.scenario != Scenario::train) {
      stage("load checkpoints");
      state.global = load_checkpoint(config.resume_from / "global.ckpt");
      bool all_locals = true;
      for (const auto& c : data.clients) {
        const auto p = config.resume_from / local_name(c.client_id);
        if (!fs::exists(p)) {
          all_locals = false;
          break;
        }
        state.local_models.push_back(load_checkpoint(p));
      }
      if (!all_locals) state.local_models.clear();
      for (const auto& c : data.clients) state.counts.push_back(c.train.size());
      state.round = fed.rounds;
    } else if (wants_training) {
      stage("federated training");
      dir->checkpoint(init_model(data.arch, init_seed(fed.seed, Phase::train)), "initial.ckpt", "initial global model");
      auto trained = train_federation(fed, data.clients, data.arch, eval);
      state = std::move(trained.state);
      result.metrics.insert(result.metrics.end(), trained.metrics.begin(), trained.metrics.end());
      dir->checkpoint(state.global, "global.ckpt", "FedAvg global model w^T");
      for (std::size_t k = 0; k < data.clients.size(); ++k) {
        dir->checkpoint(state.local_models[k], local_name(data.clients[k].client_id),
                        "last local model of client " + std::to_string(data.clients[k].client_id));
      }
    }
    if (wants_training) {
      auto [c, b] = eval(state.global);
      result.table.push_back({"FedAvg", c, b});
    }

    std::optional<ModelResult> retrained;
    if (wants_retrain) {
      stage("retrain baseline");
      retrained = retrain_baseline(fed, remaining, data.arch, eval);
      dir->checkpoint(retrained->model, "retrain.ckpt", "retrained-from-scratch model");
      auto [c, b] = eval(retrained->model);
      result.table.push_back({"Retrain", c, b});
    }

    std::vector<MetricsRecord> post_metrics;
    if (wants_unlearn) {
      stage("unlearning");
      auto erased = erase_client(state, data.clients, target, config.unlearn, fed.posttrain, fed.aggregation, fed.seed,
                                 fed.parallel, eval);
      dir->checkpoint(erased.reference, "reference.ckpt", "reference model w_ref");
      dir->checkpoint(erased.outcome.model, "unlearned_local.ckpt", "unlearned local model (UN-Local)");
      dir->checkpoint(erased.global, "unlearned_global.ckpt", "post-trained unlearned model (UN-Global)");
      auto [rc, rb] = eval(erased.reference);
      result.table.push_back({"Reference", rc, rb});
      auto [lc, lb] = eval(erased.outcome.model);
      result.table.push_back({"UN-Local", lc, lb});
      auto [gc, gb] = eval(erased.global);
      result.table.push_back({"UN-Global", gc, gb});

      const auto& target_client = data.clients[static_cast<std::size_t>(target)];
      const ModelParams start = state.local_models.empty() ? state.global
                                                           : state.local_models[static_cast<std::size_t>(target)];
      result.target_loss = {dataset_loss(start, target_client.train),
                            dataset_loss(erased.outcome.model, target_client.train)};
      const auto& o = erased.outcome;
      report["unlearn"] = {{"stop_reason", to_string(o.stop_reason)},
                           {"steps", o.steps},
                           {"final_val_acc", o.final_val_acc},
                           {"delta", o.delta},
                           {"distance_to_reference", o.distance},
                           {"target_train_loss_start", result.target_loss->first},
                           {"target_train_loss_end", result.target_loss->second}};
      result.outcome = std::move(erased.outcome);
      post_metrics = std::move(erased.metrics);
      result.metrics.insert(result.metrics.end(), post_metrics.begin(), post_metrics.end());
    }
    if (retrained) result.metrics.insert(result.metrics.end(), retrained->metrics.begin(), retrained->metrics.end());

    stage("write reports");
    write_metrics(*dir, config, result.metrics);
    if (config.scenario == Scenario::full_compare && retrained) {
      result.recovery = compare_recovery(post_metrics, retrained->metrics, std::max(fed.rounds, fed.posttrain.rounds));
      dir->text(recovery_to_csv(*result.recovery), "recovery.csv", "unlearn vs retrain accuracy per round");
      report["recovery"] = {
          {"target_clean", result.recovery->target_clean},
          {"unlearn_rounds_to_target", result.recovery->unlearn_rounds_to_target
                                           ? nlohmann::json(*result.recovery->unlearn_rounds_to_target)
                                           : nlohmann::json()},
          {"retrain_rounds_to_target", result.recovery->retrain_rounds_to_target
                                           ? nlohmann::json(*result.recovery->retrain_rounds_to_target)
                                           : nlohmann::json()}};
    }
    if (!result.table.empty()) {
      auto& t = report["accuracy"];
      for (const auto& p : result.table) t[p.role] = {{"clean", p.clean}, {"backdoor", p.backdoor}};
      dir->text(format_accuracy_table(result.table, fed.num_clients), "summary.txt", "accuracy summary table");
    }
    dir->text(report.dump(2) + "\n", "report.json", "run report");

    stage("check invariants");
    check_invariants(result);
    stage_name.clear();
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.failed_stage = stage_name;
    result.error = e.what();
    std::cerr << "fedunlearn: " << stage_name << " failed: " << e.what() << "\n";
  }
  if (dir) {
    try {
      dir->manifest();
    } catch (const std::exception& e) {
      std::cerr << "fedunlearn: cannot write MANIFEST: " << e.what() << "\n";
      if (result.exit_code == 0) result.exit_code = 1;
    }
  }
  return result;
}

std::string strip_wall_clock(const std::string& metrics_csv) {
  std::istringstream in(metrics_csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out += (pos == std::string::npos ? line : line.substr(0, pos)) + "\n";
  }
  return out;
}

}  // namespace fedunlearn
