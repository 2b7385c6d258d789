#include "fedunlearn/config.hpp"

#include <yaml-cpp/yaml.h>

#include "fedunlearn/rng.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fedunlearn {
namespace {

int line_of(const YAML::Node& node) { return node.Mark().is_null() ? 0 : node.Mark().line + 1; }

template <typename T>
T scalar(const YAML::Node& node, const std::string& key, const char* expected) {
  if (!node.IsScalar()) throw ConfigError(key, line_of(node), std::string("expected ") + expected);
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(key, line_of(node), std::string("expected ") + expected + ", got '" + node.Scalar() + "'");
  }
}

using Setter = std::function<void(ExperimentConfig&, const YAML::Node&, const std::string&)>;

Setter set_int(std::function<int&(ExperimentConfig&)> field, int min_value) {
  return [field, min_value](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
    const auto v = scalar<long long>(n, key, "an integer");
    if (v < min_value || v > std::numeric_limits<int>::max()) {
      throw ConfigError(key, line_of(n), "must be >= " + std::to_string(min_value));
    }
    field(c) = static_cast<int>(v);
  };
}

Setter set_size(std::function<std::size_t&(ExperimentConfig&)> field) {
  return [field](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
    const auto v = scalar<long long>(n, key, "a non-negative integer");
    if (v < 0) throw ConfigError(key, line_of(n), "must be >= 0");
    field(c) = static_cast<std::size_t>(v);
  };
}

Setter set_double(std::function<double&(ExperimentConfig&)> field, double lo, double hi, bool lo_open,
                  bool hi_open) {
  return [=](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
    const auto v = scalar<double>(n, key, "a number");
    const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
    if (!ok) {
      std::ostringstream os;
      os << "value " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
      throw ConfigError(key, line_of(n), os.str());
    }
    field(c) = v;
  };
}

Setter set_bool(std::function<bool&(ExperimentConfig&)> field) {
  return [field](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
    field(c) = scalar<bool>(n, key, "true or false");
  };
}

Setter set_path(std::function<std::filesystem::path&(ExperimentConfig&)> field) {
  return [field](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
    field(c) = scalar<std::string>(n, key, "a path");
  };
}

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // data
    t["data.source"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      const auto v = scalar<std::string>(n, key, "synthetic or idx");
      if (v == "synthetic") {
        c.data.source = DataSource::synthetic;
      } else if (v == "idx") {
        c.data.source = DataSource::idx;
      } else {
        throw ConfigError(key, line_of(n), "expected synthetic or idx, got '" + v + "'");
      }
    };
    t["data.train_images"] = set_path([](ExperimentConfig& c) -> auto& { return c.data.train_images; });
    t["data.train_labels"] = set_path([](ExperimentConfig& c) -> auto& { return c.data.train_labels; });
    t["data.test_images"] = set_path([](ExperimentConfig& c) -> auto& { return c.data.test_images; });
    t["data.test_labels"] = set_path([](ExperimentConfig& c) -> auto& { return c.data.test_labels; });
    t["data.max_train"] = set_size([](ExperimentConfig& c) -> auto& { return c.data.max_train; });
    t["data.max_test"] = set_size([](ExperimentConfig& c) -> auto& { return c.data.max_test; });
    t["data.synthetic_train"] = set_size([](ExperimentConfig& c) -> auto& { return c.data.synthetic_train; });
    t["data.synthetic_test"] = set_size([](ExperimentConfig& c) -> auto& { return c.data.synthetic_test; });
    t["data.synthetic_size"] = set_int(
        [](ExperimentConfig& c) -> auto& { return c.data.synthetic.height; }, 4);
    t["data.synthetic_noise"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.data.synthetic.noise; }, 0.0, 1.0, false, false);
    t["data.synthetic_prototype_seed"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      c.data.synthetic.prototype_seed = scalar<std::uint64_t>(n, key, "an unsigned integer");
    };
    t["data.val_fraction"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.data.val_fraction; }, 0.0, 1.0, true, true);
    t["data.exclude_poisoned_validation"] =
        set_bool([](ExperimentConfig& c) -> auto& { return c.data.exclude_poisoned_validation; });
    // model
    t["model.arch"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      c.arch = scalar<std::string>(n, key, "an architecture string");
      try {
        parse_layers(c.arch, Shape{28, 28, 1});
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, line_of(n), e.what());
      }
    };
    // federation
    t["federation.clients"] = set_int([](ExperimentConfig& c) -> auto& { return c.federation.num_clients; }, 2);
    t["federation.rounds"] = set_int([](ExperimentConfig& c) -> auto& { return c.federation.rounds; }, 1);
    t["federation.target"] = set_int([](ExperimentConfig& c) -> auto& { return c.federation.target_client; }, 0);
    t["federation.local_epochs"] = set_int([](ExperimentConfig& c) -> auto& { return c.federation.local_epochs; }, 0);
    t["federation.batch_size"] = set_int([](ExperimentConfig& c) -> auto& { return c.federation.batch_size; }, 1);
    t["federation.learning_rate"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.federation.learning_rate; }, 0.0, kInf, true, true);
    t["federation.momentum"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.federation.momentum; }, 0.0, 1.0, false, true);
    t["federation.aggregation"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      const auto v = scalar<std::string>(n, key, "equal or proportional");
      if (v == "equal") {
        c.federation.aggregation = AggregationMode::equal;
      } else if (v == "proportional") {
        c.federation.aggregation = AggregationMode::proportional;
      } else {
        throw ConfigError(key, line_of(n), "expected equal or proportional, got '" + v + "'");
      }
    };
    t["federation.parallel"] = set_bool([](ExperimentConfig& c) -> auto& { return c.federation.parallel; });
    // trigger
    t["trigger.size"] = set_int([](ExperimentConfig& c) -> auto& { return c.trigger.size; }, 1);
    t["trigger.anchor"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      const auto v = scalar<std::string>(n, key, "a corner name");
      static const std::map<std::string, Corner> corners{{"top-left", Corner::top_left},
                                                         {"top-right", Corner::top_right},
                                                         {"bottom-left", Corner::bottom_left},
                                                         {"bottom-right", Corner::bottom_right}};
      auto it = corners.find(v);
      if (it == corners.end()) throw ConfigError(key, line_of(n), "unknown corner '" + v + "'");
      c.trigger.anchor = it->second;
    };
    t["trigger.pixel_value"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      const auto v = scalar<double>(n, key, "a number");
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, line_of(n), "must be in [0, 1]");
      c.trigger.pixel_value = static_cast<float>(v);
    };
    t["trigger.target_label"] = set_int([](ExperimentConfig& c) -> auto& { return c.trigger.target_label; }, 0);
    t["trigger.poison_fraction"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.trigger.poison_fraction; }, 0.0, 1.0, false, false);
    // unlearn
    t["unlearn.learning_rate"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.unlearn.learning_rate; }, 0.0, kInf, true, true);
    t["unlearn.momentum"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.unlearn.momentum; }, 0.0, 1.0, false, true);
    t["unlearn.batch_size"] = set_int([](ExperimentConfig& c) -> auto& { return c.unlearn.batch_size; }, 1);
    t["unlearn.epochs"] = set_int([](ExperimentConfig& c) -> auto& { return c.unlearn.epochs; }, 1);
    t["unlearn.tau"] = set_double([](ExperimentConfig& c) -> auto& { return c.unlearn.tau; }, 0.0, 1.0, false, false);
    t["unlearn.clip_radius"] =
        set_double([](ExperimentConfig& c) -> auto& { return c.unlearn.clip_radius; }, 0.0, kInf, true, true);
    t["unlearn.delta"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      if (n.IsScalar() && n.Scalar() == "auto") {
        c.unlearn.delta_mode = DeltaMode::auto_third;
        c.unlearn.delta = 0.0;
        return;
      }
      const auto v = scalar<double>(n, key, "auto or a positive number");
      if (!(v > 0.0)) throw ConfigError(key, line_of(n), "must be positive");
      c.unlearn.delta_mode = DeltaMode::explicit_value;
      c.unlearn.delta = v;
    };
    t["unlearn.random_models"] = set_int([](ExperimentConfig& c) -> auto& { return c.unlearn.random_models; }, 1);
    t["unlearn.clean_validation"] = set_bool([](ExperimentConfig& c) -> auto& { return c.unlearn.clean_validation; });
    // posttrain
    t["posttrain.rounds"] = set_int([](ExperimentConfig& c) -> auto& { return c.federation.posttrain.rounds; }, 0);
    t["posttrain.updates"] =
        set_int([](ExperimentConfig& c) -> auto& { return c.federation.posttrain.updates_per_round; }, 1);
    t["posttrain.batch_size"] =
        set_int([](ExperimentConfig& c) -> auto& { return c.federation.posttrain.batch_size; }, 1);
    t["posttrain.learning_rate"] = set_double(
        [](ExperimentConfig& c) -> auto& { return c.federation.posttrain.learning_rate; }, 0.0, kInf, true, true);
    t["posttrain.momentum"] = set_double(
        [](ExperimentConfig& c) -> auto& { return c.federation.posttrain.momentum; }, 0.0, 1.0, false, true);
    // experiment
    t["experiment.scenario"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      const auto v = scalar<std::string>(n, key, "a scenario name");
      if (v == "train") {
        c.scenario = Scenario::train;
      } else if (v == "retrain") {
        c.scenario = Scenario::retrain;
      } else if (v == "unlearn") {
        c.scenario = Scenario::unlearn;
      } else if (v == "full-compare" || v == "compare") {
        c.scenario = Scenario::full_compare;
      } else {
        throw ConfigError(key, line_of(n), "expected train, retrain, unlearn or full-compare, got '" + v + "'");
      }
    };
    t["experiment.seed"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      c.federation.seed = scalar<std::uint64_t>(n, key, "an unsigned integer");
    };
    t["experiment.out"] = set_path([](ExperimentConfig& c) -> auto& { return c.out_dir; });
    t["experiment.resume_from"] = set_path([](ExperimentConfig& c) -> auto& { return c.resume_from; });
    t["experiment.formats"] = [](ExperimentConfig& c, const YAML::Node& n, const std::string& key) {
      std::vector<std::string> formats;
      auto add = [&](const std::string& f) {
        if (f != "csv" && f != "jsonl") throw ConfigError(key, line_of(n), "unknown format '" + f + "'");
        formats.push_back(f);
      };
      if (n.IsSequence()) {
        for (const auto& item : n) add(scalar<std::string>(item, key, "a format name"));
      } else {
        std::stringstream ss(scalar<std::string>(n, key, "a format list"));
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) add(item);
        }
      }
      if (formats.empty()) throw ConfigError(key, line_of(n), "at least one format required");
      c.formats = formats;
    };
    return t;
  }();
  return table;
}

void apply_key(ExperimentConfig& config, const std::string& key, const YAML::Node& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, line_of(value), "unknown key");
  it->second(config, value, key);
}

void apply_root(ExperimentConfig& config, YAML::Node root) {
  if (root.IsNull()) return;
  if (root.IsMap() && root["config"] && root["files"]) root = root["config"];
  if (!root.IsMap()) throw ConfigError("", line_of(root), "top level must be a mapping of sections");
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    if (section.second.IsNull()) continue;
    if (!section.second.IsMap()) throw ConfigError(name, line_of(section.first), "section must be a mapping");
    for (const auto& kv : section.second) {
      apply_key(config, name + "." + kv.first.as<std::string>(), kv.second);
    }
  }
}

std::string path_string(const std::filesystem::path& p) { return p.string(); }

std::string corner_name(Corner c) {
  switch (c) {
    case Corner::top_left:
      return "top-left";
    case Corner::top_right:
      return "top-right";
    case Corner::bottom_left:
      return "bottom-left";
    case Corner::bottom_right:
      return "bottom-right";
  }
  return "bottom-right";
}

}  // namespace

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (key.empty() ? std::string() : "'" + key + "': ") + message),
      key_(std::move(key)),
      line_(line) {}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::train:
      return "train";
    case Scenario::retrain:
      return "retrain";
    case Scenario::unlearn:
      return "unlearn";
    case Scenario::full_compare:
      return "full-compare";
  }
  return "full-compare";
}

std::string_view to_string(DataSource s) { return s == DataSource::idx ? "idx" : "synthetic"; }

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig config;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.mark.line + 1, std::string("syntax error: ") + e.msg);
  }
  apply_root(config, root);
  return config;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(assignment), 0, "override must look like section.key=value");
  }
  const std::string key(assignment.substr(0, eq));
  YAML::Node value;
  try {
    value = YAML::Load(std::string(assignment.substr(eq + 1)));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(key, 0, std::string("bad override value: ") + e.msg);
  }
  if (value.IsNull()) value = YAML::Node(std::string());
  apply_key(config, key, value);
}

void finalize_config(ExperimentConfig& config) {
  auto& d = config.data;
  d.synthetic.width = d.synthetic.height;
  if (d.source == DataSource::idx) {
    const char* env = std::getenv(kDataDirEnv);
    const std::filesystem::path dir = env ? env : "";
    auto fill = [&](std::filesystem::path& p, const char* name, const char* key) {
      if (!p.empty()) return;
      if (dir.empty()) {
        throw ConfigError(key, 0, std::string("required for data.source idx (or set ") + kDataDirEnv + ")");
      }
      p = dir / name;
    };
    fill(d.train_images, "train-images-idx3-ubyte", "data.train_images");
    fill(d.train_labels, "train-labels-idx1-ubyte", "data.train_labels");
    fill(d.test_images, "t10k-images-idx3-ubyte", "data.test_images");
    fill(d.test_labels, "t10k-labels-idx1-ubyte", "data.test_labels");
  }
  if (config.federation.target_client >= config.federation.num_clients) {
    throw ConfigError("federation.target", 0, "must be below federation.clients");
  }
  config.unlearn.seed = derive_seed(config.federation.seed, {tag_hash("unlearn")});
  try {
    config.federation.validate();
    config.unlearn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", 0, e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out.SetFloatPrecision(9);
  out << YAML::BeginMap;

  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "source" << YAML::Value << std::string(to_string(c.data.source));
  if (!c.data.train_images.empty()) out << YAML::Key << "train_images" << YAML::Value << path_string(c.data.train_images);
  if (!c.data.train_labels.empty()) out << YAML::Key << "train_labels" << YAML::Value << path_string(c.data.train_labels);
  if (!c.data.test_images.empty()) out << YAML::Key << "test_images" << YAML::Value << path_string(c.data.test_images);
  if (!c.data.test_labels.empty()) out << YAML::Key << "test_labels" << YAML::Value << path_string(c.data.test_labels);
  out << YAML::Key << "max_train" << YAML::Value << c.data.max_train;
  out << YAML::Key << "max_test" << YAML::Value << c.data.max_test;
  out << YAML::Key << "synthetic_train" << YAML::Value << c.data.synthetic_train;
  out << YAML::Key << "synthetic_test" << YAML::Value << c.data.synthetic_test;
  out << YAML::Key << "synthetic_size" << YAML::Value << c.data.synthetic.height;
  out << YAML::Key << "synthetic_noise" << YAML::Value << c.data.synthetic.noise;
  out << YAML::Key << "synthetic_prototype_seed" << YAML::Value << c.data.synthetic.prototype_seed;
  out << YAML::Key << "val_fraction" << YAML::Value << c.data.val_fraction;
  out << YAML::Key << "exclude_poisoned_validation" << YAML::Value << c.data.exclude_poisoned_validation;
  out << YAML::EndMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "arch" << YAML::Value << c.arch;
  out << YAML::EndMap;

  const auto& f = c.federation;
  out << YAML::Key << "federation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "clients" << YAML::Value << f.num_clients;
  out << YAML::Key << "rounds" << YAML::Value << f.rounds;
  out << YAML::Key << "target" << YAML::Value << f.target_client;
  out << YAML::Key << "local_epochs" << YAML::Value << f.local_epochs;
  out << YAML::Key << "batch_size" << YAML::Value << f.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << f.learning_rate;
  out << YAML::Key << "momentum" << YAML::Value << f.momentum;
  out << YAML::Key << "aggregation" << YAML::Value
      << (f.aggregation == AggregationMode::equal ? "equal" : "proportional");
  out << YAML::Key << "parallel" << YAML::Value << f.parallel;
  out << YAML::EndMap;

  out << YAML::Key << "trigger" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "size" << YAML::Value << c.trigger.size;
  out << YAML::Key << "anchor" << YAML::Value << corner_name(c.trigger.anchor);
  out << YAML::Key << "pixel_value" << YAML::Value << c.trigger.pixel_value;
  out << YAML::Key << "target_label" << YAML::Value << c.trigger.target_label;
  out << YAML::Key << "poison_fraction" << YAML::Value << c.trigger.poison_fraction;
  out << YAML::EndMap;

  const auto& u = c.unlearn;
  out << YAML::Key << "unlearn" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << u.learning_rate;
  out << YAML::Key << "momentum" << YAML::Value << u.momentum;
  out << YAML::Key << "batch_size" << YAML::Value << u.batch_size;
  out << YAML::Key << "epochs" << YAML::Value << u.epochs;
  out << YAML::Key << "tau" << YAML::Value << u.tau;
  out << YAML::Key << "clip_radius" << YAML::Value << u.clip_radius;
  if (u.delta_mode == DeltaMode::auto_third) {
    out << YAML::Key << "delta" << YAML::Value << "auto";
  } else {
    out << YAML::Key << "delta" << YAML::Value << u.delta;
  }
  out << YAML::Key << "random_models" << YAML::Value << u.random_models;
  out << YAML::Key << "clean_validation" << YAML::Value << u.clean_validation;
  out << YAML::EndMap;

  const auto& p = f.posttrain;
  out << YAML::Key << "posttrain" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rounds" << YAML::Value << p.rounds;
  out << YAML::Key << "updates" << YAML::Value << p.updates_per_round;
  out << YAML::Key << "batch_size" << YAML::Value << p.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << p.learning_rate;
  out << YAML::Key << "momentum" << YAML::Value << p.momentum;
  out << YAML::EndMap;

  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << std::string(to_string(c.scenario));
  out << YAML::Key << "seed" << YAML::Value << f.seed;
  out << YAML::Key << "out" << YAML::Value << path_string(c.out_dir);
  if (!c.resume_from.empty()) out << YAML::Key << "resume_from" << YAML::Value << path_string(c.resume_from);
  out << YAML::Key << "formats" << YAML::Value << YAML::Flow << c.formats;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace fedunlearn
