#include "gla/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace gla::cli {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kMetricNames = {"feature_distance", "latent_moments",
                                               "latent_histogram"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + where + k + "'");
}

double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError("config key '" + key + "' must be finite");
  return v;
}

std::uint64_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<long long>() < 0))
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return j.get<std::string>();
}

data::Vec2 get_vec2(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("config key '" + key + "' must be [x, y]");
  return {get_number(j[0], key), get_number(j[1], key)};
}

template <typename F>
auto named(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

train::TrainConfig preset_config(const std::string& name) {
  if (name == "digit") return train::digit_preset();
  if (name == "object") return train::object_preset();
  if (name == "synthetic") return train::synthetic_preset();
  throw ConfigError("unknown preset '" + name + "' (expected digit, object or synthetic)");
}

void apply_train(const json& t, train::TrainConfig& c) {
  reject_unknown(t,
                 {"variant", "alpha", "beta", "kappa", "delta_r", "lr", "batch", "epochs",
                  "optimizer", "mcd_inner_n", "decoder_final"},
                 "train.");
  for (const auto& [k, v] : t.items()) {
    const std::string key = "train." + k;
    if (k == "variant") c.variant = named(key, [&] { return train::variant_from_name(get_string(v, key)); });
    if (k == "alpha") c.weights.alpha = get_number(v, key);
    if (k == "beta") c.weights.beta = get_number(v, key);
    if (k == "kappa") c.weights.kappa = get_number(v, key);
    if (k == "delta_r") c.weights.delta_r = get_number(v, key);
    if (k == "lr") c.lr = get_number(v, key);
    if (k == "batch") c.batch = get_count(v, key);
    if (k == "epochs") c.epochs = get_count(v, key);
    if (k == "optimizer")
      c.optimizer = named(key, [&] { return train::optimizer_from_name(get_string(v, key)); });
    if (k == "mcd_inner_n") c.mcd_inner_n = get_count(v, key);
    if (k == "decoder_final")
      c.decoder_final = named(key, [&] { return model::final_activation_from_name(get_string(v, key)); });
  }
}

void apply_data(const json& d, DataSpec& spec, const fs::path& base_dir) {
  reject_unknown(d, {"synthetic", "task", "n", "angle_deg", "translation", "scale", "pivot", "csv"},
                 "data.");
  const int sources = static_cast<int>(d.contains("synthetic")) + static_cast<int>(d.contains("task")) +
                      static_cast<int>(d.contains("csv"));
  if (sources > 1) throw ConfigError("data: give only one of 'synthetic', 'task' or 'csv'");
  for (const auto& [k, v] : d.items()) {
    const std::string key = "data." + k;
    if (k == "synthetic")
      spec.synthetic = named(key, [&] { return data::synthetic_preset_from_name(get_string(v, key)); });
    if (k == "task") spec.task = named(key, [&] { return data::task_kind_from_name(get_string(v, key)); });
    if (k == "n") spec.n = get_count(v, key);
    if (k == "angle_deg") spec.shift.angle_deg = get_number(v, key);
    if (k == "translation") spec.shift.translation = get_vec2(v, key);
    if (k == "scale") spec.shift.scale = get_number(v, key);
    if (k == "pivot") spec.shift.pivot = get_vec2(v, key);
    if (k == "csv") {
      fs::path p = get_string(v, key);
      spec.csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
  }
  if (spec.n < 2) throw ConfigError("data.n must be >= 2");
  if (!(spec.shift.scale > 0.0)) throw ConfigError("data.scale must be > 0");
}

void apply_ablation(const json& a, ExperimentConfig& cfg) {
  reject_unknown(a, {"variants", "seeds", "sweep"}, "ablation.");
  if (a.contains("variants")) {
    const json& v = a["variants"];
    if (!v.is_array() || v.empty()) throw ConfigError("ablation.variants must be a non-empty list");
    cfg.ablation_ids.clear();
    for (const auto& id : v) {
      const auto n = static_cast<int>(get_count(id, "ablation.variants"));
      named("ablation.variants", [&] { return train::ablation_variant(n); });
      cfg.ablation_ids.push_back(n);
    }
  }
  if (a.contains("seeds")) {
    const json& s = a["seeds"];
    if (!s.is_array() || s.empty()) throw ConfigError("ablation.seeds must be a non-empty list");
    for (const auto& v : s) cfg.seeds.push_back(get_count(v, "ablation.seeds"));
  }
  if (a.contains("sweep")) {
    const json& sw = a["sweep"];
    reject_unknown(sw, {"alphas", "betas"}, "ablation.sweep.");
    auto list = [&](const char* key, std::vector<double>& out) {
      const std::string full = std::string("ablation.sweep.") + key;
      if (!sw.contains(key)) throw ConfigError(full + " is required");
      const json& l = sw[key];
      if (!l.is_array() || l.empty()) throw ConfigError(full + " must be a non-empty list");
      for (const auto& x : l) {
        out.push_back(get_number(x, full));
        if (out.back() < 0.0) throw ConfigError(full + " values must be >= 0");
      }
    };
    list("alphas", cfg.sweep_alphas);
    list("betas", cfg.sweep_betas);
  }
}

void apply_gradcheck(const json& g, ExperimentConfig& cfg) {
  reject_unknown(g, {"seeds", "corrupt"}, "gradcheck.");
  if (g.contains("seeds")) {
    cfg.gradcheck_seeds = get_count(g["seeds"], "gradcheck.seeds");
    if (cfg.gradcheck_seeds == 0) throw ConfigError("gradcheck.seeds must be >= 1");
  }
  if (g.contains("corrupt")) {
    const std::string op = get_string(g["corrupt"], "gradcheck.corrupt");
    cfg.corrupt_op = ad::op_from_name(op);
    if (!cfg.corrupt_op || *cfg.corrupt_op == ad::Op::kLeaf)
      throw ConfigError("gradcheck.corrupt: unknown primitive '" + op + "'");
  }
}

}  // namespace

Command command_from_name(const std::string& s) {
  if (s == "synthetic") return Command::kSynthetic;
  if (s == "adapt") return Command::kAdapt;
  if (s == "ablation") return Command::kAblation;
  if (s == "gradcheck") return Command::kGradcheck;
  if (s == "report") return Command::kReport;
  throw ConfigError("unknown command '" + s + "'");
}

std::string command_name(Command c) {
  switch (c) {
    case Command::kSynthetic: return "synthetic";
    case Command::kAdapt: return "adapt";
    case Command::kAblation: return "ablation";
    case Command::kGradcheck: return "gradcheck";
    case Command::kReport: return "report";
  }
  return "?";
}

std::uint64_t parse_seed(const std::string& text, const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (text.empty() || text[0] == '-' || text[0] == '+') throw std::invalid_argument(text);
    v = std::stoull(text, &pos, 10);
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + ": not a non-negative integer: '" + text + "'");
  }
  if (pos != text.size()) throw ConfigError(std::string(what) + ": not a non-negative integer: '" + text + "'");
  return v;
}

ExperimentConfig parse_config(Command cmd, const json& doc, const Overrides& ov, const char* env_seed,
                              const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  reject_unknown(doc, {"preset", "seed", "out", "jobs", "metrics", "train", "data", "ablation", "gradcheck"},
                 "");
  ExperimentConfig cfg;
  cfg.command = cmd;
  cfg.preset = doc.contains("preset") ? get_string(doc["preset"], "preset")
               : cmd == Command::kSynthetic ? "synthetic"
                                            : "digit";
  cfg.train = preset_config(cfg.preset);
  if (doc.contains("train")) apply_train(doc["train"], cfg.train);
  if (doc.contains("data")) apply_data(doc["data"], cfg.data, base_dir);
  if (doc.contains("ablation")) apply_ablation(doc["ablation"], cfg);
  if (doc.contains("gradcheck")) apply_gradcheck(doc["gradcheck"], cfg);
  if (doc.contains("metrics")) {
    const json& m = doc["metrics"];
    if (!m.is_array()) throw ConfigError("metrics must be a list");
    for (const auto& v : m) {
      const std::string name = get_string(v, "metrics");
      if (std::find(kMetricNames.begin(), kMetricNames.end(), name) == kMetricNames.end())
        throw ConfigError("unknown metric '" + name + "'");
      cfg.metrics.push_back(name);
    }
  }
  if (doc.contains("out")) {
    fs::path p = get_string(doc["out"], "out");
    cfg.out_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (doc.contains("jobs")) cfg.jobs = get_count(doc["jobs"], "jobs");
  if (doc.contains("seed")) cfg.train.seed = get_count(doc["seed"], "seed");

  if (env_seed && *env_seed) cfg.train.seed = parse_seed(env_seed, "GLA_SEED");
  if (ov.seed) cfg.train.seed = *ov.seed;
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.jobs) cfg.jobs = *ov.jobs;
  if (cfg.jobs == 0) throw ConfigError("jobs must be >= 1");

  if (cmd == Command::kSynthetic) {
    if (!cfg.data.synthetic)
      throw ConfigError("synthetic: data.synthetic must name one of gauss_same_cov, gauss_same_mean, moons, blobs");
    if (doc.contains("train") && doc["train"].contains("variant") && cfg.train.variant != train::Variant::kDalOnly)
      throw ConfigError("synthetic: train.variant must be dal_only");
    cfg.train.variant = train::Variant::kDalOnly;
  } else if (cfg.data.synthetic && cmd != Command::kGradcheck && cmd != Command::kReport) {
    throw ConfigError(command_name(cmd) + ": data.synthetic presets are unlabeled; use data.task or data.csv");
  }
  if ((cmd == Command::kAdapt || cmd == Command::kAblation) && cfg.train.variant == train::Variant::kDalOnly)
    throw ConfigError(command_name(cmd) + ": variant dal_only belongs to the synthetic command");
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(Command cmd, const std::optional<fs::path>& file, const Overrides& ov) {
  json doc = json::object();
  fs::path base;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file '" + file->string() + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + file->string() + "' is not valid JSON: " + e.what());
    }
    base = file->parent_path();
  }
  return parse_config(cmd, doc, ov, std::getenv("GLA_SEED"), base);
}

void validate_paths(const ExperimentConfig& cfg) {
  if (cfg.data.csv && !fs::is_regular_file(*cfg.data.csv))
    throw ConfigError("data.csv: no such file '" + cfg.data.csv->string() + "'");
  const bool needs_out = cfg.command != Command::kGradcheck || !cfg.out_dir.empty();
  if (!needs_out) return;
  if (cfg.out_dir.empty()) throw ConfigError("output directory not given (use --out or \"out\")");
  if (!fs::is_directory(cfg.out_dir))
    throw ConfigError("output directory does not exist: '" + cfg.out_dir.string() + "'");
  if (cfg.command == Command::kReport) return;
  const fs::path probe = cfg.out_dir / ".gla_write_probe";
  {
    std::ofstream o(probe);
    if (!o) throw ConfigError("output directory is not writable: '" + cfg.out_dir.string() + "'");
  }
  std::error_code ec;
  fs::remove(probe, ec);
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["command"] = command_name(command);
  j["preset"] = preset;
  j["seed"] = train.seed;
  j["train"] = train.to_json();
  ordered_json d;
  if (data.synthetic) {
    d["synthetic"] = data::synthetic_preset_name(*data.synthetic);
    d["n"] = data.n;
  } else if (data.csv) {
    d["csv"] = data.csv->string();
  } else {
    d["task"] = data::task_kind_name(data.task);
    d["n"] = data.n;
    d["angle_deg"] = data.shift.angle_deg;
    d["translation"] = data.shift.translation;
    d["scale"] = data.shift.scale;
    if (data.shift.pivot) d["pivot"] = *data.shift.pivot;
  }
  j["data"] = d;
  j["metrics"] = metrics;
  if (command == Command::kAblation) {
    j["ablation"]["variants"] = ablation_ids;
    j["ablation"]["seeds"] = seeds.empty() ? std::vector<std::uint64_t>{train.seed} : seeds;
    if (!sweep_alphas.empty()) {
      j["ablation"]["sweep"]["alphas"] = sweep_alphas;
      j["ablation"]["sweep"]["betas"] = sweep_betas;
    }
  }
  if (command == Command::kGradcheck) {
    j["gradcheck"]["seeds"] = gradcheck_seeds;
    if (corrupt_op) j["gradcheck"]["corrupt"] = std::string(ad::op_name(*corrupt_op));
  }
  return j;
}

}  // namespace gla::cli
