#include "gla/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "gla/checks.hpp"
#include "gla/metrics.hpp"
#include "gla/model.hpp"
#include "gla/rng.hpp"

namespace gla::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kHistogramBins = 40;
constexpr double kHistogramLo = -4.0;
constexpr double kHistogramHi = 4.0;

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(cfg.to_json().dump()); }

void write_common(const ExperimentConfig& cfg, train::TrainResult& r, const data::DomainPair& d) {
  r.report.summary["command"] = command_name(cfg.command);
  r.report.summary["provenance"] = d.provenance();
  r.report.write_csv(cfg.out_dir / "metrics.csv");
  r.report.write_timing_csv(cfg.out_dir / "timing.csv");
  r.report.write_summary_json(cfg.out_dir / "summary.json");
  model::save_checkpoint(r.model, cfg.out_dir / "checkpoint.bin", config_hash(cfg));
  ordered_json echo = cfg.to_json();
  echo["provenance"] = d.provenance();
  write_json(cfg.out_dir / "config_echo.json", echo);
}

void write_histograms(const fs::path& path, const std::vector<std::pair<std::string, metrics::LatentHistograms>>& hs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "domain,dim,bin,lo,hi,count\n";
  auto emit = [&](const std::string& domain, const std::string& dim, const metrics::Histogram& h) {
    const double w = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    os << domain << ',' << dim << ",underflow,," << format_double(h.lo) << ',' << h.underflow << '\n';
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      os << domain << ',' << dim << ',' << b << ',' << format_double(h.lo + w * b) << ','
         << format_double(h.lo + w * (b + 1)) << ',' << h.counts[b] << '\n';
    os << domain << ',' << dim << ",overflow," << format_double(h.hi) << ",," << h.overflow << '\n';
  };
  for (const auto& [domain, lh] : hs) {
    for (std::size_t i = 0; i < lh.dims.size(); ++i) emit(domain, std::to_string(lh.dims[i]), lh.per_dim[i]);
    emit(domain, "pooled", lh.pooled);
  }
}

void add_selected_metrics(const ExperimentConfig& cfg, model::ModelBundle& m, const data::DomainPair& d,
                          ordered_json& summary) {
  if (cfg.metrics.empty()) return;
  const Tensor xs = train::model_input(m, d, false);
  const Tensor xt = train::model_input(m, d, true);
  const Tensor zs = model::encode(m, xs);
  const Tensor zt = model::encode(m, xt);
  for (const auto& name : cfg.metrics) {
    if (name == "feature_distance") {
      if (!d.has_target_labels()) throw std::invalid_argument("feature_distance needs target labels");
      const auto fd = metrics::feature_space_distance(zs, d.source_labels(), zt, d.target_labels_for_evaluation());
      summary["feature_distance_all"] = fd.all;
      summary["feature_distance_per_class"] = fd.per_class;
    } else if (name == "latent_moments") {
      summary["latent_prior_like_fraction_source"] = metrics::prior_like_fraction(metrics::column_moments(zs));
      summary["latent_prior_like_fraction_target"] = metrics::prior_like_fraction(metrics::column_moments(zt));
    } else if (name == "latent_histogram") {
      const std::size_t dims[] = {0, 1, 2, 3};
      write_histograms(cfg.out_dir / "latent_histogram.csv",
                       {{"source", metrics::latent_histogram(model::encoder_preactivation(m, xs), kHistogramBins,
                                                             kHistogramLo, kHistogramHi, dims)},
                        {"target", metrics::latent_histogram(model::encoder_preactivation(m, xt), kHistogramBins,
                                                             kHistogramLo, kHistogramHi, dims)}});
    }
  }
}

std::string md_row(const std::vector<std::string>& cells) {
  std::string s = "|";
  for (const auto& c : cells) s += " " + c + " |";
  return s + "\n";
}

std::string md_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string s = md_row(header);
  s += "|";
  for (std::size_t i = 0; i < header.size(); ++i) s += "---|";
  s += "\n";
  for (const auto& r : rows) s += md_row(r);
  return s;
}

std::string cell(const ordered_json& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return "";
}

}  // namespace

data::DomainPair make_task(const DataSpec& spec, std::uint64_t seed) {
  if (spec.csv) return data::read_csv(*spec.csv);
  if (spec.synthetic) return data::make_synthetic_preset(*spec.synthetic, spec.n, seed);
  return data::make_shifted_task(spec.task, spec.shift, spec.n, seed);
}

int cmd_synthetic(const ExperimentConfig& cfg, std::ostream& out) {
  const auto d = make_task(cfg.data, cfg.train.seed);
  auto r = train::train_dal_only(d.source_points(), d.target_points(), cfg.train);
  write_common(cfg, r, d);
  write_scatter_csv(cfg.out_dir / "scatter_initial.csv",
                    {{"source", &d.source_points()}, {"target", &d.target_points()},
                     {"predicted", &*r.initial_prediction}});
  write_scatter_csv(cfg.out_dir / "scatter_final.csv",
                    {{"source", &d.source_points()}, {"target", &d.target_points()},
                     {"predicted", &*r.final_prediction}});
  const auto& s = r.report.summary;
  out << "synthetic " << data::synthetic_preset_name(*cfg.data.synthetic) << ": mean gap "
      << format_double(s["initial_mean_gap"].get<double>()) << " -> "
      << format_double(s["final_mean_gap"].get<double>()) << ", energy distance "
      << format_double(s["initial_energy_distance"].get<double>()) << " -> "
      << format_double(s["final_energy_distance"].get<double>()) << '\n';
  return kExitOk;
}

int cmd_adapt(const ExperimentConfig& cfg, std::ostream& out) {
  const auto d = make_task(cfg.data, cfg.train.seed);
  auto r = train::train(d, cfg.train);
  add_selected_metrics(cfg, r.model, d, r.report.summary);
  write_common(cfg, r, d);
  out << "adapt " << train::variant_name(cfg.train.variant) << " seed " << cfg.train.seed
      << ": target accuracy " << format_double(r.report.last("target_accuracy")) << '\n';
  return kExitOk;
}

int cmd_ablation(const ExperimentConfig& cfg, std::ostream& out) {
  const auto seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : cfg.seeds;
  std::ofstream table(cfg.out_dir / "ablation.csv");
  if (!table) throw std::runtime_error("cannot write ablation.csv");
  table << "id,variant,seed,target_accuracy\n";
  std::map<int, std::vector<double>> by_id;
  std::map<std::pair<double, double>, std::vector<double>> by_point;
  std::ofstream sweep;
  if (!cfg.sweep_alphas.empty()) {
    sweep.open(cfg.out_dir / "sweep.csv");
    if (!sweep) throw std::runtime_error("cannot write sweep.csv");
    sweep << "alpha,beta,seed,target_accuracy\n";
  }
  for (auto seed : seeds) {
    train::TrainConfig c = cfg.train;
    c.seed = seed;
    const auto d = make_task(cfg.data, seed);
    for (const auto& row : train::run_ablation_suite(d, c, cfg.ablation_ids, cfg.jobs)) {
      table << row.id << ',' << train::variant_name(row.variant) << ',' << seed << ','
            << format_double(row.target_accuracy) << '\n';
      by_id[row.id].push_back(row.target_accuracy);
    }
    if (!cfg.sweep_alphas.empty()) {
      for (const auto& p : train::sensitivity_sweep(d, cfg.sweep_alphas, cfg.sweep_betas, c, cfg.jobs)) {
        sweep << format_double(p.alpha) << ',' << format_double(p.beta) << ',' << seed << ','
              << format_double(p.target_accuracy) << '\n';
        by_point[{p.alpha, p.beta}].push_back(p.target_accuracy);
      }
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  ordered_json summary;
  summary["command"] = "ablation";
  summary["seeds"] = seeds;
  summary["variants"] = ordered_json::array();
  std::vector<std::vector<std::string>> rows;
  for (int id : cfg.ablation_ids) {
    const double m = mean(by_id[id]);
    summary["variants"].push_back({{"id", id},
                                   {"variant", train::variant_name(train::ablation_variant(id))},
                                   {"mean_target_accuracy", m}});
    rows.push_back({std::to_string(id), train::variant_name(train::ablation_variant(id)), format_double(m)});
  }
  out << md_table({"id", "variant", "mean target accuracy"}, rows);
  if (!by_point.empty()) {
    summary["sweep"] = ordered_json::array();
    for (double a : cfg.sweep_alphas)
      for (double b : cfg.sweep_betas)
        summary["sweep"].push_back(
            {{"alpha", a}, {"beta", b}, {"mean_target_accuracy", mean(by_point[{a, b}])}});
  }
  ordered_json doc;
  doc["seed"] = cfg.train.seed;
  doc["summary"] = summary;
  doc["config"] = cfg.to_json();
  write_json(cfg.out_dir / "summary.json", doc);
  write_json(cfg.out_dir / "config_echo.json", cfg.to_json());
  return kExitOk;
}

int cmd_gradcheck(const ExperimentConfig& cfg, std::ostream& out) {
  checks::SuiteOptions opt;
  opt.seeds = cfg.gradcheck_seeds;
  opt.fault = cfg.corrupt_op;
  const auto results = checks::run_gradcheck_suite(opt);
  bool all_ok = true;
  std::vector<std::vector<std::string>> rows;
  ordered_json summary;
  summary["command"] = "gradcheck";
  for (const auto& r : results) {
    all_ok = all_ok && r.ok();
    rows.push_back({r.name, std::to_string(r.passed) + "/" + std::to_string(r.seeds),
                    format_double(r.max_rel_error), std::to_string(r.excused) + "/" + std::to_string(r.entries),
                    r.ok() ? "ok" : "FAIL"});
    summary["max_rel_error." + r.name] = r.max_rel_error;
  }
  summary["passed"] = all_ok;
  out << md_table({"check", "seeds passed", "max rel error", "kink-excused entries", "status"}, rows);
  out << "gradcheck: " << (all_ok ? "PASS" : "FAIL") << '\n';
  if (!cfg.out_dir.empty()) {
    ordered_json doc;
    doc["seed"] = cfg.train.seed;
    doc["summary"] = summary;
    doc["config"] = cfg.to_json();
    write_json(cfg.out_dir / "summary.json", doc);
    write_json(cfg.out_dir / "config_echo.json", cfg.to_json());
  }
  return all_ok ? kExitOk : kExitCheckFailed;
}

int cmd_report(const fs::path& run_dir, std::ostream& out) {
  std::vector<std::pair<std::string, fs::path>> runs;
  if (fs::is_regular_file(run_dir / "summary.json")) runs.emplace_back(".", run_dir / "summary.json");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(run_dir))
    if (e.is_directory() && fs::is_regular_file(e.path() / "summary.json")) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& p : subdirs) runs.emplace_back(p.filename().string(), p / "summary.json");
  if (runs.empty()) throw ConfigError("no runs found in '" + run_dir.string() + "' (no summary.json)");

  std::vector<std::string> keys;
  std::vector<std::pair<std::string, ordered_json>> docs;
  for (const auto& [name, path] : runs) {
    std::ifstream in(path);
    ordered_json doc;
    try {
      doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("unreadable " + path.string() + ": " + e.what());
    }
    for (const auto& [k, v] : doc["summary"].items())
      if (v.is_primitive() && k != "command" && k != "provenance" &&
          std::find(keys.begin(), keys.end(), k) == keys.end())
        keys.push_back(k);
    docs.emplace_back(name, std::move(doc));
  }
  std::ostringstream md;
  md << "# Runs in " << run_dir.filename().string() << "\n\n";
  std::vector<std::string> header{"run", "command", "seed"};
  header.insert(header.end(), keys.begin(), keys.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& [name, doc] : docs) {
    const auto& s = doc["summary"];
    std::vector<std::string> row{name, s.contains("command") ? cell(s["command"]) : "", cell(doc["seed"])};
    for (const auto& k : keys) row.push_back(s.contains(k) ? cell(s[k]) : "");
    rows.push_back(std::move(row));
  }
  md << md_table(header, rows);
  for (const auto& [name, doc] : docs) {
    const auto& s = doc["summary"];
    if (s.contains("variants") && s["variants"].is_array()) {
      std::vector<std::vector<std::string>> ar;
      for (const auto& v : s["variants"]) ar.push_back({cell(v["id"]), cell(v["variant"]), cell(v["mean_target_accuracy"])});
      md << "\n## Ablation (" << name << ")\n\n" << md_table({"id", "variant", "mean target accuracy"}, ar);
    }
    if (s.contains("sweep") && s["sweep"].is_array()) {
      std::vector<std::vector<std::string>> sr;
      for (const auto& v : s["sweep"]) sr.push_back({cell(v["alpha"]), cell(v["beta"]), cell(v["mean_target_accuracy"])});
      md << "\n## Sensitivity (" << name << ")\n\n" << md_table({"alpha", "beta", "mean target accuracy"}, sr);
    }
  }
  const std::string text = md.str();
  std::ofstream f(run_dir / "report.md");
  if (!f) throw std::runtime_error("cannot write report.md");
  f << text;
  out << text;
  return kExitOk;
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_config(inv.command, inv.config_file, inv.overrides);
    validate_paths(cfg);
    switch (cfg.command) {
      case Command::kSynthetic: return cmd_synthetic(cfg, out);
      case Command::kAdapt: return cmd_adapt(cfg, out);
      case Command::kAblation: return cmd_ablation(cfg, out);
      case Command::kGradcheck: return cmd_gradcheck(cfg, out);
      case Command::kReport: return cmd_report(cfg.out_dir, out);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "gla: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "gla: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "gla: error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace gla::cli
