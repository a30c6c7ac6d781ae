#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string output;  // stdout and stderr together
};

Result gla(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "env -u GLA_SEED " + env + " " GLA_CLI_PATH " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "gla_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

const json kSynthetic = {{"data", {{"synthetic", "gauss_same_cov"}, {"n", 60}}}, {"train", {{"epochs", 20}}}};
const json kAdaptSmall = {{"data", {{"task", "moons"}, {"n", 80}}},
                          {"train", {{"epochs", 2}, {"batch", 32}, {"variant", "dfa_ent"}}}};

}  // namespace

TEST_CASE("synthetic writes every artifact and echoes the preset") {
  const fs::path d = fresh_dir("synthetic");
  const fs::path cfg = write_config(d, "c.json", kSynthetic);
  const fs::path out = d / "run";
  fs::create_directories(out);
  const auto r = gla("synthetic --config " + cfg.string() + " --out " + out.string());
  CHECK(r.code == 0);
  for (const char* f : {"metrics.csv", "summary.json", "scatter_initial.csv", "scatter_final.csv", "checkpoint.bin",
                        "config_echo.json"})
    CHECK(fs::exists(out / f));
  const json echo = json::parse(slurp(out / "config_echo.json"));
  CHECK(echo.dump().find("N((5,5),[[4,2],[2,2]])") != std::string::npos);
  CHECK(echo.dump().find("N((1,1),[[4,2],[2,2]])") != std::string::npos);
  const std::string scatter = slurp(out / "scatter_final.csv");
  CHECK(scatter.rfind("x0,x1,series\n", 0) == 0);
  for (const char* s : {",source\n", ",target\n", ",predicted\n"}) CHECK(scatter.find(s) != std::string::npos);
  const std::string metrics = slurp(out / "metrics.csv");
  CHECK(metrics.rfind("epoch,", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 21);
}

TEST_CASE("reruns are byte-identical; seeds come from --seed, then GLA_SEED, then the config") {
  const fs::path d = fresh_dir("determinism");
  json c = kSynthetic;
  c["seed"] = 1;
  const fs::path cfg = write_config(d, "c.json", c);
  for (const char* run : {"a", "b", "env", "flag"}) fs::create_directories(d / run);
  CHECK(gla("synthetic --config " + cfg.string() + " --out " + (d / "a").string()).code == 0);
  CHECK(gla("synthetic --config " + cfg.string() + " --out " + (d / "b").string()).code == 0);
  CHECK(slurp(d / "a" / "metrics.csv") == slurp(d / "b" / "metrics.csv"));
  CHECK(slurp(d / "a" / "scatter_final.csv") == slurp(d / "b" / "scatter_final.csv"));
  CHECK(slurp(d / "a" / "checkpoint.bin") == slurp(d / "b" / "checkpoint.bin"));

  CHECK(gla("synthetic --config " + cfg.string() + " --out " + (d / "env").string(), "GLA_SEED=5").code == 0);
  CHECK(json::parse(slurp(d / "env" / "config_echo.json"))["seed"] == 5);
  CHECK(slurp(d / "env" / "metrics.csv") != slurp(d / "a" / "metrics.csv"));
  CHECK(gla("synthetic --config " + cfg.string() + " --seed 7 --out " + (d / "flag").string(), "GLA_SEED=5").code == 0);
  CHECK(json::parse(slurp(d / "flag" / "config_echo.json"))["seed"] == 7);
  CHECK(json::parse(slurp(d / "a" / "config_echo.json"))["seed"] == 1);
}

TEST_CASE("usage and configuration errors exit 2") {
  const fs::path d = fresh_dir("errors");
  const fs::path good = write_config(d, "good.json", kSynthetic);
  const auto missing = gla("synthetic --config " + good.string() + " --out " + (d / "nope").string());
  CHECK(missing.code == 2);
  CHECK(missing.output.find("output directory") != std::string::npos);
  CHECK(gla("synthetic --config " + good.string()).code == 2);

  json unknown = kSynthetic;
  unknown["trian"] = json::object();
  const auto u = gla("synthetic --config " + write_config(d, "u.json", unknown).string() + " --out " + d.string());
  CHECK(u.code == 2);
  CHECK(u.output.find("unknown config key 'trian'") != std::string::npos);
  json nested = kSynthetic;
  nested["train"]["lerning_rate"] = 0.1;
  CHECK(gla("synthetic --config " + write_config(d, "n.json", nested).string() + " --out " + d.string()).code == 2);

  json variant = kAdaptSmall;
  variant["train"]["variant"] = "dfa_magic";
  CHECK(gla("adapt --config " + write_config(d, "v.json", variant).string() + " --out " + d.string()).code == 2);
  json lr = kAdaptSmall;
  lr["train"]["lr"] = -1;
  CHECK(gla("adapt --config " + write_config(d, "lr.json", lr).string() + " --out " + d.string()).code == 2);
  std::ofstream(d / "broken.json") << "{ not json";
  CHECK(gla("adapt --config " + (d / "broken.json").string() + " --out " + d.string()).code == 2);
  CHECK(gla("adapt --config " + (d / "absent.json").string() + " --out " + d.string()).code == 2);
  CHECK(gla("synthetic --config " + good.string() + " --seed abc --out " + d.string()).code == 2);
  CHECK(gla("synthetic --config " + good.string() + " --out " + d.string(), "GLA_SEED=-3").code == 2);
  CHECK(gla("frobnicate").code == 2);
  CHECK(gla("").code == 2);
  CHECK(gla("--help").code == 0);
  // Nothing was trained by any of the above.
  CHECK_FALSE(fs::exists(d / "metrics.csv"));
}

TEST_CASE("adapt echoes the paper defaults and emits selected metrics") {
  const fs::path d = fresh_dir("adapt");
  fs::create_directories(d / "ent");
  fs::create_directories(d / "mcd");
  json ent = kAdaptSmall;
  ent["metrics"] = {"feature_distance", "latent_moments", "latent_histogram"};
  CHECK(gla("adapt --config " + write_config(d, "ent.json", ent).string() + " --out " + (d / "ent").string()).code == 0);
  const json e = json::parse(slurp(d / "ent" / "config_echo.json"));
  CHECK(e["train"]["alpha"] == 0.01);
  CHECK(e["train"]["beta"] == 10.0);
  const json s = json::parse(slurp(d / "ent" / "summary.json"));
  const std::string sd = s.dump();
  for (const char* k : {"target_accuracy", "feature_distance_all", "latent_prior_like_fraction_source"})
    CHECK(sd.find(k) != std::string::npos);
  CHECK(fs::exists(d / "ent" / "latent_histogram.csv"));
  CHECK(fs::exists(d / "ent" / "checkpoint.bin"));

  json mcd = kAdaptSmall;
  mcd["train"]["variant"] = "dfa_mcd";
  mcd["train"]["epochs"] = 1;
  CHECK(gla("adapt --config " + write_config(d, "mcd.json", mcd).string() + " --out " + (d / "mcd").string()).code == 0);
  CHECK(json::parse(slurp(d / "mcd" / "config_echo.json"))["train"]["mcd_inner_n"] == 4);
}

TEST_CASE("ablation honors a partial variant list") {
  const fs::path d = fresh_dir("ablation");
  json c = kAdaptSmall;
  c["train"]["epochs"] = 1;
  c["ablation"] = {{"variants", {2, 5}}};
  const auto r = gla("ablation --config " + write_config(d, "c.json", c).string() + " --out " + d.string());
  CHECK(r.code == 0);
  const std::string table = slurp(d / "ablation.csv");
  CHECK(table.rfind("id,variant,seed,target_accuracy\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  CHECK(table.find("\n2,") != std::string::npos);
  CHECK(table.find("\n5,") != std::string::npos);
  c["ablation"] = {{"variants", {9}}};
  CHECK(gla("ablation --config " + write_config(d, "bad.json", c).string() + " --out " + d.string()).code == 2);
}

TEST_CASE("gradcheck passes, and fails with exit 1 under a corrupted rule") {
  const fs::path d = fresh_dir("gradcheck");
  const auto ok = gla("gradcheck --config " + write_config(d, "ok.json", {{"gradcheck", {{"seeds", 2}}}}).string());
  CHECK(ok.code == 0);
  CHECK(ok.output.find("gradcheck: PASS") != std::string::npos);
  for (const char* loss : {"L_cls", "L_kld", "L_dal", "L_ent", "L_adv", "L_recon", "L_klddir", "L_daldir", "L_d"})
    CHECK(ok.output.find(loss) != std::string::npos);
  const auto bad = gla("gradcheck --config " +
                       write_config(d, "bad.json", {{"gradcheck", {{"seeds", 2}, {"corrupt", "softmax_rows"}}}}).string() +
                       " --out " + d.string());
  CHECK(bad.code == 1);
  CHECK(bad.output.find("gradcheck: FAIL") != std::string::npos);
  CHECK(fs::exists(d / "summary.json"));
  CHECK(gla("gradcheck --config " + write_config(d, "x.json", {{"gradcheck", {{"corrupt", "warp"}}}}).string()).code == 2);
}

TEST_CASE("report tables") {
  const fs::path d = fresh_dir("report");
  CHECK(gla("report --out " + d.string()).code == 2);
  const fs::path cfg = write_config(d, "c.json", kSynthetic);
  fs::create_directories(d / "runs" / "s1");
  fs::create_directories(d / "runs" / "s2");
  CHECK(gla("synthetic --config " + cfg.string() + " --seed 1 --out " + (d / "runs" / "s1").string()).code == 0);
  CHECK(gla("synthetic --config " + cfg.string() + " --seed 2 --out " + (d / "runs" / "s2").string()).code == 0);
  const auto r = gla("report --out " + (d / "runs").string());
  CHECK(r.code == 0);
  const std::string md = slurp(d / "runs" / "report.md");
  CHECK(md.find("| s1 |") != std::string::npos);
  CHECK(md.find("| s2 |") != std::string::npos);
  CHECK(md.find("energy_reduction") != std::string::npos);
  CHECK(gla("report --out " + (d / "runs").string()).code == 0);
  CHECK(slurp(d / "runs" / "report.md") == md);
}
