#include "gradshield/pipeline.hpp"

#include "synthetic.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace gradshield;

namespace {

namespace fs = std::filesystem;

const fs::path& work_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "gradshield_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// Small synthetic data root shared by the CLI cases.
const fs::path& data_root() {
  static const fs::path root = [] {
    const fs::path p = work_root() / "data";
    synth::write_dataset_root(p, "mnist", 600, 200, 90210);
    return p;
  }();
  return root;
}

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out_file = work_root() / ("stdout" + std::to_string(counter));
  const fs::path err_file = work_root() / ("stderr" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(GRADSHIELD_CLI_PATH) + " " + args + " >" +
                          out_file.string() + " 2>" + err_file.string();
  const int rc = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config entries parse and flags validate") {
  RunConfig cfg;
  apply_config_entry(cfg, "dataset", "fashion_mnist");
  apply_config_entry(cfg, "seed", "123");
  apply_config_entry(cfg, "k", "16,32,47");
  apply_config_entry(cfg, "etas", "0.01,0.5");
  CHECK(cfg.dataset == "fashion_mnist");
  CHECK(cfg.seed == 123);
  REQUIRE(cfg.k_values.size() == 3);
  CHECK(cfg.k_values[2] == 47);
  CHECK(cfg.eta_grid.size() == 2);

  CHECK_THROWS_AS(apply_config_entry(cfg, "nonsense", "1"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "seed", "abc"), ConfigError);

  apply_config_entry(cfg, "k", "0");
  cfg.data_dir = data_root();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config file round trip") {
  const fs::path file = work_root() / "run.conf";
  {
    std::ofstream out(file);
    out << "# comment\n"
        << "dataset=mnist\n"
        << "seed=9\n"
        << "k=47\n";
  }
  const RunConfig cfg = load_run_config(file);
  CHECK(cfg.dataset == "mnist");
  CHECK(cfg.seed == 9);

  const fs::path broken = work_root() / "broken.conf";
  {
    std::ofstream out(broken);
    out << "dataset mnist\n";
  }
  CHECK_THROWS_AS(load_run_config(broken), ConfigError);
}

TEST_CASE("run config validation and hashing") {
  RunConfig cfg;
  cfg.data_dir = data_root();
  cfg.validate();
  CHECK(cfg.hash_prefix().size() == 8);

  RunConfig other = cfg;
  CHECK(other.hash_prefix() == cfg.hash_prefix());
  other.seed = 8;
  CHECK(other.hash_prefix() != cfg.hash_prefix());

  RunConfig bad = cfg;
  bad.dataset = "imagenet";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.k_values = {784};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.data_dir.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("defense names parse") {
  std::string kind;
  Index k = 0;
  CHECK(Pipeline::parse_defense_name("none", &kind, &k));
  CHECK(Pipeline::parse_defense_name("dae_hidden_47", &kind, &k));
  CHECK(kind == "dae_hidden");
  CHECK(k == 47);
  CHECK_FALSE(Pipeline::parse_defense_name("dae_hidden_", &kind, &k));
  CHECK_FALSE(Pipeline::parse_defense_name("pca", &kind, &k));
}

TEST_CASE("run_all produces the full artifact set for several k values") {
  RunConfig cfg;
  cfg.data_dir = data_root();
  cfg.dataset = "mnist";
  cfg.preset = "desk";
  cfg.seed = 7;
  cfg.k_values = {47, 16};
  cfg.out_dir = work_root() / "run_all";

  std::ostringstream log;
  SweepReport report;
  {
    Pipeline pipeline(cfg, log);
    report = pipeline.run_all();
  }

  // 2 threat models x (none, adv_retrain, dae_output, dae_hidden_47,
  // dae_hidden_16) x 5 etas.
  CHECK(report.records.size() == 50);
  CHECK(report.averages.count("mnist|semi_white_box|dae_hidden_47") == 1);
  CHECK(report.averages.count("mnist|black_box|dae_hidden_16") == 1);
  CHECK(report.averages.count("mnist|semi_white_box|dae_output") == 1);

  REQUIRE(report.timing.size() == 3);
  CHECK(report.timing[0].k == 784);
  CHECK(report.timing[0].speedup == 1.0);
  CHECK(report.timing[1].k == 47);
  CHECK(report.timing[2].k == 16);
  for (const auto& row : report.timing) CHECK(row.train_seconds > 0);
  // The reduced-input classifiers train strictly faster than the 784 baseline.
  CHECK(report.timing[1].train_seconds < report.timing[0].train_seconds);
  CHECK(report.timing[2].train_seconds < report.timing[0].train_seconds);

  for (const char* name :
       {"F.mlp1", "G.mlp1", "dae_k47.mlp1", "dae_k16.mlp1", "f_k47.mlp1", "f_k16.mlp1",
        "retrain.mlp1", "recon_clf.mlp1", "sweep.csv", "timing.csv", "run_manifest.txt"}) {
    CHECK(fs::exists(cfg.out_dir / name));
  }
  CHECK(fs::exists(cfg.out_dir / "bundle_k47" / "dae.mlp1"));
  CHECK(fs::exists(cfg.out_dir / "bundle_k16" / "bundle.meta"));

  SUBCASE("resume reuses artifacts and reproduces sweep.csv bytes") {
    const std::string sweep_before = file_bytes(cfg.out_dir / "sweep.csv");
    RunConfig resume_cfg = cfg;
    resume_cfg.resume = true;
    std::ostringstream log2;
    Pipeline pipeline(resume_cfg, log2);
    const SweepReport again = pipeline.run_all();
    CHECK(again.records.size() == report.records.size());
    CHECK(file_bytes(cfg.out_dir / "sweep.csv") == sweep_before);
    CHECK(log2.str().find("loaded") != std::string::npos);
  }
}

TEST_CASE("cli: pipeline then attack, sweep and report against its artifacts") {
  const auto out = work_root() / "runs" / "pipe";
  const std::string common = " --data-dir " + data_root().string() +
                             " --dataset mnist --seed 11 --k 47 --out " + out.string();
  const auto r = run_cli("pipeline --preset desk" + common);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out / "sweep.csv"));
  CHECK(fs::exists(out / "timing.csv"));
  CHECK(fs::exists(out / "run_manifest.txt"));

  // attack dumps an ADV1 batch
  const auto adv_file = out / "adv_test.adv1";
  const auto ra =
      run_cli("attack --eta 0.25 --source F --out-file " + adv_file.string() + common);
  CHECK(ra.exit_code == 0);
  CHECK(fs::exists(adv_file));

  // sweep regenerates identical csv bytes from persisted artifacts
  const std::string before = file_bytes(out / "sweep.csv");
  const auto rs = run_cli("sweep" + common);
  CHECK(rs.exit_code == 0);
  CHECK(file_bytes(out / "sweep.csv") == before);

  // report pretty-prints the run
  const auto rr = run_cli("report" + common);
  CHECK(rr.exit_code == 0);
  CHECK(rr.out.find("retained_accuracy") != std::string::npos);
  CHECK(rr.out.find("speedup") != std::string::npos);

  // evaluate through the substitute's gradients
  const auto re =
      run_cli("evaluate --defense dae_hidden_47 --threat black_box --eta 0.25" + common);
  CHECK(re.exit_code == 0);
  CHECK(re.out.find("dae_hidden_47") != std::string::npos);
}

TEST_CASE("cli: help and usage errors") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("train-target --bogus-flag").exit_code == 2);
}

TEST_CASE("cli: missing dataset files exit 2 and name the path") {
  const auto r = run_cli("train-target --data-dir /no/such/dir --dataset mnist --out " +
                         (work_root() / "r0").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("/no/such/dir") != std::string::npos);
}

TEST_CASE("cli: train-target produces F.mlp1 and reruns hash-identically") {
  const auto out_a = work_root() / "runs" / "a";
  const auto base = "train-target --data-dir " + data_root().string() +
                    " --dataset mnist --seed 7 --out ";
  const auto r1 = run_cli(base + out_a.string());
  CHECK(r1.exit_code == 0);
  CHECK(fs::exists(out_a / "F.mlp1"));
  CHECK(r1.out.find("clean test accuracy") != std::string::npos);

  const auto out_b = work_root() / "runs" / "b";
  const auto r2 = run_cli(base + out_b.string());
  CHECK(r2.exit_code == 0);
  CHECK(file_bytes(out_a / "F.mlp1") == file_bytes(out_b / "F.mlp1"));

  SUBCASE("evaluate with eta zero and no defense prints retention one") {
    const auto r3 = run_cli("evaluate --data-dir " + data_root().string() +
                            " --dataset mnist --seed 7 --out " + out_a.string() +
                            " --defense none --threat semi_white_box --eta 0");
    CHECK(r3.exit_code == 0);
    CHECK(r3.out.find("1.000000") != std::string::npos);
  }

  SUBCASE("evaluate rejects unknown defenses with the valid list") {
    const auto r3 = run_cli("evaluate --data-dir " + data_root().string() +
                            " --dataset mnist --out " + out_a.string() +
                            " --defense pca --threat semi_white_box");
    CHECK(r3.exit_code == 2);
    CHECK(r3.err.find("dae_hidden_<k>") != std::string::npos);
  }

  SUBCASE("evaluate on missing artifacts exits 3") {
    const auto r3 = run_cli("evaluate --data-dir " + data_root().string() +
                            " --dataset mnist --out " + (work_root() / "empty").string() +
                            " --defense none --threat semi_white_box --eta 0.1");
    CHECK(r3.exit_code == 3);
    CHECK(r3.err.find("F.mlp1") != std::string::npos);
  }
}

}  // TEST_SUITE
