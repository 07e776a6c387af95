#include "gradshield/attack.hpp"
#include "gradshield/model_io.hpp"
#include "gradshield/pipeline.hpp"

#include "fetch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace gs = gradshield;

namespace {

// Exit codes: 0 success, 2 usage/config, 3 data, 4 numeric.
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
  std::string config_file;
  std::string data_dir;
  std::string dataset;
  std::string preset;
  std::uint64_t seed = 0;
  std::string k_csv;
  std::string etas_csv;
  std::string out_dir;
  bool resume = false;
  bool no_deterministic = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key=value config file; flags override");
  cmd->add_option("--data-dir", flags.data_dir,
                  "dataset root (default: $GRADSHIELD_DATA_DIR)");
  cmd->add_option("--dataset", flags.dataset, "mnist or fashion_mnist");
  cmd->add_option("--preset", flags.preset, "desk or paper");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--k", flags.k_csv, "bottleneck widths, comma separated");
  cmd->add_option("--etas", flags.etas_csv, "eta grid, comma separated");
  cmd->add_option("--out", flags.out_dir, "run directory (default: runs/<config hash>)");
  cmd->add_flag("--resume", flags.resume, "reuse persisted artifacts");
  cmd->add_flag("--no-deterministic", flags.no_deterministic,
                "record the run as non-deterministic");
}

gs::RunConfig build_config(const CLI::App* cmd, const CommonFlags& flags) {
  gs::RunConfig cfg;
  if (cmd->count("--config")) cfg = gs::load_run_config(flags.config_file);
  if (const char* env = std::getenv("GRADSHIELD_DATA_DIR"); env && cfg.data_dir.empty()) {
    cfg.data_dir = env;
  }
  if (cmd->count("--data-dir")) gs::apply_config_entry(cfg, "data_dir", flags.data_dir);
  if (cmd->count("--dataset")) gs::apply_config_entry(cfg, "dataset", flags.dataset);
  if (cmd->count("--preset")) gs::apply_config_entry(cfg, "preset", flags.preset);
  if (cmd->count("--seed")) cfg.seed = flags.seed;
  if (cmd->count("--k")) gs::apply_config_entry(cfg, "k", flags.k_csv);
  if (cmd->count("--etas")) gs::apply_config_entry(cfg, "etas", flags.etas_csv);
  if (cmd->count("--out")) cfg.out_dir = flags.out_dir;
  if (flags.resume) cfg.resume = true;
  if (flags.no_deterministic) cfg.deterministic = false;
  cfg.validate();
  return cfg;
}

// RunConfig invariant: referenced dataset paths must exist at validation
// time; a missing file here is a configuration error, not a data error.
void validate_dataset_paths(const gs::RunConfig& cfg) {
  try {
    gs::locate_dataset(cfg.data_dir, cfg.dataset);
  } catch (const gs::DataError& e) {
    throw gs::ConfigError(e.what());
  }
}

gs::ThreatKind parse_threat(const std::string& name) {
  if (name == "semi_white_box") return gs::ThreatKind::kSemiWhiteBox;
  if (name == "black_box") return gs::ThreatKind::kBlackBox;
  throw gs::ConfigError("unknown threat model '" + name +
                        "'; valid: semi_white_box, black_box");
}

void print_cell(const gs::SweepReport& report) {
  std::printf("%-14s %-15s %-18s %-6s %s\n", "dataset", "threat_model", "defense",
              "eta", "retained_accuracy");
  for (const auto& rec : report.records) {
    std::printf("%-14s %-15s %-18s %-6.2f %.6f\n", rec.dataset.c_str(),
                rec.threat_model.c_str(), rec.defense.c_str(), rec.eta,
                rec.retained_accuracy);
  }
  for (const auto& [key, avg] : report.averages) {
    std::printf("average[%s] = %.6f\n", key.c_str(), avg);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"FGS adversarial attack and DAE-bottleneck defense workbench"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* cmd_fetch = app.add_subcommand("fetch", "download dataset IDX files");
  std::string fetch_dataset_name = "all";
  cmd_fetch->add_option("--dataset", fetch_dataset_name, "mnist, fashion_mnist or all");
  std::string fetch_dir;
  cmd_fetch->add_option("--data-dir", fetch_dir, "dataset root");

  auto* cmd_train_target = app.add_subcommand("train-target", "train the target classifier F");
  add_common(cmd_train_target, flags);
  auto* cmd_train_sub = app.add_subcommand("train-substitute", "train the black-box substitute G");
  add_common(cmd_train_sub, flags);
  auto* cmd_train_dae = app.add_subcommand("train-dae", "build the corpus and train the DAE(s)");
  add_common(cmd_train_dae, flags);
  auto* cmd_train_defense =
      app.add_subcommand("train-defense", "train the reduced-dimension defense classifier(s)");
  add_common(cmd_train_defense, flags);

  auto* cmd_attack = app.add_subcommand("attack", "dump FGS adversarial examples");
  add_common(cmd_attack, flags);
  double attack_eta = 0.25;
  std::string attack_source = "F";
  std::string attack_split = "test";
  std::string attack_out;
  bool attack_clip = false;
  cmd_attack->add_option("--eta", attack_eta, "perturbation bound");
  cmd_attack->add_option("--source", attack_source, "gradient source: F or G");
  cmd_attack->add_option("--split", attack_split, "train or test");
  cmd_attack->add_option("--out-file", attack_out, "output .adv1 path");
  cmd_attack->add_flag("--clip", attack_clip, "clamp the result to [0,1]");

  auto* cmd_evaluate = app.add_subcommand("evaluate", "retained accuracy for one defense cell");
  add_common(cmd_evaluate, flags);
  std::string eval_defense = "none";
  std::string eval_threat = "semi_white_box";
  double eval_eta = -1;
  cmd_evaluate->add_option("--defense", eval_defense,
                           "none, adv_retrain, dae_output or dae_hidden_<k>");
  cmd_evaluate->add_option("--threat", eval_threat, "semi_white_box or black_box");
  cmd_evaluate->add_option("--eta", eval_eta, "single eta (default: the preset grid)");

  auto* cmd_sweep = app.add_subcommand("sweep", "full sweep over persisted artifacts");
  add_common(cmd_sweep, flags);
  auto* cmd_pipeline = app.add_subcommand("pipeline", "end-to-end run: models, baselines, sweep, reports");
  add_common(cmd_pipeline, flags);
  auto* cmd_report = app.add_subcommand("report", "pretty-print sweep.csv/timing.csv of a run");
  add_common(cmd_report, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (cmd_fetch->parsed()) {
    std::filesystem::path dir = fetch_dir;
    if (dir.empty()) {
      if (const char* env = std::getenv("GRADSHIELD_DATA_DIR")) dir = env;
    }
    if (dir.empty()) throw gs::ConfigError("fetch: --data-dir or GRADSHIELD_DATA_DIR required");
    if (fetch_dataset_name == "all") {
      gs::cli::fetch_dataset("mnist", dir);
      gs::cli::fetch_dataset("fashion_mnist", dir);
    } else {
      gs::cli::fetch_dataset(fetch_dataset_name, dir);
    }
    return 0;
  }

  const CLI::App* active = app.get_subcommands().front();
  gs::RunConfig cfg = build_config(active, flags);
  if (!cmd_report->parsed()) validate_dataset_paths(cfg);
  gs::Pipeline pipeline(cfg, std::cout);

  if (cmd_train_target->parsed()) {
    pipeline.target();
  } else if (cmd_train_sub->parsed()) {
    pipeline.substitute();
  } else if (cmd_train_dae->parsed()) {
    for (gs::Index k : cfg.k_values) pipeline.dae(k);
  } else if (cmd_train_defense->parsed()) {
    for (gs::Index k : cfg.k_values) pipeline.bundle(k);
  } else if (cmd_attack->parsed()) {
    pipeline.require_artifacts(true);
    const gs::MlpModel<float>* source = nullptr;
    if (attack_source == "F") {
      source = &pipeline.target();
    } else if (attack_source == "G") {
      source = &pipeline.substitute();
    } else {
      throw gs::ConfigError("attack: --source must be F or G");
    }
    const gs::LabeledDataset& split =
        attack_split == "train" ? pipeline.train_set() : pipeline.test_set();
    if (attack_split != "train" && attack_split != "test") {
      throw gs::ConfigError("attack: --split must be train or test");
    }
    const gs::AttackConfig atk{attack_eta, attack_clip};
    const gs::MatF adv = gs::attack_batched(*source, split, atk, 256);
    std::filesystem::path out = attack_out;
    if (out.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "attack_%s_eta%.2f.adv1", attack_source.c_str(),
                    attack_eta);
      out = pipeline.out_dir() / name;
    }
    gs::save_adversarial(adv, out);
    std::printf("wrote %s (%lld x %lld)\n", out.c_str(), (long long)adv.rows(),
                (long long)adv.cols());
  } else if (cmd_evaluate->parsed()) {
    pipeline.require_artifacts(true);
    std::string kind;
    gs::Index k = 0;
    if (!gs::Pipeline::parse_defense_name(eval_defense, &kind, &k)) {
      throw gs::ConfigError("unknown defense '" + eval_defense +
                            "'; valid: none, adv_retrain, dae_output, dae_hidden_<k>");
    }
    std::vector<double> grid =
        eval_eta >= 0 ? std::vector<double>{eval_eta} : cfg.effective_eta_grid();
    const gs::SweepReport report =
        pipeline.sweep({parse_threat(eval_threat)}, {eval_defense}, grid);
    print_cell(report);
    gs::emit_report(report, pipeline.out_dir() / "evaluate");
  } else if (cmd_sweep->parsed()) {
    pipeline.require_artifacts(true);
    std::vector<std::string> names = {"none", "adv_retrain", "dae_output"};
    for (gs::Index kv : cfg.k_values) names.push_back("dae_hidden_" + std::to_string(kv));
    const gs::SweepReport report =
        pipeline.sweep({gs::ThreatKind::kSemiWhiteBox, gs::ThreatKind::kBlackBox}, names,
                       cfg.effective_eta_grid());
    gs::emit_report(report, pipeline.out_dir());
    print_cell(report);
  } else if (cmd_pipeline->parsed()) {
    const gs::SweepReport report = pipeline.run_all();
    for (const auto& [key, avg] : report.averages) {
      std::printf("average[%s] = %.6f\n", key.c_str(), avg);
    }
  } else if (cmd_report->parsed()) {
    for (const char* name : {"sweep.csv", "timing.csv"}) {
      const auto path = pipeline.out_dir() / name;
      std::ifstream in(path);
      if (!in) throw gs::DataError("missing " + path.string() + "; run `pipeline` first");
      std::printf("== %s ==\n", path.c_str());
      std::string line;
      while (std::getline(in, line)) {
        for (auto& c : line) {
          if (c == ',') c = '\t';
        }
        std::printf("%s\n", line.c_str());
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gs::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const gs::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}
