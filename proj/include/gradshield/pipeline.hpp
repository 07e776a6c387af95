#pragma once

#include "gradshield/dataset.hpp"
#include "gradshield/defense.hpp"
#include "gradshield/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gradshield {

// Scale preset: "paper" replicates the reported setup, "desk" is the small
// configuration used by CI (10,000 training samples, 20 epochs, 5 etas).
struct Preset {
  std::string name;
  Index train_cap = 0;  // 0 keeps the full training set
  Index classifier_epochs = 100;
  Index dae_epochs = 150;
  Index classifier_batch = 200;
  Index dae_batch = 256;
  double learning_rate = 0.001;
  std::vector<double> eta_grid;
  int timing_repeats = 3;
};

const Preset& desk_preset();
const Preset& paper_preset();
const Preset& preset_by_name(const std::string& name);

struct RunConfig {
  std::filesystem::path data_dir;
  std::string dataset = "mnist";  // mnist | fashion_mnist
  std::string preset = "desk";    // desk | paper
  std::uint64_t seed = 7;
  std::vector<Index> k_values = {47};
  std::vector<double> eta_grid;   // empty: use the preset's grid
  std::filesystem::path out_dir;  // empty: runs/<config-hash prefix>
  bool deterministic = true;
  bool resume = false;

  void validate() const;
  std::vector<double> effective_eta_grid() const;
  // Canonical key=value rendering of everything that affects results.
  std::string canonical() const;
  std::string hash_prefix() const;  // 8 hex chars
  std::filesystem::path resolved_out_dir() const;
};

// key=value config file; '#' starts a comment. Unknown keys are errors.
RunConfig load_run_config(const std::filesystem::path& file);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// Stage orchestration over one dataset. Every artifact is persisted into the
// run directory; with cfg.resume, stages whose artifact already exists load
// it instead of retraining.
class Pipeline {
 public:
  Pipeline(RunConfig cfg, std::ostream& log);

  const RunConfig& config() const { return cfg_; }
  const Preset& preset() const { return preset_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }

  const LabeledDataset& train_set();
  const LabeledDataset& test_set();

  const MlpModel<float>& target();               // F.mlp1
  const MlpModel<float>& substitute();           // G.mlp1
  const MlpModel<float>& dae(Index k);           // dae_k<k>.mlp1
  const DefenseBundle& bundle(Index k);          // f_k<k>.mlp1 + bundle_k<k>/
  const MlpModel<float>& retrained();            // retrain.mlp1
  const MlpModel<float>& reconstruction_classifier();  // recon_clf.mlp1

  // Evaluation-only mode: stages load persisted artifacts and never train;
  // a missing artifact is an error naming the file.
  void require_artifacts(bool v) { require_artifacts_ = v; }

  // Everything end to end: models, baselines, sweep, timing, reports,
  // manifest. Returns the sweep report.
  SweepReport run_all();

  // Sweep over already-available artifacts (used by `sweep`/`evaluate`).
  SweepReport sweep(const std::vector<ThreatKind>& threats,
                    const std::vector<std::string>& defense_names,
                    const std::vector<double>& eta_grid);

  std::vector<SweepDefense> make_defenses(const std::vector<std::string>& names);
  static bool parse_defense_name(const std::string& name, std::string* kind, Index* k);

  TrainConfig classifier_config(const std::string& stage) const;
  TrainConfig dae_config(Index k) const;

 private:
  const DaeCorpus& corpus();
  void write_manifest() const;
  void note(const std::string& line);

  RunConfig cfg_;
  Preset preset_;
  std::filesystem::path out_dir_;
  std::ostream& log_;
  bool require_artifacts_ = false;

  std::optional<LabeledDataset> train_;
  std::optional<LabeledDataset> test_;
  std::optional<MlpModel<float>> target_;
  std::optional<MlpModel<float>> substitute_;
  std::optional<MlpModel<float>> retrained_;
  std::optional<MlpModel<float>> recon_clf_;
  std::optional<DaeCorpus> corpus_;
  std::map<Index, MlpModel<float>> daes_;
  std::map<Index, DefenseBundle> bundles_;

  std::map<std::string, double> stage_seconds_;
  std::map<Index, double> defense_train_seconds_;  // k -> first-run seconds
  double recon_train_seconds_ = 0;
};

}  // namespace gradshield
