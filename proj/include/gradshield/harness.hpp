#pragma once

#include "gradshield/dataset.hpp"
#include "gradshield/defense.hpp"
#include "gradshield/net.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace gradshield {

enum class ThreatKind { kSemiWhiteBox, kBlackBox };

inline const char* threat_name(ThreatKind t) {
  return t == ThreatKind::kSemiWhiteBox ? "semi_white_box" : "black_box";
}

// Substitute classifier for the black-box threat model:
// in -> 200(relu) -> 200(relu) -> 100(relu) -> 10(softmax).
std::vector<LayerSpec> substitute_layers(Index input_dim);
TrainedModel train_substitute(const LabeledDataset& train, const TrainConfig& cfg);

// Fraction of the initially-correct samples that the defended pipeline still
// classifies correctly under attack. `clean_correct[i]` marks whether sample
// i was classified correctly before the attack.
double retained_accuracy(const std::vector<bool>& clean_correct,
                         const Labels& defended_pred, const Labels& truth);

struct SweepRecord {
  std::string dataset;
  std::string threat_model;
  std::string defense;
  double eta = 0;
  double retained_accuracy = 0;
};

struct TimingRow {
  Index k = 0;
  double train_seconds = 0;
  double speedup = 0;                  // baseline / train_seconds, 2 decimals
  double avg_retained_accuracy = 0;
};

struct SweepReport {
  std::vector<SweepRecord> records;
  std::vector<double> eta_grid;
  // (dataset, threat_model, defense) -> arithmetic mean over the eta grid
  std::map<std::string, double> averages;
  std::vector<TimingRow> timing;

  static std::string average_key(const std::string& dataset,
                                 const std::string& threat,
                                 const std::string& defense) {
    return dataset + "|" + threat + "|" + defense;
  }
};

// A defended classification pipeline under test.
struct SweepDefense {
  std::string name;  // none | adv_retrain | dae_output | dae_hidden_<k>
  std::function<Labels(const MatF&)> classify;
};

// One dataset cell: the target classifier supplies both the semi-white-box
// gradients and the initially-correct denominator; the substitute supplies
// black-box gradients.
struct SweepDataset {
  std::string name;
  const LabeledDataset* test = nullptr;
  const MlpModel<float>* target = nullptr;
  const MlpModel<float>* substitute = nullptr;
};

// For every (dataset, threat model, defense, eta): attack the test set with
// FGS from the threat model's source and record the retained accuracy of the
// defense. Adversarial batches are generated once per (dataset, threat, eta)
// and shared across defenses. Records come back sorted by cell key.
SweepReport run_sweep(const std::vector<SweepDataset>& datasets,
                      const std::vector<ThreatKind>& threat_models,
                      const std::vector<SweepDefense>& defenses,
                      const std::vector<double>& eta_grid);

// speedup = baseline_seconds / train_seconds, rounded to 2 decimals.
std::vector<TimingRow> measure_speedup(
    const std::vector<std::pair<Index, double>>& train_times,
    double baseline_seconds);

// Writes sweep.csv (dataset,threat_model,defense,eta,retained_accuracy) and
// timing.csv (k,train_seconds,speedup,avg_retained_accuracy); 6 significant
// digits, LF line endings. Refuses to write an empty report.
void emit_report(const SweepReport& report, const std::filesystem::path& dir);

}  // namespace gradshield
