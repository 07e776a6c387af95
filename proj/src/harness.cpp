#include "gradshield/harness.hpp"

#include "gradshield/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace gradshield {

std::vector<LayerSpec> substitute_layers(Index input_dim) {
  return {{input_dim, 200, Activation::kRelu},
          {200, 200, Activation::kRelu},
          {200, 100, Activation::kRelu},
          {100, 10, Activation::kSoftmax}};
}

TrainedModel train_substitute(const LabeledDataset& train_set, const TrainConfig& cfg) {
  TrainConfig clf_cfg = cfg;
  clf_cfg.loss = LossKind::kCrossEntropy;
  Rng init_rng(Rng::derive_seed(cfg.seed, "substitute-init"));
  TrainedModel out{make_mlp<float>(substitute_layers(train_set.dim()), init_rng), {}};
  out.stats = train(out.model, train_set.images, train_set.labels_onehot, clf_cfg);
  return out;
}

double retained_accuracy(const std::vector<bool>& clean_correct,
                         const Labels& defended_pred, const Labels& truth) {
  if (static_cast<Index>(clean_correct.size()) != defended_pred.size() ||
      defended_pred.size() != truth.size()) {
    throw ShapeError("retained_accuracy: vector lengths differ (" +
                     std::to_string(clean_correct.size()) + ", " +
                     std::to_string(defended_pred.size()) + ", " +
                     std::to_string(truth.size()) + ")");
  }
  Index denominator = 0;
  Index numerator = 0;
  for (Index i = 0; i < truth.size(); ++i) {
    if (!clean_correct[static_cast<std::size_t>(i)]) continue;
    ++denominator;
    if (defended_pred[i] == truth[i]) ++numerator;
  }
  if (denominator == 0) {
    throw NumericError("retained_accuracy: zero denominator (no initially-correct samples)");
  }
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

SweepReport run_sweep(const std::vector<SweepDataset>& datasets,
                      const std::vector<ThreatKind>& threat_models,
                      const std::vector<SweepDefense>& defenses,
                      const std::vector<double>& eta_grid) {
  if (datasets.empty() || threat_models.empty() || defenses.empty() || eta_grid.empty()) {
    throw ConfigError("run_sweep: datasets, threat models, defenses and eta grid must be nonempty");
  }

  SweepReport report;
  report.eta_grid = eta_grid;

  for (const auto& ds : datasets) {
    if (ds.test == nullptr || ds.target == nullptr) {
      throw ConfigError("run_sweep: dataset '" + ds.name + "' is missing its test set or target model");
    }
    // Denominator: samples the undefended target classifies correctly on
    // clean data; fixed across every (threat, defense, eta) cell.
    const Labels clean_pred = classify(*ds.target, ds.test->images);
    std::vector<bool> clean_correct(static_cast<std::size_t>(ds.test->size()));
    for (Index i = 0; i < ds.test->size(); ++i) {
      clean_correct[static_cast<std::size_t>(i)] = clean_pred[i] == ds.test->labels[i];
    }

    for (const ThreatKind threat : threat_models) {
      const MlpModel<float>* source = nullptr;
      if (threat == ThreatKind::kSemiWhiteBox) {
        source = ds.target;
      } else {
        if (ds.substitute == nullptr) {
          throw ConfigError("run_sweep: black_box threat on '" + ds.name +
                            "' requires a substitute model");
        }
        if (ds.substitute == ds.target) {
          throw ConfigError("run_sweep: the substitute must be distinct from the target");
        }
        source = ds.substitute;
      }

      for (const double eta : eta_grid) {
        const AttackConfig atk{eta, false};
        const MatF adversarial = attack_batched(*source, *ds.test, atk, 256);
        for (const auto& defense : defenses) {
          const Labels pred = defense.classify(adversarial);
          SweepRecord rec;
          rec.dataset = ds.name;
          rec.threat_model = threat_name(threat);
          rec.defense = defense.name;
          rec.eta = eta;
          rec.retained_accuracy = retained_accuracy(clean_correct, pred, ds.test->labels);
          report.records.push_back(std::move(rec));
        }
      }
    }
  }

  std::sort(report.records.begin(), report.records.end(),
            [](const SweepRecord& a, const SweepRecord& b) {
              return std::tie(a.dataset, a.threat_model, a.defense, a.eta) <
                     std::tie(b.dataset, b.threat_model, b.defense, b.eta);
            });

  // Per-defense averages over the grid.
  std::map<std::string, std::pair<double, Index>> sums;
  for (const auto& rec : report.records) {
    auto& [sum, count] = sums[SweepReport::average_key(rec.dataset, rec.threat_model, rec.defense)];
    sum += rec.retained_accuracy;
    count += 1;
  }
  for (const auto& [key, sum_count] : sums) {
    report.averages[key] = sum_count.first / static_cast<double>(sum_count.second);
  }
  return report;
}

std::vector<TimingRow> measure_speedup(
    const std::vector<std::pair<Index, double>>& train_times,
    double baseline_seconds) {
  if (!(baseline_seconds > 0)) {
    throw NumericError("measure_speedup: baseline time must be positive");
  }
  std::vector<TimingRow> rows;
  rows.reserve(train_times.size());
  for (const auto& [k, seconds] : train_times) {
    if (!(seconds > 0)) {
      throw NumericError("measure_speedup: zero training time for k=" + std::to_string(k));
    }
    TimingRow row;
    row.k = k;
    row.train_seconds = seconds;
    row.speedup = std::round(baseline_seconds / seconds * 100.0) / 100.0;
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string format_eta(double eta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", eta);
  return buf;
}

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_sig6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_speedup(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void emit_report(const SweepReport& report, const std::filesystem::path& dir) {
  if (report.records.empty()) {
    throw DataError("emit_report: refusing to write an empty report");
  }
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "sweep.csv", std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "sweep.csv").string());
    out << "dataset,threat_model,defense,eta,retained_accuracy\n";
    for (const auto& rec : report.records) {
      out << rec.dataset << ',' << rec.threat_model << ',' << rec.defense << ','
          << format_eta(rec.eta) << ',' << format_fraction(rec.retained_accuracy)
          << '\n';
    }
    if (!out) throw DataError("write error on " + (dir / "sweep.csv").string());
  }

  if (!report.timing.empty()) {
    std::ofstream out(dir / "timing.csv", std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "timing.csv").string());
    out << "k,train_seconds,speedup,avg_retained_accuracy\n";
    for (const auto& row : report.timing) {
      out << row.k << ',' << format_sig6(row.train_seconds) << ','
          << format_speedup(row.speedup) << ','
          << format_fraction(row.avg_retained_accuracy) << '\n';
    }
    if (!out) throw DataError("write error on " + (dir / "timing.csv").string());
  }
}

}  // namespace gradshield
