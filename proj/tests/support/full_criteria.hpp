#pragma once

// Threshold evaluation for the reported-number criteria (6-11), factored out
// of the acceptance binary so the logic itself is unit-testable without the
// multi-hour runs that produce real reports.

#include "gradshield/harness.hpp"

#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace full_criteria {

using gradshield::Index;
using gradshield::SweepReport;

struct CriterionResult {
  int number = 0;
  bool pass = false;
  std::string detail;
};

inline double avg_of(const SweepReport& r, const std::string& dataset,
                     const std::string& threat, const std::string& defense) {
  return r.averages.at(SweepReport::average_key(dataset, threat, defense));
}

inline std::vector<CriterionResult> evaluate(const SweepReport& mnist,
                                             const SweepReport& fashion) {
  std::vector<CriterionResult> results;
  char buf[256];

  {
    const double none = avg_of(mnist, "mnist", "semi_white_box", "none");
    const double dae47 = avg_of(mnist, "mnist", "semi_white_box", "dae_hidden_47");
    std::snprintf(buf, sizeof buf,
                  "mnist semi-white-box: none=%.4f (<=0.30), dae_hidden_47=%.4f (>=0.90), "
                  "margin=%.4f (>=0.50)",
                  none, dae47, dae47 - none);
    results.push_back({6, none <= 0.30 && dae47 >= 0.90 && dae47 - none >= 0.50, buf});
  }
  {
    const double none = avg_of(mnist, "mnist", "black_box", "none");
    const double dae47 = avg_of(mnist, "mnist", "black_box", "dae_hidden_47");
    std::snprintf(buf, sizeof buf,
                  "mnist black-box: dae_hidden_47=%.4f (>=0.65), none=%.4f (<=0.35)", dae47,
                  none);
    results.push_back({7, dae47 >= 0.65 && none <= 0.35, buf});
  }
  {
    const double none = avg_of(fashion, "fashion_mnist", "semi_white_box", "none");
    const double dae47 = avg_of(fashion, "fashion_mnist", "semi_white_box", "dae_hidden_47");
    std::snprintf(buf, sizeof buf,
                  "fashion semi-white-box: dae_hidden_47=%.4f (>=0.75), none=%.4f (<=0.30)",
                  dae47, none);
    results.push_back({8, dae47 >= 0.75 && none <= 0.30, buf});
  }
  {
    const double dae47 = avg_of(fashion, "fashion_mnist", "black_box", "dae_hidden_47");
    std::snprintf(buf, sizeof buf, "fashion black-box: dae_hidden_47=%.4f (>=0.52)", dae47);
    results.push_back({9, dae47 >= 0.52, buf});
  }
  {
    std::map<Index, double> speedup;
    for (const auto& row : mnist.timing) speedup[row.k] = row.speedup;
    const bool has47 = speedup.count(47) > 0;
    const double s47 = has47 ? speedup.at(47) : 0;
    int inversions = 0;
    const std::vector<Index> order = {157, 94, 80, 64, 47, 32, 16};
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      if (speedup.count(order[i]) && speedup.count(order[i + 1]) &&
          speedup.at(order[i + 1]) < speedup.at(order[i])) {
        ++inversions;
      }
    }
    std::snprintf(buf, sizeof buf,
                  "speedup: f(k=47) %.2fx (>=1.5x), inversions along decreasing k: %d (<=1)",
                  s47, inversions);
    results.push_back({10, has47 && s47 >= 1.5 && inversions <= 1, buf});
  }
  {
    bool ok = true;
    double worst = 1.0;
    int seen = 0;
    for (const auto& rec : mnist.records) {
      if (rec.dataset == "mnist" && rec.threat_model == "semi_white_box" &&
          rec.defense == "dae_hidden_47" && rec.eta <= 0.20 + 1e-12) {
        ++seen;
        worst = std::min(worst, rec.retained_accuracy);
        if (rec.retained_accuracy < 0.93) ok = false;
      }
    }
    std::snprintf(buf, sizeof buf,
                  "high-SNR plateau: min retained accuracy over %d etas <=0.20 is %.4f (>=0.93)",
                  seen, worst);
    results.push_back({11, ok && seen > 0, buf});
  }
  return results;
}

}  // namespace full_criteria
