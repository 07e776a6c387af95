#pragma once

#include "gradshield/attack.hpp"
#include "gradshield/dataset.hpp"
#include "gradshield/net.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gradshield {

// Denoising autoencoder shape: input -> 512 -> 256 -> k -> 256 -> 512 ->
// input, hidden layers with no activation, sigmoid output so reconstructions
// stay in [0,1].
struct DaeSpec {
  Index k = 47;

  std::vector<LayerSpec> layers(Index input_dim) const {
    if (k < 1 || k >= input_dim) {
      throw ConfigError("dae: k must lie in [1, " + std::to_string(input_dim - 1) +
                        "], got " + std::to_string(k));
    }
    const Activation lin = Activation::kLinear;
    return {{input_dim, 512, lin}, {512, 256, lin},      {256, k, lin},
            {k, 256, lin},         {256, 512, lin},      {512, input_dim, Activation::kSigmoid}};
  }
};

// Bottleneck widths covered by the full replication sweep.
inline const std::vector<Index>& replication_k_values() {
  static const std::vector<Index> ks = {16, 32, 47, 64, 80, 94, 157};
  return ks;
}

// The target-classifier architecture, parameterized on input width:
// in -> 100(relu) -> 100(relu) -> 10(softmax).
std::vector<LayerSpec> classifier_layers(Index input_dim);

struct DaeCorpus {
  MatF inputs;   // adversarial + clean rows
  MatF targets;  // the corresponding clean images, row for row
};

// Corpus per the defense recipe: half the training set attacked at eta=0.25,
// the other half at eta=0.50 (random split), plus every clean sample mapped
// to itself. Targets are always the clean images.
DaeCorpus build_dae_corpus(const LabeledDataset& train, const MlpModel<float>& target,
                           Rng& rng);

// Shuffle corpus rows (inputs and targets together).
void shuffle_corpus(DaeCorpus& corpus, Rng& rng);

// Adam + mse reconstruction training.
struct TrainedModel {
  MlpModel<float> model;
  TrainResult stats;
};
TrainedModel train_dae(const DaeCorpus& corpus, const DaeSpec& spec,
                       const TrainConfig& cfg);

// Bottleneck representation: forward through the DAE's first three layers.
MatF encode(const MlpModel<float>& dae, const MatF& x);

// The encoder as a standalone three-layer model (weights copied).
MlpModel<float> encoder_model(const MlpModel<float>& dae);

// Classifier of the target's architecture but with a k-dimensional input:
// k -> 100(relu) -> 100(relu) -> 10(softmax).
TrainedModel train_defense_classifier(const MatF& encoded_train,
                                      const MatF& labels_onehot,
                                      const TrainConfig& cfg);

// Trained DAE plus the reduced-dimension classifier. The encoder is copied
// out of the DAE at construction; the bundle is immutable afterwards.
class DefenseBundle {
 public:
  DefenseBundle(MlpModel<float> dae, MlpModel<float> defense_classifier);

  const MlpModel<float>& dae() const { return dae_; }
  const MlpModel<float>& encoder() const { return encoder_; }
  const MlpModel<float>& defense_classifier() const { return classifier_; }
  Index k() const { return k_; }

 private:
  MlpModel<float> dae_;
  MlpModel<float> encoder_;
  MlpModel<float> classifier_;
  Index k_ = 0;
};

// Real-time defense: labels = classifier(encoder(x)).
Labels defend_classify(const DefenseBundle& bundle, const MatF& x_test);

// Classifier of the target's architecture trained on DAE reconstructions of
// the clean training data; the downstream model of the DAE-output baseline.
TrainedModel train_reconstruction_classifier(const MlpModel<float>& dae,
                                             const LabeledDataset& train,
                                             const TrainConfig& cfg);

// DAE-output (filtering) baseline: classify the full reconstruction q(p(x)).
Labels dae_output_defense(const MlpModel<float>& dae,
                          const MlpModel<float>& reconstruction_classifier,
                          const MatF& x);

// Adversarial-retraining baseline: a fresh model of the target's architecture
// trained on clean data plus FGS examples generated against the original
// target at each eta (the training set is split evenly across the etas),
// all with clean labels.
TrainedModel adversarial_retrain(const MlpModel<float>& target,
                                 const LabeledDataset& train,
                                 const std::vector<double>& etas,
                                 const TrainConfig& cfg);

// Bundle directory: dae.mlp1, defense.mlp1, bundle.meta (key=value lines;
// always records k, callers append seeds/recipe).
void save_bundle(const DefenseBundle& bundle, const std::filesystem::path& dir,
                 const std::map<std::string, std::string>& extra_meta = {});
DefenseBundle load_bundle(const std::filesystem::path& dir);

}  // namespace gradshield
