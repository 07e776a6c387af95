#include "gradshield/defense.hpp"

#include "gradshield/model_io.hpp"

#include <fstream>

namespace gradshield {

std::vector<LayerSpec> classifier_layers(Index input_dim) {
  return {{input_dim, 100, Activation::kRelu},
          {100, 100, Activation::kRelu},
          {100, 10, Activation::kSoftmax}};
}

DaeCorpus build_dae_corpus(const LabeledDataset& train, const MlpModel<float>& target,
                           Rng& rng) {
  if (target.layers.back().activation != Activation::kSoftmax) {
    throw ShapeError("build_dae_corpus: target model is not a classifier");
  }
  if (train.size() < 2) throw DataError("build_dae_corpus: need at least 2 samples");

  const auto [low_half, high_half] = split_random(train, train.size() / 2, rng);

  AttackConfig low{0.25, false};
  AttackConfig high{0.50, false};
  const Index batch = 256;
  const MatF adv_low = attack_batched(target, low_half, low, batch);
  const MatF adv_high = attack_batched(target, high_half, high, batch);

  const Index n = train.size();
  DaeCorpus corpus;
  corpus.inputs.resize(n + low_half.size() + high_half.size(), train.dim());
  corpus.targets.resize(corpus.inputs.rows(), train.dim());

  Index row = 0;
  corpus.inputs.middleRows(row, adv_low.rows()) = adv_low;
  corpus.targets.middleRows(row, adv_low.rows()) = low_half.images;
  row += adv_low.rows();
  corpus.inputs.middleRows(row, adv_high.rows()) = adv_high;
  corpus.targets.middleRows(row, adv_high.rows()) = high_half.images;
  row += adv_high.rows();
  corpus.inputs.middleRows(row, n) = train.images;
  corpus.targets.middleRows(row, n) = train.images;
  return corpus;
}

void shuffle_corpus(DaeCorpus& corpus, Rng& rng) {
  const std::vector<Index> order = shuffled_indices(corpus.inputs.rows(), rng);
  corpus.inputs = take_rows(corpus.inputs, order);
  corpus.targets = take_rows(corpus.targets, order);
}

TrainedModel train_dae(const DaeCorpus& corpus, const DaeSpec& spec,
                       const TrainConfig& cfg) {
  if (corpus.inputs.rows() != corpus.targets.rows() ||
      corpus.inputs.cols() != corpus.targets.cols()) {
    throw ShapeError("train_dae: corpus inputs " + shape_str(corpus.inputs) +
                     " vs targets " + shape_str(corpus.targets));
  }
  TrainConfig dae_cfg = cfg;
  dae_cfg.loss = LossKind::kMse;

  Rng init_rng(Rng::derive_seed(cfg.seed, "dae-init"));
  TrainedModel out{make_mlp<float>(spec.layers(corpus.inputs.cols()), init_rng), {}};
  out.stats = train(out.model, corpus.inputs, corpus.targets, dae_cfg);
  return out;
}

MatF encode(const MlpModel<float>& dae, const MatF& x) {
  if (dae.layer_count() < 3) {
    throw ShapeError("encode: model has fewer than 3 layers");
  }
  MatF a = x;
  for (std::size_t i = 0; i < 3; ++i) {
    MatF z = a * dae.weights[i];
    z.rowwise() += dae.biases[i];
    a = detail::apply_activation(dae.layers[i].activation, std::move(z));
  }
  return a;
}

MlpModel<float> encoder_model(const MlpModel<float>& dae) {
  if (dae.layer_count() < 3) {
    throw ShapeError("encoder_model: model has fewer than 3 layers");
  }
  MlpModel<float> enc;
  enc.layers.assign(dae.layers.begin(), dae.layers.begin() + 3);
  enc.weights.assign(dae.weights.begin(), dae.weights.begin() + 3);
  enc.biases.assign(dae.biases.begin(), dae.biases.begin() + 3);
  return enc;
}

TrainedModel train_defense_classifier(const MatF& encoded_train,
                                      const MatF& labels_onehot,
                                      const TrainConfig& cfg) {
  TrainConfig clf_cfg = cfg;
  clf_cfg.loss = LossKind::kCrossEntropy;
  Rng init_rng(Rng::derive_seed(cfg.seed, "defense-init"));
  TrainedModel out{make_mlp<float>(classifier_layers(encoded_train.cols()), init_rng), {}};
  out.stats = train(out.model, encoded_train, labels_onehot, clf_cfg);
  return out;
}

DefenseBundle::DefenseBundle(MlpModel<float> dae, MlpModel<float> defense_classifier)
    : dae_(std::move(dae)), classifier_(std::move(defense_classifier)) {
  if (dae_.layer_count() != 6) {
    throw ShapeError("DefenseBundle: expected a 6-layer autoencoder, got " +
                     std::to_string(dae_.layer_count()) + " layers");
  }
  encoder_ = encoder_model(dae_);
  k_ = encoder_.output_dim();
  if (classifier_.input_dim() != k_) {
    throw ShapeError("DefenseBundle: classifier input " +
                     std::to_string(classifier_.input_dim()) +
                     " != bottleneck width " + std::to_string(k_));
  }
}

Labels defend_classify(const DefenseBundle& bundle, const MatF& x_test) {
  return classify(bundle.defense_classifier(), encode(bundle.dae(), x_test));
}

TrainedModel train_reconstruction_classifier(const MlpModel<float>& dae,
                                             const LabeledDataset& train_set,
                                             const TrainConfig& cfg) {
  const MatF reconstructed = forward(dae, train_set.images);
  TrainConfig clf_cfg = cfg;
  clf_cfg.loss = LossKind::kCrossEntropy;
  Rng init_rng(Rng::derive_seed(cfg.seed, "recon-init"));
  TrainedModel out{make_mlp<float>(classifier_layers(train_set.dim()), init_rng), {}};
  out.stats = train(out.model, reconstructed, train_set.labels_onehot, clf_cfg);
  return out;
}

Labels dae_output_defense(const MlpModel<float>& dae,
                          const MlpModel<float>& reconstruction_classifier,
                          const MatF& x) {
  return classify(reconstruction_classifier, forward(dae, x));
}

TrainedModel adversarial_retrain(const MlpModel<float>& target,
                                 const LabeledDataset& train_set,
                                 const std::vector<double>& etas,
                                 const TrainConfig& cfg) {
  if (etas.empty()) throw ConfigError("adversarial_retrain: etas must be nonempty");

  const Index n = train_set.size();
  const Index parts = static_cast<Index>(etas.size());

  // Random partition of the training set, one part per eta.
  Rng part_rng(Rng::derive_seed(cfg.seed, "retrain-split"));
  const std::vector<Index> order = shuffled_indices(n, part_rng);

  MatF inputs(2 * n, train_set.dim());
  MatF labels(2 * n, train_set.labels_onehot.cols());
  inputs.topRows(n) = train_set.images;
  labels.topRows(n) = train_set.labels_onehot;

  Index row = n;
  for (Index p = 0; p < parts; ++p) {
    const Index begin = p * n / parts;
    const Index end = (p + 1) * n / parts;
    const std::vector<Index> part_idx(order.begin() + begin, order.begin() + end);
    const LabeledDataset part = train_set.subset(part_idx);
    const AttackConfig atk{etas[static_cast<std::size_t>(p)], false};
    inputs.middleRows(row, part.size()) = attack_batched(target, part, atk, 256);
    labels.middleRows(row, part.size()) = part.labels_onehot;
    row += part.size();
  }

  TrainConfig clf_cfg = cfg;
  clf_cfg.loss = LossKind::kCrossEntropy;
  Rng init_rng(Rng::derive_seed(cfg.seed, "retrain-init"));
  TrainedModel out{make_mlp<float>(classifier_layers(train_set.dim()), init_rng), {}};
  out.stats = train(out.model, inputs, labels, clf_cfg);
  return out;
}

void save_bundle(const DefenseBundle& bundle, const std::filesystem::path& dir,
                 const std::map<std::string, std::string>& extra_meta) {
  std::filesystem::create_directories(dir);
  save_model(bundle.dae(), dir / "dae.mlp1");
  save_model(bundle.defense_classifier(), dir / "defense.mlp1");
  std::ofstream meta(dir / "bundle.meta", std::ios::trunc);
  if (!meta) throw DataError("cannot write " + (dir / "bundle.meta").string());
  meta << "k=" << bundle.k() << "\n";
  for (const auto& [key, value] : extra_meta) {
    meta << key << "=" << value << "\n";
  }
}

DefenseBundle load_bundle(const std::filesystem::path& dir) {
  auto dae = load_model<float>(dir / "dae.mlp1");
  auto clf = load_model<float>(dir / "defense.mlp1");
  DefenseBundle bundle(std::move(dae), std::move(clf));

  std::ifstream meta(dir / "bundle.meta");
  if (!meta) throw DataError("cannot open " + (dir / "bundle.meta").string());
  std::string line;
  while (std::getline(meta, line)) {
    if (line.rfind("k=", 0) == 0) {
      const Index k = std::stoll(line.substr(2));
      if (k != bundle.k()) {
        throw DataError(dir.string() + ": metadata k=" + std::to_string(k) +
                        " does not match bottleneck width " +
                        std::to_string(bundle.k()));
      }
    }
  }
  return bundle;
}

}  // namespace gradshield
