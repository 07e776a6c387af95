#include "gradshield/net.hpp"

#include <doctest.h>

#include <cmath>

using namespace gradshield;

TEST_SUITE("net") {

TEST_CASE("identity linear layer reproduces input") {
  MlpModel<float> model;
  model.layers = {{4, 4, Activation::kLinear}};
  model.weights = {MatF::Identity(4, 4)};
  model.biases = {RowVec<float>::Zero(4)};

  Rng rng(1);
  MatF x(3, 4);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2.0f, 2.0f);
  CHECK(forward(model, x) == x);
}

TEST_CASE("hand-computed softmax probabilities") {
  // z = x*W + b with x=[0.3,0.7] gives z=[0.75,0.9]; softmax follows.
  MlpModel<double> model;
  model.layers = {{2, 2, Activation::kSoftmax}};
  MatD w(2, 2);
  w << 1.0, -1.0, 0.5, 2.0;
  RowVec<double> b(2);
  b << 0.1, -0.2;
  model.weights = {w};
  model.biases = {b};

  MatD x(1, 2);
  x << 0.3, 0.7;
  const MatD p = forward(model, x);
  CHECK(p(0, 0) == doctest::Approx(0.46257015465625045).epsilon(1e-9));
  CHECK(p(0, 1) == doctest::Approx(0.5374298453437496).epsilon(1e-9));
  CHECK(p.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one with entries in [0,1]") {
  Rng rng(17);
  auto model = make_mlp<float>({{8, 16, Activation::kRelu}, {16, 10, Activation::kSoftmax}}, rng);
  MatF x(32, 8);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-3.0f, 3.0f);
  const MatF p = forward(model, x);
  for (Index r = 0; r < p.rows(); ++r) {
    CHECK(std::abs(p.row(r).sum() - 1.0f) < 1e-5f);
  }
  for (Index i = 0; i < p.size(); ++i) {
    CHECK(p.data()[i] >= 0.0f);
    CHECK(p.data()[i] <= 1.0f);
  }
}

TEST_CASE("softmax survives large logits") {
  MlpModel<float> model;
  model.layers = {{2, 2, Activation::kSoftmax}};
  model.weights = {MatF::Identity(2, 2) * 1000.0f};
  model.biases = {RowVec<float>::Zero(2)};
  MatF x(1, 2);
  x << 100.0f, -50.0f;
  const MatF p = forward(model, x);
  CHECK(p.allFinite());
  CHECK(p(0, 0) == doctest::Approx(1.0f));
}

TEST_CASE("relu output is nonnegative") {
  Rng rng(23);
  auto model = make_mlp<float>({{6, 12, Activation::kRelu}}, rng);
  MatF x(20, 6);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-5.0f, 5.0f);
  const MatF a = forward(model, x);
  CHECK((a.array() >= 0.0f).all());
}

TEST_CASE("forward rejects wrong input width") {
  Rng rng(2);
  auto model = make_mlp<float>({{4, 3, Activation::kLinear}}, rng);
  const MatF wide = MatF::Zero(2, 5);
  CHECK_THROWS_AS(forward(model, wide), ShapeError);
}

TEST_CASE("softmax only allowed as final layer") {
  CHECK_THROWS_AS(
      validate_layer_chain({{4, 4, Activation::kSoftmax}, {4, 2, Activation::kLinear}}),
      ShapeError);
}

TEST_CASE("layer chain must be consistent") {
  CHECK_THROWS_AS(validate_layer_chain({{4, 3, Activation::kRelu}, {5, 2, Activation::kLinear}}),
                  ShapeError);
}

TEST_CASE("mse of identical matrices is zero") {
  MatF a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  CHECK(loss(LossKind::kMse, a, a) == 0.0f);
}

TEST_CASE("cross entropy of a perfect one-hot prediction is zero") {
  MatF y(2, 3);
  y << 1, 0, 0, 0, 0, 1;
  CHECK(loss(LossKind::kCrossEntropy, y, y) == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("cross entropy of the uniform 4-class prediction is ln 4") {
  MatD pred(1, 4);
  pred << 0.25, 0.25, 0.25, 0.25;
  MatD y = MatD::Zero(1, 4);
  y(0, 2) = 1.0;
  CHECK(loss(LossKind::kCrossEntropy, pred, y) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-12));
}

TEST_CASE("losses are nonnegative") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    MatD pred(4, 5), y(4, 5);
    for (Index i = 0; i < pred.size(); ++i) {
      pred.data()[i] = rng.uniform(0.0, 1.0);
      y.data()[i] = rng.uniform(0.0, 1.0);
    }
    CHECK(loss(LossKind::kMse, pred, y) >= 0.0);
    CHECK(loss(LossKind::kCrossEntropy, pred, y) >= 0.0);
  }
}

TEST_CASE("loss rejects shape mismatch") {
  const MatF a = MatF::Zero(2, 3);
  const MatF b = MatF::Zero(3, 2);
  CHECK_THROWS_AS(loss(LossKind::kMse, a, b), ShapeError);
}

TEST_CASE("cross entropy stays finite on a confident mistake") {
  MatF pred(1, 2);
  pred << 1.0f, 0.0f;  // zero probability on the true class
  MatF y(1, 2);
  y << 0.0f, 1.0f;
  const float l = loss(LossKind::kCrossEntropy, pred, y);
  CHECK(std::isfinite(l));
  CHECK(l > 20.0f);  // -log(1e-12) is about 27.6
}

TEST_CASE("model cast preserves structure") {
  Rng rng(31);
  auto model = make_mlp<float>({{3, 4, Activation::kRelu}, {4, 2, Activation::kSoftmax}}, rng);
  const auto d = model.cast<double>();
  CHECK(d.layer_count() == 2);
  CHECK(d.weights[0](1, 2) == doctest::Approx(model.weights[0](1, 2)));
  CHECK(d.parameter_count() == model.parameter_count());
  CHECK(model.parameter_count() == 3 * 4 + 4 + 4 * 2 + 2);
}

}  // TEST_SUITE
