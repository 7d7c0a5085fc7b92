// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fibereq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include "fibereq/channel.hpp"
#include "fibereq/metrics.hpp"
#include "fibereq/train.hpp"
#include "test_util.hpp"

using namespace fibereq;
using namespace fibereq::nn;
using fibereq::test::random_mat;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.hidden = 6;
  d.window = 31;
  d.hidden_kernel = 5;
  d.out_kernel = 11;
  return d;
}

// Received block = transmitted block plus circular Gaussian noise.
SequenceData awgn_sequence(std::size_t n, double sigma, std::uint64_t seed) {
  const SymbolBlock tx = make_symbol_block(n, seed, 34e9);
  const SymbolBlock rx = add_transceiver_noise(tx, sigma, seed + 100);
  return SequenceData::from_blocks(rx, tx, 0, n);
}

double raw_q_over(const Equalized& eq, const SequenceData& data) {
  CVec raw(eq.symbols.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(eq.first + i);
    raw[i] = cplx(data.features(0, col), data.features(1, col));
  }
  return q_factor(equalized_ber(Equalized{raw, eq.first}, data));
}

}  // namespace

TEST_CASE("Adam first step moves each coordinate by the learning rate") {
  Adam<double> adam;
  std::vector<Adam<double>::M> p{Mat::Zero(2, 3)};
  const Mat g = random_mat(2, 3, 4, 2.0);
  adam.reset(p);
  adam.step(p, {g}, 0.01);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    CHECK(p[0](i) == doctest::Approx(-0.01 * (g(i) > 0 ? 1.0 : -1.0)).epsilon(1e-6));
  }
  CHECK(adam.steps() == 1);
}

TEST_CASE("Adam leaves parameters alone for zero gradients") {
  Adam<double> adam;
  const Mat start = random_mat(3, 3, 1, 1.0);
  std::vector<Adam<double>::M> p{start};
  adam.reset(p);
  for (int i = 0; i < 3; ++i) adam.step(p, {Mat::Zero(3, 3)}, 0.1);
  CHECK(p[0] == start);
}

TEST_CASE("Adam two-step trace with bias correction") {
  Adam<double> adam;
  std::vector<Adam<double>::M> p{Mat::Constant(1, 1, 1.0)};
  adam.reset(p);
  adam.step(p, {Mat::Constant(1, 1, 0.5)}, 0.1);
  adam.step(p, {Mat::Constant(1, 1, -0.2)}, 0.1);
  const double m1 = 0.1 * 0.5, v1 = 0.001 * 0.25;
  const double p1 = 1.0 - 0.1 * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + 1e-8);
  const double m2 = 0.9 * m1 + 0.1 * -0.2, v2 = 0.999 * v1 + 0.001 * 0.04;
  const double p2 = p1 - 0.1 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(p[0](0) == doctest::Approx(p2).epsilon(1e-14));
}

TEST_CASE("loss decreases over 50 Adam steps on a fixed batch") {
  const ModelDims d = small_dims();
  for (Architecture arch : {Architecture::BiLstmCnn, Architecture::DeepCnn}) {
    EqualizerModel m = EqualizerModel::create(arch, d, 2);
    const SequenceData data = awgn_sequence(512, 0.1, 5);
    std::vector<std::size_t> starts{0, 40, 97, 200, 311, 420};
    const auto x = gather_windows<double>(data.features, starts, d.window);
    Network<double> net(m);
    Adam<double> adam;
    adam.reset(net.params());
    Mat target(d.outputs, d.n_out() * static_cast<int>(starts.size()));
    for (int t = 0; t < d.n_out(); ++t) {
      for (std::size_t b = 0; b < starts.size(); ++b) {
        target.col(t * static_cast<int>(starts.size()) + static_cast<int>(b)) =
            data.targets.col(static_cast<Eigen::Index>(starts[b]) + d.offset() + t);
      }
    }
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 50; ++step) {
      const Mat diff = net.forward(x, static_cast<int>(starts.size())) - target;
      const double l = diff.squaredNorm() / static_cast<double>(diff.size());
      if (step == 0) first = l;
      last = l;
      net.backward(2.0 / static_cast<double>(diff.size()) * diff);
      adam.step(net.params(), net.grads(), 1e-2);
    }
    CHECK(last < 0.5 * first);
  }
}

TEST_CASE("zero epochs returns the initial model") {
  const ModelDims d = small_dims();
  const EqualizerModel m = EqualizerModel::create(Architecture::DeepCnn, d, 3);
  const SequenceData data = awgn_sequence(2048, 0.1, 1);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const TrainResult r = train(m, data, data, cfg);
  for (std::size_t i = 0; i < m.tensors.size(); ++i) CHECK(r.model.tensors[i] == m.tensors[i]);
  CHECK(r.history.epochs.size() == 1);
  CHECK(r.history.best_epoch == 0);
}

TEST_CASE("training on AWGN matches the unequalized Q-factor") {
  const ModelDims d = small_dims();
  const double sigma = 0.28;
  const SequenceData tr = awgn_sequence(std::size_t{1} << 16, sigma, 10);
  const SequenceData val = awgn_sequence(std::size_t{1} << 14, sigma, 20);
  const SequenceData test = awgn_sequence(std::size_t{1} << 16, sigma, 30);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 2e-3;
  cfg.max_epochs = 200;
  cfg.symbols_per_epoch = std::size_t{1} << 14;
  cfg.seed = 4;
  const TrainResult r = train(EqualizerModel::create(Architecture::DeepCnn, d, 1), tr, val, cfg);
  const Equalized eq = equalize(r.model, test);
  const double q_model = q_factor(equalized_ber(eq, test));
  const double q_raw = raw_q_over(eq, test);
  CAPTURE(q_model);
  CAPTURE(q_raw);
  CHECK(std::abs(q_model - q_raw) < 0.1);

  SUBCASE("retraining with the exact activations keeps the Q-factor") {
    TrainConfig re = cfg;
    re.max_epochs = 5;
    re.learning_rate = 5e-4;
    const TrainResult again =
        retrain_with_approximation(r.model, act::make_activation_set(act::Family::Exact, 0), tr, val, re);
    const double q_again = q_factor(evaluate_ber(again.model, test));
    CHECK(std::abs(q_again - q_model) < 0.1);
  }
}

TEST_CASE("seeded training is bit-reproducible") {
  const ModelDims d = small_dims();
  const SequenceData tr = awgn_sequence(8192, 0.2, 1);
  const SequenceData val = awgn_sequence(2048, 0.2, 2);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 3;
  cfg.symbols_per_epoch = 2048;
  for (Architecture arch : {Architecture::BiLstmCnn, Architecture::DeepCnn}) {
    const EqualizerModel m = EqualizerModel::create(arch, d, 6);
    const TrainResult a = train(m, tr, val, cfg);
    const TrainResult b = train(m, tr, val, cfg);
    for (std::size_t i = 0; i < a.model.tensors.size(); ++i) CHECK(a.model.tensors[i] == b.model.tensors[i]);
    CHECK(a.history.best_epoch == b.history.best_epoch);
  }
}

TEST_CASE("a diverging run stops with a numeric error") {
  const ModelDims d = small_dims();
  EqualizerModel m = EqualizerModel::create(Architecture::DeepCnn, d, 6);
  const SequenceData tr = awgn_sequence(4096, 0.2, 1);
  SequenceData bad = tr;
  bad.features(0, 100) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 2;
  cfg.symbols_per_epoch = 1 << 14;
  CHECK_THROWS_AS(train(m, bad, tr, cfg), NumericError);
}

TEST_CASE("sliding windows cover every interior symbol exactly once") {
  const ModelDims d;  // 81 in, 61 out
  for (std::size_t n : {81u, 141u, 142u, 1000u, 4096u}) {
    const SequenceData data = awgn_sequence(n, 0.0, 3);
    const Equalized eq = equalize(EqualizerModel::zeros(Architecture::DeepCnn, d), data);
    const std::size_t windows = (n - 81) / 61 + 1;
    CHECK(eq.first == 10);
    CHECK(eq.symbols.size() == windows * 61);
    CHECK(eq.first + eq.symbols.size() + 10 <= n);
    // The next window would not fit.
    CHECK(windows * 61 + 81 > n);
  }
}

TEST_CASE("equalize in double and single precision agree") {
  const ModelDims d = small_dims();
  const SequenceData data = awgn_sequence(1024, 0.1, 3);
  const EqualizerModel m = EqualizerModel::create(Architecture::BiLstmCnn, d, 8);
  const Equalized a = equalize(m, data, Precision::Single);
  const Equalized b = equalize(m, data, Precision::Double);
  REQUIRE(a.symbols.size() == b.symbols.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.symbols.size(); ++i) worst = std::max(worst, std::abs(a.symbols[i] - b.symbols[i]));
  CHECK(worst < 1e-5);
  const auto n_out = static_cast<std::size_t>(d.n_out());
  for (std::size_t i = 0; i < a.symbols.size(); ++i) {
    const Mat w = data.features.block(0, static_cast<Eigen::Index>(i / n_out * n_out), 4, d.window).transpose();
    const Mat y = forward(m, w);
    const auto t = static_cast<Eigen::Index>(i % n_out);
    const cplx ref(y(t, 0), y(t, 1));
    CHECK(std::abs(b.symbols[i] - ref) < 1e-12);
  }
}

TEST_CASE("training configuration is validated") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
