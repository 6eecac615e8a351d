// Copyright 2026 The Zhyper Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "zhyper/error.hpp"
#include "zhyper/training.hpp"

using namespace zhyper;
using zt::randn;

namespace {

DatasetBundle tiny_bundle(std::uint64_t seed, std::size_t n_datasets = 2,
                          std::size_t n_examples = 6, std::size_t n_contexts = 2) {
  std::mt19937_64 gen(seed);
  DatasetBundle b;
  for (std::size_t d = 0; d < n_datasets; ++d) {
    Dataset ds;
    ds.id = "task" + std::to_string(d);
    for (std::size_t e = 0; e < n_examples; ++e) {
      ds.train.push_back({zt::random_ids(gen, 9, 11), 3});
      ds.eval.push_back({zt::random_ids(gen, 9, 11), 3});
    }
    std::vector<ContextRecord> ctx;
    for (std::size_t j = 0; j < n_contexts; ++j) {
      ctx.push_back({ds.id + "/d" + std::to_string(j), ds.id, "text", randn(gen, {6})});
    }
    b.datasets.push_back(std::move(ds));
    b.contexts.push_back(std::move(ctx));
  }
  return b;
}

TrainConfig quiet_config(TrainMode mode, std::size_t steps) {
  TrainConfig c;
  c.mode = mode;
  c.steps = steps;
  c.batch_size = 4;
  c.max_lr = 1e-2;
  c.warmup_fraction = 0.0;
  c.label_smoothing = 0.0;
  c.weight_decay = 0.0;
  c.neftune_alpha = 0.0;
  return c;
}

ConditionedModel tiny(TrainMode mode, std::uint64_t seed = 1, std::size_t rank = 2) {
  return build_model(zt::tiny_model(), zt::tiny_hyper(rank), mode, seed);
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.max_lr = 1.0;
  c.steps = 10;
  c.warmup_fraction = 0.2;
  CHECK(c.lr_at(0) == doctest::Approx(0.5));
  CHECK(c.lr_at(1) == doctest::Approx(1.0));
  CHECK(c.lr_at(2) == doctest::Approx(1.0));
  CHECK(c.lr_at(5) == doctest::Approx(5.0 / 8.0));
  CHECK(c.lr_at(9) == doctest::Approx(1.0 / 8.0));
  CHECK(c.lr_at(10) == 0.0);
  double peak = 0.0;
  for (std::size_t s = 0; s < 10; ++s) peak = std::max(peak, c.lr_at(s));
  CHECK(peak == 1.0);
}

TEST_CASE("default hyperparameters") {
  TrainConfig c;
  CHECK(c.max_lr == 2.5e-5);
  CHECK(c.batch_size == 8);
  CHECK(c.grad_accum == 1);
  CHECK(c.warmup_fraction == 0.2);
  CHECK(c.label_smoothing == 0.1);
  CHECK(c.weight_decay == 0.1);
  CHECK(c.neftune_alpha == 5.0);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.validate();
  auto bad = c;
  bad.label_smoothing = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.warmup_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mode = TrainMode::Oracle;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_mode("zhyper-mix") == TrainMode::ZhyperSquare);
  CHECK_THROWS_AS(parse_mode("full"), ConfigError);
}

TEST_CASE("sft loss examples") {
  Tensor uniform = Tensor::zeros({3, 7});
  std::vector<int> t{1, 4, -1};
  CHECK(sft_loss(uniform, t, 0.0).item() == doctest::Approx(std::log(7.0)).epsilon(1e-12));

  double prev = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 50.0}) {
    Tensor l = Tensor::from({1, 3}, {margin, 0.0, 0.0});
    const double v = sft_loss(l, std::vector<int>{0}, 0.0).item();
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-20);

  Tensor l = Tensor::from({1, 4}, {2, 0, 0, 0});
  const double lse = std::log(std::exp(2.0) + 3.0);
  const double expect = 0.9 * (lse - 2.0) + 0.1 * (lse - 0.5);
  CHECK(sft_loss(l, std::vector<int>{0}, 0.1).item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(sft_loss(l, std::vector<int>{4}, 0.1), InputError);
}

TEST_CASE("neftune bound and Monte-Carlo maximum") {
  Rng rng(3);
  Tensor x = Tensor::zeros({4, 16});
  CHECK(zt::to_vec(neftune_perturb(x, 0.0, rng)) == zt::to_vec(x));
  const double bound = 5.0 / std::sqrt(64.0);
  CHECK(bound == 0.625);
  double mx = 0.0;
  for (int draw = 0; draw < 100000; ++draw) {
    Tensor y = neftune_perturb(x, 5.0, rng);
    for (double v : y.data()) mx = std::max(mx, std::abs(v));
  }
  CHECK(mx <= bound);
  CHECK(mx > 0.9 * bound);
  CHECK_THROWS_AS(neftune_perturb(x, -1.0, rng), ContractError);
}

TEST_CASE("batch sampling") {
  DatasetBundle single = tiny_bundle(1, 1, 5, 1);
  Rng r(1);
  for (const auto& s : sample_batch(single, r, 50)) {
    CHECK(s.dataset == 0);
    CHECK(s.context == 0);
    CHECK(s.example < 5);
  }

  DatasetBundle two = tiny_bundle(2, 2, 5, 3);
  Rng rf(7);
  std::size_t first = 0, ctx0 = 0;
  const std::size_t n = 10000;
  for (const auto& s : sample_batch(two, rf, n)) {
    first += s.dataset == 0;
    ctx0 += s.context == 0;
  }
  CHECK(std::abs(static_cast<double>(first) / n - 0.5) <= 0.02);
  CHECK(std::abs(static_cast<double>(ctx0) / n - 1.0 / 3.0) <= 0.02);

  Rng a(9), b(9);
  for (int k = 0; k < 5; ++k) {
    auto x = sample_batch(two, a, 8), y = sample_batch(two, b, 8);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(x[i].dataset == y[i].dataset);
      CHECK(x[i].example == y[i].example);
      CHECK(x[i].context == y[i].context);
    }
  }

  Rng pb(11);
  auto batch = sample_batch(two, pb, 16, true);
  for (const auto& s : batch) CHECK(s.context == batch[0].context);

  DatasetBundle empty = two;
  empty.contexts[1].clear();
  CHECK_THROWS_AS(sample_batch(empty, pb, 4), ConfigError);
}

TEST_CASE("overfitting one batch lowers the loss by at least 20% in 50 steps") {
  ModelConfig desk = ModelConfig::desk_7b_shape();
  desk.vocab_size = 11;
  desk.max_seq = 8;
  HyperConfig hyper = zt::tiny_hyper(8);
  for (auto mode : {TrainMode::ZhyperDiag, TrainMode::ZhyperSquare, TrainMode::Mtl}) {
    ConditionedModel m = build_model(desk, hyper, mode, 1);
    DatasetBundle data = tiny_bundle(3);
    TrainConfig cfg = quiet_config(mode, 50);
    cfg.max_lr = 1e-2;
    std::vector<std::vector<Sample>> batch{{{0, 0, 0}, {0, 1, 1}, {1, 2, 0}, {1, 3, 1}}};
    OptimizerState opt;
    Rng noise(0);
    std::vector<double> losses;
    for (int s = 0; s < 50; ++s) losses.push_back(train_step_on(m, data, cfg, opt, batch, noise).loss);
    std::size_t increases = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) increases += losses[i] >= losses[i - 1];
    CHECK(increases == 0);
    CHECK(losses.back() <= 0.8 * losses.front());
  }
}

TEST_CASE("weight decay shrinks a gradient-free A geometrically") {
  ConditionedModel m = tiny(TrainMode::Mtl);
  DatasetBundle data = tiny_bundle(4);
  TrainConfig cfg = quiet_config(TrainMode::Mtl, 5);
  cfg.weight_decay = 0.1;
  cfg.max_lr = 0.5;
  const Site site{1, ProjType::V};
  const auto a0 = zt::to_vec(m.pairs.at(site).a);
  OptimizerState opt;
  Rng noise(0);
  std::vector<std::vector<Sample>> batch{{{0, 0, 0}}};
  double factor = 1.0;
  for (std::size_t s = 0; s < 5; ++s) {
    // B = 0 keeps every A gradient at zero.
    for (auto& [st, p] : m.pairs) {
      Tensor b = p.b;
      for (auto& v : b.mutable_data()) v = 0.0;
    }
    factor *= 1.0 - cfg.lr_at(s) * cfg.weight_decay;
    train_step_on(m, data, cfg, opt, batch, noise);
    const auto a = m.pairs.at(site).a;
    for (std::size_t i = 0; i < a0.size(); ++i) CHECK(std::abs(a[i] - a0[i] * factor) <= 1e-15);
  }
  CHECK(factor < 0.9);
}

TEST_CASE("mode contracts") {
  ConditionedModel mtl = tiny(TrainMode::Mtl);
  CHECK_FALSE(mtl.hyper.has_value());
  auto params = mtl.trainable();
  CHECK(params.size() == 2 * 2 * 2);
  for (const auto& p : params) CHECK(p.name.starts_with("lora."));

  ConditionedModel diag = tiny(TrainMode::ZhyperDiag);
  CHECK(diag.hyper->cfg.variant == Modulation::Kind::Diag);
  ConditionedModel sq = tiny(TrainMode::ZhyperSquare);
  CHECK(sq.hyper->cfg.variant == Modulation::Kind::Square);
  CHECK(diag.trainable().size() == params.size() + diag.hyper->parameters().size());

  // Oracle sees only its own dataset.
  DatasetBundle data = tiny_bundle(5);
  TrainConfig cfg = quiet_config(TrainMode::Oracle, 2);
  cfg.oracle_dataset = "task1";
  ConditionedModel oracle = tiny(TrainMode::Oracle);
  CHECK_FALSE(oracle.hyper.has_value());
  train(oracle, data, cfg);
  cfg.oracle_dataset = "missing";
  CHECK_THROWS_AS(train(oracle, data, cfg), KeyError);
  CHECK(restrict_to(data, "task1").datasets.at(0).id == "task1");
}

TEST_CASE("zhyper at init takes the same first step as mtl") {
  DatasetBundle data = tiny_bundle(6);
  TrainConfig cfg = quiet_config(TrainMode::Mtl, 8);
  cfg.neftune_alpha = 5.0;
  cfg.label_smoothing = 0.1;
  ConditionedModel mtl = tiny(TrainMode::Mtl, 21);
  auto r_mtl = train(mtl, data, cfg);
  cfg.mode = TrainMode::ZhyperDiag;
  ConditionedModel zh = tiny(TrainMode::ZhyperDiag, 21);
  auto r_zh = train(zh, data, cfg);
  CHECK(r_zh.trace[0].loss == r_mtl.trace[0].loss);
  bool diverged = false;
  for (std::size_t i = 0; i < 8; ++i) diverged = diverged || r_zh.trace[i].loss != r_mtl.trace[i].loss;
  CHECK(diverged);
}

TEST_CASE("training is deterministic and leaves the base frozen") {
  DatasetBundle data = tiny_bundle(7);
  TrainConfig cfg = quiet_config(TrainMode::ZhyperSquare, 6);
  cfg.neftune_alpha = 5.0;
  cfg.weight_decay = 0.1;
  cfg.grad_accum = 2;
  cfg.seed = 13;
  ConditionedModel a = tiny(TrainMode::ZhyperSquare, 2), b = tiny(TrainMode::ZhyperSquare, 2);
  const auto sum0 = a.base.checksum();
  auto base0 = a.base.tensors();
  std::vector<std::vector<double>> before;
  for (const auto& nt : base0) before.push_back(zt::to_vec(nt.tensor));
  auto ra = train(a, data, cfg), rb = train(b, data, cfg);
  REQUIRE(ra.trace.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(ra.trace[i].loss == rb.trace[i].loss);
    CHECK(ra.trace[i].lr == rb.trace[i].lr);
  }
  CHECK(a.base.checksum() == sum0);
  auto base1 = a.base.tensors();
  for (std::size_t i = 0; i < base1.size(); ++i) CHECK(zt::to_vec(base1[i].tensor) == before[i]);

  cfg.seed = 14;
  ConditionedModel c = tiny(TrainMode::ZhyperSquare, 2);
  auto rc = train(c, data, cfg);
  CHECK(rc.trace[0].loss != ra.trace[0].loss);
}

TEST_CASE("every trainable tensor receives gradient") {
  std::mt19937_64 gen(8);
  DatasetBundle data = tiny_bundle(8);
  for (auto mode : {TrainMode::ZhyperDiag, TrainMode::ZhyperSquare}) {
    ConditionedModel m = tiny(mode, 3);
    zt::jitter(m, gen, 0.3);
    std::vector<Sample> batch{{0, 0, 0}, {1, 1, 1}};
    backward(batch_loss(m, data, batch, 0.1, 0.0, nullptr));
    for (const auto& p : m.trainable()) {
      double norm = 0.0;
      for (double g : p.tensor.grad()) norm += g * g;
      CHECK_MESSAGE(norm > 0.0, p.name);
    }
  }
}

TEST_CASE("contexts separate once B and z have both moved") {
  DatasetBundle data = tiny_bundle(9);
  TrainConfig cfg = quiet_config(TrainMode::ZhyperDiag, 10);
  ConditionedModel m = tiny(TrainMode::ZhyperDiag, 4);
  const Tensor& c1 = data.contexts[0][0].embedding;
  const Tensor& c2 = data.contexts[1][0].embedding;
  std::vector<int> ids{1, 2, 3, 4, 5};
  auto gap = [&] {
    Tensor a = forward_conditioned(m, ids, c1), b = forward_conditioned(m, ids, c2);
    double w = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) w = std::max(w, std::abs(a[i] - b[i]));
    return w;
  };
  CHECK(gap() == 0.0);
  OptimizerState opt;
  Rng rng(1);
  train_step(m, data, cfg, opt, rng);
  // B moved; z still ones for every context, so logits still agree.
  CHECK(gap() == 0.0);
  train_step(m, data, cfg, opt, rng);
  CHECK(gap() > 0.0);

  // From a generic (jittered) model one step suffices.
  std::mt19937_64 gen(9);
  ConditionedModel j = tiny(TrainMode::ZhyperDiag, 5);
  zt::jitter(j, gen, 0.3);
  OptimizerState opt2;
  train_step(j, data, cfg, opt2, rng);
  Tensor a = forward_conditioned(j, ids, c1), b = forward_conditioned(j, ids, c2);
  CHECK(zt::to_vec(a) != zt::to_vec(b));
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  DatasetBundle data = tiny_bundle(10);
  ConditionedModel m = tiny(TrainMode::Mtl);
  m.base.w_out.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg = quiet_config(TrainMode::Mtl, 3);
  try {
    train(m, data, cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("step 0") != std::string::npos);
    CHECK(msg.find("lr=") != std::string::npos);
    CHECK(msg.find("grad norm=") != std::string::npos);
  }
}

TEST_CASE("run directory round trip") {
  DatasetBundle data = tiny_bundle(11);
  TrainConfig cfg = quiet_config(TrainMode::ZhyperDiag, 4);
  cfg.seed = 3;
  ConditionedModel m = build_model(zt::tiny_model(), zt::tiny_hyper(2), cfg.mode, cfg.seed);
  auto result = train(m, data, cfg);
  auto dir = zt::temp_dir("run");
  save_run(dir, m, cfg, result);
  LoadedRun back = load_run(dir);
  CHECK(back.cfg.steps == 4);
  CHECK(back.cfg.mode == TrainMode::ZhyperDiag);
  CHECK(back.opt.step == result.opt.step);
  REQUIRE(back.trace.size() == result.trace.size());
  for (std::size_t i = 0; i < back.trace.size(); ++i) CHECK(back.trace[i].loss == result.trace[i].loss);
  auto p0 = m.trainable(), p1 = back.model.trainable();
  REQUIRE(p0.size() == p1.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    CHECK(p0[i].name == p1[i].name);
    CHECK(zt::to_vec(p0[i].tensor) == zt::to_vec(p1[i].tensor));
    CHECK(back.opt.m.at(p0[i].name) == result.opt.m.at(p0[i].name));
  }
  std::vector<int> ids{1, 2, 3};
  CHECK(zt::to_vec(forward_conditioned(back.model, ids, data.contexts[0][0].embedding)) ==
        zt::to_vec(forward_conditioned(m, ids, data.contexts[0][0].embedding)));

  // Tampered base weights are detected.
  Tensor w = load_ztsr(dir / "base" / "w_out.ztsr");
  w.mutable_data()[0] += 1.0;
  save_ztsr(dir / "base" / "w_out.ztsr", w);
  CHECK_THROWS_AS(load_run(dir), FormatError);
}
