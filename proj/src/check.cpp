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

#include "zhyper/check.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>

#include "zhyper/complexity.hpp"
#include "zhyper/contexts.hpp"
#include "zhyper/error.hpp"
#include "zhyper/ops.hpp"
#include "zhyper/text.hpp"
#include "zhyper/training.hpp"

namespace zhyper {
namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.vocab_size = 11;
  c.max_seq = 8;
  c.q_out = 8;
  c.v_out = 4;
  return c;
}

HyperConfig tiny_hyper(Modulation::Kind variant) {
  HyperConfig h;
  h.n_layers = 2;
  h.d_context = 6;
  h.d_type = 3;
  h.d_layer = 3;
  h.d_mlp_in = 5;
  h.d_mlp_hidden = 7;
  h.d_mlp_out = 6;
  h.rank = 2;
  h.variant = variant;
  return h;
}

void randomize(Tensor& t, Rng& rng, double std) {
  for (auto& v : t.mutable_data()) v = std * rng.gaussian();
}

/// Moves every trainable tensor off its warm-start values.
void perturb_all(ConditionedModel& m, Rng& rng) {
  for (auto& nt : m.trainable()) {
    Tensor t = nt.tensor;
    for (auto& v : t.mutable_data()) v += 0.3 * rng.gaussian();
  }
}

std::vector<int> random_tokens(const ModelConfig& cfg, std::size_t n, Rng& rng) {
  std::vector<int> out(n);
  for (auto& t : out) t = static_cast<int>(rng.below(cfg.vocab_size));
  return out;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

CheckResult check_budgets() {
  CheckResult r{"budget", true, ""};
  const std::size_t lora[] = {3407872, 6815744, 13631488};
  const double diag[] = {4.21e6, 7.62e6, 14.46e6};
  const double square[] = {4.27e6, 7.87e6, 15.47e6};
  const std::size_t ranks[] = {8, 16, 32};
  std::ostringstream d;
  const HyperSpec h;
  for (int i = 0; i < 3; ++i) {
    const ArchSpec s = ArchSpec::preset("ref-7b", ranks[i]);
    const auto n = lora_param_count(s);
    const auto dg = method_budget(Method::ZhyperDiag, s, h).total;
    const auto sq = method_budget(Method::ZhyperSquare, s, h).total;
    const bool ok = n == lora[i] && std::abs(dg / diag[i] - 1.0) <= 0.05 &&
                    std::abs(sq / square[i] - 1.0) <= 0.05;
    r.passed = r.passed && ok;
    d << "r=" << ranks[i] << " lora " << n << " diag " << format_millions(dg) << " square "
      << format_millions(sq) << "; ";
  }
  const double ratio =
      static_cast<double>(method_budget(Method::T2L, ArchSpec::preset("ref-7b", 16), h).total) /
      static_cast<double>(method_budget(Method::ZhyperDiag, ArchSpec::preset("ref-7b", 8), h).total);
  r.passed = r.passed && ratio >= 26.0;
  d << "t2l/diag ratio " << format_double(std::round(ratio * 100) / 100);
  r.detail = d.str();
  return r;
}

CheckResult check_containment(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t din = 1 + rng.below(8), dout = 1 + rng.below(8), r = 1 + rng.below(4);
    LoRAPair p = make_lora_pair(rng_gaussian(rng, {din, r}, 0, 1), rng_gaussian(rng, {r, dout}, 0, 1));
    Tensor z = rng_gaussian(rng, {r}, 0, 1);
    Tensor zz = rng_gaussian(rng, {r, r}, 0, 1);
    worst = std::max(worst, max_abs_diff(delta_weight(p, Modulation::diag(z)),
                                         delta_weight(p, Modulation::square(embed_diag_in_square(z)))));
    worst = std::max(worst, max_abs_diff(delta_weight(p, Modulation::square(zz)),
                                         delta_weight(factor_square_into_full(p, zz),
                                                      Modulation::identity())));
  }
  const auto w = rotation_counterexample();
  const double residual =
      fit_diag_modulation(w.pair, delta_weight(w.pair, Modulation::square(w.rotation))).residual;
  return {"containment", worst <= 1e-12 && residual > 1e-3,
          "max embed/factor error " + format_double(worst) + ", rotation residual " +
              format_double(residual)};
}

CheckResult check_gradients(Rng& rng) {
  double worst = 0.0;
  std::size_t checked = 0;
  for (auto variant : {Modulation::Kind::Diag, Modulation::Kind::Square}) {
    const ModelConfig mc = tiny_model();
    ConditionedModel m = build_model(mc, tiny_hyper(variant),
                                     variant == Modulation::Kind::Diag ? TrainMode::ZhyperDiag
                                                                       : TrainMode::ZhyperSquare,
                                     rng.next_u64());
    perturb_all(m, rng);
    Tensor c = rng_gaussian(rng, {6}, 0, 1, true);
    const auto tokens = random_tokens(mc, 6, rng);
    std::vector<int> targets(tokens.begin() + 1, tokens.end());
    targets.push_back(-1);
    auto loss_of = [&] { return sft_loss(forward_conditioned(m, tokens, c), targets, 0.1); };
    auto params = m.trainable();
    params.push_back({"context", c});
    for (auto& p : params) p.tensor.zero_grad();
    backward(loss_of());
    for (auto& p : params) {
      Tensor t = p.tensor;
      const auto g = t.grad();
      for (int k = 0; k < 3; ++k) {
        const std::size_t i = rng.below(t.numel());
        const double orig = t[i];
        t.mutable_data()[i] = orig + 1e-5;
        const double up = loss_of().item();
        t.mutable_data()[i] = orig - 1e-5;
        const double down = loss_of().item();
        t.mutable_data()[i] = orig;
        worst = std::max(worst, rel_err(g[i], (up - down) / 2e-5));
        ++checked;
      }
    }
  }
  return {"gradients", worst <= 1e-4,
          std::to_string(checked) + " entries, worst rel err " + format_double(worst)};
}

CheckResult check_reductions(Rng& rng) {
  const ModelConfig mc = tiny_model();
  ConditionedModel m = build_model(mc, tiny_hyper(Modulation::Kind::Diag), TrainMode::ZhyperDiag,
                                   rng.next_u64());
  const auto tokens = random_tokens(mc, 7, rng);
  Tensor c = rng_gaussian(rng, {6}, 0, 1);
  const Tensor base = forward_base(mc, m.base, tokens);
  const double warm = max_abs_diff(forward_conditioned(m, tokens, c), base);

  for (auto& [site, pair] : m.pairs) randomize(pair.b, rng, 0.5);
  // Fresh heads emit z = ones: conditioned == plain multi-task LoRA.
  const AdapterSet plain = unconditioned_adapters(m);
  const double ones =
      max_abs_diff(forward_conditioned(m, tokens, c), forward_adapted(mc, m.base, tokens, &plain));
  for (auto& b : m.hyper->head_b) randomize(b, rng, 0.0);
  const double zero = max_abs_diff(forward_conditioned(m, tokens, c), base);
  return {"reductions", warm <= 1e-10 && ones <= 1e-10 && zero <= 1e-10,
          "warm start " + format_double(warm) + ", z=ones " + format_double(ones) + ", z=0 " +
              format_double(zero)};
}

CheckResult check_materialization(Rng& rng) {
  double worst = 0.0;
  bool sizes = true;
  for (int trial = 0; trial < 6; ++trial) {
    const auto variant = trial % 2 ? Modulation::Kind::Square : Modulation::Kind::Diag;
    const ModelConfig mc = tiny_model();
    ConditionedModel m = build_model(
        mc, tiny_hyper(variant),
        variant == Modulation::Kind::Diag ? TrainMode::ZhyperDiag : TrainMode::ZhyperSquare,
        rng.next_u64());
    perturb_all(m, rng);
    Tensor c = rng_gaussian(rng, {6}, 0, 1);
    const auto tokens = random_tokens(mc, 1 + rng.below(mc.max_seq), rng);
    const AdapterSet a = materialize_adapter(m, c);
    worst = std::max(worst, max_abs_diff(forward_conditioned(m, tokens, c),
                                         forward_adapted(mc, m.base, tokens, &a)));
    const std::size_t r = 2, expect = 2 * 2 * (variant == Modulation::Kind::Diag ? r : r * r);
    sizes = sizes && a.signal_size() == expect && per_context_signal_size(m) == expect;
  }
  return {"materialization", worst <= 1e-10 && sizes,
          "max logit diff " + format_double(worst) + (sizes ? "" : ", signal size mismatch")};
}

CheckResult check_formats(Rng& rng) {
  std::vector<std::string> failures;
  Tensor t = rng_gaussian(rng, {3, 4}, 0, 1);
  const Bytes zt = encode_ztsr(t);
  if (encode_ztsr(decode_ztsr(zt)) != zt) failures.push_back("ztsr round trip");

  const ModelConfig mc = tiny_model();
  ConditionedModel m = build_model(mc, tiny_hyper(Modulation::Kind::Square),
                                   TrainMode::ZhyperSquare, rng.next_u64());
  perturb_all(m, rng);
  const Bytes za = encode_zadp(materialize_adapter(m, rng_gaussian(rng, {6}, 0, 1)));
  if (encode_zadp(decode_zadp(za)) != za) failures.push_back("zadp round trip");
  Bytes bad = za;
  bad[bad.size() / 2] ^= 0x5A;
  try {
    decode_zadp(bad);
    failures.push_back("corrupted zadp accepted");
  } catch (const FormatError&) {
  }

  ContextStore store(4);
  store.add({"a/0", "a", "first", rng_gaussian(rng, {4}, 0, 1)});
  store.add({"b/0", "b", "second", rng_gaussian(rng, {4}, 0, 1)});
  const Bytes ze = encode_zemb(store);
  if (encode_zemb(decode_zemb(ze)) != ze) failures.push_back("zemb round trip");
  Bytes nan = ze;
  const float q = std::nanf("");
  std::memcpy(nan.data() + nan.size() - 4, &q, 4);
  try {
    decode_zemb(nan);
    failures.push_back("NaN zemb accepted");
  } catch (const FormatError&) {
  }
  std::string detail = "ztsr, zadp, zemb";
  for (const auto& f : failures) detail += "; " + f;
  return {"formats", failures.empty(), detail};
}

CheckResult check_frozen_base(Rng& rng) {
  const ModelConfig mc = tiny_model();
  ConditionedModel m =
      build_model(mc, tiny_hyper(Modulation::Kind::Diag), TrainMode::ZhyperDiag, rng.next_u64());
  DatasetBundle bundle;
  for (int d = 0; d < 2; ++d) {
    Dataset ds;
    ds.id = "d" + std::to_string(d);
    for (int i = 0; i < 4; ++i) ds.train.push_back(Example{random_tokens(mc, 6, rng), 2});
    bundle.datasets.push_back(ds);
    bundle.contexts.push_back({ContextRecord{ds.id + "/0", ds.id, "", rng_gaussian(rng, {6}, 0, 1)}});
  }
  const auto before = m.base.checksum();
  TrainConfig tc;
  tc.steps = 3;
  tc.max_lr = 1e-2;
  tc.batch_size = 2;
  tc.seed = rng.next_u64();
  train(m, bundle, tc);
  const auto after = m.base.checksum();
  return {"frozen base", before == after, "checksum unchanged across 3 steps"};
}

}  // namespace

std::vector<CheckResult> run_invariant_checks(std::uint64_t seed) {
  Rng rng = Rng(seed).split("check");
  std::vector<CheckResult> out;
  const std::vector<std::function<CheckResult()>> checks = {
      [] { return check_budgets(); },
      [&] { return check_containment(rng); },
      [&] { return check_gradients(rng); },
      [&] { return check_reductions(rng); },
      [&] { return check_materialization(rng); },
      [&] { return check_formats(rng); },
      [&] { return check_frozen_base(rng); },
  };
  for (const auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"?", false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

}  // namespace zhyper
