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

// Shared oracles for the unit and acceptance suites. Nothing here calls the
// library's own finite-difference or reference code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "zhyper/ops.hpp"
#include "zhyper/rng.hpp"
#include "zhyper/tensor.hpp"
#include "zhyper/training.hpp"

namespace zt {

using zhyper::Tensor;

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central differences, written out independently of the library helper.
inline std::vector<double> central_diff(const std::function<double()>& f, Tensor x,
                                        double eps = 1e-5) {
  std::vector<double> g(x.numel());
  auto data = x.mutable_data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double keep = data[i];
    data[i] = keep + eps;
    const double hi = f();
    data[i] = keep - eps;
    const double lo = f();
    data[i] = keep;
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

/// Worst relative error between backward() and central differences for
/// every entry of every listed leaf.
inline double grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                         double eps = 1e-5) {
  for (auto& l : leaves) l.zero_grad();
  zhyper::backward(loss());
  double worst = 0.0;
  for (auto& l : leaves) {
    const auto analytic = l.grad();
    const auto numeric = central_diff([&] { return loss().item(); }, l, eps);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      worst = std::max(worst, rel_err(analytic[i], numeric[i]));
    }
  }
  return worst;
}

/// Gaussian tensor from std::mt19937_64, independent of the library RNG.
inline Tensor randn(std::mt19937_64& gen, zhyper::Shape shape, double std = 1.0,
                    bool requires_grad = false) {
  std::normal_distribution<double> d(0.0, std);
  std::vector<double> v(zhyper::shape_numel(shape));
  for (auto& x : v) x = d(gen);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> to_vec(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

inline zhyper::ModelConfig tiny_model() {
  zhyper::ModelConfig c;
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

inline zhyper::HyperConfig tiny_hyper(std::size_t rank = 2) {
  zhyper::HyperConfig h;
  h.n_layers = 2;
  h.d_context = 6;
  h.d_type = 3;
  h.d_layer = 3;
  h.d_mlp_in = 5;
  h.d_mlp_hidden = 7;
  h.d_mlp_out = 6;
  h.rank = rank;
  return h;
}

/// Adds N(0, std) noise to every trainable tensor in place.
inline void jitter(zhyper::ConditionedModel& m, std::mt19937_64& gen, double std = 0.3) {
  std::normal_distribution<double> d(0.0, std);
  for (auto& nt : m.trainable()) {
    Tensor t = nt.tensor;
    for (auto& v : t.mutable_data()) v += d(gen);
  }
}

inline std::vector<int> random_ids(std::mt19937_64& gen, std::size_t n, std::size_t vocab) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(vocab) - 1);
  std::vector<int> out(n);
  for (auto& t : out) t = d(gen);
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("zhyper-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace zt
