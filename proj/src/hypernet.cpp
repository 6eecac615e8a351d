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

#include "zhyper/hypernet.hpp"

#include <cmath>

#include "zhyper/error.hpp"
#include "zhyper/ops.hpp"

namespace zhyper {

std::size_t HyperConfig::head_width() const {
  return variant == Modulation::Kind::Square ? rank * rank : rank;
}

void HyperConfig::validate() const {
  if (n_layers == 0 || d_context == 0 || d_type == 0 || d_layer == 0 || d_mlp_in == 0 ||
      d_mlp_hidden == 0 || d_mlp_out == 0 || rank == 0) {
    throw ContractError("hypernetwork dimensions must all be positive");
  }
  if (variant == Modulation::Kind::Identity) {
    throw ContractError("a hypernetwork emits diag or square modulations, not identity");
  }
}

std::size_t hyper_param_count(const HyperConfig& cfg) {
  auto linear = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t n = 2 * cfg.d_type + cfg.n_layers * cfg.d_layer;
  n += linear(cfg.input_width(), cfg.d_mlp_in);
  n += linear(cfg.d_mlp_in, cfg.d_mlp_hidden);
  n += linear(cfg.d_mlp_hidden, cfg.d_mlp_hidden);
  n += linear(cfg.d_mlp_hidden, cfg.d_mlp_out);
  n += 2 * linear(cfg.d_mlp_out, cfg.head_width());
  return n;
}

std::vector<NamedTensor> HyperNetwork::parameters() const {
  std::vector<NamedTensor> out{{"hyper.type_table", type_table},
                               {"hyper.layer_table", layer_table},
                               {"hyper.proj_w", proj_w},
                               {"hyper.proj_b", proj_b}};
  for (std::size_t i = 0; i < 3; ++i) {
    out.push_back({"hyper.mlp" + std::to_string(i) + "_w", mlp_w[i]});
    out.push_back({"hyper.mlp" + std::to_string(i) + "_b", mlp_b[i]});
  }
  for (auto t : kProjTypes) {
    const auto i = static_cast<std::size_t>(t);
    out.push_back({std::string("hyper.head_") + proj_name(t) + "_w", head_w[i]});
    out.push_back({std::string("hyper.head_") + proj_name(t) + "_b", head_b[i]});
  }
  return out;
}

std::size_t HyperNetwork::param_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

HyperNetwork init_hypernet(const HyperConfig& cfg, Rng& rng) {
  cfg.validate();
  HyperNetwork h;
  h.cfg = cfg;
  Rng r = rng.split("hypernet");
  auto kaiming = [&r](std::size_t in, std::size_t out) {
    return rng_gaussian(r, {in, out}, 0.0, std::sqrt(2.0 / static_cast<double>(in)), true);
  };
  h.type_table = rng_gaussian(r, {2, cfg.d_type}, 0.0, 0.02, true);
  h.layer_table = rng_gaussian(r, {cfg.n_layers, cfg.d_layer}, 0.0, 0.02, true);
  h.proj_w = kaiming(cfg.input_width(), cfg.d_mlp_in);
  h.proj_b = Tensor::zeros({cfg.d_mlp_in}, true);
  const std::size_t widths[4] = {cfg.d_mlp_in, cfg.d_mlp_hidden, cfg.d_mlp_hidden,
                                 cfg.d_mlp_out};
  for (std::size_t i = 0; i < 3; ++i) {
    h.mlp_w[i] = kaiming(widths[i], widths[i + 1]);
    h.mlp_b[i] = Tensor::zeros({widths[i + 1]}, true);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    h.head_w[i] = Tensor::zeros({cfg.d_mlp_out, cfg.head_width()}, true);
    std::vector<double> bias(cfg.head_width(), 0.0);
    if (cfg.variant == Modulation::Kind::Diag) {
      bias.assign(cfg.rank, 1.0);
    } else {
      for (std::size_t k = 0; k < cfg.rank; ++k) bias[k * cfg.rank + k] = 1.0;
    }
    h.head_b[i] = Tensor::from({cfg.head_width()}, std::move(bias), true);
  }
  return h;
}

namespace {

void check_context(const HyperNetwork& h, const Tensor& c) {
  if (c.rank() != 1 || c.numel() != h.cfg.d_context) {
    throw DimensionError("context embedding " + shape_str(c.shape()) + ", expected [" +
                         std::to_string(h.cfg.d_context) + "]");
  }
}

// Trunk over stacked rows [c | e_t | e_l], one row per requested site.
Tensor trunk(const HyperNetwork& h, const Tensor& c, std::span<const int> types,
             std::span<const int> layers) {
  const std::vector<int> zeros(types.size(), 0);
  const Tensor parts[3] = {embedding(reshape(c, {1, c.numel()}), zeros),
                           embedding(h.type_table, types),
                           embedding(h.layer_table, layers)};
  Tensor x = add(matmul(concat(parts), h.proj_w), h.proj_b);
  for (std::size_t i = 0; i < 3; ++i) x = gelu(add(matmul(x, h.mlp_w[i]), h.mlp_b[i]));
  return x;
}

Modulation to_modulation(const HyperConfig& cfg, const Tensor& row) {
  if (cfg.variant == Modulation::Kind::Diag) return Modulation::diag(reshape(row, {cfg.rank}));
  return Modulation::square(reshape(row, {cfg.rank, cfg.rank}));
}

}  // namespace

Modulation hyper_forward(const HyperNetwork& h, const Tensor& c, ProjType t,
                         std::size_t layer) {
  check_context(h, c);
  if (layer >= h.cfg.n_layers) {
    throw KeyError("layer " + std::to_string(layer) + " outside hypernetwork of " +
                   std::to_string(h.cfg.n_layers) + " layers");
  }
  if (t != ProjType::Q && t != ProjType::V) throw KeyError("unknown projection type");
  const int type_id[1] = {static_cast<int>(t)};
  const int layer_id[1] = {static_cast<int>(layer)};
  const auto i = static_cast<std::size_t>(t);
  Tensor out = add(matmul(trunk(h, c, type_id, layer_id), h.head_w[i]), h.head_b[i]);
  return to_modulation(h.cfg, out);
}

std::vector<std::pair<Site, Modulation>> hyper_forward_all(const HyperNetwork& h,
                                                           const Tensor& c) {
  check_context(h, c);
  const std::size_t n_layers = h.cfg.n_layers;
  // Rows ordered type-major: all Q sites, then all V sites.
  std::vector<int> types, layers;
  for (auto t : kProjTypes) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      types.push_back(static_cast<int>(t));
      layers.push_back(static_cast<int>(l));
    }
  }
  Tensor features = trunk(h, c, types, layers);
  std::vector<std::pair<Site, Modulation>> out;
  out.reserve(2 * n_layers);
  for (auto t : kProjTypes) {
    const auto i = static_cast<std::size_t>(t);
    std::vector<int> rows(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) rows[l] = static_cast<int>(i * n_layers + l);
    Tensor head = add(matmul(embedding(features, rows), h.head_w[i]), h.head_b[i]);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const int pick[1] = {static_cast<int>(l)};
      out.emplace_back(Site{l, t}, to_modulation(h.cfg, embedding(head, pick)));
    }
  }
  return out;
}

}  // namespace zhyper
