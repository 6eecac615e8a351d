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

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "zhyper/lora.hpp"
#include "zhyper/rng.hpp"

namespace zhyper {

/// Widths of the context -> modulation network.
///
/// Wiring: [c | e_t | e_l] -> input projection (d_mlp_in) -> three
/// Linear+GELU blocks (d_mlp_in -> hidden -> hidden -> d_mlp_out) -> one
/// output head per projection type emitting r (diag) or r*r (square) values.
struct HyperConfig {
  std::size_t n_layers = 32;
  std::size_t d_context = 1024;
  std::size_t d_type = 64;
  std::size_t d_layer = 64;
  std::size_t d_mlp_in = 128;
  std::size_t d_mlp_hidden = 512;
  std::size_t d_mlp_out = 512;
  std::size_t rank = 8;
  Modulation::Kind variant = Modulation::Kind::Diag;

  std::size_t input_width() const { return d_context + d_type + d_layer; }
  /// r for diag, r*r for square.
  std::size_t head_width() const;
  void validate() const;
};

/// Parameter count implied by a config (tables + projection + trunk + heads).
std::size_t hyper_param_count(const HyperConfig& cfg);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Learnable context -> per-site modulation map. Every tensor is a
/// trainable leaf.
struct HyperNetwork {
  HyperConfig cfg;
  Tensor type_table;   // [2 x d_type]
  Tensor layer_table;  // [L x d_layer]
  Tensor proj_w, proj_b;
  std::array<Tensor, 3> mlp_w, mlp_b;
  std::array<Tensor, 2> head_w, head_b;  // indexed by ProjType

  std::vector<NamedTensor> parameters() const;
  std::size_t param_count() const;
};

/// Kaiming-normal projection/trunk, zero head weights, head bias producing
/// z = ones (diag) or Z = I (square), tables ~ N(0, 0.02).
HyperNetwork init_hypernet(const HyperConfig& cfg, Rng& rng);

/// Modulation for one site. c must be a [d_context] vector; layers are 0-based.
Modulation hyper_forward(const HyperNetwork& h, const Tensor& c, ProjType t,
                         std::size_t layer);

/// Modulations for every (layer, type) site, trunk evaluated once over the
/// stacked inputs, one head row per site.
std::vector<std::pair<Site, Modulation>> hyper_forward_all(const HyperNetwork& h,
                                                           const Tensor& c);

}  // namespace zhyper
