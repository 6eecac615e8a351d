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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "zhyper/hypernet.hpp"
#include "zhyper/lora.hpp"
#include "zhyper/rng.hpp"

namespace zhyper {

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t vocab_size = 32;
  std::size_t max_seq = 32;
  std::size_t q_out = 64;  // Q projection width, n_heads heads of head_dim
  std::size_t v_out = 16;  // K and V projection width, kv_heads heads of head_dim

  std::size_t head_dim() const { return q_out / n_heads; }
  std::size_t kv_heads() const { return v_out / head_dim(); }

  /// L=2, d_model=64, 4 heads, Q:V output ratio 4:1.
  static ModelConfig desk_7b_shape();
  void validate() const;
  std::pair<std::size_t, std::size_t> proj_dims(ProjType t) const;
};

struct LayerWeights {
  Tensor ln1_g, ln1_b;
  Tensor wq, wk, wv, wo;
  Tensor ln2_g, ln2_b;
  Tensor w1, b1, w2, b2;
};

/// Frozen decoder weights (pre-norm blocks, learned positions, untied head).
struct BaseWeights {
  Tensor tok_emb;  // [vocab x d_model]
  Tensor pos_emb;  // [max_seq x d_model]
  std::vector<LayerWeights> layers;
  Tensor lnf_g, lnf_b;
  Tensor w_out;  // [d_model x vocab]

  std::vector<NamedTensor> tensors() const;
  /// FNV-1a over every value; changes iff some weight changes.
  std::uint64_t checksum() const;
};

BaseWeights init_base(const ModelConfig& cfg, Rng& rng);

/// Called on the token embeddings before positions are added (noise hook).
using EmbedHook = std::function<Tensor(const Tensor&)>;

/// Decoder forward pass. Sites present in `adapters` use W + delta.
Tensor forward_adapted(const ModelConfig& cfg, const BaseWeights& base,
                       std::span<const int> tokens, const AdapterSet* adapters,
                       const EmbedHook& hook = {});

Tensor forward_base(const ModelConfig& cfg, const BaseWeights& base,
                    std::span<const int> tokens);

/// Frozen base + one shared LoRA pair per (layer, Q/V) site + optional
/// hypernetwork. Without a hypernetwork every modulation is the identity,
/// which is plain multi-task LoRA.
struct ConditionedModel {
  ModelConfig cfg;
  BaseWeights base;
  std::map<Site, LoRAPair> pairs;
  std::optional<HyperNetwork> hyper;

  std::size_t rank() const;
  std::vector<NamedTensor> trainable() const;
};

/// A ~ Kaiming normal, B = 0 (so the initial delta is zero), trainable.
std::map<Site, LoRAPair> init_lora_pairs(const ModelConfig& cfg, std::size_t rank, Rng& rng,
                                         double scale = 1.0);

/// Adapter set for context c, still attached to the tape (modulations flow
/// back into the hypernetwork).
AdapterSet conditioned_adapters(const ConditionedModel& m, const Tensor& c);
/// Same pairs with identity modulation (z = ones).
AdapterSet unconditioned_adapters(const ConditionedModel& m);

Tensor forward_conditioned(const ConditionedModel& m, std::span<const int> tokens,
                           const Tensor& c, const EmbedHook& hook = {});

/// Detached per-context adapter; forward with it matches forward_conditioned.
AdapterSet materialize_adapter(const ConditionedModel& m, const Tensor& c);

/// Number of modulation values one context produces: L*|T|*r or L*|T|*r^2.
std::size_t per_context_signal_size(const ConditionedModel& m);

// Model checkpoint: directory of ZTSR files plus manifest.txt with one
// "name shape role" line per tensor.
void save_model_dir(const std::filesystem::path& dir, const std::vector<NamedTensor>& tensors,
                    const std::string& role);
std::map<std::string, Tensor> load_model_dir(const std::filesystem::path& dir);

void assign_base(BaseWeights& base, const ModelConfig& cfg,
                 const std::map<std::string, Tensor>& tensors);

}  // namespace zhyper
