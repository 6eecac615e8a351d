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
#include <string>
#include <utility>
#include <vector>

namespace zhyper {

struct ProjDims {
  std::string type;  // "Q", "V", ...
  std::size_t d_in = 0;
  std::size_t d_out = 0;
};

/// Adapted architecture: every layer carries one adapter per type.
struct ArchSpec {
  std::size_t n_layers = 0;
  std::vector<ProjDims> types;
  std::size_t rank = 8;

  void validate() const;
  /// "ref-7b" (L=32, Q 4096->4096, V 4096->1024) or "desk-7b-shape".
  static ArchSpec preset(const std::string& name, std::size_t rank);
};

struct HyperSpec {
  std::size_t d_context = 1024;
  std::size_t d_type = 64;
  std::size_t d_layer = 64;
  std::size_t d_mlp_in = 128;
  std::size_t d_mlp_hidden = 512;
  std::size_t d_mlp_out = 512;
  /// Declared extra embedding terms of the modeled baselines.
  std::size_t t2l_description_params = 0;
  std::size_t hyperlora_query_params = 0;

  void validate() const;
};

enum class Method { Mtl, ZhyperDiag, ZhyperSquare, T2L, HyperLoRA };
const char* method_name(Method m);
Method parse_method(const std::string& name);  // ContractError when unknown
std::vector<Method> all_methods();

/// Capacity orders, weakest first.
enum class RademacherOrder { SqrtROverN, ROverSqrtN, SqrtRDOverN };
const char* rademacher_tag(RademacherOrder o);

struct ParamBudget {
  Method method = Method::Mtl;
  std::size_t lora_params = 0;
  std::size_t hyper_params = 0;
  std::size_t embed_params = 0;
  std::size_t total = 0;
  std::size_t per_context_output_size = 0;
  RademacherOrder rademacher_order = RademacherOrder::SqrtRDOverN;
  bool modeled = false;  // T2L and HyperLoRA are parameterized models
  std::vector<std::pair<std::string, std::size_t>> components;
};

/// Sum over layers and types of r * (d_in + d_out).
std::size_t lora_param_count(const ArchSpec& spec);

std::size_t linear_params(std::size_t in, std::size_t out);

ParamBudget method_budget(Method method, const ArchSpec& spec, const HyperSpec& hspec);

std::size_t per_context_signal_size(Method method, const ArchSpec& spec);

/// Table-style rounding: 3407872 -> "3.41M".
std::string format_millions(std::size_t n);
/// 3407872 -> "3,407,872".
std::string format_grouped(std::size_t n);

std::string format_budget_table(const std::vector<ParamBudget>& budgets);
/// One "method,component,count" row per component plus a total row.
std::string format_budget_csv(const std::vector<ParamBudget>& budgets);

}  // namespace zhyper
