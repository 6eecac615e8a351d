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

#include "zhyper/complexity.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "zhyper/error.hpp"

namespace zhyper {

void ArchSpec::validate() const {
  if (n_layers == 0) throw ConfigError("arch spec: n_layers must be positive");
  if (types.empty()) throw ConfigError("arch spec: no projection types");
  if (rank == 0) throw ConfigError("arch spec: rank must be >= 1");
  for (const auto& t : types) {
    if (t.d_in == 0 || t.d_out == 0) {
      throw ConfigError("arch spec: type " + t.type + " has a zero dimension");
    }
  }
}

ArchSpec ArchSpec::preset(const std::string& name, std::size_t rank) {
  if (name == "ref-7b") return ArchSpec{32, {{"Q", 4096, 4096}, {"V", 4096, 1024}}, rank};
  if (name == "desk-7b-shape") return ArchSpec{2, {{"Q", 64, 64}, {"V", 64, 16}}, rank};
  throw ConfigError("unknown preset '" + name + "' (expected ref-7b or desk-7b-shape)");
}

void HyperSpec::validate() const {
  if (!d_context || !d_type || !d_layer || !d_mlp_in || !d_mlp_hidden || !d_mlp_out) {
    throw ConfigError("hyper spec: every width must be positive");
  }
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Mtl:
      return "mtl";
    case Method::ZhyperDiag:
      return "zhyper-diag";
    case Method::ZhyperSquare:
      return "zhyper-square";
    case Method::T2L:
      return "t2l";
    case Method::HyperLoRA:
      return "hyperlora";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (name == method_name(m)) return m;
  }
  throw ContractError("unknown method '" + name +
                      "' (expected mtl, zhyper-diag, zhyper-square, t2l or hyperlora)");
}

std::vector<Method> all_methods() {
  return {Method::Mtl, Method::ZhyperDiag, Method::ZhyperSquare, Method::T2L, Method::HyperLoRA};
}

const char* rademacher_tag(RademacherOrder o) {
  switch (o) {
    case RademacherOrder::SqrtROverN:
      return "sqrt(r/N)";
    case RademacherOrder::ROverSqrtN:
      return "r/sqrt(N)";
    case RademacherOrder::SqrtRDOverN:
      return "sqrt(r(d_in+d_out)/N)";
  }
  return "?";
}

std::size_t lora_param_count(const ArchSpec& spec) {
  spec.validate();
  std::size_t per_layer = 0;
  for (const auto& t : spec.types) per_layer += spec.rank * (t.d_in + t.d_out);
  return spec.n_layers * per_layer;
}

std::size_t linear_params(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t per_context_signal_size(Method method, const ArchSpec& spec) {
  spec.validate();
  const std::size_t sites = spec.n_layers * spec.types.size();
  switch (method) {
    case Method::Mtl:
      return 0;
    case Method::ZhyperDiag:
      return sites * spec.rank;
    case Method::ZhyperSquare:
      return sites * spec.rank * spec.rank;
    case Method::T2L:
    case Method::HyperLoRA:
      return lora_param_count(spec);
  }
  return 0;
}

ParamBudget method_budget(Method method, const ArchSpec& spec, const HyperSpec& h) {
  spec.validate();
  h.validate();
  ParamBudget b;
  b.method = method;
  b.per_context_output_size = per_context_signal_size(method, spec);
  auto add = [&b](const std::string& name, std::size_t n, std::size_t ParamBudget::*bucket) {
    b.components.emplace_back(name, n);
    b.*bucket += n;
  };

  const std::size_t r = spec.rank;
  if (method == Method::Mtl || method == Method::ZhyperDiag || method == Method::ZhyperSquare) {
    add("lora", lora_param_count(spec), &ParamBudget::lora_params);
  }
  if (method != Method::Mtl) {
    add("type_table", spec.types.size() * h.d_type, &ParamBudget::embed_params);
    add("layer_table", spec.n_layers * h.d_layer, &ParamBudget::embed_params);
    add("input_proj", linear_params(h.d_context + h.d_type + h.d_layer, h.d_mlp_in),
        &ParamBudget::hyper_params);
    add("mlp0", linear_params(h.d_mlp_in, h.d_mlp_hidden), &ParamBudget::hyper_params);
    add("mlp1", linear_params(h.d_mlp_hidden, h.d_mlp_hidden), &ParamBudget::hyper_params);
    add("mlp2", linear_params(h.d_mlp_hidden, h.d_mlp_out), &ParamBudget::hyper_params);
    for (const auto& t : spec.types) {
      std::size_t width = 0;
      if (method == Method::ZhyperDiag) width = r;
      else if (method == Method::ZhyperSquare) width = r * r;
      else width = r * (t.d_in + t.d_out);  // full A and B for the site
      add("head_" + t.type, linear_params(h.d_mlp_out, width), &ParamBudget::hyper_params);
    }
  }
  if (method == Method::T2L) {
    add("description_embedding", h.t2l_description_params, &ParamBudget::embed_params);
  }
  if (method == Method::HyperLoRA) {
    add("query_embedding", h.hyperlora_query_params, &ParamBudget::embed_params);
  }

  b.total = b.lora_params + b.hyper_params + b.embed_params;
  b.modeled = method == Method::T2L || method == Method::HyperLoRA;
  switch (method) {
    case Method::ZhyperDiag:
      b.rademacher_order = RademacherOrder::SqrtROverN;
      break;
    case Method::ZhyperSquare:
      b.rademacher_order = RademacherOrder::ROverSqrtN;
      break;
    default:
      b.rademacher_order = RademacherOrder::SqrtRDOverN;
  }
  return b;
}

std::string format_millions(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(n) / 1e6);
  return buf;
}

std::string format_grouped(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string format_budget_table(const std::vector<ParamBudget>& budgets) {
  std::ostringstream o;
  o << std::left << std::setw(21) << "method" << std::right << std::setw(14) << "lora"
    << std::setw(14) << "hyper" << std::setw(12) << "embed" << std::setw(14) << "total"
    << std::setw(9) << "" << std::setw(14) << "per-context" << "  rademacher\n";
  for (const auto& b : budgets) {
    std::string name = method_name(b.method);
    if (b.modeled) name += " (modeled)";
    o << std::left << std::setw(21) << name << std::right << std::setw(14)
      << format_grouped(b.lora_params) << std::setw(14) << format_grouped(b.hyper_params)
      << std::setw(12) << format_grouped(b.embed_params) << std::setw(14)
      << format_grouped(b.total) << std::setw(9) << format_millions(b.total) << std::setw(14)
      << format_grouped(b.per_context_output_size) << "  " << rademacher_tag(b.rademacher_order)
      << '\n';
  }
  return o.str();
}

std::string format_budget_csv(const std::vector<ParamBudget>& budgets) {
  std::ostringstream o;
  o << "method,component,count\n";
  for (const auto& b : budgets) {
    for (const auto& [name, n] : b.components) o << method_name(b.method) << ',' << name << ',' << n << '\n';
    o << method_name(b.method) << ",total," << b.total << '\n';
  }
  return o.str();
}

}  // namespace zhyper
