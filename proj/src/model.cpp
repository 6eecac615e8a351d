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

#include "zhyper/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zhyper/error.hpp"
#include "zhyper/io.hpp"
#include "zhyper/ops.hpp"

namespace zhyper {

ModelConfig ModelConfig::desk_7b_shape() {
  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.d_model = 64;
  cfg.n_heads = 4;
  cfg.d_ff = 256;
  cfg.q_out = 64;
  cfg.v_out = 16;
  return cfg;
}

void ModelConfig::validate() const {
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || d_ff == 0 || vocab_size == 0 ||
      max_seq == 0 || q_out == 0 || v_out == 0) {
    throw ContractError("model dimensions must all be positive");
  }
  if (d_model % n_heads || q_out % n_heads) {
    throw ContractError("d_model and q_out must be divisible by n_heads");
  }
  if (v_out % head_dim() || n_heads % kv_heads()) {
    throw ContractError("v_out must be a multiple of the head width q_out/n_heads that "
                        "divides the heads into equal groups");
  }
}

std::pair<std::size_t, std::size_t> ModelConfig::proj_dims(ProjType t) const {
  return {d_model, t == ProjType::Q ? q_out : v_out};
}

std::vector<NamedTensor> BaseWeights::tensors() const {
  std::vector<NamedTensor> out{{"tok_emb", tok_emb}, {"pos_emb", pos_emb}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    for (auto& [n, t] : std::initializer_list<std::pair<const char*, const Tensor*>>{
             {"ln1_g", &w.ln1_g}, {"ln1_b", &w.ln1_b}, {"wq", &w.wq}, {"wk", &w.wk},
             {"wv", &w.wv},       {"wo", &w.wo},       {"ln2_g", &w.ln2_g},
             {"ln2_b", &w.ln2_b}, {"w1", &w.w1},       {"b1", &w.b1},
             {"w2", &w.w2},       {"b2", &w.b2}}) {
      out.push_back({p + n, *t});
    }
  }
  out.push_back({"lnf_g", lnf_g});
  out.push_back({"lnf_b", lnf_b});
  out.push_back({"w_out", w_out});
  return out;
}

std::uint64_t BaseWeights::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& nt : tensors()) {
    for (double v : nt.tensor.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xFF;
        h *= 0x100000001B3ULL;
      }
    }
  }
  return h;
}

BaseWeights init_base(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Rng r = rng.split("base");
  auto normal = [&r](std::size_t in, std::size_t out, double std) {
    return rng_gaussian(r, {in, out}, 0.0, std);
  };
  auto fan = [](std::size_t in) { return 1.0 / std::sqrt(static_cast<double>(in)); };
  BaseWeights b;
  b.tok_emb = normal(cfg.vocab_size, cfg.d_model, 1.0);
  b.pos_emb = normal(cfg.max_seq, cfg.d_model, 1.0);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    LayerWeights w;
    w.ln1_g = Tensor::full({cfg.d_model}, 1.0);
    w.ln1_b = Tensor::zeros({cfg.d_model});
    w.wq = normal(cfg.d_model, cfg.q_out, fan(cfg.d_model));
    w.wk = normal(cfg.d_model, cfg.v_out, fan(cfg.d_model));
    w.wv = normal(cfg.d_model, cfg.v_out, fan(cfg.d_model));
    w.wo = normal(cfg.q_out, cfg.d_model, fan(cfg.q_out));
    w.ln2_g = Tensor::full({cfg.d_model}, 1.0);
    w.ln2_b = Tensor::zeros({cfg.d_model});
    w.w1 = normal(cfg.d_model, cfg.d_ff, fan(cfg.d_model));
    w.b1 = Tensor::zeros({cfg.d_ff});
    w.w2 = normal(cfg.d_ff, cfg.d_model, fan(cfg.d_ff));
    w.b2 = Tensor::zeros({cfg.d_model});
    b.layers.push_back(std::move(w));
  }
  b.lnf_g = Tensor::full({cfg.d_model}, 1.0);
  b.lnf_b = Tensor::zeros({cfg.d_model});
  // Small head: the untrained model starts close to uniform next-token odds.
  b.w_out = normal(cfg.d_model, cfg.vocab_size, 0.5 * fan(cfg.d_model));
  return b;
}

namespace {

Tensor project(const Tensor& x, const Tensor& w, const AdapterSet* adapters, Site site) {
  if (adapters) {
    if (const auto* e = adapters->find(site)) return adapted_forward(w, e->pair, e->modulation, x);
  }
  return matmul(x, w);
}

void check_tokens(const ModelConfig& cfg, std::span<const int> tokens) {
  if (tokens.empty()) throw InputError("empty token sequence");
  if (tokens.size() > cfg.max_seq) {
    throw InputError("sequence of " + std::to_string(tokens.size()) +
                     " tokens exceeds max_seq " + std::to_string(cfg.max_seq));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= cfg.vocab_size) {
      throw InputError("token id " + std::to_string(tokens[i]) + " at position " +
                       std::to_string(i) + " outside vocabulary of " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

}  // namespace

Tensor forward_adapted(const ModelConfig& cfg, const BaseWeights& base,
                       std::span<const int> tokens, const AdapterSet* adapters,
                       const EmbedHook& hook) {
  check_tokens(cfg, tokens);
  const std::size_t n = tokens.size();
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);

  Tensor tok = embedding(base.tok_emb, tokens);
  if (hook) tok = hook(tok);
  Tensor x = add(tok, embedding(base.pos_emb, positions));

  // Grouped-query attention: n_heads query heads share kv_heads K/V heads.
  const std::size_t dh = cfg.head_dim();
  const std::size_t group = cfg.n_heads / cfg.kv_heads();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& w = base.layers[l];
    Tensor h = layer_norm(x, w.ln1_g, w.ln1_b);
    Tensor q = project(h, w.wq, adapters, {l, ProjType::Q});
    Tensor k = matmul(h, w.wk);
    Tensor v = project(h, w.wv, adapters, {l, ProjType::V});
    std::vector<Tensor> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
      const std::size_t kv = hd / group;
      Tensor scores = scale(matmul(slice_cols(q, hd * dh, dh),
                                   transpose(slice_cols(k, kv * dh, dh))),
                            inv_sqrt);
      Tensor probs = softmax(causal_mask(scores));
      heads.push_back(matmul(probs, slice_cols(v, kv * dh, dh)));
    }
    x = add(x, matmul(concat(heads), w.wo));
    Tensor h2 = layer_norm(x, w.ln2_g, w.ln2_b);
    x = add(x, add(matmul(gelu(add(matmul(h2, w.w1), w.b1)), w.w2), w.b2));
  }
  return matmul(layer_norm(x, base.lnf_g, base.lnf_b), base.w_out);
}

Tensor forward_base(const ModelConfig& cfg, const BaseWeights& base,
                    std::span<const int> tokens) {
  return forward_adapted(cfg, base, tokens, nullptr);
}

std::size_t ConditionedModel::rank() const {
  if (pairs.empty()) return 0;
  return pairs.begin()->second.rank();
}

std::vector<NamedTensor> ConditionedModel::trainable() const {
  std::vector<NamedTensor> out;
  for (const auto& [site, pair] : pairs) {
    const std::string p = "lora.layer" + std::to_string(site.layer) + "." + proj_name(site.type);
    out.push_back({p + ".A", pair.a});
    out.push_back({p + ".B", pair.b});
  }
  if (hyper) {
    for (auto& p : hyper->parameters()) out.push_back(std::move(p));
  }
  return out;
}

std::map<Site, LoRAPair> init_lora_pairs(const ModelConfig& cfg, std::size_t rank, Rng& rng,
                                         double scale) {
  if (rank == 0) throw ContractError("LoRA rank must be at least 1");
  Rng r = rng.split("lora");
  std::map<Site, LoRAPair> pairs;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    for (auto t : kProjTypes) {
      auto [din, dout] = cfg.proj_dims(t);
      Tensor a = rng_gaussian(r, {din, rank}, 0.0, 1.0 / std::sqrt(static_cast<double>(din)), true);
      Tensor b = Tensor::zeros({rank, dout}, true);
      pairs.emplace(Site{l, t}, make_lora_pair(std::move(a), std::move(b), scale));
    }
  }
  return pairs;
}

AdapterSet conditioned_adapters(const ConditionedModel& m, const Tensor& c) {
  if (!m.hyper) return unconditioned_adapters(m);
  AdapterSet set(m.cfg.n_layers, 0b11);
  for (auto& [site, mod] : hyper_forward_all(*m.hyper, c)) {
    set.insert(site, AdapterEntry{m.pairs.at(site), std::move(mod)});
  }
  return set;
}

AdapterSet unconditioned_adapters(const ConditionedModel& m) {
  AdapterSet set(m.cfg.n_layers, 0b11);
  for (const auto& [site, pair] : m.pairs) {
    set.insert(site, AdapterEntry{pair, Modulation::identity()});
  }
  return set;
}

Tensor forward_conditioned(const ConditionedModel& m, std::span<const int> tokens,
                           const Tensor& c, const EmbedHook& hook) {
  AdapterSet set = conditioned_adapters(m, c);
  return forward_adapted(m.cfg, m.base, tokens, &set, hook);
}

AdapterSet materialize_adapter(const ConditionedModel& m, const Tensor& c) {
  AdapterSet live = conditioned_adapters(m, c);
  AdapterSet out(live.n_layers(), live.type_mask());
  for (const auto& [site, e] : live.entries()) {
    LoRAPair pair{e.pair.a.detach(), e.pair.b.detach(), e.pair.scale};
    Modulation mod = Modulation::identity();
    if (e.modulation.kind() == Modulation::Kind::Diag) {
      mod = Modulation::diag(e.modulation.signal().detach());
    } else if (e.modulation.kind() == Modulation::Kind::Square) {
      mod = Modulation::square(e.modulation.signal().detach());
    }
    out.insert(site, AdapterEntry{std::move(pair), std::move(mod)});
  }
  return out;
}

std::size_t per_context_signal_size(const ConditionedModel& m) {
  if (!m.hyper) return 0;
  return 2 * m.cfg.n_layers * m.hyper->cfg.head_width();
}

void save_model_dir(const std::filesystem::path& dir, const std::vector<NamedTensor>& tensors,
                    const std::string& role) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  for (const auto& nt : tensors) {
    save_ztsr(dir / (nt.name + ".ztsr"), nt.tensor);
    manifest << nt.name << ' ' << shape_str(nt.tensor.shape()) << ' ' << role << '\n';
  }
  write_text(dir / "manifest.txt", manifest.str());
}

std::map<std::string, Tensor> load_model_dir(const std::filesystem::path& dir) {
  std::istringstream manifest(read_text(dir / "manifest.txt"));
  std::map<std::string, Tensor> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, shape, role;
    if (!(ls >> name >> shape >> role)) {
      throw FormatError((dir / "manifest.txt").string() + ":" + std::to_string(line_no) +
                        ": expected 'name shape role'");
    }
    Tensor t = load_ztsr(dir / (name + ".ztsr"));
    if (shape_str(t.shape()) != shape) {
      throw FormatError(name + ": manifest shape " + shape + " but file holds " +
                        shape_str(t.shape()));
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

void assign_base(BaseWeights& base, const ModelConfig& cfg,
                 const std::map<std::string, Tensor>& tensors) {
  Rng dummy(0);
  const BaseWeights fresh = init_base(cfg, dummy);  // expected shapes
  auto take = [&tensors](const std::string& name, const Tensor& like) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (it->second.shape() != like.shape()) {
      throw FormatError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                        ", expected " + shape_str(like.shape()));
    }
    return it->second.detach();
  };
  base.tok_emb = take("tok_emb", fresh.tok_emb);
  base.pos_emb = take("pos_emb", fresh.pos_emb);
  base.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    auto& w = base.layers[l];
    const auto& f = fresh.layers[l];
    w.ln1_g = take(p + "ln1_g", f.ln1_g);
    w.ln1_b = take(p + "ln1_b", f.ln1_b);
    w.wq = take(p + "wq", f.wq);
    w.wk = take(p + "wk", f.wk);
    w.wv = take(p + "wv", f.wv);
    w.wo = take(p + "wo", f.wo);
    w.ln2_g = take(p + "ln2_g", f.ln2_g);
    w.ln2_b = take(p + "ln2_b", f.ln2_b);
    w.w1 = take(p + "w1", f.w1);
    w.b1 = take(p + "b1", f.b1);
    w.w2 = take(p + "w2", f.w2);
    w.b2 = take(p + "b2", f.b2);
  }
  base.lnf_g = take("lnf_g", fresh.lnf_g);
  base.lnf_b = take("lnf_b", fresh.lnf_b);
  base.w_out = take("w_out", fresh.w_out);
}

}  // namespace zhyper
