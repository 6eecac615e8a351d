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

#include "zhyper/training.hpp"

#include <cmath>
#include <sstream>

#include "zhyper/error.hpp"
#include "zhyper/io.hpp"
#include "zhyper/ops.hpp"
#include "zhyper/text.hpp"

namespace zhyper {

const char* mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::ZhyperDiag:
      return "zhyper-diag";
    case TrainMode::ZhyperSquare:
      return "zhyper-square";
    case TrainMode::Mtl:
      return "mtl";
    case TrainMode::Oracle:
      return "oracle";
  }
  return "?";
}

TrainMode parse_mode(const std::string& name) {
  if (name == "zhyper-diag") return TrainMode::ZhyperDiag;
  if (name == "zhyper-square" || name == "zhyper-mix") return TrainMode::ZhyperSquare;
  if (name == "mtl") return TrainMode::Mtl;
  if (name == "oracle") return TrainMode::Oracle;
  throw ConfigError("unknown mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("label_smoothing must lie in [0, 1)");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw ConfigError("warmup_fraction must lie in [0, 1]");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (grad_accum == 0) throw ConfigError("grad_accum must be at least 1");
  if (!(max_lr >= 0.0) || !(weight_decay >= 0.0) || !(neftune_alpha >= 0.0)) {
    throw ConfigError("max_lr, weight_decay and neftune_alpha must be non-negative");
  }
  if (mode == TrainMode::Oracle && oracle_dataset.empty()) {
    throw ConfigError("oracle mode needs oracle_dataset");
  }
}

double TrainConfig::lr_at(std::size_t step) const {
  const auto warm = static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(steps)));
  if (step < warm) {
    return max_lr * static_cast<double>(step + 1) / static_cast<double>(warm);
  }
  if (steps <= warm || step >= steps) return 0.0;
  return max_lr * static_cast<double>(steps - step) / static_cast<double>(steps - warm);
}

Tensor sft_loss(const Tensor& logits, std::span<const int> targets, double smoothing) {
  return cross_entropy(logits, targets, smoothing, -1);
}

Tensor neftune_perturb(const Tensor& embedded, double alpha, Rng& rng) {
  if (!(alpha >= 0.0)) throw ContractError("NEFTune alpha must be non-negative");
  if (alpha == 0.0) return embedded;
  const double bound = alpha / std::sqrt(static_cast<double>(embedded.numel()));
  std::vector<double> noise(embedded.numel());
  for (auto& v : noise) v = bound * rng.uniform(-1.0, 1.0);
  return add(embedded, Tensor::from(embedded.shape(), std::move(noise)));
}

std::vector<Sample> sample_batch(const DatasetBundle& bundle, Rng& rng, std::size_t batch_size,
                                 bool per_batch_context) {
  bundle.validate();
  std::vector<Sample> out(batch_size);
  const double shared = rng.uniform();
  for (auto& s : out) {
    s.dataset = rng.below(bundle.datasets.size());
    s.example = rng.below(bundle.datasets[s.dataset].train.size());
    const std::size_t m = bundle.contexts[s.dataset].size();
    if (per_batch_context) {
      s.context = std::min(m - 1, static_cast<std::size_t>(shared * static_cast<double>(m)));
    } else {
      s.context = rng.below(m);
    }
  }
  return out;
}

ConditionedModel build_model(const ModelConfig& mcfg, const HyperConfig& hcfg, TrainMode mode,
                             std::uint64_t seed) {
  mcfg.validate();
  Rng root(seed);
  ConditionedModel m;
  m.cfg = mcfg;
  m.base = init_base(mcfg, root);
  m.pairs = init_lora_pairs(mcfg, hcfg.rank, root);
  if (mode == TrainMode::ZhyperDiag || mode == TrainMode::ZhyperSquare) {
    HyperConfig h = hcfg;
    h.n_layers = mcfg.n_layers;
    h.variant = mode == TrainMode::ZhyperDiag ? Modulation::Kind::Diag : Modulation::Kind::Square;
    m.hyper = init_hypernet(h, root);
  }
  return m;
}

Tensor batch_loss(const ConditionedModel& model, const DatasetBundle& bundle,
                  std::span<const Sample> batch, double smoothing, double neftune_alpha,
                  Rng* noise_rng) {
  EmbedHook hook;
  if (noise_rng && neftune_alpha > 0.0) {
    hook = [neftune_alpha, noise_rng](const Tensor& t) {
      return neftune_perturb(t, neftune_alpha, *noise_rng);
    };
  }
  std::vector<Tensor> terms;
  std::size_t count = 0;
  for (const auto& s : batch) {
    const Example& ex = bundle.datasets.at(s.dataset).train.at(s.example);
    const Tensor& c = bundle.contexts.at(s.dataset).at(s.context).embedding;
    AdapterSet adapters = conditioned_adapters(model, c);
    const auto inputs = ex.inputs();
    const auto targets = ex.targets();
    Tensor logits = forward_adapted(model.cfg, model.base, inputs, &adapters, hook);
    terms.push_back(cross_entropy_sum(logits, targets, smoothing));
    for (int t : targets) count += t >= 0;
  }
  if (terms.empty() || count == 0) throw ConfigError("batch has no target tokens");
  Tensor total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scale(total, 1.0 / static_cast<double>(count));
}

StepResult train_step_on(ConditionedModel& model, const DatasetBundle& bundle,
                         const TrainConfig& cfg, OptimizerState& opt,
                         std::span<const std::vector<Sample>> micro_batches, Rng& noise_rng) {
  auto params = model.trainable();
  for (auto& p : params) p.tensor.zero_grad();

  StepResult res;
  const double inv = 1.0 / static_cast<double>(micro_batches.size());
  for (const auto& mb : micro_batches) {
    Tensor loss = batch_loss(model, bundle, mb, cfg.label_smoothing, cfg.neftune_alpha, &noise_rng);
    res.loss += inv * loss.item();
    backward(scale(loss, inv));
  }
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  res.grad_norm = std::sqrt(sq);
  res.lr = cfg.lr_at(opt.step);
  if (!std::isfinite(res.loss) || !std::isfinite(res.grad_norm)) {
    throw TrainingError("non-finite loss at step " + std::to_string(opt.step) +
                        " (lr=" + format_double(res.lr) + ", grad norm=" +
                        format_double(res.grad_norm) + ")");
  }

  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - res.lr * cfg.weight_decay;
  for (auto& p : params) {
    const auto g = p.tensor.grad();
    auto& m = opt.m[p.name];
    auto& v = opt.v[p.name];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    auto w = p.tensor.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double step = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      w[i] = w[i] * decay - res.lr * step;
    }
  }
  return res;
}

StepResult train_step(ConditionedModel& model, const DatasetBundle& bundle, const TrainConfig& cfg,
                      OptimizerState& opt, Rng& rng) {
  std::vector<std::vector<Sample>> micro;
  for (std::size_t i = 0; i < cfg.grad_accum; ++i) {
    micro.push_back(sample_batch(bundle, rng, cfg.batch_size, cfg.per_batch_context));
  }
  return train_step_on(model, bundle, cfg, opt, micro, rng);
}

DatasetBundle restrict_to(const DatasetBundle& bundle, const std::string& dataset_id) {
  const std::size_t i = bundle.index_of(dataset_id);
  DatasetBundle out;
  out.datasets.push_back(bundle.datasets[i]);
  out.contexts.push_back(bundle.contexts[i]);
  return out;
}

TrainResult train(ConditionedModel& model, const DatasetBundle& bundle, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  const DatasetBundle data =
      cfg.mode == TrainMode::Oracle ? restrict_to(bundle, cfg.oracle_dataset) : bundle;
  data.validate();
  Rng root(cfg.seed);
  Rng batch_rng = root.split("batches");
  Rng noise_rng = root.split("neftune");
  TrainResult result;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    std::vector<std::vector<Sample>> micro;
    for (std::size_t i = 0; i < cfg.grad_accum; ++i) {
      micro.push_back(sample_batch(data, batch_rng, cfg.batch_size, cfg.per_batch_context));
    }
    StepResult r = train_step_on(model, data, cfg, result.opt, micro, noise_rng);
    result.trace.push_back({s, r.lr, r.loss});
    if (progress) progress(result.trace.back());
  }
  return result;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view[0] == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
  }
  return out;
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o << "mode = " << mode_name(c.mode) << '\n'
    << "max_lr = " << format_double(c.max_lr) << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "grad_accum = " << c.grad_accum << '\n'
    << "warmup_fraction = " << format_double(c.warmup_fraction) << '\n'
    << "label_smoothing = " << format_double(c.label_smoothing) << '\n'
    << "weight_decay = " << format_double(c.weight_decay) << '\n'
    << "neftune_alpha = " << format_double(c.neftune_alpha) << '\n'
    << "beta1 = " << format_double(c.beta1) << '\n'
    << "beta2 = " << format_double(c.beta2) << '\n'
    << "adam_eps = " << format_double(c.adam_eps) << '\n'
    << "steps = " << c.steps << '\n'
    << "seed = " << c.seed << '\n'
    << "per_batch_context = " << (c.per_batch_context ? "true" : "false") << '\n';
  if (!c.oracle_dataset.empty()) o << "oracle_dataset = " << c.oracle_dataset << '\n';
  return o.str();
}

std::string format_model_config(const ModelConfig& c) {
  std::ostringstream o;
  o << "n_layers = " << c.n_layers << '\n'
    << "d_model = " << c.d_model << '\n'
    << "n_heads = " << c.n_heads << '\n'
    << "d_ff = " << c.d_ff << '\n'
    << "vocab_size = " << c.vocab_size << '\n'
    << "max_seq = " << c.max_seq << '\n'
    << "q_out = " << c.q_out << '\n'
    << "v_out = " << c.v_out << '\n';
  return o.str();
}

std::string format_hyper_config(const HyperConfig& c) {
  std::ostringstream o;
  o << "d_context = " << c.d_context << '\n'
    << "d_type = " << c.d_type << '\n'
    << "d_layer = " << c.d_layer << '\n'
    << "d_mlp_in = " << c.d_mlp_in << '\n'
    << "d_mlp_hidden = " << c.d_mlp_hidden << '\n'
    << "d_mlp_out = " << c.d_mlp_out << '\n'
    << "rank = " << c.rank << '\n';
  return o.str();
}

std::vector<std::string> apply_kv(const std::map<std::string, std::string>& kv, TrainConfig* tc,
                                  ModelConfig* mc, HyperConfig* hc) {
  std::vector<std::string> unused;
  for (const auto& [k, v] : kv) {
    auto size = [&](std::size_t& field) { field = parse_u64(v, k); };
    auto real = [&](double& field) { field = parse_double(v, k); };
    bool used = true;
    if (tc && k == "mode") tc->mode = parse_mode(v);
    else if (tc && k == "max_lr") real(tc->max_lr);
    else if (tc && k == "batch_size") size(tc->batch_size);
    else if (tc && k == "grad_accum") size(tc->grad_accum);
    else if (tc && k == "warmup_fraction") real(tc->warmup_fraction);
    else if (tc && k == "label_smoothing") real(tc->label_smoothing);
    else if (tc && k == "weight_decay") real(tc->weight_decay);
    else if (tc && k == "neftune_alpha") real(tc->neftune_alpha);
    else if (tc && k == "beta1") real(tc->beta1);
    else if (tc && k == "beta2") real(tc->beta2);
    else if (tc && k == "adam_eps") real(tc->adam_eps);
    else if (tc && k == "steps") size(tc->steps);
    else if (tc && k == "seed") tc->seed = parse_u64(v, k);
    else if (tc && k == "oracle_dataset") tc->oracle_dataset = v;
    else if (tc && k == "per_batch_context") tc->per_batch_context = parse_bool(v, k);
    else if (mc && k == "n_layers") size(mc->n_layers);
    else if (mc && k == "d_model") size(mc->d_model);
    else if (mc && k == "n_heads") size(mc->n_heads);
    else if (mc && k == "d_ff") size(mc->d_ff);
    else if (mc && k == "vocab_size") size(mc->vocab_size);
    else if (mc && k == "max_seq") size(mc->max_seq);
    else if (mc && k == "q_out") size(mc->q_out);
    else if (mc && k == "v_out") size(mc->v_out);
    else if (hc && k == "d_context") size(hc->d_context);
    else if (hc && k == "d_type") size(hc->d_type);
    else if (hc && k == "d_layer") size(hc->d_layer);
    else if (hc && k == "d_mlp_in") size(hc->d_mlp_in);
    else if (hc && k == "d_mlp_hidden") size(hc->d_mlp_hidden);
    else if (hc && k == "d_mlp_out") size(hc->d_mlp_out);
    else if (hc && k == "rank") size(hc->rank);
    else used = false;
    if (!used) unused.push_back(k);
  }
  return unused;
}

std::string format_trace_csv(const std::vector<TracePoint>& trace) {
  std::ostringstream o;
  o << "step,lr,loss\n";
  for (const auto& p : trace) {
    o << p.step << ',' << format_double(p.lr) << ',' << format_double(p.loss) << '\n';
  }
  return o.str();
}

namespace {

std::vector<TracePoint> parse_trace_csv(const std::string& text) {
  std::vector<TracePoint> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) {
      throw FormatError("malformed loss trace line '" + line + "'");
    }
    out.push_back({parse_u64(line.substr(0, a), "trace step"),
                   parse_double(line.substr(a + 1, b - a - 1), "trace lr"),
                   parse_double(line.substr(b + 1), "trace loss")});
  }
  return out;
}

}  // namespace

void save_run(const std::filesystem::path& dir, const ConditionedModel& model,
              const TrainConfig& cfg, const TrainResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_model_dir(dir / "base", model.base.tensors(), "frozen");
  const auto theta = model.trainable();
  save_model_dir(dir / "theta", theta, "trainable");

  std::vector<NamedTensor> moments;
  for (const auto& p : theta) {
    auto find = [&](const std::map<std::string, std::vector<double>>& src) {
      auto it = src.find(p.name);
      std::vector<double> v = it == src.end() ? std::vector<double>(p.tensor.numel(), 0.0) : it->second;
      return Tensor::from(p.tensor.shape(), std::move(v));
    };
    moments.push_back({p.name + ".m", find(result.opt.m)});
    moments.push_back({p.name + ".v", find(result.opt.v)});
  }
  save_model_dir(dir / "optimizer", moments, "moment");

  HyperConfig hc = model.hyper ? model.hyper->cfg : HyperConfig{};
  hc.rank = model.rank();
  const std::string config = format_train_config(cfg) + format_model_config(model.cfg) +
                             format_hyper_config(hc);
  write_text(dir / "config.txt", config);
  write_text(dir / "loss_trace.csv", format_trace_csv(result.trace));

  std::ostringstream manifest;
  manifest << "format = zhyper-run v1\n"
           << "mode = " << mode_name(cfg.mode) << '\n'
           << "optimizer_step = " << result.opt.step << '\n'
           << "base_checksum = " << model.base.checksum() << '\n'
           << "trainable_params = ";
  std::size_t n = 0;
  for (const auto& p : theta) n += p.tensor.numel();
  manifest << n << '\n';
  write_text(dir / "manifest.txt", manifest.str());
}

LoadedRun load_run(const std::filesystem::path& dir) {
  const auto kv = parse_kv(read_text(dir / "config.txt"));
  LoadedRun run;
  ModelConfig mc;
  HyperConfig hc;
  apply_kv(kv, &run.cfg, &mc, &hc);
  run.model = build_model(mc, hc, run.cfg.mode, run.cfg.seed);
  assign_base(run.model.base, mc, load_model_dir(dir / "base"));

  const auto theta = load_model_dir(dir / "theta");
  for (auto& p : run.model.trainable()) {
    auto it = theta.find(p.name);
    if (it == theta.end()) throw FormatError("run lacks trainable tensor '" + p.name + "'");
    if (it->second.shape() != p.tensor.shape()) {
      throw FormatError("trainable tensor '" + p.name + "' has shape " +
                        shape_str(it->second.shape()) + ", expected " +
                        shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(it->second.data().begin(), it->second.data().end(), dst.begin());
  }

  const auto moments = load_model_dir(dir / "optimizer");
  for (const auto& [name, t] : moments) {
    const bool is_m = name.ends_with(".m");
    const std::string leaf = name.substr(0, name.size() - 2);
    (is_m ? run.opt.m : run.opt.v)[leaf] = std::vector<double>(t.data().begin(), t.data().end());
  }
  const auto manifest = parse_kv(read_text(dir / "manifest.txt"));
  if (auto it = manifest.find("optimizer_step"); it != manifest.end()) {
    run.opt.step = parse_u64(it->second, "optimizer_step");
  }
  if (auto it = manifest.find("base_checksum"); it != manifest.end()) {
    if (parse_u64(it->second, "base_checksum") != run.model.base.checksum()) {
      throw FormatError("base weights do not match the recorded checksum");
    }
  }
  run.trace = parse_trace_csv(read_text(dir / "loss_trace.csv"));
  return run;
}

}  // namespace zhyper
