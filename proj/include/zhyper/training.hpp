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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "zhyper/data.hpp"
#include "zhyper/model.hpp"
#include "zhyper/rng.hpp"

namespace zhyper {

enum class TrainMode { ZhyperDiag, ZhyperSquare, Mtl, Oracle };
const char* mode_name(TrainMode m);
TrainMode parse_mode(const std::string& name);

struct TrainConfig {
  double max_lr = 2.5e-5;
  std::size_t batch_size = 8;
  std::size_t grad_accum = 1;
  double warmup_fraction = 0.2;
  double label_smoothing = 0.1;
  double weight_decay = 0.1;
  double neftune_alpha = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::ZhyperDiag;
  /// Oracle mode trains one plain LoRA on this dataset only.
  std::string oracle_dataset;
  /// One context per batch instead of one per example.
  bool per_batch_context = false;

  void validate() const;
  /// Linear warmup over warmup_fraction of the run, then linear decay to 0.
  double lr_at(std::size_t step) const;
};

/// Mean label-smoothed cross-entropy over the non-ignored (-1) targets.
Tensor sft_loss(const Tensor& logits, std::span<const int> targets, double smoothing);

/// Adds uniform[-1, 1] * alpha / sqrt(seq * d) noise to every entry.
Tensor neftune_perturb(const Tensor& embedded, double alpha, Rng& rng);

struct Sample {
  std::size_t dataset = 0;
  std::size_t example = 0;
  std::size_t context = 0;
};

/// dataset ~ U[n], example ~ U(D_i), context ~ U(C_i), drawn per element
/// (or one context index per batch when per_batch_context is set).
std::vector<Sample> sample_batch(const DatasetBundle& bundle, Rng& rng, std::size_t batch_size,
                                 bool per_batch_context = false);

/// AdamW moments per trainable tensor.
struct OptimizerState {
  std::map<std::string, std::vector<double>> m, v;
  std::size_t step = 0;
};

struct StepResult {
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

/// Builds the model for a mode: mtl/oracle get no hypernetwork.
ConditionedModel build_model(const ModelConfig& mcfg, const HyperConfig& hcfg, TrainMode mode,
                             std::uint64_t seed);

/// Mean loss of a batch under the mode's conditioning, on the tape.
Tensor batch_loss(const ConditionedModel& model, const DatasetBundle& bundle,
                  std::span<const Sample> batch, double smoothing, double neftune_alpha,
                  Rng* noise_rng);

/// One optimizer update: grad_accum micro-batches drawn from `rng`, then
/// AdamW with decoupled weight decay on exactly the trainable set.
StepResult train_step(ConditionedModel& model, const DatasetBundle& bundle, const TrainConfig& cfg,
                      OptimizerState& opt, Rng& rng);

/// Same update on caller-supplied micro-batches.
StepResult train_step_on(ConditionedModel& model, const DatasetBundle& bundle,
                         const TrainConfig& cfg, OptimizerState& opt,
                         std::span<const std::vector<Sample>> micro_batches, Rng& noise_rng);

struct TracePoint {
  std::size_t step;
  double lr;
  double loss;
};

struct TrainResult {
  std::vector<TracePoint> trace;
  OptimizerState opt;
};

using ProgressFn = std::function<void(const TracePoint&)>;

/// Full run: cfg.steps updates from a seed-derived stream. Oracle mode
/// restricts the bundle to cfg.oracle_dataset first.
TrainResult train(ConditionedModel& model, const DatasetBundle& bundle, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

DatasetBundle restrict_to(const DatasetBundle& bundle, const std::string& dataset_id);

// Key = value config text. Unknown keys are reported back to the caller.
std::map<std::string, std::string> parse_kv(const std::string& text);
std::string format_train_config(const TrainConfig& cfg);
std::string format_model_config(const ModelConfig& cfg);
std::string format_hyper_config(const HyperConfig& cfg);
/// Applies recognized keys; returns the ones no config consumed.
std::vector<std::string> apply_kv(const std::map<std::string, std::string>& kv, TrainConfig* tc,
                                  ModelConfig* mc, HyperConfig* hc);

/// Run checkpoint directory: manifest.txt, config.txt, loss_trace.csv,
/// theta/ (trainable ZTSR), optimizer/ (moments), base/ (frozen weights).
void save_run(const std::filesystem::path& dir, const ConditionedModel& model,
              const TrainConfig& cfg, const TrainResult& result);

struct LoadedRun {
  ConditionedModel model;
  TrainConfig cfg;
  OptimizerState opt;
  std::vector<TracePoint> trace;
};
LoadedRun load_run(const std::filesystem::path& dir);

std::string format_trace_csv(const std::vector<TracePoint>& trace);

}  // namespace zhyper
