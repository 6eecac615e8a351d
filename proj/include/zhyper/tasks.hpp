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
#include <string>
#include <vector>

#include "zhyper/contexts.hpp"
#include "zhyper/data.hpp"
#include "zhyper/model.hpp"

namespace zhyper {

enum class GeneratorKind { BiasedUnigram, CyclicGrammar, CopyWithMarker };
const char* generator_name(GeneratorKind k);
GeneratorKind parse_generator(const std::string& name);

/// One synthetic conditioned-generation task. Every sequence is
/// prompt_len uniform prompt tokens followed by response_len targets.
struct SyntheticTaskSpec {
  std::string task_id;
  GeneratorKind kind = GeneratorKind::BiasedUnigram;
  std::vector<double> bias;  // biased-unigram: unnormalized weights over vocab
  std::vector<int> cycle;    // cyclic-grammar: tokens repeated in order
  int marker = 0;            // copy-with-marker: token opening the copy
  std::vector<int> alphabet; // copy-with-marker: prompt tokens (empty: all but marker)
  std::size_t vocab_size = 32;
  std::size_t prompt_len = 4;
  std::size_t response_len = 8;
  std::size_t n_train = 256;
  std::size_t n_eval = 64;
  std::uint64_t seed = 0;
};

/// Exact distribution of response tokens implied by a spec.
std::vector<double> emission_distribution(const SyntheticTaskSpec& spec);
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

struct CorpusOptions {
  std::size_t d_context = 32;
  std::size_t descriptions_per_task = 4;
  double description_noise = 0.5;
  bool one_hot = false;  // contexts are one-hot task indicators instead
  std::uint64_t seed = 0;
};

struct Corpus {
  DatasetBundle bundle;  // contexts already assigned
  ContextStore store;
};

/// Deterministic corpora plus pseudo-embedded descriptions. Throws
/// ConfigError on empty/duplicate specs or on two tasks whose emission
/// distributions are closer than 0.2 in total variation.
Corpus gen_corpus(const std::vector<SyntheticTaskSpec>& specs, const CorpusOptions& opts);

/// Three tasks (one per generator kind) over a 32-token vocabulary.
std::vector<SyntheticTaskSpec> default_task_specs(std::uint64_t seed, std::size_t n_train = 256,
                                                  std::size_t n_eval = 64);

// On disk: corpus.txt (specs and split sizes), <task>.<split>.tok token
// files with a one-line text header followed by little-endian u16 ids, and
// contexts.zemb.
void save_corpus(const std::filesystem::path& dir, const std::vector<SyntheticTaskSpec>& specs,
                 const CorpusOptions& opts, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);
std::vector<SyntheticTaskSpec> load_corpus_specs(const std::filesystem::path& dir);

struct EvalCell {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Rows: context records (and aggregated per-task context groups); columns:
/// tasks. The unconditioned row runs the same pairs with z = ones.
struct EvalMatrix {
  std::vector<std::string> context_ids;
  std::vector<std::string> context_tasks;  // dataset of each context row
  std::vector<std::string> task_ids;
  std::vector<std::vector<EvalCell>> cells;          // [context][task]
  std::vector<std::vector<EvalCell>> grouped;        // [task group][task]
  std::vector<EvalCell> unconditioned;               // [task]

  double matched_loss(std::size_t task) const { return grouped[task][task].loss; }
  /// min over other groups j of grouped[j][task].loss
  double best_mismatched_loss(std::size_t task) const;
  bool diagonal_dominant() const;
};

/// Mean (unsmoothed) loss and greedy next-token accuracy on eval splits.
EvalCell eval_cell(const ConditionedModel& model, const Dataset& task, const AdapterSet& adapters);
EvalMatrix eval_conditioned(const ConditionedModel& model, const DatasetBundle& bundle);

std::string format_eval_matrix(const EvalMatrix& m);

}  // namespace zhyper
