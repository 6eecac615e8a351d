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

#include <string>
#include <vector>

#include "zhyper/tensor.hpp"

namespace zhyper {

/// One token sequence. Positions before prompt_len are conditioning input;
/// the loss covers the remaining tokens.
struct Example {
  std::vector<int> tokens;
  std::size_t prompt_len = 0;

  /// Model input: all tokens but the last.
  std::vector<int> inputs() const;
  /// Next-token targets aligned with inputs(); prompt positions hold -1.
  std::vector<int> targets() const;
};

struct Dataset {
  std::string id;
  std::vector<Example> train;
  std::vector<Example> eval;
};

/// A textual condition and its fixed-length embedding.
struct ContextRecord {
  std::string id;
  std::string dataset_id;
  std::string text;
  Tensor embedding;  // [d_c]
};

/// Datasets plus, per dataset, the contexts it is sampled with.
struct DatasetBundle {
  std::vector<Dataset> datasets;
  std::vector<std::vector<ContextRecord>> contexts;  // parallel to datasets

  std::size_t index_of(const std::string& dataset_id) const;  // throws KeyError
  void validate() const;
};

}  // namespace zhyper
