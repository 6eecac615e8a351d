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

#include "zhyper/data.hpp"

#include "zhyper/error.hpp"

namespace zhyper {

std::vector<int> Example::inputs() const {
  if (tokens.size() < 2) return {};
  return std::vector<int>(tokens.begin(), tokens.end() - 1);
}

std::vector<int> Example::targets() const {
  std::vector<int> out;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    out.push_back(i >= prompt_len ? tokens[i] : -1);
  }
  return out;
}

std::size_t DatasetBundle::index_of(const std::string& dataset_id) const {
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    if (datasets[i].id == dataset_id) return i;
  }
  throw KeyError("unknown dataset '" + dataset_id + "'");
}

void DatasetBundle::validate() const {
  if (datasets.empty()) throw ConfigError("dataset bundle is empty");
  if (contexts.size() != datasets.size()) {
    throw ConfigError("context lists do not match datasets");
  }
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    if (datasets[i].train.empty()) {
      throw ConfigError("dataset '" + datasets[i].id + "' has no training examples");
    }
    if (contexts[i].empty()) {
      throw ConfigError("dataset '" + datasets[i].id + "' has no contexts");
    }
    for (const auto& c : contexts[i]) {
      if (c.dataset_id != datasets[i].id) {
        throw ConfigError("context '" + c.id + "' references dataset '" + c.dataset_id +
                          "' but is listed under '" + datasets[i].id + "'");
      }
    }
  }
}

}  // namespace zhyper
