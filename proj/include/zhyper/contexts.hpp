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
#include "zhyper/io.hpp"

namespace zhyper {

/// Validated, immutable collection of context records of one width.
class ContextStore {
 public:
  explicit ContextStore(std::size_t d_context = 0) : d_context_(d_context) {}

  /// Rejects duplicate ids, width drift and non-finite values.
  void add(ContextRecord record);

  std::size_t d_context() const { return d_context_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<ContextRecord>& records() const { return records_; }
  const ContextRecord& get(const std::string& id) const;  // throws KeyError
  /// Records of one dataset, sorted by id.
  std::vector<ContextRecord> for_dataset(const std::string& dataset_id) const;

 private:
  std::size_t d_context_;
  std::vector<ContextRecord> records_;
  std::map<std::string, std::size_t> by_id_;
};

// ZEMB v1: "ZEMB", u16 version, u32 d_c, u32 count; per record u16 id length +
// id, u16 dataset id length + dataset id, u32 text length + text (UTF-8),
// then d_c little-endian float32 values.
Bytes encode_zemb(const ContextStore& store);
ContextStore decode_zemb(std::span<const std::uint8_t> bytes);
void save_context_store(const std::filesystem::path& path, const ContextStore& store);
ContextStore load_context_store(const std::filesystem::path& path);

struct ContextAssignment {
  DatasetBundle bundle;
  std::size_t orphans = 0;  // records whose dataset is not in the bundle
  std::vector<std::string> warnings;
};

/// Fills each dataset's context list from the store. Throws ConfigError
/// naming every dataset that ends up with no context.
ContextAssignment assign_contexts(const ContextStore& store, DatasetBundle bundle);

/// Runs an external embedder: writes one text per line to its stdin and
/// parses a ZEMB document from its stdout.
ContextStore run_external_embedder(const std::string& command,
                                   const std::vector<std::string>& texts);

}  // namespace zhyper
