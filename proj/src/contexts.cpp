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

#include "zhyper/contexts.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "zhyper/error.hpp"

namespace zhyper {

void ContextStore::add(ContextRecord record) {
  const std::string where = "record " + std::to_string(records_.size()) + " ('" + record.id + "')";
  if (record.embedding.rank() != 1 || record.embedding.numel() != d_context_) {
    throw ConfigError(where + ": embedding " + shape_str(record.embedding.shape()) +
                      " does not match d_c " + std::to_string(d_context_));
  }
  for (std::size_t i = 0; i < record.embedding.numel(); ++i) {
    if (!std::isfinite(record.embedding[i])) {
      throw ConfigError(where + ": non-finite embedding value at position " + std::to_string(i));
    }
  }
  if (by_id_.count(record.id)) throw ConfigError(where + ": duplicate id");
  by_id_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

const ContextRecord& ContextStore::get(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw KeyError("unknown context id '" + id + "'");
  return records_[it->second];
}

std::vector<ContextRecord> ContextStore::for_dataset(const std::string& dataset_id) const {
  std::vector<ContextRecord> out;
  for (const auto& [id, idx] : by_id_) {  // map order = sorted by id
    if (records_[idx].dataset_id == dataset_id) out.push_back(records_[idx]);
  }
  return out;
}

Bytes encode_zemb(const ContextStore& store) {
  ByteWriter w;
  w.raw(std::string_view("ZEMB"));
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(store.d_context()));
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& r : store.records()) {
    if (r.id.size() > 0xFFFF || r.dataset_id.size() > 0xFFFF) {
      throw ContractError("context id longer than 65535 bytes");
    }
    w.u16(static_cast<std::uint16_t>(r.id.size()));
    w.raw(r.id);
    w.u16(static_cast<std::uint16_t>(r.dataset_id.size()));
    w.raw(r.dataset_id);
    w.u32(static_cast<std::uint32_t>(r.text.size()));
    w.raw(r.text);
    for (double v : r.embedding.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

ContextStore decode_zemb(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  in.expect_magic("ZEMB");
  const auto version = in.u16("version");
  if (version != 1) throw FormatError("unsupported ZEMB version " + std::to_string(version));
  const std::size_t d_c = in.u32("d_c");
  const std::size_t count = in.u32("record count");
  ContextStore store(d_c);
  for (std::size_t k = 0; k < count; ++k) {
    const std::string where = "ZEMB record " + std::to_string(k);
    try {
      ContextRecord r;
      r.id = in.str(in.u16("id length"), "id");
      r.dataset_id = in.str(in.u16("dataset id length"), "dataset id");
      r.text = in.str(in.u32("text length"), "text");
      std::vector<double> values(d_c);
      for (std::size_t i = 0; i < d_c; ++i) {
        values[i] = in.f32("embedding value");
        if (!std::isfinite(values[i])) {
          throw FormatError("non-finite embedding value at position " + std::to_string(i));
        }
      }
      r.embedding = Tensor::from({d_c}, std::move(values));
      store.add(std::move(r));
    } catch (const Error& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (!in.done()) {
    throw FormatError("ZEMB has " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return store;
}

void save_context_store(const std::filesystem::path& path, const ContextStore& store) {
  write_file(path, encode_zemb(store));
}

ContextStore load_context_store(const std::filesystem::path& path) {
  try {
    return decode_zemb(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ContextAssignment assign_contexts(const ContextStore& store, DatasetBundle bundle) {
  ContextAssignment out;
  bundle.contexts.assign(bundle.datasets.size(), {});
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < bundle.datasets.size(); ++i) {
    bundle.contexts[i] = store.for_dataset(bundle.datasets[i].id);
    if (bundle.contexts[i].empty()) missing.push_back(bundle.datasets[i].id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError("datasets without contexts: " + list);
  }
  for (const auto& r : store.records()) {
    const bool known = std::any_of(bundle.datasets.begin(), bundle.datasets.end(),
                                   [&r](const Dataset& d) { return d.id == r.dataset_id; });
    if (!known) {
      ++out.orphans;
      out.warnings.push_back("context '" + r.id + "' references unknown dataset '" +
                             r.dataset_id + "'; ignored");
    }
  }
  out.bundle = std::move(bundle);
  return out;
}

ContextStore run_external_embedder(const std::string& command,
                                   const std::vector<std::string>& texts) {
  // popen is one-directional, so stage the input in a temporary file.
  static std::atomic<unsigned> counter{0};
  auto input = std::filesystem::temp_directory_path() /
               ("zhyper-embed-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)) + ".txt");
  {
    std::ofstream f(input);
    for (const auto& t : texts) f << t << '\n';
  }
  const std::string cmd = "(" + command + ") < '" + input.string() + "'";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw Error("cannot start embedder: " + command);
  Bytes out;
  std::uint8_t buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.insert(out.end(), buf, buf + n);
  const int status = pclose(pipe);
  std::filesystem::remove(input);
  if (status != 0) throw Error("embedder exited with status " + std::to_string(status));
  return decode_zemb(out);
}

}  // namespace zhyper
