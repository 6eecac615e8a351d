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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zhyper/io.hpp"
#include "zhyper/tensor.hpp"

namespace zhyper {

/// Attention projection that carries an adapter. Only Q and V are adapted.
enum class ProjType : std::uint8_t { Q = 0, V = 1 };
inline constexpr ProjType kProjTypes[] = {ProjType::Q, ProjType::V};
const char* proj_name(ProjType t);

/// Injection site (layer, projection). Layers are 0-based.
struct Site {
  std::size_t layer = 0;
  ProjType type = ProjType::Q;
  auto operator<=>(const Site&) const = default;
};

/// Fixed low-rank factors: delta = scale * A * M * B with A [d_in x r] and
/// B [r x d_out].
struct LoRAPair {
  Tensor a;
  Tensor b;
  double scale = 1.0;

  std::size_t rank() const { return a.dim(1); }
  std::size_t d_in() const { return a.dim(0); }
  std::size_t d_out() const { return b.dim(1); }
  /// r > min(d_in, d_out) is allowed but wasteful.
  bool oversized_rank() const { return rank() > std::min(d_in(), d_out()); }
};

/// Validates factor shapes (matrices, shared rank >= 1).
LoRAPair make_lora_pair(Tensor a, Tensor b, double scale = 1.0);

/// The per-context signal placed between A and B.
class Modulation {
 public:
  enum class Kind : std::uint8_t { Identity = 0, Diag = 1, Square = 2 };

  static Modulation identity();
  static Modulation diag(Tensor z);    // z: [r]
  static Modulation square(Tensor z);  // Z: [r x r]

  Kind kind() const { return kind_; }
  const Tensor& signal() const { return signal_; }
  /// Rank the signal is sized for; 0 for Identity (fits any rank).
  std::size_t rank() const;
  /// Number of values the hypernetwork emits for this site.
  std::size_t signal_size() const { return kind_ == Kind::Identity ? 0 : signal_.numel(); }

 private:
  Modulation(Kind kind, Tensor signal) : kind_(kind), signal_(std::move(signal)) {}
  Kind kind_;
  Tensor signal_;
};

const char* modulation_name(Modulation::Kind k);
/// Accepts "identity", "diag", "square" and "mix" (alias of square).
Modulation::Kind parse_modulation_kind(const std::string& name);

/// scale * A * M * B, differentiable in A, B and the signal.
Tensor delta_weight(const LoRAPair& pair, const Modulation& m);

/// x * scale * A * M * B without forming the d_in x d_out delta.
Tensor lora_project(const Tensor& x, const LoRAPair& pair, const Modulation& m);

/// x * (W_base + delta). W_base must be frozen.
Tensor adapted_forward(const Tensor& w_base, const LoRAPair& pair,
                       const Modulation& m, const Tensor& x);

/// diag(z) as an r x r matrix; delta_weight is unchanged by the embedding.
Tensor embed_diag_in_square(const Tensor& z);

/// Witness that a square-modulated adapter is a plain LoRA pair:
/// returns (A*Z, B) with the same scale.
LoRAPair factor_square_into_full(const LoRAPair& pair, const Tensor& z);

/// Best diagonal modulation for a target delta under fixed factors, found by
/// solving the r x r normal equations.
struct DiagFit {
  Tensor z;
  double residual = 0.0;  // Frobenius norm of target - delta(diag(z))
};
DiagFit fit_diag_modulation(const LoRAPair& pair, const Tensor& target);

/// Fixed instance separating diagonal from square modulation: identity
/// factors at r = 2 and a quarter-turn rotation Z.
struct SquareOnlyWitness {
  LoRAPair pair;
  Tensor rotation;
};
SquareOnlyWitness rotation_counterexample();

struct AdapterEntry {
  LoRAPair pair;
  Modulation modulation;
};

/// Adapters keyed by injection site.
class AdapterSet {
 public:
  AdapterSet() = default;
  AdapterSet(std::size_t n_layers, std::uint8_t type_mask)
      : n_layers_(n_layers), type_mask_(type_mask) {}

  void insert(Site site, AdapterEntry entry);
  const AdapterEntry& at(Site site) const;
  const AdapterEntry* find(Site site) const;
  bool contains(Site site) const { return entries_.count(site) != 0; }

  std::size_t n_layers() const { return n_layers_; }
  std::uint8_t type_mask() const { return type_mask_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<Site, AdapterEntry>& entries() const { return entries_; }
  /// Total modulation values across sites.
  std::size_t signal_size() const;

  /// Every configured (layer, type) site is present, and nothing else.
  bool complete() const;

 private:
  std::size_t n_layers_ = 0;
  std::uint8_t type_mask_ = 0b11;
  std::map<Site, AdapterEntry> entries_;
};

inline constexpr std::uint8_t type_bit(ProjType t) {
  return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
}

// ZADP v1: "ZADP", u16 version, u16 rank, u32 layers, u8 type mask (bit 0 Q,
// bit 1 V), u8 modulation kind; per site in (layer, Q, V) order the A, B and
// (unless Identity) signal ZTSR blocks; trailing u32 CRC-32 over the entry
// bytes. The pair scale is folded into B on write.
Bytes encode_zadp(const AdapterSet& set);
AdapterSet decode_zadp(std::span<const std::uint8_t> bytes);
void save_zadp(const std::filesystem::path& path, const AdapterSet& set);
AdapterSet load_zadp(const std::filesystem::path& path);

}  // namespace zhyper
