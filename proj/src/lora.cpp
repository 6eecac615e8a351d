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

#include "zhyper/lora.hpp"

#include <cmath>

#include "zhyper/error.hpp"
#include "zhyper/ops.hpp"

namespace zhyper {

const char* proj_name(ProjType t) { return t == ProjType::Q ? "Q" : "V"; }

LoRAPair make_lora_pair(Tensor a, Tensor b, double scale) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("LoRA factors must be matrices, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("LoRA rank mismatch: A " + shape_str(a.shape()) + ", B " +
                         shape_str(b.shape()));
  }
  if (a.dim(1) == 0) throw ContractError("LoRA rank must be at least 1");
  return LoRAPair{std::move(a), std::move(b), scale};
}

Modulation Modulation::identity() { return Modulation(Kind::Identity, Tensor()); }

Modulation Modulation::diag(Tensor z) {
  if (z.rank() != 1) {
    throw DimensionError("diagonal modulation needs a vector, got " + shape_str(z.shape()));
  }
  return Modulation(Kind::Diag, std::move(z));
}

Modulation Modulation::square(Tensor z) {
  if (z.rank() != 2 || z.dim(0) != z.dim(1)) {
    throw DimensionError("square modulation needs an r x r matrix, got " +
                         shape_str(z.shape()));
  }
  return Modulation(Kind::Square, std::move(z));
}

std::size_t Modulation::rank() const {
  switch (kind_) {
    case Kind::Identity:
      return 0;
    case Kind::Diag:
    case Kind::Square:
      return signal_.dim(0);
  }
  return 0;
}

const char* modulation_name(Modulation::Kind k) {
  switch (k) {
    case Modulation::Kind::Identity:
      return "identity";
    case Modulation::Kind::Diag:
      return "diag";
    case Modulation::Kind::Square:
      return "square";
  }
  return "?";
}

Modulation::Kind parse_modulation_kind(const std::string& name) {
  if (name == "identity") return Modulation::Kind::Identity;
  if (name == "diag") return Modulation::Kind::Diag;
  if (name == "square" || name == "mix") return Modulation::Kind::Square;
  throw ContractError("unknown modulation variant '" + name + "'");
}

namespace {

void check_rank(const LoRAPair& pair, const Modulation& m) {
  if (m.kind() != Modulation::Kind::Identity && m.rank() != pair.rank()) {
    throw DimensionError(std::string(modulation_name(m.kind())) + " modulation of rank " +
                         std::to_string(m.rank()) + " for LoRA pair of rank " +
                         std::to_string(pair.rank()));
  }
}

// A*M for the three variants.
Tensor apply_modulation(const Tensor& left, const Modulation& m) {
  switch (m.kind()) {
    case Modulation::Kind::Identity:
      return left;
    case Modulation::Kind::Diag:
      return mul(left, m.signal());
    case Modulation::Kind::Square:
      return matmul(left, m.signal());
  }
  return left;
}

Tensor apply_scale(const Tensor& t, double s) { return s == 1.0 ? t : scale(t, s); }

}  // namespace

Tensor delta_weight(const LoRAPair& pair, const Modulation& m) {
  check_rank(pair, m);
  return apply_scale(matmul(apply_modulation(pair.a, m), pair.b), pair.scale);
}

Tensor lora_project(const Tensor& x, const LoRAPair& pair, const Modulation& m) {
  check_rank(pair, m);
  if (x.cols() != pair.d_in()) {
    throw DimensionError("adapter input width " + std::to_string(x.cols()) +
                         " does not match d_in " + std::to_string(pair.d_in()));
  }
  return apply_scale(matmul(apply_modulation(matmul(x, pair.a), m), pair.b), pair.scale);
}

Tensor adapted_forward(const Tensor& w_base, const LoRAPair& pair, const Modulation& m,
                       const Tensor& x) {
  if (w_base.requires_grad()) {
    throw ContractError("adapted_forward: base weight must be frozen");
  }
  if (w_base.rank() != 2 || w_base.dim(0) != pair.d_in() || w_base.dim(1) != pair.d_out()) {
    throw DimensionError("base weight " + shape_str(w_base.shape()) + " vs LoRA " +
                         std::to_string(pair.d_in()) + "x" + std::to_string(pair.d_out()));
  }
  return add(matmul(x, w_base), lora_project(x, pair, m));
}

Tensor embed_diag_in_square(const Tensor& z) {
  if (z.rank() != 1) {
    throw DimensionError("embed_diag_in_square needs a vector, got " + shape_str(z.shape()));
  }
  // eye * z scales column j by z[j], leaving z on the diagonal.
  return mul(Tensor::eye(z.numel()), z);
}

LoRAPair factor_square_into_full(const LoRAPair& pair, const Tensor& z) {
  check_rank(pair, Modulation::square(z));
  return LoRAPair{matmul(pair.a, z), pair.b, pair.scale};
}

DiagFit fit_diag_modulation(const LoRAPair& pair, const Tensor& target) {
  const std::size_t r = pair.rank(), din = pair.d_in(), dout = pair.d_out();
  if (target.shape() != Shape{din, dout}) {
    throw DimensionError("target delta " + shape_str(target.shape()) + " for pair " +
                         std::to_string(din) + "x" + std::to_string(dout));
  }
  // delta(z) = sum_k z_k * s * a_k b_k^T, a linear model in z.
  std::vector<std::vector<double>> basis(r, std::vector<double>(din * dout));
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t i = 0; i < din; ++i) {
      for (std::size_t j = 0; j < dout; ++j) {
        basis[k][i * dout + j] = pair.scale * pair.a.at(i, k) * pair.b.at(k, j);
      }
    }
  }
  std::vector<double> gram(r * r, 0.0), rhs(r, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t l = 0; l < r; ++l) {
      for (std::size_t e = 0; e < din * dout; ++e) gram[k * r + l] += basis[k][e] * basis[l][e];
    }
    for (std::size_t e = 0; e < din * dout; ++e) rhs[k] += basis[k][e] * target[e];
  }
  // Gaussian elimination with partial pivoting; singular directions get z = 0.
  std::vector<double> z(r, 0.0);
  std::vector<std::size_t> pivot_col(r, r);
  std::size_t row = 0;
  for (std::size_t col = 0; col < r && row < r; ++col) {
    std::size_t best = row;
    for (std::size_t i = row + 1; i < r; ++i) {
      if (std::abs(gram[i * r + col]) > std::abs(gram[best * r + col])) best = i;
    }
    if (std::abs(gram[best * r + col]) < 1e-14) continue;
    for (std::size_t j = 0; j < r; ++j) std::swap(gram[row * r + j], gram[best * r + j]);
    std::swap(rhs[row], rhs[best]);
    for (std::size_t i = 0; i < r; ++i) {
      if (i == row) continue;
      const double f = gram[i * r + col] / gram[row * r + col];
      for (std::size_t j = 0; j < r; ++j) gram[i * r + j] -= f * gram[row * r + j];
      rhs[i] -= f * rhs[row];
    }
    pivot_col[row] = col;
    ++row;
  }
  for (std::size_t i = 0; i < row; ++i) {
    z[pivot_col[i]] = rhs[i] / gram[i * r + pivot_col[i]];
  }
  double res = 0.0;
  for (std::size_t e = 0; e < din * dout; ++e) {
    double v = target[e];
    for (std::size_t k = 0; k < r; ++k) v -= z[k] * basis[k][e];
    res += v * v;
  }
  return DiagFit{Tensor::from({r}, z), std::sqrt(res)};
}

SquareOnlyWitness rotation_counterexample() {
  return SquareOnlyWitness{make_lora_pair(Tensor::eye(2), Tensor::eye(2)),
                           Tensor::from({2, 2}, {0.0, -1.0, 1.0, 0.0})};
}

void AdapterSet::insert(Site site, AdapterEntry entry) {
  if (site.layer >= n_layers_ || !(type_mask_ & type_bit(site.type))) {
    throw KeyError("site (" + std::to_string(site.layer) + ", " + proj_name(site.type) +
                   ") is not an injection site of this adapter set");
  }
  check_rank(entry.pair, entry.modulation);
  if (!entries_.emplace(site, std::move(entry)).second) {
    throw KeyError("duplicate adapter for site (" + std::to_string(site.layer) + ", " +
                   proj_name(site.type) + ")");
  }
}

const AdapterEntry& AdapterSet::at(Site site) const {
  if (const auto* e = find(site)) return *e;
  throw KeyError("no adapter for site (" + std::to_string(site.layer) + ", " +
                 proj_name(site.type) + ")");
}

const AdapterEntry* AdapterSet::find(Site site) const {
  auto it = entries_.find(site);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t AdapterSet::signal_size() const {
  std::size_t n = 0;
  for (const auto& [site, e] : entries_) n += e.modulation.signal_size();
  return n;
}

bool AdapterSet::complete() const {
  std::size_t expected = 0;
  for (auto t : kProjTypes) {
    if (type_mask_ & type_bit(t)) expected += n_layers_;
  }
  return entries_.size() == expected;
}

Bytes encode_zadp(const AdapterSet& set) {
  if (!set.complete() || set.size() == 0) {
    throw ContractError("ZADP export needs a complete, nonempty adapter set");
  }
  const auto& first = set.entries().begin()->second;
  const std::size_t rank = first.pair.rank();
  const auto kind = first.modulation.kind();
  ByteWriter payload;
  for (const auto& [site, e] : set.entries()) {
    if (e.pair.rank() != rank || e.modulation.kind() != kind) {
      throw ContractError("ZADP needs one rank and one modulation kind across sites");
    }
    write_ztsr(payload, e.pair.a);
    write_ztsr(payload, e.pair.scale == 1.0 ? e.pair.b : scale(e.pair.b, e.pair.scale));
    if (kind != Modulation::Kind::Identity) write_ztsr(payload, e.modulation.signal());
  }
  ByteWriter out;
  out.raw(std::string_view("ZADP"));
  out.u16(1);
  out.u16(static_cast<std::uint16_t>(rank));
  out.u32(static_cast<std::uint32_t>(set.n_layers()));
  out.u8(set.type_mask());
  out.u8(static_cast<std::uint8_t>(kind));
  out.raw(payload.bytes());
  out.u32(crc32(payload.bytes()));
  return out.take();
}

AdapterSet decode_zadp(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  in.expect_magic("ZADP");
  const auto version = in.u16("version");
  if (version != 1) throw FormatError("unsupported ZADP version " + std::to_string(version));
  const std::size_t rank = in.u16("rank");
  const std::size_t layers = in.u32("layer count");
  const std::uint8_t mask = in.u8("type mask");
  const std::uint8_t kind_byte = in.u8("modulation kind");
  if (mask == 0 || mask > 0b11) {
    throw FormatError("invalid type mask " + std::to_string(mask));
  }
  if (kind_byte > 2) throw FormatError("invalid modulation kind " + std::to_string(kind_byte));
  if (rank == 0) throw FormatError("ZADP rank must be positive");
  const auto kind = static_cast<Modulation::Kind>(kind_byte);

  const std::size_t header = in.offset();
  if (in.remaining() < 4) throw FormatError("ZADP file too short for CRC trailer");
  const auto payload = bytes.subspan(header, bytes.size() - header - 4);
  ByteReader crc_reader(bytes.subspan(bytes.size() - 4));
  const std::uint32_t stored = crc_reader.u32("crc");
  const std::uint32_t actual = crc32(payload);
  if (stored != actual) {
    throw FormatError("ZADP CRC mismatch over payload bytes [" + std::to_string(header) + ", " +
                      std::to_string(bytes.size() - 4) + "): stored " + std::to_string(stored) +
                      ", computed " + std::to_string(actual));
  }

  ByteReader body(payload);
  AdapterSet set(layers, mask);
  for (std::size_t layer = 0; layer < layers; ++layer) {
    for (auto t : kProjTypes) {
      if (!(mask & type_bit(t))) continue;
      const std::string where =
          "site (" + std::to_string(layer) + ", " + proj_name(t) + ")";
      try {
        Tensor a = read_ztsr(body);
        Tensor b = read_ztsr(body);
        LoRAPair pair = make_lora_pair(std::move(a), std::move(b));
        if (pair.rank() != rank) {
          throw FormatError("rank " + std::to_string(pair.rank()) + " != header rank " +
                            std::to_string(rank));
        }
        Modulation m = Modulation::identity();
        if (kind == Modulation::Kind::Diag) m = Modulation::diag(read_ztsr(body));
        if (kind == Modulation::Kind::Square) m = Modulation::square(read_ztsr(body));
        set.insert({layer, t}, AdapterEntry{std::move(pair), std::move(m)});
      } catch (const Error& e) {
        throw FormatError("ZADP " + where + ": " + e.what());
      }
    }
  }
  if (!body.done()) {
    throw FormatError("ZADP has " + std::to_string(body.remaining()) +
                      " unexpected trailing payload bytes");
  }
  return set;
}

void save_zadp(const std::filesystem::path& path, const AdapterSet& set) {
  write_file(path, encode_zadp(set));
}

AdapterSet load_zadp(const std::filesystem::path& path) {
  return decode_zadp(read_file(path));
}

}  // namespace zhyper
