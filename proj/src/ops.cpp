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

#include "zhyper/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "zhyper/error.hpp"

namespace zhyper {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool any = std::any_of(parents.begin(), parents.end(),
                         [](const NodePtr& p) { return p->requires_grad; });
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_str(t.shape()));
  }
}

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

// out[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      out[i * k + p] += acc;
    }
  }
}

// out[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

void require_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool ok = sb.size() <= sa.size() &&
            std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  if (!ok) {
    throw DimensionError(std::string(op) + ": cannot broadcast " +
                         shape_str(sb) + " onto " + shape_str(sa));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a.node(), b.node()},
                     [m, k, n](Node& self) {
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         gemm_nt(self.grad.data(), pb.data.data(),
                                 pa.ensure_grad().data(), m, k, n);
                       }
                       if (pb.requires_grad) {
                         gemm_tn(pa.data.data(), self.grad.data(),
                                 pb.ensure_grad().data(), m, k, n);
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto src = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = src[i * n + j];
  }
  return make_result({n, m}, std::move(out), {a.node()}, [m, n](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_broadcast(a, b, "add");
  const std::size_t nb = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % nb];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()},
                     [nb](Node& self) {
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         auto& g = pa.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           g[i % nb] += self.grad[i];
                         }
                       }
                     });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result(a.shape(), std::move(out), {a.node()}, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_broadcast(a, b, "mul");
  const std::size_t nb = b.numel();
  std::vector<double> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i % nb];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()},
                     [nb](Node& self) {
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         auto& g = pa.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           g[i] += self.grad[i] * pb.data[i % nb];
                         }
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           g[i % nb] += self.grad[i] * pa.data[i];
                         }
                       }
                     });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result({}, {s}, {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " +
                         shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a.node()},
                     [](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                     });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const std::size_t rows = parts[0].rows();
  Shape lead(parts[0].shape().begin(),
             parts[0].shape().end() - (parts[0].rank() ? 1 : 0));
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    Shape pl(p.shape().begin(), p.shape().end() - (p.rank() ? 1 : 0));
    if (pl != lead) {
      throw DimensionError("concat: leading shape " + shape_str(pl) +
                           " differs from " + shape_str(lead));
    }
    widths.push_back(p.cols());
    total += p.cols();
    parents.push_back(p.node());
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.begin() + r * widths[k], widths[k],
                  out.begin() + r * total + offset);
    }
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return make_result(std::move(shape), std::move(out), std::move(parents),
                     [rows, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         auto& p = *self.parents[k];
                         if (p.requires_grad) {
                           auto& g = p.ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < widths[k]; ++c) {
                               g[r * widths[k] + c] += self.grad[r * total + off + c];
                             }
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
  const std::size_t width = a.cols();
  if (start + len > width) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside " +
                         shape_str(a.shape()));
  }
  const std::size_t rows = a.rows();
  std::vector<double> out(rows * len);
  auto src = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src.begin() + r * width + start, len, out.begin() + r * len);
  }
  Shape shape = a.shape();
  shape.back() = len;
  return make_result(std::move(shape), std::move(out), {a.node()},
                     [rows, width, start, len](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < len; ++c) {
                           g[r * width + start + c] += self.grad[r * len + c];
                         }
                       }
                     });
}

Tensor softmax(const Tensor& a) {
  const std::size_t rows = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  auto src = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = src.data() + r * n;
    double* y = out.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return make_result(a.shape(), std::move(out), {a.node()},
                     [rows, n](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = self.data.data() + r * n;
                         const double* gy = self.grad.data() + r * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
                         for (std::size_t j = 0; j < n; ++j) {
                           g[r * n + j] += y[j] * (gy[j] - dot);
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const std::size_t rows = x.rows(), n = x.cols();
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n}) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) +
                         "/" + shape_str(bias.shape()) + " for width " +
                         std::to_string(n));
  }
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto src = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = src.data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (xr[j] - mean) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * gd[j] + bd[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pg.requires_grad) {
          auto& g = pg.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            g[i % n] += self.grad[i] * xhat[i];
          }
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
        }
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          std::vector<double> dxhat(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = self.grad[r * n + j] * pg.data[j];
              m1 += dxhat[j];
              m2 += dxhat[j] * xhat[r * n + j];
            }
            m1 /= static_cast<double>(n);
            m2 /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              g[r * n + j] += inv_std[r] * (dxhat[j] - m1 - xhat[r * n + j] * m2);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto src = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * src[i] * (1.0 + std::erf(src[i] / std::numbers::sqrt2));
  }
  return make_result(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = p.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      g[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  auto src = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw InputError("embedding: id " + std::to_string(ids[i]) +
                       " at position " + std::to_string(i) +
                       " outside table of " + std::to_string(vocab) + " rows");
    }
    std::copy_n(src.begin() + static_cast<std::size_t>(ids[i]) * d, d,
                out.begin() + i * d);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), {table.node()},
                     [d, idx = std::move(idx)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         const std::size_t base = static_cast<std::size_t>(idx[i]) * d;
                         for (std::size_t c = 0; c < d; ++c) {
                           g[base + c] += self.grad[i * d + c];
                         }
                       }
                     });
}

Tensor causal_mask(const Tensor& scores) {
  require_matrix(scores, "causal_mask");
  const std::size_t n = scores.dim(0);
  if (scores.dim(1) != n) {
    throw DimensionError("causal_mask expects a square matrix, got " +
                         shape_str(scores.shape()));
  }
  std::vector<double> out(scores.data().begin(), scores.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out[i * n + j] = -std::numeric_limits<double>::infinity();
    }
  }
  return make_result(scores.shape(), std::move(out), {scores.node()},
                     [n](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j <= i; ++j) {
                           g[i * n + j] += self.grad[i * n + j];
                         }
                       }
                     });
}

namespace {

Tensor cross_entropy_impl(const Tensor& logits, std::span<const int> targets,
                          double smoothing, int ignore, bool average) {
  require_matrix(logits, "cross_entropy");
  const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw ContractError("label smoothing must lie in [0, 1)");
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw InputError("cross_entropy: target " + std::to_string(targets[r]) +
                       " at position " + std::to_string(r) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    ++count;
  }
  const double denom = average && count ? static_cast<double>(count) : 1.0;
  const double inv_v = 1.0 / static_cast<double>(vocab);

  std::vector<double> probs(rows * vocab, 0.0);
  double total = 0.0;
  auto src = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore) continue;
    const double* x = src.data() + r * vocab;
    double mx = x[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, x[j]);
    double z = 0.0, mean_x = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      z += std::exp(x[j] - mx);
      mean_x += x[j];
    }
    mean_x *= inv_v;
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[r * vocab + j] = std::exp(x[j] - lse);
    }
    total += (1.0 - smoothing) * (lse - x[targets[r]]) + smoothing * (lse - mean_x);
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(
      {}, {total / denom}, {logits.node()},
      [rows, vocab, smoothing, ignore, denom, inv_v, tgt = std::move(tgt),
       probs = std::move(probs)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        const double up = self.grad[0] / denom;
        for (std::size_t r = 0; r < rows; ++r) {
          if (tgt[r] == ignore) continue;
          for (std::size_t j = 0; j < vocab; ++j) {
            double d = probs[r * vocab + j] - smoothing * inv_v;
            if (static_cast<int>(j) == tgt[r]) d -= 1.0 - smoothing;
            g[r * vocab + j] += up * d;
          }
        }
      });
}

}  // namespace

Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets,
                         double smoothing, int ignore) {
  return cross_entropy_impl(logits, targets, smoothing, ignore, false);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     double smoothing, int ignore) {
  return cross_entropy_impl(logits, targets, smoothing, ignore, true);
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_diff_grad: eps must be positive");
  std::vector<double> base(x.data().begin(), x.data().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto probe = base;
    probe[i] = base[i] + eps;
    const double hi = f(Tensor::from(x.shape(), probe));
    probe[i] = base[i] - eps;
    const double lo = f(Tensor::from(x.shape(), probe));
    out[i] = (hi - lo) / (2.0 * eps);
  }
  return Tensor::from(x.shape(), std::move(out));
}

}  // namespace zhyper
