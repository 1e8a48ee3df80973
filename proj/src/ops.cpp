#include "tcm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "tcm/errors.hpp"

namespace tcm {

namespace {

bool want_grad(Tape* tape, std::initializer_list<const Tensor*> ins) {
  if (!tape) return false;
  for (const Tensor* t : ins) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// C[m×n] += op(A)[m×k] · op(B)[k×n]. A transpose flag means the operand is
// stored with swapped dims (ta: A is [k×m]; tb: B is [n×k]).
void mm_acc(const Real* a, bool ta, const Real* b, bool tb, Real* c, std::size_t m,
            std::size_t k, std::size_t n) {
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      Real* ci = c + i * n;
      const Real* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        Real av = ai[p];
        const Real* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      const Real* ai = a + i * k;
      Real* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const Real* bj = b + j * k;
        Real acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] += acc;
      }
    }
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real* ap = a + p * m;
      const Real* bp = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        Real av = ap[i];
        Real* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const Real* bj = b + j * k;
      for (std::size_t p = 0; p < k; ++p) {
        const Real* ap = a + p * m;
        Real bv = bj[p];
        for (std::size_t i = 0; i < m; ++i) c[i * n + j] += ap[i] * bv;
      }
    }
  }
}

enum class Broadcast { kSame, kLastDim, kScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.ndim() == 1 && !a.shape().empty() && a.shape().back() == b.dim(0)) {
    return Broadcast::kLastDim;
  }
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) +
                       " onto " + shape_str(a.shape()));
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  mm_acc(a.values().data(), false, b.values().data(), false, out.values().data(), m, k, n);
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, {a, b}, [a, b, out, m, k, n](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      if (a.requires_grad()) {
        auto& ga = store.at(a.node(), m * k);
        mm_acc(og->data(), false, b.values().data(), true, ga.data(), m, n, k);
      }
      if (b.requires_grad()) {
        auto& gb = store.at(b.node(), k * n);
        mm_acc(a.values().data(), true, og->data(), false, gb.data(), k, m, n);
      }
    });
  }
  return out;
}

Tensor bmm(Tape* tape, const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0);
  const std::size_t m = trans_a ? a.dim(2) : a.dim(1);
  const std::size_t k = trans_a ? a.dim(1) : a.dim(2);
  const std::size_t kb = trans_b ? b.dim(2) : b.dim(1);
  const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
  if (k != kb) {
    throw DimensionError("bmm: inner dimensions disagree for " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({batch, m, n});
  {
    const Real* pa = a.values().data();
    const Real* pb = b.values().data();
    Real* pc = out.values().data();
    for (std::size_t i = 0; i < batch; ++i) {
      mm_acc(pa + i * m * k, trans_a, pb + i * k * n, trans_b, pc + i * m * n, m, k, n);
    }
  }
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, {a, b},
                 [a, b, out, trans_a, trans_b, batch, m, k, n](Tape::GradStore& store) {
                   auto* og = store.find(out.node());
                   if (!og) return;
                   // dA = dC·op(B)ᵀ and dB = op(A)ᵀ·dC, transposed again when
                   // the operand itself was stored transposed.
                   if (a.requires_grad()) {
                     auto& ga = store.at(a.node(), a.size());
                     for (std::size_t i = 0; i < batch; ++i) {
                       const Real* dc = og->data() + i * m * n;
                       const Real* pb = b.values().data() + i * k * n;
                       Real* da = ga.data() + i * m * k;
                       if (!trans_a) {
                         mm_acc(dc, false, pb, !trans_b, da, m, n, k);
                       } else {
                         mm_acc(pb, trans_b, dc, true, da, k, n, m);
                       }
                     }
                   }
                   if (b.requires_grad()) {
                     auto& gb = store.at(b.node(), b.size());
                     for (std::size_t i = 0; i < batch; ++i) {
                       const Real* dc = og->data() + i * m * n;
                       const Real* pa = a.values().data() + i * m * k;
                       Real* db = gb.data() + i * k * n;
                       if (!trans_b) {
                         mm_acc(pa, !trans_a, dc, false, db, k, m, n);
                       } else {
                         mm_acc(dc, true, pa, trans_a, db, n, m, k);
                       }
                     }
                   }
                 });
  }
  return out;
}

namespace {

template <typename Fwd>
Tensor broadcast_binary(Tape* tape, const Tensor& a, const Tensor& b, const char* name,
                        Fwd fwd, bool is_mul) {
  Broadcast kind = broadcast_kind(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values();
  const std::size_t n = av.size();
  const std::size_t d = kind == Broadcast::kLastDim ? b.size() : 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real rhs = kind == Broadcast::kSame ? bv[i] : kind == Broadcast::kScalar ? bv[0] : bv[i % d];
    ov[i] = fwd(av[i], rhs);
  }
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, {a, b}, [a, b, out, kind, is_mul](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      const std::size_t n = out.size();
      const std::size_t d = kind == Broadcast::kLastDim ? b.size() : 0;
      if (a.requires_grad()) {
        auto& ga = store.at(a.node(), a.size());
        const auto bv = b.values();
        for (std::size_t i = 0; i < n; ++i) {
          Real g = (*og)[i];
          if (is_mul) {
            g *= kind == Broadcast::kSame ? bv[i]
                 : kind == Broadcast::kScalar ? bv[0]
                                              : bv[i % d];
          }
          ga[i] += g;
        }
      }
      if (b.requires_grad()) {
        auto& gb = store.at(b.node(), b.size());
        const auto av = a.values();
        for (std::size_t i = 0; i < n; ++i) {
          Real g = (*og)[i];
          if (is_mul) g *= av[i];
          std::size_t j = kind == Broadcast::kSame ? i : kind == Broadcast::kScalar ? 0 : i % d;
          gb[j] += g;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  return broadcast_binary(tape, a, b, "add", [](Real x, Real y) { return x + y; }, false);
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  return broadcast_binary(tape, a, b, "mul", [](Real x, Real y) { return x * y; }, true);
}

Tensor scale(Tape* tape, const Tensor& a, Real c) {
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = c * av[i];
  if (want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record(out, {a}, [a, out, c](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& ga = store.at(a.node(), a.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * (*og)[i];
    });
  }
  return out;
}

namespace {

template <typename F, typename DF>
Tensor unary_op(Tape* tape, const Tensor& a, F f, DF df) {
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i]);
  if (want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record(out, {a}, [a, out, df](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& ga = store.at(a.node(), a.size());
      const auto av = a.values();
      const auto ov = out.values();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += df(av[i], ov[i]) * (*og)[i];
    });
  }
  return out;
}

}  // namespace

Tensor gelu(Tape* tape, const Tensor& a) {
  auto cdf = [](Real x) { return Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>)); };
  return unary_op(
      tape, a, [cdf](Real x) { return x * cdf(x); },
      [cdf](Real x, Real) {
        Real pdf = std::exp(Real(-0.5) * x * x) /
                   std::sqrt(Real(2) * std::numbers::pi_v<Real>);
        return cdf(x) + x * pdf;
      });
}

Tensor tanh_op(Tape* tape, const Tensor& a) {
  return unary_op(
      tape, a, [](Real x) { return std::tanh(x); },
      [](Real, Real y) { return Real(1) - y * y; });
}

namespace {

Tensor reduce_all(Tape* tape, const Tensor& a, bool take_mean) {
  const auto av = a.values();
  Real acc = 0;
  for (Real v : av) acc += v;
  const Real scale_factor = take_mean ? Real(1) / Real(av.size()) : Real(1);
  Tensor out = Tensor::scalar(acc * scale_factor);
  if (want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record(out, {a}, [a, out, scale_factor](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& ga = store.at(a.node(), a.size());
      for (auto& g : ga) g += scale_factor * (*og)[0];
    });
  }
  return out;
}

}  // namespace

Tensor sum(Tape* tape, const Tensor& a) { return reduce_all(tape, a, false); }

Tensor mean(Tape* tape, const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of an empty tensor");
  return reduce_all(tape, a, true);
}

Tensor dot(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("dot: shapes disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  Real acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Tensor out = Tensor::scalar(acc);
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, {a, b}, [a, b, out](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      const Real g = (*og)[0];
      if (a.requires_grad()) {
        auto& ga = store.at(a.node(), a.size());
        const auto bv = b.values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
      }
      if (b.requires_grad()) {
        auto& gb = store.at(b.node(), b.size());
        const auto av = a.values();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
      }
    });
  }
  return out;
}

Tensor maximum(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("maximum: shapes disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] >= bv[i] ? av[i] : bv[i];
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, {a, b}, [a, b, out](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      const auto av = a.values();
      const auto bv = b.values();
      for (std::size_t i = 0; i < av.size(); ++i) {
        if (av[i] >= bv[i]) {
          if (a.requires_grad()) store.at(a.node(), a.size())[i] += (*og)[i];
        } else if (b.requires_grad()) {
          store.at(b.node(), b.size())[i] += (*og)[i];
        }
      }
    });
  }
  return out;
}

Tensor clamp_min(Tape* tape, const Tensor& a, Real floor) {
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] > floor ? av[i] : floor;
  if (want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record(out, {a}, [a, out, floor](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& ga = store.at(a.node(), a.size());
      const auto av = a.values();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        if (av[i] > floor) ga[i] += (*og)[i];
      }
    });
  }
  return out;
}

Tensor concat(Tape* tape, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  if (axis > 1) throw DimensionError("concat supports 2-D tensors, axis 0 or 1");
  const std::size_t fixed = 1 - axis;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.dim(fixed) != parts[0].dim(fixed)) {
      throw DimensionError("concat: shape " + shape_str(p.shape()) +
                           " incompatible with " + shape_str(parts[0].shape()));
    }
  }
  std::size_t total = 0;
  for (const Tensor& p : parts) total += p.dim(axis);
  Shape out_shape = parts[0].shape();
  out_shape[axis] = total;
  Tensor out = Tensor::zeros(out_shape);
  const std::size_t rows = out_shape[0], cols = out_shape[1];
  std::vector<std::size_t> offsets(parts.size());
  {
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      offsets[p] = off;
      const auto pv = parts[p].values();
      if (axis == 0) {
        std::copy(pv.begin(), pv.end(), out.values().begin() + off * cols);
      } else {
        const std::size_t w = parts[p].dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy(pv.begin() + r * w, pv.begin() + (r + 1) * w,
                    out.values().begin() + r * cols + off);
        }
      }
      off += parts[p].dim(axis);
    }
  }
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  if (tape && any_grad) {
    out.set_requires_grad(true);
    tape->record(out, parts, [parts, out, offsets, axis, rows, cols](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      for (std::size_t p = 0; p < parts.size(); ++p) {
        if (!parts[p].requires_grad()) continue;
        auto& gp = store.at(parts[p].node(), parts[p].size());
        if (axis == 0) {
          const std::size_t base = offsets[p] * cols;
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += (*og)[base + i];
        } else {
          const std::size_t w = parts[p].dim(1);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) {
              gp[r * w + j] += (*og)[r * cols + offsets[p] + j];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(Tape* tape, const Tensor& a) {
  if (a.ndim() != 2) throw DimensionError("transpose requires a 2-D tensor");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({n, m});
  const auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = av[i * n + j];
  }
  if (want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record(out, {a}, [a, out, m, n](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& ga = store.at(a.node(), a.size());
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += (*og)[j * m + i];
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape* tape, const Tensor& table, const std::vector<std::size_t>& rows) {
  if (table.ndim() != 2) throw DimensionError("gather_rows requires a 2-D table");
  const std::size_t r = table.dim(0), c = table.dim(1);
  for (std::size_t idx : rows) {
    if (idx >= r) {
      throw IndexError("row index " + std::to_string(idx) + " out of range [0, " +
                       std::to_string(r) + ")");
    }
  }
  Tensor out = Tensor::zeros({rows.size(), c});
  const auto tv = table.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(tv.begin() + rows[i] * c, tv.begin() + (rows[i] + 1) * c, ov.begin() + i * c);
  }
  if (want_grad(tape, {&table})) {
    out.set_requires_grad(true);
    tape->record(out, {table}, [table, out, rows, c](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& gt = store.at(table.node(), table.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        Real* dst = gt.data() + rows[i] * c;
        const Real* src = og->data() + i * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  Real eps) {
  if (x.ndim() != 2) throw DimensionError("layer_norm requires a 2-D input");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
  }
  Tensor out = Tensor::zeros(x.shape());
  std::vector<Real> xhat(rows * d);
  std::vector<Real> inv_std(rows);
  {
    const auto xv = x.values();
    const auto gv = gain.values();
    const auto bv = bias.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < rows; ++i) {
      const Real* xi = xv.data() + i * d;
      Real mu = 0;
      for (std::size_t j = 0; j < d; ++j) mu += xi[j];
      mu /= Real(d);
      Real var = 0;
      for (std::size_t j = 0; j < d; ++j) {
        Real c = xi[j] - mu;
        var += c * c;
      }
      var /= Real(d);
      Real inv = Real(1) / std::sqrt(var + eps);
      inv_std[i] = inv;
      for (std::size_t j = 0; j < d; ++j) {
        Real h = (xi[j] - mu) * inv;
        xhat[i * d + j] = h;
        ov[i * d + j] = gv[j] * h + bv[j];
      }
    }
  }
  if (want_grad(tape, {&x, &gain, &bias})) {
    out.set_requires_grad(true);
    tape->record(out, {x, gain, bias},
                 [x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std),
                  rows, d](Tape::GradStore& store) {
                   auto* og = store.find(out.node());
                   if (!og) return;
                   const auto gv = gain.values();
                   for (std::size_t i = 0; i < rows; ++i) {
                     const Real* dy = og->data() + i * d;
                     const Real* xh = xhat.data() + i * d;
                     if (x.requires_grad()) {
                       auto& gx = store.at(x.node(), x.size());
                       Real mean_dxhat = 0, mean_dxhat_xhat = 0;
                       for (std::size_t j = 0; j < d; ++j) {
                         Real dxh = dy[j] * gv[j];
                         mean_dxhat += dxh;
                         mean_dxhat_xhat += dxh * xh[j];
                       }
                       mean_dxhat /= Real(d);
                       mean_dxhat_xhat /= Real(d);
                       Real* gxi = gx.data() + i * d;
                       for (std::size_t j = 0; j < d; ++j) {
                         Real dxh = dy[j] * gv[j];
                         gxi[j] += inv_std[i] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                       }
                     }
                     if (gain.requires_grad()) {
                       auto& gg = store.at(gain.node(), d);
                       for (std::size_t j = 0; j < d; ++j) gg[j] += dy[j] * xh[j];
                     }
                     if (bias.requires_grad()) {
                       auto& gb = store.at(bias.node(), d);
                       for (std::size_t j = 0; j < d; ++j) gb[j] += dy[j];
                     }
                   }
                 });
  }
  return out;
}

Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int>& targets) {
  if (logits.ndim() != 2) throw DimensionError("softmax_cross_entropy requires 2-D logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw IndexError("target class " + std::to_string(t) + " out of range [0, " +
                       std::to_string(cols) + ")");
    }
  }
  std::vector<Real> probs(rows * cols);
  Real loss = 0;
  {
    const auto lv = logits.values();
    for (std::size_t i = 0; i < rows; ++i) {
      const Real* li = lv.data() + i * cols;
      Real m = li[0];
      for (std::size_t j = 1; j < cols; ++j) m = std::max(m, li[j]);
      Real z = 0;
      for (std::size_t j = 0; j < cols; ++j) z += std::exp(li[j] - m);
      Real lse = m + std::log(z);
      for (std::size_t j = 0; j < cols; ++j) probs[i * cols + j] = std::exp(li[j] - lse);
      loss += lse - li[targets[i]];
    }
  }
  Tensor out = Tensor::scalar(loss / Real(rows));
  if (want_grad(tape, {&logits})) {
    out.set_requires_grad(true);
    tape->record(out, {logits},
                 [logits, out, probs = std::move(probs), targets, rows, cols](Tape::GradStore& store) {
                   auto* og = store.find(out.node());
                   if (!og) return;
                   const Real g = (*og)[0] / Real(rows);
                   auto& gl = store.at(logits.node(), logits.size());
                   for (std::size_t i = 0; i < rows; ++i) {
                     for (std::size_t j = 0; j < cols; ++j) {
                       Real p = probs[i * cols + j];
                       Real ind = (static_cast<std::size_t>(targets[i]) == j) ? Real(1) : Real(0);
                       gl[i * cols + j] += g * (p - ind);
                     }
                   }
                 });
  }
  return out;
}

Tensor attention_softmax(Tape* tape, const Tensor& scores, const Tensor& mask,
                         std::size_t heads) {
  if (scores.ndim() != 3 || scores.dim(1) != scores.dim(2)) {
    throw DimensionError("attention_softmax requires [B*H × s × s] scores, got " +
                         shape_str(scores.shape()));
  }
  const std::size_t bh = scores.dim(0), s = scores.dim(1);
  if (heads == 0 || bh % heads != 0) {
    throw DimensionError("attention_softmax: batch*heads " + std::to_string(bh) +
                         " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t batch = bh / heads;
  if (mask.shape() != Shape{batch, s}) {
    throw DimensionError("attention_softmax: mask must be [" + std::to_string(batch) + "x" +
                         std::to_string(s) + "], got " + shape_str(mask.shape()));
  }
  Tensor out = Tensor::zeros(scores.shape());
  {
    const auto sv = scores.values();
    const auto mv = mask.values();
    auto ov = out.values();
    for (std::size_t g = 0; g < bh; ++g) {
      const Real* mrow = mv.data() + (g / heads) * s;
      for (std::size_t i = 0; i < s; ++i) {
        const Real* row = sv.data() + (g * s + i) * s;
        Real* orow = ov.data() + (g * s + i) * s;
        Real m = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j < s; ++j) {
          if (mrow[j] > Real(0.5)) m = std::max(m, row[j]);
        }
        Real z = 0;
        for (std::size_t j = 0; j < s; ++j) {
          if (mrow[j] > Real(0.5)) z += std::exp(row[j] - m);
        }
        if (z <= Real(0)) continue;  // fully masked row: all-zero output
        for (std::size_t j = 0; j < s; ++j) {
          orow[j] = mrow[j] > Real(0.5) ? std::exp(row[j] - m) / z : Real(0);
        }
      }
    }
  }
  if (want_grad(tape, {&scores})) {
    out.set_requires_grad(true);
    tape->record(out, {scores, mask}, [scores, out, bh, s](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& gs = store.at(scores.node(), scores.size());
      const auto pv = out.values();
      for (std::size_t r = 0; r < bh * s; ++r) {
        const Real* p = pv.data() + r * s;
        const Real* dp = og->data() + r * s;
        Real inner = 0;
        for (std::size_t j = 0; j < s; ++j) inner += p[j] * dp[j];
        Real* row = gs.data() + r * s;
        for (std::size_t j = 0; j < s; ++j) row[j] += p[j] * (dp[j] - inner);
      }
    });
  }
  return out;
}

Tensor row_max(Tape* tape, const Tensor& x) {
  if (x.ndim() != 2) throw DimensionError("row_max requires a 2-D tensor");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (cols == 0) throw DimensionError("row_max of zero-width tensor");
  Tensor out = Tensor::zeros({rows});
  std::vector<std::size_t> argmax(rows, 0);
  {
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < rows; ++i) {
      const Real* row = xv.data() + i * cols;
      std::size_t best = 0;
      for (std::size_t j = 1; j < cols; ++j) {
        if (row[j] > row[best]) best = j;
      }
      argmax[i] = best;
      ov[i] = row[best];
    }
  }
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, {x}, [x, out, argmax = std::move(argmax), cols](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& gx = store.at(x.node(), x.size());
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[i * cols + argmax[i]] += (*og)[i];
    });
  }
  return out;
}

namespace {

Tensor head_reindex(Tape* tape, const Tensor& x, Shape out_shape,
                    std::vector<std::size_t> src_index, const char* name) {
  Tensor out = Tensor::zeros(std::move(out_shape));
  const auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[src_index[i]];
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, {x}, [x, out, src_index = std::move(src_index)](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& gx = store.at(x.node(), x.size());
      for (std::size_t i = 0; i < src_index.size(); ++i) gx[src_index[i]] += (*og)[i];
    });
  }
  (void)name;
  return out;
}

}  // namespace

Tensor split_heads(Tape* tape, const Tensor& x, std::size_t batch, std::size_t seq,
                   std::size_t heads) {
  if (x.ndim() != 2 || x.dim(0) != batch * seq || heads == 0 || x.dim(1) % heads != 0) {
    throw DimensionError("split_heads: input " + shape_str(x.shape()) +
                         " incompatible with batch=" + std::to_string(batch) +
                         " seq=" + std::to_string(seq) + " heads=" + std::to_string(heads));
  }
  const std::size_t dim = x.dim(1), hd = dim / heads;
  std::vector<std::size_t> src(batch * heads * seq * hd);
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t t = 0; t < seq; ++t) {
        const std::size_t base = (b * seq + t) * dim + h * hd;
        for (std::size_t q = 0; q < hd; ++q) src[o++] = base + q;
      }
    }
  }
  return head_reindex(tape, x, {batch * heads, seq, hd}, std::move(src), "split_heads");
}

Tensor merge_heads(Tape* tape, const Tensor& x, std::size_t batch, std::size_t seq,
                   std::size_t heads) {
  if (x.ndim() != 3 || x.dim(0) != batch * heads || x.dim(1) != seq) {
    throw DimensionError("merge_heads: input " + shape_str(x.shape()) +
                         " incompatible with batch=" + std::to_string(batch) +
                         " seq=" + std::to_string(seq) + " heads=" + std::to_string(heads));
  }
  const std::size_t hd = x.dim(2), dim = heads * hd;
  std::vector<std::size_t> src(batch * seq * dim);
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t base = ((b * heads + h) * seq + t) * hd;
        for (std::size_t q = 0; q < hd; ++q) src[o++] = base + q;
      }
    }
  }
  return head_reindex(tape, x, {batch * seq, dim}, std::move(src), "merge_heads");
}

Tensor dropout(Tape* tape, const Tensor& x, Real rate, Rng& rng) {
  if (rate < Real(0) || rate >= Real(1)) {
    throw HyperparameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (rate == Real(0)) return x;
  const Real keep = Real(1) - rate;
  std::vector<Real> mask(x.size());
  for (auto& m : mask) m = (Real(rng.next_double()) < keep) ? Real(1) / keep : Real(0);
  Tensor out = Tensor::zeros(x.shape());
  const auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * mask[i];
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, {x}, [x, out, mask = std::move(mask)](Tape::GradStore& store) {
      auto* og = store.find(out.node());
      if (!og) return;
      auto& gx = store.at(x.node(), x.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += (*og)[i] * mask[i];
    });
  }
  return out;
}

}  // namespace tcm
