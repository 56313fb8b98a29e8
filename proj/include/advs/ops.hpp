#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "advs/graph.hpp"

// Differentiable operations over a computation record. Every function takes
// and returns handles; the forward value is computed eagerly and the local
// gradient rule is recorded only when some operand requires a gradient.

namespace advs {

namespace detail {

template <typename Scalar>
void require_same_graph(Var<Scalar> a, Var<Scalar> b) {
  if (a.graph != b.graph) throw InvalidArgument("operands belong to different graphs");
}

template <typename Scalar>
void require_rank(Var<Scalar> v, Index rank, const char* op) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                     shape_string(v.shape()));
  }
}

}  // namespace detail

/// m×k by k×n matrix product.
template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b);
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  const Index m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw ShapeError("matmul inner extents disagree: " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()));
  }
  BasicTensor<Scalar> out(Shape{m, n});
  out.matrix(m, n).noalias() = av.matrix(m, k) * bv.matrix(k, n);
  return a.graph->record(std::move(out), {a.id, b.id}, [=](Graph<Scalar>& g, std::size_t self) {
    Eigen::Map<const RowMatrix<Scalar>> dout(g.grad_buffer(self).data(), m, n);
    if (g.requires_grad(a)) {
      Eigen::Map<RowMatrix<Scalar>> da(g.grad_buffer(a.id).data(), m, k);
      da.noalias() += dout * g.value(b).matrix(k, n).transpose();
    }
    if (g.requires_grad(b)) {
      Eigen::Map<RowMatrix<Scalar>> db(g.grad_buffer(b.id).data(), k, n);
      db.noalias() += g.value(a).matrix(m, k).transpose() * dout;
    }
  });
}

/// Elementwise sum of two same-shaped tensors.
template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  BasicTensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  return a.graph->record(std::move(out), {a.id, b.id}, [=](Graph<Scalar>& g, std::size_t self) {
    const auto& dout = g.grad_buffer(self);
    if (g.requires_grad(a)) g.grad_buffer(a.id) += dout;
    if (g.requires_grad(b)) g.grad_buffer(b.id) += dout;
  });
}

/// Elementwise (Hadamard) product of two same-shaped tensors.
template <typename Scalar>
Var<Scalar> multiply(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError("multiply shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  BasicTensor<Scalar> out(a.shape(), a.value().data() * b.value().data());
  return a.graph->record(std::move(out), {a.id, b.id}, [=](Graph<Scalar>& g, std::size_t self) {
    const auto& dout = g.grad_buffer(self);
    if (g.requires_grad(a)) g.grad_buffer(a.id) += dout * g.value(b).data();
    if (g.requires_grad(b)) g.grad_buffer(b.id) += dout * g.value(a).data();
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar factor) {
  BasicTensor<Scalar> out(a.shape(), a.value().data() * factor);
  return a.graph->record(std::move(out), {a.id}, [=](Graph<Scalar>& g, std::size_t self) {
    g.grad_buffer(a.id) += factor * g.grad_buffer(self);
  });
}

/// Sum of all elements, as a scalar of shape [1].
/// factor·a + offset, elementwise.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> a, Scalar factor, Scalar offset) {
  BasicTensor<Scalar> out(a.shape(), a.value().data() * factor + offset);
  return a.graph->record(std::move(out), {a.id}, [=](Graph<Scalar>& g, std::size_t self) {
    g.grad_buffer(a.id) += factor * g.grad_buffer(self);
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  BasicTensor<Scalar> out(Shape{1});
  out[0] = a.value().data().sum();
  return a.graph->record(std::move(out), {a.id}, [=](Graph<Scalar>& g, std::size_t self) {
    g.grad_buffer(a.id) += g.grad_buffer(self)[0];
  });
}

/// Arithmetic mean of scalar nodes.
template <typename Scalar>
Var<Scalar> mean(const std::vector<Var<Scalar>>& scalars) {
  if (scalars.empty()) throw InvalidArgument("mean of zero terms");
  std::vector<std::size_t> ids;
  BasicTensor<Scalar> out(Shape{1});
  for (const auto& s : scalars) {
    detail::require_same_graph(s, scalars.front());
    if (s.value().size() != 1) throw ShapeError("mean expects scalar terms, got " + shape_string(s.shape()));
    out[0] += s.value()[0];
    ids.push_back(s.id);
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(scalars.size());
  out[0] *= inv;
  return scalars.front().graph->record(std::move(out), ids, [ids, inv](Graph<Scalar>& g, std::size_t self) {
    const Scalar d = g.grad_buffer(self)[0] * inv;
    for (std::size_t id : ids) {
      if (g.requires_grad(Var<Scalar>{&g, id})) g.grad_buffer(id)[0] += d;
    }
  });
}

/// Element `index` of a tensor, as a scalar.
template <typename Scalar>
Var<Scalar> select(Var<Scalar> a, Index index) {
  if (index < 0 || index >= a.value().size()) {
    throw ShapeError("select index " + std::to_string(index) + " outside " + shape_string(a.shape()));
  }
  BasicTensor<Scalar> out(Shape{1});
  out[0] = a.value()[index];
  return a.graph->record(std::move(out), {a.id}, [=](Graph<Scalar>& g, std::size_t self) {
    g.grad_buffer(a.id)[index] += g.grad_buffer(self)[0];
  });
}

/// max(x, 0); the subgradient at exactly zero is zero.
template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  BasicTensor<Scalar> out(a.shape(), a.value().data().max(Scalar(0)));
  return a.graph->record(std::move(out), {a.id}, [=](Graph<Scalar>& g, std::size_t self) {
    const auto& x = g.value(a).data();
    g.grad_buffer(a.id) += (x > Scalar(0)).select(g.grad_buffer(self), Scalar(0));
  });
}

/// Rank-1 view of any tensor.
template <typename Scalar>
Var<Scalar> flatten(Var<Scalar> a) {
  BasicTensor<Scalar> out(Shape{a.value().size()}, a.value().data());
  return a.graph->record(std::move(out), {a.id}, [=](Graph<Scalar>& g, std::size_t self) {
    g.grad_buffer(a.id) += g.grad_buffer(self);
  });
}

/// Adds one bias value per leading-axis slice (per channel for C×H×W, per element for vectors).
template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> x, Var<Scalar> bias) {
  detail::require_same_graph(x, bias);
  const auto& xv = x.value();
  const Index channels = xv.dim(0);
  if (bias.value().size() != channels) {
    throw ShapeError("bias of " + std::to_string(bias.value().size()) + " values for leading extent " +
                     std::to_string(channels));
  }
  const Index inner = xv.size() / channels;
  BasicTensor<Scalar> out(xv.shape());
  out.matrix(channels, inner) =
      xv.matrix(channels, inner).colwise() + bias.value().data().matrix();
  return x.graph->record(std::move(out), {x.id, bias.id}, [=](Graph<Scalar>& g, std::size_t self) {
    Eigen::Map<const RowMatrix<Scalar>> dout(g.grad_buffer(self).data(), channels, inner);
    if (g.requires_grad(x)) g.grad_buffer(x.id) += g.grad_buffer(self);
    if (g.requires_grad(bias)) g.grad_buffer(bias.id) += dout.rowwise().sum().array();
  });
}

/// Fully connected layer: x (n) · W (n×m) + b (m).
template <typename Scalar>
Var<Scalar> dense(Var<Scalar> x, Var<Scalar> weights, Var<Scalar> bias) {
  detail::require_same_graph(x, weights);
  detail::require_same_graph(x, bias);
  detail::require_rank(x, 1, "dense input");
  detail::require_rank(weights, 2, "dense weights");
  const Index n = x.value().size();
  const Index m = weights.value().dim(1);
  if (weights.value().dim(0) != n || bias.value().size() != m) {
    throw ShapeError("dense expects W " + std::to_string(n) + "x" + std::to_string(m) + " and b " +
                     std::to_string(m) + ", got W " + shape_string(weights.shape()) + " and b " +
                     shape_string(bias.shape()));
  }
  BasicTensor<Scalar> out(Shape{m});
  out.matrix(1, m).noalias() = x.value().matrix(1, n) * weights.value().matrix(n, m);
  out.data() += bias.value().data();
  return x.graph->record(
      std::move(out), {x.id, weights.id, bias.id}, [=](Graph<Scalar>& g, std::size_t self) {
        Eigen::Map<const RowMatrix<Scalar>> dout(g.grad_buffer(self).data(), 1, m);
        if (g.requires_grad(x)) {
          Eigen::Map<RowMatrix<Scalar>> dx(g.grad_buffer(x.id).data(), 1, n);
          dx.noalias() += dout * g.value(weights).matrix(n, m).transpose();
        }
        if (g.requires_grad(weights)) {
          Eigen::Map<RowMatrix<Scalar>> dw(g.grad_buffer(weights.id).data(), n, m);
          dw.noalias() += g.value(x).matrix(n, 1) * dout;
        }
        if (g.requires_grad(bias)) g.grad_buffer(bias.id) += g.grad_buffer(self);
      });
}

/// Valid (unpadded) cross-correlation of a C_in×H×W input with C_out×C_in×k×k kernels.
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> input, Var<Scalar> kernels, Index stride = 1) {
  detail::require_same_graph(input, kernels);
  detail::require_rank(input, 3, "conv2d input");
  detail::require_rank(kernels, 4, "conv2d kernels");
  if (stride < 1) throw InvalidArgument("conv2d stride must be positive");
  const auto& in = input.value();
  const auto& kv = kernels.value();
  const Index c_in = in.dim(0), h = in.dim(1), w = in.dim(2);
  const Index c_out = kv.dim(0), k = kv.dim(2);
  if (kv.dim(1) != c_in || kv.dim(3) != k) {
    throw ShapeError("conv2d kernels " + shape_string(kv.shape()) + " do not fit input " +
                     shape_string(in.shape()));
  }
  if (k > h || k > w) {
    throw ShapeError("conv2d kernel " + std::to_string(k) + "x" + std::to_string(k) +
                     " larger than input " + shape_string(in.shape()));
  }
  const Index oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  const Index rows = c_in * k * k, cols = oh * ow;

  auto patches = std::make_shared<RowMatrix<Scalar>>(rows, cols);
  for (Index c = 0; c < c_in; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* dst = patches->row((c * k + ky) * k + kx).data();
        for (Index oy = 0; oy < oh; ++oy) {
          const Scalar* src = &in.data()[(c * h + oy * stride + ky) * w + kx];
          for (Index ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[ox * stride];
        }
      }
    }
  }
  BasicTensor<Scalar> out(Shape{c_out, oh, ow});
  out.matrix(c_out, cols).noalias() = kv.matrix(c_out, rows) * (*patches);

  return input.graph->record(
      std::move(out), {input.id, kernels.id}, [=](Graph<Scalar>& g, std::size_t self) {
        Eigen::Map<const RowMatrix<Scalar>> dout(g.grad_buffer(self).data(), c_out, cols);
        if (g.requires_grad(kernels)) {
          Eigen::Map<RowMatrix<Scalar>> dk(g.grad_buffer(kernels.id).data(), c_out, rows);
          dk.noalias() += dout * patches->transpose();
        }
        if (g.requires_grad(input)) {
          RowMatrix<Scalar> dpatches = g.value(kernels).matrix(c_out, rows).transpose() * dout;
          auto& din = g.grad_buffer(input.id);
          for (Index c = 0; c < c_in; ++c) {
            for (Index ky = 0; ky < k; ++ky) {
              for (Index kx = 0; kx < k; ++kx) {
                const Scalar* src = dpatches.row((c * k + ky) * k + kx).data();
                for (Index oy = 0; oy < oh; ++oy) {
                  Scalar* dst = &din[(c * h + oy * stride + ky) * w + kx];
                  for (Index ox = 0; ox < ow; ++ox) dst[ox * stride] += src[oy * ow + ox];
                }
              }
            }
          }
        }
      });
}

/// 2×2 max pooling with stride 2 over C×H×W; ties route to the first
/// maximal element in row-major order.
template <typename Scalar>
Var<Scalar> maxpool2(Var<Scalar> input) {
  detail::require_rank(input, 3, "maxpool2");
  const auto& in = input.value();
  const Index c_n = in.dim(0), h = in.dim(1), w = in.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2 requires even spatial extents, got " + shape_string(in.shape()));
  }
  const Index oh = h / 2, ow = w / 2;
  BasicTensor<Scalar> out(Shape{c_n, oh, ow});
  auto winners = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.size()));
  Index o = 0;
  for (Index c = 0; c < c_n; ++c) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x, ++o) {
        const Index base = (c * h + 2 * y) * w + 2 * x;
        const Index candidates[4] = {base, base + 1, base + w, base + w + 1};
        Index best = candidates[0];
        for (Index cand : candidates) {
          if (in.data()[cand] > in.data()[best]) best = cand;
        }
        out.data()[o] = in.data()[best];
        (*winners)[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return input.graph->record(std::move(out), {input.id}, [=](Graph<Scalar>& g, std::size_t self) {
    const auto& dout = g.grad_buffer(self);
    auto& din = g.grad_buffer(input.id);
    for (Index i = 0; i < dout.size(); ++i) din[(*winners)[static_cast<std::size_t>(i)]] += dout[i];
  });
}

/// Numerically stable softmax of a vector.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::ArrayBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> e = (logits - logits.maxCoeff()).exp();
  return e / e.sum();
}

/// −log softmax(logits)[label]; gradient with respect to logits is softmax − onehot(label).
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, Index label) {
  detail::require_rank(logits, 1, "softmax_cross_entropy");
  const auto& z = logits.value().data();
  const Index classes = z.size();
  if (label < 0 || label >= classes) {
    throw InvalidArgument("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  }
  const Scalar top = z.maxCoeff();
  const Scalar log_norm = std::log((z - top).exp().sum()) + top;
  BasicTensor<Scalar> out(Shape{1});
  out[0] = std::max(Scalar(0), log_norm - z[label]);
  return logits.graph->record(std::move(out), {logits.id}, [=](Graph<Scalar>& g, std::size_t self) {
    auto p = softmax(g.value(logits).data());
    p[label] -= Scalar(1);
    g.grad_buffer(logits.id) += g.grad_buffer(self)[0] * p;
  });
}

}  // namespace advs
