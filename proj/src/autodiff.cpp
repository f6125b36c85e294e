#include "mtft/autodiff.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mtft/params.hpp"

namespace mtft {

namespace detail {

Tensor& Node::ensure_grad() {
  if (grad.empty()) grad = Tensor::zeros(value.shape());
  return grad;
}

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Var wrap_node(NodePtr n) { return Var(std::move(n)); }
const NodePtr& node_ptr(const Var& v) { return v.node_; }

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

NodePtr fresh_node(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

/// Builds an op node. Parent links and the backprop closure are only kept
/// when some input needs gradients, so pure inference passes don't retain
/// the graph.
Var op_node(Tensor value, std::vector<NodePtr> inputs,
            std::function<void(Node&)> backprop) {
  NodePtr n = fresh_node(std::move(value));
  for (const NodePtr& in : inputs) {
    if (in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->parents = std::move(inputs);
    n->backprop = std::move(backprop);
  }
  return wrap_node(std::move(n));
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

/// acc += opA(a) x opB(b), where opX optionally transposes the trailing two
/// dims, applied over matching leading batch dims. Used for matmul backward.
void matmul_acc(const Tensor& a, bool ta, const Tensor& b, bool tb,
                Tensor& acc) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  std::size_t ra = sa.size();
  std::size_t am = sa[ra - 2], an = sa[ra - 1];
  std::size_t bm = sb[sb.size() - 2], bn = sb[sb.size() - 1];
  std::size_t m = ta ? an : am;
  std::size_t k = ta ? am : an;
  std::size_t n = tb ? bm : bn;
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < ra; ++i) batch *= sa[i];
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = acc.data();
  for (std::size_t t = 0; t < batch; ++t) {
    const double* ba = pa + t * am * an;
    const double* bb = pb + t * bm * bn;
    double* bc = pc + t * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t q = 0; q < k; ++q) {
        double av = ta ? ba[q * an + i] : ba[i * an + q];
        if (av == 0.0) continue;
        double* crow = bc + i * n;
        if (tb) {
          for (std::size_t j = 0; j < n; ++j) crow[j] += av * bb[j * bn + q];
        } else {
          const double* brow = bb + q * bn;
          for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

void require_rank2(const Var& v, const char* op) {
  if (v.value().rank() != 2)
    fail(std::string(op) + ": expected rank 2, got shape " +
         v.value().shape_str());
}

}  // namespace

Var constant(Tensor value) { return wrap_node(fresh_node(std::move(value))); }

Var leaf(Tensor value) {
  NodePtr n = fresh_node(std::move(value));
  n->requires_grad = true;
  return wrap_node(std::move(n));
}

Var param_leaf(Parameter& p) {
  NodePtr n = fresh_node(p.value);
  n->requires_grad = true;
  n->param = &p;
  return wrap_node(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
  Tensor out = tensor_matmul(a.value(), b.value());
  Node* pa = node_ptr(a).get();
  Node* pb = node_ptr(b).get();
  return op_node(std::move(out), {node_ptr(a), node_ptr(b)}, [pa, pb](Node& self) {
    if (pa->requires_grad)
      matmul_acc(self.grad, false, pb->value, true, pa->ensure_grad());
    if (pb->requires_grad)
      matmul_acc(pa->value, true, self.grad, false, pb->ensure_grad());
  });
}

Var transpose(const Var& a) {
  Tensor out = tensor_transpose(a.value());
  Node* pa = node_ptr(a).get();
  return op_node(std::move(out), {node_ptr(a)}, [pa](Node& self) {
    if (!pa->requires_grad) return;
    add_into(pa->ensure_grad(), tensor_transpose(self.grad));
  });
}

Var add(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value()))
    fail("add: shape mismatch " + a.value().shape_str() + " vs " +
         b.value().shape_str());
  Tensor out = a.value();
  add_into(out, b.value());
  Node* pa = node_ptr(a).get();
  Node* pb = node_ptr(b).get();
  return op_node(std::move(out), {node_ptr(a), node_ptr(b)}, [pa, pb](Node& self) {
    if (pa->requires_grad) add_into(pa->ensure_grad(), self.grad);
    if (pb->requires_grad) add_into(pb->ensure_grad(), self.grad);
  });
}

Var add_rowwise(const Var& a, const Var& bias) {
  require_rank2(a, "add_rowwise");
  std::size_t cols = a.dim(1);
  if (bias.value().rank() != 1 || bias.value().size() != cols)
    fail("add_rowwise: bias shape " + bias.value().shape_str() +
         " does not match columns of " + a.value().shape_str());
  Tensor out = a.value();
  std::size_t rows = a.dim(0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) += bias.value()[j];
  Node* pa = node_ptr(a).get();
  Node* pb = node_ptr(bias).get();
  return op_node(std::move(out), {node_ptr(a), node_ptr(bias)},
                 [pa, pb, rows, cols](Node& self) {
    if (pa->requires_grad) add_into(pa->ensure_grad(), self.grad);
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gb[j] += self.grad[i * cols + j];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value()))
    fail("sub: shape mismatch " + a.value().shape_str() + " vs " +
         b.value().shape_str());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  Node* pa = node_ptr(a).get();
  Node* pb = node_ptr(b).get();
  return op_node(std::move(out), {node_ptr(a), node_ptr(b)}, [pa, pb](Node& self) {
    if (pa->requires_grad) add_into(pa->ensure_grad(), self.grad);
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value()))
    fail("mul: shape mismatch " + a.value().shape_str() + " vs " +
         b.value().shape_str());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  Node* pa = node_ptr(a).get();
  Node* pb = node_ptr(b).get();
  return op_node(std::move(out), {node_ptr(a), node_ptr(b)}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      Tensor& ga = pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        ga[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        gb[i] += self.grad[i] * pa->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  Node* pa = node_ptr(a).get();
  return op_node(std::move(out), {node_ptr(a)}, [pa, s](Node& self) {
    if (!pa->requires_grad) return;
    Tensor& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += s * self.grad[i];
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  Node* pa = node_ptr(a).get();
  return op_node(std::move(out), {node_ptr(a)}, [pa](Node& self) {
    if (!pa->requires_grad) return;
    Tensor& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa->value[i] > 0.0) ga[i] += self.grad[i];
  });
}

Var tanh_op(const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  Node* pa = node_ptr(a).get();
  return op_node(std::move(out), {node_ptr(a)}, [pa](Node& self) {
    if (!pa->requires_grad) return;
    Tensor& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.value[i];
      ga[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  Node* pa = node_ptr(a).get();
  return op_node(std::move(out), {node_ptr(a)}, [pa](Node& self) {
    if (!pa->requires_grad) return;
    Tensor& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.value[i];
      ga[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var square(const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
  Node* pa = node_ptr(a).get();
  return op_node(std::move(out), {node_ptr(a)}, [pa](Node& self) {
    if (!pa->requires_grad) return;
    Tensor& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      ga[i] += self.grad[i] * 2.0 * pa->value[i];
  });
}

namespace {

Tensor softmax_forward(const Tensor& logits, const Tensor* mask) {
  if (logits.rank() < 1) fail("softmax: empty input");
  std::size_t cols = logits.dim(logits.rank() - 1);
  std::size_t rows = logits.size() / cols;
  bool mask_is_vector = false;
  if (mask) {
    if (mask->same_shape(logits)) {
      mask_is_vector = false;
    } else if (mask->rank() == 1 && mask->size() == cols) {
      mask_is_vector = true;
    } else {
      fail("masked_softmax: mask shape " + mask->shape_str() +
           " does not match logits " + logits.shape_str());
    }
    for (std::size_t i = 0; i < mask->size(); ++i)
      if ((*mask)[i] != 0.0 && (*mask)[i] != 1.0)
        fail("masked_softmax: mask entries must be 0 or 1");
  }
  Tensor out = Tensor::zeros(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = logits.data() + r * cols;
    double* y = out.data() + r * cols;
    auto keep = [&](std::size_t j) {
      if (!mask) return true;
      return (mask_is_vector ? (*mask)[j] : (*mask)[r * cols + j]) == 1.0;
    };
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!keep(j)) continue;
      any = true;
      if (x[j] > mx) mx = x[j];
    }
    if (!any)
      fail("degenerate attention row: row " + std::to_string(r) +
           " is fully masked");
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!keep(j)) continue;
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j)
      if (keep(j)) y[j] /= sum;
  }
  return out;
}

Var softmax_node(const Var& logits, const Tensor* mask) {
  Tensor out = softmax_forward(logits.value(), mask);
  Node* pl = node_ptr(logits).get();
  // Masked entries of the output are exactly zero, so the standard softmax
  // backward leaves their logits' gradients untouched; no mask needed here.
  return op_node(std::move(out), {node_ptr(logits)}, [pl](Node& self) {
    if (!pl->requires_grad) return;
    const Tensor& y = self.value;
    const Tensor& g = self.grad;
    Tensor& gx = pl->ensure_grad();
    std::size_t cols = y.dim(y.rank() - 1);
    std::size_t rows = y.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j)
        dot += g[r * cols + j] * y[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        gx[r * cols + j] += y[r * cols + j] * (g[r * cols + j] - dot);
    }
  });
}

}  // namespace

Var masked_softmax(const Var& logits, const Tensor& mask) {
  return softmax_node(logits, &mask);
}

Var softmax(const Var& logits) { return softmax_node(logits, nullptr); }

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() < 1) fail("layer_norm: empty input");
  std::size_t cols = xv.dim(xv.rank() - 1);
  std::size_t rows = xv.size() / cols;
  if (gain.value().rank() != 1 || gain.value().size() != cols ||
      bias.value().rank() != 1 || bias.value().size() != cols)
    fail("layer_norm: gain/bias must be vectors of size " +
         std::to_string(cols));
  Tensor xhat = Tensor::zeros(xv.shape());
  std::vector<double> inv(rows);
  Tensor out = Tensor::zeros(xv.shape());
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double iv = 1.0 / std::sqrt(var + eps);
    inv[r] = iv;
    for (std::size_t j = 0; j < cols; ++j) {
      double xh = (xr[j] - mean) * iv;
      xhat[r * cols + j] = xh;
      out[r * cols + j] = gv[j] * xh + bv[j];
    }
  }
  Node* px = node_ptr(x).get();
  Node* pg = node_ptr(gain).get();
  Node* pb = node_ptr(bias).get();
  return op_node(
      std::move(out), {node_ptr(x), node_ptr(gain), node_ptr(bias)},
      [px, pg, pb, xhat = std::move(xhat), inv = std::move(inv), rows,
       cols](Node& self) {
        const Tensor& g = self.grad;
        if (pg->requires_grad) {
          Tensor& gg = pg->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < cols; ++j)
              gg[j] += g[r * cols + j] * xhat[r * cols + j];
        }
        if (pb->requires_grad) {
          Tensor& gb = pb->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < cols; ++j) gb[j] += g[r * cols + j];
        }
        if (px->requires_grad) {
          const Tensor& gv = pg->value;
          Tensor& gx = px->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            double mh = 0.0, mhx = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
              double h = g[r * cols + j] * gv[j];
              mh += h;
              mhx += h * xhat[r * cols + j];
            }
            mh /= static_cast<double>(cols);
            mhx /= static_cast<double>(cols);
            for (std::size_t j = 0; j < cols; ++j) {
              double h = g[r * cols + j] * gv[j];
              gx[r * cols + j] +=
                  inv[r] * (h - mh - xhat[r * cols + j] * mhx);
            }
          }
        }
      });
}

Var concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) fail("concat_rows: no inputs");
  std::size_t cols = 0, rows = 0;
  for (const Var& v : xs) {
    require_rank2(v, "concat_rows");
    if (cols == 0) cols = v.dim(1);
    if (v.dim(1) != cols)
      fail("concat_rows: column mismatch " + v.value().shape_str());
    rows += v.dim(0);
  }
  Tensor out({rows, cols});
  std::vector<NodePtr> inputs;
  std::vector<Node*> raw;
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const Var& v : xs) {
    offsets.push_back(at);
    std::size_t n = v.value().size();
    for (std::size_t i = 0; i < n; ++i) out[at * cols + i] = v.value()[i];
    at += v.dim(0);
    inputs.push_back(node_ptr(v));
    raw.push_back(node_ptr(v).get());
  }
  return op_node(std::move(out), std::move(inputs),
                 [raw = std::move(raw), offsets = std::move(offsets),
                  cols](Node& self) {
    for (std::size_t p = 0; p < raw.size(); ++p) {
      if (!raw[p]->requires_grad) continue;
      Tensor& gp = raw[p]->ensure_grad();
      std::size_t base = offsets[p] * cols;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[base + i];
    }
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) fail("concat_cols: no inputs");
  std::size_t rows = 0, cols = 0;
  for (const Var& v : xs) {
    require_rank2(v, "concat_cols");
    if (rows == 0) rows = v.dim(0);
    if (v.dim(0) != rows)
      fail("concat_cols: row mismatch " + v.value().shape_str());
    cols += v.dim(1);
  }
  Tensor out({rows, cols});
  std::vector<NodePtr> inputs;
  std::vector<Node*> raw;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> widths;
  std::size_t at = 0;
  for (const Var& v : xs) {
    std::size_t w = v.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < w; ++j) out(i, at + j) = v.value()(i, j);
    offsets.push_back(at);
    widths.push_back(w);
    at += w;
    inputs.push_back(node_ptr(v));
    raw.push_back(node_ptr(v).get());
  }
  return op_node(std::move(out), std::move(inputs),
                 [raw = std::move(raw), offsets = std::move(offsets),
                  widths = std::move(widths), rows, cols](Node& self) {
    for (std::size_t p = 0; p < raw.size(); ++p) {
      if (!raw[p]->requires_grad) continue;
      Tensor& gp = raw[p]->ensure_grad();
      std::size_t w = widths[p];
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < w; ++j)
          gp[i * w + j] += self.grad[i * cols + offsets[p] + j];
    }
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_rows");
  if (begin + count > x.dim(0))
    fail("slice_rows: range [" + std::to_string(begin) + "," +
         std::to_string(begin + count) + ") exceeds rows of " +
         x.value().shape_str());
  std::size_t cols = x.dim(1);
  Tensor out({count, cols});
  for (std::size_t i = 0; i < count * cols; ++i)
    out[i] = x.value()[begin * cols + i];
  Node* px = node_ptr(x).get();
  return op_node(std::move(out), {node_ptr(x)}, [px, begin, cols](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      gx[begin * cols + i] += self.grad[i];
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_cols");
  if (begin + count > x.dim(1))
    fail("slice_cols: range [" + std::to_string(begin) + "," +
         std::to_string(begin + count) + ") exceeds columns of " +
         x.value().shape_str());
  std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out({rows, count});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, begin + j);
  Node* px = node_ptr(x).get();
  return op_node(std::move(out), {node_ptr(x)},
                 [px, begin, rows, cols, count](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < count; ++j)
        gx[i * cols + begin + j] += self.grad[i * count + j];
  });
}

Var mean_rows(const Var& x) {
  require_rank2(x, "mean_rows");
  std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out = Tensor::zeros({1, cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j] += x.value()(i, j);
  for (std::size_t j = 0; j < cols; ++j) out[j] /= static_cast<double>(rows);
  Node* px = node_ptr(x).get();
  return op_node(std::move(out), {node_ptr(x)}, [px, rows, cols](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    double r = static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += self.grad[j] / r;
  });
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.value().size(); ++i) s += x.value()[i];
  Node* px = node_ptr(x).get();
  return op_node(Tensor::vector({s}), {node_ptr(x)}, [px](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[0];
  });
}

Var cumsum_rows(const Var& x) {
  require_rank2(x, "cumsum_rows");
  std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out = x.value();
  for (std::size_t i = 1; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) += out(i - 1, j);
  Node* px = node_ptr(x).get();
  return op_node(std::move(out), {node_ptr(x)}, [px, rows, cols](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = rows; i-- > 0;) {
        acc += self.grad[i * cols + j];
        gx[i * cols + j] += acc;
      }
    }
  });
}

Var reshape(const Var& x, std::vector<std::size_t> shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  Node* px = node_ptr(x).get();
  return op_node(std::move(out), {node_ptr(x)}, [px](Node& self) {
    if (!px->requires_grad) return;
    add_into(px->ensure_grad(), self.grad);
  });
}

void backward(const Var& root, std::vector<Tensor>* sink) {
  if (!root.valid()) fail("backward: uninitialized var");
  if (root.value().size() != 1)
    fail("backward: root must be scalar, got shape " +
         root.value().shape_str());
  const NodePtr& r = node_ptr(root);
  if (!r->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(r.get(), 0);
  seen.insert(r.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      Node* p = top.first->parents[top.second].get();
      ++top.second;
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(top.first);
      stack.pop_back();
    }
  }

  r->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }

  for (Node* n : order) {
    if (!n->param || n->grad.empty()) continue;
    Parameter& p = *n->param;
    if (sink) {
      if (p.index >= sink->size()) sink->resize(p.index + 1);
      Tensor& slot = (*sink)[p.index];
      if (slot.empty()) slot = Tensor::zeros(p.value.shape());
      add_into(slot, n->grad);
    } else {
      if (p.grad.empty()) p.grad = Tensor::zeros(p.value.shape());
      add_into(p.grad, n->grad);
    }
  }
}

}  // namespace mtft
