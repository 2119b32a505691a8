#include "pcdc/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/nn/prob.hpp"

namespace pcdc::nn {

namespace {

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + detail);
}

std::string shape(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), op, shape(a) + " vs " + shape(b));
}

}  // namespace

Var Graph::push(Tensor value, Backward back) {
  Node n;
  n.value = std::move(value);
  if (record_) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad_ref(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && val(id).size() > 0) n.grad = Tensor(val(id).rows(), val(id).cols());
  return n.grad;
}

Var Graph::constant(Tensor t) { return push(std::move(t), nullptr); }

Var Graph::view(const Tensor& t) {
  Node n;
  n.ext = &t;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(const Param& p) {
  Node n;
  n.ext = &p.value;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::detach(Var x) { return constant(value(x)); }

const Tensor& Graph::value(Var v) const {
  if (v.id >= nodes_.size()) fail(ErrorCode::kInvalidArgument, "graph: invalid variable");
  return val(v.id);
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(val(v.id).rows(), val(v.id).cols());
  return n.grad;
}

void Graph::backward(Var root) { backward(root, Tensor(1, 1, 1.0)); }

void Graph::backward(Var root, const Tensor& seed) {
  if (!record_) fail(ErrorCode::kInvalidArgument, "graph: backward on a non-recording graph");
  require_same(value(root), seed, "backward");
  for (Node& n : nodes_) n.grad = Tensor();
  grad_ref(root.id) = seed;
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.back) continue;
    n.back(*this, id);
  }
}

Tensor Graph::param_grad(const Param& p) const {
  Tensor out(p.value.rows(), p.value.cols());
  for (const Node& n : nodes_) {
    if (n.param != &p || n.grad.empty()) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += n.grad[i];
  }
  return out;
}

void Graph::accumulate(GradMap& grads) const {
  for (const Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    Tensor& g = grads[n.param];
    if (g.empty()) g = Tensor(n.grad.rows(), n.grad.cols());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

Var Graph::linear(Var xv, Var wv, Var bv) {
  const Tensor& x = value(xv);
  const Tensor& w = value(wv);
  const Tensor& b = value(bv);
  require(x.cols() == w.cols(), "linear",
          "input " + shape(x) + " vs weight " + shape(w));
  require(b.rows() == 1 && b.cols() == w.rows(), "linear", "bias " + shape(b));
  const std::size_t n = x.rows(), in = w.cols(), out = w.rows();
  Tensor y(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = &x.flat()[i * in];
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = &w.flat()[o * in];
      double acc = b[o];
      for (std::size_t k = 0; k < in; ++k) acc += xi[k] * wo[k];
      y(i, o) = acc;
    }
  }
  return push(std::move(y), [xv, wv, bv, n, in, out](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    const Tensor& x = g.val(xv.id);
    const Tensor& w = g.val(wv.id);
    Tensor& dx = g.grad_ref(xv.id);
    Tensor& dw = g.grad_ref(wv.id);
    Tensor& db = g.grad_ref(bv.id);
    for (std::size_t i = 0; i < n; ++i) {
      double* dxi = &dx.flat()[i * in];
      const double* xi = &x.flat()[i * in];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dy(i, o);
        if (d == 0.0) continue;
        const double* wo = &w.flat()[o * in];
        double* dwo = &dw.flat()[o * in];
        for (std::size_t k = 0; k < in; ++k) {
          dxi[k] += d * wo[k];
          dwo[k] += d * xi[k];
        }
        db[o] += d;
      }
    }
  });
}

Var Graph::add(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  require_same(a, b, "add");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return push(std::move(y), [av, bv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& da = g.grad_ref(av.id);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    Tensor& db = g.grad_ref(bv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
  });
}

Var Graph::add_row(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row", shape(a) + " + " + shape(b));
  Tensor y = a;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[c];
  }
  return push(std::move(y), [av, bv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& da = g.grad_ref(av.id);
    Tensor& db = g.grad_ref(bv.id);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      for (std::size_t c = 0; c < dy.cols(); ++c) {
        da(r, c) += dy(r, c);
        db[c] += dy(r, c);
      }
    }
  });
}

Var Graph::sub(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  require_same(a, b, "sub");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b[i];
  return push(std::move(y), [av, bv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& da = g.grad_ref(av.id);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    Tensor& db = g.grad_ref(bv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
  });
}

Var Graph::mul(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  require_same(a, b, "mul");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b[i];
  return push(std::move(y), [av, bv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    const Tensor& a = g.val(av.id);
    const Tensor& b = g.val(bv.id);
    Tensor& da = g.grad_ref(av.id);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b[i];
    Tensor& db = g.grad_ref(bv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a[i];
  });
}

Var Graph::mul_col(Var xv, Var sv) {
  const Tensor& x = value(xv);
  const Tensor& s = value(sv);
  require(s.cols() == 1 && s.rows() == x.rows(), "mul_col", shape(x) + " * " + shape(s));
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) *= s[r];
  }
  return push(std::move(y), [xv, sv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    const Tensor& x = g.val(xv.id);
    const Tensor& s = g.val(sv.id);
    Tensor& dx = g.grad_ref(xv.id);
    Tensor& ds = g.grad_ref(sv.id);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < dy.cols(); ++c) {
        dx(r, c) += dy(r, c) * s[r];
        acc += dy(r, c) * x(r, c);
      }
      ds[r] += acc;
    }
  });
}

Var Graph::scale(Var xv, double c) {
  Tensor y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c;
  return push(std::move(y), [xv, c](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += c * dy[i];
  });
}

Var Graph::one_minus(Var xv) {
  Tensor y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 - y[i];
  return push(std::move(y), [xv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] -= dy[i];
  });
}

Var Graph::relu(Var xv) {
  Tensor y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  return push(std::move(y), [xv](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    const Tensor& x = g.val(xv.id);
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (x[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Var Graph::sigmoid(Var xv) {
  Tensor y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = stable_sigmoid(y[i]);
  return push(std::move(y), [xv](Graph& g, std::uint32_t self) {
    const Node& me = g.nodes_[self];
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < me.grad.size(); ++i) {
      const double s = me.value[i];
      dx[i] += me.grad[i] * s * (1.0 - s);
    }
  });
}

Var Graph::exp(Var xv) {
  Tensor y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(y[i]);
  return push(std::move(y), [xv](Graph& g, std::uint32_t self) {
    const Node& me = g.nodes_[self];
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < me.grad.size(); ++i) dx[i] += me.grad[i] * me.value[i];
  });
}

Var Graph::clamp_min(Var xv, double lo) {
  Tensor y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(y[i], lo);
  return push(std::move(y), [xv, lo](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    const Tensor& x = g.val(xv.id);
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (x[i] > lo) dx[i] += dy[i];
    }
  });
}

Var Graph::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (Var p : parts) {
    require(value(p).rows() == rows, "concat_cols", "row count mismatch");
    offsets.push_back(total);
    total += value(p).cols();
  }
  Tensor y(rows, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& p = value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(p.row(r).begin(), p.row(r).end(), y.row(r).begin() + static_cast<std::ptrdiff_t>(offsets[k]));
    }
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return push(std::move(y), [ins, offsets](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    for (std::size_t k = 0; k < ins.size(); ++k) {
      Tensor& dp = g.grad_ref(ins[k].id);
      for (std::size_t r = 0; r < dp.rows(); ++r) {
        for (std::size_t c = 0; c < dp.cols(); ++c) dp(r, c) += dy(r, offsets[k] + c);
      }
    }
  });
}

Var Graph::slice_cols(Var xv, std::size_t begin, std::size_t count) {
  const Tensor& x = value(xv);
  require(begin + count <= x.cols(), "slice_cols", "range exceeds " + shape(x));
  Tensor y(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) y(r, c) = x(r, begin + c);
  }
  return push(std::move(y), [xv, begin, count](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      for (std::size_t c = 0; c < count; ++c) dx(r, begin + c) += dy(r, c);
    }
  });
}

Var Graph::gather_rows(Var xv, std::shared_ptr<const std::vector<std::int64_t>> idx) {
  const Tensor& x = value(xv);
  Tensor y(idx->size(), x.cols());
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::int64_t s = (*idx)[i];
    if (s < 0) continue;
    require(static_cast<std::size_t>(s) < x.rows(), "gather_rows", "index out of range");
    std::copy(x.row(static_cast<std::size_t>(s)).begin(), x.row(static_cast<std::size_t>(s)).end(),
              y.row(i).begin());
  }
  return push(std::move(y), [xv, idx](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const std::int64_t s = (*idx)[i];
      if (s < 0) continue;
      auto dst = dx.row(static_cast<std::size_t>(s));
      auto src = dy.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var Graph::repeat_rows(Var xv, std::size_t times) {
  const Tensor& x = value(xv);
  Tensor y(x.rows() * times, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy(x.row(r).begin(), x.row(r).end(), y.row(r * times + t).begin());
    }
  }
  return push(std::move(y), [xv, times](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy(r * times + t, c);
      }
    }
  });
}

Var Graph::segment_softmax(Var xv, std::size_t group) {
  const Tensor& x = value(xv);
  require(group > 0 && x.rows() % group == 0, "segment_softmax",
          "rows " + std::to_string(x.rows()) + " not divisible by " + std::to_string(group));
  Tensor y(x.rows(), x.cols());
  const std::size_t segments = x.rows() / group;
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double mx = x(s * group, c);
      for (std::size_t k = 1; k < group; ++k) mx = std::max(mx, x(s * group + k, c));
      double total = 0.0;
      for (std::size_t k = 0; k < group; ++k) {
        const double e = std::exp(x(s * group + k, c) - mx);
        y(s * group + k, c) = e;
        total += e;
      }
      for (std::size_t k = 0; k < group; ++k) y(s * group + k, c) /= total;
    }
  }
  return push(std::move(y), [xv, group](Graph& g, std::uint32_t self) {
    const Node& me = g.nodes_[self];
    const Tensor& y = me.value;
    const Tensor& dy = me.grad;
    Tensor& dx = g.grad_ref(xv.id);
    const std::size_t segments = y.rows() / group;
    for (std::size_t s = 0; s < segments; ++s) {
      for (std::size_t c = 0; c < y.cols(); ++c) {
        double dot = 0.0;
        for (std::size_t k = 0; k < group; ++k) dot += y(s * group + k, c) * dy(s * group + k, c);
        for (std::size_t k = 0; k < group; ++k) {
          const std::size_t r = s * group + k;
          dx(r, c) += y(r, c) * (dy(r, c) - dot);
        }
      }
    }
  });
}

Var Graph::segment_sum(Var xv, std::size_t group) {
  const Tensor& x = value(xv);
  require(group > 0 && x.rows() % group == 0, "segment_sum", "rows not divisible by group");
  Tensor y(x.rows() / group, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) y(r / group, c) += x(r, c);
  }
  return push(std::move(y), [xv, group](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy(r / group, c);
    }
  });
}

Var Graph::scatter_mean(Var xv, std::shared_ptr<const std::vector<std::uint32_t>> target,
                        std::size_t out_rows) {
  const Tensor& x = value(xv);
  require(target->size() == x.rows(), "scatter_mean", "target size mismatch");
  auto counts = std::make_shared<std::vector<double>>(out_rows, 0.0);
  for (std::uint32_t t : *target) {
    require(t < out_rows, "scatter_mean", "target out of range");
    (*counts)[t] += 1.0;
  }
  Tensor y(out_rows, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::uint32_t t = (*target)[r];
    for (std::size_t c = 0; c < x.cols(); ++c) y(t, c) += x(r, c) / (*counts)[t];
  }
  return push(std::move(y), [xv, target, counts](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      const std::uint32_t t = (*target)[r];
      for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy(t, c) / (*counts)[t];
    }
  });
}

Var Graph::scatter_slots(Var xv, std::shared_ptr<const std::vector<std::uint32_t>> target,
                         std::shared_ptr<const std::vector<std::uint8_t>> slot,
                         std::size_t out_rows, std::size_t slots) {
  const Tensor& x = value(xv);
  require(target->size() == x.rows() && slot->size() == x.rows(), "scatter_slots",
          "index size mismatch");
  const std::size_t w = x.cols();
  Tensor y(out_rows, slots * w);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::size_t t = (*target)[r], s = (*slot)[r];
    require(t < out_rows && s < slots, "scatter_slots", "index out of range");
    for (std::size_t c = 0; c < w; ++c) y(t, s * w + c) += x(r, c);
  }
  return push(std::move(y), [xv, target, slot, w](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      const std::size_t t = (*target)[r], s = (*slot)[r];
      for (std::size_t c = 0; c < w; ++c) dx(r, c) += dy(t, s * w + c);
    }
  });
}

Var Graph::gather_slots(Var xv, std::shared_ptr<const std::vector<std::uint32_t>> row,
                        std::shared_ptr<const std::vector<std::uint8_t>> slot, std::size_t width) {
  const Tensor& x = value(xv);
  require(row->size() == slot->size(), "gather_slots", "index size mismatch");
  Tensor y(row->size(), width);
  for (std::size_t i = 0; i < row->size(); ++i) {
    const std::size_t r = (*row)[i], s = (*slot)[i];
    require(r < x.rows() && (s + 1) * width <= x.cols(), "gather_slots", "index out of range");
    for (std::size_t c = 0; c < width; ++c) y(i, c) = x(r, s * width + c);
  }
  return push(std::move(y), [xv, row, slot, width](Graph& g, std::uint32_t self) {
    const Tensor dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < row->size(); ++i) {
      const std::size_t r = (*row)[i], s = (*slot)[i];
      for (std::size_t c = 0; c < width; ++c) dx(r, s * width + c) += dy(i, c);
    }
  });
}

Var Graph::layer_norm(Var xv, double eps) {
  const Tensor& x = value(xv);
  const std::size_t n = x.rows(), w = x.cols();
  Tensor y(n, w);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < w; ++c) m += x(r, c);
    m /= static_cast<double>(w);
    double v = 0.0;
    for (std::size_t c = 0; c < w; ++c) v += (x(r, c) - m) * (x(r, c) - m);
    v /= static_cast<double>(w);
    const double is = 1.0 / std::sqrt(v + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < w; ++c) y(r, c) = (x(r, c) - m) * is;
  }
  return push(std::move(y), [xv, inv_std](Graph& g, std::uint32_t self) {
    const Node& me = g.nodes_[self];
    const Tensor& y = me.value;
    const Tensor& dy = me.grad;
    Tensor& dx = g.grad_ref(xv.id);
    const double w = static_cast<double>(y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double mean_dy = 0.0, mean_dyy = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) {
        mean_dy += dy(r, c);
        mean_dyy += dy(r, c) * y(r, c);
      }
      mean_dy /= w;
      mean_dyy /= w;
      for (std::size_t c = 0; c < y.cols(); ++c) {
        dx(r, c) += (*inv_std)[r] * (dy(r, c) - mean_dy - y(r, c) * mean_dyy);
      }
    }
  });
}

Var Graph::sum(Var xv) {
  const Tensor& x = value(xv);
  double s = 0.0;
  for (double v : x.flat()) s += v;
  return push(Tensor(1, 1, s), [xv](Graph& g, std::uint32_t self) {
    const double d = g.nodes_[self].grad[0];
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d;
  });
}

Var Graph::mean(Var xv) {
  const std::size_t n = value(xv).size();
  require(n > 0, "mean", "empty input");
  return scale(sum(xv), 1.0 / static_cast<double>(n));
}

Var Graph::mse(Var av, Var bv) {
  const Var d = sub(av, bv);
  return mean(mul(d, d));
}

Var Graph::sum_neg_log2(Var xv) {
  const Tensor& x = value(xv);
  double s = 0.0;
  for (double v : x.flat()) {
    if (!(v > 0.0)) fail(ErrorCode::kNonFinite, "sum_neg_log2: non-positive probability");
    s -= std::log2(v);
  }
  return push(Tensor(1, 1, s), [xv](Graph& g, std::uint32_t self) {
    const double d = g.nodes_[self].grad[0];
    const Tensor& x = g.val(xv.id);
    Tensor& dx = g.grad_ref(xv.id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] -= d / (x[i] * std::log(2.0));
  });
}

Var Graph::bce_mean(Var pv, std::shared_ptr<const Tensor> target, double eps) {
  const Tensor& p = value(pv);
  require_same(p, *target, "bce_mean");
  require(p.size() > 0, "bce_mean", "empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    s -= (*target)[i] * std::log(q) + (1.0 - (*target)[i]) * std::log(1.0 - q);
  }
  const double n = static_cast<double>(p.size());
  return push(Tensor(1, 1, s / n), [pv, target, eps, n](Graph& g, std::uint32_t self) {
    const double d = g.nodes_[self].grad[0];
    const Tensor& p = g.val(pv.id);
    Tensor& dp = g.grad_ref(pv.id);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < eps || p[i] > 1.0 - eps) continue;
      const double o = (*target)[i];
      dp[i] += d * (-o / p[i] + (1.0 - o) / (1.0 - p[i])) / n;
    }
  });
}

Var Graph::laplace_likelihood(Var yv, Var muv, Var sv, double p_min) {
  const Tensor& y = value(yv);
  const Tensor& mu = value(muv);
  const Tensor& sigma = value(sv);
  require_same(y, mu, "laplace_likelihood");
  require_same(y, sigma, "laplace_likelihood");
  Tensor p(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double lo = y[i] - 0.5 - mu[i], hi = y[i] + 0.5 - mu[i];
    p[i] = std::max(laplace_interval_mass(lo, hi, sigma[i]), p_min);
  }
  return push(std::move(p), [yv, muv, sv, p_min](Graph& g, std::uint32_t self) {
    const Node& me = g.nodes_[self];
    const Tensor& y = g.val(yv.id);
    const Tensor& mu = g.val(muv.id);
    const Tensor& sigma = g.val(sv.id);
    Tensor& dy = g.grad_ref(yv.id);
    Tensor& dmu = g.grad_ref(muv.id);
    Tensor& ds = g.grad_ref(sv.id);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double lo = y[i] - 0.5 - mu[i], hi = y[i] + 0.5 - mu[i];
      if (laplace_interval_mass(lo, hi, sigma[i]) < p_min) continue;
      const double s = sigma[i];
      const double f_hi = laplace_density(hi, s), f_lo = laplace_density(lo, s);
      const double d = me.grad[i];
      dy[i] += d * (f_hi - f_lo);
      dmu[i] -= d * (f_hi - f_lo);
      ds[i] += d * (-(hi / s) * f_hi + (lo / s) * f_lo);
    }
  });
}

namespace {

struct MixtureCdf {
  double value = 0.0;
  double d_x = 0.0;
};

// Evaluates the logistic-mixture CDF for one channel at x. When grad is
// non-null, accumulates scale * dCDF/dparam into it (same layout as params).
MixtureCdf mixture_cdf(std::span<const double> prm, std::size_t units, double x,
                       std::span<double> grad, double scale) {
  double amax = prm[0];
  for (std::size_t u = 1; u < units; ++u) amax = std::max(amax, prm[u]);
  double wsum = 0.0;
  double w[16];
  for (std::size_t u = 0; u < units; ++u) {
    w[u] = std::exp(prm[u] - amax);
    wsum += w[u];
  }
  MixtureCdf out;
  double gv[16], sv[16];
  for (std::size_t u = 0; u < units; ++u) {
    w[u] /= wsum;
    sv[u] = std::exp(prm[2 * units + u]);
    gv[u] = stable_sigmoid(sv[u] * (x - prm[units + u]));
    out.value += w[u] * gv[u];
    out.d_x += w[u] * sv[u] * gv[u] * (1.0 - gv[u]);
  }
  if (!grad.empty()) {
    for (std::size_t u = 0; u < units; ++u) {
      const double dg = gv[u] * (1.0 - gv[u]);
      grad[u] += scale * w[u] * (gv[u] - out.value);
      grad[units + u] -= scale * w[u] * sv[u] * dg;
      grad[2 * units + u] += scale * w[u] * dg * sv[u] * (x - prm[units + u]);
    }
  }
  return out;
}

}  // namespace

Var Graph::factorized_likelihood(Var zv, Var pv, std::size_t units, double p_min) {
  const Tensor& z = value(zv);
  const Tensor& prm = value(pv);
  require(units >= 1 && units <= 16, "factorized_likelihood", "units out of range");
  require(prm.rows() == z.cols() && prm.cols() == 3 * units, "factorized_likelihood",
          "params " + shape(prm) + " for latent " + shape(z));
  Tensor p(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const double hi = mixture_cdf(prm.row(c), units, z(r, c) + 0.5, {}, 0.0).value;
      const double lo = mixture_cdf(prm.row(c), units, z(r, c) - 0.5, {}, 0.0).value;
      p(r, c) = std::max(hi - lo, p_min);
    }
  }
  return push(std::move(p), [zv, pv, units, p_min](Graph& g, std::uint32_t self) {
    const Node& me = g.nodes_[self];
    const Tensor& z = g.val(zv.id);
    const Tensor& prm = g.val(pv.id);
    Tensor& dz = g.grad_ref(zv.id);
    Tensor& dp = g.grad_ref(pv.id);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const double d = me.grad(r, c);
        if (me.value(r, c) <= p_min) {
          const double hi = mixture_cdf(prm.row(c), units, z(r, c) + 0.5, {}, 0.0).value;
          const double lo = mixture_cdf(prm.row(c), units, z(r, c) - 0.5, {}, 0.0).value;
          if (hi - lo < p_min) continue;
        }
        const auto hi = mixture_cdf(prm.row(c), units, z(r, c) + 0.5, dp.row(c), d);
        const auto lo = mixture_cdf(prm.row(c), units, z(r, c) - 0.5, dp.row(c), -d);
        dz(r, c) += d * (hi.d_x - lo.d_x);
      }
    }
  });
}

}  // namespace pcdc::nn
