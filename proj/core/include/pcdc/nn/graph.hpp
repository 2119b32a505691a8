#ifndef PCDC_NN_GRAPH_HPP_
#define PCDC_NN_GRAPH_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcdc/nn/tensor.hpp"

namespace pcdc::nn {

// A trainable tensor. Gradients live outside the parameter (see GradMap) so
// models can stay const during a forward pass.
struct Param {
  std::string name;
  Tensor value;
};

using GradMap = std::unordered_map<const Param*, Tensor>;

struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Reverse-mode tape over dense tensors. Every op evaluates eagerly; when
// recording, it also stores a closure that propagates gradients to its
// inputs. Nodes are appended in evaluation order, so walking them backwards is
// a valid topological order.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  bool recording() const { return record_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var constant(Tensor t);
  // Non-owning constant; `t` must outlive the graph.
  Var view(const Tensor& t);
  Var param(const Param& p);
  // Cuts the gradient path.
  Var detach(Var x);

  const Tensor& value(Var v) const;
  // Gradient of the last backward root with respect to v; zero-filled if v
  // did not influence the root.
  Tensor grad(Var v) const;

  void backward(Var root);
  void backward(Var root, const Tensor& seed);

  // Sum of gradients over every leaf created from `p`.
  Tensor param_grad(const Param& p) const;
  void accumulate(GradMap& grads) const;

  // Affine map: x [N x in] * w^T [in x out] + b [1 x out].
  Var linear(Var x, Var w, Var b);
  Var add(Var a, Var b);
  // a [N x C] + b [1 x C] on every row.
  Var add_row(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // x [N x C] scaled row-wise by s [N x 1].
  Var mul_col(Var x, Var s);
  Var scale(Var x, double c);
  Var one_minus(Var x);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var exp(Var x);
  Var clamp_min(Var x, double lo);

  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var slice_cols(Var x, std::size_t begin, std::size_t count);

  // Row i of the output is row idx[i] of x, or zeros when idx[i] < 0.
  Var gather_rows(Var x, std::shared_ptr<const std::vector<std::int64_t>> idx);
  // Each input row repeated `times` times consecutively.
  Var repeat_rows(Var x, std::size_t times);
  // Softmax over consecutive groups of `group` rows, independently per column.
  Var segment_softmax(Var x, std::size_t group);
  Var segment_sum(Var x, std::size_t group);
  // Mean of the rows of x that map to each output index; empty outputs are 0.
  Var scatter_mean(Var x, std::shared_ptr<const std::vector<std::uint32_t>> target,
                   std::size_t out_rows);
  // out[target[i], slot[i]*C + c] = x[i, c]; output is out_rows x (slots*C).
  Var scatter_slots(Var x, std::shared_ptr<const std::vector<std::uint32_t>> target,
                    std::shared_ptr<const std::vector<std::uint8_t>> slot, std::size_t out_rows,
                    std::size_t slots);
  // Inverse of scatter_slots for a subset: out[i] = x[row[i], slot[i]*width ..].
  Var gather_slots(Var x, std::shared_ptr<const std::vector<std::uint32_t>> row,
                   std::shared_ptr<const std::vector<std::uint8_t>> slot, std::size_t width);
  // Per-row normalization to zero mean / unit variance.
  Var layer_norm(Var x, double eps);

  Var sum(Var x);
  Var mean(Var x);
  // Mean squared difference, 1x1.
  Var mse(Var a, Var b);
  // Sum of -log2(x), 1x1. Inputs must be positive.
  Var sum_neg_log2(Var x);
  // Mean binary cross-entropy (natural log) of probabilities p against fixed
  // 0/1 targets; p is clamped to [eps, 1 - eps].
  Var bce_mean(Var p, std::shared_ptr<const Tensor> target, double eps);

  // Probability of the unit interval around y under Laplace(mu, sigma),
  // floored at p_min (no gradient through the floor).
  Var laplace_likelihood(Var y, Var mu, Var sigma, double p_min);
  // Per-channel monotone CDF c(x) = sum_u softmax(a)_u * sigmoid(exp(ls_u) (x - b_u));
  // params is [C x 3U] laid out as (a, b, ls). Returns c(z + 1/2) - c(z - 1/2),
  // floored at p_min.
  Var factorized_likelihood(Var z, Var params, std::size_t units, double p_min);

 private:
  using Backward = std::function<void(Graph&, std::uint32_t)>;
  struct Node {
    Tensor value;
    const Tensor* ext = nullptr;
    const Param* param = nullptr;
    mutable Tensor grad;
    Backward back;
  };

  Var push(Tensor value, Backward back);
  Tensor& grad_ref(std::uint32_t id);
  const Tensor& val(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.ext ? *n.ext : n.value;
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace pcdc::nn

#endif  // PCDC_NN_GRAPH_HPP_
