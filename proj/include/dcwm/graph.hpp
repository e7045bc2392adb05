#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dcwm/fsq.hpp"
#include "dcwm/mat.hpp"
#include "dcwm/param.hpp"

namespace dcwm {

// Define-by-run reverse-mode autodiff at matrix granularity.
//
// Nodes are created eagerly (forward values computed at creation) and the
// creation order is the tape; backward() walks it in reverse.  Parameter
// gradients accumulate straight into ParamBlock::grad, so two backward
// passes add twice.  Repeated Graph::param() calls on the same block return
// the same node, which is what makes weight sharing across a BPTT rollout
// work without any special casing.
//
// The tape records each parameter's version at bind time; backward() refuses
// to run if an optimizer step mutated a block after the forward pass.
template <typename T>
class Graph {
 public:
  using NodeId = int;

  // --- leaves ---
  NodeId input(Mat<T> value, bool needs_grad = false);
  NodeId param(ParamBlock<T>& block, bool frozen = false);

  // --- layers / elementwise ---
  // y = x @ W^T + b, W is out x in, b is 1 x out.
  NodeId linear(NodeId x, NodeId w, NodeId b, const std::string& label);
  // Row-wise layer norm with affine gain/bias (1 x features each).
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, T eps);
  NodeId mish(NodeId x);
  NodeId tanh_(NodeId x);
  // y = x * scale + shift, scale/shift broadcast per column.
  NodeId col_affine(NodeId x, const Mat<T>& scale, const Mat<T>& shift);
  NodeId concat_cols(NodeId a, NodeId b);

  // --- quantizer-aware ops ---
  // Forward: FSQ round per channel; backward: gradient of tanh (straight
  // through the round).  x is B x (d*channels), channel = column % channels.
  // soft=true skips the rounding (pure tanh forward), making the node the
  // differentiable relaxation the backward formula is exact for — used by
  // gradient-check tests, never by training.
  NodeId fsq_ste(NodeId x, const Codebook<T>& cb, bool soft = false);
  // Straight-through Gumbel-softmax over codebook entries.  logits is
  // B x (d*|C|), viewed per latent dimension; `noise` is (B*d) x |C| of
  // standard Gumbel draws.  Forward emits hard codebook rows (B x d*channels);
  // backward flows through softmax((logits+noise)/tau) @ codebook_rows.
  // soft=true emits the probability-weighted code mixture instead (the
  // relaxation; same backward).
  NodeId gumbel_st(NodeId logits, const Codebook<T>& cb, T tau, Mat<T> noise,
                   bool soft = false);
  // Per-row -log softmax(logits)[label].  logits B x (groups*classes) is
  // treated as (B*groups) x classes; output is (B*groups) x 1.
  NodeId softmax_ce(NodeId logits, std::vector<int> labels, int classes);

  // --- arithmetic ---
  NodeId add(NodeId a, NodeId b);
  NodeId sub_const(NodeId a, const Mat<T>& c);
  NodeId square(NodeId a);
  NodeId scale(NodeId a, T s);
  NodeId sum_all(NodeId a);  // -> 1 x 1

  // --- access ---
  const Mat<T>& value(NodeId id) const { return nodes_[id].value; }
  // Gradient of the last backward pass; for param nodes this is the block's
  // accumulator.
  const Mat<T>& grad(NodeId id) const;
  int hard_index(NodeId gumbel_node, int row) const;  // sampled code index
  const Mat<T>& soft_probs(NodeId node) const;        // gumbel/ce probabilities

  // Backward from a scalar (1x1) node with seed 1.
  void backward(NodeId root);
  // Backward with an explicit upstream gradient (same shape as the node).
  void backward_from(NodeId root, const Mat<T>& upstream);

  size_t num_nodes() const { return nodes_.size(); }

 private:
  enum class Op {
    kInput, kParam, kLinear, kLayerNorm, kMish, kTanh, kColAffine, kConcat,
    kFsqSte, kGumbelSt, kSoftmaxCe, kAdd, kSubConst, kSquare, kScale, kSumAll
  };

  struct Node {
    Op op;
    Mat<T> value;
    Mat<T> grad;             // unused for kParam (grad lives in the block)
    int a = -1, b = -1, c = -1;
    Mat<T> aux, aux2;        // op scratch: xhat/invstd, tanh, probs, ...
    std::vector<int> labels;
    ParamBlock<T>* block = nullptr;
    uint64_t bound_version = 0;
    bool frozen = false;
    bool needs_grad = false;
    T scalar = T(0);
    int classes = 0;
    const Codebook<T>* codebook = nullptr;
    std::string label;
  };

  NodeId push(Node n);
  Mat<T>& grad_buf(NodeId id);
  void run_backward(NodeId root);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
  std::unordered_map<const ParamBlock<T>*, NodeId> param_cache_;
};

}  // namespace dcwm
