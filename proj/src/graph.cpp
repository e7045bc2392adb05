#include "dcwm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
typename Graph<T>::NodeId Graph<T>::push(Node n) {
  // A node needs a gradient if it is a live leaf or depends on one.
  if (n.op == Op::kParam) {
    n.needs_grad = !n.frozen;
  } else if (n.op != Op::kInput) {
    for (int in : {n.a, n.b, n.c})
      if (in >= 0 && nodes_[in].needs_grad) n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::input(Mat<T> value, bool needs_grad) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::param(ParamBlock<T>& block, bool frozen) {
  auto it = param_cache_.find(&block);
  if (it != param_cache_.end()) return it->second;
  Node n;
  n.op = Op::kParam;
  n.value = block.value;  // snapshot; version check guards against drift
  n.block = &block;
  n.bound_version = block.version;
  n.frozen = frozen;
  NodeId id = push(std::move(n));
  param_cache_.emplace(&block, id);
  return id;
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::linear(NodeId x, NodeId w, NodeId b,
                                           const std::string& label) {
  const Mat<T>& xv = nodes_[x].value;
  const Mat<T>& wv = nodes_[w].value;
  const Mat<T>& bv = nodes_[b].value;
  if (xv.cols != wv.cols)
    throw DimensionError("linear '" + label + "': input width " + std::to_string(xv.cols) +
                         " != weight fan-in " + std::to_string(wv.cols));
  require_shape(bv, 1, wv.rows, ("linear '" + label + "' bias").c_str());

  Node n;
  n.op = Op::kLinear;
  n.a = x; n.b = w; n.c = b;
  n.label = label;
  n.value = Mat<T>(xv.rows, wv.rows);
  gemm<T>(false, true, T(1), xv, wv, T(0), n.value);
  for (int r = 0; r < n.value.rows; ++r) {
    T* out = n.value.row(r);
    for (int c = 0; c < n.value.cols; ++c) out[c] += bv.data[c];
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::layer_norm(NodeId x, NodeId gain, NodeId bias, T eps) {
  const Mat<T>& xv = nodes_[x].value;
  const int F = xv.cols;
  require_shape(nodes_[gain].value, 1, F, "layer_norm gain");
  require_shape(nodes_[bias].value, 1, F, "layer_norm bias");

  Node n;
  n.op = Op::kLayerNorm;
  n.a = x; n.b = gain; n.c = bias;
  n.scalar = eps;
  n.value = Mat<T>(xv.rows, F);
  n.aux = Mat<T>(xv.rows, F);   // xhat
  n.aux2 = Mat<T>(xv.rows, 1);  // 1/sqrt(var+eps)
  const T* g = nodes_[gain].value.data.data();
  const T* bvec = nodes_[bias].value.data.data();
  for (int r = 0; r < xv.rows; ++r) {
    const T* in = xv.row(r);
    T mean = 0;
    for (int c = 0; c < F; ++c) mean += in[c];
    mean /= static_cast<T>(F);
    T var = 0;
    for (int c = 0; c < F; ++c) {
      const T d = in[c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(F);
    const T inv = T(1) / std::sqrt(var + eps);
    n.aux2.data[r] = inv;
    T* xhat = n.aux.row(r);
    T* out = n.value.row(r);
    for (int c = 0; c < F; ++c) {
      xhat[c] = (in[c] - mean) * inv;
      out[c] = xhat[c] * g[c] + bvec[c];
    }
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::mish(NodeId x) {
  const Mat<T>& xv = nodes_[x].value;
  Node n;
  n.op = Op::kMish;
  n.a = x;
  n.value = Mat<T>(xv.rows, xv.cols);
  n.aux = Mat<T>(xv.rows, xv.cols);   // tanh(softplus(x))
  n.aux2 = Mat<T>(xv.rows, xv.cols);  // sigmoid(x)
  for (size_t i = 0; i < xv.size(); ++i) {
    const T v = xv.data[i];
    const T t = std::tanh(softplus(v));
    n.aux.data[i] = t;
    n.aux2.data[i] = T(1) / (T(1) + std::exp(-v));
    n.value.data[i] = v * t;
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::tanh_(NodeId x) {
  const Mat<T>& xv = nodes_[x].value;
  Node n;
  n.op = Op::kTanh;
  n.a = x;
  n.value = Mat<T>(xv.rows, xv.cols);
  for (size_t i = 0; i < xv.size(); ++i) n.value.data[i] = std::tanh(xv.data[i]);
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::col_affine(NodeId x, const Mat<T>& scale,
                                               const Mat<T>& shift) {
  const Mat<T>& xv = nodes_[x].value;
  require_shape(scale, 1, xv.cols, "col_affine scale");
  require_shape(shift, 1, xv.cols, "col_affine shift");
  Node n;
  n.op = Op::kColAffine;
  n.a = x;
  n.aux = scale;
  n.value = Mat<T>(xv.rows, xv.cols);
  for (int r = 0; r < xv.rows; ++r) {
    const T* in = xv.row(r);
    T* out = n.value.row(r);
    for (int c = 0; c < xv.cols; ++c) out[c] = in[c] * scale.data[c] + shift.data[c];
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::concat_cols(NodeId a, NodeId b) {
  const Mat<T>& av = nodes_[a].value;
  const Mat<T>& bv = nodes_[b].value;
  if (av.rows != bv.rows)
    throw DimensionError("concat_cols: row mismatch " + std::to_string(av.rows) + " vs " +
                         std::to_string(bv.rows));
  Node n;
  n.op = Op::kConcat;
  n.a = a; n.b = b;
  n.value = Mat<T>(av.rows, av.cols + bv.cols);
  for (int r = 0; r < av.rows; ++r) {
    T* out = n.value.row(r);
    std::copy(av.row(r), av.row(r) + av.cols, out);
    std::copy(bv.row(r), bv.row(r) + bv.cols, out + av.cols);
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::fsq_ste(NodeId x, const Codebook<T>& cb, bool soft) {
  const Mat<T>& xv = nodes_[x].value;
  const int b = cb.channels();
  if (xv.cols % b != 0)
    throw DimensionError("fsq_ste: width " + std::to_string(xv.cols) +
                         " not a multiple of channel count " + std::to_string(b));
  Node n;
  n.op = Op::kFsqSte;
  n.a = x;
  n.codebook = &cb;
  n.value = Mat<T>(xv.rows, xv.cols);
  n.aux = Mat<T>(xv.rows, xv.cols);  // tanh(x)
  for (int r = 0; r < xv.rows; ++r) {
    const T* in = xv.row(r);
    T* out = n.value.row(r);
    T* th = n.aux.row(r);
    for (int c = 0; c < xv.cols; ++c) {
      th[c] = std::tanh(in[c]);
      out[c] = soft ? th[c] : cb.quantize_scalar(in[c], c % b);
    }
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::gumbel_st(NodeId logits, const Codebook<T>& cb, T tau,
                                              Mat<T> noise, bool soft) {
  const Mat<T>& lv = nodes_[logits].value;
  const int K = cb.size();
  const int b = cb.channels();
  if (lv.cols % K != 0)
    throw DimensionError("gumbel_st: logits width not a multiple of |C|");
  const int d = lv.cols / K;
  const int groups = lv.rows * d;
  require_shape(noise, groups, K, "gumbel_st noise");

  Node n;
  n.op = Op::kGumbelSt;
  n.a = logits;
  n.codebook = &cb;
  n.scalar = tau;
  n.classes = K;
  n.value = Mat<T>(lv.rows, d * b);
  n.aux = Mat<T>(groups, K);  // soft = softmax((logits+noise)/tau)
  n.labels.resize(groups);
  const T* lp = lv.data.data();  // (B*d) x K, contiguous reinterpretation
  for (int g = 0; g < groups; ++g) {
    const T* z0 = lp + static_cast<size_t>(g) * K;
    const T* nz = noise.row(g);
    T* probs = n.aux.row(g);
    T mx = -std::numeric_limits<T>::infinity();
    int arg = 0;
    for (int k = 0; k < K; ++k) {
      probs[k] = (z0[k] + nz[k]) / tau;
      if (probs[k] > mx) {
        mx = probs[k];
        arg = k;
      }
    }
    T sum = 0;
    for (int k = 0; k < K; ++k) {
      probs[k] = std::exp(probs[k] - mx);
      sum += probs[k];
    }
    for (int k = 0; k < K; ++k) probs[k] /= sum;
    n.labels[g] = arg;
    const int row = g / d;
    const int dim = g % d;
    T* out = n.value.row(row) + dim * b;
    if (soft) {
      // relaxed forward: probability-weighted mixture of codebook rows
      for (int j = 0; j < b; ++j) {
        T acc = 0;
        for (int k = 0; k < K; ++k) acc += probs[k] * cb.code(k)[j];
        out[j] = acc;
      }
    } else {
      // hard forward: emit the sampled codebook row
      const T* code = cb.code(arg);
      std::copy(code, code + b, out);
    }
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::softmax_ce(NodeId logits, std::vector<int> labels,
                                               int classes) {
  const Mat<T>& lv = nodes_[logits].value;
  if (lv.cols % classes != 0)
    throw DimensionError("softmax_ce: logits width not a multiple of class count");
  const int groups = lv.rows * (lv.cols / classes);
  if (static_cast<int>(labels.size()) != groups)
    throw DimensionError("softmax_ce: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(groups) + " rows");

  Node n;
  n.op = Op::kSoftmaxCe;
  n.a = logits;
  n.classes = classes;
  n.labels = std::move(labels);
  n.value = Mat<T>(groups, 1);
  n.aux = Mat<T>(groups, classes);
  const T* lp = lv.data.data();
  for (int g = 0; g < groups; ++g) {
    const T* z = lp + static_cast<size_t>(g) * classes;
    T* p = n.aux.row(g);
    T mx = z[0];
    for (int k = 1; k < classes; ++k) mx = std::max(mx, z[k]);
    T sum = 0;
    for (int k = 0; k < classes; ++k) {
      p[k] = std::exp(z[k] - mx);
      sum += p[k];
    }
    for (int k = 0; k < classes; ++k) p[k] /= sum;
    const int y = n.labels[g];
    if (y < 0 || y >= classes) throw ContractError("softmax_ce: label out of range");
    n.value.data[g] = std::log(sum) + mx - z[y];
  }
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::add(NodeId a, NodeId b) {
  const Mat<T>& av = nodes_[a].value;
  const Mat<T>& bv = nodes_[b].value;
  if (!av.same_shape(bv)) throw DimensionError("add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a; n.b = b;
  n.value = av;
  for (size_t i = 0; i < bv.size(); ++i) n.value.data[i] += bv.data[i];
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::sub_const(NodeId a, const Mat<T>& c) {
  const Mat<T>& av = nodes_[a].value;
  if (!av.same_shape(c)) throw DimensionError("sub_const: shape mismatch");
  Node n;
  n.op = Op::kSubConst;
  n.a = a;
  n.value = av;
  for (size_t i = 0; i < c.size(); ++i) n.value.data[i] -= c.data[i];
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::square(NodeId a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v *= v;
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::scale(NodeId a, T s) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.scalar = s;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v *= s;
  return push(std::move(n));
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::sum_all(NodeId a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a;
  n.value = Mat<T>(1, 1);
  T s = 0;
  for (T v : nodes_[a].value.data) s += v;
  n.value.data[0] = s;
  return push(std::move(n));
}

template <typename T>
const Mat<T>& Graph<T>::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.op == Op::kParam) return n.block->grad;
  return n.grad;
}

template <typename T>
int Graph<T>::hard_index(NodeId node, int row) const {
  return nodes_[node].labels[row];
}

template <typename T>
const Mat<T>& Graph<T>::soft_probs(NodeId node) const {
  return nodes_[node].aux;
}

template <typename T>
Mat<T>& Graph<T>::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
    n.grad = Mat<T>(n.value.rows, n.value.cols);
  return n.grad;
}

template <typename T>
void Graph<T>::backward(NodeId root) {
  const Mat<T>& v = nodes_[root].value;
  if (v.rows != 1 || v.cols != 1)
    throw ContractError("backward: root must be a 1x1 scalar node");
  Mat<T> seed(1, 1);
  seed.data[0] = T(1);
  backward_from(root, seed);
}

template <typename T>
void Graph<T>::backward_from(NodeId root, const Mat<T>& upstream) {
  Node& rn = nodes_[root];
  if (!upstream.same_shape(rn.value))
    throw DimensionError("backward_from: upstream shape mismatch");

  // Stale-tape guard: every bound parameter must be unchanged since forward.
  for (const auto& [blk, id] : param_cache_) {
    if (blk->version != nodes_[id].bound_version)
      throw ContractError("backward: parameter block '" + blk->name +
                          "' was mutated after the forward pass (stale tape)");
  }

  // Reset per-node gradient buffers (parameter accumulators are left alone
  // so repeated backward calls accumulate in the blocks).
  for (NodeId i = 0; i <= root; ++i) {
    Node& n = nodes_[i];
    if (n.op != Op::kParam && !n.grad.empty()) n.grad.zero();
  }
  grad_buf(root) = upstream;
  run_backward(root);
}

template <typename T>
void Graph<T>::run_backward(NodeId root) {
  for (NodeId i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.op == Op::kInput || n.op == Op::kParam) continue;
    if (n.grad.empty()) continue;  // not on the path from the root
    backward_node(i);
  }
}

template <typename T>
void Graph<T>::backward_node(NodeId id) {
  Node& n = nodes_[id];
  const Mat<T>& g = n.grad;
  auto target = [&](NodeId in) -> Mat<T>* {
    Node& t = nodes_[in];
    if (!t.needs_grad) return nullptr;
    if (t.op == Op::kParam) return &t.block->grad;
    return &grad_buf(in);
  };

  switch (n.op) {
    case Op::kLinear: {
      const Mat<T>& xv = nodes_[n.a].value;
      const Mat<T>& wv = nodes_[n.b].value;
      if (Mat<T>* dx = target(n.a)) gemm<T>(false, false, T(1), g, wv, T(1), *dx);
      if (Mat<T>* dw = target(n.b)) gemm<T>(true, false, T(1), g, xv, T(1), *dw);
      if (Mat<T>* db = target(n.c)) add_row_sum(g, *db);
      break;
    }
    case Op::kLayerNorm: {
      const int F = n.value.cols;
      const Mat<T>& gain = nodes_[n.b].value;
      Mat<T>* dx = target(n.a);
      Mat<T>* dgain = target(n.b);
      Mat<T>* dbias = target(n.c);
      for (int r = 0; r < n.value.rows; ++r) {
        const T* gr = g.row(r);
        const T* xhat = n.aux.row(r);
        const T inv = n.aux2.data[r];
        if (dgain)
          for (int c = 0; c < F; ++c) dgain->data[c] += gr[c] * xhat[c];
        if (dbias)
          for (int c = 0; c < F; ++c) dbias->data[c] += gr[c];
        if (dx) {
          T m1 = 0, m2 = 0;  // mean(dxhat), mean(dxhat * xhat)
          for (int c = 0; c < F; ++c) {
            const T dxh = gr[c] * gain.data[c];
            m1 += dxh;
            m2 += dxh * xhat[c];
          }
          m1 /= static_cast<T>(F);
          m2 /= static_cast<T>(F);
          T* out = dx->row(r);
          for (int c = 0; c < F; ++c) {
            const T dxh = gr[c] * gain.data[c];
            out[c] += inv * (dxh - m1 - xhat[c] * m2);
          }
        }
      }
      break;
    }
    case Op::kMish: {
      if (Mat<T>* dx = target(n.a)) {
        const Mat<T>& xv = nodes_[n.a].value;
        for (size_t i = 0; i < g.size(); ++i) {
          const T t = n.aux.data[i];
          const T sig = n.aux2.data[i];
          dx->data[i] += g.data[i] * (t + xv.data[i] * (T(1) - t * t) * sig);
        }
      }
      break;
    }
    case Op::kTanh: {
      if (Mat<T>* dx = target(n.a))
        for (size_t i = 0; i < g.size(); ++i)
          dx->data[i] += g.data[i] * (T(1) - n.value.data[i] * n.value.data[i]);
      break;
    }
    case Op::kColAffine: {
      if (Mat<T>* dx = target(n.a))
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) dx->at(r, c) += g.at(r, c) * n.aux.data[c];
      break;
    }
    case Op::kConcat: {
      const int wa = nodes_[n.a].value.cols;
      const int wb = nodes_[n.b].value.cols;
      if (Mat<T>* da = target(n.a))
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < wa; ++c) da->at(r, c) += g.at(r, c);
      if (Mat<T>* db = target(n.b))
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < wb; ++c) db->at(r, c) += g.at(r, wa + c);
      break;
    }
    case Op::kFsqSte: {
      if (Mat<T>* dx = target(n.a))
        for (size_t i = 0; i < g.size(); ++i) {
          const T th = n.aux.data[i];
          dx->data[i] += g.data[i] * (T(1) - th * th);
        }
      break;
    }
    case Op::kGumbelSt: {
      if (Mat<T>* dl = target(n.a)) {
        const Codebook<T>& cb = *n.codebook;
        const int K = n.classes;
        const int b = cb.channels();
        const int d = n.value.cols / b;
        const T inv_tau = T(1) / n.scalar;
        T* dlp = dl->data.data();
        for (int grp = 0; grp < n.aux.rows; ++grp) {
          const int row = grp / d;
          const int dim = grp % d;
          const T* up = g.row(row) + dim * b;   // dL/d(code block)
          const T* soft = n.aux.row(grp);
          T* out = dlp + static_cast<size_t>(grp) * K;
          // dL/dsoft_k = <up, codebook_k>; dL/dz = soft * (dsoft - <dsoft, soft>)
          T dot = 0;
          T dsoft[64];  // |C| <= 64 in practice; checked below
          if (K > 64) throw ContractError("gumbel_st backward: |C| > 64 unsupported");
          for (int k = 0; k < K; ++k) {
            const T* code = cb.code(k);
            T s = 0;
            for (int j = 0; j < b; ++j) s += up[j] * code[j];
            dsoft[k] = s;
            dot += s * soft[k];
          }
          for (int k = 0; k < K; ++k) out[k] += soft[k] * (dsoft[k] - dot) * inv_tau;
        }
      }
      break;
    }
    case Op::kSoftmaxCe: {
      if (Mat<T>* dl = target(n.a)) {
        const int K = n.classes;
        T* dlp = dl->data.data();
        for (int grp = 0; grp < n.aux.rows; ++grp) {
          const T gr = g.data[grp];
          const T* p = n.aux.row(grp);
          T* out = dlp + static_cast<size_t>(grp) * K;
          for (int k = 0; k < K; ++k) out[k] += gr * p[k];
          out[n.labels[grp]] -= gr;
        }
      }
      break;
    }
    case Op::kAdd: {
      if (Mat<T>* da = target(n.a))
        for (size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i];
      if (Mat<T>* db = target(n.b))
        for (size_t i = 0; i < g.size(); ++i) db->data[i] += g.data[i];
      break;
    }
    case Op::kSubConst: {
      if (Mat<T>* da = target(n.a))
        for (size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i];
      break;
    }
    case Op::kSquare: {
      if (Mat<T>* da = target(n.a)) {
        const Mat<T>& xv = nodes_[n.a].value;
        for (size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] * T(2) * xv.data[i];
      }
      break;
    }
    case Op::kScale: {
      if (Mat<T>* da = target(n.a))
        for (size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] * n.scalar;
      break;
    }
    case Op::kSumAll: {
      if (Mat<T>* da = target(n.a)) {
        const T gs = g.data[0];
        for (auto& v : da->data) v += gs;
      }
      break;
    }
    case Op::kInput:
    case Op::kParam:
      break;
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace dcwm
