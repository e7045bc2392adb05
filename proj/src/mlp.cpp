#include "dcwm/mlp.hpp"

#include <cmath>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
Mlp<T>::Mlp(std::string name, MlpSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
  if (spec_.input_dim <= 0 || spec_.output_dim <= 0)
    throw ConfigError("mlp '" + name_ + "': non-positive width");
  int in = spec_.input_dim;
  for (size_t i = 0; i < spec_.hidden.size(); ++i) {
    const int out = spec_.hidden[i];
    const std::string p = name_ + ".l" + std::to_string(i);
    blocks_.emplace_back(p + ".w", out, in);
    blocks_.emplace_back(p + ".b", 1, out);
    blocks_.emplace_back(p + ".ln_g", 1, out);
    blocks_.emplace_back(p + ".ln_b", 1, out);
    in = out;
  }
  blocks_.emplace_back(name_ + ".out.w", spec_.output_dim, in);
  blocks_.emplace_back(name_ + ".out.b", 1, spec_.output_dim);
}

template <typename T>
void Mlp<T>::init(Rng& rng) {
  const size_t layers = spec_.hidden.size();
  for (size_t i = 0; i < layers; ++i) {
    init_linear(blocks_[4 * i], blocks_[4 * i + 1], rng);
    blocks_[4 * i + 2].value.fill(T(1));  // ln gain
    blocks_[4 * i + 3].value.zero();      // ln bias
    ++blocks_[4 * i + 2].version;
    ++blocks_[4 * i + 3].version;
  }
  init_linear(blocks_[4 * layers], blocks_[4 * layers + 1], rng);
}

template <typename T>
typename Graph<T>::NodeId Mlp<T>::forward(Graph<T>& g, typename Graph<T>::NodeId x,
                                          bool frozen) {
  if (g.value(x).cols != spec_.input_dim)
    throw DimensionError("mlp '" + name_ + "': input width " +
                         std::to_string(g.value(x).cols) + " != " +
                         std::to_string(spec_.input_dim));
  auto id = x;
  const size_t layers = spec_.hidden.size();
  for (size_t i = 0; i < layers; ++i) {
    auto w = g.param(blocks_[4 * i], frozen);
    auto b = g.param(blocks_[4 * i + 1], frozen);
    auto lg = g.param(blocks_[4 * i + 2], frozen);
    auto lb = g.param(blocks_[4 * i + 3], frozen);
    id = g.linear(id, w, b, blocks_[4 * i].name);
    id = g.layer_norm(id, lg, lb, kLnEps);
    id = g.mish(id);
  }
  auto w = g.param(blocks_[4 * layers], frozen);
  auto b = g.param(blocks_[4 * layers + 1], frozen);
  return g.linear(id, w, b, blocks_[4 * layers].name);
}

template <typename T>
Mat<T> Mlp<T>::eval(const Mat<T>& x) const {
  if (x.cols != spec_.input_dim)
    throw DimensionError("mlp '" + name_ + "': input width " + std::to_string(x.cols) +
                         " != " + std::to_string(spec_.input_dim));
  Mat<T> cur = x;
  const size_t layers = spec_.hidden.size();
  for (size_t i = 0; i < layers; ++i) {
    const Mat<T>& w = blocks_[4 * i].value;
    const Mat<T>& b = blocks_[4 * i + 1].value;
    const Mat<T>& lg = blocks_[4 * i + 2].value;
    const Mat<T>& lb = blocks_[4 * i + 3].value;
    Mat<T> y(cur.rows, w.rows);
    gemm<T>(false, true, T(1), cur, w, T(0), y);
    const int F = y.cols;
    for (int r = 0; r < y.rows; ++r) {
      T* row = y.row(r);
      for (int c = 0; c < F; ++c) row[c] += b.data[c];
      T mean = 0;
      for (int c = 0; c < F; ++c) mean += row[c];
      mean /= static_cast<T>(F);
      T var = 0;
      for (int c = 0; c < F; ++c) {
        const T d = row[c] - mean;
        var += d * d;
      }
      var /= static_cast<T>(F);
      const T inv = T(1) / std::sqrt(var + kLnEps);
      for (int c = 0; c < F; ++c) {
        const T xh = (row[c] - mean) * inv;
        const T z = xh * lg.data[c] + lb.data[c];
        row[c] = mish(z);
      }
    }
    cur = std::move(y);
  }
  const Mat<T>& w = blocks_[4 * layers].value;
  const Mat<T>& b = blocks_[4 * layers + 1].value;
  Mat<T> out(cur.rows, w.rows);
  gemm<T>(false, true, T(1), cur, w, T(0), out);
  for (int r = 0; r < out.rows; ++r) {
    T* row = out.row(r);
    for (int c = 0; c < out.cols; ++c) row[c] += b.data[c];
  }
  return out;
}

template <typename T>
std::vector<ParamBlock<T>*> Mlp<T>::params() {
  std::vector<ParamBlock<T>*> out;
  out.reserve(blocks_.size());
  for (auto& b : blocks_) out.push_back(&b);
  return out;
}

template <typename T>
std::vector<const ParamBlock<T>*> Mlp<T>::params() const {
  std::vector<const ParamBlock<T>*> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(&b);
  return out;
}

template <typename T>
void Mlp<T>::copy_values_from(const Mlp& other) {
  if (blocks_.size() != other.blocks_.size())
    throw ContractError("mlp copy: mismatched block count");
  for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i].set_value(other.blocks_[i].value);
}

template <typename T>
void Mlp<T>::ema_from(const Mlp& other, T tau) {
  for (size_t i = 0; i < blocks_.size(); ++i) {
    auto& dst = blocks_[i].value;
    const auto& src = other.blocks_[i].value;
    for (size_t k = 0; k < dst.size(); ++k)
      dst.data[k] = (T(1) - tau) * dst.data[k] + tau * src.data[k];
    ++blocks_[i].version;
  }
}

template class Mlp<float>;
template class Mlp<double>;

}  // namespace dcwm
