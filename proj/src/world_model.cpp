#include "dcwm/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
WorldModel<T>::WorldModel(WorldModelConfig cfg, Rng& rng)
    : cfg_(std::move(cfg)),
      cb_(cfg_.fsq_levels),
      encoder_("enc", {cfg_.obs_dim, cfg_.encoder_hidden, cfg_.latent_dim * cb_.channels()}),
      dynamics_("dyn", {cfg_.latent_dim * cb_.channels() + cfg_.act_dim, cfg_.mlp_hidden,
                        cfg_.latent_dim * cb_.size()}),
      reward_("rew", {encoded_width() + cfg_.act_dim, cfg_.mlp_hidden, 1}) {
  encoder_.init(rng);
  dynamics_.init(rng);
  reward_.init(rng);
}

template <typename T>
Mat<T> WorldModel<T>::encode_codes(const Mat<T>& obs) const {
  Mat<T> pre = encoder_.eval(obs);
  const int b = cb_.channels();
  for (int r = 0; r < pre.rows; ++r) {
    T* row = pre.row(r);
    for (int c = 0; c < pre.cols; ++c) row[c] = cb_.quantize_scalar(row[c], c % b);
  }
  return pre;
}

template <typename T>
LatentCode<T> WorldModel<T>::encode(const std::vector<T>& obs) const {
  Mat<T> m(1, static_cast<int>(obs.size()));
  m.data = obs;
  Mat<T> codes = encode_codes(m);
  LatentCode<T> out;
  const int b = cb_.channels();
  out.symbols = Mat<T>(cfg_.latent_dim, b);
  out.symbols.data = codes.data;
  out.indices = indices_of_batch(cb_, codes, cfg_.latent_dim);
  return out;
}

template <typename T>
Mat<T> WorldModel<T>::dynamics_logits(const Mat<T>& codes, const Mat<T>& actions) const {
  Mat<T> in(codes.rows, codes.cols + actions.cols);
  for (int r = 0; r < codes.rows; ++r) {
    T* row = in.row(r);
    std::copy(codes.row(r), codes.row(r) + codes.cols, row);
    std::copy(actions.row(r), actions.row(r) + actions.cols, row + codes.cols);
  }
  return dynamics_.eval(in);
}

template <typename T>
DynamicsDistribution<T> WorldModel<T>::dynamics_forward(const LatentCode<T>& code,
                                                        const std::vector<T>& action) const {
  Mat<T> codes(1, code_width());
  codes.data = code.symbols.data;
  Mat<T> act(1, static_cast<int>(action.size()));
  act.data = action;
  Mat<T> logits = dynamics_logits(codes, act);

  DynamicsDistribution<T> out;
  const int K = cb_.size();
  out.logits = Mat<T>(cfg_.latent_dim, K);
  out.logits.data = logits.data;
  out.probs = Mat<T>(cfg_.latent_dim, K);
  for (int d = 0; d < cfg_.latent_dim; ++d) {
    const T* z = out.logits.row(d);
    T* p = out.probs.row(d);
    T mx = z[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
    T sum = 0;
    for (int k = 0; k < K; ++k) {
      p[k] = std::exp(z[k] - mx);
      sum += p[k];
    }
    for (int k = 0; k < K; ++k) p[k] /= sum;
  }
  return out;
}

template <typename T>
Mat<T> WorldModel<T>::reward_predict(const Mat<T>& encoded, const Mat<T>& actions) const {
  Mat<T> in(encoded.rows, encoded.cols + actions.cols);
  for (int r = 0; r < encoded.rows; ++r) {
    T* row = in.row(r);
    std::copy(encoded.row(r), encoded.row(r) + encoded.cols, row);
    std::copy(actions.row(r), actions.row(r) + actions.cols, row + encoded.cols);
  }
  return reward_.eval(in);
}

template <typename T>
RolloutTrace<T> WorldModel<T>::build_loss(const WmBatch<T>& batch, Rng* rng,
                                          const std::vector<Mat<T>>* frozen_noise,
                                          bool soft_forward) {
  const int H = static_cast<int>(batch.actions.size());
  if (static_cast<int>(batch.obs.size()) != H + 1)
    throw DimensionError("world model loss: need H+1 observation batches for H actions");
  const int B = batch.obs[0].rows;
  const int d = cfg_.latent_dim;
  const int K = cb_.size();

  RolloutTrace<T> out;
  Graph<T>& g = out.graph;

  auto enc_pre = encoder_.forward(g, g.input(batch.obs[0]));
  auto code = g.fsq_ste(enc_pre, cb_, soft_forward);
  out.codes.push_back(code);

  typename Graph<T>::NodeId total = -1;
  T ce_acc = 0, rew_acc = 0;
  for (int h = 0; h < H; ++h) {
    require_shape(batch.rewards[h], B, 1, "world model loss rewards");
    const T w = static_cast<T>(std::pow(cfg_.discount, h)) / static_cast<T>(B);

    auto act = g.input(batch.actions[h]);
    auto dyn_in = g.concat_cols(code, act);
    auto logits = dynamics_.forward(g, dyn_in);
    out.logits.push_back(logits);

    // stop-gradient targets: encode the next observation off-tape
    Mat<T> target_codes = encode_codes(batch.obs[h + 1]);
    std::vector<int> labels = indices_of_batch(cb_, target_codes, d);
    auto ce = g.softmax_ce(logits, std::move(labels), K);
    auto ce_term = g.scale(g.sum_all(ce), w);
    ce_acc += g.value(ce_term).data[0];

    // reward head; for non-code encodings the input is a detached transform
    typename Graph<T>::NodeId rew_in;
    if (cfg_.encoding == Encoding::kCodes) {
      rew_in = dyn_in;
    } else {
      rew_in = g.concat_cols(g.input(apply_encoding(g.value(code))), act);
    }
    auto pred = reward_.forward(g, rew_in);
    auto rew_term = g.scale(g.sum_all(g.square(g.sub_const(pred, batch.rewards[h]))), w);
    rew_acc += g.value(rew_term).data[0];

    auto step_term = g.add(ce_term, rew_term);
    total = (total < 0) ? step_term : g.add(total, step_term);

    // sample the next latent through the straight-through estimator
    Mat<T> noise(B * d, K);
    if (frozen_noise) {
      noise = (*frozen_noise)[h];
    } else {
      if (!rng) throw ContractError("world model loss: need an rng or frozen noise");
      for (auto& v : noise.data) v = static_cast<T>(rng->gumbel());
    }
    code = g.gumbel_st(logits, cb_, static_cast<T>(cfg_.gs_tau), std::move(noise),
                       soft_forward);
    out.codes.push_back(code);
  }

  out.loss = total;
  out.loss_value = g.value(total).data[0];
  out.ce_value = ce_acc;
  out.reward_value = rew_acc;
  if (!std::isfinite(static_cast<double>(out.loss_value)))
    throw NumericalError("world model loss is not finite");
  return out;
}

template <typename T>
std::vector<ParamBlock<T>*> WorldModel<T>::dynamics_params() {
  std::vector<ParamBlock<T>*> out = dynamics_.params();
  for (auto* p : reward_.params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<ParamBlock<T>*> WorldModel<T>::all_params() {
  std::vector<ParamBlock<T>*> out = encoder_.params();
  for (auto* p : dynamics_params()) out.push_back(p);
  return out;
}

template <typename T>
Mat<T> expected_code(const Codebook<T>& cb, const Mat<T>& probs, int batch, int latent_dim) {
  const int b = cb.channels();
  require_shape(probs, batch * latent_dim, cb.size(), "expected_code probs");
  Mat<T> flat(batch * latent_dim, b);
  gemm<T>(false, false, T(1), probs, cb.rows(), T(0), flat);
  Mat<T> out(batch, latent_dim * b);
  out.data = std::move(flat.data);
  return out;
}

template <typename T>
LatentCode<T> gumbel_st_sample(const Codebook<T>& cb, const DynamicsDistribution<T>& dist,
                               T tau, Rng& rng) {
  const int d = dist.logits.rows;
  const int K = dist.logits.cols;
  LatentCode<T> out;
  out.symbols = Mat<T>(d, cb.channels());
  out.indices.resize(d);
  for (int i = 0; i < d; ++i) {
    const T* z = dist.logits.row(i);
    int arg = 0;
    T best = -std::numeric_limits<T>::infinity();
    for (int k = 0; k < K; ++k) {
      const T v = (z[k] + static_cast<T>(rng.gumbel())) / tau;
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    out.indices[i] = arg;
    const T* code = cb.code(arg);
    std::copy(code, code + cb.channels(), out.symbols.row(i));
  }
  return out;
}

template class WorldModel<float>;
template class WorldModel<double>;
template Mat<float> expected_code<float>(const Codebook<float>&, const Mat<float>&, int, int);
template Mat<double> expected_code<double>(const Codebook<double>&, const Mat<double>&, int, int);
template LatentCode<float> gumbel_st_sample<float>(const Codebook<float>&, const DynamicsDistribution<float>&, float, Rng&);
template LatentCode<double> gumbel_st_sample<double>(const Codebook<double>&, const DynamicsDistribution<double>&, double, Rng&);

}  // namespace dcwm
