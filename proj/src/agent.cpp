#include "dcwm/agent.hpp"

#include <algorithm>
#include <cmath>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
static Mat<T> concat_mats(const Mat<T>& a, const Mat<T>& b) {
  Mat<T> out(a.rows, a.cols + b.cols);
  for (int r = 0; r < a.rows; ++r) {
    T* row = out.row(r);
    std::copy(a.row(r), a.row(r) + a.cols, row);
    std::copy(b.row(r), b.row(r) + b.cols, row + a.cols);
  }
  return out;
}

template <typename T>
Agent<T>::Agent(int enc_width, int act_dim, const std::vector<int>& hidden, TdConfig cfg,
                const std::vector<T>& act_lo, const std::vector<T>& act_hi, Rng& rng)
    : cfg_(cfg), act_dim_(act_dim), lo_(act_lo), hi_(act_hi),
      scale_(1, act_dim), shift_(1, act_dim),
      policy_("pi", {enc_width, hidden, act_dim}),
      target_policy_("pi_bar", {enc_width, hidden, act_dim}) {
  if (static_cast<int>(lo_.size()) != act_dim || static_cast<int>(hi_.size()) != act_dim)
    throw ConfigError("agent: action bounds width != act_dim");
  for (int i = 0; i < act_dim; ++i) {
    scale_.data[i] = (hi_[i] - lo_[i]) / T(2);
    shift_.data[i] = (hi_[i] + lo_[i]) / T(2);
  }
  critics_.reserve(cfg_.num_q);
  target_critics_.reserve(cfg_.num_q);
  for (int k = 0; k < cfg_.num_q; ++k) {
    critics_.emplace_back("q" + std::to_string(k), MlpSpec{enc_width + act_dim, hidden, 1});
    critics_[k].init(rng);
    target_critics_.emplace_back("qbar" + std::to_string(k),
                                 MlpSpec{enc_width + act_dim, hidden, 1});
    target_critics_[k].copy_values_from(critics_[k]);
  }
  policy_.init(rng);
  target_policy_.copy_values_from(policy_);
}

template <typename T>
Mat<T> Agent<T>::squash(const Mat<T>& raw) const {
  Mat<T> out = raw;
  for (int r = 0; r < out.rows; ++r) {
    T* row = out.row(r);
    for (int c = 0; c < out.cols; ++c)
      row[c] = std::tanh(row[c]) * scale_.data[c] + shift_.data[c];
  }
  return out;
}

template <typename T>
void Agent<T>::clip_to_bounds(Mat<T>& actions) const {
  for (int r = 0; r < actions.rows; ++r) {
    T* row = actions.row(r);
    for (int c = 0; c < actions.cols; ++c) row[c] = std::clamp(row[c], lo_[c], hi_[c]);
  }
}

template <typename T>
Mat<T> Agent<T>::policy_actions(const Mat<T>& enc) const {
  return squash(policy_.eval(enc));
}

template <typename T>
Mat<T> Agent<T>::target_policy_actions(const Mat<T>& enc) const {
  return squash(target_policy_.eval(enc));
}

template <typename T>
Mat<T> Agent<T>::critic_value(int k, const Mat<T>& enc, const Mat<T>& actions) const {
  return critics_[k].eval(concat_mats(enc, actions));
}

template <typename T>
Mat<T> Agent<T>::critic_mean(const Mat<T>& enc, const Mat<T>& actions) const {
  const Mat<T> in = concat_mats(enc, actions);
  Mat<T> acc(in.rows, 1);
  for (int k = 0; k < cfg_.num_q; ++k) {
    Mat<T> v = critics_[k].eval(in);
    for (int r = 0; r < in.rows; ++r) acc.data[r] += v.data[r];
  }
  for (auto& v : acc.data) v /= static_cast<T>(cfg_.num_q);
  return acc;
}

template <typename T>
Mat<T> Agent<T>::td_target(const Mat<T>& nstep_reward, const Mat<T>& next_enc,
                           Rng& rng) const {
  const int B = next_enc.rows;
  require_shape(nstep_reward, B, 1, "td_target rewards");

  // smoothed target action
  Mat<T> next_act = target_policy_actions(next_enc);
  for (int r = 0; r < B; ++r) {
    T* row = next_act.row(r);
    for (int c = 0; c < act_dim_; ++c) {
      const T eps = static_cast<T>(std::clamp(rng.normal(0.0, cfg_.policy_noise),
                                              -cfg_.noise_clip, cfg_.noise_clip));
      row[c] = std::clamp(row[c] + eps, lo_[c], hi_[c]);
    }
  }

  // min over a fresh subsample of target critics, drawn once per batch
  std::vector<int> picks(cfg_.num_q);
  for (int k = 0; k < cfg_.num_q; ++k) picks[k] = k;
  for (int k = 0; k < cfg_.subsample; ++k) {
    const int j = k + static_cast<int>(rng.below(cfg_.num_q - k));
    std::swap(picks[k], picks[j]);
  }

  const Mat<T> in = concat_mats(next_enc, next_act);
  Mat<T> mn(B, 1, std::numeric_limits<T>::infinity());
  for (int k = 0; k < cfg_.subsample; ++k) {
    Mat<T> v = target_critics_[picks[k]].eval(in);
    for (int r = 0; r < B; ++r) mn.data[r] = std::min(mn.data[r], v.data[r]);
  }

  const T gn = static_cast<T>(std::pow(cfg_.discount, cfg_.nstep));
  Mat<T> y(B, 1);
  for (int r = 0; r < B; ++r) y.data[r] = nstep_reward.data[r] + gn * mn.data[r];
  if (!y.all_finite()) throw NumericalError("td_target: non-finite target value");
  return y;
}

template <typename T>
LossTape<T> Agent<T>::critic_loss(const Mat<T>& enc, const Mat<T>& actions,
                                  const Mat<T>& target) {
  const int B = enc.rows;
  require_shape(target, B, 1, "critic_loss target");
  LossTape<T> out;
  Graph<T>& g = out.graph;
  auto in = g.input(concat_mats(enc, actions));
  typename Graph<T>::NodeId total = -1;
  for (int k = 0; k < cfg_.num_q; ++k) {
    auto q = critics_[k].forward(g, in);
    auto term = g.sum_all(g.square(g.sub_const(q, target)));
    total = (total < 0) ? term : g.add(total, term);
  }
  out.loss = g.scale(total, T(1) / static_cast<T>(B * cfg_.num_q));
  out.value = g.value(out.loss).data[0];
  if (!std::isfinite(static_cast<double>(out.value)))
    throw NumericalError("critic loss is not finite");
  return out;
}

template <typename T>
LossTape<T> Agent<T>::actor_loss(const Mat<T>& enc, Rng& rng) {
  const int B = enc.rows;
  LossTape<T> out;
  Graph<T>& g = out.graph;
  auto enc_in = g.input(enc);
  auto raw = policy_.forward(g, enc_in);
  auto act = g.col_affine(g.tanh_(raw), scale_, shift_);
  auto q_in = g.concat_cols(enc_in, act);

  std::vector<int> picks(cfg_.num_q);
  for (int k = 0; k < cfg_.num_q; ++k) picks[k] = k;
  for (int k = 0; k < cfg_.subsample; ++k) {
    const int j = k + static_cast<int>(rng.below(cfg_.num_q - k));
    std::swap(picks[k], picks[j]);
  }

  typename Graph<T>::NodeId total = -1;
  for (int k = 0; k < cfg_.subsample; ++k) {
    auto q = critics_[picks[k]].forward(g, q_in, /*frozen=*/true);
    auto s = g.sum_all(q);
    total = (total < 0) ? s : g.add(total, s);
  }
  out.loss = g.scale(total, -T(1) / static_cast<T>(B * cfg_.subsample));
  out.value = g.value(out.loss).data[0];
  if (!std::isfinite(static_cast<double>(out.value)))
    throw NumericalError("actor loss is not finite");
  return out;
}

template <typename T>
void Agent<T>::ema_update() {
  const T tau = static_cast<T>(cfg_.ema_tau);
  for (int k = 0; k < cfg_.num_q; ++k) target_critics_[k].ema_from(critics_[k], tau);
  target_policy_.ema_from(policy_, tau);
}

template <typename T>
std::vector<ParamBlock<T>*> Agent<T>::critic_params() {
  std::vector<ParamBlock<T>*> out;
  for (auto& c : critics_)
    for (auto* p : c.params()) out.push_back(p);
  return out;
}

template class Agent<float>;
template class Agent<double>;

}  // namespace dcwm
