#include "dcwm/fsq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
Codebook<T>::Codebook(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ConfigError("codebook: empty level list");
  for (int L : levels_)
    if (L < 2) throw ConfigError("codebook: each channel needs >= 2 levels");

  const int b = channels();
  half_.resize(b);
  lo_.resize(b);
  for (int j = 0; j < b; ++j) {
    half_[j] = levels_[j] / 2;
    lo_[j] = -half_[j] + (levels_[j] % 2 == 0 ? 1 : 0);
  }

  size_ = 1;
  for (int L : levels_) size_ *= L;
  radix_.assign(b, 1);
  int place = size_;
  for (int j = 0; j < b; ++j) {
    place /= levels_[j];
    radix_[j] = place;
  }

  rows_ = Mat<T>(size_, b);
  for (int i = 0; i < size_; ++i) {
    int rem = i;
    for (int j = 0; j < b; ++j) {
      const int digit = rem / radix_[j];
      rem %= radix_[j];
      rows_.at(i, j) = static_cast<T>(lo_[j] + digit) / static_cast<T>(half_[j]);
    }
  }
}

template <typename T>
T Codebook<T>::quantize_scalar(T x, int channel) const {
  const T half = static_cast<T>(half_[channel]);
  int k = static_cast<int>(std::lround(static_cast<double>(half * std::tanh(x))));
  k = std::clamp(k, lo_[channel], half_[channel]);
  return static_cast<T>(k) / half;
}

template <typename T>
int Codebook<T>::digit_of(T symbol, int channel) const {
  const T half = static_cast<T>(half_[channel]);
  const double scaled = static_cast<double>(symbol) * static_cast<double>(half);
  const int k = static_cast<int>(std::lround(scaled));
  if (k < lo_[channel] || k > half_[channel] ||
      static_cast<T>(k) / half != symbol)
    throw ContractError("codebook: value " + std::to_string(static_cast<double>(symbol)) +
                        " is not a valid symbol for channel " + std::to_string(channel));
  return k - lo_[channel];
}

template <typename T>
int Codebook<T>::nearest_digit(T value, int channel) const {
  const T half = static_cast<T>(half_[channel]);
  int k = static_cast<int>(std::lround(static_cast<double>(value * half)));
  k = std::clamp(k, lo_[channel], half_[channel]);
  return k - lo_[channel];
}

template <typename T>
int Codebook<T>::index_of(const T* code) const {
  int idx = 0;
  for (int j = 0; j < channels(); ++j) idx += digit_of(code[j], j) * radix_[j];
  return idx;
}

template <typename T>
int Codebook<T>::nearest_index(const T* code) const {
  int idx = 0;
  for (int j = 0; j < channels(); ++j) idx += nearest_digit(code[j], j) * radix_[j];
  return idx;
}

template <typename T>
std::string Codebook<T>::to_csv() const {
  std::string out = "index";
  for (int j = 0; j < channels(); ++j) out += ",c" + std::to_string(j);
  out += "\n";
  char buf[64];
  for (int i = 0; i < size_; ++i) {
    out += std::to_string(i);
    for (int j = 0; j < channels(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", static_cast<double>(rows_.at(i, j)));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

Encoding parse_encoding(const std::string& name) {
  if (name == "codes") return Encoding::kCodes;
  if (name == "one_hot") return Encoding::kOneHot;
  if (name == "label") return Encoding::kLabel;
  throw ConfigError("unknown encoding '" + name + "' (codes|one_hot|label)");
}

const char* encoding_name(Encoding e) {
  switch (e) {
    case Encoding::kCodes: return "codes";
    case Encoding::kOneHot: return "one_hot";
    case Encoding::kLabel: return "label";
  }
  return "?";
}

int encoding_width(Encoding e, int codebook_size, int channels) {
  switch (e) {
    case Encoding::kCodes: return channels;
    case Encoding::kOneHot: return codebook_size;
    case Encoding::kLabel: return 1;
  }
  return 0;
}

template <typename T>
std::vector<int> indices_of_batch(const Codebook<T>& cb, const Mat<T>& codes, int latent_dim) {
  const int b = cb.channels();
  if (codes.cols != latent_dim * b)
    throw DimensionError("indices_of_batch: codes width " + std::to_string(codes.cols) +
                         " != latent_dim*channels");
  std::vector<int> out(static_cast<size_t>(codes.rows) * latent_dim);
  for (int r = 0; r < codes.rows; ++r)
    for (int d = 0; d < latent_dim; ++d)
      out[static_cast<size_t>(r) * latent_dim + d] = cb.index_of(codes.row(r) + d * b);
  return out;
}

template <typename T>
std::vector<int> nearest_indices_of_batch(const Codebook<T>& cb, const Mat<T>& codes,
                                          int latent_dim) {
  const int b = cb.channels();
  std::vector<int> out(static_cast<size_t>(codes.rows) * latent_dim);
  for (int r = 0; r < codes.rows; ++r)
    for (int d = 0; d < latent_dim; ++d)
      out[static_cast<size_t>(r) * latent_dim + d] = cb.nearest_index(codes.row(r) + d * b);
  return out;
}

template <typename T>
Mat<T> one_hot_encode(const Codebook<T>& cb, const std::vector<int>& indices, int batch,
                      int latent_dim) {
  Mat<T> out(batch, latent_dim * cb.size());
  for (int r = 0; r < batch; ++r)
    for (int d = 0; d < latent_dim; ++d) {
      const int idx = indices[static_cast<size_t>(r) * latent_dim + d];
      out.at(r, d * cb.size() + idx) = T(1);
    }
  return out;
}

template <typename T>
Mat<T> label_encode(const Codebook<T>& cb, const std::vector<int>& indices, int batch,
                    int latent_dim) {
  Mat<T> out(batch, latent_dim);
  const T denom = static_cast<T>(cb.size() - 1);
  for (int r = 0; r < batch; ++r)
    for (int d = 0; d < latent_dim; ++d) {
      // 1-based label idx+1, mapped so label 1 -> -1 and label |C| -> +1.
      const T idx = static_cast<T>(indices[static_cast<size_t>(r) * latent_dim + d]);
      out.at(r, d) = T(2) * idx / denom - T(1);
    }
  return out;
}

template <typename T>
Mat<T> encode_variant(const Codebook<T>& cb, Encoding e, const Mat<T>& codes, int latent_dim) {
  if (e == Encoding::kCodes) return codes;
  const std::vector<int> idx = nearest_indices_of_batch(cb, codes, latent_dim);
  if (e == Encoding::kOneHot) return one_hot_encode(cb, idx, codes.rows, latent_dim);
  return label_encode(cb, idx, codes.rows, latent_dim);
}

double active_code_fraction(const std::vector<int>& indices, int codebook_size) {
  std::vector<char> seen(codebook_size, 0);
  for (int i : indices) {
    if (i < 0 || i >= codebook_size)
      throw ContractError("active_code_fraction: index out of range");
    seen[i] = 1;
  }
  int distinct = 0;
  for (char c : seen) distinct += c;
  return static_cast<double>(distinct) / static_cast<double>(codebook_size);
}

template <typename T>
double active_code_fraction(const Codebook<T>& cb, const Mat<T>& codes, int latent_dim) {
  return active_code_fraction(nearest_indices_of_batch(cb, codes, latent_dim), cb.size());
}

template class Codebook<float>;
template class Codebook<double>;
template std::vector<int> indices_of_batch<float>(const Codebook<float>&, const Mat<float>&, int);
template std::vector<int> indices_of_batch<double>(const Codebook<double>&, const Mat<double>&, int);
template std::vector<int> nearest_indices_of_batch<float>(const Codebook<float>&, const Mat<float>&, int);
template std::vector<int> nearest_indices_of_batch<double>(const Codebook<double>&, const Mat<double>&, int);
template Mat<float> one_hot_encode<float>(const Codebook<float>&, const std::vector<int>&, int, int);
template Mat<double> one_hot_encode<double>(const Codebook<double>&, const std::vector<int>&, int, int);
template Mat<float> label_encode<float>(const Codebook<float>&, const std::vector<int>&, int, int);
template Mat<double> label_encode<double>(const Codebook<double>&, const std::vector<int>&, int, int);
template Mat<float> encode_variant<float>(const Codebook<float>&, Encoding, const Mat<float>&, int);
template Mat<double> encode_variant<double>(const Codebook<double>&, Encoding, const Mat<double>&, int);
template double active_code_fraction<float>(const Codebook<float>&, const Mat<float>&, int);
template double active_code_fraction<double>(const Codebook<double>&, const Mat<double>&, int);

}  // namespace dcwm
