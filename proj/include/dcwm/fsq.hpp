#pragma once

#include <string>
#include <vector>

#include "dcwm/mat.hpp"

namespace dcwm {

struct FsqConfig {
  std::vector<int> levels;  // quantization levels per channel, e.g. {5, 3}
  int latent_dim = 32;      // number of independent latent dimensions

  int channels() const { return static_cast<int>(levels.size()); }
};

// Finite scalar quantization codebook.
//
// Each latent dimension is a vector of `channels()` bounded scalars.  Channel
// j with L_j levels admits the symbols k / floor(L_j/2) for integer k in
// [lo_j, hi_j]; for odd L_j that is {-half..half}, for even L_j the most
// negative symbol is dropped so the count stays L_j.  A code is one symbol
// per channel; `size()` = prod(L_j) codes total, enumerated in mixed-radix
// order with channel 0 most significant.
template <typename T>
class Codebook {
 public:
  explicit Codebook(std::vector<int> levels);

  int channels() const { return static_cast<int>(levels_.size()); }
  int size() const { return size_; }
  const std::vector<int>& levels() const { return levels_; }

  // size() x channels() matrix of all code vectors, row i = code with index i.
  const Mat<T>& rows() const { return rows_; }
  const T* code(int index) const { return rows_.row(index); }

  // Quantize one pre-activation scalar for a given channel.
  T quantize_scalar(T x, int channel) const;

  // For a quantized symbol, its digit in [0, L_channel).  Throws
  // ContractError if the symbol is not bit-exactly one of the channel's
  // allowed values.
  int digit_of(T symbol, int channel) const;

  // Nearest digit for an arbitrary (possibly non-code) value, used when a
  // probability-weighted code average must be snapped back to an index.
  int nearest_digit(T value, int channel) const;

  // Mixed-radix index of a code row (channels() symbols); exact match
  // required.
  int index_of(const T* code) const;
  int nearest_index(const T* code) const;

  // CSV dump: header then one line per code, "index,c0,c1,...".
  std::string to_csv() const;

 private:
  std::vector<int> levels_;
  std::vector<int> half_;    // floor(L/2)
  std::vector<int> lo_;      // lowest integer symbol numerator
  std::vector<int> radix_;   // place value of each channel in the index
  int size_ = 0;
  Mat<T> rows_;
};

// One encoded observation: latent_dim x channels symbol grid plus the
// per-dimension codebook indices.
template <typename T>
struct LatentCode {
  Mat<T> symbols;            // latent_dim x channels
  std::vector<int> indices;  // latent_dim entries in [0, |C|)
};

// How latent codes are presented to reward / value / policy networks.
// Dynamics always consumes raw code symbols.
enum class Encoding { kCodes, kOneHot, kLabel };

Encoding parse_encoding(const std::string& name);
const char* encoding_name(Encoding e);

// Width of one latent dimension under an encoding.
int encoding_width(Encoding e, int codebook_size, int channels);

// Batched index extraction: codes is B x (d*channels), bit-exact code rows
// required.  Output is B*d indices, row-major.
template <typename T>
std::vector<int> indices_of_batch(const Codebook<T>& cb, const Mat<T>& codes, int latent_dim);

template <typename T>
std::vector<int> nearest_indices_of_batch(const Codebook<T>& cb, const Mat<T>& codes,
                                          int latent_dim);

// Batched encoding transforms (pure functions of the quantized codes; no
// gradient flows through them).
template <typename T>
Mat<T> one_hot_encode(const Codebook<T>& cb, const std::vector<int>& indices, int batch,
                      int latent_dim);

// Labels are the 1-based indices affinely mapped onto [-1, 1].
template <typename T>
Mat<T> label_encode(const Codebook<T>& cb, const std::vector<int>& indices, int batch,
                    int latent_dim);

// Apply an encoding to a batch of code rows (identity for kCodes).
template <typename T>
Mat<T> encode_variant(const Codebook<T>& cb, Encoding e, const Mat<T>& codes, int latent_dim);

// Fraction of distinct codebook entries appearing anywhere in a history of
// code indices.
double active_code_fraction(const std::vector<int>& indices, int codebook_size);

// Convenience overload over a batch of code rows (B x d*channels).
template <typename T>
double active_code_fraction(const Codebook<T>& cb, const Mat<T>& codes, int latent_dim);

}  // namespace dcwm
