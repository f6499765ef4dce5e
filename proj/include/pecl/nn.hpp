#ifndef PECL_NN_HPP
#define PECL_NN_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "pecl/error.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

inline constexpr double kLayerNormEps = 1e-5;

// Attention logit scaling. `full_dim` divides by sqrt(D) (the convention the
// target architecture trains with); `per_head` is the usual sqrt(D/N).
enum class AttnScale { full_dim, per_head };

template <typename T>
struct MhsaWeights {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;  // all projections [D x D], biases [D]
};

namespace detail {

template <typename T>
inline T attn_scale_factor(std::size_t dim, std::size_t heads, AttnScale sc) {
  const double d = sc == AttnScale::full_dim
                       ? static_cast<double>(dim)
                       : static_cast<double>(dim) / static_cast<double>(heads);
  return static_cast<T>(1.0 / std::sqrt(d));
}

}  // namespace detail

// Multi-head self attention on x: [L x D]. D must split evenly across heads.
template <typename T>
Tensor<T> mhsa(const Tensor<T>& x, const MhsaWeights<T>& w, std::size_t heads,
               AttnScale sc) {
  check_rank2(x, "mhsa");
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("mhsa: dim " + std::to_string(d) +
                      " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const T inv = detail::attn_scale_factor<T>(d, heads, sc);

  auto q = add_rows(matmul(x, w.wq), w.bq);
  auto k = add_rows(matmul(x, w.wk), w.bk);
  auto v = add_rows(matmul(x, w.wv), w.bv);

  std::vector<Tensor<T>> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    auto vh = slice_cols(v, h * dh, dh);
    auto logits = scale(matmul(qh, transpose(kh)), inv);
    head_out.push_back(matmul(softmax(logits, 1), vh));
  }
  auto cat = heads == 1 ? head_out[0] : concat(head_out, 1);
  return add_rows(matmul(cat, w.wo), w.bo);
}

// Per-head attention probability matrices, for inspection and tests.
template <typename T>
std::vector<Tensor<T>> mhsa_attention(const Tensor<T>& x,
                                      const MhsaWeights<T>& w,
                                      std::size_t heads, AttnScale sc) {
  check_rank2(x, "mhsa");
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("mhsa: dim " + std::to_string(d) +
                      " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const T inv = detail::attn_scale_factor<T>(d, heads, sc);
  auto q = add_rows(matmul(x, w.wq), w.bq);
  auto k = add_rows(matmul(x, w.wk), w.bk);
  std::vector<Tensor<T>> probs;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    probs.push_back(softmax(scale(matmul(qh, transpose(kh)), inv), 1));
  }
  return probs;
}

enum class Act { gelu, relu, identity };

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Act act) {
  switch (act) {
    case Act::gelu: return gelu(x);
    case Act::relu: return relu(x);
    case Act::identity: return x;
  }
  throw ValueError("activate: unknown activation");
}

template <typename T>
struct FfnWeights {
  Tensor<T> w1, b1, w2, b2;  // [D x H], [H], [H x D], [D]
  Act act = Act::gelu;
};

// Row-wise two-layer MLP: act(x w1 + b1) w2 + b2.
template <typename T>
Tensor<T> ffn(const Tensor<T>& x, const FfnWeights<T>& w) {
  return add_rows(matmul(activate(add_rows(matmul(x, w.w1), w.b1), w.act), w.w2),
                  w.b2);
}

}  // namespace pecl

#endif  // PECL_NN_HPP
