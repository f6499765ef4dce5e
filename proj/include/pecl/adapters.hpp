#ifndef PECL_ADAPTERS_HPP
#define PECL_ADAPTERS_HPP

#include <cstddef>
#include <string>

#include "pecl/error.hpp"
#include "pecl/nn.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

enum class AdapterKind { none, ut, bottleneck };

enum class Placement { parallel_both, parallel_mhsa, parallel_ffn, between };

// Temporal adapter: down-project, conv across the sequence axis, up-project.
// No nonlinearity anywhere; the up-projection (and its bias) start at zero so
// a freshly inserted adapter is exactly the zero function.
template <typename T>
struct UtAdapterWeights {
  Tensor<T> w1, b1;          // [D x r], [r]
  Tensor<T> conv_w, conv_b;  // [r x r x k], [r]; k odd, stride 1, same padding
  Tensor<T> w2, b2;          // [r x D], [D]
  std::size_t kernel = 3;
};

template <typename T>
Tensor<T> ut_adapter(const Tensor<T>& x, const UtAdapterWeights<T>& w) {
  check_rank2(x, "ut_adapter");
  if (w.kernel % 2 == 0) {
    throw ConfigError("ut_adapter: kernel must be odd for same-length output, got " +
                      std::to_string(w.kernel));
  }
  auto down = add_rows(matmul(x, w.w1), w.b1);      // [L x r]
  auto seq = transpose(down);                       // [r x L], channels first
  auto conv = conv1d(seq, w.conv_w, w.conv_b, 1, (w.kernel - 1) / 2);
  return add_rows(matmul(transpose(conv), w.w2), w.b2);
}

// Classic bottleneck adapter: down, gelu, up. Up weights and bias start zero.
template <typename T>
struct BottleneckAdapterWeights {
  Tensor<T> w_down, b_down;  // [D x r], [r]
  Tensor<T> w_up, b_up;      // [r x D], [D]
};

template <typename T>
Tensor<T> bottleneck_adapter(const Tensor<T>& x,
                             const BottleneckAdapterWeights<T>& w) {
  check_rank2(x, "bottleneck_adapter");
  return add_rows(
      matmul(gelu(add_rows(matmul(x, w.w_down), w.b_down)), w.w_up), w.b_up);
}

// Closed-form trainable scalar counts, biases included.
inline std::size_t ut_adapter_param_count(std::size_t d, std::size_t r,
                                          std::size_t k) {
  return (d * r + r) + (r * r * k + r) + (r * d + d);
}

inline std::size_t bottleneck_param_count(std::size_t d, std::size_t r) {
  return (d * r + r) + (r * d + d);
}

}  // namespace pecl

#endif  // PECL_ADAPTERS_HPP
