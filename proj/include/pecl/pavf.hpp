#ifndef PECL_PAVF_HPP
#define PECL_PAVF_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "pecl/error.hpp"
#include "pecl/nn.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

// Which axis of the correlation matrix gets normalized before it multiplies
// the feature rows. `summation` makes each weight vector a distribution over
// the positions being aggregated; `column` is the transposed alternative.
enum class PavfSoftmaxAxis { summation, column };

// One fusion module: projections to the shared low-dimensional space, the
// bilinear correlation weight, and the fusion head. All trainable.
template <typename T>
struct PavfParams {
  Tensor<T> proj_v_w, proj_v_b;  // [D x D'], [D']
  Tensor<T> proj_a_w, proj_a_b;  // [D x D'], [D']
  Tensor<T> w_p;                 // [D' x D']
  Tensor<T> fuse_w, fuse_b;      // [2D' x D''], [D'']
  Tensor<T> ln_g, ln_b;          // [D'']
  PavfSoftmaxAxis axis = PavfSoftmaxAxis::summation;
};

template <typename T>
std::pair<Tensor<T>, Tensor<T>> pavf_project(const Tensor<T>& xv,
                                             const Tensor<T>& xa,
                                             const PavfParams<T>& p) {
  return {add_rows(matmul(xv, p.proj_v_w), p.proj_v_b),
          add_rows(matmul(xa, p.proj_a_w), p.proj_a_b)};
}

// P[s][t] scores visual position s against audio position t. Inputs are the
// full-width features; projection happens inside.
template <typename T>
Tensor<T> crossmodal_correlation(const Tensor<T>& xv, const Tensor<T>& xa,
                                 const PavfParams<T>& p) {
  if (xv.dim(0) != xa.dim(0)) {
    throw ShapeError("crossmodal_correlation: sequence lengths differ, " +
                     shape_str(xv.shape()) + " vs " + shape_str(xa.shape()));
  }
  auto [v, a] = pavf_project(xv, xa, p);
  return matmul(matmul(v, p.w_p), transpose(a));
}

// Bidirectional attention with residuals over the projected features.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> crossmodal_attend(const Tensor<T>& xv,
                                                  const Tensor<T>& xa,
                                                  const Tensor<T>& corr,
                                                  PavfSoftmaxAxis axis) {
  const std::size_t ax = axis == PavfSoftmaxAxis::summation ? 1 : 0;
  auto av = softmax(corr, ax);
  auto aa = softmax(transpose(corr), ax);
  return {add(matmul(av, xv), xv), add(matmul(aa, xa), xa)};
}

// relu(LN(linear(concat))): [L x D'] x 2 -> [L x D''].
template <typename T>
Tensor<T> fusion_head(const Tensor<T>& xv_att, const Tensor<T>& xa_att,
                      const PavfParams<T>& p) {
  auto cat = concat(std::vector<Tensor<T>>{xv_att, xa_att}, 1);
  auto lin = add_rows(matmul(cat, p.fuse_w), p.fuse_b);
  return relu(layer_norm(lin, p.ln_g, p.ln_b, static_cast<T>(kLayerNormEps)));
}

template <typename T>
Tensor<T> pavf_forward(const Tensor<T>& xv, const Tensor<T>& xa,
                       const PavfParams<T>& p) {
  auto [v, a] = pavf_project(xv, xa, p);
  auto corr = matmul(matmul(v, p.w_p), transpose(a));
  auto [vt, at] = crossmodal_attend(v, a, corr, p.axis);
  return fusion_head(vt, at, p);
}

}  // namespace pecl

#endif  // PECL_PAVF_HPP
