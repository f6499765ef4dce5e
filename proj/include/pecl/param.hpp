#ifndef PECL_PARAM_HPP
#define PECL_PARAM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pecl/error.hpp"
#include "pecl/rng.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

// Reporting group a parameter belongs to. `backbone` covers everything frozen
// (tokenizers, positional tables, MHSA/FFN/LN); the other groups are the
// trainable budget.
enum class ParamGroup { backbone, adapter, norm, pavf, classifier };

inline const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::backbone: return "backbone";
    case ParamGroup::adapter: return "adapter";
    case ParamGroup::norm: return "an";
    case ParamGroup::pavf: return "pavf";
    case ParamGroup::classifier: return "classifier";
  }
  return "?";
}

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = false;
  ParamGroup group = ParamGroup::backbone;
};

// Insertion-ordered registry; the order fixes optimizer traversal and
// checkpoint layout.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(std::string name, Tensor<T> t, bool trainable,
                    ParamGroup group) {
    if (index_.count(name)) {
      throw ValueError("parameter registered twice: " + name);
    }
    t.set_requires_grad(trainable);
    index_[name] = params_.size();
    params_.push_back(Parameter<T>{std::move(name), std::move(t), trainable, group});
    return params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  std::vector<Parameter<T>>& all() { return params_; }
  const std::vector<Parameter<T>>& all() const { return params_; }

  std::vector<Parameter<T>*> trainable() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_)
      if (p.trainable) out.push_back(&p);
    return out;
  }

  std::size_t scalar_count(bool trainable_only = false) const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (!trainable_only || p.trainable) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_)
      if (p.trainable) p.value.zero_grad();
  }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// He-style uniform fill: U(-sqrt(6/fan_in), sqrt(6/fan_in)). Draws go through
// double so f32 and f64 builds see the same underlying stream.
template <typename T>
void fill_he_uniform(Tensor<T>& t, Rng& rng, std::size_t fan_in) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double mean, double stddev) {
  for (auto& v : t.data()) v = static_cast<T>(rng.normal(mean, stddev));
}

}  // namespace pecl

#endif  // PECL_PARAM_HPP
