#ifndef PECL_GRAD_CHECK_HPP
#define PECL_GRAD_CHECK_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "pecl/param.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t count = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double eps = 0.0;
  double tol = 0.0;
  bool pass = true;

  std::string to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(44) << "parameter" << std::setw(14)
       << "max_rel_err" << "status\n";
    for (const auto& e : entries) {
      os << std::left << std::setw(44) << e.name << std::setw(14)
         << std::scientific << std::setprecision(3) << e.max_rel_err
         << (e.pass ? "ok" : "FAIL") << "\n";
    }
    os << (pass ? "gradient check passed" : "gradient check FAILED")
       << " (eps=" << std::scientific << std::setprecision(1) << eps
       << ", tol=" << tol << ")\n";
    return os.str();
  }
};

// Central-difference verification of reverse-mode gradients. `f` evaluates
// the scalar objective from the current parameter values; it is re-run with
// each scalar nudged by +/-eps. Relative error uses a small-magnitude floor
// so finite-difference roundoff on near-zero gradients does not register as
// failure. 64-bit only: truncation is O(eps^2) and roundoff O(1e-16/eps),
// both far below tol at eps=1e-5.
inline double grad_rel_err(double analytic, double numeric) {
  const double denom = std::max(1e-3, std::abs(analytic) + std::abs(numeric));
  return std::abs(analytic - numeric) / denom;
}

inline GradCheckReport grad_check(
    const std::function<Tensor<double>()>& f,
    const std::vector<Parameter<double>*>& params, double eps = 1e-5,
    double tol = 1e-4) {
  GradCheckReport report;
  report.eps = eps;
  report.tol = tol;

  for (Parameter<double>* p : params) p->value.zero_grad();
  Tensor<double> loss = f();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter<double>* p : params) {
    if (!p->trainable) {
      throw ValueError("grad_check: parameter " + p->name + " is frozen");
    }
    std::vector<double> g = p->value.grad();
    if (g.empty()) g.assign(p->value.size(), 0.0);
    analytic.push_back(std::move(g));
  }

  NoGradGuard ng;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>* p = params[pi];
    GradCheckEntry entry;
    entry.name = p->name;
    entry.count = p->value.size();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + eps;
      const double up = f().item();
      p->value.data()[i] = orig - eps;
      const double down = f().item();
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double rel = grad_rel_err(analytic[pi][i], numeric);
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
      }
    }
    entry.pass = entry.max_rel_err <= tol;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pecl

#endif  // PECL_GRAD_CHECK_HPP
