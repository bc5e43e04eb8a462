#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "txl/rng.hpp"
#include "txl/tensor.hpp"

namespace testsupport {

inline txl::Tensor random_tensor(std::vector<int> shape, txl::Rng& rng, bool requires_grad = false,
                                 double scale = 1.0) {
  txl::Tensor t = txl::Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : *t.data) v = rng.normal() * scale;
  return t;
}

struct GradCheckOptions {
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_floor = 1e-6;
  int max_elements = -1;  // -1 = every element
};

// Central-difference oracle: rebuilds the scalar loss from the current leaf
// values, perturbs one leaf element at a time, and compares the analytic
// gradient left by backward() against (f(x+h) - f(x-h)) / 2h.
inline void check_gradient(txl::Tensor& leaf, const std::function<txl::Tensor()>& loss_fn,
                           const GradCheckOptions& opt = {}) {
  REQUIRE(leaf.requires_grad);
  leaf.zero_grad();
  {
    txl::Tensor loss = loss_fn();
    txl::backward(loss);
  }
  const std::vector<double> analytic = *leaf.grad;

  const std::int64_t total = leaf.numel();
  const std::int64_t checked =
      opt.max_elements > 0 ? std::min<std::int64_t>(opt.max_elements, total) : total;
  for (std::int64_t i = 0; i < checked; ++i) {
    const double saved = (*leaf.data)[i];
    double plus, minus;
    {
      txl::NoGradGuard no_grad;
      (*leaf.data)[i] = saved + opt.step;
      plus = loss_fn().value();
      (*leaf.data)[i] = saved - opt.step;
      minus = loss_fn().value();
      (*leaf.data)[i] = saved;
    }
    const double numeric = (plus - minus) / (2.0 * opt.step);
    const double err = std::abs(analytic[i] - numeric);
    const double tol = std::max(opt.abs_floor, opt.rel_tol * std::abs(numeric));
    CAPTURE(i);
    CAPTURE(analytic[i]);
    CAPTURE(numeric);
    CHECK(err <= tol);
  }
}

}  // namespace testsupport
