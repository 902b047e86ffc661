#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "redr/autodiff/tape.hpp"

namespace redr::ad {

/// Step-wise exponential decay: the rate stays at `initial` until
/// `start_step`, then is multiplied by `decay` at start_step and again every
/// `every` steps after it.
struct LearningRateSchedule {
  double initial = 1.0;
  double decay = 0.95;
  std::int64_t every = 5000;
  std::int64_t start_step = 15000;

  double at(std::int64_t step) const {
    if (step < start_step || every <= 0) return initial;
    const std::int64_t decays = 1 + (step - start_step) / every;
    return initial * std::pow(decay, static_cast<double>(decays));
  }
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
template <typename Scalar>
Scalar clip_grad_norm(std::span<Parameter<Scalar>* const> params, Scalar max_norm) {
  Scalar sq = 0;
  for (const Parameter<Scalar>* p : params) sq += p->grad.squaredNorm();
  const Scalar norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const Scalar factor = max_norm / norm;
    for (Parameter<Scalar>* p : params) p->grad *= factor;
  }
  return norm;
}

/// param <- param - lr * grad. Fails before touching any parameter if a
/// gradient holds NaN or Inf.
template <typename Scalar>
void sgd_step(std::span<Parameter<Scalar>* const> params, Scalar lr) {
  if (!(lr > 0)) throw ConfigError("sgd_step: learning rate must be positive");
  for (const Parameter<Scalar>* p : params) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
      throw ShapeError("sgd_step: gradient of " + p->name + " has shape " +
                       shape_string(p->grad.rows(), p->grad.cols()) + ", parameter has " +
                       shape_string(p->value.rows(), p->value.cols()));
    }
    if (!p->grad.allFinite()) throw NumericError("sgd_step: non-finite gradient for " + p->name);
  }
  for (Parameter<Scalar>* p : params) {
    if (p->requires_grad) p->value -= lr * p->grad;
  }
}

}  // namespace redr::ad
