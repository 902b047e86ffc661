#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "redr/autodiff/tape.hpp"

namespace redr::ad {

template <typename Scalar>
struct GradCheckReport {
  Scalar max_relative_error = 0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  Scalar worst_analytic = 0;
  Scalar worst_numeric = 0;
  Scalar max_absolute_error = 0;
  std::size_t entries_checked = 0;
  std::size_t entries_above_tolerance = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// over every entry of every leaf. `loss_fn(tape)` must build the loss on the
/// given fresh tape and return it as a 1x1 Var.
///
/// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8). Entries whose
/// relative error exceeds `tolerance` are counted.
template <typename Scalar, typename LossFn>
GradCheckReport<Scalar> grad_check(LossFn&& loss_fn, std::span<Parameter<Scalar>* const> leaves, Scalar epsilon,
                                   Scalar tolerance = Scalar(1e-4)) {
  if (!(epsilon > 0) || epsilon > Scalar(1e-3)) {
    throw ConfigError("grad_check: epsilon must lie in (0, 1e-3]");
  }
  auto evaluate = [&]() -> Scalar {
    Tape<Scalar> tape(false);
    return loss_fn(tape).scalar();
  };

  const Scalar first = evaluate();
  const Scalar second = evaluate();
  if (first != second) throw Error("grad_check: loss function is not deterministic");

  for (Parameter<Scalar>* p : leaves) p->zero_grad();
  {
    Tape<Scalar> tape;
    tape.backward(loss_fn(tape));
  }
  std::vector<Matrix<Scalar>> analytic;
  analytic.reserve(leaves.size());
  for (Parameter<Scalar>* p : leaves) analytic.push_back(p->grad);

  GradCheckReport<Scalar> report;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Parameter<Scalar>& p = *leaves[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      Scalar& entry = p.value.data()[i];
      const Scalar saved = entry;
      entry = saved + epsilon;
      const Scalar plus = evaluate();
      entry = saved - epsilon;
      const Scalar minus = evaluate();
      entry = saved;

      const Scalar numeric = (plus - minus) / (Scalar(2) * epsilon);
      const Scalar a = analytic[k].data()[i];
      const Scalar denom = std::max({std::abs(a), std::abs(numeric), Scalar(1e-8)});
      const Scalar rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      report.max_absolute_error = std::max(report.max_absolute_error, std::abs(a - numeric));
      if (rel > tolerance) ++report.entries_above_tolerance;
      if (rel > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

template <typename Scalar, typename LossFn>
GradCheckReport<Scalar> grad_check(LossFn&& loss_fn, const std::vector<Parameter<Scalar>*>& leaves, Scalar epsilon,
                                   Scalar tolerance = Scalar(1e-4)) {
  return grad_check<Scalar>(std::forward<LossFn>(loss_fn), std::span<Parameter<Scalar>* const>(leaves), epsilon,
                            tolerance);
}

}  // namespace redr::ad
