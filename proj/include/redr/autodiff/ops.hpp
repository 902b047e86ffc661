#pragma once

// Differentiable primitives. Every function records one entry on the tape of
// its first argument and fails fast on shape mismatch or non-finite output.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "redr/autodiff/tape.hpp"

namespace redr::ad {

namespace detail {

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.tape() != b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
}

template <typename Scalar>
[[noreturn]] void shape_mismatch(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) +
                   " vs " + shape_string(b.rows(), b.cols()));
}

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a, b);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) detail::shape_mismatch("matmul", a, b);
  Tape<Scalar>& t = *a.tape();
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", a.value() * b.value(), ng, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) {
  return matmul(a, b);
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record("transpose", a.value().transpose(), t.needs_grad(a),
                  [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) { tp.accumulate(ia, g.transpose()); });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("add", a.value() + b.value(), t.needs_grad(a) || t.needs_grad(b),
                  [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, g);
                  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("sub", a.value() - b.value(), t.needs_grad(a) || t.needs_grad(b),
                  [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, -g);
                  });
}

/// Adds `v` broadcast over `m`: v may be rows x 1 (added to every column),
/// 1 x cols (added to every row) or 1 x 1.
template <typename Scalar>
Var<Scalar> add_broadcast(const Var<Scalar>& m, const Var<Scalar>& v) {
  detail::require_same_tape(m, v, "add_broadcast");
  Matrix<Scalar> out = m.value();
  enum class Mode { kColumn, kRow, kScalar } mode;
  if (v.rows() == 1 && v.cols() == 1) {
    mode = Mode::kScalar;
    out.array() += v.scalar();
  } else if (v.cols() == 1 && v.rows() == m.rows()) {
    mode = Mode::kColumn;
    out.colwise() += v.value().col(0);
  } else if (v.rows() == 1 && v.cols() == m.cols()) {
    mode = Mode::kRow;
    out.rowwise() += v.value().row(0);
  } else {
    detail::shape_mismatch("add_broadcast", m, v);
  }
  Tape<Scalar>& t = *m.tape();
  const std::size_t im = m.id(), iv = v.id();
  return t.record("add_broadcast", std::move(out), t.needs_grad(m) || t.needs_grad(v),
                  [im, iv, mode](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(im, g);
                    if (!tp.needs_grad(iv)) return;
                    switch (mode) {
                      case Mode::kScalar:
                        tp.accumulate(iv, Matrix<Scalar>::Constant(1, 1, g.sum()));
                        break;
                      case Mode::kColumn:
                        tp.accumulate(iv, g.rowwise().sum());
                        break;
                      case Mode::kRow:
                        tp.accumulate(iv, g.colwise().sum());
                        break;
                    }
                  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Var<Scalar> cwise_product(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("cwise_product", a, b);
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("cwise_product", a.value().cwiseProduct(b.value()), t.needs_grad(a) || t.needs_grad(b),
                  [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                    if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                  });
}

/// out[:, j] = m[:, j] * w[j], where w is 1 x cols or cols x 1.
template <typename Scalar>
Var<Scalar> scale_columns(const Var<Scalar>& m, const Var<Scalar>& w) {
  detail::require_same_tape(m, w, "scale_columns");
  if (w.value().size() != m.cols() || (w.rows() != 1 && w.cols() != 1)) detail::shape_mismatch("scale_columns", m, w);
  const auto weights = w.value().reshaped();
  Matrix<Scalar> out = m.value() * weights.asDiagonal();
  Tape<Scalar>& t = *m.tape();
  const std::size_t im = m.id(), iw = w.id();
  return t.record("scale_columns", std::move(out), t.needs_grad(m) || t.needs_grad(w),
                  [im, iw](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    const Matrix<Scalar>& wv = tp.value(iw);
                    if (tp.needs_grad(im)) tp.accumulate(im, g * wv.reshaped().asDiagonal());
                    if (tp.needs_grad(iw)) {
                      Matrix<Scalar> gw = g.cwiseProduct(tp.value(im)).colwise().sum();
                      gw.resize(wv.rows(), wv.cols());
                      tp.accumulate(iw, gw);
                    }
                  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record("scale", a.value() * s, t.needs_grad(a),
                  [ia, s](Tape<Scalar>& tp, const Matrix<Scalar>& g) { tp.accumulate(ia, g * s); });
}

/// 1 - a, elementwise.
template <typename Scalar>
Var<Scalar> one_minus(const Var<Scalar>& a) {
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix<Scalar> out = (Scalar(1) - a.value().array()).matrix();
  return t.record("one_minus", std::move(out), t.needs_grad(a),
                  [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) { tp.accumulate(ia, -g); });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  Tape<Scalar>& t = *a.tape();
  Matrix<Scalar> y = a.value().unaryExpr([](Scalar x) {
    // Split by sign so exp never overflows.
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  });
  const std::size_t ia = a.id();
  Matrix<Scalar> dy = (y.array() * (Scalar(1) - y.array())).matrix();
  return t.record("sigmoid", std::move(y), t.needs_grad(a),
                  [ia, dy = std::move(dy)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, g.cwiseProduct(dy));
                  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  Tape<Scalar>& t = *a.tape();
  Matrix<Scalar> y = a.value().array().tanh().matrix();
  const std::size_t ia = a.id();
  Matrix<Scalar> dy = (Scalar(1) - y.array().square()).matrix();
  return t.record("tanh", std::move(y), t.needs_grad(a),
                  [ia, dy = std::move(dy)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, g.cwiseProduct(dy));
                  });
}

/// Natural log; non-positive inputs raise NumericError.
template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  if ((a.value().array() <= Scalar(0)).any()) throw NumericError("log: non-positive input");
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record("log", a.value().array().log().matrix(), t.needs_grad(a),
                  [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, g.cwiseQuotient(tp.value(ia)));
                  });
}

// ---------------------------------------------------------------------------
// Normalization

/// Softmax applied independently to each column.
template <typename Scalar>
Var<Scalar> softmax_columns(const Var<Scalar>& m) {
  if (m.value().size() == 0) throw ShapeError("softmax_columns: empty input");
  Matrix<Scalar> y = m.value();
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    auto col = y.col(j);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  Tape<Scalar>& t = *m.tape();
  const std::size_t im = m.id();
  Matrix<Scalar> saved = y;
  return t.record("softmax_columns", std::move(y), t.needs_grad(m),
                  [im, saved = std::move(saved)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    // dx = y * (g - sum(g * y)) per column
                    const Eigen::Array<Scalar, 1, Eigen::Dynamic> dots = g.cwiseProduct(saved).colwise().sum();
                    Matrix<Scalar> dx = (saved.array() * (g.array().rowwise() - dots)).matrix();
                    tp.accumulate(im, dx);
                  });
}

// ---------------------------------------------------------------------------
// Structure

template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool ng = false;
  Tape<Scalar>& t = *parts.front().tape();
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) detail::shape_mismatch("concat_rows", parts.front(), p);
    rows += p.rows();
    ng = ng || t.needs_grad(p);
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> pieces;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    pieces.emplace_back(p.id(), p.rows());
    r += p.rows();
  }
  return t.record("concat_rows", std::move(out), ng, [pieces = std::move(pieces)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Eigen::Index off = 0;
    for (const auto& [id, n] : pieces) {
      tp.accumulate(id, g.middleRows(off, n));
      off += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::initializer_list<Var<Scalar>> parts) {
  return concat_rows(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool ng = false;
  Tape<Scalar>& t = *parts.front().tape();
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) detail::shape_mismatch("concat_cols", parts.front(), p);
    cols += p.cols();
    ng = ng || t.needs_grad(p);
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> pieces;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    pieces.emplace_back(p.id(), p.cols());
    c += p.cols();
  }
  return t.record("concat_cols", std::move(out), ng, [pieces = std::move(pieces)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Eigen::Index off = 0;
    for (const auto& [id, n] : pieces) {
      tp.accumulate(id, g.middleCols(off, n));
      off += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts) {
  return concat_cols(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_string(a.rows(), a.cols()));
  }
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record("slice_rows", a.value().middleRows(start, count), t.needs_grad(a),
                  [ia, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.grad_slot(ia).middleRows(start, count) += g;
                  });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > a.cols()) {
    throw ShapeError("slice_cols: cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_string(a.rows(), a.cols()));
  }
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record("slice_cols", a.value().middleCols(start, count), t.needs_grad(a),
                  [ia, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.grad_slot(ia).middleCols(start, count) += g;
                  });
}

template <typename Scalar>
Var<Scalar> column(const Var<Scalar>& a, Eigen::Index j) {
  return slice_cols(a, j, 1);
}

/// Gathers columns of `table` (dim x vocab) at `ids`, giving dim x ids.size().
template <typename Scalar>
Var<Scalar> lookup_columns(const Var<Scalar>& table, std::span<const int> ids) {
  if (ids.empty()) throw ShapeError("lookup_columns: empty id list");
  Matrix<Scalar> out(table.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= table.cols()) {
      throw ShapeError("lookup_columns: id " + std::to_string(ids[k]) + " outside table " +
                       shape_string(table.rows(), table.cols()));
    }
    out.col(static_cast<Eigen::Index>(k)) = table.value().col(ids[k]);
  }
  Tape<Scalar>& t = *table.tape();
  const std::size_t it = table.id();
  std::vector<int> idv(ids.begin(), ids.end());
  return t.record("lookup_columns", std::move(out), t.needs_grad(table),
                  [it, idv = std::move(idv)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    Matrix<Scalar>& slot = tp.grad_slot(it);
                    for (std::size_t k = 0; k < idv.size(); ++k) slot.col(idv[k]) += g.col(static_cast<Eigen::Index>(k));
                  });
}

/// Selects the single entry (r, c) as a 1x1 value.
template <typename Scalar>
Var<Scalar> pick(const Var<Scalar>& a, Eigen::Index r, Eigen::Index c = 0) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
    throw ShapeError("pick: index (" + std::to_string(r) + ", " + std::to_string(c) + ") outside " +
                     shape_string(a.rows(), a.cols()));
  }
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record("pick", Matrix<Scalar>::Constant(1, 1, a.value()(r, c)), t.needs_grad(a),
                  [ia, r, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) { tp.grad_slot(ia)(r, c) += g(0, 0); });
}

/// out (size x 1) with out[targets[i]] += v[i] for a column vector v.
template <typename Scalar>
Var<Scalar> scatter_add(const Var<Scalar>& v, std::span<const int> targets, Eigen::Index size) {
  if (v.cols() != 1 || v.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw ShapeError("scatter_add: value " + shape_string(v.rows(), v.cols()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  Matrix<Scalar> out = Matrix<Scalar>::Zero(size, 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= size) throw ShapeError("scatter_add: target out of range");
    out(targets[i], 0) += v.value()(static_cast<Eigen::Index>(i), 0);
  }
  Tape<Scalar>& t = *v.tape();
  const std::size_t iv = v.id();
  std::vector<int> tg(targets.begin(), targets.end());
  return t.record("scatter_add", std::move(out), t.needs_grad(v),
                  [iv, tg = std::move(tg)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    Matrix<Scalar> gv(static_cast<Eigen::Index>(tg.size()), 1);
                    for (std::size_t i = 0; i < tg.size(); ++i) gv(static_cast<Eigen::Index>(i), 0) = g(tg[i], 0);
                    tp.accumulate(iv, gv);
                  });
}

/// Appends `extra` zero rows.
template <typename Scalar>
Var<Scalar> pad_rows(const Var<Scalar>& a, Eigen::Index extra) {
  if (extra == 0) return a;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(a.rows() + extra, a.cols());
  out.topRows(a.rows()) = a.value();
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index n = a.rows();
  return t.record("pad_rows", std::move(out), t.needs_grad(a),
                  [ia, n](Tape<Scalar>& tp, const Matrix<Scalar>& g) { tp.accumulate(ia, g.topRows(n)); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record("sum", Matrix<Scalar>::Constant(1, 1, a.value().sum()), t.needs_grad(a),
                  [ia, r, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, Matrix<Scalar>::Constant(r, c, g(0, 0)));
                  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

/// Mean of the columns, giving rows x 1.
template <typename Scalar>
Var<Scalar> mean_columns(const Var<Scalar>& a) {
  if (a.cols() == 0) throw ShapeError("mean_columns: empty input");
  Tape<Scalar>& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index c = a.cols();
  return t.record("mean_columns", a.value().rowwise().mean(), t.needs_grad(a),
                  [ia, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    tp.accumulate(ia, (g / static_cast<Scalar>(c)).replicate(1, c));
                  });
}

/// Sum of a list of same-shaped values.
template <typename Scalar>
Var<Scalar> add_n(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("add_n: no inputs");
  Matrix<Scalar> out = parts.front().value();
  Tape<Scalar>& t = *parts.front().tape();
  bool ng = t.needs_grad(parts.front());
  std::vector<std::size_t> ids{parts.front().id()};
  for (std::size_t k = 1; k < parts.size(); ++k) {
    detail::require_same_shape("add_n", parts.front(), parts[k]);
    out += parts[k].value();
    ng = ng || t.needs_grad(parts[k]);
    ids.push_back(parts[k].id());
  }
  return t.record("add_n", std::move(out), ng, [ids = std::move(ids)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    for (std::size_t id : ids) tp.accumulate(id, g);
  });
}

// ---------------------------------------------------------------------------
// LSTM

/// One LSTM step. `weight` is 4H x (I + H) with gate blocks ordered
/// input, forget, candidate, output; `bias` is 4H x 1; `x` is I x 1 and
/// `h`, `c` are H x 1. Returns the stacked [h'; c'] as 2H x 1.
template <typename Scalar>
Var<Scalar> lstm_cell(const Var<Scalar>& weight, const Var<Scalar>& bias, const Var<Scalar>& x,
                      const Var<Scalar>& h, const Var<Scalar>& c) {
  const Eigen::Index hidden = h.rows();
  const Eigen::Index input = x.rows();
  if (x.cols() != 1 || h.cols() != 1 || c.cols() != 1 || c.rows() != hidden) {
    throw ShapeError("lstm_cell: expected column states, got x " + shape_string(x.rows(), x.cols()) + ", h " +
                     shape_string(h.rows(), h.cols()) + ", c " + shape_string(c.rows(), c.cols()));
  }
  if (weight.rows() != 4 * hidden || weight.cols() != input + hidden) {
    throw ShapeError("lstm_cell: weight " + shape_string(weight.rows(), weight.cols()) + " vs expected " +
                     shape_string(4 * hidden, input + hidden));
  }
  if (bias.rows() != 4 * hidden || bias.cols() != 1) {
    throw ShapeError("lstm_cell: bias " + shape_string(bias.rows(), bias.cols()) + " vs expected " +
                     shape_string(4 * hidden, 1));
  }
  Tape<Scalar>& t = *x.tape();
  using Col = Vector<Scalar>;
  Col xh(input + hidden);
  xh << x.value().col(0), h.value().col(0);
  Col z = weight.value() * xh + bias.value().col(0);
  auto logistic = [](Scalar v) {
    if (v >= 0) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  };
  Col gi = z.segment(0, hidden).unaryExpr(logistic);
  Col gf = z.segment(hidden, hidden).unaryExpr(logistic);
  Col gg = z.segment(2 * hidden, hidden).array().tanh().matrix();
  Col go = z.segment(3 * hidden, hidden).unaryExpr(logistic);
  Col c_new = gf.cwiseProduct(c.value().col(0)) + gi.cwiseProduct(gg);
  Col tc = c_new.array().tanh().matrix();
  Col h_new = go.cwiseProduct(tc);
  Matrix<Scalar> out(2 * hidden, 1);
  out << h_new, c_new;

  const bool ng = t.needs_grad(weight) || t.needs_grad(bias) || t.needs_grad(x) || t.needs_grad(h) ||
                  t.needs_grad(c);
  const std::size_t iw = weight.id(), ib = bias.id(), ix = x.id(), ih = h.id(), ic = c.id();
  return t.record(
      "lstm_cell", std::move(out), ng,
      [=, xh = std::move(xh), gi = std::move(gi), gf = std::move(gf), gg = std::move(gg), go = std::move(go),
       tc = std::move(tc)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        const Col dh = g.col(0).segment(0, hidden);
        const Col dc_out = g.col(0).segment(hidden, hidden);
        const Col dc = dc_out + dh.cwiseProduct(go).cwiseProduct((Scalar(1) - tc.array().square()).matrix());
        const Col c_prev = tp.value(ic);
        Col dz(4 * hidden);
        dz.segment(0, hidden) = dc.cwiseProduct(gg).cwiseProduct((gi.array() * (Scalar(1) - gi.array())).matrix());
        dz.segment(hidden, hidden) =
            dc.cwiseProduct(c_prev).cwiseProduct((gf.array() * (Scalar(1) - gf.array())).matrix());
        dz.segment(2 * hidden, hidden) = dc.cwiseProduct(gi).cwiseProduct((Scalar(1) - gg.array().square()).matrix());
        dz.segment(3 * hidden, hidden) = dh.cwiseProduct(tc).cwiseProduct((go.array() * (Scalar(1) - go.array())).matrix());
        if (tp.needs_grad(iw)) tp.accumulate(iw, dz * xh.transpose());
        if (tp.needs_grad(ib)) tp.accumulate(ib, dz);
        if (tp.needs_grad(ix) || tp.needs_grad(ih)) {
          const Col dxh = tp.value(iw).transpose() * dz;
          if (tp.needs_grad(ix)) tp.accumulate(ix, dxh.segment(0, input));
          if (tp.needs_grad(ih)) tp.accumulate(ih, dxh.segment(input, hidden));
        }
        if (tp.needs_grad(ic)) tp.accumulate(ic, dc.cwiseProduct(gf));
      });
}

}  // namespace redr::ad
