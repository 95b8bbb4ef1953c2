#include "blindvi/autodiff.hpp"

#include <string>

#include "blindvi/errors.hpp"

namespace blindvi::ad {
namespace {

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw DomainError("autodiff: use of an unbound Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw DomainError("autodiff: operands live on different tapes");
  return tape_of(a);
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

bool any_grad(Tape& t, std::initializer_list<std::size_t> ids) {
  for (auto id : ids) {
    if (t.requires_grad(id)) return true;
  }
  return false;
}

}  // namespace

const RealMatrix& Var::value() const { return tape_of(*this).value(id_); }

double Var::scalar() const {
  const RealMatrix& v = value();
  if (v.size() != 1) throw ShapeError("Var::scalar on a non-1x1 node");
  return v(0, 0);
}

Var Tape::variable(RealMatrix value) { return record("variable", std::move(value), true, {}); }

Var Tape::constant(RealMatrix value) { return record("constant", std::move(value), false, {}); }

Var Tape::record(const char* op, RealMatrix value, bool requires_grad, Backprop backprop) {
  if (!value.allFinite()) {
    throw NumericError(std::string("non-finite output from primitive '") + op + "'");
  }
  nodes_.push_back(Node{op, std::move(value), RealMatrix(), requires_grad, false,
                        requires_grad ? std::move(backprop) : Backprop{}});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const RealMatrix& g) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  if (node.has_grad) {
    node.grad += g;
  } else {
    node.grad = g;
    node.has_grad = true;
  }
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw DomainError("backward: root belongs to another tape");
  if (root.value().size() != 1) throw ShapeError("backward: root must be 1x1");
  for (Node& node : nodes_) {
    node.has_grad = false;
    node.grad.resize(0, 0);
  }
  accumulate(root.id(), RealMatrix::Ones(1, 1));
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backprop) continue;
    if (!node.grad.allFinite()) {
      throw NumericError(std::string("non-finite gradient through primitive '") + node.op + "'");
    }
    node.backprop(*this, node.grad);
  }
}

RealMatrix Tape::gradient(const Var& v) const {
  const Node& node = nodes_.at(v.id());
  if (!node.has_grad) return RealMatrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tape& t = tape_of(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record("add", a.value() + b.value(), any_grad(t, {ia, ib}),
                  [ia, ib](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ia, up);
                    tp.accumulate(ib, up);
                  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tape& t = tape_of(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record("sub", a.value() - b.value(), any_grad(t, {ia, ib}),
                  [ia, ib](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ia, up);
                    if (tp.requires_grad(ib)) tp.accumulate(ib, -up);
                  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape("hadamard", a, b);
  Tape& t = tape_of(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record("hadamard", a.value().cwiseProduct(b.value()), any_grad(t, {ia, ib}),
                  [ia, ib](Tape& tp, const RealMatrix& up) {
                    if (tp.requires_grad(ia)) tp.accumulate(ia, up.cwiseProduct(tp.value(ib)));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, up.cwiseProduct(tp.value(ia)));
                  });
}

Var scale(const Var& a, double c) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record("scale", a.value() * c, t.requires_grad(ia),
                  [ia, c](Tape& tp, const RealMatrix& up) { tp.accumulate(ia, up * c); });
}

Var add_scalar(const Var& a, double c) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record("add_scalar", a.value().array() + c, t.requires_grad(ia),
                  [ia](Tape& tp, const RealMatrix& up) { tp.accumulate(ia, up); });
}

Var square(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record("square", a.value().array().square(), t.requires_grad(ia),
                  [ia](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ia, 2.0 * up.cwiseProduct(tp.value(ia)));
                  });
}

Var tanh(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  RealMatrix out = a.value().array().tanh();
  const std::size_t out_id = t.size();
  return t.record("tanh", std::move(out), t.requires_grad(ia),
                  [ia, out_id](Tape& tp, const RealMatrix& up) {
                    const RealMatrix& y = tp.value(out_id);
                    tp.accumulate(ia, up.array() * (1.0 - y.array().square()));
                  });
}

Var exp(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  const std::size_t out_id = t.size();
  return t.record("exp", a.value().array().exp(), t.requires_grad(ia),
                  [ia, out_id](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ia, up.cwiseProduct(tp.value(out_id)));
                  });
}

Var log(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record("log", a.value().array().log(), t.requires_grad(ia),
                  [ia](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ia, up.cwiseQuotient(tp.value(ia)));
                  });
}

Var sqrt(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  const std::size_t out_id = t.size();
  return t.record("sqrt", a.value().array().sqrt(), t.requires_grad(ia),
                  [ia, out_id](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ia, 0.5 * up.array() / tp.value(out_id).array());
                  });
}

Var clamp(const Var& a, double lo, double hi) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record("clamp", a.value().cwiseMax(lo).cwiseMin(hi), t.requires_grad(ia),
                  [ia, lo, hi](Tape& tp, const RealMatrix& up) {
                    const auto& x = tp.value(ia).array();
                    tp.accumulate(ia, ((x >= lo) && (x <= hi)).cast<double>() * up.array());
                  });
}

Var affine(const Var& w, const Var& x, const Var& b) {
  Tape& t = tape_of(w, x);
  if (b.tape() != &t) throw DomainError("affine: operands live on different tapes");
  if (w.cols() != x.rows() || b.rows() != w.rows() || b.cols() != 1) {
    throw ShapeError("affine: W " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                     ", X " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", b " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  RealMatrix out = w.value() * x.value();
  out.colwise() += b.value().col(0);
  const auto iw = w.id(), ix = x.id(), ib = b.id();
  return t.record("affine", std::move(out), any_grad(t, {iw, ix, ib}),
                  [iw, ix, ib](Tape& tp, const RealMatrix& up) {
                    if (tp.requires_grad(iw)) tp.accumulate(iw, up * tp.value(ix).transpose());
                    if (tp.requires_grad(ix)) tp.accumulate(ix, tp.value(iw).transpose() * up);
                    if (tp.requires_grad(ib)) tp.accumulate(ib, up.rowwise().sum());
                  });
}

Var lmul(const RealMatrix& a, const Var& x) {
  if (a.cols() != x.rows()) throw ShapeError("lmul: inner dimensions differ");
  Tape& t = tape_of(x);
  const auto ix = x.id();
  return t.record("lmul", a * x.value(), t.requires_grad(ix),
                  [ix, a](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ix, a.transpose() * up);
                  });
}

Var rmul(const Var& x, const RealMatrix& b) {
  if (x.cols() != b.rows()) throw ShapeError("rmul: inner dimensions differ");
  Tape& t = tape_of(x);
  const auto ix = x.id();
  return t.record("rmul", x.value() * b, t.requires_grad(ix),
                  [ix, b](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(ix, up * b.transpose());
                  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  RealMatrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record("sum", std::move(out), t.requires_grad(ia),
                  [ia](Tape& tp, const RealMatrix& up) {
                    const RealMatrix& x = tp.value(ia);
                    tp.accumulate(ia, RealMatrix::Constant(x.rows(), x.cols(), up(0, 0)));
                  });
}

Var rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("rows: out of range");
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record("rows", a.value().middleRows(start, count), t.requires_grad(ia),
                  [ia, start, count](Tape& tp, const RealMatrix& up) {
                    const RealMatrix& x = tp.value(ia);
                    RealMatrix g = RealMatrix::Zero(x.rows(), x.cols());
                    g.middleRows(start, count) = up;
                    tp.accumulate(ia, g);
                  });
}

Var segment(const Var& a, Eigen::Index offset, Eigen::Index r, Eigen::Index c) {
  if (a.cols() != 1) throw ShapeError("segment: source must be a column vector");
  if (offset < 0 || offset + r * c > a.rows()) throw ShapeError("segment: out of range");
  Tape& t = tape_of(a);
  const auto ia = a.id();
  RealMatrix out = a.value().col(0).segment(offset, r * c).reshaped(r, c);
  return t.record("segment", std::move(out), t.requires_grad(ia),
                  [ia, offset, r, c](Tape& tp, const RealMatrix& up) {
                    RealMatrix g = RealMatrix::Zero(tp.value(ia).rows(), 1);
                    g.col(0).segment(offset, r * c) = up.reshaped(r * c, 1);
                    tp.accumulate(ia, g);
                  });
}

Var tile_cols(const Var& a, Eigen::Index times) {
  if (times < 1) throw DomainError("tile_cols: times must be >= 1");
  Tape& t = tape_of(a);
  const auto ia = a.id();
  const RealMatrix& x = a.value();
  RealMatrix out(x.rows(), x.cols() * times);
  for (Eigen::Index i = 0; i < times; ++i) out.middleCols(i * x.cols(), x.cols()) = x;
  return t.record("tile_cols", std::move(out), t.requires_grad(ia),
                  [ia, times](Tape& tp, const RealMatrix& up) {
                    const Eigen::Index w = tp.value(ia).cols();
                    RealMatrix g = up.leftCols(w);
                    for (Eigen::Index i = 1; i < times; ++i) g += up.middleCols(i * w, w);
                    tp.accumulate(ia, g);
                  });
}

Var reparam(const Var& mean, const Var& var, const RealMatrix& noise) {
  require_same_shape("reparam", mean, var);
  if (noise.rows() != mean.rows() || noise.cols() != mean.cols()) {
    throw ShapeError("reparam: base noise shape differs from the posterior");
  }
  Tape& t = tape_of(mean, var);
  const auto im = mean.id(), iv = var.id();
  RealMatrix out = mean.value().array() + var.value().array().sqrt() * noise.array();
  return t.record("reparam", std::move(out), any_grad(t, {im, iv}),
                  [im, iv, noise](Tape& tp, const RealMatrix& up) {
                    tp.accumulate(im, up);
                    if (tp.requires_grad(iv)) {
                      tp.accumulate(iv, 0.5 * up.array() * noise.array() /
                                            tp.value(iv).array().sqrt());
                    }
                  });
}

Var cmatvec(const Var& h, const Var& x, Eigen::Index n, Eigen::Index k) {
  Tape& t = tape_of(h, x);
  if (h.rows() != 2 * n * k || x.rows() != 2 * k) {
    throw ShapeError("cmatvec: expected 2NK and 2K rows for N=" + std::to_string(n) +
                     ", K=" + std::to_string(k));
  }
  const Eigen::Index groups = h.cols();
  if (groups == 0 || x.cols() % groups != 0) {
    throw ShapeError("cmatvec: column count of x must be a multiple of that of h");
  }
  const Eigen::Index span = x.cols() / groups;
  const Eigen::Index nk = n * k;
  const RealMatrix& hv = h.value();
  const RealMatrix& xv = x.value();
  RealMatrix out(2 * n, x.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    const auto hr = hv.col(g).head(nk).reshaped(n, k);
    const auto hi = hv.col(g).tail(nk).reshaped(n, k);
    const auto xr = xv.block(0, g * span, k, span);
    const auto xi = xv.block(k, g * span, k, span);
    out.block(0, g * span, n, span).noalias() = hr * xr - hi * xi;
    out.block(n, g * span, n, span).noalias() = hr * xi + hi * xr;
  }
  const auto ih = h.id(), ix = x.id();
  return t.record(
      "cmatvec", std::move(out), any_grad(t, {ih, ix}),
      [ih, ix, n, k, groups, span, nk](Tape& tp, const RealMatrix& up) {
        const RealMatrix& hv = tp.value(ih);
        const RealMatrix& xv = tp.value(ix);
        const bool want_h = tp.requires_grad(ih);
        const bool want_x = tp.requires_grad(ix);
        RealMatrix gh = want_h ? RealMatrix::Zero(hv.rows(), hv.cols()) : RealMatrix();
        RealMatrix gx = want_x ? RealMatrix::Zero(xv.rows(), xv.cols()) : RealMatrix();
        for (Eigen::Index g = 0; g < groups; ++g) {
          const auto hr = hv.col(g).head(nk).reshaped(n, k);
          const auto hi = hv.col(g).tail(nk).reshaped(n, k);
          const auto xr = xv.block(0, g * span, k, span);
          const auto xi = xv.block(k, g * span, k, span);
          const auto ur = up.block(0, g * span, n, span);
          const auto ui = up.block(n, g * span, n, span);
          if (want_x) {
            gx.block(0, g * span, k, span).noalias() = hr.transpose() * ur + hi.transpose() * ui;
            gx.block(k, g * span, k, span).noalias() = hr.transpose() * ui - hi.transpose() * ur;
          }
          if (want_h) {
            RealMatrix ghr = ur * xr.transpose() + ui * xi.transpose();
            RealMatrix ghi = ui * xr.transpose() - ur * xi.transpose();
            gh.col(g).head(nk) = ghr.reshaped(nk, 1);
            gh.col(g).tail(nk) = ghi.reshaped(nk, 1);
          }
        }
        if (want_h) tp.accumulate(ih, gh);
        if (want_x) tp.accumulate(ix, gx);
      });
}

Var weighted_row_sum(const Var& a, const std::vector<Eigen::Index>& group,
                     const RealMatrix& weights) {
  if (static_cast<Eigen::Index>(group.size()) != a.rows() || weights.cols() != a.cols()) {
    throw ShapeError("weighted_row_sum: group map or weight columns do not match the input");
  }
  for (const auto g : group) {
    if (g < 0 || g >= weights.rows()) throw ShapeError("weighted_row_sum: group out of range");
  }
  Tape& t = tape_of(a);
  const RealMatrix& x = a.value();
  RealMatrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, 0) = x.row(r).dot(weights.row(group[r]));
  const auto ia = a.id();
  return t.record("weighted_row_sum", std::move(out), t.requires_grad(ia),
                  [ia, group, weights](Tape& tp, const RealMatrix& up) {
                    const RealMatrix& x = tp.value(ia);
                    RealMatrix g(x.rows(), x.cols());
                    for (Eigen::Index r = 0; r < x.rows(); ++r) {
                      g.row(r) = up(r, 0) * weights.row(group[r]);
                    }
                    tp.accumulate(ia, g);
                  });
}

double value_and_grad(const ScalarFn& fn, const RealVector& params, RealVector& gradient) {
  Tape tape;
  const Var p = tape.variable(params);
  const Var loss = fn(tape, p);
  tape.backward(loss);
  gradient = tape.gradient(p).col(0);
  return loss.scalar();
}

RealVector grad(const ScalarFn& fn, const RealVector& params) {
  RealVector g;
  value_and_grad(fn, params, g);
  return g;
}

}  // namespace blindvi::ad
