#include <doctest.h>

#include <cmath>
#include <complex>

#include "blindvi/autodiff.hpp"
#include "blindvi/errors.hpp"
#include "blindvi/gaussian.hpp"
#include "blindvi/rng.hpp"

using namespace blindvi;
namespace ad = blindvi::ad;

namespace {

double max_fd_error(const ad::ScalarFn& fn, const RealVector& p0, double h = 1e-6) {
  const RealVector g = ad::grad(fn, p0);
  RealVector p = p0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p(i);
    p(i) = saved + h;
    ad::Tape t1;
    const double up = fn(t1, t1.constant(p)).scalar();
    p(i) = saved - h;
    ad::Tape t2;
    const double down = fn(t2, t2.constant(p)).scalar();
    p(i) = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g(i)) / std::max({std::abs(fd), std::abs(g(i)), 1.0}));
  }
  return worst;
}

RealVector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  RealVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("quadratic and tanh gradients") {
  const RealVector p = (RealVector(3) << 1.5, -2.0, 0.25).finished();
  const RealVector g = ad::grad(
      [](ad::Tape&, const ad::Var& x) { return ad::scale(ad::sum(ad::square(x)), 0.5); }, p);
  CHECK((g - p).norm() < 1e-15);

  const RealVector t = ad::grad(
      [](ad::Tape&, const ad::Var& x) { return ad::sum(ad::tanh(ad::rows(x, 0, 1))); },
      RealVector::Zero(3));
  CHECK(t(0) == doctest::Approx(1.0));
  CHECK(t(1) == 0.0);
  CHECK(t(2) == 0.0);
}

TEST_CASE("elementwise primitives match finite differences") {
  Rng rng(21);
  const RealVector p = random_vector(6, rng, 0.5);
  CHECK(max_fd_error(
            [](ad::Tape&, const ad::Var& x) {
              const ad::Var a = ad::rows(x, 0, 3);
              const ad::Var b = ad::rows(x, 3, 3);
              const ad::Var e = ad::exp(a);
              return ad::sum(ad::add(ad::hadamard(ad::tanh(a), b),
                                     ad::sub(ad::log(ad::add_scalar(e, 1.0)),
                                             ad::sqrt(ad::add_scalar(ad::square(b), 2.0)))));
            },
            p) < 1e-7);
}

TEST_CASE("matrix primitives match finite differences") {
  Rng rng(22);
  const RealMatrix a = [&] {
    RealMatrix m(3, 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
    return m;
  }();
  const RealVector p = random_vector(12 + 8 + 3, rng);
  CHECK(max_fd_error(
            [&](ad::Tape&, const ad::Var& x) {
              const ad::Var w = ad::segment(x, 0, 3, 4);
              const ad::Var in = ad::segment(x, 12, 4, 2);
              const ad::Var b = ad::segment(x, 20, 3, 1);
              const ad::Var y = ad::tanh(ad::affine(w, in, b));
              const ad::Var z = ad::lmul(a.transpose(), y);     // 4 x 2
              const ad::Var q = ad::rmul(z, a.topRows(2));       // 4 x 4
              return ad::sum(ad::square(ad::tile_cols(q, 2)));
            },
            p) < 1e-6);
}

TEST_CASE("clamp passes inside and blocks outside") {
  const RealVector p = (RealVector(3) << -20.0, 0.3, 9.0).finished();
  const RealVector g = ad::grad(
      [](ad::Tape&, const ad::Var& x) { return ad::sum(ad::clamp(x, -10.0, 5.0)); }, p);
  CHECK(g(0) == 0.0);
  CHECK(g(1) == 1.0);
  CHECK(g(2) == 0.0);
}

TEST_CASE("reparam with frozen noise") {
  Rng rng(23);
  const RealMatrix noise = gaussian_matrix(4, 3, rng);
  const RealVector p = (RealVector(8) << random_vector(4, rng), random_vector(4, rng).cwiseAbs())
                           .finished();
  CHECK(max_fd_error(
            [&](ad::Tape&, const ad::Var& x) {
              const ad::Var m = ad::tile_cols(ad::rows(x, 0, 4), 3);
              const ad::Var v = ad::tile_cols(ad::add_scalar(ad::rows(x, 4, 4), 0.1), 3);
              return ad::sum(ad::square(ad::reparam(m, v, noise)));
            },
            p) < 1e-6);

  ad::Tape tape;
  const ad::Var m = tape.constant(RealVector::Constant(2, 1.5));
  const ad::Var v = tape.constant(RealVector::Constant(2, 4.0));
  const RealMatrix out = ad::reparam(m, v, RealMatrix::Ones(2, 1)).value();
  CHECK(out(0, 0) == 3.5);
}

TEST_CASE("cmatvec equals complex products and has correct gradient") {
  Rng rng(24);
  const Eigen::Index n = 3, k = 2, groups = 2, per = 3;
  RealMatrix h(2 * n * k, groups), x(2 * k, groups * per);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = rng.normal();
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  ad::Tape tape;
  const RealMatrix out = ad::cmatvec(tape.constant(h), tape.constant(x), n, k).value();
  for (Eigen::Index col = 0; col < groups * per; ++col) {
    const ComplexMatrix hc = StackedRealVector(h.col(col / per)).to_matrix(n, k);
    const ComplexVector xc = StackedRealVector(x.col(col)).to_complex();
    const RealVector expect = StackedRealVector::from_complex(hc * xc).values();
    CHECK((out.col(col) - expect).norm() < 1e-12);
  }

  RealVector p(h.size() + x.size());
  p << Eigen::Map<const RealVector>(h.data(), h.size()), Eigen::Map<const RealVector>(x.data(), x.size());
  CHECK(max_fd_error(
            [&](ad::Tape&, const ad::Var& v) {
              const ad::Var hv = ad::segment(v, 0, 2 * n * k, groups);
              const ad::Var xv = ad::segment(v, h.size(), 2 * k, groups * per);
              return ad::sum(ad::square(ad::cmatvec(hv, xv, n, k)));
            },
            p) < 1e-6);
}

TEST_CASE("weighted_row_sum") {
  Rng rng(25);
  RealMatrix w(2, 3);
  w << 0.5, 0.0, 0.5, 0.0, 1.0, 0.0;
  const std::vector<Eigen::Index> group{0, 1, 1, 0};
  const RealVector p = random_vector(12, rng);
  ad::Tape tape;
  const RealMatrix a = Eigen::Map<const RealMatrix>(p.data(), 4, 3);
  const RealMatrix out = ad::weighted_row_sum(tape.constant(a), group, w).value();
  CHECK(out(0, 0) == doctest::Approx(0.5 * a(0, 0) + 0.5 * a(0, 2)));
  CHECK(out(1, 0) == doctest::Approx(a(1, 1)));
  CHECK(max_fd_error(
            [&](ad::Tape&, const ad::Var& v) {
              return ad::sum(ad::square(ad::weighted_row_sum(ad::segment(v, 0, 4, 3), group, w)));
            },
            p) < 1e-7);
}

TEST_CASE("non-finite values raise and name the primitive") {
  ad::Tape tape;
  const ad::Var x = tape.variable(RealVector::Constant(1, -1.0));
  try {
    ad::log(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("unreached variables get zero gradient") {
  ad::Tape tape;
  const ad::Var a = tape.variable(RealVector::Ones(2));
  const ad::Var b = tape.variable(RealVector::Ones(3));
  tape.backward(ad::sum(a));
  CHECK(tape.gradient(b).norm() == 0.0);
  CHECK(tape.gradient(a).sum() == 2.0);
  CHECK_THROWS(tape.backward(a));
}
