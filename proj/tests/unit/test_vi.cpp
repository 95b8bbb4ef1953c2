#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "blindvi/adam.hpp"
#include "blindvi/encoder.hpp"
#include "blindvi/errors.hpp"
#include "blindvi/harness.hpp"
#include "blindvi/vi_estimator.hpp"
#include "blindvi/vi_losses.hpp"

using namespace blindvi;

namespace {

GaussianPosterior random_posterior(Eigen::Index dim, Rng& rng, double mscale = 1.0) {
  RealVector m(dim), v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    m(i) = mscale * rng.normal();
    v(i) = std::exp(0.5 * rng.normal()) * 0.3;
  }
  return GaussianPosterior(StackedRealVector(m), v);
}

}  // namespace

TEST_CASE("adam first steps against hand computation") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam adam(1, cfg);
  RealVector p = RealVector::Constant(1, 1.0);
  double m = 0.0, v = 0.0, x = 1.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * x;
    adam.step(p, RealVector::Constant(1, 2.0 * p(0)));
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p(0) == doctest::Approx(x).epsilon(1e-14));
  }
  CHECK(adam.steps() == 5);
  CHECK_THROWS_AS(adam.step(p, RealVector::Zero(2)), ShapeError);
}

TEST_CASE("adam minimizes a quadratic") {
  Adam adam(3, AdamConfig{0.05});
  RealVector p = (RealVector(3) << 3.0, -2.0, 1.0).finished();
  const RealVector target = (RealVector(3) << 0.5, 0.25, -1.0).finished();
  for (int i = 0; i < 3000; ++i) adam.step(p, 2.0 * (p - target));
  CHECK((p - target).norm() < 1e-3);
}

TEST_CASE("zero encoder gives standard outputs") {
  EncoderNet net(4, 6);
  CHECK(net.parameter_count() == (4 + 1) * 16 + 17 * 12);
  const GaussianPosterior q = net.forward(StackedRealVector(RealVector::Ones(4)));
  CHECK(q.mean().values().norm() == 0.0);
  CHECK((q.var().array() == 1.0).all());
  CHECK_THROWS_AS(net.forward(StackedRealVector(RealVector::Ones(6))), ShapeError);
}

TEST_CASE("encoder outputs are bounded and match the taped forward") {
  Rng rng(41);
  const EncoderNet net = EncoderNet::random(4, 2, 16, 3.0, rng);
  RealMatrix ys(4, 5);
  for (Eigen::Index i = 0; i < ys.size(); ++i) ys(i) = 50.0 * rng.normal();
  const EncoderNet::Batch b = net.forward_batch(ys);
  CHECK(b.mean.cwiseAbs().maxCoeff() <= 3.0);
  CHECK(b.var.minCoeff() >= std::exp(kLogVarMin) * (1 - 1e-12));
  CHECK(b.var.maxCoeff() <= std::exp(kLogVarMax) * (1 + 1e-12));

  ad::Tape tape;
  const EncoderNet::Vars v = net.forward(tape.constant(net.params()), 0, tape.constant(ys));
  CHECK((v.mean.value() - b.mean).norm() < 1e-12);
  CHECK((v.var.value() - b.var).norm() < 1e-12);
  const GaussianPosterior single = net.forward(StackedRealVector(ys.col(2)));
  CHECK((single.mean().values() - b.mean.col(2)).norm() < 1e-12);
}

TEST_CASE("encoder mean jacobian matches finite differences") {
  Rng rng(42);
  const EncoderNet net = EncoderNet::random(4, 2, 16, 3.0, rng);
  const RealVector y = RealVector::Random(4);
  const Eigen::Index which = 7;
  ad::Tape tape;
  const ad::Var p = tape.variable(net.params());
  const auto out = net.forward(p, 0, tape.constant(y));
  tape.backward(ad::sum(ad::rows(out.mean, 1, 1)));
  const double analytic = tape.gradient(p)(which, 0);
  const double h = 1e-6;
  EncoderNet up = net, down = net;
  up.params()(which) += h;
  down.params()(which) -= h;
  const double fd = (up.forward(StackedRealVector(y)).mean().values()(1) -
                     down.forward(StackedRealVector(y)).mean().values()(1)) /
                    (2 * h);
  CHECK(std::abs(analytic - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("loss1 and loss2 closed forms") {
  RealVector m(2), v(2);
  m << 1.0, 0.0;
  v << 1.0, 1.0;
  // Prior variance rho^2 = 1 per real dimension: 0.5 * (1 + 1 - 1 - 0) for the first entry.
  CHECK(loss1(GaussianPosterior(StackedRealVector(m), v), 1.0) == doctest::Approx(0.5));
  RealVector vp = RealVector::Constant(4, 2.0);
  CHECK(loss1(GaussianPosterior(StackedRealVector(RealVector::Zero(4)), vp), 2.0) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(loss1(GaussianPosterior(StackedRealVector(m), v), 0.0), DomainError);

  RealVector h(2), hv(2);
  h << 1.0, 0.0;
  hv << 0.5, 0.5;
  CHECK(loss2(GaussianPosterior(StackedRealVector(h), hv)) == doctest::Approx(1.0));
  CHECK(loss2(GaussianPosterior(StackedRealVector(RealVector::Zero(2)), hv)) ==
        doctest::Approx(0.0));
  double prev = -1.0;
  for (double scale : {0.0, 0.5, 1.0, 2.0}) {
    const double l = loss2(GaussianPosterior(StackedRealVector(scale * h), hv));
    CHECK(l > prev);
    prev = l;
  }
}

TEST_CASE("loss1 differences follow the squared norm of the mean") {
  Rng rng(43);
  for (int i = 0; i < 20; ++i) {
    const double rho2 = std::exp(rng.normal());
    const GaussianPosterior a = random_posterior(8, rng);
    const RealVector m2 = RealVector::Random(8);
    const GaussianPosterior b(StackedRealVector(m2), a.var());
    const double expected =
        (a.mean().values().squaredNorm() - m2.squaredNorm()) / (2.0 * rho2);
    CHECK(std::abs(loss1(a, rho2) - loss1(b, rho2) - expected) < 1e-10);
  }
}

TEST_CASE("reparameterized samples") {
  const RealVector m = (RealVector(2) << 1.0, -2.0).finished();
  const RealVector v = (RealVector(2) << 4.0, 0.25).finished();
  CHECK(reparam_sample(m, RealVector::Zero(2), RealVector::Ones(2)) == m);
  const RealVector s = reparam_sample(m, v, RealVector::Ones(2));
  CHECK(s(0) == 3.0);
  CHECK(s(1) == -1.5);

  Rng rng(44);
  const GaussianPosterior q(StackedRealVector(m), v);
  RealVector sum = RealVector::Zero(2), sq = RealVector::Zero(2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const RealVector x = reparam_sample(q, rng).values();
    sum += x;
    sq += x.cwiseAbs2();
  }
  const RealVector mean = sum / n;
  const RealVector var = sq / n - mean.cwiseAbs2();
  CHECK(std::abs(mean(0) / m(0) - 1.0) < 0.03);
  CHECK(std::abs(mean(1) / m(1) - 1.0) < 0.03);
  CHECK(std::abs(var(0) / v(0) - 1.0) < 0.03);
  CHECK(std::abs(var(1) / v(1) - 1.0) < 0.03);
}

TEST_CASE("loss3 hand expansion for a scalar channel") {
  // H collapsed at 1 (tiny variance, zero-noise sample), m_x = 0, complex variance s.
  const double s = 0.7;
  const cd y(0.4, -1.1);
  const GaussianPosterior qh(StackedRealVector((RealVector(2) << 1.0, 0.0).finished()),
                             RealVector::Constant(2, 1e-300));
  const GaussianPosterior qx(StackedRealVector(RealVector::Zero(2)), RealVector::Constant(2, s / 2));
  const double l = loss3_mc(qh, qx, ComplexVector::Constant(1, y), 1.0, RealMatrix::Zero(2, 3));
  CHECK(l == doctest::Approx(s + std::norm(y)).epsilon(1e-12));
  CHECK(loss3_expected(qh, qx, ComplexVector::Constant(1, y), 1.0) ==
        doctest::Approx(s + std::norm(y)).epsilon(1e-12));
  Rng rng(1);
  CHECK_THROWS_AS(loss3_mc(qh, qx, ComplexVector::Constant(1, y), 1.0, 0, rng), DomainError);
}

TEST_CASE("loss3 is zero for a perfect reconstruction") {
  Rng rng(45);
  const ComplexMatrix h = draw_channel(3, 2, rng).h;
  const ComplexVector x = (ComplexVector(2) << cd(0.5, 0.1), cd(-0.3, 0.8)).finished();
  const GaussianPosterior qh(StackedRealVector::from_matrix(h), RealVector::Constant(12, 1e-300));
  const GaussianPosterior qx(StackedRealVector::from_complex(x), RealVector::Constant(4, 1e-300));
  CHECK(loss3_mc(qh, qx, h * x, 1.0, gaussian_matrix(12, 4, rng)) < 1e-20);
}

TEST_CASE("loss3 monte carlo approaches the closed-form expectation") {
  Rng rng(46);
  for (int i = 0; i < 3; ++i) {
    const GaussianPosterior qh = random_posterior(2 * 3 * 2, rng);
    const GaussianPosterior qx = random_posterior(4, rng);
    const ComplexVector y = StackedRealVector(RealVector::Random(6)).to_complex();
    const double mc = loss3_mc(qh, qx, y, 1.0, 20000, rng, NoiseWeighting::Unit);
    const double exact = loss3_expected(qh, qx, y, 1.0);
    CHECK(std::abs(mc / exact - 1.0) < 0.02);
  }
}

TEST_CASE("block objective agrees with per-slot losses") {
  Rng rng(47);
  const int n = 3, k = 2;
  VIConfig cfg;
  const VIState state = VIState::create(n, k, cfg, 1.0, rng);
  const Constellation c = make_constellation(Modulation::Qpsk);
  const Schedule sched = estimation_schedule(k, 2);
  const Frame f = transmit(draw_channel(n, k, rng).h, sched, random_symbols(sched, c, rng), c,
                           0.1, rng);
  ObjectiveSpec spec;
  spec.antennas = n;
  spec.users = k;
  spec.weight = likelihood_weight(NoiseWeighting::Exact, 0.1);
  spec.fusion = Fusion::PerSlot;
  const int samples = 3;
  const RealMatrix noise = gaussian_matrix(2 * n * k, base_noise_cols(spec, f.slots(), samples), rng);
  ad::Tape tape;
  const ObjectiveVars obj = record_objective(tape.constant(state.packed()), state.encoder_x,
                                             state.encoder_h, stack_columns(f.rx),
                                             sched.mask(), spec, noise);
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;
  for (int t = 0; t < f.slots(); ++t) {
    const StackedRealVector ys = StackedRealVector::from_complex(f.rx.col(t));
    const GaussianPosterior qx_full = state.encoder_x.forward(ys);
    const GaussianPosterior qh = state.encoder_h.forward(ys);
    l1 += loss1(qx_full, 1.0);
    l2 += loss2(qh);
    // Silent users are pinned at zero in the reconstruction.
    RealVector mx = qx_full.mean().values(), vx = qx_full.var();
    for (int u = 0; u < k; ++u) {
      if (!sched.active(u, t)) {
        mx(u) = mx(u + k) = 0.0;
        vx(u) = vx(u + k) = 1e-300;
      }
    }
    RealMatrix slot_noise(2 * n * k, samples);
    for (int l = 0; l < samples; ++l) slot_noise.col(l) = noise.col(l * f.slots() + t);
    l3 += loss3_mc(qh, GaussianPosterior(StackedRealVector(mx), vx), f.rx.col(t), spec.weight,
                   slot_noise);
  }
  CHECK(obj.loss1.scalar() == doctest::Approx(l1).epsilon(1e-12));
  CHECK(obj.loss2.scalar() == doctest::Approx(l2).epsilon(1e-12));
  CHECK(obj.loss3.scalar() == doctest::Approx(l3).epsilon(1e-10));
  CHECK(obj.total.scalar() == doctest::Approx(l1 + l2 + l3).epsilon(1e-12));
}

TEST_CASE("elbo_loss is finite and additive") {
  const Constellation c = make_constellation(Modulation::Qpsk);
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const VIState state = VIState::create(2, 2, VIConfig{}, 1.0, rng);
    const ComplexVector y = draw_channel(2, 1, rng).h.col(0);
    const LossTerms t = elbo_loss(state, y, 1.0, 0.1, rng);
    CHECK(std::isfinite(t.total));
    CHECK(t.total == doctest::Approx(t.loss1 + t.loss2 + t.loss3));
  }
}

TEST_CASE("training decreases the loss on a noiseless slot") {
  std::vector<double> ratios;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(static_cast<std::uint64_t>(100 + seed));
    const Constellation c = make_constellation(Modulation::Qpsk);
    const ComplexMatrix h = draw_channel(2, 1, rng).h;
    const Schedule sched = estimation_schedule(1, 1);
    const Frame f = transmit(h, sched, random_symbols(sched, c, rng), c, 0.0, rng);
    VIConfig cfg;
    cfg.max_iters = 200;
    cfg.window = 0;
    const BlockEstimate e = fit_block(f, cfg, rng);
    ratios.push_back(e.loss_trace.back() / e.loss_trace.front());
  }
  std::nth_element(ratios.begin(), ratios.begin() + 10, ratios.end());
  CHECK(ratios[10] < 1.0);
}

TEST_CASE("fit_block recovers a scalar channel up to rotation") {
  Rng rng(48);
  const Constellation c = make_constellation(Modulation::Qpsk);
  const ComplexMatrix h = draw_channel(1, 1, rng).h;
  const Schedule sched = estimation_schedule(1, 8);
  const Frame f = transmit(h, sched, random_symbols(sched, c, rng), c, 0.0, rng);
  const BlockEstimate e = fit_block(f, VIConfig{}, rng);
  CHECK(mse(align_channel(e.h_hat, h), h) < 1e-3);
  CHECK(e.posteriors.size() == 8);
  CHECK(e.loss_trace.back() < e.loss_trace.front());
}

TEST_CASE("fit_block is deterministic and validates its input") {
  const Constellation c = make_constellation(Modulation::Qpsk);
  auto run = [&] {
    Rng rng(49);
    const Schedule sched = estimation_schedule(2, 4);
    const Frame f = transmit(draw_channel(2, 2, rng).h, sched, random_symbols(sched, c, rng), c,
                             0.05, rng);
    VIConfig cfg;
    cfg.max_iters = 100;
    cfg.record_terms = true;
    return fit_block(f, cfg, rng);
  };
  const BlockEstimate a = run(), b = run();
  CHECK(a.h_hat == b.h_hat);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.x_hat == b.x_hat);
  std::ostringstream trace;
  write_trace_csv(trace, a);
  const std::string text = trace.str();
  CHECK(text.rfind("iteration,loss1,loss2,loss3,total\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') ==
        static_cast<long>(a.term_trace.size()) + 1);

  Rng rng(50);
  const Schedule det = detection_schedule(2, 3);
  const Frame d = transmit(draw_channel(2, 2, rng).h, det, random_symbols(det, c, rng), c, 0.1, rng);
  CHECK_THROWS_AS(fit_block(d, VIConfig{}, rng), DomainError);
}

TEST_CASE("divergent training reports its trace") {
  Rng rng(51);
  const Constellation c = make_constellation(Modulation::Qpsk);
  const Schedule sched = estimation_schedule(1, 2);
  Frame f = transmit(draw_channel(2, 1, rng).h, sched, random_symbols(sched, c, rng), c, 0.1, rng);
  f.rx(0, 0) = cd(1e300, 0.0);
  VIConfig cfg;
  cfg.max_iters = 5;
  CHECK_THROWS_AS(fit_block(f, cfg, rng), TrainingError);
}
