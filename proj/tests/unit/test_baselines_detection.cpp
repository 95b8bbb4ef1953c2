#include <doctest.h>

#include <cmath>
#include <functional>

#include "blindvi/baselines.hpp"
#include "blindvi/channel.hpp"
#include "blindvi/detection.hpp"
#include "blindvi/errors.hpp"
#include "blindvi/harness.hpp"

using namespace blindvi;

TEST_CASE("orthogonal pilots") {
  for (auto [k, t] : {std::pair{2, 2}, {4, 8}, {3, 5}, {4, 6}}) {
    const PilotMatrix p = make_orthogonal_pilots(k, t, 1.5);
    const ComplexMatrix gram = p.p * p.p.adjoint();
    CHECK((gram - ComplexMatrix::Identity(k, k) * (1.5 * t)).norm() < 1e-12);
  }
  const PilotMatrix h = make_orthogonal_pilots(2, 2);
  CHECK((h.p * h.p.adjoint() - 2.0 * ComplexMatrix::Identity(2, 2)).norm() == 0.0);
  CHECK_THROWS_AS(make_orthogonal_pilots(4, 3), ConfigError);
}

TEST_CASE("least squares recovery and normal equations") {
  Rng rng(61);
  const ComplexMatrix h = draw_channel(4, 4, rng).h;
  const PilotMatrix p = make_orthogonal_pilots(4, 8);
  CHECK((ls_estimate(h * p.p, p) - h).norm() < 1e-10);

  const ComplexMatrix y = h * p.p + complex_noise(4, 8, 0.1, rng);
  const ComplexMatrix est = ls_estimate(y, p);
  CHECK(((y - est * p.p) * p.p.adjoint()).norm() < 1e-10);

  PilotMatrix singular;
  singular.p = ComplexMatrix::Ones(2, 3);
  CHECK_THROWS_AS(ls_estimate(ComplexMatrix::Ones(4, 3), singular), LinalgError);
  CHECK_THROWS_AS(ls_estimate(ComplexMatrix::Ones(4, 5), p), ShapeError);
}

TEST_CASE("least squares equals a gradient-descent minimizer") {
  Rng rng(62);
  const ComplexMatrix h = draw_channel(4, 4, rng).h;
  const PilotMatrix p = make_orthogonal_pilots(4, 8);
  const ComplexMatrix y = h * p.p + complex_noise(4, 8, noise_var_for_snr(10.0), rng);
  // Gradient of |Y - G P|_F^2 with respect to conj(G) is -(Y - G P) P^H.
  ComplexMatrix g = ComplexMatrix::Zero(4, 4);
  for (int it = 0; it < 2000; ++it) g += 0.05 * (y - g * p.p) * p.p.adjoint();
  const ComplexMatrix ls = ls_estimate(y, p);
  CHECK(std::abs(mse(ls, h) - mse(g, h)) < 1e-8);
}

TEST_CASE("mmse limits") {
  Rng rng(63);
  const ComplexMatrix h = draw_channel(3, 2, rng).h;
  const PilotMatrix p = make_orthogonal_pilots(2, 4);
  const ComplexMatrix y = h * p.p + complex_noise(3, 4, 0.2, rng);
  CHECK(mmse_estimate(y, p, 0.0) == ls_estimate(y, p));
  CHECK(mmse_estimate(y, p, 1e12).norm() < 1e-9);
  CHECK_THROWS_AS(mmse_estimate(y, p, -1.0), DomainError);
}

TEST_CASE("estimators are equivariant to unitary row transforms") {
  Rng rng(64);
  const ComplexMatrix h = draw_channel(3, 2, rng).h;
  const PilotMatrix p = make_orthogonal_pilots(2, 4);
  const ComplexMatrix y = h * p.p + complex_noise(3, 4, 0.2, rng);
  const ComplexMatrix u = Eigen::HouseholderQR<ComplexMatrix>(draw_channel(3, 3, rng).h).householderQ();
  CHECK((ls_estimate(u * y, p) - u * ls_estimate(y, p)).norm() < 1e-12);
  CHECK((mmse_estimate(u * y, p, 0.2) - u * mmse_estimate(y, p, 0.2)).norm() < 1e-12);
}

namespace {

// Independent enumerator: odometer over all index vectors, last user fastest.
std::vector<int> brute_force(const ComplexVector& y, const ComplexMatrix& h,
                             const Constellation& c) {
  const int k = static_cast<int>(h.cols());
  std::vector<int> idx(k, 0), best;
  double best_metric = 1e300;
  while (true) {
    ComplexVector x(k);
    for (int u = 0; u < k; ++u) x(u) = c.points[idx[u]];
    const double m = (y - h * x).squaredNorm();
    if (m < best_metric) {
      best_metric = m;
      best = idx;
    }
    int u = k - 1;
    while (u >= 0 && ++idx[u] == c.size()) idx[u--] = 0;
    if (u < 0) break;
  }
  return best;
}

}  // namespace

TEST_CASE("mld recovers noiseless symbols") {
  Rng rng(65);
  const Constellation c = make_constellation(Modulation::Qam16);
  const ComplexMatrix h = draw_channel(4, 3, rng).h;
  const Schedule det = detection_schedule(3, 10);
  const Frame f = transmit(h, det, random_symbols(det, c, rng), c, 0.0, rng);
  CHECK(mld_detect_frame(f, h) == f.symbols);
}

TEST_CASE("mld agrees with an independent enumerator") {
  Rng rng(66);
  const Constellation c = make_constellation(Modulation::Qpsk);
  for (int trial = 0; trial < 100; ++trial) {
    const ComplexMatrix h = draw_channel(4, 4, rng).h;
    const ComplexVector y = h * complex_noise(4, 1, 1.0, rng) + complex_noise(4, 1, 0.5, rng);
    CHECK(mld_detect(y, h, c, std::vector<bool>(4, true)) == brute_force(y, h, c));
  }
}

TEST_CASE("mld for one user is the nearest scaled point") {
  Rng rng(67);
  const Constellation c = make_constellation(Modulation::Qam16);
  for (int trial = 0; trial < 200; ++trial) {
    const ComplexMatrix h = draw_channel(1, 1, rng).h;
    const cd y(rng.normal(), rng.normal());
    int best = 0;
    for (int s = 1; s < 16; ++s)
      if (std::norm(y - h(0, 0) * c.points[s]) < std::norm(y - h(0, 0) * c.points[best])) best = s;
    CHECK(mld_detect(ComplexVector::Constant(1, y), h, c, {true})[0] == best);
  }
}

TEST_CASE("mld masks, ties, scaling and capacity") {
  Rng rng(68);
  const Constellation c = make_constellation(Modulation::Qpsk);
  const ComplexMatrix h = draw_channel(3, 2, rng).h;
  const ComplexVector y = c.points[2] * h.col(1);
  const std::vector<int> d = mld_detect(y, h, c, {false, true});
  CHECK(d[0] == -1);
  CHECK(d[1] == 2);
  // All hypotheses tie at y = 0 with a zero channel: the smallest index vector wins.
  CHECK(mld_detect(ComplexVector::Zero(3), ComplexMatrix::Zero(3, 2), c, {true, true}) ==
        std::vector<int>{0, 0});
  const ComplexVector yn = y + complex_noise(3, 1, 0.5, rng);
  CHECK(mld_detect(3.7 * yn, 3.7 * h, c, {true, true}) == mld_detect(yn, h, c, {true, true}));

  const Constellation q16 = make_constellation(Modulation::Qam16);
  const ComplexMatrix big = draw_channel(6, 6, rng).h;
  CHECK_THROWS_AS(mld_detect(ComplexVector::Zero(6), big, q16, std::vector<bool>(6, true)),
                  CapacityError);
  CHECK_NOTHROW(mld_detect(ComplexVector::Zero(6), big, q16,
                           {true, true, true, true, true, false}));
  CHECK_THROWS_AS(mld_detect(ComplexVector::Zero(2), h, c, {true, true}), ShapeError);
}

TEST_CASE("symbol error rate") {
  IndexMatrix a(2, 2), b(2, 2);
  a << 0, 1, 2, 3;
  b << 0, 1, 2, 3;
  CHECK(ser(a, b) == 0.0);
  b << 1, 0, 3, 2;
  CHECK(ser(a, b) == 1.0);
  b << 0, 0, 2, 0;
  CHECK(ser(a, b) == 0.5);
  CHECK_THROWS_AS(ser(a, IndexMatrix::Zero(1, 4)), DomainError);
}
