#include "blindvi/detection.hpp"

#include <limits>
#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {
namespace {

// Depth-first enumeration over users in index order. The residual is
// updated incrementally; visiting candidates in ascending index order and
// replacing the best only on a strict improvement gives lexicographic ties.
struct Search {
  const ComplexMatrix& h;
  const Constellation& c;
  std::vector<int> users;
  std::vector<int> current;
  std::vector<int> best;
  std::vector<ComplexVector> residual;  // residual[d]: y minus the first d users
  double best_metric = std::numeric_limits<double>::infinity();

  void descend(std::size_t depth) {
    if (depth == users.size()) {
      const double m = residual[depth].squaredNorm();
      if (m < best_metric) {
        best_metric = m;
        best = current;
      }
      return;
    }
    const auto col = h.col(users[depth]);
    for (int s = 0; s < c.size(); ++s) {
      current[depth] = s;
      residual[depth + 1].noalias() = residual[depth] - col * c.points[static_cast<std::size_t>(s)];
      descend(depth + 1);
    }
  }
};

}  // namespace

std::vector<int> mld_detect(const ComplexVector& y, const ComplexMatrix& h, const Constellation& c,
                            const std::vector<bool>& active, std::uint64_t max_hypotheses) {
  if (y.size() != h.rows()) {
    throw ShapeError("mld_detect: y has " + std::to_string(y.size()) + " entries, H has " +
                     std::to_string(h.rows()) + " rows");
  }
  if (static_cast<Eigen::Index>(active.size()) != h.cols()) {
    throw ShapeError("mld_detect: active mask length does not match H columns");
  }
  Search search{h, c, {}, {}, {}, {}};
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (active[k]) search.users.push_back(static_cast<int>(k));
  }
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < search.users.size(); ++i) {
    count *= static_cast<std::uint64_t>(c.size());
    if (count > max_hypotheses) {
      throw CapacityError("mld_detect: " + std::to_string(c.size()) + "^" +
                          std::to_string(search.users.size()) + " hypotheses exceed the limit of " +
                          std::to_string(max_hypotheses));
    }
  }
  search.current.assign(search.users.size(), 0);
  search.residual.assign(search.users.size() + 1, ComplexVector(y.size()));
  search.residual[0] = y;
  search.descend(0);

  std::vector<int> out(active.size(), -1);
  for (std::size_t i = 0; i < search.users.size(); ++i) {
    out[static_cast<std::size_t>(search.users[i])] = search.best[i];
  }
  return out;
}

IndexMatrix mld_detect_frame(const Frame& frame, const ComplexMatrix& h_hat) {
  const int k = frame.users();
  IndexMatrix out(k, frame.slots());
  for (int t = 0; t < frame.slots(); ++t) {
    const std::vector<int> d =
        mld_detect(frame.rx.col(t), h_hat, frame.constellation, frame.schedule.slots[t]);
    for (int u = 0; u < k; ++u) out(u, t) = d[static_cast<std::size_t>(u)];
  }
  return out;
}

double ser(const IndexMatrix& decided, const IndexMatrix& truth) {
  if (decided.rows() != truth.rows() || decided.cols() != truth.cols()) {
    throw DomainError("ser: shape mismatch");
  }
  if (decided.size() == 0) throw DomainError("ser: empty input");
  return static_cast<double>((decided.array() != truth.array()).count()) /
         static_cast<double>(decided.size());
}

}  // namespace blindvi
