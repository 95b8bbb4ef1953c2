#pragma once

#include <cstdint>
#include <vector>

#include "blindvi/channel.hpp"
#include "blindvi/constellation.hpp"

namespace blindvi {

inline constexpr std::uint64_t kMaxHypotheses = std::uint64_t{1} << 20;

/// argmin over every combination of active-user symbols of |y - H x|^2.
///
/// Inactive users get index -1 and are held at zero. Ties go to the
/// lexicographically smallest index vector (user 0 most significant).
/// Throws CapacityError beyond `max_hypotheses`, ShapeError on mismatched sizes.
std::vector<int> mld_detect(const ComplexVector& y, const ComplexMatrix& h, const Constellation& c,
                            const std::vector<bool>& active,
                            std::uint64_t max_hypotheses = kMaxHypotheses);

/// Detects every slot of a frame with the given channel estimate; K x T.
IndexMatrix mld_detect_frame(const Frame& frame, const ComplexMatrix& h_hat);

/// Fraction of positions where the decisions differ. Throws DomainError on a shape mismatch.
double ser(const IndexMatrix& decided, const IndexMatrix& truth);

}  // namespace blindvi
