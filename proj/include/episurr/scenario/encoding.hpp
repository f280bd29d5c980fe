#pragma once

#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"

#include <array>
#include <span>
#include <vector>

namespace episurr::scenario {

inline constexpr std::size_t kInputDays = 5;
inline constexpr std::size_t kContactEntries = epi::kAgeGroups * epi::kAgeGroups;
/// Three contact matrices, three change days, three reductions.
inline constexpr std::size_t kDescriptorWidth = epi::kMaxChangePoints * kContactEntries + 2 * epi::kMaxChangePoints;
inline constexpr std::size_t kNonSpatialWidth = epi::kCompartments + kDescriptorWidth;
inline constexpr std::size_t kSpatialWidth = kInputDays * epi::kCompartments + kDescriptorWidth;

static_assert(kNonSpatialWidth == 162);
static_assert(kSpatialWidth == 354);

/// ln(1 + x). Throws DomainError for x < 0 or NaN.
double transform_log1p(double x);
/// exp(y) - 1.
double inverse_log1p(double y);

/// Intervention block: for each used slot m the post-change contact matrix, then the
/// change days, then the reductions. Slots beyond the policy's change count are zero.
std::array<double, kDescriptorWidth> encode_descriptor(const epi::ContactPolicy& policy);

/// 5 x 162, row-major. Row d holds log1p of day d's compartments, then the descriptor.
/// Throws ShapeError unless exactly five days are given.
std::vector<float> encode_nonspatial(std::span<const epi::CompartmentState> days, const epi::ContactPolicy& policy);

/// n x 354, row-major. Row i holds log1p of node i's five input days (day-major),
/// then the descriptor, identical for all nodes. Throws ShapeError unless every node
/// has exactly five days.
std::vector<float> encode_spatial(std::span<const std::vector<epi::CompartmentState>> nodes,
                                  const epi::ContactPolicy& policy);

/// Inverse of the compartment columns of one encoded row (48 values).
epi::CompartmentState decode_compartments(std::span<const float> encoded);

} // namespace episurr::scenario
