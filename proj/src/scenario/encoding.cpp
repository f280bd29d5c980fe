#include "episurr/scenario/encoding.hpp"

#include "episurr/common/error.hpp"

#include <cmath>
#include <string>

namespace episurr::scenario {

double transform_log1p(double x)
{
    if (!(x >= 0.0)) throw DomainError("log1p transform needs x >= 0, got " + std::to_string(x));
    return std::log1p(x);
}

double inverse_log1p(double y) { return std::expm1(y); }

std::array<double, kDescriptorWidth> encode_descriptor(const epi::ContactPolicy& policy)
{
    policy.validate();
    std::array<double, kDescriptorWidth> out{};
    const std::size_t days_at = epi::kMaxChangePoints * kContactEntries;
    const std::size_t reductions_at = days_at + epi::kMaxChangePoints;
    for (std::size_t m = 0; m < policy.change_points.size(); ++m) {
        const auto& cp = policy.change_points[m];
        const auto target = cp.target(policy.baseline);
        std::copy(target.values.begin(), target.values.end(), out.begin() + m * kContactEntries);
        out[days_at + m] = cp.day;
        out[reductions_at + m] = cp.reduction;
    }
    return out;
}

namespace {

void put_compartments(const epi::CompartmentState& x, float* out)
{
    for (std::size_t k = 0; k < epi::kCompartments; ++k) {
        out[k] = static_cast<float>(transform_log1p(std::max(0.0, x.values[k])));
    }
}

} // namespace

std::vector<float> encode_nonspatial(std::span<const epi::CompartmentState> days, const epi::ContactPolicy& policy)
{
    if (days.size() != kInputDays) {
        throw ShapeError("expected " + std::to_string(kInputDays) + " input days, got " + std::to_string(days.size()));
    }
    const auto descriptor = encode_descriptor(policy);
    std::vector<float> out(kInputDays * kNonSpatialWidth);
    for (std::size_t d = 0; d < kInputDays; ++d) {
        float* row = out.data() + d * kNonSpatialWidth;
        put_compartments(days[d], row);
        for (std::size_t k = 0; k < kDescriptorWidth; ++k) {
            row[epi::kCompartments + k] = static_cast<float>(descriptor[k]);
        }
    }
    return out;
}

std::vector<float> encode_spatial(std::span<const std::vector<epi::CompartmentState>> nodes,
                                  const epi::ContactPolicy& policy)
{
    const auto descriptor = encode_descriptor(policy);
    std::vector<float> out(nodes.size() * kSpatialWidth);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].size() != kInputDays) {
            throw ShapeError("node " + std::to_string(i) + " has " + std::to_string(nodes[i].size()) +
                             " input days, expected " + std::to_string(kInputDays));
        }
        float* row = out.data() + i * kSpatialWidth;
        for (std::size_t d = 0; d < kInputDays; ++d) put_compartments(nodes[i][d], row + d * epi::kCompartments);
        for (std::size_t k = 0; k < kDescriptorWidth; ++k) {
            row[kInputDays * epi::kCompartments + k] = static_cast<float>(descriptor[k]);
        }
    }
    return out;
}

epi::CompartmentState decode_compartments(std::span<const float> encoded)
{
    if (encoded.size() < epi::kCompartments) throw ShapeError("need 48 encoded compartment values");
    epi::CompartmentState x;
    for (std::size_t k = 0; k < epi::kCompartments; ++k) x.values[k] = inverse_log1p(encoded[k]);
    return x;
}

} // namespace episurr::scenario
