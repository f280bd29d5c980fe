#include "episurr/epi/contact_policy.hpp"

#include "episurr/common/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace episurr::epi {

ContactMatrix ContactMatrix::scaled(double factor) const
{
    ContactMatrix out;
    for (std::size_t k = 0; k < values.size(); ++k) {
        out.values[k] = factor * values[k];
    }
    return out;
}

ContactMatrix default_baseline_contacts()
{
    // Synthetic, assortative pattern with row sums between ~6 and ~12 daily contacts.
    return ContactMatrix{{
        2.0, 1.0, 1.6, 2.2, 0.9, 0.2, //
        0.6, 5.5, 1.4, 2.6, 0.7, 0.2, //
        0.4, 0.6, 6.0, 3.6, 1.0, 0.3, //
        0.3, 0.7, 2.4, 5.4, 1.5, 0.4, //
        0.2, 0.4, 1.2, 2.6, 3.2, 0.6, //
        0.1, 0.3, 0.8, 1.6, 1.4, 1.6, //
    }};
}

ContactMatrix ContactChangePoint::target(const ContactMatrix& baseline) const
{
    if (matrix) {
        return *matrix;
    }
    return baseline.scaled(1.0 - reduction);
}

void ContactPolicy::validate() const
{
    if (!(ramp_width > 0.0 && ramp_width < 1.0)) {
        throw InvalidArgument("ramp_width must lie in (0,1)");
    }
    if (change_points.size() > kMaxChangePoints) {
        throw InvalidArgument("at most " + std::to_string(kMaxChangePoints) + " change points are supported");
    }
    for (double v : baseline.values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw InvalidArgument("baseline contacts must be nonnegative");
        }
    }
    for (std::size_t m = 0; m < change_points.size(); ++m) {
        const auto& cp = change_points[m];
        if (!(cp.reduction >= 0.0 && cp.reduction < 1.0)) {
            throw InvalidArgument("change point reduction must lie in [0,1)");
        }
        if (!(cp.day > 0.0) || !std::isfinite(cp.day)) {
            throw InvalidArgument("change point day must be positive");
        }
        if (cp.matrix) {
            for (double v : cp.matrix->values) {
                if (!(v >= 0.0)) {
                    throw InvalidArgument("change point contacts must be nonnegative");
                }
            }
        }
        if (m > 0 && !(cp.day >= change_points[m - 1].day + ramp_width)) {
            throw InvalidArgument("change point days must be increasing with non-overlapping ramps");
        }
    }
}

ContactSchedule::ContactSchedule(const ContactPolicy& policy) : ramp_width_(policy.ramp_width)
{
    policy.validate();
    plateaus_.push_back(policy.baseline);
    for (const auto& cp : policy.change_points) {
        days_.push_back(cp.day);
        plateaus_.push_back(cp.target(policy.baseline));
    }
}

std::vector<double> ContactSchedule::breakpoints() const
{
    std::vector<double> out;
    for (double d : days_) {
        out.push_back(d);
        out.push_back(d + ramp_width_);
    }
    return out;
}

ContactMatrix ContactSchedule::at(double t) const
{
    // Ramps never overlap, so at most one is active.
    std::size_t m = 0;
    while (m < days_.size() && t > days_[m]) {
        ++m;
    }
    if (m == 0) {
        return plateaus_[0];
    }
    const double start = days_[m - 1];
    if (t >= start + ramp_width_) {
        return plateaus_[m];
    }
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * (t - start) / ramp_width_));
    const ContactMatrix& prev = plateaus_[m - 1];
    const ContactMatrix& next = plateaus_[m];
    ContactMatrix out;
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        out.values[k] = next.values[k] + (prev.values[k] - next.values[k]) * w;
    }
    return out;
}

ContactMatrix contact_rate(const ContactPolicy& policy, double t)
{
    return ContactSchedule(policy).at(t);
}

} // namespace episurr::epi
