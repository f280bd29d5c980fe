#pragma once

#include "episurr/epi/compartments.hpp"

#include <array>
#include <optional>
#include <vector>

namespace episurr::epi {

/// 6x6 mean daily contacts, row-major: entry (i, j) is contacts of group i with group j.
struct ContactMatrix {
    std::array<double, kAgeGroups * kAgeGroups> values{};

    double& operator()(std::size_t i, std::size_t j) { return values[i * kAgeGroups + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * kAgeGroups + j]; }

    ContactMatrix scaled(double factor) const;

    bool operator==(const ContactMatrix&) const = default;
};

/// Synthetic baseline contact pattern (not derived from survey data).
ContactMatrix default_baseline_contacts();

struct ContactChangePoint {
    double day = 1.0;
    /// Homogeneous reduction r in [0, 1): contacts become (1 - r) * baseline.
    double reduction = 0.0;
    /// Replaces (1 - r) * baseline as the post-change matrix when set.
    std::optional<ContactMatrix> matrix;

    ContactMatrix target(const ContactMatrix& baseline) const;
};

inline constexpr std::size_t kMaxChangePoints = 3;
inline constexpr double kDefaultRampWidth = 0.5;

struct ContactPolicy {
    ContactMatrix baseline = default_baseline_contacts();
    std::vector<ContactChangePoint> change_points;
    double ramp_width = kDefaultRampWidth;

    /// Throws InvalidArgument if days are not strictly increasing, two ramps overlap,
    /// a reduction is outside [0,1), the ramp width is outside (0,1) or a matrix entry
    /// is negative.
    void validate() const;
};

/// Precomputed plateaus of a policy for repeated evaluation.
class ContactSchedule {
public:
    explicit ContactSchedule(const ContactPolicy& policy);

    ContactMatrix at(double t) const;

    /// Plateau after change m (m = 0 is the baseline).
    const ContactMatrix& plateau(std::size_t m) const { return plateaus_[m]; }

    /// Ramp starts and ends in increasing order. The second derivative jumps there,
    /// so solvers should not step across them.
    std::vector<double> breakpoints() const;

private:
    std::vector<double> days_;
    std::vector<ContactMatrix> plateaus_;
    double ramp_width_;
};

/// Contact matrix at time t. Before the first change it is the baseline; after
/// c_m + delta it is the plateau of change m; inside (c_m, c_m + delta) a cosine
/// ramp joins the previous plateau to the next with zero slope at both ends.
ContactMatrix contact_rate(const ContactPolicy& policy, double t);

} // namespace episurr::epi
