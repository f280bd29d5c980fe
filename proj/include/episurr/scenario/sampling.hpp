#pragma once

#include "episurr/common/random.hpp"
#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"

#include <string_view>
#include <vector>

namespace episurr::scenario {

enum class Regime { outbreak, persistent_threat };

std::string_view regime_name(Regime r);
Regime regime_from_name(std::string_view name);

/// Bands per 100 000 inhabitants for the outbreak regime.
inline constexpr double kOutbreakSymptomsMin = 7.0;
inline constexpr double kOutbreakSymptomsMax = 100.0;
inline constexpr double kOutbreakExposedMin = 25.0;
inline constexpr double kOutbreakExposedMax = 500.0;
inline constexpr double kOutbreakNoSymptomsMin = 7.0;
inline constexpr double kOutbreakNoSymptomsMax = 100.0;

/// Population shares for the persistent-threat regime.
inline constexpr double kPersistentShareMin = 0.0001;
inline constexpr double kPersistentSymptomsMax = 0.05;
inline constexpr double kPersistentSubCap = 0.225;
inline constexpr double kPersistentInfectedCap = 0.5;

/// Counts per 100 000 inhabitants.
struct OutbreakDraws {
    double symptoms = 0.0;
    double exposed = 0.0;
    double no_symptoms = 0.0;
};

epi::CompartmentState outbreak_state(const OutbreakDraws& draws, double population, const epi::AgeShares& shares);

/// Low prevalence: I_Sy, E and I_NS drawn per 100 000, everybody else susceptible.
epi::CompartmentState sample_outbreak_init(Rng& rng, double population, const epi::AgeShares& shares);

struct PersistentShares {
    double exposed = 0.0;
    double no_symptoms = 0.0;
    double symptoms = 0.0;
    double recovered = 0.0;
};

/// Applies the joint infected cap and builds the state; `recovered` is taken as is.
epi::CompartmentState persistent_state(const PersistentShares& shares, double population,
                                       const epi::AgeShares& age_shares);

/// Broad prevalence with a random recovered fraction.
epi::CompartmentState sample_persistent_init(Rng& rng, double population, const epi::AgeShares& shares);

epi::CompartmentState sample_init(Regime regime, Rng& rng, double population, const epi::AgeShares& shares);

inline constexpr int kChangeWindow = 30;

/// M uniform in {0..max_changes}, distinct sorted days in 1..window, r uniform in [0,1).
std::vector<epi::ContactChangePoint> sample_change_points(Rng& rng, std::size_t max_changes = epi::kMaxChangePoints,
                                                          int window = kChangeWindow);

/// Exactly `count` change points with the same day and reduction law.
std::vector<epi::ContactChangePoint> sample_change_points_exact(Rng& rng, std::size_t count,
                                                                int window = kChangeWindow);

} // namespace episurr::scenario
