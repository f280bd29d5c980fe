#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace episurr::epi {

inline constexpr std::size_t kAgeGroups = 6;
inline constexpr std::size_t kStates = 8;
inline constexpr std::size_t kCompartments = kAgeGroups * kStates;

enum class State : std::size_t {
    Susceptible = 0,
    Exposed,
    InfectedNoSymptoms,
    InfectedSymptoms,
    InfectedSevere,
    InfectedCritical,
    Recovered,
    Dead,
};

inline constexpr std::array<State, kStates> kAllStates = {
    State::Susceptible,    State::Exposed,          State::InfectedNoSymptoms, State::InfectedSymptoms,
    State::InfectedSevere, State::InfectedCritical, State::Recovered,          State::Dead,
};

/// Short names used in CSV/JSON output: S, E, INS, ISy, ISev, ICr, R, D.
std::string_view state_name(State s);
State state_from_name(std::string_view name);

/// Severe, critical and dead persons do not commute.
constexpr bool is_mobile(State s)
{
    return s != State::InfectedSevere && s != State::InfectedCritical && s != State::Dead;
}

struct AgeGroupSpec {
    std::size_t index;
    std::string label;
    double population_share;
};

using AgeShares = std::array<double, kAgeGroups>;

/// The six age brackets with a synthetic Germany-like population split.
const std::array<AgeGroupSpec, kAgeGroups>& default_age_groups();
AgeShares default_age_shares();

/// Throws InvalidArgument unless all shares are in [0,1] and sum to 1 within 1e-12.
void validate_age_shares(const AgeShares& shares);

/// Person counts for one region, age-major: index = age * kStates + state.
struct CompartmentState {
    std::array<double, kCompartments> values{};

    static constexpr std::size_t index(std::size_t age, State s)
    {
        return age * kStates + static_cast<std::size_t>(s);
    }

    double& operator()(std::size_t age, State s) { return values[index(age, s)]; }
    double operator()(std::size_t age, State s) const { return values[index(age, s)]; }

    double age_total(std::size_t age) const;
    double state_total(State s) const;
    double total() const;

    bool operator==(const CompartmentState&) const = default;
};

/// Counts in every age group allocated from per-state totals by age share.
CompartmentState allocate_by_age(const std::array<double, kStates>& state_totals, const AgeShares& shares);

/// Consecutive daily states; entry d is the state at day d.
struct DailyTrajectory {
    std::vector<CompartmentState> days;

    std::size_t horizon() const { return days.empty() ? 0 : days.size() - 1; }
};

} // namespace episurr::epi
