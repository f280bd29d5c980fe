#include "episurr/epi/compartments.hpp"

#include "episurr/common/error.hpp"

#include <cmath>
#include <string>

namespace episurr::epi {

namespace {
constexpr std::array<std::string_view, kStates> kStateNames = {"S", "E", "INS", "ISy", "ISev", "ICr", "R", "D"};
}

std::string_view state_name(State s)
{
    return kStateNames[static_cast<std::size_t>(s)];
}

State state_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kStates; ++i) {
        if (kStateNames[i] == name) {
            return static_cast<State>(i);
        }
    }
    throw InvalidArgument("unknown infection state '" + std::string(name) + "'");
}

const std::array<AgeGroupSpec, kAgeGroups>& default_age_groups()
{
    static const std::array<AgeGroupSpec, kAgeGroups> groups = {{
        {0, "0-4", 0.047},
        {1, "5-14", 0.090},
        {2, "15-34", 0.229},
        {3, "35-59", 0.353},
        {4, "60-79", 0.213},
        {5, "80+", 0.068},
    }};
    return groups;
}

AgeShares default_age_shares()
{
    AgeShares shares{};
    for (const auto& g : default_age_groups()) {
        shares[g.index] = g.population_share;
    }
    return shares;
}

void validate_age_shares(const AgeShares& shares)
{
    double sum = 0.0;
    for (double s : shares) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw InvalidArgument("age share outside [0,1]");
        }
        sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidArgument("age shares sum to " + std::to_string(sum) + ", expected 1");
    }
}

double CompartmentState::age_total(std::size_t age) const
{
    double sum = 0.0;
    for (std::size_t s = 0; s < kStates; ++s) {
        sum += values[age * kStates + s];
    }
    return sum;
}

double CompartmentState::state_total(State s) const
{
    double sum = 0.0;
    for (std::size_t a = 0; a < kAgeGroups; ++a) {
        sum += (*this)(a, s);
    }
    return sum;
}

double CompartmentState::total() const
{
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum;
}

CompartmentState allocate_by_age(const std::array<double, kStates>& state_totals, const AgeShares& shares)
{
    CompartmentState out;
    for (std::size_t a = 0; a < kAgeGroups; ++a) {
        for (std::size_t s = 0; s < kStates; ++s) {
            out.values[a * kStates + s] = state_totals[s] * shares[a];
        }
    }
    return out;
}

} // namespace episurr::epi
