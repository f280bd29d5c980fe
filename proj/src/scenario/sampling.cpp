#include "episurr/scenario/sampling.hpp"

#include "episurr/common/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace episurr::scenario {

using epi::State;

std::string_view regime_name(Regime r)
{
    return r == Regime::outbreak ? "outbreak" : "persistent_threat";
}

Regime regime_from_name(std::string_view name)
{
    if (name == "outbreak") return Regime::outbreak;
    if (name == "persistent_threat") return Regime::persistent_threat;
    throw InvalidArgument("unknown regime '" + std::string(name) + "'");
}

namespace {

void check_population(double population)
{
    if (!(population > 0.0)) throw InvalidArgument("population must be positive");
}

constexpr std::size_t idx(State s) { return static_cast<std::size_t>(s); }

} // namespace

epi::CompartmentState outbreak_state(const OutbreakDraws& draws, double population, const epi::AgeShares& shares)
{
    check_population(population);
    if (draws.symptoms < 0.0 || draws.exposed < 0.0 || draws.no_symptoms < 0.0) {
        throw InvalidArgument("outbreak draws must be nonnegative");
    }
    const double per = population / 100'000.0;
    std::array<double, epi::kStates> totals{};
    totals[idx(State::InfectedSymptoms)] = per * draws.symptoms;
    totals[idx(State::Exposed)] = per * draws.exposed;
    totals[idx(State::InfectedNoSymptoms)] = per * draws.no_symptoms;
    const double infected = std::accumulate(totals.begin(), totals.end(), 0.0);
    if (infected > population) {
        throw InvalidArgument("population too small for the outbreak bands");
    }
    totals[idx(State::Susceptible)] = population - infected;
    return epi::allocate_by_age(totals, shares);
}

epi::CompartmentState sample_outbreak_init(Rng& rng, double population, const epi::AgeShares& shares)
{
    OutbreakDraws d;
    d.symptoms = rng.uniform(kOutbreakSymptomsMin, kOutbreakSymptomsMax);
    d.exposed = rng.uniform(kOutbreakExposedMin, kOutbreakExposedMax);
    d.no_symptoms = rng.uniform(kOutbreakNoSymptomsMin, kOutbreakNoSymptomsMax);
    return outbreak_state(d, population, shares);
}

epi::CompartmentState persistent_state(const PersistentShares& s, double population, const epi::AgeShares& age_shares)
{
    check_population(population);
    double e = s.exposed;
    double ns = s.no_symptoms;
    double sy = s.symptoms;
    if (e < 0.0 || ns < 0.0 || sy < 0.0 || s.recovered < 0.0) {
        throw InvalidArgument("persistent shares must be nonnegative");
    }
    const double sum = e + ns + sy;
    if (sum > kPersistentInfectedCap) {
        const double f = kPersistentInfectedCap / sum;
        e *= f;
        ns *= f;
        sy *= f;
    }
    const double infected = e + ns + sy;
    if (s.recovered > 1.0 - infected + 1e-15) {
        throw InvalidArgument("recovered share exceeds the feasible interval");
    }
    std::array<double, epi::kStates> totals{};
    totals[idx(State::Exposed)] = population * e;
    totals[idx(State::InfectedNoSymptoms)] = population * ns;
    totals[idx(State::InfectedSymptoms)] = population * sy;
    totals[idx(State::Recovered)] = population * s.recovered;
    totals[idx(State::Susceptible)] = population * std::max(0.0, 1.0 - infected - s.recovered);
    return epi::allocate_by_age(totals, age_shares);
}

epi::CompartmentState sample_persistent_init(Rng& rng, double population, const epi::AgeShares& shares)
{
    PersistentShares s;
    s.symptoms = rng.uniform(kPersistentShareMin, kPersistentSymptomsMax);
    s.exposed = rng.uniform(kPersistentShareMin, kPersistentSubCap);
    s.no_symptoms = rng.uniform(kPersistentShareMin, kPersistentSubCap);
    const double sum = s.exposed + s.no_symptoms + s.symptoms;
    const double infected = std::min(sum, kPersistentInfectedCap);
    s.recovered = rng.uniform(0.0, 1.0 - infected);
    return persistent_state(s, population, shares);
}

epi::CompartmentState sample_init(Regime regime, Rng& rng, double population, const epi::AgeShares& shares)
{
    return regime == Regime::outbreak ? sample_outbreak_init(rng, population, shares)
                                      : sample_persistent_init(rng, population, shares);
}

std::vector<epi::ContactChangePoint> sample_change_points_exact(Rng& rng, std::size_t count, int window)
{
    if (window < 1) throw InvalidArgument("change window must be at least one day");
    if (count > epi::kMaxChangePoints || count > static_cast<std::size_t>(window)) {
        throw InvalidArgument("too many change points for the window");
    }
    std::vector<int> days(static_cast<std::size_t>(window));
    std::iota(days.begin(), days.end(), 1);
    for (std::size_t k = 0; k < count; ++k) {
        std::swap(days[k], days[k + rng.below(days.size() - k)]);
    }
    days.resize(count);
    std::sort(days.begin(), days.end());
    std::vector<epi::ContactChangePoint> out;
    for (int d : days) {
        epi::ContactChangePoint cp;
        cp.day = d;
        cp.reduction = rng.uniform();
        out.push_back(cp);
    }
    return out;
}

std::vector<epi::ContactChangePoint> sample_change_points(Rng& rng, std::size_t max_changes, int window)
{
    if (max_changes > epi::kMaxChangePoints) throw InvalidArgument("at most three change points");
    return sample_change_points_exact(rng, rng.below(max_changes + 1), window);
}

} // namespace episurr::scenario
