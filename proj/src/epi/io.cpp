#include "episurr/epi/io.hpp"

#include "episurr/common/error.hpp"

#include <ostream>
#include <string>

namespace episurr::epi {

using nlohmann::json;

namespace {

struct AgeField {
    const char* name;
    AgeArray EpiParameters::*member;
};

constexpr AgeField kAgeFields[] = {
    {"time_exposed", &EpiParameters::time_exposed},
    {"time_infected_no_symptoms", &EpiParameters::time_infected_no_symptoms},
    {"time_infected_symptoms", &EpiParameters::time_infected_symptoms},
    {"time_infected_severe", &EpiParameters::time_infected_severe},
    {"time_infected_critical", &EpiParameters::time_infected_critical},
    {"transmission_probability", &EpiParameters::transmission_probability},
    {"symptomatic_per_no_symptoms", &EpiParameters::symptomatic_per_no_symptoms},
    {"severe_per_symptomatic", &EpiParameters::severe_per_symptomatic},
    {"critical_per_severe", &EpiParameters::critical_per_severe},
    {"deaths_per_critical", &EpiParameters::deaths_per_critical},
};

AgeArray age_array_from_json(const json& j, const std::string& field)
{
    if (j.is_number()) {
        AgeArray out;
        out.fill(j.get<double>());
        return out;
    }
    if (!j.is_array() || j.size() != kAgeGroups) {
        throw InvalidArgument(field + ": expected a number or an array of " + std::to_string(kAgeGroups) + " numbers");
    }
    AgeArray out{};
    for (std::size_t a = 0; a < kAgeGroups; ++a) {
        if (!j[a].is_number()) {
            throw InvalidArgument(field + "[" + std::to_string(a) + "]: expected a number");
        }
        out[a] = j[a].get<double>();
    }
    return out;
}

double number_field(const json& j, const std::string& field)
{
    if (!j.is_number()) {
        throw InvalidArgument(field + ": expected a number");
    }
    return j.get<double>();
}

} // namespace

json to_json(const EpiParameters& params)
{
    json j = json::object();
    for (const auto& f : kAgeFields) {
        j[f.name] = params.*(f.member);
    }
    j["non_isolated_no_symptoms"] = params.non_isolated_no_symptoms;
    j["non_isolated_symptoms"] = params.non_isolated_symptoms;
    return j;
}

EpiParameters parameters_from_json(const json& j, EpiParameters base)
{
    if (!j.is_object()) {
        throw InvalidArgument("parameters: expected an object");
    }
    for (const auto& f : kAgeFields) {
        if (j.contains(f.name)) {
            base.*(f.member) = age_array_from_json(j.at(f.name), std::string("parameters.") + f.name);
        }
    }
    if (j.contains("non_isolated_no_symptoms")) {
        base.non_isolated_no_symptoms =
            number_field(j.at("non_isolated_no_symptoms"), "parameters.non_isolated_no_symptoms");
    }
    if (j.contains("non_isolated_symptoms")) {
        base.non_isolated_symptoms = number_field(j.at("non_isolated_symptoms"), "parameters.non_isolated_symptoms");
    }
    base.validate();
    return base;
}

json to_json(const ContactMatrix& m)
{
    json rows = json::array();
    for (std::size_t i = 0; i < kAgeGroups; ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < kAgeGroups; ++k) {
            row.push_back(m(i, k));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ContactMatrix contact_matrix_from_json(const json& j)
{
    if (!j.is_array() || j.size() != kAgeGroups) {
        throw InvalidArgument("contact matrix: expected 6 rows");
    }
    ContactMatrix m;
    for (std::size_t i = 0; i < kAgeGroups; ++i) {
        if (!j[i].is_array() || j[i].size() != kAgeGroups) {
            throw InvalidArgument("contact matrix row " + std::to_string(i) + ": expected 6 numbers");
        }
        for (std::size_t k = 0; k < kAgeGroups; ++k) {
            m(i, k) = number_field(j[i][k], "contact matrix entry");
        }
    }
    return m;
}

json to_json(const ContactPolicy& policy)
{
    json cps = json::array();
    for (const auto& cp : policy.change_points) {
        json c = {{"day", cp.day}, {"reduction", cp.reduction}};
        if (cp.matrix) {
            c["matrix"] = to_json(*cp.matrix);
        }
        cps.push_back(std::move(c));
    }
    return json{
        {"baseline_contacts", to_json(policy.baseline)},
        {"ramp_width", policy.ramp_width},
        {"change_points", std::move(cps)},
    };
}

ContactPolicy policy_from_json(const json& j, ContactPolicy base)
{
    if (!j.is_object()) {
        throw InvalidArgument("policy: expected an object");
    }
    if (j.contains("baseline_contacts")) {
        base.baseline = contact_matrix_from_json(j.at("baseline_contacts"));
    }
    if (j.contains("ramp_width")) {
        base.ramp_width = number_field(j.at("ramp_width"), "ramp_width");
    }
    if (j.contains("change_points")) {
        const auto& cps = j.at("change_points");
        if (!cps.is_array()) {
            throw InvalidArgument("change_points: expected an array");
        }
        base.change_points.clear();
        for (const auto& c : cps) {
            ContactChangePoint cp;
            cp.day = number_field(c.at("day"), "change_points.day");
            cp.reduction = c.contains("reduction") ? number_field(c.at("reduction"), "change_points.reduction") : 0.0;
            if (c.contains("matrix")) {
                cp.matrix = contact_matrix_from_json(c.at("matrix"));
            }
            base.change_points.push_back(cp);
        }
    }
    base.validate();
    return base;
}

json to_json(const CompartmentState& state)
{
    json rows = json::array();
    for (std::size_t a = 0; a < kAgeGroups; ++a) {
        json row = json::array();
        for (std::size_t s = 0; s < kStates; ++s) {
            row.push_back(state.values[a * kStates + s]);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

CompartmentState state_from_json(const json& j)
{
    if (!j.is_array() || j.size() != kAgeGroups) {
        throw InvalidArgument("state: expected 6 rows of 8 numbers");
    }
    CompartmentState state;
    for (std::size_t a = 0; a < kAgeGroups; ++a) {
        if (!j[a].is_array() || j[a].size() != kStates) {
            throw InvalidArgument("state row " + std::to_string(a) + ": expected 8 numbers");
        }
        for (std::size_t s = 0; s < kStates; ++s) {
            state.values[a * kStates + s] = number_field(j[a][s], "state entry");
        }
    }
    return state;
}

void write_trajectories_csv(std::ostream& out, std::span<const DailyTrajectory> trajectories)
{
    const auto old_precision = out.precision(12);
    out << "day,node,age,state,value\n";
    if (trajectories.empty()) {
        out.precision(old_precision);
        return;
    }
    const std::size_t days = trajectories.front().days.size();
    const auto& groups = default_age_groups();
    for (std::size_t d = 0; d < days; ++d) {
        for (std::size_t n = 0; n < trajectories.size(); ++n) {
            const auto& x = trajectories[n].days.at(d);
            for (std::size_t a = 0; a < kAgeGroups; ++a) {
                for (State s : kAllStates) {
                    out << d << ',' << n << ',' << groups[a].label << ',' << state_name(s) << ',' << x(a, s) << '\n';
                }
            }
        }
    }
    out.precision(old_precision);
}

void write_trajectories_ndjson(std::ostream& out, std::span<const DailyTrajectory> trajectories)
{
    if (trajectories.empty()) {
        return;
    }
    const std::size_t days = trajectories.front().days.size();
    for (std::size_t d = 0; d < days; ++d) {
        for (std::size_t n = 0; n < trajectories.size(); ++n) {
            json line = {{"day", d}, {"node", n}, {"values", to_json(trajectories[n].days.at(d))}};
            out << line.dump() << '\n';
        }
    }
}

} // namespace episurr::epi
