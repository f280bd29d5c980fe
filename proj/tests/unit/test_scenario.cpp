#include "episurr/common/error.hpp"
#include "episurr/scenario/dataset.hpp"
#include "episurr/scenario/encoding.hpp"
#include "episurr/scenario/sampling.hpp"

#include "generators.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace episurr;
using namespace episurr::scenario;
using epi::State;

namespace {

std::string bytes_of(const ScenarioConfig& config)
{
    std::ostringstream out(std::ios::binary);
    generate_dataset(config, out);
    return out.str();
}

ScenarioConfig small_spatial(std::uint64_t seed = 3)
{
    ScenarioConfig c;
    c.spatial = true;
    c.graph.nodes = 6;
    c.graph.density = 0.4;
    c.graph.seed = 2;
    c.n_samples = 5;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("outbreak initial states")
{
    const auto shares = epi::default_age_shares();
    const auto x = outbreak_state({kOutbreakSymptomsMin, kOutbreakExposedMin, kOutbreakNoSymptomsMin}, 1e5, shares);
    CHECK(x.state_total(State::InfectedSymptoms) == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(x.state_total(State::Exposed) == doctest::Approx(25.0).epsilon(1e-14));
    CHECK(x.state_total(State::Recovered) == 0.0);
    CHECK(x.state_total(State::Dead) == 0.0);
    CHECK(x.total() == doctest::Approx(1e5).epsilon(1e-14));

    const auto y = outbreak_state({7.0, 25.0, 7.0}, 2e5, shares);
    CHECK(y.state_total(State::InfectedSymptoms) == doctest::Approx(14.0).epsilon(1e-14));
    CHECK(y.state_total(State::Exposed) == doctest::Approx(50.0).epsilon(1e-14));

    CHECK_THROWS_AS(outbreak_state({7, 25, 7}, 0.0, shares), InvalidArgument);
    CHECK_THROWS_AS(outbreak_state({-1, 25, 7}, 1e5, shares), InvalidArgument);

    Rng rng(17);
    double sum = 0.0;
    const int n = 10'000;
    for (int k = 0; k < n; ++k) {
        const auto s = sample_outbreak_init(rng, 1e5, shares);
        const double sy = s.state_total(State::InfectedSymptoms);
        REQUIRE(sy >= 7.0);
        REQUIRE(sy <= 100.0);
        REQUIRE(s.state_total(State::Exposed) >= 25.0);
        REQUIRE(s.state_total(State::Exposed) <= 500.0);
        for (double v : s.values) REQUIRE(v >= 0.0);
        sum += sy;
    }
    CHECK(std::abs(sum / n - (7.0 + 100.0) / 2.0) < 2.0);
}

TEST_CASE("persistent-threat initial states")
{
    const auto shares = epi::default_age_shares();
    const double pop = 1e5;

    const auto capped = persistent_state({kPersistentSubCap, kPersistentSubCap, kPersistentSymptomsMax, 0.0}, pop, shares);
    const double infected = capped.state_total(State::Exposed) + capped.state_total(State::InfectedNoSymptoms) +
                            capped.state_total(State::InfectedSymptoms);
    CHECK(infected == doctest::Approx(0.5 * pop).epsilon(1e-14));
    CHECK(capped.state_total(State::Susceptible) + capped.state_total(State::Recovered) ==
          doctest::Approx(0.5 * pop).epsilon(1e-14));

    const auto full = persistent_state({0.1, 0.1, 0.05, 0.75}, pop, shares);
    CHECK(full.state_total(State::Susceptible) == doctest::Approx(0.0).epsilon(1e-12));

    // Over the cap: shares are rescaled to the joint cap before the recovered share is checked.
    const auto over = persistent_state({0.4, 0.4, 0.2, 0.5}, pop, shares);
    CHECK(over.state_total(State::Exposed) == doctest::Approx(0.2 * pop));
    CHECK_THROWS_AS(persistent_state({0.1, 0.1, 0.05, 0.8}, pop, shares), InvalidArgument);

    Rng rng(23);
    for (int k = 0; k < 10'000; ++k) {
        const auto s = sample_persistent_init(rng, pop, shares);
        for (double v : s.values) REQUIRE(v >= 0.0);
        REQUIRE(std::abs(s.total() / pop - 1.0) < 1e-12);
        const double inf = s.state_total(State::Exposed) + s.state_total(State::InfectedNoSymptoms) +
                           s.state_total(State::InfectedSymptoms);
        REQUIRE(inf <= 0.5 * pop * (1 + 1e-12));
        REQUIRE(s.state_total(State::InfectedSymptoms) >= kPersistentShareMin * pop * 0.999);
        REQUIRE(s.state_total(State::InfectedSevere) == 0.0);
    }
}

TEST_CASE("change point sampling")
{
    Rng rng(5);
    const int n = 100'000;
    double m_sum = 0.0;
    std::array<int, 4> counts{};
    for (int k = 0; k < n; ++k) {
        const auto cps = sample_change_points(rng);
        REQUIRE(cps.size() <= 3);
        ++counts[cps.size()];
        m_sum += static_cast<double>(cps.size());
        for (std::size_t m = 0; m < cps.size(); ++m) {
            REQUIRE(cps[m].day >= 1);
            REQUIRE(cps[m].day <= 30);
            REQUIRE(cps[m].day == std::floor(cps[m].day));
            REQUIRE(cps[m].reduction >= 0.0);
            REQUIRE(cps[m].reduction < 1.0);
            if (m > 0) REQUIRE(cps[m].day > cps[m - 1].day);
        }
    }
    CHECK(std::abs(m_sum / n - 1.5) < 0.02);
    for (int c : counts) CHECK(c > 0);
    CHECK(sample_change_points_exact(rng, 0).empty());
    CHECK(sample_change_points_exact(rng, 3).size() == 3);
    CHECK_THROWS_AS(sample_change_points_exact(rng, 4), InvalidArgument);
    CHECK_THROWS_AS(sample_change_points(rng, 4), InvalidArgument);
}

TEST_CASE("log1p transform")
{
    CHECK(transform_log1p(0.0) == 0.0);
    CHECK(transform_log1p(std::numbers::e - 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(transform_log1p(-1e-3), DomainError);
    CHECK_THROWS_AS(transform_log1p(std::nan("")), DomainError);
    Rng rng(1);
    double worst = 0.0;
    for (int k = 0; k < 1'000'000; ++k) {
        const double x = std::exp(rng.uniform(-20.0, 14.0));
        worst = std::max(worst, std::abs(inverse_log1p(transform_log1p(x)) - x) / x);
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("non-spatial encoding")
{
    CHECK(kNonSpatialWidth == 162);
    const auto x = outbreak_state({50, 200, 40}, 1e5, epi::default_age_shares());
    const std::vector<epi::CompartmentState> days(5, x);
    for (std::size_t m = 0; m <= 3; ++m) {
        epi::ContactPolicy policy;
        for (std::size_t k = 0; k < m; ++k) policy.change_points.push_back({5.0 * (k + 1), 0.2 * (k + 1), {}});
        const auto f = encode_nonspatial(days, policy);
        REQUIRE(f.size() == 5 * 162);
        for (std::size_t row = 0; row < 5; ++row) {
            const float* r = f.data() + row * 162;
            for (std::size_t slot = 0; slot < 3; ++slot) {
                bool all_zero = true;
                for (std::size_t k = 0; k < 36; ++k) all_zero = all_zero && r[48 + slot * 36 + k] == 0.0f;
                CHECK(all_zero == (slot >= m));
                CHECK((r[48 + 108 + slot] == 0.0f) == (slot >= m));
                CHECK((r[48 + 111 + slot] == 0.0f) == (slot >= m));
            }
            if (m > 0) {
                CHECK(r[48 + 108] == 5.0f);
                CHECK(r[48 + 111] == doctest::Approx(0.2));
                const auto base = epi::default_baseline_contacts();
                CHECK(r[48 + 7] == doctest::Approx(0.8 * base.values[7]));
            }
        }
    }

    const std::vector<epi::CompartmentState> zeros(5);
    const auto z = encode_nonspatial(zeros, {});
    for (std::size_t k = 0; k < 162; ++k) CHECK(z[k] == 0.0f);

    const auto f = encode_nonspatial(days, {});
    const auto back = decode_compartments(std::span(f).first(48));
    for (std::size_t k = 0; k < 48; ++k) {
        CHECK(back.values[k] == doctest::Approx(x.values[k]).epsilon(2e-6));
    }

    const std::vector<epi::CompartmentState> four(4, x);
    CHECK_THROWS_AS(encode_nonspatial(four, {}), ShapeError);
}

TEST_CASE("spatial encoding")
{
    CHECK(kSpatialWidth == 354);
    Rng rng(9);
    std::vector<std::vector<epi::CompartmentState>> nodes(4);
    for (auto& n : nodes) {
        for (int d = 0; d < 5; ++d) n.push_back(testing::random_state(rng, 1e5));
    }
    nodes[3] = nodes[1];
    epi::ContactPolicy policy;
    policy.change_points = {{3.0, 0.5, {}}, {12.0, 0.1, {}}};
    const auto f = encode_spatial(nodes, policy);
    REQUIRE(f.size() == 4 * 354);
    for (std::size_t k = 0; k < 354; ++k) CHECK(f[1 * 354 + k] == f[3 * 354 + k]);
    for (std::size_t row = 1; row < 4; ++row) {
        for (std::size_t k = 240; k < 354; ++k) REQUIRE(f[row * 354 + k] == f[k]);
    }
    // Day-major layout of the compartment block.
    CHECK(f[48 * 2 + 5] == static_cast<float>(std::log1p(nodes[0][2].values[5])));
    CHECK(f[240 + 108 + 2] == 0.0f);

    nodes[2].pop_back();
    CHECK_THROWS_AS(encode_spatial(nodes, policy), ShapeError);

    std::vector<std::vector<epi::CompartmentState>> many(400, nodes[0]);
    CHECK(encode_spatial(many, {}).size() == 400 * 354);
}

TEST_CASE("dataset generation")
{
    SUBCASE("empty dataset is header only")
    {
        auto c = small_spatial();
        c.n_samples = 0;
        std::istringstream in(bytes_of(c));
        const auto ds = read_dataset(in);
        CHECK(ds.records.empty());
        CHECK(ds.shape.feature_cols == 354);
    }
    SUBCASE("bytes depend only on the config")
    {
        auto c = small_spatial();
        const auto a = bytes_of(c);
        CHECK(a == bytes_of(c));
        c.threads = 3;
        CHECK(a == bytes_of(c));
        c.seed = 4;
        CHECK(a != bytes_of(c));

        std::ostringstream again(std::ios::binary);
        auto mem = generate_dataset(small_spatial());
        write_dataset(again, mem);
        CHECK(again.str() == a);
    }
    SUBCASE("round trip and labels")
    {
        const auto c = small_spatial();
        std::istringstream in(bytes_of(c));
        const auto ds = read_dataset(in);
        REQUIRE(ds.records.size() == 5);
        CHECK(ds.shape == sample_shape(c));
        const auto g = metapop::build_graph(c.graph);
        for (std::size_t r = 0; r < ds.records.size(); ++r) {
            const auto& rec = ds.records[r];
            CHECK(rec.meta["index"] == r);
            CHECK(rec.meta["seed"] == (c.seed ^ r));
            CHECK(rec.features.size() == 6 * 354);
            CHECK(rec.labels.size() == 30 * 6 * 48);
            // Per node and age group the label days keep the node's population.
            for (std::size_t d = 0; d < 30; ++d) {
                for (std::size_t i = 0; i < 6; ++i) {
                    double total = 0.0;
                    for (std::size_t k = 0; k < 48; ++k) total += rec.labels[(d * 6 + i) * 48 + k];
                    REQUIRE(total == doctest::Approx(g.nodes()[i].population).epsilon(1e-5));
                }
            }
            const std::size_t m = rec.change_count();
            for (std::size_t slot = m; slot < 3; ++slot) CHECK(rec.features[240 + 108 + slot] == 0.0f);
        }
    }
    SUBCASE("non-spatial")
    {
        ScenarioConfig c;
        c.spatial = false;
        c.regime = Regime::persistent_threat;
        c.horizon = 60;
        c.n_samples = 4;
        c.fixed_changes = 2;
        const auto ds = generate_dataset(c);
        for (const auto& rec : ds.records) {
            CHECK(rec.features.size() == 5 * 162);
            CHECK(rec.labels.size() == 60 * 48);
            CHECK(rec.change_count() == 2);
            CHECK(rec.meta["regime"] == "persistent_threat");
        }
        std::ostringstream nd;
        export_ndjson(nd, ds);
        std::istringstream lines(nd.str());
        std::string line;
        std::size_t count = 0;
        while (std::getline(lines, line)) {
            const auto j = nlohmann::json::parse(line);
            if (count > 0) CHECK(j["features"].size() == 5 * 162);
            ++count;
        }
        CHECK(count == 5);
    }
    SUBCASE("corrupt files")
    {
        const auto bytes = bytes_of(small_spatial());
        std::istringstream truncated(bytes.substr(0, bytes.size() - 10));
        CHECK_THROWS_AS(read_dataset(truncated), CorruptFileError);
        std::istringstream magic("EGSX" + bytes.substr(4));
        CHECK_THROWS_AS(read_dataset(magic), CorruptFileError);

        auto mem = generate_dataset(small_spatial());
        std::ostringstream out(std::ios::binary);
        write_dataset(out, mem);
        std::string s = out.str();
        const auto pos = s.find("\"version\":1");
        REQUIRE(pos != std::string::npos);
        s[pos + 10] = '7';
        std::istringstream old(s);
        CHECK_THROWS_AS(read_dataset(old), VersionMismatchError);
    }
    SUBCASE("invalid configs")
    {
        ScenarioConfig c;
        c.horizon = 45;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        c.horizon = 30;
        c.max_changes = 4;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        CHECK(scenario_config_from_json(to_json(small_spatial())).graph.nodes == 6);
    }
}
