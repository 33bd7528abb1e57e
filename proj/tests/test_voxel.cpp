#include <doctest.h>

#include <algorithm>

#include "eventfly/voxel.hpp"
#include "testutil.hpp"

using namespace eventfly;
using namespace testutil;

TEST_CASE("timestamp normalization endpoints") {
    CHECK(normalize_timestamp(100, 100, 5'000'000, 20) == doctest::Approx(0.0));
    CHECK(normalize_timestamp(100 + 5'000'000, 100, 5'000'000, 20) == doctest::Approx(19.0));
    // halfway through the window lands halfway through the bin range
    CHECK(normalize_timestamp(2'500'000, 0, 5'000'000, 20) == doctest::Approx(9.5));
}

TEST_CASE("timestamp normalization clamps and validates") {
    CHECK(normalize_timestamp(99, 100, 1000, 20) == 0.0);
    CHECK(normalize_timestamp(100 + 2000, 100, 1000, 20) == 19.0);
    CHECK_THROWS_AS(normalize_timestamp(0, 0, 0, 20), ConfigError);
    CHECK_THROWS_AS(normalize_timestamp(0, 0, -5, 20), ConfigError);
    CHECK_THROWS_AS(normalize_timestamp(0, 0, 1000, 0), ConfigError);
}

TEST_CASE("temporal split weights sum to exactly one") {
    Rng rng(7);
    for (int i = 0; i < 5000; ++i) {
        const double coord = rng.uniform(0.0, 19.0);
        const TemporalSplit s = temporal_split(coord, 20);
        CHECK(s.lo_weight + s.hi_weight == 1.0);
        CHECK(s.lo_weight >= 0.0);
        CHECK(s.hi_weight >= 0.0);
        CHECK(s.lo_bin >= 0);
        CHECK(s.hi_bin <= 19);
    }
    const TemporalSplit top = temporal_split(19.0, 20);
    CHECK(top.lo_bin == 19);
    CHECK(top.hi_bin == 19);
    CHECK(top.lo_weight == 1.0);
}

TEST_CASE("empty stream voxelizes to a zero grid") {
    EventStream s;
    s.width = 8;
    s.height = 4;
    const VoxelGrid g = voxelize(s, 20, 5'000'000);
    CHECK(g.bins == 20);
    CHECK(g.height == 4);
    CHECK(g.width == 8);
    for (float v : g.data) CHECK(v == 0.0f);
}

TEST_CASE("single event lands in bin zero with unit weight") {
    EventStream s;
    s.width = 8;
    s.height = 4;
    s.events.push_back({3, 2, 1234, 1});
    const VoxelGrid g = voxelize(s, 20, 5'000'000);
    CHECK(g.at(0, 2, 3) == 1.0f);
    double sum = 0.0;
    for (float v : g.data) sum += std::fabs(v);
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("event at a half-bin coordinate splits evenly") {
    EventStream s;
    s.width = 8;
    s.height = 4;
    s.events.push_back({1, 1, 0, 1});          // pins t0 = 0
    s.events.push_back({5, 3, 2'500'000, -1}); // bin coordinate 9.5
    const VoxelGrid g = voxelize(s, 20, 5'000'000);
    CHECK(g.at(9, 3, 5) == doctest::Approx(-0.5));
    CHECK(g.at(10, 3, 5) == doctest::Approx(-0.5));
}

TEST_CASE("events after the window clamp to the last bin") {
    EventStream s;
    s.width = 4;
    s.height = 4;
    s.events.push_back({0, 0, 0, 1});
    s.events.push_back({2, 2, 9'000'000, 1});  // beyond t0 + duration
    const VoxelGrid g = voxelize(s, 10, 5'000'000);
    CHECK(g.at(9, 2, 2) == 1.0f);
}

TEST_CASE("voxelize matches the brute-force kernel oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 60; ++trial) {
        const std::uint32_t w = 4 + static_cast<std::uint32_t>(rng.uniform_index(60));
        const std::uint32_t h = 4 + static_cast<std::uint32_t>(rng.uniform_index(60));
        const EventStream s = random_stream(rng, w, h, 2000);
        const VoxelGrid got = voxelize(s, 20, 5'000'000);
        const VoxelGrid want = voxelize_oracle(s, 20, 5'000'000);
        REQUIRE(got.data.size() == want.data.size());
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(close_rel(got.data[i], want.data[i], 1e-6));
    }
}

TEST_CASE("polarity mass is conserved") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const EventStream s = random_stream(rng, 32, 24, 3000);
        const VoxelGrid g = voxelize(s, 20, 5'000'000);
        double grid_mass = 0.0;
        for (float v : g.data) grid_mass += v;
        double event_mass = 0.0;
        for (const Event& e : s.events) event_mass += e.p;
        CHECK(std::fabs(grid_mass - event_mass) <=
              1e-6 * std::max<double>(1.0, static_cast<double>(s.events.size())));
    }
}

TEST_CASE("voxelize is invariant to event order given a fixed first event") {
    Rng rng(3);
    EventStream s = random_stream(rng, 16, 16, 500);
    while (s.events.size() < 3) s = random_stream(rng, 16, 16, 500);
    const VoxelGrid base = voxelize(s, 20, 5'000'000);

    EventStream shuffled = s;
    for (std::size_t i = shuffled.events.size() - 1; i > 1; --i)
        std::swap(shuffled.events[i], shuffled.events[1 + rng.uniform_index(i)]);
    const VoxelGrid permuted = voxelize(shuffled, 20, 5'000'000);
    for (std::size_t i = 0; i < base.data.size(); ++i)
        CHECK(close_rel(base.data[i], permuted.data[i], 1e-6));
}

TEST_CASE("stream validation rejects bad events") {
    EventStream s;
    s.width = 4;
    s.height = 4;
    s.events.push_back({5, 0, 0, 1});
    CHECK_THROWS_AS(s.validate(), DomainError);
    s.events[0] = {0, 0, 10, 1};
    s.events.push_back({0, 0, 5, 1});  // timestamps go backwards
    CHECK_THROWS_AS(s.validate(), DomainError);
    s.events.pop_back();
    s.events[0].p = 0;
    CHECK_THROWS_AS(s.validate(), DomainError);
}
