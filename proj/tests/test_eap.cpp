#include <doctest.h>

#include <cmath>

#include "eventfly/eap.hpp"
#include "testutil.hpp"

using namespace eventfly;
using namespace testutil;

namespace {

ProbMap uniform_probs(int classes, int h, int w) {
    ProbMap p(classes, h, w);
    for (double& v : p.data) v = 1.0 / classes;
    return p;
}

RegionMask full_region(int h, int w) { return RegionMask(h, w, 1); }

}  // namespace

TEST_CASE("density of a zero grid is zero") {
    const VoxelGrid g(20, 5, 6);
    const DensityMap d = density_map(g);
    for (double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("density sums absolute activations over time") {
    VoxelGrid g(2, 3, 3);
    g.at(0, 1, 1) = 1.0f;
    g.at(1, 1, 1) = -1.0f;
    const DensityMap d = density_map(g);
    CHECK(d.at(1, 1) == doctest::Approx(2.0));
    CHECK(d.at(0, 0) == 0.0);
}

TEST_CASE("density matches a naive double-loop oracle") {
    Rng rng(9);
    const VoxelGrid g = random_grid(rng, 7, 12, 15);
    const DensityMap d = density_map(g);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            double want = 0.0;
            for (int t = 0; t < g.bins; ++t) want += std::fabs(static_cast<double>(g.at(t, y, x)));
            CHECK(d.at(y, x) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("aggregation averages densities") {
    Rng rng(10);
    const VoxelGrid a = random_grid(rng, 4, 6, 6);
    VoxelGrid b = a;
    for (float& v : b.data) v *= 3.0f;

    const std::vector<VoxelGrid> single{a};
    const DensityMap da = density_map(a);
    const DensityMap one = aggregate_target_density(single);
    for (std::size_t i = 0; i < da.values.size(); ++i)
        CHECK(one.values[i] == doctest::Approx(da.values[i]));

    const std::vector<VoxelGrid> both{a, b};
    const DensityMap mean = aggregate_target_density(both);
    for (std::size_t i = 0; i < da.values.size(); ++i)
        CHECK(mean.values[i] == doctest::Approx(2.0 * da.values[i]).epsilon(1e-6));

    VoxelGrid c(4, 7, 6);  // mismatched height
    const std::vector<VoxelGrid> bad{a, c};
    CHECK_THROWS_AS(aggregate_target_density(bad), ShapeError);
    CHECK_THROWS_AS(aggregate_target_density(std::span<const VoxelGrid>{}), DomainError);
}

TEST_CASE("density normalization modes") {
    DensityMap zero(3, 3);
    const DensityMap z = normalize_density(zero, {NormalizeMode::kMax, 0.5});
    for (double v : z.values) CHECK(v == 0.0);

    DensityMap d(2, 2);
    d.at(0, 0) = 1.0;
    d.at(0, 1) = 2.0;
    d.at(1, 0) = 3.0;
    d.at(1, 1) = 4.0;
    const DensityMap m = normalize_density(d, {NormalizeMode::kMax, 0.5});
    CHECK(m.at(1, 1) == doctest::Approx(1.0));
    CHECK(m.at(0, 0) == doctest::Approx(0.25));

    // quantile-0.5 of {1,2,3,4} interpolates to 2.5
    const DensityMap q = normalize_density(d, parse_normalize_mode("quantile-0.5"));
    CHECK(q.at(0, 0) == doctest::Approx(1.0 / 2.5));
    CHECK(q.at(1, 1) == doctest::Approx(1.0));  // clamped from 1.6

    CHECK_THROWS_AS(parse_normalize_mode("median"), ConfigError);
    CHECK_THROWS_AS(parse_normalize_mode("quantile-1.5"), ConfigError);
    CHECK_THROWS_AS(parse_normalize_mode("quantile-abc"), ConfigError);
}

TEST_CASE("similarity map basics") {
    DensityMap a(1, 3);
    DensityMap b(1, 3);
    a.at(0, 0) = 1.0;
    b.at(0, 0) = 1.0;   // both active, equal
    a.at(0, 1) = 1.0;
    b.at(0, 1) = 0.0;   // source active only
    // pixel 2: both inactive
    const SimilarityMap s = similarity_map(a, b);
    CHECK(s.defined[0] == 1);
    CHECK(s.values[0] == doctest::Approx(1.0));
    CHECK(s.defined[1] == 1);
    CHECK(s.values[1] == doctest::Approx(0.0));
    CHECK(s.defined[2] == 0);

    DensityMap big(1, 3);
    big.at(0, 0) = 1.5;  // not normalized
    CHECK_THROWS_AS(similarity_map(big, b), DomainError);
    DensityMap wrong(2, 3);
    CHECK_THROWS_AS(similarity_map(a, wrong), ShapeError);
}

TEST_CASE("similarity is symmetric") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        DensityMap a(4, 5), b(4, 5);
        for (double& v : a.values) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
        for (double& v : b.values) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
        const SimilarityMap ab = similarity_map(a, b);
        const SimilarityMap ba = similarity_map(b, a);
        for (std::size_t i = 0; i < ab.values.size(); ++i) {
            CHECK(ab.defined[i] == ba.defined[i]);
            if (ab.defined[i]) CHECK(ab.values[i] == doctest::Approx(ba.values[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("binary mask thresholding") {
    SimilarityMap s(1, 4);
    s.defined = {1, 1, 0, 1};
    s.values = {0.4, 0.39, 0.0, 1.0};
    const BlendMask m = binary_mask(s, 0.4);
    CHECK(m.bits[0] == 1);   // boundary value kept
    CHECK(m.bits[1] == 0);   // strictly below
    CHECK(m.bits[2] == 1);   // undefined keeps the source
    CHECK(m.bits[3] == 1);

    CHECK_THROWS_AS(binary_mask(s, -0.1), ConfigError);
    CHECK_THROWS_AS(binary_mask(s, 1.0 + 1e-9), ConfigError);

    const BlendMask all = binary_mask(s, 0.0);
    for (auto b : all.bits) CHECK(b == 1);
}

TEST_CASE("mask is monotone in the threshold") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        SimilarityMap s(3, 7);
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            s.defined[i] = rng.uniform() < 0.8;
            s.values[i] = s.defined[i] ? rng.uniform() : 0.0;
        }
        const double t1 = rng.uniform();
        const double t2 = rng.uniform();
        const double lo = std::min(t1, t2), hi = std::max(t1, t2);
        const BlendMask m1 = binary_mask(s, lo);
        const BlendMask m2 = binary_mask(s, hi);
        for (std::size_t i = 0; i < m1.bits.size(); ++i) CHECK(m1.bits[i] >= m2.bits[i]);
    }
}

TEST_CASE("high-activation region follows the quantile of positive densities") {
    DensityMap d(2, 2);
    d.at(0, 0) = 1.0;
    d.at(0, 1) = 2.0;
    d.at(1, 0) = 3.0;
    d.at(1, 1) = 4.0;
    const RegionMask r = high_activation_region(d, 0.5);  // cut at 2.5
    CHECK(r.at(0, 0) == 0);
    CHECK(r.at(0, 1) == 0);
    CHECK(r.at(1, 0) == 1);
    CHECK(r.at(1, 1) == 1);

    DensityMap uniform(3, 3);
    for (double& v : uniform.values) v = 0.7;
    for (double q : {0.1, 0.5, 0.9}) {
        const RegionMask all = high_activation_region(uniform, q);
        CHECK(all.count() == 9);  // ties at the quantile are included
    }

    const RegionMask empty = high_activation_region(DensityMap(3, 3), 0.5);
    CHECK(empty.count() == 0);

    CHECK_THROWS_AS(high_activation_region(d, 0.0), ConfigError);
    CHECK_THROWS_AS(high_activation_region(d, 1.0), ConfigError);
}

TEST_CASE("region matches a sorted-array oracle and shrinks with q") {
    Rng rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        DensityMap d(6, 8);
        for (double& v : d.values) v = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 5.0);
        const double q1 = rng.uniform(0.05, 0.95);
        const double q2 = rng.uniform(0.05, 0.95);
        const RegionMask r1 = high_activation_region(d, std::min(q1, q2));
        const RegionMask r2 = high_activation_region(d, std::max(q1, q2));
        for (std::size_t i = 0; i < r1.bits.size(); ++i) CHECK(r1.bits[i] >= r2.bits[i]);

        std::vector<double> positive;
        for (double v : d.values)
            if (v > 0.0) positive.push_back(v);
        if (positive.empty()) continue;
        const double cut = quantile_linear(positive, std::min(q1, q2));
        for (std::size_t i = 0; i < r1.bits.size(); ++i)
            CHECK(r1.bits[i] == ((d.values[i] > 0.0 && d.values[i] >= cut) ? 1 : 0));
    }
}

TEST_CASE("entropy of one-hot and uniform predictions") {
    ProbMap onehot(11, 2, 2);
    for (int px = 0; px < 4; ++px) onehot.data[(px % 11) * 4 + px] = 1.0;
    const auto zero = empirical_entropy(onehot, full_region(2, 2));
    CHECK(zero.nats == doctest::Approx(0.0));
    CHECK(!zero.region_empty);

    const auto max_h = empirical_entropy(uniform_probs(11, 3, 3), full_region(3, 3));
    CHECK(std::fabs(max_h.nats - std::log(11.0)) < 1e-9);
}

TEST_CASE("entropy matches a per-pixel oracle and is permutation invariant") {
    Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        const int classes = 2 + static_cast<int>(rng.uniform_index(9));
        ProbMap p(classes, 4, 5);
        const std::size_t plane = 20;
        for (std::size_t px = 0; px < plane; ++px) {
            double sum = 0.0;
            for (int c = 0; c < classes; ++c) {
                const double v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.01, 1.0);
                p.data[c * plane + px] = v;
                sum += v;
            }
            if (sum == 0.0) {
                p.data[px] = 1.0;
                sum = 1.0;
            }
            for (int c = 0; c < classes; ++c) p.data[c * plane + px] /= sum;
        }
        RegionMask region(4, 5);
        for (auto& b : region.bits) b = rng.uniform() < 0.6;
        if (region.count() == 0) region.bits[3] = 1;

        const auto got = empirical_entropy(p, region);
        double want = 0.0;
        for (std::size_t px = 0; px < plane; ++px) {
            if (!region.bits[px]) continue;
            double h = 0.0;
            for (int c = 0; c < classes; ++c) {
                const double v = p.data[c * plane + px];
                if (v > 0.0) h -= v * std::log(v);
            }
            want += h;
        }
        want /= static_cast<double>(region.count());
        CHECK(got.nats == doctest::Approx(want).epsilon(1e-12));
        CHECK(got.nats >= 0.0);
        CHECK(got.nats <= std::log(static_cast<double>(classes)) + 1e-12);

        // swap two class planes
        ProbMap swapped = p;
        for (std::size_t px = 0; px < plane; ++px)
            std::swap(swapped.data[px], swapped.data[(classes - 1) * plane + px]);
        const auto perm = empirical_entropy(swapped, region);
        CHECK(perm.nats == doctest::Approx(got.nats).epsilon(1e-12));
    }
}

TEST_CASE("entropy validates inputs and flags empty regions") {
    ProbMap bad(3, 1, 1);
    bad.data = {0.5, 0.2, 0.2};  // sums to 0.9
    CHECK_THROWS_AS(empirical_entropy(bad, full_region(1, 1)), DomainError);

    const auto res = empirical_entropy(uniform_probs(4, 2, 2), RegionMask(2, 2));
    CHECK(res.region_empty);
    CHECK(res.nats == 0.0);

    CHECK_THROWS_AS(empirical_entropy(uniform_probs(4, 2, 2), full_region(3, 2)), ShapeError);
}

TEST_CASE("linear-interpolation quantile") {
    CHECK(quantile_linear({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_linear({5}, 0.3) == doctest::Approx(5.0));
    CHECK(quantile_linear({1, 2, 3, 4}, 0.0) == doctest::Approx(1.0));
    CHECK(quantile_linear({1, 2, 3, 4}, 1.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(quantile_linear({}, 0.5), DomainError);
}
