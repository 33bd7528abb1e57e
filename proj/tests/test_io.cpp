#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "eventfly/io.hpp"
#include "testutil.hpp"

using namespace eventfly;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("event file round trip") {
    const auto dir = temp_dir("io_evt");
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const EventStream s = random_stream(rng, 64, 48, 500);
        const auto path = dir / "s.evt";
        write_events(s, path);
        const EventStream r = read_events(path);
        REQUIRE(r.events.size() == s.events.size());
        CHECK(r.width == s.width);
        CHECK(r.height == s.height);
        for (std::size_t i = 0; i < s.events.size(); ++i) {
            CHECK(r.events[i].x == s.events[i].x);
            CHECK(r.events[i].y == s.events[i].y);
            CHECK(r.events[i].t == s.events[i].t);
            CHECK(r.events[i].p == s.events[i].p);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("voxel file round trip is bitwise") {
    const auto dir = temp_dir("io_vxg");
    Rng rng(2);
    const VoxelGrid g = random_grid(rng, 5, 17, 23);
    const auto path = dir / "g.vxg";
    write_voxel(g, path);
    const VoxelGrid r = read_voxel(path);
    CHECK(r.bins == g.bins);
    CHECK(r.height == g.height);
    CHECK(r.width == g.width);
    CHECK(std::memcmp(r.data.data(), g.data.data(), g.data.size() * 4) == 0);
    fs::remove_all(dir);
}

TEST_CASE("benchmark-sized voxel header fields") {
    const auto dir = temp_dir("io_vxg_big");
    const VoxelGrid g(20, 360, 640);
    const auto path = dir / "big.vxg";
    write_voxel(g, path);
    const VoxelGrid r = read_voxel(path);
    CHECK(r.bins == 20);
    CHECK(r.height == 360);
    CHECK(r.width == 640);
    fs::remove_all(dir);
}

TEST_CASE("label file round trip and range checking") {
    const auto dir = temp_dir("io_lbl");
    Rng rng(3);
    const LabelMap m = random_labels(rng, 30, 40, 11);
    const auto path = dir / "m.lbl";
    write_labels(m, path);
    const LabelMap r = read_labels(path);
    CHECK(r.num_classes == m.num_classes);
    CHECK(r.data == m.data);

    LabelMap bad(4, 4, 11);
    bad.at(1, 1) = 200;  // not 255, not a class
    CHECK_THROWS_AS(write_labels(bad, dir / "bad.lbl"), DomainError);
    bad.at(1, 1) = LabelMap::kIgnore;
    CHECK_NOTHROW(write_labels(bad, dir / "ok.lbl"));

    // corrupt a stored value on disk
    auto bytes = slurp(path);
    bytes[13 + 5] = static_cast<char>(200);
    spit(path, bytes);
    CHECK_THROWS_AS(read_labels(path), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("mask round trip including ragged widths") {
    const auto dir = temp_dir("io_msk");
    Rng rng(4);
    for (int width : {8, 13, 1, 31}) {
        BlendMask m(9, width);
        for (auto& b : m.bits) b = rng.uniform() < 0.5 ? 1 : 0;
        const auto path = dir / "m.msk";
        write_mask(m, path);
        const BlendMask r = read_mask(path);
        CHECK(r.bits == m.bits);
    }
    fs::remove_all(dir);
}

TEST_CASE("bad magic is rejected") {
    const auto dir = temp_dir("io_magic");
    const auto path = dir / "x.evt";
    spit(path, {'X', 'X', 'X', 'X', 0, 0, 0, 0});
    CHECK_THROWS_WITH_AS(read_events(path), doctest::Contains("bad magic"), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("truncated record names its byte offset") {
    const auto dir = temp_dir("io_trunc");
    EventStream s;
    s.width = 8;
    s.height = 8;
    s.events.push_back({1, 2, 100, 1});
    s.events.push_back({3, 4, 200, -1});
    const auto path = dir / "t.evt";
    write_events(s, path);
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - 5);  // cut into the last record
    spit(path, bytes);
    try {
        read_events(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("out-of-range coordinate names the record offset") {
    const auto dir = temp_dir("io_range");
    EventStream s;
    s.width = 8;
    s.height = 8;
    s.events.push_back({1, 2, 100, 1});
    const auto path = dir / "r.evt";
    write_events(s, path);
    auto bytes = slurp(path);
    // record starts at 4 (magic) + 4 + 4 + 8 = 20; x is its first two bytes
    bytes[20] = 9;
    bytes[21] = 0;
    spit(path, bytes);
    try {
        read_events(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string what = e.what();
        CHECK(what.find("x=9") != std::string::npos);
        CHECK(what.find("offset 20") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("density exports as a single-bin grid exactly") {
    const auto dir = temp_dir("io_den");
    DensityMap d(6, 7);
    Rng rng(5);
    for (double& v : d.values) v = rng.uniform(0.0, 3.0);
    const VoxelGrid g = density_as_voxel(d);
    write_voxel(g, dir / "d.vxg");
    const DensityMap r = voxel_as_density(read_voxel(dir / "d.vxg"));
    for (std::size_t i = 0; i < d.values.size(); ++i)
        CHECK(r.values[i] == doctest::Approx(d.values[i]).epsilon(1e-7));
    fs::remove_all(dir);
}

TEST_CASE("pgm export carries the P5 header and scales to 255") {
    const auto dir = temp_dir("io_pgm");
    DensityMap d(2, 3);
    d.at(0, 0) = 4.0;
    d.at(1, 2) = 2.0;
    write_pgm(d, dir / "d.pgm");
    const auto bytes = slurp(dir / "d.pgm");
    REQUIRE(bytes.size() > 11);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == '5');
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 6]) == 255);  // the 4.0 pixel
    fs::remove_all(dir);
}

TEST_CASE("atomic file commits by rename") {
    const auto dir = temp_dir("io_atomic");
    const auto target = dir / "out.bin";
    {
        AtomicFile file(target);
        std::ofstream out(file.temp_path(), std::ios::binary);
        out << "payload";
        out.close();
        CHECK(!fs::exists(target));
        file.commit();
    }
    CHECK(fs::exists(target));
    {
        AtomicFile file(target);  // abandoned -> temp cleaned up
        std::ofstream out(file.temp_path(), std::ios::binary);
        out << "junk";
    }
    CHECK(!fs::exists(target.string() + ".tmp"));
    CHECK(slurp(target).size() == 7);
    fs::remove_all(dir);
}
