#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eventfly/blend.hpp"
#include "eventfly/dataset.hpp"
#include "eventfly/eap.hpp"
#include "eventfly/io.hpp"
#include "eventfly/train.hpp"
#include "testutil.hpp"

using namespace eventfly;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(EVENTFLY_CLI_PATH) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream o(out), e(err);
    r.out.assign(std::istreambuf_iterator<char>(o), std::istreambuf_iterator<char>());
    r.err.assign(std::istreambuf_iterator<char>(e), std::istreambuf_iterator<char>());
    return r;
}

}  // namespace

TEST_CASE("help and usage errors") {
    const auto dir = temp_dir("cli_usage");
    CHECK(run_cli("--help", dir).exit_code == 0);
    CHECK(run_cli("voxelize --help", dir).exit_code == 0);
    CHECK(run_cli("frobnicate", dir).exit_code == 2);
    CHECK(run_cli("voxelize --no-such-flag", dir).exit_code == 2);
    CHECK(run_cli("", dir).exit_code == 2);  // a subcommand is required
    fs::remove_all(dir);
}

TEST_CASE("voxelize subcommand matches the library call") {
    const auto dir = temp_dir("cli_vox");
    Rng rng(1);
    const EventStream stream = random_stream(rng, 40, 30, 400);
    write_events(stream, dir / "in.evt");
    const auto r = run_cli("voxelize --input " + (dir / "in.evt").string() + " --output " +
                               (dir / "out.vxg").string() + " --bins 20 --duration 5000000",
                           dir);
    CHECK(r.exit_code == 0);
    const VoxelGrid got = read_voxel(dir / "out.vxg");
    const VoxelGrid want = voxelize(stream, 20, 5'000'000);
    CHECK(got.data == want.data);

    // missing input file is a runtime error
    CHECK(run_cli("voxelize --input " + (dir / "nope.evt").string() + " --output " +
                      (dir / "x.vxg").string(),
                  dir)
              .exit_code == 1);
    fs::remove_all(dir);
}

TEST_CASE("blend rejects an out-of-range threshold before writing anything") {
    const auto dir = temp_dir("cli_blend_tau");
    const auto r = run_cli("blend --source a.vxg --target b.vxg --tau 1.5 --output-voxel o.vxg",
                           dir);
    CHECK(r.exit_code == 2);
    CHECK(!fs::exists(dir / "o.vxg"));
    fs::remove_all(dir);
}

TEST_CASE("train with a missing config exits 1 and names the path") {
    const auto dir = temp_dir("cli_train_missing");
    const auto r = run_cli("train --config " + (dir / "absent.json").string(), dir);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("absent.json") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("voxelize-density-blend pipeline equals direct library calls") {
    const auto dir = temp_dir("cli_pipeline");
    const PlatformProfile pv = PlatformProfile::make(Platform::kVehicle, 45, 80);
    const PlatformProfile pd = PlatformProfile::make(Platform::kDrone, 45, 80);
    const SceneSample src_scene = generate_scene(pv, 3);
    const SceneSample tgt_scene = generate_scene(pd, 4);
    write_events(src_scene.stream, dir / "src.evt");
    write_events(tgt_scene.stream, dir / "tgt.evt");

    auto cli = [&](const std::string& args) { return run_cli(args, dir).exit_code; };
    CHECK(cli("voxelize --input " + (dir / "src.evt").string() + " --output " +
              (dir / "src.vxg").string() + " --bins 20 --duration 5000000") == 0);
    CHECK(cli("voxelize --input " + (dir / "tgt.evt").string() + " --output " +
              (dir / "tgt.vxg").string() + " --bins 20 --duration 5000000") == 0);
    CHECK(cli("density --input " + (dir / "tgt.vxg").string() + " --output " +
              (dir / "tgt_density.vxg").string()) == 0);
    CHECK(cli("similarity --source " + (dir / "src_density.vxg").string() + " --target " +
              (dir / "tgt_density.vxg").string() + " --output " + (dir / "sim.vxg").string()) ==
          1);  // source density not written yet -> runtime error
    CHECK(cli("density --input " + (dir / "src.vxg").string() + " --output " +
              (dir / "src_density.vxg").string()) == 0);
    CHECK(cli("similarity --source " + (dir / "src_density.vxg").string() + " --target " +
              (dir / "tgt_density.vxg").string() + " --output " + (dir / "sim.vxg").string() +
              " --pgm " + (dir / "sim.pgm").string()) == 0);
    CHECK(cli("blend --source " + (dir / "src.vxg").string() + " --target " +
              (dir / "tgt.vxg").string() + " --target-density " +
              (dir / "tgt_density.vxg").string() + " --tau 0.4 --output-voxel " +
              (dir / "blend.vxg").string() + " --output-mask " + (dir / "blend.msk").string()) ==
          0);

    // direct library route
    const VoxelGrid src = voxelize(src_scene.stream, 20, 5'000'000);
    const VoxelGrid tgt = voxelize(tgt_scene.stream, 20, 5'000'000);
    const DensityNormalize mode{NormalizeMode::kMax, 0.5};
    const DensityMap src_density = normalize_density(density_map(src), mode);
    const DensityMap tgt_density = normalize_density(density_map(tgt), mode);
    const SimilarityMap sim = similarity_map(src_density, tgt_density);
    const BlendMask mask = binary_mask(sim, 0.4);
    const VoxelGrid blended = blend_voxels(src, tgt, mask);

    CHECK(read_voxel(dir / "blend.vxg").data == blended.data);
    CHECK(read_mask(dir / "blend.msk").bits == mask.bits);
    const VoxelGrid sim_grid = read_voxel(dir / "sim.vxg");
    for (int y = 0; y < 45; ++y)
        for (int x = 0; x < 80; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * 80 + x;
            if (sim.defined[i]) {
                CHECK(sim_grid.at(0, y, x) ==
                      doctest::Approx(sim.values[i]).epsilon(1e-6));
            } else {
                CHECK(sim_grid.at(0, y, x) == -1.0f);
            }
        }
    fs::remove_all(dir);
}

TEST_CASE("synth and split produce loadable corpora") {
    const auto dir = temp_dir("cli_synth");
    const auto r = run_cli("synth --platform drone --n 10 --seed 7 --out " + dir.string() +
                               " --height 45 --width 80 --classes 11 --jobs 2",
                           dir);
    CHECK(r.exit_code == 0);
    CHECK(run_cli("split --manifest " + (dir / "manifest.json").string() + " --ratio 0.4", dir)
              .exit_code == 0);
    const Dataset train = load_dataset(dir / "train.json", true);
    const Dataset val = load_dataset(dir / "val.json", true);
    CHECK(train.size() == 6);
    CHECK(val.size() == 4);
    CHECK(train.num_classes == 11);

    // a ratio outside (0,1) is a usage error
    CHECK(run_cli("split --manifest " + (dir / "manifest.json").string() + " --ratio 1.5", dir)
              .exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("eval on a perfect prediction prints one hundred") {
    const auto dir = temp_dir("cli_eval");
    fs::create_directories(dir / "pred");
    fs::create_directories(dir / "gt");
    Rng rng(9);
    for (int i = 0; i < 3; ++i) {
        const LabelMap m = random_labels(rng, 20, 20, 11, 0.05);
        char name[16];
        std::snprintf(name, sizeof(name), "%03d.lbl", i);
        write_labels(m, dir / "pred" / name);
        write_labels(m, dir / "gt" / name);
    }
    const auto r = run_cli("eval --pred " + (dir / "pred").string() + " --gt " +
                               (dir / "gt").string() + " --classes 11 --json " +
                               (dir / "m.json").string(),
                           dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("100.00") != std::string::npos);
    CHECK(fs::exists(dir / "m.json"));
    fs::remove_all(dir);
}

TEST_CASE("stats writes per-class activation maps") {
    const auto dir = temp_dir("cli_stats");
    CHECK(run_cli("synth --platform vehicle --n 6 --seed 3 --out " + (dir / "corpus").string() +
                      " --height 45 --width 80 --classes 19",
                  dir)
              .exit_code == 0);
    CHECK(run_cli("stats --manifest " + (dir / "corpus" / "manifest.json").string() + " --out " +
                      (dir / "maps").string(),
                  dir)
              .exit_code == 0);
    CHECK(fs::exists(dir / "maps" / "density.pgm"));
    CHECK(fs::exists(dir / "maps" / "stats.json"));
    int pgms = 0;
    for (const auto& entry : fs::directory_iterator(dir / "maps"))
        if (entry.path().extension() == ".pgm") ++pgms;
    CHECK(pgms == 20);  // 19 classes + overall density
    std::ifstream pgm(dir / "maps" / "class_00.pgm", std::ios::binary);
    char magic[2];
    pgm.read(magic, 2);
    CHECK(magic[0] == 'P');
    CHECK(magic[1] == '5');
    fs::remove_all(dir);
}

TEST_CASE("print-config reports parameters without running") {
    const auto dir = temp_dir("cli_printcfg");
    const auto r = run_cli("voxelize --input a.evt --output b.vxg --bins 20 --duration 5000000"
                           " --print-config",
                           dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"bins\": 20") != std::string::npos);
    CHECK(!fs::exists(dir / "b.vxg"));
    fs::remove_all(dir);
}

TEST_CASE("train subcommand runs end to end from a config file") {
    const auto dir = temp_dir("cli_train");
    for (const auto& [platform, name, n] :
         {std::tuple{"vehicle", "src", 8}, {"drone", "tgt", 8}}) {
        CHECK(run_cli(std::string("synth --platform ") + platform + " --n " + std::to_string(n) +
                          " --seed 5 --out " + (dir / name).string() +
                          " --height 45 --width 80 --classes 11",
                      dir)
                  .exit_code == 0);
    }
    CHECK(run_cli("split --manifest " + (dir / "tgt" / "manifest.json").string() + " --ratio 0.25",
                  dir)
              .exit_code == 0);

    TrainConfig cfg;
    cfg.iterations = 6;
    cfg.batch = 2;
    cfg.bins = 8;
    cfg.classes = 11;
    cfg.enc1 = 6;
    cfg.enc2 = 8;
    cfg.feature_channels = 12;
    cfg.disc_hidden = 8;
    cfg.seed = 4;
    cfg.paths.source_train = (dir / "src" / "manifest.json").string();
    cfg.paths.target_train = (dir / "tgt" / "train.json").string();
    cfg.paths.target_val = (dir / "tgt" / "val.json").string();
    cfg.paths.out_dir = (dir / "run").string();
    cfg.save(dir / "config.json");

    const auto shown = run_cli("train --config " + (dir / "config.json").string() +
                                   " --print-config",
                               dir);
    CHECK(shown.exit_code == 0);
    CHECK(shown.out.find("\"tau\": 0.4") != std::string::npos);

    const auto r = run_cli("train --config " + (dir / "config.json").string(), dir);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "run" / "final.ckpt"));
    CHECK(fs::exists(dir / "run" / "train_log.jsonl"));
    CHECK(fs::exists(dir / "run" / "metrics.json"));
    std::ifstream log(dir / "run" / "train_log.jsonl");
    int lines = 0;
    std::string line;
    while (std::getline(log, line)) ++lines;
    CHECK(lines == 6);

    // checkpoint-mode eval over the validation split
    const auto ev = run_cli("eval --checkpoint " + (dir / "run" / "final.ckpt").string() +
                                " --config " + (dir / "config.json").string() + " --manifest " +
                                (dir / "tgt" / "val.json").string(),
                            dir);
    CHECK(ev.exit_code == 0);
    CHECK(ev.out.find("method,Acc,mAcc,mIoU,fIoU") != std::string::npos);
    fs::remove_all(dir);
}
