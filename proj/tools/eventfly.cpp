#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eventfly/bench.hpp"
#include "eventfly/blend.hpp"
#include "eventfly/dataset.hpp"
#include "eventfly/eap.hpp"
#include "eventfly/io.hpp"
#include "eventfly/log.hpp"
#include "eventfly/train.hpp"
#include "eventfly/voxel.hpp"

namespace fs = std::filesystem;
using namespace eventfly;
using nlohmann::json;

namespace {

void write_voxel_atomic(const VoxelGrid& grid, const fs::path& path) {
    AtomicFile file(path);
    write_voxel(grid, file.temp_path());
    file.commit();
}

void write_text_atomic(const std::string& text, const fs::path& path) {
    AtomicFile file(path);
    {
        std::ofstream out(file.temp_path(), std::ios::binary);
        out << text;
        if (!out) throw IoError("cannot write " + path.string());
    }
    file.commit();
}

// Prints the effective parameters and stops the subcommand when requested.
bool print_config(bool enabled, const json& j) {
    if (!enabled) return false;
    std::cout << j.dump(2) << "\n";
    return true;
}

DensityMap load_density(const fs::path& path) { return voxel_as_density(read_voxel(path)); }

// Similarity values persist in a single-bin grid; undefined pixels carry -1.
VoxelGrid similarity_as_voxel(const SimilarityMap& sim) {
    VoxelGrid g(1, sim.height, sim.width);
    for (std::size_t i = 0; i < sim.values.size(); ++i)
        g.data[i] = sim.defined[i] ? static_cast<float>(sim.values[i]) : -1.0f;
    return g;
}

std::string metrics_table(const std::string& method, const Metrics& m) {
    char buf[256];
    std::string out = "method,Acc,mAcc,mIoU,fIoU";
    for (std::size_t c = 0; c < m.per_class_iou.size(); ++c)
        out += ",IoU_" + std::to_string(c);
    out += "\n";
    std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f,%.2f", method.c_str(), 100.0 * m.acc,
                  100.0 * m.macc, 100.0 * m.miou, 100.0 * m.fiou);
    out += buf;
    for (double iou : m.per_class_iou) {
        std::snprintf(buf, sizeof(buf), ",%.2f", 100.0 * iou);
        out += buf;
    }
    out += "\n";
    return out;
}

json metrics_json(const Metrics& m) {
    json j;
    j["acc"] = m.acc;
    j["macc"] = m.macc;
    j["miou"] = m.miou;
    j["fiou"] = m.fiou;
    j["per_class_iou"] = m.per_class_iou;
    j["empty"] = m.empty;
    return j;
}

std::vector<fs::path> sorted_label_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".lbl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EventFly: cross-platform adaptation for event-camera segmentation"};
    app.require_subcommand(1);

    // ---- voxelize
    auto* cmd_vox = app.add_subcommand("voxelize", "Accumulate an event stream into a voxel grid");
    struct {
        std::string input, output;
        int bins = 20;
        std::int64_t duration = 5'000'000;
        bool show = false;
    } vox;
    cmd_vox->add_option("--input", vox.input, "input .evt file")->required();
    cmd_vox->add_option("--output", vox.output, "output .vxg file")->required();
    cmd_vox->add_option("--bins", vox.bins, "temporal bins")->check(CLI::PositiveNumber);
    cmd_vox->add_option("--duration", vox.duration, "window length in microseconds")
        ->check(CLI::PositiveNumber);
    cmd_vox->add_flag("--print-config", vox.show, "print the effective parameters and exit");
    cmd_vox->callback([&] {
        if (print_config(vox.show, {{"input", vox.input},
                                    {"output", vox.output},
                                    {"bins", vox.bins},
                                    {"duration", vox.duration}}))
            return;
        write_voxel_atomic(voxelize(read_events(vox.input), vox.bins, vox.duration), vox.output);
    });

    // ---- density
    auto* cmd_den = app.add_subcommand("density", "Temporal activation density of a voxel grid");
    struct {
        std::string input, output, pgm, normalize;
        bool show = false;
    } den;
    cmd_den->add_option("--input", den.input, "input .vxg file")->required();
    cmd_den->add_option("--output", den.output, "output single-bin .vxg density")->required();
    cmd_den->add_option("--pgm", den.pgm, "optional 8-bit PGM visualization");
    cmd_den->add_option("--normalize", den.normalize, "max or quantile-q rescaling");
    cmd_den->add_flag("--print-config", den.show, "print the effective parameters and exit");
    cmd_den->callback([&] {
        if (print_config(den.show, {{"input", den.input},
                                    {"output", den.output},
                                    {"pgm", den.pgm},
                                    {"normalize", den.normalize}}))
            return;
        DensityMap d = density_map(read_voxel(den.input));
        if (!den.normalize.empty()) d = normalize_density(d, parse_normalize_mode(den.normalize));
        write_voxel_atomic(density_as_voxel(d), den.output);
        if (!den.pgm.empty()) {
            AtomicFile file(den.pgm);
            write_pgm(d, file.temp_path());
            file.commit();
        }
    });

    // ---- similarity
    auto* cmd_sim = app.add_subcommand("similarity", "Activation-pattern similarity of two densities");
    struct {
        std::string source, target, output, pgm;
        std::string normalize = "max";
        bool show = false;
    } simc;
    cmd_sim->add_option("--source", simc.source, "per-sample source density .vxg")->required();
    cmd_sim->add_option("--target", simc.target, "aggregated target density .vxg")->required();
    cmd_sim->add_option("--output", simc.output, "similarity .vxg (-1 marks undefined pixels)")
        ->required();
    cmd_sim->add_option("--pgm", simc.pgm, "optional PGM visualization");
    cmd_sim->add_option("--normalize", simc.normalize, "max or quantile-q input rescaling");
    cmd_sim->add_flag("--print-config", simc.show, "print the effective parameters and exit");
    cmd_sim->callback([&] {
        if (print_config(simc.show, {{"source", simc.source},
                                     {"target", simc.target},
                                     {"output", simc.output},
                                     {"normalize", simc.normalize}}))
            return;
        const DensityNormalize mode = parse_normalize_mode(simc.normalize);
        const DensityMap src = normalize_density(load_density(simc.source), mode);
        const DensityMap tgt = normalize_density(load_density(simc.target), mode);
        const SimilarityMap sim = similarity_map(src, tgt);
        write_voxel_atomic(similarity_as_voxel(sim), simc.output);
        if (!simc.pgm.empty()) {
            DensityMap vis(sim.height, sim.width);
            for (std::size_t i = 0; i < sim.values.size(); ++i)
                vis.values[i] = sim.defined[i] ? sim.values[i] : 0.0;
            AtomicFile file(simc.pgm);
            write_pgm(vis, file.temp_path());
            file.commit();
        }
    });

    // ---- blend
    auto* cmd_blend = app.add_subcommand("blend", "Splice source and target voxel grids");
    struct {
        std::string source, target, target_density;
        std::string out_voxel, out_mask, out_labels;
        std::string source_labels, pseudo_labels;
        double tau = 0.4;
        bool show = false;
    } bl;
    cmd_blend->add_option("--source", bl.source, "source .vxg")->required();
    cmd_blend->add_option("--target", bl.target, "target .vxg")->required();
    cmd_blend->add_option("--target-density", bl.target_density,
                          "aggregated target density .vxg (defaults to the target's own density)");
    cmd_blend->add_option("--tau", bl.tau, "similarity threshold in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    cmd_blend->add_option("--output-voxel", bl.out_voxel, "blended .vxg")->required();
    cmd_blend->add_option("--output-mask", bl.out_mask, "blend mask .msk");
    cmd_blend->add_option("--source-labels", bl.source_labels, "source ground truth .lbl");
    cmd_blend->add_option("--pseudo-labels", bl.pseudo_labels, "target pseudo-labels .lbl");
    cmd_blend->add_option("--output-labels", bl.out_labels, "blended labels .lbl");
    cmd_blend->add_flag("--print-config", bl.show, "print the effective parameters and exit");
    cmd_blend->callback([&] {
        if (print_config(bl.show, {{"source", bl.source},
                                   {"target", bl.target},
                                   {"target_density", bl.target_density},
                                   {"tau", bl.tau}}))
            return;
        const VoxelGrid src = read_voxel(bl.source);
        const VoxelGrid tgt = read_voxel(bl.target);
        const DensityNormalize mode{NormalizeMode::kMax, 0.5};
        const DensityMap src_density = normalize_density(density_map(src), mode);
        const DensityMap tgt_density = normalize_density(
            bl.target_density.empty() ? density_map(tgt) : load_density(bl.target_density), mode);
        const SimilarityMap sim = similarity_map(src_density, tgt_density);
        const BlendMask mask = binary_mask(sim, bl.tau);
        write_voxel_atomic(blend_voxels(src, tgt, mask), bl.out_voxel);
        if (!bl.out_mask.empty()) {
            AtomicFile file(bl.out_mask);
            write_mask(mask, file.temp_path());
            file.commit();
        }
        if (!bl.out_labels.empty()) {
            if (bl.source_labels.empty() || bl.pseudo_labels.empty())
                throw ConfigError("--output-labels needs --source-labels and --pseudo-labels");
            const LabelMap blended =
                blend_labels(read_labels(bl.source_labels), read_labels(bl.pseudo_labels), mask);
            AtomicFile file(bl.out_labels);
            write_labels(blended, file.temp_path());
            file.commit();
        }
    });

    // ---- synth
    auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic platform corpus");
    struct {
        std::string platform = "vehicle";
        std::string out;
        int n = 200;
        std::uint64_t seed = 7;
        int height = 90, width = 160;
        int classes = 19;
        int jobs = 1;
        bool show = false;
    } sy;
    cmd_synth->add_option("--platform", sy.platform, "vehicle, drone or quadruped")->required();
    cmd_synth->add_option("--n", sy.n, "number of samples")->check(CLI::PositiveNumber);
    cmd_synth->add_option("--seed", sy.seed, "corpus seed");
    cmd_synth->add_option("--out", sy.out, "output directory")->required();
    cmd_synth->add_option("--height", sy.height, "scene height")->check(CLI::PositiveNumber);
    cmd_synth->add_option("--width", sy.width, "scene width")->check(CLI::PositiveNumber);
    cmd_synth->add_option("--classes", sy.classes, "label space, 19 or 11")
        ->check(CLI::IsMember({19, 11}));
    cmd_synth->add_option("--jobs", sy.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd_synth->add_flag("--print-config", sy.show, "print the effective parameters and exit");
    cmd_synth->callback([&] {
        if (print_config(sy.show, {{"platform", sy.platform},
                                   {"n", sy.n},
                                   {"seed", sy.seed},
                                   {"out", sy.out},
                                   {"height", sy.height},
                                   {"width", sy.width},
                                   {"classes", sy.classes},
                                   {"jobs", sy.jobs}}))
            return;
        CorpusSpec spec;
        spec.platform = platform_from_string(sy.platform);
        spec.count = sy.n;
        spec.seed = sy.seed;
        spec.height = sy.height;
        spec.width = sy.width;
        spec.label_space = sy.classes;
        write_corpus(sy.out, spec, sy.jobs);
    });

    // ---- split
    auto* cmd_split = app.add_subcommand("split", "Split a corpus manifest into train/val");
    struct {
        std::string manifest;
        double ratio = 0.4;
        bool show = false;
    } sp;
    cmd_split->add_option("--manifest", sp.manifest, "corpus manifest.json")->required();
    cmd_split->add_option("--ratio", sp.ratio, "validation fraction, taken from the end")
        ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)));
    cmd_split->add_flag("--print-config", sp.show, "print the effective parameters and exit");
    cmd_split->callback([&] {
        if (print_config(sp.show, {{"manifest", sp.manifest}, {"ratio", sp.ratio}})) return;
        write_split_manifests(sp.manifest, sp.ratio);
    });

    // ---- train
    auto* cmd_train = app.add_subcommand("train", "Run the adaptation loop from a config file");
    struct {
        std::string config;
        bool show = false;
    } tr;
    cmd_train->add_option("--config", tr.config, "config.json")->required();
    cmd_train->add_flag("--print-config", tr.show, "print the effective config and exit");
    cmd_train->callback([&] {
        const TrainConfig cfg = TrainConfig::load(tr.config);
        if (tr.show) {
            std::cout << cfg.to_json_string(2) << "\n";
            return;
        }
        const RunArtifacts artifacts = run_adaptation(cfg);
        if (!artifacts.metrics_file.empty() && fs::exists(artifacts.metrics_file)) {
            std::ifstream in(artifacts.metrics_file);
            std::cout << in.rdbuf();
        }
    });

    // ---- eval
    auto* cmd_eval = app.add_subcommand("eval", "Segmentation metrics");
    struct {
        std::string pred, gt;
        std::string checkpoint, config, manifest;
        std::string csv, out_json;
        std::string method = "eval";
        int classes = 11;
        bool show = false;
    } ev;
    cmd_eval->add_option("--pred", ev.pred, "directory of predicted .lbl files");
    cmd_eval->add_option("--gt", ev.gt, "directory of ground-truth .lbl files");
    cmd_eval->add_option("--checkpoint", ev.checkpoint, "trained checkpoint .ckpt");
    cmd_eval->add_option("--config", ev.config, "config.json matching the checkpoint");
    cmd_eval->add_option("--manifest", ev.manifest, "labeled split manifest to evaluate");
    cmd_eval->add_option("--classes", ev.classes, "class count for --pred/--gt mode")
        ->check(CLI::PositiveNumber);
    cmd_eval->add_option("--csv", ev.csv, "also write the metrics table as CSV");
    cmd_eval->add_option("--json", ev.out_json, "also write the metrics as JSON");
    cmd_eval->add_option("--method", ev.method, "method name for the table");
    cmd_eval->add_flag("--print-config", ev.show, "print the effective parameters and exit");
    cmd_eval->callback([&] {
        if (print_config(ev.show, {{"pred", ev.pred},
                                   {"gt", ev.gt},
                                   {"checkpoint", ev.checkpoint},
                                   {"manifest", ev.manifest},
                                   {"classes", ev.classes}}))
            return;
        Metrics m;
        if (!ev.pred.empty() || !ev.gt.empty()) {
            if (ev.pred.empty() || ev.gt.empty())
                throw ConfigError("label-directory mode needs both --pred and --gt");
            const auto preds = sorted_label_files(ev.pred);
            const auto gts = sorted_label_files(ev.gt);
            if (preds.size() != gts.size())
                throw IoError("prediction and ground-truth directories differ in size");
            if (preds.empty()) throw IoError("no .lbl files found in " + ev.pred);
            ConfusionMatrix cm(ev.classes);
            for (std::size_t i = 0; i < preds.size(); ++i)
                accumulate(cm, read_labels(preds[i]), read_labels(gts[i]));
            m = metrics(cm);
        } else if (!ev.checkpoint.empty()) {
            if (ev.config.empty() || ev.manifest.empty())
                throw ConfigError("checkpoint mode needs --config and --manifest");
            const TrainConfig cfg = TrainConfig::load(ev.config);
            const Checkpoint ckpt = load_checkpoint(ev.checkpoint);
            SegNet net;
            net.build(cfg.net_config());
            apply_checkpoint(ckpt, cfg.eval_with_student ? "student" : "teacher", net.params);
            const Dataset val = load_dataset(ev.manifest, true);
            m = evaluate(net, val, cfg);
        } else {
            throw ConfigError("eval needs either --pred/--gt or --checkpoint");
        }
        const std::string table = metrics_table(ev.method, m);
        std::cout << table;
        if (!ev.csv.empty()) write_text_atomic(table, ev.csv);
        if (!ev.out_json.empty()) write_text_atomic(metrics_json(m).dump(2) + "\n", ev.out_json);
    });

    // ---- stats
    auto* cmd_stats = app.add_subcommand("stats", "Per-class activation maps of a corpus");
    struct {
        std::string manifest, out;
        int bins = 20;
        std::int64_t duration = 5'000'000;
        bool show = false;
    } st;
    cmd_stats->add_option("--manifest", st.manifest, "labeled corpus manifest")->required();
    cmd_stats->add_option("--out", st.out, "output directory for PGM maps")->required();
    cmd_stats->add_option("--bins", st.bins, "temporal bins")->check(CLI::PositiveNumber);
    cmd_stats->add_option("--duration", st.duration, "window length in microseconds")
        ->check(CLI::PositiveNumber);
    cmd_stats->add_flag("--print-config", st.show, "print the effective parameters and exit");
    cmd_stats->callback([&] {
        if (print_config(st.show, {{"manifest", st.manifest},
                                   {"out", st.out},
                                   {"bins", st.bins},
                                   {"duration", st.duration}}))
            return;
        const Dataset ds = load_dataset(st.manifest, true);
        const ActivationStats stats =
            activation_stats(ds.streams, ds.labels, ds.num_classes, st.bins, st.duration);
        fs::create_directories(st.out);
        json index;
        index["num_classes"] = ds.num_classes;
        json present = json::array();
        for (std::size_t c = 0; c < stats.per_class.size(); ++c) {
            char name[32];
            std::snprintf(name, sizeof(name), "class_%02zu.pgm", c);
            AtomicFile file(fs::path(st.out) / name);
            write_pgm(stats.per_class[c], file.temp_path());
            file.commit();
            present.push_back(static_cast<bool>(stats.class_present[c]));
        }
        index["class_present"] = std::move(present);
        AtomicFile density_file(fs::path(st.out) / "density.pgm");
        write_pgm(stats.mean_density, density_file.temp_path());
        density_file.commit();
        write_text_atomic(index.dump(2) + "\n", fs::path(st.out) / "stats.json");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
