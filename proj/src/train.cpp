#include "eventfly/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "eventfly/blend.hpp"
#include "eventfly/fastmath.hpp"
#include "eventfly/io.hpp"
#include "eventfly/log.hpp"
#include "eventfly/voxel.hpp"

namespace eventfly {

using nlohmann::json;

Pipeline pipeline_from_string(const std::string& name) {
    if (name == "source_only") return Pipeline::kSourceOnly;
    if (name == "blend_only") return Pipeline::kBlendOnly;
    if (name == "full") return Pipeline::kFull;
    throw ConfigError("unknown pipeline \"" + name + "\"");
}

std::string to_string(Pipeline pipeline) {
    switch (pipeline) {
        case Pipeline::kSourceOnly: return "source_only";
        case Pipeline::kBlendOnly: return "blend_only";
        case Pipeline::kFull: return "full";
    }
    throw ConfigError("bad pipeline value");
}

void TrainConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must be in [0,1]");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (batch <= 0) throw ConfigError("batch must be positive");
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (bins < 1) throw ConfigError("bins must be at least 1");
    if (duration_us <= 0) throw ConfigError("duration_us must be positive");
    if (classes < 2) throw ConfigError("need at least two classes");
    if (!(region_quantile > 0.0 && region_quantile < 1.0))
        throw ConfigError("region_quantile must be in (0,1)");
    if (!(tau_pl >= 0.0 && tau_pl <= 1.0)) throw ConfigError("tau_pl must be in [0,1]");
    if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0))
        throw ConfigError("ema_momentum must be in [0,1]");
    if (disc_lr_scale <= 0.0) throw ConfigError("disc_lr_scale must be positive");
    if (enc1 <= 0 || enc2 <= 0 || feature_channels <= 0 || disc_hidden <= 0)
        throw ConfigError("channel widths must be positive");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

SegNetConfig TrainConfig::net_config() const {
    SegNetConfig c;
    c.in_bins = bins;
    c.classes = classes;
    c.enc1 = enc1;
    c.enc2 = enc2;
    c.feature = feature_channels;
    c.tap = feature_tap;
    return c;
}

DiscriminatorConfig TrainConfig::disc_config() const {
    return DiscriminatorConfig{feature_channels, disc_hidden};
}

std::string TrainConfig::to_json_string(int indent) const {
    json j;
    j["tau"] = tau;
    j["lambda"] = lambda;
    j["phi1"] = phi1;
    j["phi2"] = phi2;
    j["lr"] = lr;
    j["batch"] = batch;
    j["iterations"] = iterations;
    j["bins"] = bins;
    j["duration_us"] = duration_us;
    j["num_classes"] = classes;
    j["region_quantile"] = region_quantile;
    j["tau_pl"] = tau_pl;
    j["ema_momentum"] = ema_momentum;
    j["disc_lr_scale"] = disc_lr_scale;
    j["seed"] = seed;
    j["feature_tap"] = feature_tap == FeatureTap::kHead ? "head" : "encoder";
    j["pipeline"] = to_string(pipeline);
    j["entropy_on_blend"] = entropy_on_blend;
    j["eval_with_student"] = eval_with_student;
    j["checkpoint_every"] = checkpoint_every;
    j["enc1"] = enc1;
    j["enc2"] = enc2;
    j["feature_channels"] = feature_channels;
    j["disc_hidden"] = disc_hidden;
    j["paths"] = {{"source_train", paths.source_train},
                  {"target_train", paths.target_train},
                  {"target_val", paths.target_val},
                  {"out_dir", paths.out_dir}};
    return indent >= 0 ? j.dump(indent) : j.dump();
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad config JSON: ") + e.what());
    }
    TrainConfig c;
    try {
        c.tau = j.value("tau", c.tau);
        c.lambda = j.value("lambda", c.lambda);
        c.phi1 = j.value("phi1", c.phi1);
        c.phi2 = j.value("phi2", c.phi2);
        c.lr = j.value("lr", c.lr);
        c.batch = j.value("batch", c.batch);
        c.iterations = j.value("iterations", c.iterations);
        c.bins = j.value("bins", c.bins);
        c.duration_us = j.value("duration_us", c.duration_us);
        c.classes = j.value("num_classes", c.classes);
        c.region_quantile = j.value("region_quantile", c.region_quantile);
        c.tau_pl = j.value("tau_pl", c.tau_pl);
        c.ema_momentum = j.value("ema_momentum", c.ema_momentum);
        c.disc_lr_scale = j.value("disc_lr_scale", c.disc_lr_scale);
        c.seed = j.value("seed", c.seed);
        const std::string tap = j.value("feature_tap", std::string("head"));
        if (tap == "head") {
            c.feature_tap = FeatureTap::kHead;
        } else if (tap == "encoder") {
            c.feature_tap = FeatureTap::kEncoder;
        } else {
            throw ConfigError("feature_tap must be head or encoder");
        }
        c.pipeline = pipeline_from_string(j.value("pipeline", std::string("full")));
        c.entropy_on_blend = j.value("entropy_on_blend", c.entropy_on_blend);
        c.eval_with_student = j.value("eval_with_student", c.eval_with_student);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.enc1 = j.value("enc1", c.enc1);
        c.enc2 = j.value("enc2", c.enc2);
        c.feature_channels = j.value("feature_channels", c.feature_channels);
        c.disc_hidden = j.value("disc_hidden", c.disc_hidden);
        if (j.contains("paths")) {
            const json& p = j.at("paths");
            c.paths.source_train = p.value("source_train", std::string{});
            c.paths.target_train = p.value("target_train", std::string{});
            c.paths.target_val = p.value("target_val", std::string{});
            c.paths.out_dir = p.value("out_dir", std::string{});
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad config field: ") + e.what());
    }
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

void TrainConfig::save(const std::filesystem::path& path) const {
    AtomicFile file(path);
    {
        std::ofstream out(file.temp_path());
        out << to_json_string(2) << "\n";
        if (!out) throw IoError("cannot write config " + path.string());
    }
    file.commit();
}

std::uint64_t TrainConfig::digest() const {
    // Artifact locations do not change what was trained.
    TrainConfig canonical = *this;
    canonical.paths = TrainPaths{};
    const std::string text = canonical.to_json_string();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ull;
    }
    return h;
}

RunState init_run_state(const TrainConfig& cfg, const DensityMap& aggregated_target_density) {
    cfg.validate();
    RunState st;
    st.cfg = cfg;
    Rng base(cfg.seed);
    Rng r_student = base.fork(1);
    Rng r_d1 = base.fork(2);
    Rng r_d2 = base.fork(3);
    st.student.build(cfg.net_config());
    st.student.init(r_student);
    st.teacher.net = st.student;
    st.teacher.momentum = cfg.ema_momentum;
    st.disc1.build(cfg.disc_config());
    st.disc1.init(r_d1);
    st.disc2.build(cfg.disc_config());
    st.disc2.init(r_d2);
    st.rng_src = base.fork(10);
    st.rng_tgt = base.fork(11);
    st.target_density = normalize_density(aggregated_target_density, {NormalizeMode::kMax, 0.5});
    st.region = high_activation_region(st.target_density, cfg.region_quantile);
    return st;
}

namespace {

void pack_grids(const std::vector<VoxelGrid>& grids, int bins, Tensor& t) {
    if (grids.empty()) throw ShapeError("empty batch");
    const VoxelGrid& first = grids.front();
    if (first.bins != bins) throw ShapeError("voxel bin count does not match the configuration");
    t.resize(static_cast<int>(grids.size()), bins, first.height, first.width);
    for (std::size_t i = 0; i < grids.size(); ++i) {
        if (!grids[i].same_shape(first)) throw ShapeError("batch voxel dims disagree");
        std::copy(grids[i].data.begin(), grids[i].data.end(), t.sample(static_cast<int>(i)));
    }
}

void resize_zero_like(Tensor& t, const Tensor& like) {
    t.resize(like.n, like.c, like.h, like.w);
}

}  // namespace

LabelMap pseudo_labels_from_logits(const Tensor& logits, int sample, double confidence) {
    const int classes = logits.c;
    const int w = logits.w;
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;
    const float* z = logits.sample(sample);
    LabelMap out(logits.h, logits.w, static_cast<std::uint8_t>(classes));
    std::vector<float> rowmax(w), rowsum(w), tmp_row(w);
    std::vector<std::uint8_t> arg(w);
    for (int y = 0; y < logits.h; ++y) {
        const std::size_t off = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            rowmax[x] = z[off + x];
            arg[x] = 0;
        }
        for (int c = 1; c < classes; ++c) {
            const float* zc = z + c * plane + off;
            for (int x = 0; x < w; ++x) {
                if (zc[x] > rowmax[x]) {
                    rowmax[x] = zc[x];
                    arg[x] = static_cast<std::uint8_t>(c);
                }
            }
        }
        for (int x = 0; x < w; ++x) rowsum[x] = 0.0f;
        for (int c = 0; c < classes; ++c) {
            const float* zc = z + c * plane + off;
            fast_exp_sub_row(zc, rowmax.data(), tmp_row.data(), w);
            for (int x = 0; x < w; ++x) rowsum[x] += tmp_row[x];
        }
        for (int x = 0; x < w; ++x) {
            const double conf = 1.0 / static_cast<double>(rowsum[x]);
            out.data[off + x] = conf >= confidence ? arg[x] : LabelMap::kIgnore;
        }
    }
    return out;
}

LossReport train_step(RunState& state, const Batch& batch) {
    const TrainConfig& cfg = state.cfg;
    const Pipeline pl = cfg.pipeline;
    const std::size_t bsz = batch.src_voxels.size();
    if (bsz == 0) throw ShapeError("empty batch");
    if (batch.src_labels.size() != bsz) throw ShapeError("source labels missing from the batch");
    if (pl != Pipeline::kSourceOnly && batch.tgt_voxels.size() != bsz)
        throw ShapeError("source/target batch sizes disagree");

    pack_grids(batch.src_voxels, cfg.bins, state.t_src);

    // (a) teacher pseudo-labels for the target batch
    if (pl != Pipeline::kSourceOnly) {
        pack_grids(batch.tgt_voxels, cfg.bins, state.t_tgt);
        seg_forward(state.teacher.net, state.t_tgt, state.fwd_teacher, state.ws, false);
        state.pseudo.resize(bsz);
        for (std::size_t i = 0; i < bsz; ++i)
            state.pseudo[i] =
                pseudo_labels_from_logits(state.fwd_teacher.logits, static_cast<int>(i), cfg.tau_pl);
    }

    // (b) per-pair density -> similarity -> mask -> blend, spliced directly
    // into the blended batch tensor
    if (pl != Pipeline::kSourceOnly) {
        state.masks.resize(bsz);
        state.blended.resize(bsz);
        state.t_blend.resize(static_cast<int>(bsz), cfg.bins, state.t_src.h, state.t_src.w);
        const std::size_t plane = static_cast<std::size_t>(state.t_src.h) * state.t_src.w;
        for (std::size_t i = 0; i < bsz; ++i) {
            const DensityMap src_density = normalize_density(density_map(batch.src_voxels[i]),
                                                             {NormalizeMode::kMax, 0.5});
            const SimilarityMap sim = similarity_map(src_density, state.target_density);
            state.masks[i] = binary_mask(sim, cfg.tau);
            const std::uint8_t* bits = state.masks[i].bits.data();
            const float* src = state.t_src.sample(static_cast<int>(i));
            const float* tgt = state.t_tgt.sample(static_cast<int>(i));
            float* dst = state.t_blend.sample(static_cast<int>(i));
            for (int t = 0; t < cfg.bins; ++t) {
                const float* s_plane = src + t * plane;
                const float* t_plane = tgt + t * plane;
                float* d_plane = dst + t * plane;
                for (std::size_t px = 0; px < plane; ++px)
                    d_plane[px] = bits[px] ? s_plane[px] : t_plane[px];
            }
            state.blended[i] = blend_labels(batch.src_labels[i], state.pseudo[i], state.masks[i]);
        }
    }

    seg_forward(state.student, state.t_src, state.fwd_src, state.ws);
    if (pl != Pipeline::kSourceOnly) seg_forward(state.student, state.t_blend, state.fwd_blend, state.ws);
    if (pl == Pipeline::kFull) seg_forward(state.student, state.t_tgt, state.fwd_tgt, state.ws);

    const double lr = onecycle_lr(std::min(state.step, cfg.iterations), cfg.iterations, cfg.lr);
    LossParts parts;

    // (c) Step 1: discriminators learn, generator frozen.
    if (pl == Pipeline::kFull) {
        const Tensor& f_src = feature_of(state.student, state.fwd_src);
        const Tensor& f_blend = feature_of(state.student, state.fwd_blend);
        const Tensor& f_tgt = feature_of(state.student, state.fwd_tgt);

        state.disc1.params.zero_grad();
        disc_forward(state.disc1, f_src, state.dfw_1real, state.ws);
        disc_forward(state.disc1, f_blend, state.dfw_1fake, state.ws);
        resize_zero_like(state.g_real1, state.dfw_1real.prob);
        resize_zero_like(state.g_fake1, state.dfw_1fake.prob);
        parts.d1 = d1_loss(state.dfw_1real.prob, state.dfw_1fake.prob, &state.g_real1,
                           &state.g_fake1);
        disc_backward(state.disc1, state.dfw_1real, state.g_real1, nullptr, true, state.ws);
        disc_backward(state.disc1, state.dfw_1fake, state.g_fake1, nullptr, true, state.ws);
        state.opt_disc1.step(state.disc1.params, lr * cfg.disc_lr_scale);

        state.disc2.params.zero_grad();
        disc_forward(state.disc2, f_blend, state.dfw_2fake, state.ws);
        disc_forward(state.disc2, f_tgt, state.dfw_2real, state.ws);
        resize_zero_like(state.g_fake2, state.dfw_2fake.prob);
        resize_zero_like(state.g_real2, state.dfw_2real.prob);
        parts.d2 = d2_loss(state.dfw_2fake.prob, state.dfw_2real.prob, &state.g_fake2,
                           &state.g_real2);
        disc_backward(state.disc2, state.dfw_2fake, state.g_fake2, nullptr, true, state.ws);
        disc_backward(state.disc2, state.dfw_2real, state.g_real2, nullptr, true, state.ws);
        state.opt_disc2.step(state.disc2.params, lr * cfg.disc_lr_scale);
    }

    // (d) Step 2: generator learns, discriminators frozen.
    state.student.params.zero_grad();
    resize_zero_like(state.g_src, state.fwd_src.logits);
    parts.ce_src = cross_entropy(state.fwd_src.logits, batch.src_labels, &state.g_src, 1.0);

    Tensor* d_feat = nullptr;
    if (pl != Pipeline::kSourceOnly) {
        resize_zero_like(state.g_blend, state.fwd_blend.logits);
        parts.ce_blend = cross_entropy(state.fwd_blend.logits, state.blended, &state.g_blend, 1.0);
    }
    if (pl == Pipeline::kFull) {
        resize_zero_like(state.g_tgt, state.fwd_tgt.logits);
        Tensor* g_ent = cfg.lambda != 0.0 ? &state.g_tgt : nullptr;
        parts.eap_entropy =
            entropy_region(state.fwd_tgt.logits, state.region, g_ent, cfg.lambda);
        if (cfg.entropy_on_blend) {
            state.entropy_masks.resize(bsz);
            const std::size_t plane = state.region.bits.size();
            for (std::size_t i = 0; i < bsz; ++i) {
                state.entropy_masks[i].resize(plane);
                for (std::size_t px = 0; px < plane; ++px)
                    state.entropy_masks[i][px] =
                        (state.region.bits[px] && !state.masks[i].bits[px]) ? 1 : 0;
            }
            Tensor* g_bl = cfg.lambda != 0.0 ? &state.g_blend : nullptr;
            parts.eap_entropy +=
                entropy_masked(state.fwd_blend.logits, state.entropy_masks, g_bl, cfg.lambda);
        }

        disc_forward(state.disc1, feature_of(state.student, state.fwd_blend), state.dfw_adv1,
                     state.ws);
        disc_forward(state.disc2, feature_of(state.student, state.fwd_blend), state.dfw_adv2,
                     state.ws);
        resize_zero_like(state.g_p1, state.dfw_adv1.prob);
        resize_zero_like(state.g_p2, state.dfw_adv2.prob);
        parts.adv = adv_loss(state.dfw_adv1.prob, state.dfw_adv2.prob, cfg.phi1, cfg.phi2,
                             &state.g_p1, &state.g_p2);
        disc_backward(state.disc1, state.dfw_adv1, state.g_p1, &state.g_feat1, false, state.ws);
        disc_backward(state.disc2, state.dfw_adv2, state.g_p2, &state.g_feat2, false, state.ws);
        for (std::size_t i = 0; i < state.g_feat1.v.size(); ++i)
            state.g_feat1.v[i] += state.g_feat2.v[i];
        d_feat = &state.g_feat1;
    }

    seg_backward(state.student, state.fwd_src, &state.g_src, nullptr, state.ws);
    if (pl != Pipeline::kSourceOnly)
        seg_backward(state.student, state.fwd_blend, &state.g_blend, d_feat, state.ws);
    if (pl == Pipeline::kFull && cfg.lambda != 0.0)
        seg_backward(state.student, state.fwd_tgt, &state.g_tgt, nullptr, state.ws);
    state.opt_student.step(state.student.params, lr);

    // (e) EMA teacher update
    state.teacher.momentum = cfg.ema_momentum;
    state.teacher.update(state.student);
    state.step += 1;

    return total_objective(parts, {cfg.lambda, cfg.phi1, cfg.phi2});
}

Metrics evaluate(const SegNet& net, const Dataset& val, const TrainConfig& cfg) {
    if (val.labels.size() != val.size()) throw IoError("validation split must be labeled");
    ConfusionMatrix cm(cfg.classes);
    Workspace ws;
    SegForward fwd;
    Tensor input;
    std::vector<VoxelGrid> grids;
    for (std::size_t start = 0; start < val.size(); start += cfg.batch) {
        const std::size_t n = std::min<std::size_t>(cfg.batch, val.size() - start);
        grids.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            voxelize_into(val.streams[start + i], cfg.bins, cfg.duration_us, grids[i]);
        pack_grids(grids, cfg.bins, input);
        seg_forward(net, input, fwd, ws, false);
        const int w = fwd.logits.w;
        const std::size_t plane = static_cast<std::size_t>(fwd.logits.h) * w;
        std::vector<float> rowmax(w);
        for (std::size_t i = 0; i < n; ++i) {
            const float* z = fwd.logits.sample(static_cast<int>(i));
            LabelMap pred(fwd.logits.h, w, static_cast<std::uint8_t>(cfg.classes));
            for (int y = 0; y < fwd.logits.h; ++y) {
                const std::size_t off = static_cast<std::size_t>(y) * w;
                std::uint8_t* prow = pred.data.data() + off;
                for (int x = 0; x < w; ++x) {
                    rowmax[x] = z[off + x];
                    prow[x] = 0;
                }
                for (int c = 1; c < cfg.classes; ++c) {
                    const float* zc = z + c * plane + off;
                    for (int x = 0; x < w; ++x) {
                        if (zc[x] > rowmax[x]) {
                            rowmax[x] = zc[x];
                            prow[x] = static_cast<std::uint8_t>(c);
                        }
                    }
                }
            }
            accumulate(cm, pred, val.labels[start + i]);
        }
    }
    return metrics(cm);
}

std::string format_log_line(std::int64_t step, double lr, const LossReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%lld,\"lr\":%.17g,\"ce_src\":%.17g,\"ce_blend\":%.17g,"
                  "\"eap_entropy\":%.17g,\"d1\":%.17g,\"d2\":%.17g,\"adv\":%.17g,"
                  "\"total\":%.17g}",
                  static_cast<long long>(step), lr, r.ce_src, r.ce_blend, r.eap_entropy, r.d1,
                  r.d2, r.adv, r.total);
    return buf;
}

void save_run_checkpoint(const std::filesystem::path& path, const RunState& state) {
    const std::array<std::pair<std::string, const ParamSet*>, 4> sets = {
        std::pair<std::string, const ParamSet*>{"student", &state.student.params},
        {"teacher", &state.teacher.net.params},
        {"disc1", &state.disc1.params},
        {"disc2", &state.disc2.params},
    };
    AtomicFile file(path);
    save_checkpoint(file.temp_path(), state.cfg.digest(), state.step, sets);
    file.commit();
}

namespace {

void sample_batch(RunState& state, const Dataset& src, const Dataset& tgt, Batch& b) {
    const TrainConfig& cfg = state.cfg;
    const std::size_t n = static_cast<std::size_t>(cfg.batch);
    b.src_voxels.resize(n);
    b.src_labels.resize(n);
    b.tgt_voxels.resize(cfg.pipeline != Pipeline::kSourceOnly ? n : 0);
    for (int i = 0; i < cfg.batch; ++i) {
        const std::size_t si = state.rng_src.uniform_index(src.size());
        voxelize_into(src.streams[si], cfg.bins, cfg.duration_us, b.src_voxels[i]);
        b.src_labels[i] = src.labels[si];
        if (cfg.pipeline != Pipeline::kSourceOnly) {
            const std::size_t ti = state.rng_tgt.uniform_index(tgt.size());
            voxelize_into(tgt.streams[ti], cfg.bins, cfg.duration_us, b.tgt_voxels[i]);
        }
    }
}

}  // namespace

RunArtifacts run_adaptation(const TrainConfig& cfg, const Dataset& source_train,
                            const Dataset& target_train, const Dataset& target_val) {
    cfg.validate();
    if (source_train.size() == 0 || target_train.size() == 0)
        throw IoError("training splits must be non-empty");
    if (source_train.labels.size() != source_train.size())
        throw IoError("source training split must be labeled");
    if (target_val.size() > 0 && target_val.labels.size() != target_val.size())
        throw IoError("target validation split must be labeled");

    const std::filesystem::path out_dir =
        cfg.paths.out_dir.empty() ? std::filesystem::path(".")
                                  : std::filesystem::path(cfg.paths.out_dir);
    std::filesystem::create_directories(out_dir);
    cfg.save(out_dir / "config.json");

    // Aggregated target density, computed once over the target training split.
    DensityAccumulator acc;
    for (const EventStream& s : target_train.streams)
        acc.add(voxelize(s, cfg.bins, cfg.duration_us));
    RunState state = init_run_state(cfg, acc.mean());

    RunArtifacts artifacts;
    artifacts.log = out_dir / "train_log.jsonl";
    artifacts.checkpoint = out_dir / "final.ckpt";
    artifacts.metrics_file = out_dir / "metrics.json";

    std::ofstream log_out(artifacts.log, std::ios::binary | std::ios::trunc);
    if (!log_out) throw IoError("cannot open training log " + artifacts.log.string());

    Batch batch;
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
        sample_batch(state, source_train, target_train, batch);
        const double lr = onecycle_lr(state.step, cfg.iterations, cfg.lr);
        LossReport report;
        try {
            report = train_step(state, batch);
        } catch (const TrainAbort& e) {
            log_error("aborted at step " + std::to_string(state.step) + ": " + e.what());
            throw;
        }
        log_out << format_log_line(state.step, lr, report) << "\n";
        if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "step_%08lld.ckpt",
                          static_cast<long long>(state.step));
            save_run_checkpoint(out_dir / name, state);
        }
    }
    log_out.flush();
    if (!log_out) throw IoError("failed writing training log " + artifacts.log.string());
    log_out.close();

    save_run_checkpoint(artifacts.checkpoint, state);

    if (target_val.size() > 0) {
        const SegNet& eval_net = cfg.eval_with_student ? state.student : state.teacher.net;
        artifacts.final_metrics = evaluate(eval_net, target_val, cfg);
        json m;
        m["step"] = state.step;
        m["split"] = "target_val";
        m["network"] = cfg.eval_with_student ? "student" : "teacher";
        m["acc"] = artifacts.final_metrics.acc;
        m["macc"] = artifacts.final_metrics.macc;
        m["miou"] = artifacts.final_metrics.miou;
        m["fiou"] = artifacts.final_metrics.fiou;
        m["per_class_iou"] = artifacts.final_metrics.per_class_iou;
        AtomicFile file(artifacts.metrics_file);
        {
            std::ofstream out(file.temp_path());
            out << m.dump(2) << "\n";
            if (!out) throw IoError("cannot write metrics " + artifacts.metrics_file.string());
        }
        file.commit();
    }
    return artifacts;
}

RunArtifacts run_adaptation(const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.paths.source_train.empty() || cfg.paths.target_train.empty())
        throw IoError("config must name source_train and target_train manifests");
    const Dataset source_train = load_dataset(cfg.paths.source_train, true);
    const Dataset target_train = load_dataset(cfg.paths.target_train, false);
    Dataset target_val;
    if (!cfg.paths.target_val.empty()) target_val = load_dataset(cfg.paths.target_val, true);
    return run_adaptation(cfg, source_train, target_train, target_val);
}

}  // namespace eventfly
