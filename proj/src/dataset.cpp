#include "eventfly/dataset.hpp"

#include <fstream>
#include <thread>

#include <json.hpp>

#include "eventfly/io.hpp"
#include "eventfly/log.hpp"

namespace eventfly {

namespace {

using nlohmann::json;

std::string sample_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", index);
    return buf;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec, int jobs) {
    if (spec.count <= 0) throw ConfigError("corpus size must be positive");
    if (spec.label_space != kNumClasses19 && spec.label_space != kNumClasses11)
        throw ConfigError("label space must be 19 or 11");
    std::filesystem::create_directories(dir / "events");
    std::filesystem::create_directories(dir / "labels");

    const PlatformProfile profile = PlatformProfile::make(spec.platform, spec.height, spec.width);
    const int workers = std::max(1, jobs);

    auto make_one = [&](int i) {
        SceneSample sample =
            generate_scene(profile, spec.seed * 1000003ull + static_cast<std::uint64_t>(i));
        if (spec.label_space == kNumClasses11)
            sample.labels = map_labels(sample.labels, LabelMapping::k19To11);
        const std::string name = sample_name(i);
        write_events(sample.stream, dir / "events" / (name + ".evt"));
        write_labels(sample.labels, dir / "labels" / (name + ".lbl"));
    };

    if (workers == 1) {
        for (int i = 0; i < spec.count; ++i) make_one(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int i = w; i < spec.count; i += workers) make_one(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    json manifest;
    manifest["platform"] = to_string(spec.platform);
    manifest["seed"] = spec.seed;
    manifest["width"] = spec.width;
    manifest["height"] = spec.height;
    manifest["num_classes"] = spec.label_space;
    json samples = json::array();
    json sequence = json::array();
    for (int i = 0; i < spec.count; ++i) {
        const std::string name = sample_name(i);
        samples.push_back({{"id", i},
                           {"events", "events/" + name + ".evt"},
                           {"labels", "labels/" + name + ".lbl"}});
        sequence.push_back(i);
    }
    manifest["samples"] = std::move(samples);
    manifest["sequences"] = json::array({std::move(sequence)});

    AtomicFile file(dir / "manifest.json");
    {
        std::ofstream out(file.temp_path());
        out << manifest.dump(2) << "\n";
        if (!out) throw IoError("cannot write manifest in " + dir.string());
    }
    file.commit();
    log_info("wrote corpus of " + std::to_string(spec.count) + " samples to " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& manifest_path, bool with_labels) {
    if (!std::filesystem::exists(manifest_path))
        throw IoError("dataset manifest not found: " + manifest_path.string());
    const json manifest = read_json(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();

    Dataset ds;
    ds.width = manifest.at("width").get<std::uint32_t>();
    ds.height = manifest.at("height").get<std::uint32_t>();
    ds.num_classes = manifest.at("num_classes").get<std::uint8_t>();
    for (const auto& sample : manifest.at("samples")) {
        const auto events_path = base / sample.at("events").get<std::string>();
        EventStream stream = read_events(events_path);
        if (stream.width != ds.width || stream.height != ds.height)
            throw FormatError(events_path.string() + ": sensor dims disagree with the manifest");
        ds.streams.push_back(std::move(stream));
        if (with_labels) {
            if (!sample.contains("labels"))
                throw IoError("manifest sample lacks labels: " + manifest_path.string());
            const auto labels_path = base / sample.at("labels").get<std::string>();
            LabelMap labels = read_labels(labels_path);
            if (labels.height != static_cast<int>(ds.height) ||
                labels.width != static_cast<int>(ds.width))
                throw FormatError(labels_path.string() + ": label dims disagree with the manifest");
            ds.labels.push_back(std::move(labels));
        }
    }
    if (manifest.contains("sequences")) {
        for (const auto& seq : manifest.at("sequences"))
            ds.sequences.push_back(seq.get<std::vector<int>>());
    } else {
        std::vector<int> all(ds.streams.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        ds.sequences.push_back(std::move(all));
    }
    return ds;
}

void write_split_manifests(const std::filesystem::path& manifest_path, double ratio) {
    const json manifest = read_json(manifest_path);
    std::vector<std::vector<int>> sequences;
    if (manifest.contains("sequences")) {
        for (const auto& seq : manifest.at("sequences"))
            sequences.push_back(seq.get<std::vector<int>>());
    } else {
        std::vector<int> all;
        for (const auto& sample : manifest.at("samples")) all.push_back(sample.at("id").get<int>());
        sequences.push_back(std::move(all));
    }
    const SequenceSplit split = split_sequences(sequences, ratio);

    auto subset = [&](const std::vector<std::vector<int>>& seqs) {
        json out = manifest;
        std::vector<bool> keep(manifest.at("samples").size(), false);
        for (const auto& seq : seqs)
            for (int id : seq) keep.at(static_cast<std::size_t>(id)) = true;
        json samples = json::array();
        for (const auto& sample : manifest.at("samples"))
            if (keep.at(sample.at("id").get<std::size_t>())) samples.push_back(sample);
        out["samples"] = std::move(samples);
        json jseqs = json::array();
        for (const auto& seq : seqs) jseqs.push_back(seq);
        out["sequences"] = std::move(jseqs);
        return out;
    };

    const std::filesystem::path base = manifest_path.parent_path();
    for (const auto& [name, seqs] :
         {std::pair{"train.json", split.train}, std::pair{"val.json", split.val}}) {
        AtomicFile file(base / name);
        {
            std::ofstream out(file.temp_path());
            out << subset(seqs).dump(2) << "\n";
            if (!out) throw IoError("cannot write split manifest in " + base.string());
        }
        file.commit();
    }
}

}  // namespace eventfly
