#pragma once

#include <filesystem>

#include "eventfly/bench.hpp"
#include "eventfly/types.hpp"

namespace eventfly {

// In-memory split: raw streams plus labels (labels may be empty for the
// unlabeled target training split).
struct Dataset {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint8_t num_classes = 0;
    std::vector<EventStream> streams;
    std::vector<LabelMap> labels;
    std::vector<std::vector<int>> sequences;

    std::size_t size() const { return streams.size(); }
};

struct CorpusSpec {
    Platform platform = Platform::kVehicle;
    int count = 200;
    std::uint64_t seed = 7;
    int height = 90;
    int width = 160;
    int label_space = kNumClasses19;  // 19 or 11
};

// Writes events/NNNNNN.evt + labels/NNNNNN.lbl plus manifest.json. The whole
// corpus counts as one sequence for splitting purposes.
void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec, int jobs = 1);

// Loads the samples named by a manifest (manifest.json or a split manifest).
Dataset load_dataset(const std::filesystem::path& manifest_path, bool with_labels);

// Splits a corpus manifest into train.json / val.json beside it; the last
// ceil(ratio * N) frames of each sequence go to validation.
void write_split_manifests(const std::filesystem::path& manifest_path, double ratio);

}  // namespace eventfly
