#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vts/dataio.hpp"
#include "vts/models.hpp"
#include "vts/training.hpp"

namespace vts::cli {

// Dotted-key config text: "section.key = value" lines, '#' comments.
// Unknown keys are rejected; command-line --set pairs override file values.
struct KeyValue {
    std::string key;
    std::string value;
};

std::vector<KeyValue> parse_config_text(const std::string& text);
std::vector<KeyValue> parse_config_file(const std::string& path);

struct RunConfig {
    models::ModelConfig model;
    std::string manifest;           // data.manifest
    training::TrainConfig train;    // opt/disc_opt/sched/weights/loop knobs
    training::RegimeConfig regime;  // train-v2a only
    std::string regime_name = "scratch";
    std::string output_dir;
    bool deterministic = true;
    int threads = 1;

    // merged effective values, one per line, sorted by key
    std::vector<KeyValue> effective;
};

// Applies defaults, then file values, then overrides; validates everything
// and throws InvalidConfiguration on unknown keys or bad values.
RunConfig build_run_config(const std::vector<KeyValue>& file_values,
                           const std::vector<KeyValue>& overrides);

void echo_config(const RunConfig& cfg, std::ostream& out);

// Manifest-backed sample loading for one split/group. Video tensors and
// identity embeddings are attached when the model wants them.
std::vector<dataio::Sample> load_samples(const dataio::DatasetManifest& m,
                                         dataio::Split split,
                                         dataio::Group group,
                                         const models::ModelConfig& model,
                                         bool need_video);

// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace vts::cli
