#pragma once

#include <cstddef>
#include <string>

#include "psm/dataset.hpp"
#include "psm/pipeline.hpp"

namespace psm {

// Everything a run needs, bundled so a single JSON file reproduces it.
struct RunConfig {
    PipelineConfig pipeline;
    GridSpec grid;
    std::size_t queue_capacity = 256;
    double stats_interval = 5.0;  // s, live mode progress cadence
};

void validate(const RunConfig& config);

// Partial JSON: absent keys keep their defaults, unknown keys are refused
// so typos do not silently fall back.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Full echo of the effective configuration, defaults included.
std::string dump_run_config(const RunConfig& config);

}  // namespace psm
