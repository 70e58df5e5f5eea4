#pragma once

#include <filesystem>

#include "qanno/annotation_loop.hpp"

namespace qanno {

struct SweepSpec {
    std::vector<double> ratios;  // Sem cost as a fraction of the Man cost, strictly increasing in (0,1)
    int repetitions = 1;

    static std::vector<double> ratio_range(double start, double stop, double step);
    void validate() const;
};

// Parses the run configuration: a single JSON object, unknown keys rejected.
// Throws IoError when the file cannot be read, ConfigError on anything else.
RunConfig load_run_config(const std::filesystem::path& path);

// Sweep settings from the config's optional "sweep" object (defaults when absent).
SweepSpec load_sweep_spec(const std::filesystem::path& path);

}  // namespace qanno
