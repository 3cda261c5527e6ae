#pragma once

#include "madloop/config.hpp"

#include <string>
#include <vector>

namespace madloop {

struct Preset {
    std::string name;
    std::string summary;
    ExperimentConfig config;
};

/// Named experiments, one per reproduced figure. Gaussian presets use d = 100.
const std::vector<Preset>& presets();

/// Throws ConfigError for an unknown name.
const Preset& find_preset(const std::string& name);

} // namespace madloop
