#pragma once

#include <string>

#include "kdd/experiments.hpp"
#include "kdd/trainer.hpp"

namespace kdd::config {

// Flat JSON run configuration; unknown keys are rejected so typos fail loudly.
// See README for the documented schema and defaults.
TrainConfig train_config_from_file(const std::string& path);
TrainConfig train_config_from_json_text(const std::string& text);

AppendixAConfig appendix_config_from_file(const std::string& path);
AppendixAConfig appendix_config_from_json_text(const std::string& text);

}  // namespace kdd::config
