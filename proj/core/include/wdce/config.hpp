#pragma once

#include <stdexcept>
#include <string>

#include "wdce/backbone.hpp"
#include "wdce/data.hpp"
#include "wdce/model.hpp"

namespace wdce {

/// Bad user input: unknown keys, unparseable files, invalid values.
/// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a run needs, mirrored one-to-one in a JSON document with
/// sections "train", "synth" and "backbone". Unknown keys are rejected.
struct RunConfig {
    TrainConfig train{};
    SynthSpec synth{};
    BackboneConfig backbone{};

    void validate() const;
};

RunConfig default_run_config();

/// Parses a full document on top of `base`; missing keys keep base's
/// values, unknown keys are errors.
RunConfig parse_run_config(const std::string& json_text, RunConfig base = RunConfig{});
RunConfig load_run_config(const std::string& path, RunConfig base = RunConfig{});

/// Parses a bare synth section (the cmd_gen --spec file format). Accepts
/// either {"synth": {...}} or the flat object.
SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::string& path);

/// Canonical JSON with every field explicit; keys sorted, so output is
/// byte-stable for identical configs.
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace wdce
