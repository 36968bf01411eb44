#pragma once

// Resolved run configuration shared by the CLI subcommands: one JSON document
// mirrors this struct, flags override file values, and every run echoes the
// result to run.json.

#include <cstdint>
#include <string>

#include "gard/corpus.hpp"
#include "gard/denoiser.hpp"
#include "gard/diffusion.hpp"
#include "gard/fidelity.hpp"
#include "gard/phantom.hpp"

namespace gard {

// Method variants from the evaluation table. Each maps to a
// (noise_family, fidelity) pair; nlm_only bypasses diffusion entirely.
enum class Variant : std::uint8_t { Gard, Ddgm, DdgmCpdm, Ddpm, DdpmCpdm, DdpmNrft, NlmOnly };

Variant variant_from_name(const std::string& name);  // throws config_error
std::string variant_name(Variant v);

// The (family, fidelity) wiring for a diffusion variant; config_error for nlm_only.
void apply_variant(Variant v, InferenceConfig& cfg);

struct RunConfig {
    ScheduleParams schedule;
    InferenceConfig inference;
    TrainConfig train;
    NlmParams nlm;
    PhantomParams phantom;
    SpeckleParams speckle;

    std::string variant = "gard";
    int corpus_count = 50;
    std::uint64_t seed = 0;

    std::string input_path, output_path, checkpoint_path, corpus_dir;
    int jobs = 1;
    bool force = false;
};

// JSON (de)serialization; unknown keys are an error so typos surface early.
RunConfig run_config_from_json(const std::string& json_text);
std::string run_config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace gard
