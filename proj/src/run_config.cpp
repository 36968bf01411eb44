#include "gard/run_config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

using nlohmann::json;

namespace gard {

Variant variant_from_name(const std::string& name) {
    if (name == "gard") return Variant::Gard;
    if (name == "ddgm") return Variant::Ddgm;
    if (name == "ddgm+cpdm") return Variant::DdgmCpdm;
    if (name == "ddpm") return Variant::Ddpm;
    if (name == "ddpm+cpdm") return Variant::DdpmCpdm;
    if (name == "ddpm+nrft") return Variant::DdpmNrft;
    if (name == "nlm-only") return Variant::NlmOnly;
    throw config_error("unknown variant '" + name +
                       "' (gard|ddgm|ddgm+cpdm|ddpm|ddpm+cpdm|ddpm+nrft|nlm-only)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Gard: return "gard";
        case Variant::Ddgm: return "ddgm";
        case Variant::DdgmCpdm: return "ddgm+cpdm";
        case Variant::Ddpm: return "ddpm";
        case Variant::DdpmCpdm: return "ddpm+cpdm";
        case Variant::DdpmNrft: return "ddpm+nrft";
        case Variant::NlmOnly: return "nlm-only";
    }
    return "unknown";
}

void apply_variant(Variant v, InferenceConfig& cfg) {
    switch (v) {
        case Variant::Gard:
            cfg.noise_family = NoiseFamily::Gamma;
            cfg.fidelity = FidelityKind::Nrft;
            return;
        case Variant::Ddgm:
            cfg.noise_family = NoiseFamily::Gamma;
            cfg.fidelity = FidelityKind::None;
            return;
        case Variant::DdgmCpdm:
            cfg.noise_family = NoiseFamily::Gamma;
            cfg.fidelity = FidelityKind::Raw;
            return;
        case Variant::Ddpm:
            cfg.noise_family = NoiseFamily::Gaussian;
            cfg.fidelity = FidelityKind::None;
            return;
        case Variant::DdpmCpdm:
            cfg.noise_family = NoiseFamily::Gaussian;
            cfg.fidelity = FidelityKind::Raw;
            return;
        case Variant::DdpmNrft:
            cfg.noise_family = NoiseFamily::Gaussian;
            cfg.fidelity = FidelityKind::Nrft;
            return;
        case Variant::NlmOnly:
            throw config_error("nlm-only bypasses diffusion and has no (family, fidelity) pair");
    }
}

namespace {

FidelityKind fidelity_from_name(const std::string& s) {
    if (s == "none") return FidelityKind::None;
    if (s == "raw") return FidelityKind::Raw;
    if (s == "nrft") return FidelityKind::Nrft;
    throw config_error("unknown fidelity '" + s + "' (none|raw|nrft)");
}

json to_json(const RunConfig& c) {
    return json{
        {"schedule",
         {{"T", c.schedule.T},
          {"beta_start", c.schedule.beta_start},
          {"beta_end", c.schedule.beta_end},
          {"theta0", c.schedule.theta0}}},
        {"inference",
         {{"t_start", c.inference.t_start},
          {"stride", c.inference.stride},
          {"sigma_mode",
           c.inference.sigma_mode == SigmaMode::Deterministic ? "deterministic" : "stochastic"},
          {"fidelity", fidelity_kind_name(c.inference.fidelity)},
          {"mu", c.inference.mu},
          {"noise_family", noise_family_name(c.inference.noise_family)}}},
        {"train",
         {{"iterations", c.train.iterations},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"weight_decay", c.train.weight_decay},
          {"noise_family", noise_family_name(c.train.noise_family)},
          {"augment_hflip", c.train.augment_hflip},
          {"checkpoint_every", c.train.checkpoint_every},
          {"seed", c.train.seed},
          {"crop_size", c.train.crop_size}}},
        {"nlm",
         {{"patch_radius", c.nlm.patch_radius},
          {"search_radius", c.nlm.search_radius},
          {"h", c.nlm.h},
          {"noise_std_estimate", c.nlm.noise_std_estimate}}},
        {"phantom",
         {{"width", c.phantom.width},
          {"height", c.phantom.height},
          {"n_layers", c.phantom.n_layers},
          {"boundary_waviness", c.phantom.boundary_waviness},
          {"reflectivity_lo", c.phantom.reflectivity_range.first},
          {"reflectivity_hi", c.phantom.reflectivity_range.second},
          {"n_vessels", c.phantom.n_vessels},
          {"blur_sigma", c.phantom.blur_sigma}}},
        {"speckle",
         {{"looks", c.speckle.looks},
          {"display_transform",
           c.speckle.display_transform == DisplayTransform::FourthRoot ? "fourth_root" : "log"},
          {"averaging_count", c.speckle.averaging_count}}},
        {"variant", c.variant},
        {"corpus_count", c.corpus_count},
        {"seed", c.seed},
        {"input_path", c.input_path},
        {"output_path", c.output_path},
        {"checkpoint_path", c.checkpoint_path},
        {"corpus_dir", c.corpus_dir},
        {"jobs", c.jobs},
        {"force", c.force},
    };
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void from_json_obj(const json& j, RunConfig& c) {
    static const std::set<std::string> known = {
        "schedule", "inference", "train",           "nlm",        "phantom", "speckle",
        "variant",  "corpus_count", "seed",         "input_path", "output_path",
        "checkpoint_path", "corpus_dir", "jobs",    "force"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw config_error("config: unknown key '" + it.key() + "'");

    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        maybe(s, "T", c.schedule.T);
        maybe(s, "beta_start", c.schedule.beta_start);
        maybe(s, "beta_end", c.schedule.beta_end);
        maybe(s, "theta0", c.schedule.theta0);
    }
    if (j.contains("inference")) {
        const json& s = j.at("inference");
        maybe(s, "t_start", c.inference.t_start);
        maybe(s, "stride", c.inference.stride);
        if (s.contains("sigma_mode")) {
            const std::string m = s.at("sigma_mode").get<std::string>();
            if (m == "deterministic") c.inference.sigma_mode = SigmaMode::Deterministic;
            else if (m == "stochastic") c.inference.sigma_mode = SigmaMode::Stochastic;
            else throw config_error("config: unknown sigma_mode '" + m + "'");
        }
        if (s.contains("fidelity"))
            c.inference.fidelity = fidelity_from_name(s.at("fidelity").get<std::string>());
        maybe(s, "mu", c.inference.mu);
        if (s.contains("noise_family"))
            c.inference.noise_family =
                noise_family_from_name(s.at("noise_family").get<std::string>());
    }
    if (j.contains("train")) {
        const json& s = j.at("train");
        maybe(s, "iterations", c.train.iterations);
        maybe(s, "batch_size", c.train.batch_size);
        maybe(s, "learning_rate", c.train.learning_rate);
        maybe(s, "weight_decay", c.train.weight_decay);
        if (s.contains("noise_family"))
            c.train.noise_family = noise_family_from_name(s.at("noise_family").get<std::string>());
        maybe(s, "augment_hflip", c.train.augment_hflip);
        maybe(s, "checkpoint_every", c.train.checkpoint_every);
        maybe(s, "seed", c.train.seed);
        maybe(s, "crop_size", c.train.crop_size);
    }
    if (j.contains("nlm")) {
        const json& s = j.at("nlm");
        maybe(s, "patch_radius", c.nlm.patch_radius);
        maybe(s, "search_radius", c.nlm.search_radius);
        maybe(s, "h", c.nlm.h);
        maybe(s, "noise_std_estimate", c.nlm.noise_std_estimate);
    }
    if (j.contains("phantom")) {
        const json& s = j.at("phantom");
        maybe(s, "width", c.phantom.width);
        maybe(s, "height", c.phantom.height);
        maybe(s, "n_layers", c.phantom.n_layers);
        maybe(s, "boundary_waviness", c.phantom.boundary_waviness);
        if (s.contains("reflectivity_lo"))
            c.phantom.reflectivity_range.first = s.at("reflectivity_lo").get<double>();
        if (s.contains("reflectivity_hi"))
            c.phantom.reflectivity_range.second = s.at("reflectivity_hi").get<double>();
        maybe(s, "n_vessels", c.phantom.n_vessels);
        maybe(s, "blur_sigma", c.phantom.blur_sigma);
    }
    if (j.contains("speckle")) {
        const json& s = j.at("speckle");
        maybe(s, "looks", c.speckle.looks);
        if (s.contains("display_transform")) {
            const std::string dt = s.at("display_transform").get<std::string>();
            if (dt == "fourth_root") c.speckle.display_transform = DisplayTransform::FourthRoot;
            else if (dt == "log") c.speckle.display_transform = DisplayTransform::Log;
            else throw config_error("config: unknown display_transform '" + dt + "'");
        }
        maybe(s, "averaging_count", c.speckle.averaging_count);
    }
    maybe(j, "variant", c.variant);
    maybe(j, "corpus_count", c.corpus_count);
    maybe(j, "seed", c.seed);
    maybe(j, "input_path", c.input_path);
    maybe(j, "output_path", c.output_path);
    maybe(j, "checkpoint_path", c.checkpoint_path);
    maybe(j, "corpus_dir", c.corpus_dir);
    maybe(j, "jobs", c.jobs);
    maybe(j, "force", c.force);
}

}  // namespace

RunConfig run_config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig c;
    try {
        from_json_obj(j, c);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    variant_from_name(c.variant);  // validate the selector early
    return c;
}

std::string run_config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path);
    os << run_config_to_json(cfg);
}

}  // namespace gard
