#include "gard/corpus.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gard/image_io.hpp"
#include "gard/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gard {

void CorpusManifest::validate() const {
    if (schema_version != 1) throw config_error("corpus: unsupported manifest schema version");
    if (count < 1) throw config_error("corpus: count must be >= 1");
    phantom.validate();
    speckle.validate();
}

std::string sample_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d.png", index);
    return buf;
}

namespace {

json manifest_to_json(const CorpusManifest& m) {
    return json{
        {"schema_version", m.schema_version},
        {"count", m.count},
        {"seed", m.seed},
        {"phantom",
         {{"width", m.phantom.width},
          {"height", m.phantom.height},
          {"n_layers", m.phantom.n_layers},
          {"boundary_waviness", m.phantom.boundary_waviness},
          {"reflectivity_lo", m.phantom.reflectivity_range.first},
          {"reflectivity_hi", m.phantom.reflectivity_range.second},
          {"n_vessels", m.phantom.n_vessels},
          {"blur_sigma", m.phantom.blur_sigma}}},
        {"speckle",
         {{"looks", m.speckle.looks},
          {"display_transform",
           m.speckle.display_transform == DisplayTransform::FourthRoot ? "fourth_root" : "log"},
          {"averaging_count", m.speckle.averaging_count}}},
    };
}

CorpusManifest manifest_from_json(const json& j) {
    CorpusManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        m.count = j.at("count").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        const json& p = j.at("phantom");
        m.phantom.width = p.at("width").get<int>();
        m.phantom.height = p.at("height").get<int>();
        m.phantom.n_layers = p.at("n_layers").get<int>();
        m.phantom.boundary_waviness = p.at("boundary_waviness").get<double>();
        m.phantom.reflectivity_range = {p.at("reflectivity_lo").get<double>(),
                                        p.at("reflectivity_hi").get<double>()};
        m.phantom.n_vessels = p.at("n_vessels").get<int>();
        m.phantom.blur_sigma = p.at("blur_sigma").get<double>();
        const json& s = j.at("speckle");
        m.speckle.looks = s.at("looks").get<double>();
        const std::string dt = s.at("display_transform").get<std::string>();
        if (dt == "fourth_root") m.speckle.display_transform = DisplayTransform::FourthRoot;
        else if (dt == "log") m.speckle.display_transform = DisplayTransform::Log;
        else throw data_error("corpus: unknown display_transform '" + dt + "'");
        m.speckle.averaging_count = s.at("averaging_count").get<int>();
    } catch (const json::exception& e) {
        throw data_error(std::string("corpus: malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

}  // namespace

PairedSample generate_sample(const CorpusManifest& manifest, int index) {
    if (index < 0 || index >= manifest.count) throw config_error("corpus: sample index range");
    PhantomParams p = manifest.phantom;
    p.seed = derive_seed(manifest.seed, 2 * static_cast<std::uint64_t>(index));
    const ImageField clean = generate_phantom(p);
    return apply_speckle(clean, manifest.speckle,
                         derive_seed(manifest.seed, 2 * static_cast<std::uint64_t>(index) + 1));
}

void write_corpus(const std::string& dir, const CorpusManifest& manifest, bool force,
                  const std::function<void(int, int)>& progress) {
    manifest.validate();
    const fs::path root(dir);
    if (fs::exists(root / "manifest.json") && !force)
        throw data_error("corpus already exists at " + dir + " (use --force to overwrite)");
    std::error_code ec;
    for (const char* sub : {"clean", "noisy", "avg"}) {
        fs::create_directories(root / sub, ec);
        if (ec) throw data_error("cannot create corpus directory " + (root / sub).string());
    }
    for (int i = 0; i < manifest.count; ++i) {
        const PairedSample s = generate_sample(manifest, i);
        save_image(s.clean, (root / "clean" / sample_name(i)).string());
        save_image(s.noisy, (root / "noisy" / sample_name(i)).string());
        save_image(s.less_noisy, (root / "avg" / sample_name(i)).string());
        if (progress) progress(i + 1, manifest.count);
    }
    std::ofstream os(root / "manifest.json");
    if (!os) throw data_error("cannot write manifest under " + dir);
    os << manifest_to_json(manifest).dump(2) << '\n';
}

CorpusManifest read_manifest(const std::string& dir) {
    const fs::path p = fs::path(dir) / "manifest.json";
    std::ifstream is(p);
    if (!is) throw data_error("no corpus manifest at " + p.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw data_error("corpus: manifest is not valid JSON: " + std::string(e.what()));
    }
    return manifest_from_json(j);
}

PairedSample load_sample(const std::string& dir, int index) {
    const fs::path root(dir);
    PairedSample s;
    s.clean = load_image((root / "clean" / sample_name(index)).string());
    s.noisy = load_image((root / "noisy" / sample_name(index)).string());
    s.less_noisy = load_image((root / "avg" / sample_name(index)).string());
    if (!s.clean.same_shape(s.noisy) || !s.clean.same_shape(s.less_noisy))
        throw data_error("corpus sample " + std::to_string(index) + ": shape mismatch");
    return s;
}

std::vector<ImageField> load_clean_normalized(const std::string& dir) {
    const CorpusManifest m = read_manifest(dir);
    std::vector<ImageField> out;
    out.reserve(m.count);
    for (int i = 0; i < m.count; ++i) {
        const ImageField raw = load_image((fs::path(dir) / "clean" / sample_name(i)).string());
        out.push_back(normalize(raw, Domain::Raw8bit, Domain::Normalized));
    }
    return out;
}

}  // namespace gard
