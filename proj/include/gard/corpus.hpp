#pragma once

// Paired-phantom corpus on disk: corpus/{clean,noisy,avg}/NNNN.png plus a
// manifest.json that makes regeneration byte-identical.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gard/phantom.hpp"
#include "gard/types.hpp"

namespace gard {

struct CorpusManifest {
    int schema_version = 1;
    int count = 0;
    std::uint64_t seed = 0;  // master seed; per-sample seeds derive from it
    PhantomParams phantom;
    SpeckleParams speckle;

    void validate() const;
};

// Per-sample file name, zero-padded: 0 -> "0000.png".
std::string sample_name(int index);

// Generates `manifest.count` paired samples under `dir`. Refuses to touch an
// existing corpus directory unless `force`. Writes manifest.json last.
void write_corpus(const std::string& dir, const CorpusManifest& manifest, bool force = false,
                  const std::function<void(int, int)>& progress = nullptr);

CorpusManifest read_manifest(const std::string& dir);

// The deterministic sample for one index (independent of what is on disk).
PairedSample generate_sample(const CorpusManifest& manifest, int index);

// Loads one triplet from disk as raw8bit fields.
PairedSample load_sample(const std::string& dir, int index);

// Loads every clean image of a corpus as normalized fields (training input).
std::vector<ImageField> load_clean_normalized(const std::string& dir);

}  // namespace gard
