#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recap/corpus.hpp"

namespace recap::synth {

// Planted per-user style signature: casing habit, contraction habit,
// final-punctuation habit, and a signature suffix token.
struct UserSignature {
    bool uppercase = false;
    bool apostrophe = false;  // false = bare "nt" contractions
    bool final_punct = false;
    std::string suffix;
};

struct SynthOptions {
    size_t n_users = 200;
    size_t samples_per_user = 24;  // 10 train + the rest history
    uint64_t seed = 1;
};

struct SynthCorpus {
    std::vector<corpus::Sample> samples;
    std::vector<corpus::TraitRecord> traits;
};

std::string synth_user_id(size_t index);
UserSignature signature_of_user(size_t index);
std::string domain_of(size_t user_index, size_t sample_index);

// Render one response in the user's signature (used by tests to build
// style-matched probes).
std::string render_response(size_t user_index, size_t sample_index);

SynthCorpus generate_corpus(const SynthOptions& opts);

}  // namespace recap::synth
