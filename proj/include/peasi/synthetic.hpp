#pragma once

#include <cstdint>
#include <vector>

#include "peasi/corpus.hpp"

namespace peasi::synth {

// Desk-scale stand-in for a web-sourced QA corpus. Each question shares a
// rare marker token with exactly one planted answer sentence in its
// documents; distractor sentences are filler text that occasionally carries
// another question's marker (a hard negative). Markers are drawn from a pool
// reused across splits so held-out questions stay learnable.
struct GeneratorConfig {
    int n_questions = 500;
    double positive_rate = 0.38;  // target share of positive QA annotations
    int docs_per_question = 1;
    int sentences_per_doc = 12;
    int question_len = 5;   // filler words per question, plus the marker
    int sentence_len = 6;   // filler words per sentence (marker replaces one)
    int marker_pool = 40;
    double hard_negative_rate = 0.0;
    double dev_fraction = 0.1;
    double test_fraction = 0.1;

    void validate() const;
};

// Deterministic for a fixed (config, seed). Returns the train/dev/test splits
// with documents, questions and annotations; passages are produced later by
// corpus building.
std::vector<corpus::DatasetSplit> generate(const GeneratorConfig& cfg, std::uint64_t seed);

}  // namespace peasi::synth
