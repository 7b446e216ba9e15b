#pragma once

#include <string>
#include <vector>

#include "peasi/rng.hpp"
#include "peasi/tape.hpp"
#include "peasi/text.hpp"

namespace peasi::model {

struct EncoderConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 256;
    int max_seq_len = 128;
    int vocab_size = 0;
    double dropout = 0.0;  // kept at 0 for determinism

    void validate() const;
};

// Small transformer encoder: token+segment+position embeddings, then
// n_layers of (masked multi-head self-attention -> add&norm -> gelu
// feedforward -> add&norm), post-layer-norm arrangement. encode() returns the
// hidden state at position 0, the pooled embedding every head consumes.
// Padding tokens are masked out of attention in every layer, so a padded tail
// never changes the result.
class Encoder {
public:
    Encoder(const EncoderConfig& cfg, Rng& rng, const std::string& prefix = "enc");

    // Returns the id of the 1 x d_model pooled embedding on the tape.
    nd::Tape::Id encode(nd::Tape& tape, const text::TokenSequence& seq);

    // Forward-only convenience: the pooled embedding as plain values.
    std::vector<double> embed(const text::TokenSequence& seq);

    const EncoderConfig& config() const { return cfg_; }
    std::vector<nd::Parameter*> params();
    const std::string& prefix() const { return prefix_; }

private:
    struct Layer {
        nd::Parameter wq, bq, wk, bk, wv, bv, wo, bo;
        nd::Parameter ln1_gain, ln1_bias;
        nd::Parameter w1, b1, w2, b2;
        nd::Parameter ln2_gain, ln2_bias;
    };

    EncoderConfig cfg_;
    std::string prefix_;
    nd::Parameter tok_emb_, seg_emb_, pos_emb_;
    std::vector<Layer> layers_;
};

}  // namespace peasi::model
