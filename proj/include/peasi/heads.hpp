#pragma once

#include <string>
#include <vector>

#include "peasi/rng.hpp"
#include "peasi/tape.hpp"

namespace peasi::model {

// Point-wise binary classifier over a pooled embedding; used both as the
// passage reranker head and as the point-wise sentence scorer.
struct BinaryHead {
    nd::Parameter w;  // d_model x 2
    nd::Parameter b;  // 1 x 2

    BinaryHead() = default;
    BinaryHead(int d_model, Rng& rng, const std::string& prefix);
    nd::Tape::Id logits(nd::Tape& tape, nd::Tape::Id e);
    std::vector<nd::Parameter*> params() { return {&w, &b}; }
};

// K-way in-place extractor: softmax(E W^T) over the sentence slots of a
// passage.
struct EasiHead {
    nd::Parameter w;  // k_max x d_model

    EasiHead() = default;
    EasiHead(int k_max, int d_model, Rng& rng, const std::string& prefix);
    int k_max() const { return w.value.rows(); }
    nd::Tape::Id logits(nd::Tape& tape, nd::Tape::Id e);
    std::vector<nd::Parameter*> params() { return {&w}; }
};

// Fusion classifier over the concatenated PR and EASI embeddings ("2E"):
// softmax(W tanh([E_pr, E_easi]) + B).
struct FusionHead {
    nd::Parameter w;  // 2 x (2 d_model)
    nd::Parameter b;  // 1 x 2

    FusionHead() = default;
    FusionHead(int d_model, Rng& rng, const std::string& prefix);
    nd::Tape::Id logits(nd::Tape& tape, nd::Tape::Id e_pr, nd::Tape::Id e_easi);
    std::vector<nd::Parameter*> params() { return {&w, &b}; }
};

// Probability of the positive class, in (0, 1).
double pr_score(nd::Tape& tape, BinaryHead& head, nd::Tape::Id e);
// Binary cross-entropy: -log of the probability assigned to `label`.
nd::Tape::Id pr_loss(nd::Tape& tape, BinaryHead& head, nd::Tape::Id e, int label);

struct EasiExtraction {
    std::vector<double> probs;  // k_max entries; slots beyond m are exactly 0
    int argmax = 0;             // ties broken toward the smaller index
};

// Masked softmax over the first m slots. m must be in [1, k_max].
EasiExtraction easi_extract(nd::Tape& tape, EasiHead& head, nd::Tape::Id e, int m);
// -log p(slot gold) under the masked softmax; gold must be < m.
nd::Tape::Id easi_loss(nd::Tape& tape, EasiHead& head, nd::Tape::Id e, int m, int gold);

double fusion_score(nd::Tape& tape, FusionHead& head, nd::Tape::Id e_pr, nd::Tape::Id e_easi);
nd::Tape::Id fusion_loss(nd::Tape& tape, FusionHead& head, nd::Tape::Id e_pr, nd::Tape::Id e_easi,
                         int label);

}  // namespace peasi::model
