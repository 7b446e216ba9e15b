#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peasi/corpus.hpp"
#include "peasi/model.hpp"

namespace peasi::train {

// mode:
//   pr        - binary reranker over (question, passage) pairs
//   sentence  - point-wise binary scorer over (question, sentence) pairs
//   easi      - k-way extractor over positive passages
//   mtl0      - one shared encoder, PR + EASI heads, joint loss
//   mtl1      - separate encoders, both losses in one loop, no sharing
//   mtl1_fuse - stage 1 trains PR and EASI separately; stage 2 freezes the
//               EASI encoder and trains PR encoder + fusion head
struct TrainConfig {
    std::string mode = "pr";
    int batch_size = 16;
    double lr = 1e-3;
    int epochs = 0;  // 0 -> mode default: pr/sentence 30, easi 50, mtl* 50
    std::uint64_t seed = 0;
    int k_max = 5;
    double lambda_pr = 1.0;
    double lambda_easi = 1.0;
    // Stage-1 budgets for mtl1_fuse; 0 -> the pr/easi defaults.
    int stage1_pr_epochs = 0;
    int stage1_easi_epochs = 0;
    model::EncoderConfig encoder;  // vocab_size is filled in from the data

    int effective_epochs() const;
    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double dev_p1 = 0.0;
    double dev_map = 0.0;
    double dev_mrr = 0.0;
};

struct TrainResult {
    model::TrainedModel model;
    std::vector<EpochLog> log;
};

// Trains per cfg.mode on the train split, evaluating against the dev split
// after every epoch. Deterministic: identical config + seed + data produce
// bitwise-identical parameters.
TrainResult train(const corpus::DatasetSplit& train_split, const corpus::DatasetSplit& dev_split,
                  const TrainConfig& cfg);

}  // namespace peasi::train
