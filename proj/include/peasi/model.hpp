#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "peasi/corpus.hpp"
#include "peasi/encoder.hpp"
#include "peasi/heads.hpp"
#include "peasi/text.hpp"

namespace peasi::model {

// A trained checkpointable model: one or two encoders plus the heads the
// training mode produced. `encoder` is the primary encoder (the PR encoder
// for joint modes, the EASI encoder for mode "easi"); `easi_encoder` holds
// the separate EASI encoder of the two-transformer modes.
struct TrainedModel {
    std::string mode;  // pr | easi | sentence | mtl0 | mtl1 | mtl1_fuse
    EncoderConfig enc_cfg;
    int k_max = 5;
    text::Vocabulary vocab;
    std::unique_ptr<Encoder> encoder;
    std::unique_ptr<Encoder> easi_encoder;
    std::optional<BinaryHead> pr_head;
    std::optional<EasiHead> easi_head;
    std::optional<FusionHead> fusion_head;
    nlohmann::json config_snapshot;
    nlohmann::json final_metrics;

    Encoder& pr_enc();
    // The encoder feeding the EASI head: the separate one when present.
    Encoder& easi_enc();
    std::vector<nd::Parameter*> all_params();
};

// Writes <dir>/model.json and <dir>/vocab.tsv. The JSON round-trips every
// parameter bit-exactly and is byte-stable for identical parameters.
void save_model(TrainedModel& m, const std::filesystem::path& dir);
TrainedModel load_model(const std::filesystem::path& dir);

// ---- frozen-model scoring (forward-only tapes; reentrant) ----

struct EncodedPassage {
    text::TokenSequence pr_seq;    // [CLS] q [SEP] s1 s2 ...
    text::TokenSequence easi_seq;  // [CLS] q [SEP] s1 [SEP] s2 ...
    int sentence_count = 0;        // min(passage sentences, k_max)
};

EncodedPassage encode_passage(const text::Vocabulary& vocab,
                              const std::vector<std::string>& question_tokens,
                              const corpus::Passage& p, int max_seq_len, int k_max);

// Relevance score of a passage under this model's ranking pathway: the PR
// head for pr/sentence/mtl0/mtl1, the fusion head (which also needs the EASI
// encoding) for mtl1_fuse.
double score_passage(TrainedModel& m, const EncodedPassage& enc);

// Point-wise score of a [CLS] q [SEP] s pair through the binary head.
double score_sentence(TrainedModel& m, const text::TokenSequence& seq);

// In-place extraction over the first `sentence_count` slots.
EasiExtraction extract_answer(TrainedModel& m, const EncodedPassage& enc);

}  // namespace peasi::model
