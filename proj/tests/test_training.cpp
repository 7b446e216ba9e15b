#include <doctest.h>

#include <cmath>
#include <fstream>

#include "peasi/errors.hpp"
#include "peasi/model.hpp"
#include "peasi/training.hpp"

using namespace peasi;
using corpus::DatasetSplit;
using corpus::Passage;
using corpus::PassageLabel;
using corpus::SentenceLabel;
using train::TrainConfig;

namespace {

// Trivially separable data: positive passages say "yes", negatives say "no".
DatasetSplit separable_split(const std::string& name, int n_questions) {
    DatasetSplit split;
    split.name = name;
    for (int i = 0; i < n_questions; ++i) {
        const std::string qid = name + "-q" + std::to_string(i);
        split.questions.push_back({qid, "Is it time?"});
        for (int p = 0; p < 2; ++p) {
            Passage pas;
            pas.question_id = qid;
            pas.doc_id = qid + "-d0";
            pas.passage_id = qid + ":p" + std::to_string(p);
            const bool positive = p == 0;
            pas.sentences.push_back({qid + ":s" + std::to_string(p),
                                     positive ? "Yes it is time." : "No it is not now.",
                                     positive ? SentenceLabel::positive : SentenceLabel::negative});
            pas.label = positive ? PassageLabel::positive : PassageLabel::negative;
            if (positive) pas.answer_position = 1;
            split.passages.push_back(pas);
            corpus::QaLabel l;
            l.question_id = qid;
            l.doc_id = pas.doc_id;
            l.sent_id = pas.sentences[0].sent_id;
            l.text = pas.sentences[0].text;
            l.label = pas.sentences[0].label;
            split.qa_labels.push_back(l);
        }
    }
    return split;
}

// Multi-sentence positive passages where the answer slot cycles by question.
DatasetSplit easi_split(const std::string& name, int n_questions, int sentences, bool planted) {
    DatasetSplit split;
    split.name = name;
    Rng rng(4242);
    for (int i = 0; i < n_questions; ++i) {
        const std::string qid = name + "-q" + std::to_string(i);
        split.questions.push_back({qid, "Where is the marker now?"});
        Passage pas;
        pas.question_id = qid;
        pas.doc_id = qid + "-d0";
        pas.passage_id = qid + ":p0";
        const int gold = planted ? i % sentences : static_cast<int>(rng.below(static_cast<std::uint64_t>(sentences)));
        for (int s = 0; s < sentences; ++s) {
            const bool is_gold = s == gold;
            // With the plant disabled every sentence reads the same, so the
            // labels carry no learnable signal.
            const char* text = !planted ? "Nothing to see in here."
                               : (is_gold ? "Here is the marker word." : "Nothing to see in here.");
            pas.sentences.push_back({qid + ":s" + std::to_string(s), text,
                                     is_gold ? SentenceLabel::positive : SentenceLabel::negative});
        }
        pas.label = PassageLabel::positive;
        pas.answer_position = gold + 1;
        split.passages.push_back(pas);
    }
    return split;
}

TrainConfig tiny_config(const std::string& mode, int epochs, double lr = 3e-3) {
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.batch_size = 16;
    cfg.seed = 5;
    cfg.k_max = 5;
    cfg.encoder.d_model = 16;
    cfg.encoder.n_heads = 2;
    cfg.encoder.n_layers = 1;
    cfg.encoder.d_ff = 32;
    cfg.encoder.max_seq_len = 64;
    return cfg;
}

bool params_equal(std::vector<nd::Parameter*> a, std::vector<nd::Parameter*> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i]->value == b[i]->value)) return false;
    return true;
}

}  // namespace

TEST_CASE("train_pr fits a linearly separable set to train accuracy 1.0") {
    const auto train_split = separable_split("train", 12);
    const auto dev_split = separable_split("dev", 4);
    auto result = train::train(train_split, dev_split, tiny_config("pr", 25));
    // Oracle is the generator's plant: positives score above negatives.
    long correct = 0;
    for (const auto& p : train_split.passages) {
        const auto enc = model::encode_passage(result.model.vocab, text::tokenize("Is it time?"), p,
                                               64, 5);
        const double score = model::score_passage(result.model, enc);
        const bool predicted = score > 0.5;
        if (predicted == (p.label == PassageLabel::positive)) ++correct;
    }
    CHECK(correct == static_cast<long>(train_split.passages.size()));
    CHECK(result.log.back().dev_p1 == 1.0);
}

TEST_CASE("lr=0 leaves parameters at their initialization") {
    const auto train_split = separable_split("train", 6);
    const auto dev_split = separable_split("dev", 2);
    auto one = train::train(train_split, dev_split, tiny_config("pr", 1, 0.0));
    auto three = train::train(train_split, dev_split, tiny_config("pr", 3, 0.0));
    CHECK(params_equal(one.model.all_params(), three.model.all_params()));

    auto moved = train::train(train_split, dev_split, tiny_config("pr", 3, 1e-3));
    CHECK_FALSE(params_equal(one.model.all_params(), moved.model.all_params()));
}

TEST_CASE("identical seed and data give identical checkpoints") {
    const auto train_split = separable_split("train", 8);
    const auto dev_split = separable_split("dev", 2);
    auto a = train::train(train_split, dev_split, tiny_config("pr", 3));
    auto b = train::train(train_split, dev_split, tiny_config("pr", 3));
    CHECK(params_equal(a.model.all_params(), b.model.all_params()));
    CHECK(a.log.back().dev_p1 == b.log.back().dev_p1);
    CHECK(a.log.back().loss == b.log.back().loss);

    auto other_seed = tiny_config("pr", 3);
    other_seed.seed = 6;
    auto c = train::train(train_split, dev_split, other_seed);
    CHECK_FALSE(params_equal(a.model.all_params(), c.model.all_params()));
}

TEST_CASE("loss decreases over the first epochs of a tiny overfit run") {
    const auto train_split = separable_split("train", 6);  // 12 passages, one batch
    const auto dev_split = separable_split("dev", 2);
    auto result = train::train(train_split, dev_split, tiny_config("pr", 5, 1e-4));
    REQUIRE(result.log.size() == 5);
    for (std::size_t i = 1; i < result.log.size(); ++i) {
        CHECK(std::isfinite(result.log[i].loss));
        CHECK(result.log[i].loss < result.log[i - 1].loss);
    }
}

TEST_CASE("easi on single-sentence passages is trivially perfect") {
    const auto train_split = easi_split("train", 8, 1, true);
    const auto dev_split = easi_split("dev", 4, 1, true);
    auto result = train::train(train_split, dev_split, tiny_config("easi", 1));
    CHECK(result.log.back().dev_p1 == 1.0);
}

TEST_CASE("easi learns a planted slot signal and stays near chance on shuffled labels") {
    SUBCASE("planted signal is learnable") {
        const auto train_split = easi_split("train", 40, 2, true);
        const auto dev_split = easi_split("dev", 10, 2, true);
        auto cfg = tiny_config("easi", 40, 0.005);
        cfg.encoder.d_model = 32;
        cfg.encoder.n_layers = 2;
        cfg.encoder.d_ff = 64;
        auto result = train::train(train_split, dev_split, cfg);
        CHECK(result.log.back().dev_p1 >= 0.95);
    }
    SUBCASE("shuffled labels stay near chance (1/3)") {
        const auto train_split = easi_split("train", 24, 3, false);
        const auto dev_split = easi_split("dev", 9, 3, false);
        auto result = train::train(train_split, dev_split, tiny_config("easi", 6));
        CHECK(result.log.back().dev_p1 <= 0.67);
    }
}

TEST_CASE("train_sentence_baseline follows the same contracts as train_pr") {
    const auto train_split = separable_split("train", 8);
    const auto dev_split = separable_split("dev", 3);
    auto a = train::train(train_split, dev_split, tiny_config("sentence", 3));
    auto b = train::train(train_split, dev_split, tiny_config("sentence", 3));
    CHECK(params_equal(a.model.all_params(), b.model.all_params()));
    CHECK(a.model.mode == "sentence");

    auto zero = train::train(train_split, dev_split, tiny_config("sentence", 1, 0.0));
    auto zero3 = train::train(train_split, dev_split, tiny_config("sentence", 3, 0.0));
    CHECK(params_equal(zero.model.all_params(), zero3.model.all_params()));
}

TEST_CASE("mtl0 with lambda_easi = 0 reduces exactly to train_pr") {
    const auto train_split = separable_split("train", 10);
    const auto dev_split = separable_split("dev", 3);
    auto pr = train::train(train_split, dev_split, tiny_config("pr", 4));
    auto cfg = tiny_config("mtl0", 4);
    cfg.lambda_easi = 0.0;
    auto mtl = train::train(train_split, dev_split, cfg);

    CHECK(mtl.log.back().dev_p1 == pr.log.back().dev_p1);
    CHECK(mtl.log.back().loss == pr.log.back().loss);
    // The shared encoder and PR head took identical update sequences.
    CHECK(params_equal(pr.model.encoder->params(), mtl.model.encoder->params()));
}

TEST_CASE("mtl1 trains two encoders without parameter sharing") {
    const auto train_split = separable_split("train", 8);
    const auto dev_split = separable_split("dev", 3);
    auto result = train::train(train_split, dev_split, tiny_config("mtl1", 2));
    REQUIRE(result.model.easi_encoder != nullptr);
    CHECK_FALSE(params_equal(result.model.encoder->params(),
                             result.model.easi_encoder->params()));
    CHECK(result.model.pr_head.has_value());
    CHECK(result.model.easi_head.has_value());
}

TEST_CASE("mtl1_fuse stage 2 never touches the stage-1 EASI parameters") {
    const auto train_split = separable_split("train", 10);
    const auto dev_split = separable_split("dev", 3);

    auto fuse_cfg = tiny_config("mtl1_fuse", 3);
    fuse_cfg.stage1_pr_epochs = 2;
    fuse_cfg.stage1_easi_epochs = 4;
    auto fuse = train::train(train_split, dev_split, fuse_cfg);

    // The standalone easi run with the same seed consumes the same streams,
    // so stage-1 EASI training is reproduced exactly; any stage-2 mutation
    // would show up as a difference.
    auto easi = train::train(train_split, dev_split, tiny_config("easi", 4));
    REQUIRE(fuse.model.easi_encoder != nullptr);
    CHECK(params_equal(easi.model.encoder->params(), fuse.model.easi_encoder->params()));
    CHECK(easi.model.easi_head->w.value == fuse.model.easi_head->w.value);
    CHECK(fuse.model.fusion_head.has_value());
    // Total epochs logged: stage-1 PR + stage-1 EASI + stage-2.
    CHECK(fuse.log.size() == 2 + 4 + 3);
}

TEST_CASE("a constant EASI embedding reduces fusion to PR plus a fixed feature") {
    const auto train_split = separable_split("train", 8);
    const auto dev_split = separable_split("dev", 3);
    auto fuse_cfg = tiny_config("mtl1_fuse", 2);
    fuse_cfg.stage1_pr_epochs = 2;
    fuse_cfg.stage1_easi_epochs = 2;
    auto fuse = train::train(train_split, dev_split, fuse_cfg);
    auto& m = fuse.model;

    // Zeroing every EASI encoder parameter makes its embedding the zero
    // vector for any input (each block maps a zero row back to zero).
    for (nd::Parameter* p : m.easi_encoder->params()) p->value.zero();
    const auto q = text::tokenize("Is it time?");
    const auto& p0 = train_split.passages[0];
    const auto& p1 = train_split.passages[1];
    const auto e0 = m.easi_enc().embed(model::encode_passage(m.vocab, q, p0, 64, 5).easi_seq);
    const auto e1 = m.easi_enc().embed(model::encode_passage(m.vocab, q, p1, 64, 5).easi_seq);
    CHECK(e0 == e1);
    for (const double x : e0) CHECK(x == 0.0);

    // With the EASI feature constant at zero, scores depend only on the PR
    // half: perturbing the EASI half of the fusion weights changes nothing.
    const auto enc0 = model::encode_passage(m.vocab, q, p0, 64, 5);
    const double before = model::score_passage(m, enc0);
    Rng rng(99);
    for (int r = 0; r < 2; ++r)
        for (int c = m.enc_cfg.d_model; c < 2 * m.enc_cfg.d_model; ++c)
            m.fusion_head->w.value(r, c) += rng.normal(0.0, 1.0);
    CHECK(model::score_passage(m, enc0) == before);
}

TEST_CASE("training rejects bad configurations and empty data") {
    const auto dev_split = separable_split("dev", 2);
    DatasetSplit empty;
    empty.name = "train";
    CHECK_THROWS_AS(train::train(empty, dev_split, tiny_config("pr", 1)), EmptyDataset);
    CHECK_THROWS_AS(train::train(empty, dev_split, tiny_config("bogus", 1)), ModeMismatch);

    // Negative-only passages cannot train the extractor.
    auto negatives = separable_split("train", 4);
    for (auto& p : negatives.passages) {
        p.label = PassageLabel::negative;
        p.answer_position.reset();
    }
    CHECK_THROWS_AS(train::train(negatives, dev_split, tiny_config("easi", 1)),
                    NoPositivePassages);
}

TEST_CASE("models round-trip through their checkpoint directory") {
    const auto train_split = separable_split("train", 6);
    const auto dev_split = separable_split("dev", 2);
    auto result = train::train(train_split, dev_split, tiny_config("mtl1_fuse", 1));
    result.model.config_snapshot = {{"note", "roundtrip"}};

    const auto dir = std::filesystem::temp_directory_path() / "peasi_model_roundtrip";
    std::filesystem::remove_all(dir);
    model::save_model(result.model, dir);
    auto loaded = model::load_model(dir);

    CHECK(loaded.mode == "mtl1_fuse");
    CHECK(loaded.k_max == result.model.k_max);
    CHECK(params_equal(result.model.all_params(), loaded.all_params()));
    CHECK(loaded.config_snapshot.at("note") == "roundtrip");

    // Same scores through the loaded model.
    const auto& p = train_split.passages.front();
    const auto enc = model::encode_passage(result.model.vocab, text::tokenize("Is it time?"), p,
                                           64, 5);
    CHECK(model::score_passage(result.model, enc) == model::score_passage(loaded, enc));
    std::filesystem::remove_all(dir);
}

TEST_CASE("byte-identical checkpoint files for identical runs") {
    const auto train_split = separable_split("train", 5);
    const auto dev_split = separable_split("dev", 2);
    const auto dir_a = std::filesystem::temp_directory_path() / "peasi_ckpt_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "peasi_ckpt_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    for (const auto& dir : {dir_a, dir_b}) {
        auto result = train::train(train_split, dev_split, tiny_config("pr", 2));
        model::save_model(result.model, dir);
    }
    const auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(read(dir_a / "model.json") == read(dir_b / "model.json"));
    CHECK(read(dir_a / "vocab.tsv") == read(dir_b / "vocab.tsv"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}
