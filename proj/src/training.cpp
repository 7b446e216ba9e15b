#include "peasi/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "peasi/errors.hpp"
#include "peasi/metrics.hpp"
#include "peasi/rng.hpp"

namespace peasi::train {

namespace {

// Fixed stream roles make every random draw a function of (seed, role), so
// e.g. the stage-1 EASI training inside mtl1_fuse consumes exactly the same
// stream as a standalone easi run with the same seed.
enum StreamRole : std::uint64_t {
    kInitPr = 1,
    kInitEasi = 2,
    kInitFusion = 3,
    kShufflePr = 4,
    kShuffleEasi = 5,
    kShuffleFusion = 6,
};

Rng stream(std::uint64_t seed, StreamRole role) {
    Rng r(seed);
    return r.fork(role);
}

struct PrExample {
    text::TokenSequence seq;
    int label = 0;
};

struct EasiExample {
    text::TokenSequence seq;
    int m = 0;
    int gold = 0;
};

struct FusionExample {
    text::TokenSequence pr_seq;
    text::TokenSequence easi_seq;
    int label = 0;
};

struct DevPassage {
    std::string id;
    model::EncodedPassage enc;
    std::uint8_t relevant = 0;
};

struct DevSentence {
    std::string id;
    text::TokenSequence seq;
    std::uint8_t relevant = 0;
};

struct DevMetrics {
    double p1 = 0, map = 0, mrr = 0;
};

struct Prepared {
    text::Vocabulary vocab;
    std::vector<PrExample> pr;
    std::vector<EasiExample> easi;
    std::vector<PrExample> sentence;
    std::vector<FusionExample> fusion;  // one per passage, for mtl1_fuse stage 2
    std::vector<std::vector<DevPassage>> dev_questions;
    std::vector<EasiExample> dev_easi;
    std::vector<std::vector<DevSentence>> dev_sentences;
};

std::unordered_map<std::string, std::vector<std::string>> question_tokens(
    const corpus::DatasetSplit& split) {
    std::unordered_map<std::string, std::vector<std::string>> out;
    for (const auto& q : split.questions) out.emplace(q.question_id, text::tokenize(q.text));
    return out;
}

text::Vocabulary build_vocabulary(const corpus::DatasetSplit& train_split) {
    std::unordered_map<std::string, long> counts;
    const auto count = [&](const std::string& s) {
        for (auto& tok : text::tokenize(s)) ++counts[tok];
    };
    for (const auto& q : train_split.questions) count(q.text);
    for (const auto& p : train_split.passages)
        for (const auto& s : p.sentences) count(s.text);
    for (const auto& l : train_split.qa_labels) count(l.text);
    return text::Vocabulary::build_from_counts(counts);
}

Prepared prepare(const corpus::DatasetSplit& train_split, const corpus::DatasetSplit& dev_split,
                 const TrainConfig& cfg) {
    Prepared prep;
    prep.vocab = build_vocabulary(train_split);
    const int max_len = cfg.encoder.max_seq_len;

    const auto train_q = question_tokens(train_split);
    for (const auto& p : train_split.passages) {
        const auto qit = train_q.find(p.question_id);
        if (qit == train_q.end()) throw Error("passage references unknown question " + p.question_id);
        auto enc = model::encode_passage(prep.vocab, qit->second, p, max_len, cfg.k_max);
        const int label = p.label == corpus::PassageLabel::positive ? 1 : 0;
        if (label == 1 && p.answer_position.has_value() &&
            *p.answer_position <= enc.sentence_count)
            prep.easi.push_back({enc.easi_seq, enc.sentence_count, *p.answer_position - 1});
        prep.fusion.push_back({enc.pr_seq, enc.easi_seq, label});
        prep.pr.push_back({std::move(enc.pr_seq), label});
    }
    for (const auto& l : train_split.qa_labels) {
        if (l.label == corpus::SentenceLabel::unlabeled) continue;
        const auto qit = train_q.find(l.question_id);
        if (qit == train_q.end()) continue;
        const auto seq = text::encode_pair(qit->second, text::tokenize(l.text), prep.vocab,
                                           static_cast<std::size_t>(max_len));
        prep.sentence.push_back({seq, l.label == corpus::SentenceLabel::positive ? 1 : 0});
    }

    const auto dev_q = question_tokens(dev_split);
    std::unordered_map<std::string, std::vector<DevPassage>> dev_by_question;
    for (const auto& p : dev_split.passages) {
        const auto qit = dev_q.find(p.question_id);
        if (qit == dev_q.end()) continue;
        auto enc = model::encode_passage(prep.vocab, qit->second, p, max_len, cfg.k_max);
        const bool positive = p.label == corpus::PassageLabel::positive;
        if (positive && p.answer_position.has_value() && *p.answer_position <= enc.sentence_count)
            prep.dev_easi.push_back({enc.easi_seq, enc.sentence_count, *p.answer_position - 1});
        dev_by_question[p.question_id].push_back(
            {p.passage_id, std::move(enc), positive ? std::uint8_t{1} : std::uint8_t{0}});
    }
    for (const auto& q : dev_split.questions) {
        auto it = dev_by_question.find(q.question_id);
        if (it != dev_by_question.end()) prep.dev_questions.push_back(std::move(it->second));
    }
    std::unordered_map<std::string, std::vector<DevSentence>> dev_sent_by_question;
    for (const auto& l : dev_split.qa_labels) {
        if (l.label == corpus::SentenceLabel::unlabeled) continue;
        const auto qit = dev_q.find(l.question_id);
        if (qit == dev_q.end()) continue;
        dev_sent_by_question[l.question_id].push_back(
            {l.sent_id,
             text::encode_pair(qit->second, text::tokenize(l.text), prep.vocab,
                               static_cast<std::size_t>(max_len)),
             l.label == corpus::SentenceLabel::positive ? std::uint8_t{1} : std::uint8_t{0}});
    }
    for (const auto& q : dev_split.questions) {
        auto it = dev_sent_by_question.find(q.question_id);
        if (it != dev_sent_by_question.end()) prep.dev_sentences.push_back(std::move(it->second));
    }
    return prep;
}

// Sorts candidate indices by (score desc, id asc) and reads off relevance.
template <class Candidate>
metrics::JudgedRanking rank_judged(const std::vector<Candidate>& candidates,
                                   const std::vector<double>& scores) {
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidates[a].id < candidates[b].id;
    });
    metrics::JudgedRanking r;
    for (const auto i : order) {
        r.ids.push_back(candidates[i].id);
        r.relevant.push_back(candidates[i].relevant);
    }
    return r;
}

DevMetrics from_rankings(const std::vector<metrics::JudgedRanking>& rankings) {
    if (rankings.empty()) return {};
    DevMetrics m;
    m.p1 = metrics::p_at_1(rankings);
    m.map = metrics::mean_average_precision(rankings);
    m.mrr = metrics::mean_reciprocal_rank(rankings);
    return m;
}

DevMetrics eval_passage_ranking(model::TrainedModel& m,
                                const std::vector<std::vector<DevPassage>>& dev_questions) {
    std::vector<metrics::JudgedRanking> rankings;
    for (const auto& passages : dev_questions) {
        if (passages.empty()) continue;
        std::vector<double> scores;
        scores.reserve(passages.size());
        for (const auto& p : passages) scores.push_back(model::score_passage(m, p.enc));
        rankings.push_back(rank_judged(passages, scores));
    }
    return from_rankings(rankings);
}

DevMetrics eval_easi_accuracy(model::TrainedModel& m, const std::vector<EasiExample>& dev) {
    std::vector<metrics::JudgedRanking> rankings;
    for (const auto& ex : dev) {
        model::EncodedPassage enc;
        enc.easi_seq = ex.seq;
        enc.sentence_count = ex.m;
        const auto out = model::extract_answer(m, enc);
        std::vector<std::size_t> order(static_cast<std::size_t>(ex.m));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (out.probs[a] != out.probs[b]) return out.probs[a] > out.probs[b];
            return a < b;
        });
        metrics::JudgedRanking r;
        for (const auto slot : order) {
            r.ids.push_back(std::to_string(slot));
            r.relevant.push_back(slot == static_cast<std::size_t>(ex.gold) ? 1 : 0);
        }
        rankings.push_back(std::move(r));
    }
    return from_rankings(rankings);
}

DevMetrics eval_sentence_ranking(model::TrainedModel& m,
                                 const std::vector<std::vector<DevSentence>>& dev_questions) {
    std::vector<metrics::JudgedRanking> rankings;
    for (const auto& sentences : dev_questions) {
        if (sentences.empty()) continue;
        std::vector<double> scores;
        scores.reserve(sentences.size());
        for (const auto& s : sentences) scores.push_back(model::score_sentence(m, s.seq));
        rankings.push_back(rank_judged(sentences, scores));
    }
    return from_rankings(rankings);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(n, i + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(end));
    }
    return batches;
}

// One optimization pass over a single example set. `loss_of` must build the
// example's loss on the given tape.
template <class LossOf>
double run_epoch(const std::vector<std::vector<std::size_t>>& batches, double weight,
                 const LossOf& loss_of, std::span<nd::Parameter* const> params,
                 const nd::AdamOptions& adam) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : batches) {
        for (const auto idx : batch) {
            nd::Tape tape;
            const auto loss = loss_of(tape, idx);
            total += tape.scalar_value(loss);
            ++count;
            tape.backward(loss, weight / static_cast<double>(batch.size()));
        }
        nd::adam_step(params, adam);
    }
    return count == 0 ? 0.0 : weight * total / static_cast<double>(count);
}

void append_log(std::vector<EpochLog>& log, double loss, const DevMetrics& dev) {
    EpochLog e;
    e.epoch = static_cast<int>(log.size()) + 1;
    e.loss = loss;
    e.dev_p1 = dev.p1;
    e.dev_map = dev.map;
    e.dev_mrr = dev.mrr;
    log.push_back(e);
}

void train_binary(model::TrainedModel& m, const std::vector<PrExample>& examples, int epochs,
                  const TrainConfig& cfg, Rng& shuffle_rng, const Prepared& prep,
                  bool sentence_mode, std::vector<EpochLog>& log) {
    if (examples.empty()) throw EmptyDataset("no training pairs for mode " + cfg.mode);
    std::vector<nd::Parameter*> params = m.pr_enc().params();
    const auto head_params = m.pr_head->params();
    params.insert(params.end(), head_params.begin(), head_params.end());
    const nd::AdamOptions adam{.lr = cfg.lr};
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto batches = make_batches(examples.size(), cfg.batch_size, shuffle_rng);
        const double loss = run_epoch(
            batches, 1.0,
            [&](nd::Tape& tape, std::size_t idx) {
                const auto& ex = examples[idx];
                return model::pr_loss(tape, *m.pr_head, m.pr_enc().encode(tape, ex.seq), ex.label);
            },
            params, adam);
        const auto dev = sentence_mode ? eval_sentence_ranking(m, prep.dev_sentences)
                                       : eval_passage_ranking(m, prep.dev_questions);
        append_log(log, loss, dev);
    }
}

void train_easi_epochs(model::TrainedModel& m, const std::vector<EasiExample>& examples,
                       int epochs, const TrainConfig& cfg, Rng& shuffle_rng, const Prepared& prep,
                       std::vector<EpochLog>& log) {
    if (examples.empty())
        throw NoPositivePassages("easi training needs positive passages with answer positions");
    std::vector<nd::Parameter*> params = m.easi_enc().params();
    const auto head_params = m.easi_head->params();
    params.insert(params.end(), head_params.begin(), head_params.end());
    const nd::AdamOptions adam{.lr = cfg.lr};
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto batches = make_batches(examples.size(), cfg.batch_size, shuffle_rng);
        const double loss = run_epoch(
            batches, 1.0,
            [&](nd::Tape& tape, std::size_t idx) {
                const auto& ex = examples[idx];
                return model::easi_loss(tape, *m.easi_head, m.easi_enc().encode(tape, ex.seq),
                                        ex.m, ex.gold);
            },
            params, adam);
        append_log(log, loss, eval_easi_accuracy(m, prep.dev_easi));
    }
}

// Joint loop for mtl0 (shared encoder) and mtl1 (two encoders): each step
// takes one PR batch and one EASI batch, weighted by lambda_pr / lambda_easi.
void train_joint(model::TrainedModel& m, const Prepared& prep, const TrainConfig& cfg,
                 int epochs, Rng& pr_rng, Rng& easi_rng, std::vector<EpochLog>& log) {
    if (prep.pr.empty()) throw EmptyDataset("no question-passage pairs");
    if (prep.easi.empty() && cfg.lambda_easi != 0.0)
        throw NoPositivePassages("joint training needs positive passages");

    std::vector<nd::Parameter*> params = m.pr_enc().params();
    if (m.easi_encoder) {
        const auto e = m.easi_encoder->params();
        params.insert(params.end(), e.begin(), e.end());
    }
    for (auto* p : m.pr_head->params()) params.push_back(p);
    for (auto* p : m.easi_head->params()) params.push_back(p);
    const nd::AdamOptions adam{.lr = cfg.lr};

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto pr_batches = make_batches(prep.pr.size(), cfg.batch_size, pr_rng);
        const auto easi_batches = cfg.lambda_easi == 0.0
                                      ? std::vector<std::vector<std::size_t>>{}
                                      : make_batches(prep.easi.size(), cfg.batch_size, easi_rng);
        const std::size_t steps = std::max(pr_batches.size(), easi_batches.size());
        double pr_total = 0.0, easi_total = 0.0;
        std::size_t pr_count = 0, easi_count = 0;
        for (std::size_t s = 0; s < steps; ++s) {
            if (cfg.lambda_pr != 0.0 && !pr_batches.empty()) {
                const auto& batch = pr_batches[s % pr_batches.size()];
                for (const auto idx : batch) {
                    nd::Tape tape;
                    const auto& ex = prep.pr[idx];
                    const auto loss =
                        model::pr_loss(tape, *m.pr_head, m.pr_enc().encode(tape, ex.seq), ex.label);
                    pr_total += tape.scalar_value(loss);
                    ++pr_count;
                    tape.backward(loss, cfg.lambda_pr / static_cast<double>(batch.size()));
                }
            }
            if (cfg.lambda_easi != 0.0 && !easi_batches.empty()) {
                const auto& batch = easi_batches[s % easi_batches.size()];
                for (const auto idx : batch) {
                    nd::Tape tape;
                    const auto& ex = prep.easi[idx];
                    const auto loss = model::easi_loss(
                        tape, *m.easi_head, m.easi_enc().encode(tape, ex.seq), ex.m, ex.gold);
                    easi_total += tape.scalar_value(loss);
                    ++easi_count;
                    tape.backward(loss, cfg.lambda_easi / static_cast<double>(batch.size()));
                }
            }
            nd::adam_step(params, adam);
        }
        const double loss =
            (pr_count ? cfg.lambda_pr * pr_total / static_cast<double>(pr_count) : 0.0) +
            (easi_count ? cfg.lambda_easi * easi_total / static_cast<double>(easi_count) : 0.0);
        append_log(log, loss, eval_passage_ranking(m, prep.dev_questions));
    }
}

// Stage 2 of mtl1_fuse: the EASI encoder is frozen; its embedding is computed
// once per passage and fed to the fusion head as a constant.
void train_fusion_stage(model::TrainedModel& m, const Prepared& prep, const TrainConfig& cfg,
                        int epochs, Rng& shuffle_rng, std::vector<EpochLog>& log) {
    if (prep.fusion.empty()) throw EmptyDataset("no question-passage pairs");

    std::vector<nd::Tensor> easi_cache;
    easi_cache.reserve(prep.fusion.size());
    for (const auto& ex : prep.fusion)
        easi_cache.push_back(nd::Tensor::row_vector(m.easi_enc().embed(ex.easi_seq)));

    // Dev passages keep their EASI embeddings fixed too.
    std::vector<std::vector<nd::Tensor>> dev_cache;
    for (const auto& passages : prep.dev_questions) {
        std::vector<nd::Tensor> row;
        row.reserve(passages.size());
        for (const auto& p : passages)
            row.push_back(nd::Tensor::row_vector(m.easi_enc().embed(p.enc.easi_seq)));
        dev_cache.push_back(std::move(row));
    }

    std::vector<nd::Parameter*> params = m.pr_enc().params();
    for (auto* p : m.fusion_head->params()) params.push_back(p);
    const nd::AdamOptions adam{.lr = cfg.lr};

    const auto dev_eval = [&] {
        std::vector<metrics::JudgedRanking> rankings;
        for (std::size_t qi = 0; qi < prep.dev_questions.size(); ++qi) {
            const auto& passages = prep.dev_questions[qi];
            if (passages.empty()) continue;
            std::vector<double> scores;
            for (std::size_t pi = 0; pi < passages.size(); ++pi) {
                nd::Tape tape(false);
                const auto e_pr = m.pr_enc().encode(tape, passages[pi].enc.pr_seq);
                const auto e_easi = tape.input(dev_cache[qi][pi]);
                scores.push_back(model::fusion_score(tape, *m.fusion_head, e_pr, e_easi));
            }
            rankings.push_back(rank_judged(passages, scores));
        }
        return from_rankings(rankings);
    };

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto batches = make_batches(prep.fusion.size(), cfg.batch_size, shuffle_rng);
        const double loss = run_epoch(
            batches, 1.0,
            [&](nd::Tape& tape, std::size_t idx) {
                const auto& ex = prep.fusion[idx];
                const auto e_pr = m.pr_enc().encode(tape, ex.pr_seq);
                const auto e_easi = tape.input(easi_cache[idx]);
                return model::fusion_loss(tape, *m.fusion_head, e_pr, e_easi, ex.label);
            },
            params, adam);
        append_log(log, loss, dev_eval());
    }
}

}  // namespace

int TrainConfig::effective_epochs() const {
    if (epochs > 0) return epochs;
    if (mode == "pr" || mode == "sentence") return 30;
    if (mode == "easi") return 50;
    return 50;  // mtl modes
}

void TrainConfig::validate() const {
    static const std::vector<std::string> kModes{"pr", "easi", "sentence",
                                                 "mtl0", "mtl1", "mtl1_fuse"};
    if (std::find(kModes.begin(), kModes.end(), mode) == kModes.end())
        throw ModeMismatch("unknown training mode: " + mode);
    if (batch_size <= 0 || lr < 0.0 || k_max <= 0 || epochs < 0)
        throw Error("train config: batch_size/k_max must be positive, lr/epochs non-negative");
}

TrainResult train(const corpus::DatasetSplit& train_split, const corpus::DatasetSplit& dev_split,
                  const TrainConfig& cfg) {
    cfg.validate();
    Prepared prep = prepare(train_split, dev_split, cfg);

    model::EncoderConfig enc_cfg = cfg.encoder;
    enc_cfg.vocab_size = static_cast<int>(prep.vocab.size());

    TrainResult result;
    model::TrainedModel& m = result.model;
    m.mode = cfg.mode;
    m.enc_cfg = enc_cfg;
    m.k_max = cfg.k_max;
    m.vocab = prep.vocab;

    const int epochs = cfg.effective_epochs();

    if (cfg.mode == "pr" || cfg.mode == "sentence") {
        Rng init = stream(cfg.seed, kInitPr);
        m.encoder = std::make_unique<model::Encoder>(enc_cfg, init, "enc");
        m.pr_head.emplace(enc_cfg.d_model, init, "head/pr");
        Rng shuffle = stream(cfg.seed, kShufflePr);
        const auto& examples = cfg.mode == "pr" ? prep.pr : prep.sentence;
        train_binary(m, examples, epochs, cfg, shuffle, prep, cfg.mode == "sentence", result.log);
    } else if (cfg.mode == "easi") {
        Rng init = stream(cfg.seed, kInitEasi);
        m.encoder = std::make_unique<model::Encoder>(enc_cfg, init, "enc");
        m.easi_head.emplace(cfg.k_max, enc_cfg.d_model, init, "head/easi");
        Rng shuffle = stream(cfg.seed, kShuffleEasi);
        train_easi_epochs(m, prep.easi, epochs, cfg, shuffle, prep, result.log);
    } else if (cfg.mode == "mtl0" || cfg.mode == "mtl1") {
        Rng init_pr = stream(cfg.seed, kInitPr);
        m.encoder = std::make_unique<model::Encoder>(enc_cfg, init_pr, "enc");
        m.pr_head.emplace(enc_cfg.d_model, init_pr, "head/pr");
        Rng init_easi = stream(cfg.seed, kInitEasi);
        if (cfg.mode == "mtl1")
            m.easi_encoder = std::make_unique<model::Encoder>(enc_cfg, init_easi, "easi_enc");
        m.easi_head.emplace(cfg.k_max, enc_cfg.d_model, init_easi, "head/easi");
        Rng pr_rng = stream(cfg.seed, kShufflePr);
        Rng easi_rng = stream(cfg.seed, kShuffleEasi);
        train_joint(m, prep, cfg, epochs, pr_rng, easi_rng, result.log);
    } else {  // mtl1_fuse
        Rng init_pr = stream(cfg.seed, kInitPr);
        m.encoder = std::make_unique<model::Encoder>(enc_cfg, init_pr, "enc");
        m.pr_head.emplace(enc_cfg.d_model, init_pr, "head/pr");
        Rng init_easi = stream(cfg.seed, kInitEasi);
        m.easi_encoder = std::make_unique<model::Encoder>(enc_cfg, init_easi, "easi_enc");
        m.easi_head.emplace(cfg.k_max, enc_cfg.d_model, init_easi, "head/easi");
        Rng init_fusion = stream(cfg.seed, kInitFusion);
        m.fusion_head.emplace(enc_cfg.d_model, init_fusion, "head/fusion");

        // Stage 1: the components train separately, exactly as in their
        // standalone modes. Dev logging follows the stage's own pathway.
        const int pr_epochs = cfg.stage1_pr_epochs > 0 ? cfg.stage1_pr_epochs : 30;
        const int easi_epochs = cfg.stage1_easi_epochs > 0 ? cfg.stage1_easi_epochs : 50;
        Rng pr_shuffle = stream(cfg.seed, kShufflePr);
        m.mode = "pr";
        train_binary(m, prep.pr, pr_epochs, cfg, pr_shuffle, prep, false, result.log);
        Rng easi_shuffle = stream(cfg.seed, kShuffleEasi);
        train_easi_epochs(m, prep.easi, easi_epochs, cfg, easi_shuffle, prep, result.log);
        m.mode = "mtl1_fuse";

        // Stage 2: freeze EASI, train PR encoder + fusion head.
        Rng fusion_shuffle = stream(cfg.seed, kShuffleFusion);
        train_fusion_stage(m, prep, cfg, epochs, fusion_shuffle, result.log);
    }

    if (!result.log.empty()) {
        const auto& last = result.log.back();
        m.final_metrics = {{"train_loss", last.loss},
                           {"dev_p1", last.dev_p1},
                           {"dev_map", last.dev_map},
                           {"dev_mrr", last.dev_mrr},
                           {"epochs", static_cast<int>(result.log.size())}};
    }
    return result;
}

}  // namespace peasi::train
