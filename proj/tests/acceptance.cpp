// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Run via ctest or directly; exits non-zero if any asserted criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gradcheck.hpp"
#include "peasi/config.hpp"
#include "peasi/corpus.hpp"
#include "peasi/encoder.hpp"
#include "peasi/errors.hpp"
#include "peasi/heads.hpp"
#include "peasi/metrics.hpp"
#include "peasi/model.hpp"
#include "peasi/pipeline.hpp"
#include "peasi/synthetic.hpp"
#include "peasi/training.hpp"

using namespace peasi;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int index, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%d] %-28s %s%s%s\n", index, name.c_str(), pass ? "PASS" : "FAIL",
                detail.empty() ? "" : "  ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------- criterion 1

text::TokenSequence fixed_sequence(int length, int vocab_size, Rng& rng) {
    text::TokenSequence seq;
    seq.ids.push_back(text::Vocabulary::kCls);
    for (int i = 1; i < length; ++i)
        seq.ids.push_back(4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - 4))));
    seq.segments.assign(seq.ids.size(), 1);
    seq.segments[0] = 0;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) seq.positions.push_back(static_cast<int>(i));
    return seq;
}

void criterion_gradient_suite() {
    const auto start = Clock::now();
    Rng rng(404);
    model::EncoderConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 2;
    cfg.d_ff = 32;
    cfg.max_seq_len = 32;
    cfg.vocab_size = 24;

    model::Encoder encoder(cfg, rng, "enc");
    model::Encoder frozen_easi(cfg, rng, "easi_enc");
    model::BinaryHead pr_head(cfg.d_model, rng, "head/pr");
    model::EasiHead easi_head(5, cfg.d_model, rng, "head/easi");
    model::FusionHead fusion_head(cfg.d_model, rng, "head/fusion");

    // Checks run at trained-model weight magnitudes; near the tiny init the
    // layer-norm curvature dominates finite-difference truncation error.
    // Layer-norm gains/biases stay at their init (trained models keep them
    // near 1), otherwise the scaled activations saturate the attention
    // softmax and gradients vanish.
    const auto scale_params = [](std::vector<nd::Parameter*> params) {
        for (nd::Parameter* p : params) {
            if (p->name.find("ln") != std::string::npos) continue;
            for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] *= 20.0;
        }
    };
    scale_params(encoder.params());
    scale_params(frozen_easi.params());

    const auto seq = fixed_sequence(12, cfg.vocab_size, rng);
    const auto easi_seq = fixed_sequence(14, cfg.vocab_size, rng);
    const nd::Tensor frozen_embedding = nd::Tensor::row_vector(frozen_easi.embed(easi_seq));

    double worst = 0.0;
    const auto check = [&](const std::string&, const std::function<nd::Tape::Id(nd::Tape&)>& build,
                           std::vector<nd::Parameter*> params) {
        nd::Tape tape;
        tape.backward(build(tape));
        const auto loss = [&] {
            nd::Tape t;
            return t.scalar_value(build(t));
        };
        worst = std::max(worst, testing::max_fd_rel_error(params, loss, rng, 20, 1e-6, 1e-5));
        for (nd::Parameter* p : params) p->zero_grad();
    };

    auto pr_params = encoder.params();
    for (auto* p : pr_head.params()) pr_params.push_back(p);
    check("pr_loss", [&](nd::Tape& t) { return model::pr_loss(t, pr_head, encoder.encode(t, seq), 1); },
          pr_params);

    auto easi_params = encoder.params();
    for (auto* p : easi_head.params()) easi_params.push_back(p);
    check("easi_loss",
          [&](nd::Tape& t) { return model::easi_loss(t, easi_head, encoder.encode(t, easi_seq), 4, 2); },
          easi_params);

    auto fusion_params = encoder.params();
    for (auto* p : fusion_head.params()) fusion_params.push_back(p);
    check("fusion_loss",
          [&](nd::Tape& t) {
              const auto e_pr = encoder.encode(t, seq);
              const auto e_easi = t.input(frozen_embedding);
              return model::fusion_loss(t, fusion_head, e_pr, e_easi, 0);
          },
          fusion_params);

    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "(max rel err %.2e over all head losses, %.1fs)", worst,
                  elapsed);
    report(1, "gradient suite", worst <= 1e-4 && elapsed < 60.0, detail);
}

// ---------------------------------------------------------------- criterion 2

void criterion_metric_oracle() {
    Rng rng(505);
    std::vector<metrics::JudgedRanking> rankings;
    for (int i = 0; i < 200; ++i) {
        metrics::JudgedRanking r;
        const int n = rng.uniform_int(1, 15);
        for (int j = 0; j < n; ++j) r.relevant.push_back(rng.uniform() < 0.35 ? 1 : 0);
        rankings.push_back(std::move(r));
    }
    // Brute-force recount, straight from the definitions.
    double p1 = 0, map = 0, mrr = 0;
    for (const auto& r : rankings) {
        if (r.relevant[0]) p1 += 1.0;
        int total_rel = 0;
        for (const auto l : r.relevant) total_rel += l;
        if (total_rel > 0) {
            int seen = 0;
            double ap = 0;
            bool first_found = false;
            for (std::size_t k = 0; k < r.relevant.size(); ++k) {
                if (!r.relevant[k]) continue;
                ++seen;
                ap += static_cast<double>(seen) / static_cast<double>(k + 1);
                if (!first_found) {
                    mrr += 1.0 / static_cast<double>(k + 1);
                    first_found = true;
                }
            }
            map += ap / total_rel;
        }
    }
    const double n = static_cast<double>(rankings.size());
    const bool match = std::abs(metrics::p_at_1(rankings) - p1 / n) <= 1e-12 &&
                       std::abs(metrics::mean_average_precision(rankings) - map / n) <= 1e-12 &&
                       std::abs(metrics::mean_reciprocal_rank(rankings) - mrr / n) <= 1e-12;

    metrics::JudgedRanking ap_case;
    ap_case.relevant = {1, 0, 1};
    metrics::JudgedRanking mrr_case;
    mrr_case.relevant = {0, 1};
    // 5/6 is not representable; one ulp covers the summation-order gap.
    const bool hand =
        std::abs(metrics::mean_average_precision(std::vector{ap_case}) - 5.0 / 6.0) <= 1e-15 &&
        metrics::mean_reciprocal_rank(std::vector{mrr_case}) == 0.5;
    report(2, "metric oracle", match && hand,
           "(200 random rankings vs recount; AP([1,0,1])=5/6, MRR@2=0.5)");
}

// ---------------------------------------------------------------- criterion 3

void criterion_windowing() {
    Rng rng(606);
    long budget_violations = 0, label_violations = 0, position_misses = 0;
    corpus::WindowingOptions opt;
    for (int doc = 0; doc < 1000; ++doc) {
        const int n = rng.uniform_int(1, 18);
        std::vector<corpus::SentenceInfo> sentences;
        std::unordered_set<std::string> doc_ids;
        std::unordered_map<std::string, corpus::SentenceLabel> labels;
        for (int i = 0; i < n; ++i) {
            corpus::SentenceInfo info{"d:s" + std::to_string(i), "text", rng.uniform_int(1, 40)};
            doc_ids.insert(info.sent_id);
            const double dice = rng.uniform();
            labels[info.sent_id] = dice < 0.25   ? corpus::SentenceLabel::positive
                                   : dice < 0.65 ? corpus::SentenceLabel::negative
                                                 : corpus::SentenceLabel::unlabeled;
            sentences.push_back(std::move(info));
        }
        const int target = rng.uniform_int(0, n - 1);
        auto windows = corpus::windows_for_sentence(sentences, target, opt, "q", "d");
        std::set<int> positions;
        for (const auto& w : windows) {
            if (w.token_count > opt.max_tokens) ++budget_violations;
            for (std::size_t k = 0; k < w.sentences.size(); ++k)
                if (w.sentences[k].sent_id == sentences[static_cast<std::size_t>(target)].sent_id)
                    positions.insert(static_cast<int>(k) + 1);
        }
        // Sentences are <= 40 tokens, so any 5-sentence run fits the budget:
        // an interior target (>= 4 sentences from the start) must reach all
        // five positions.
        if (target >= 4 && positions != std::set<int>{1, 2, 3, 4, 5}) ++position_misses;

        corpus::propagate_labels("q", labels, doc_ids, windows);
        for (const auto& w : windows) {
            bool has_positive = false;
            for (const auto& s : w.sentences)
                has_positive = has_positive || s.label == corpus::SentenceLabel::positive;
            if ((w.label == corpus::PassageLabel::positive) != has_positive) ++label_violations;
            if (w.label == corpus::PassageLabel::positive) {
                const auto& at = w.sentences[static_cast<std::size_t>(*w.answer_position - 1)];
                if (at.label != corpus::SentenceLabel::positive) ++label_violations;
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "(1000 docs: %ld budget, %ld label, %ld position violations)", budget_violations,
                  label_violations, position_misses);
    report(3, "windowing + propagation", budget_violations == 0 && label_violations == 0 &&
                                             position_misses == 0,
           detail);
}

// ---------------------------------------------------------------- criterion 4

corpus::Passage grid_passage(const std::string& id, int n_sentences) {
    corpus::Passage p;
    p.question_id = "q0";
    p.doc_id = "d0";
    p.passage_id = id;
    for (int s = 0; s < n_sentences; ++s)
        p.sentences.push_back({id + ":s" + std::to_string(s),
                               "Filler sentence number " + std::to_string(s) + " here.",
                               corpus::SentenceLabel::unlabeled});
    return p;
}

void criterion_prediction_arithmetic() {
    std::vector<corpus::Passage> passages;
    for (int i = 0; i < 43; ++i) {
        std::string id = std::to_string(i);
        while (id.size() < 2) id = "0" + id;
        passages.push_back(grid_passage("p" + id, 5));
    }
    std::vector<std::vector<std::string>> tokens;
    for (const auto& p : passages)
        for (const auto& s : p.sentences) tokens.push_back(text::tokenize(s.text));
    tokens.push_back({"what", "now", "?"});

    model::TrainedModel m;
    m.mode = "pr";
    m.k_max = 5;
    m.vocab = text::Vocabulary::build(tokens);
    m.enc_cfg = {.d_model = 16, .n_heads = 2, .n_layers = 1, .d_ff = 32, .max_seq_len = 96,
                 .vocab_size = static_cast<int>(m.vocab.size())};
    Rng rng(7);
    m.encoder = std::make_unique<model::Encoder>(m.enc_cfg, rng, "enc");
    m.pr_head.emplace(m.enc_cfg.d_model, rng, "head/pr");
    m.easi_head.emplace(m.k_max, m.enc_cfg.d_model, rng, "head/easi");

    const auto q = text::tokenize("what now?");
    const auto as2 = pipeline::run_as2("q0", q, passages, m);
    const auto top1 = pipeline::run_peasi_top1("q0", q, passages, m, m);

    pipeline::RunLog as2_log{"as2", 1, {{"as2", as2.answer.predictions}}, {}};
    pipeline::RunLog peasi_log{"peasi_top1", 1, {{"pr", 43}, {"easi", 1}}, {}};
    const auto rep = pipeline::cost_report(std::vector{as2_log, peasi_log}, {});
    double pr_latency = 0, easi_latency = 0, as2_latency = 0;
    for (const auto& row : rep.rows) {
        if (row.mode == "peasi:pr") pr_latency = row.latency_ms;
        if (row.mode == "peasi:easi") easi_latency = row.latency_ms;
        if (row.mode == "as2") as2_latency = row.latency_ms;
    }
    const double reduction = rep.reduction.value_or(0.0);
    const bool pass = as2.answer.predictions == 215 && top1.answer.predictions == 44 &&
                      pipeline::display_ms(pr_latency) == 469 &&
                      pipeline::display_ms(easi_latency) == 10 &&
                      std::abs(as2_latency - 2515.5) < 1e-9 &&
                      std::abs(reduction - (1.0 - 44.0 / 215.0)) < 1e-12 &&
                      std::floor(reduction * 1000.0 + 0.5) == 795.0;
    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "(as2=215 preds -> 2515.5ms exact; pr 43x10.9 -> 469ms; easi 1x10.0 -> 10ms; "
                  "reduction %.1f%%, published prose says 81.4%%)",
                  100.0 * reduction);
    report(4, "prediction-count arithmetic", pass, detail);
}

// ------------------------------------------------------- criteria 5, 6 and 7

struct PipelineArtifacts {
    std::filesystem::path root;
    std::filesystem::path corpus_dir;
    cli::RunConfig cfg;
    corpus::DatasetSplit train_split;
    corpus::DatasetSplit dev_split;
};

cli::RunConfig acceptance_config() {
    nlohmann::json j{
        {"seed", 11},
        {"data",
         {{"n_questions", 500}, {"sentence_len", 5}, {"question_len", 4}}},
        {"encoder", {{"max_seq_len", 96}}},
        {"train", {{"lr", 0.001}}},
    };
    return cli::parse_config(j);
}

PipelineArtifacts build_pipeline_corpus() {
    PipelineArtifacts art;
    art.root = std::filesystem::temp_directory_path() / "peasi_acceptance";
    std::filesystem::remove_all(art.root);
    std::filesystem::create_directories(art.root);
    art.cfg = acceptance_config();
    cli::cmd_gen_synthetic(art.cfg, art.root / "raw");
    art.corpus_dir = art.root / "corpus";
    cli::cmd_build_corpus(art.cfg, art.root / "raw", art.corpus_dir);
    art.train_split = corpus::load_split(art.corpus_dir, "train", true);
    art.dev_split = corpus::load_split(art.corpus_dir, "dev", true);
    return art;
}

train::TrainConfig train_config(const cli::RunConfig& cfg, const std::string& mode, int epochs,
                                std::uint64_t seed) {
    train::TrainConfig tc = cfg.train;
    tc.mode = mode;
    tc.epochs = epochs;
    tc.seed = seed;
    tc.encoder = cfg.encoder;
    tc.k_max = cfg.data.window.k_max;
    return tc;
}

void criteria_learning_and_determinism(const PipelineArtifacts& art) {
    // --- criterion 5: EASI accuracy and end-to-end peasi_top1 P@1 ---
    const auto easi_start = Clock::now();
    auto easi = train::train(art.train_split, art.dev_split,
                             train_config(art.cfg, "easi", 15, art.cfg.seed));
    const double easi_seconds = seconds_since(easi_start);
    const double easi_acc = easi.log.back().dev_p1;

    const auto pr_start = Clock::now();
    auto pr = train::train(art.train_split, art.dev_split,
                           train_config(art.cfg, "pr", 10, art.cfg.seed));
    pipeline::EvalOptions opt;
    opt.mode = "peasi_top1";
    const auto eval1 = pipeline::evaluate_split(art.dev_split, opt, &pr.model, &easi.model, nullptr);
    const double pipe_seconds = seconds_since(pr_start);

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "(easi dev acc %.3f >= 0.95 in %.0fs; peasi_top1 dev P@1 %.3f >= 0.90 in %.0fs)",
                  easi_acc, easi_seconds, eval1.p_at_1, pipe_seconds);
    report(5, "learning capability", easi_acc >= 0.95 && eval1.p_at_1 >= 0.90 &&
                                         easi_seconds < 600.0 && pipe_seconds < 600.0,
           detail);

    // Informational: the other two pipeline settings over the same dev split.
    auto sentence = train::train(art.train_split, art.dev_split,
                                 train_config(art.cfg, "sentence", 10, art.cfg.seed));
    pipeline::EvalOptions as2_opt;
    as2_opt.mode = "as2";
    const auto eval_as2 =
        pipeline::evaluate_split(art.dev_split, as2_opt, nullptr, nullptr, &sentence.model);
    pipeline::EvalOptions all_opt;
    all_opt.mode = "peasi_all_as2";
    const auto eval_all = pipeline::evaluate_split(art.dev_split, all_opt, &pr.model, &easi.model,
                                                   &sentence.model);
    std::printf("    dev P@1 by pipeline: as2 %.3f | peasi_all_as2 %.3f | peasi_top1 %.3f "
                "(predictions/question: %.0f | %.0f | %.0f)\n",
                eval_as2.p_at_1, eval_all.p_at_1, eval1.p_at_1,
                static_cast<double>(eval_as2.log.predictions.at("as2")) / eval_as2.n_questions,
                static_cast<double>(eval_all.log.predictions.at("pr") +
                                    eval_all.log.predictions.at("easi") +
                                    eval_all.log.predictions.at("as2")) /
                    eval_all.n_questions,
                static_cast<double>(eval1.log.predictions.at("pr") +
                                    eval1.log.predictions.at("easi")) /
                    eval1.n_questions);

    // --- criterion 7: byte-identical artifacts on rerun ---
    auto eval_cfg = art.cfg;
    eval_cfg.eval.pr_model = (art.root / "model_pr").string();
    eval_cfg.eval.easi_model = (art.root / "model_easi").string();
    eval_cfg.pipeline.mode = "peasi_top1";
    model::save_model(pr.model, art.root / "model_pr");
    model::save_model(easi.model, art.root / "model_easi");
    cli::cmd_eval(eval_cfg, art.corpus_dir, art.root / "eval_a");
    cli::cmd_eval(eval_cfg, art.corpus_dir, art.root / "eval_b");
    const bool metrics_identical =
        slurp(art.root / "eval_a" / "metrics.json") == slurp(art.root / "eval_b" / "metrics.json");

    cli::cmd_gen_synthetic(art.cfg, art.root / "raw_again");
    bool gen_identical = true;
    for (const auto* split : {"train", "dev", "test"})
        for (const auto* file : {"documents.jsonl", "questions.jsonl", "qa_labels.jsonl"})
            gen_identical = gen_identical &&
                            slurp(art.root / "raw" / split / file) ==
                                slurp(art.root / "raw_again" / split / file);

    report(7, "determinism", metrics_identical && gen_identical,
           "(eval rerun metrics.json and gen-synthetic rerun byte-identical)");
}

void criterion_ablation(const PipelineArtifacts& art) {
    // Reduced budgets: the ordering is recorded, not asserted.
    const std::vector<std::uint64_t> seeds{11, 22, 33};
    std::vector<double> pr_p1(seeds.size()), fuse_p1(seeds.size());

    std::vector<std::function<void()>> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        jobs.push_back([&, i] {
            auto r = train::train(art.train_split, art.dev_split,
                                  train_config(art.cfg, "pr", 5, seeds[i]));
            pr_p1[i] = r.log.back().dev_p1;
        });
        jobs.push_back([&, i] {
            auto tc = train_config(art.cfg, "mtl1_fuse", 5, seeds[i]);
            tc.stage1_pr_epochs = 5;
            tc.stage1_easi_epochs = 10;
            auto r = train::train(art.train_split, art.dev_split, tc);
            fuse_p1[i] = r.log.back().dev_p1;
        });
    }
    // Two workers; each job owns its models, so they are independent.
    std::size_t next = 0;
    std::mutex mu;
    const auto worker = [&] {
        for (;;) {
            std::size_t job;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= jobs.size()) return;
                job = next++;
            }
            jobs[job]();
        }
    };
    std::thread a(worker), b(worker);
    a.join();
    b.join();

    double pr_mean = 0, fuse_mean = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        pr_mean += pr_p1[i] / static_cast<double>(seeds.size());
        fuse_mean += fuse_p1[i] / static_cast<double>(seeds.size());
    }
    const bool ordering_holds = pr_mean <= fuse_mean + 0.02;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "(recorded, not asserted: mean dev P@1 baseline-pr %.3f vs mtl1_fuse %.3f; "
                  "pr <= fuse + 0.02 band %s; per-seed pr %.3f/%.3f/%.3f fuse %.3f/%.3f/%.3f)",
                  pr_mean, fuse_mean, ordering_holds ? "holds" : "does not hold", pr_p1[0],
                  pr_p1[1], pr_p1[2], fuse_p1[0], fuse_p1[1], fuse_p1[2]);
    report(6, "ablation direction", true, detail);
}

// ---------------------------------------------------------------- criterion 8

void criterion_contract_invariants() {
    Rng rng(808);

    // Padding invariance.
    model::EncoderConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 2;
    cfg.d_ff = 32;
    cfg.max_seq_len = 48;
    cfg.vocab_size = 30;
    model::Encoder enc(cfg, rng, "enc");
    bool padding_ok = true;
    for (int iter = 0; iter < 25; ++iter) {
        auto seq = fixed_sequence(rng.uniform_int(2, 20), cfg.vocab_size, rng);
        auto padded = seq;
        const int pads = rng.uniform_int(1, 12);
        for (int i = 0; i < pads; ++i) {
            padded.ids.push_back(text::Vocabulary::kPad);
            padded.segments.push_back(1);
            padded.positions.push_back(static_cast<int>(padded.positions.size()));
        }
        padding_ok = padding_ok && enc.embed(seq) == enc.embed(padded);
    }

    // Masked softmax support sums to 1 within 1e-9.
    bool softmax_ok = true;
    for (int iter = 0; iter < 10000; ++iter) {
        const int n = rng.uniform_int(1, 10);
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(n), 0);
        int kept = 0;
        for (auto& k : keep)
            if (rng.uniform() < 0.5) {
                k = 1;
                ++kept;
            }
        if (kept == 0) keep[rng.below(keep.size())] = 1;
        nd::Tensor logits(1, n);
        for (int j = 0; j < n; ++j) logits[static_cast<std::size_t>(j)] = rng.normal(0, 4);
        nd::Tape tape(false);
        const auto out = tape.softmax_rows(tape.input(logits), &keep);
        double sum = 0;
        for (int j = 0; j < n; ++j) {
            sum += tape.value(out)(0, j);
            if (!keep[static_cast<std::size_t>(j)] && tape.value(out)(0, j) != 0.0)
                softmax_ok = false;
        }
        softmax_ok = softmax_ok && std::abs(sum - 1.0) <= 1e-9;
    }

    // RankedList ordering and easi argmax tie-break laws.
    bool ranking_ok = true;
    for (int iter = 0; iter < 10000; ++iter) {
        std::vector<pipeline::ScoredItem> items;
        const int n = rng.uniform_int(1, 10);
        for (int i = 0; i < n; ++i)
            items.push_back({"i" + std::to_string(rng.uniform_int(0, 5)),
                             static_cast<double>(rng.uniform_int(0, 3))});
        const auto ranked = pipeline::RankedList::from_unsorted(items);
        for (std::size_t i = 1; i < ranked.items.size(); ++i) {
            const auto& p = ranked.items[i - 1];
            const auto& c = ranked.items[i];
            if (!(p.score > c.score || (p.score == c.score && p.id <= c.id))) ranking_ok = false;
        }
    }
    Rng head_rng(809);
    model::EasiHead head(5, 1, head_rng, "head/easi");
    bool tie_ok = true;
    for (int iter = 0; iter < 10000; ++iter) {
        const int m = head_rng.uniform_int(1, 5);
        for (int i = 0; i < 5; ++i)
            head.w.value(i, 0) = static_cast<double>(head_rng.uniform_int(0, 2));
        nd::Tape tape(false);
        const auto out = model::easi_extract(
            tape, head, tape.input(nd::Tensor::row_vector({1.0})), m);
        for (int i = 0; i < out.argmax; ++i)
            if (out.probs[static_cast<std::size_t>(i)] >=
                out.probs[static_cast<std::size_t>(out.argmax)])
                tie_ok = false;  // an earlier slot with equal probability must win
    }

    report(8, "contract invariants", padding_ok && softmax_ok && ranking_ok && tie_ok,
           "(padding invariance bitwise; 1e4 masked-softmax sums within 1e-9; 1e4 ordering and "
           "tie-break cases)");
}

}  // namespace

int main() {
    std::printf("PEASI acceptance suite\n");
    const auto start = Clock::now();
    criterion_gradient_suite();
    criterion_metric_oracle();
    criterion_windowing();
    criterion_prediction_arithmetic();
    const auto artifacts = build_pipeline_corpus();
    criteria_learning_and_determinism(artifacts);
    criterion_ablation(artifacts);
    criterion_contract_invariants();
    std::printf("total: %.0fs, %s\n", seconds_since(start),
                g_failures == 0 ? "all criteria passed" : "FAILURES present");
    return g_failures == 0 ? 0 : 1;
}
