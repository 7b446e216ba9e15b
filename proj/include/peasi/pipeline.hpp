#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "peasi/corpus.hpp"
#include "peasi/model.hpp"

namespace peasi::pipeline {

// Ordered (item_id, score) pairs: descending score, ties broken by ascending
// item_id. Deterministic, so re-evaluation reproduces the same order.
struct ScoredItem {
    std::string id;
    double score = 0.0;
};

struct RankedList {
    std::vector<ScoredItem> items;

    static RankedList from_unsorted(std::vector<ScoredItem> items);
};

struct AnswerResult {
    std::string question_id;
    std::string sentence_id;
    std::string sentence_text;
    std::string passage_id;
    std::string mode;
    long predictions = 0;
};

// One ranked answer candidate (a sentence occurrence within a passage).
struct Candidate {
    std::string item_id;  // sent_id + "@" + passage_id
    std::string sent_id;
    std::string text;
    std::string passage_id;
    double score = 0.0;
};

struct PipelineRun {
    AnswerResult answer;
    std::vector<Candidate> ranking;  // descending score, ties by item_id
};

// Per-component prediction counts and wall-clock, accumulated across calls.
struct PredictionMeter {
    long pr = 0;
    long easi = 0;
    long sentence = 0;
    double pr_ms = 0.0;
    double easi_ms = 0.0;
    double sentence_ms = 0.0;
};

// Toy lexical retriever: score = sum of idf over the unique question tokens a
// passage contains, idf = ln(pool size / document frequency). Deterministic;
// ties resolve by ascending passage id.
RankedList retrieve(const std::vector<std::string>& question_tokens,
                    const std::vector<corpus::Passage>& pool, int top_n);

// Point-wise AS2 baseline: scores every sentence of every passage and takes
// the argmax. predictions = total sentence count.
PipelineRun run_as2(const std::string& question_id,
                    const std::vector<std::string>& question_tokens,
                    const std::vector<corpus::Passage>& passages,
                    model::TrainedModel& sentence_model, PredictionMeter* meter = nullptr);

// PR scores every passage, EASI runs once on the top passage.
// predictions = |passages| + 1.
PipelineRun run_peasi_top1(const std::string& question_id,
                           const std::vector<std::string>& question_tokens,
                           const std::vector<corpus::Passage>& passages,
                           model::TrainedModel& pr_model, model::TrainedModel& easi_model,
                           PredictionMeter* meter = nullptr);

// PR ranks passages, EASI extracts one candidate from each of the top_n, and
// the point-wise sentence model reranks those candidates.
// predictions = |passages| + 2 * min(top_n, |passages|).
PipelineRun run_peasi_all_as2(const std::string& question_id,
                              const std::vector<std::string>& question_tokens,
                              const std::vector<corpus::Passage>& passages,
                              model::TrainedModel& pr_model, model::TrainedModel& easi_model,
                              model::TrainedModel& sentence_model, int top_n,
                              PredictionMeter* meter = nullptr);

// ---- cost accounting (Table-4 shape) ----

struct RunLog {
    std::string pipeline_mode;  // pr | as2 | peasi_top1 | peasi_all_as2
    long n_questions = 0;
    std::map<std::string, long> predictions;    // component -> total count
    std::map<std::string, double> measured_ms;  // component -> total wall ms
};

nlohmann::json run_log_to_json(const RunLog& log);
RunLog run_log_from_json(const nlohmann::json& j);

struct CostOptions {
    double as2_ms = 11.7;
    double pr_ms = 10.9;
    double easi_ms = 10.0;
};

struct CostRow {
    std::string mode;
    double predictions = 0.0;      // per question
    double cost_ms = 0.0;          // configured cost per prediction
    double latency_ms = 0.0;       // predictions * cost, exact
    double measured_cost_ms = 0.0; // observed wall clock per prediction
};

struct CostReport {
    std::vector<CostRow> rows;
    // 1 - predictions(peasi:all) / predictions(as2), when both rows exist.
    std::optional<double> reduction;
};

CostReport cost_report(std::span<const RunLog> logs, const CostOptions& costs);

// Latency rounded half-up to integer milliseconds for display.
long display_ms(double ms);
std::string format_cost_table(const CostReport& report);
nlohmann::json cost_report_to_json(const CostReport& report);

// ---- split-level evaluation ----

struct EvalOptions {
    std::string mode = "peasi_top1";  // pr | as2 | peasi_top1 | peasi_all_as2
    int top_n = 5;
    int retrieve_top_n = 0;  // 0 = each question keeps its own passages
    corpus::PassageGroup group = corpus::PassageGroup::all;
    std::uint64_t group_seed = 0;
};

struct EvalResult {
    std::vector<AnswerResult> answers;
    double p_at_1 = 0.0;
    std::optional<double> map;  // absent for modes without a full ranking
    std::optional<double> mrr;
    long n_questions = 0;
    RunLog log;
};

EvalResult evaluate_split(const corpus::DatasetSplit& split, const EvalOptions& opt,
                          model::TrainedModel* pr_model, model::TrainedModel* easi_model,
                          model::TrainedModel* sentence_model);

}  // namespace peasi::pipeline
