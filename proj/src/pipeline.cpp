#include "peasi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "peasi/errors.hpp"
#include "peasi/metrics.hpp"
#include "peasi/text.hpp"

namespace peasi::pipeline {

using nlohmann::json;

namespace {

class StopWatch {
public:
    explicit StopWatch(double* sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~StopWatch() {
        if (sink_ == nullptr) return;
        const auto end = std::chrono::steady_clock::now();
        *sink_ += std::chrono::duration<double, std::milli>(end - start_).count();
    }

private:
    double* sink_;
    std::chrono::steady_clock::time_point start_;
};

struct ScoredPassage {
    std::size_t index;
    double score;
};

// (score desc, passage_id asc), the RankedList law.
std::vector<ScoredPassage> rank_passages(const std::vector<corpus::Passage>& passages,
                                         const std::vector<double>& scores) {
    std::vector<ScoredPassage> order;
    order.reserve(passages.size());
    for (std::size_t i = 0; i < passages.size(); ++i) order.push_back({i, scores[i]});
    std::sort(order.begin(), order.end(), [&](const ScoredPassage& a, const ScoredPassage& b) {
        if (a.score != b.score) return a.score > b.score;
        return passages[a.index].passage_id < passages[b.index].passage_id;
    });
    return order;
}

void sort_candidates(std::vector<Candidate>& candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
}

AnswerResult answer_from_top(const std::string& question_id, const std::string& mode,
                             const std::vector<Candidate>& ranking, long predictions) {
    AnswerResult a;
    a.question_id = question_id;
    a.mode = mode;
    a.predictions = predictions;
    a.sentence_id = ranking.front().sent_id;
    a.sentence_text = ranking.front().text;
    a.passage_id = ranking.front().passage_id;
    return a;
}

std::vector<double> score_all_passages(const std::vector<corpus::Passage>& passages,
                                       const std::vector<std::string>& question_tokens,
                                       model::TrainedModel& pr_model, PredictionMeter* meter) {
    std::vector<double> scores;
    scores.reserve(passages.size());
    for (const auto& p : passages) {
        const auto enc = model::encode_passage(pr_model.vocab, question_tokens, p,
                                               pr_model.enc_cfg.max_seq_len, pr_model.k_max);
        StopWatch watch(meter ? &meter->pr_ms : nullptr);
        scores.push_back(model::score_passage(pr_model, enc));
    }
    if (meter) meter->pr += static_cast<long>(passages.size());
    return scores;
}

Candidate extract_candidate(const corpus::Passage& p,
                            const std::vector<std::string>& question_tokens,
                            model::TrainedModel& easi_model, PredictionMeter* meter) {
    const auto enc = model::encode_passage(easi_model.vocab, question_tokens, p,
                                           easi_model.enc_cfg.max_seq_len, easi_model.k_max);
    model::EasiExtraction out;
    {
        StopWatch watch(meter ? &meter->easi_ms : nullptr);
        out = model::extract_answer(easi_model, enc);
    }
    if (meter) meter->easi += 1;
    const auto& sentence = p.sentences[static_cast<std::size_t>(out.argmax)];
    Candidate c;
    c.sent_id = sentence.sent_id;
    c.text = sentence.text;
    c.passage_id = p.passage_id;
    c.item_id = sentence.sent_id + "@" + p.passage_id;
    c.score = out.probs[static_cast<std::size_t>(out.argmax)];
    return c;
}

}  // namespace

RankedList RankedList::from_unsorted(std::vector<ScoredItem> items) {
    std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    RankedList out;
    out.items = std::move(items);
    return out;
}

RankedList retrieve(const std::vector<std::string>& question_tokens,
                    const std::vector<corpus::Passage>& pool, int top_n) {
    if (pool.empty()) throw NoCandidates("retrieve: empty passage pool");

    // Document frequency over the pool, then idf-weighted set overlap.
    std::unordered_map<std::string, long> df;
    std::vector<std::unordered_set<std::string>> passage_tokens;
    passage_tokens.reserve(pool.size());
    for (const auto& p : pool) {
        std::unordered_set<std::string> tokens;
        for (const auto& tok : corpus::passage_flat_tokens(p)) tokens.insert(tok);
        for (const auto& tok : tokens) ++df[tok];
        passage_tokens.push_back(std::move(tokens));
    }
    const std::set<std::string> unique_q(question_tokens.begin(), question_tokens.end());
    const double n = static_cast<double>(pool.size());

    std::vector<ScoredItem> scored;
    scored.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        double score = 0.0;
        for (const auto& tok : unique_q) {
            if (!passage_tokens[i].contains(tok)) continue;
            score += std::log(n / static_cast<double>(df.at(tok)));
        }
        scored.push_back({pool[i].passage_id, score});
    }
    auto ranked = RankedList::from_unsorted(std::move(scored));
    if (top_n > 0 && static_cast<std::size_t>(top_n) < ranked.items.size())
        ranked.items.resize(static_cast<std::size_t>(top_n));
    return ranked;
}

PipelineRun run_as2(const std::string& question_id,
                    const std::vector<std::string>& question_tokens,
                    const std::vector<corpus::Passage>& passages,
                    model::TrainedModel& sentence_model, PredictionMeter* meter) {
    PipelineRun run;
    long predictions = 0;
    for (const auto& p : passages) {
        for (const auto& s : p.sentences) {
            const auto seq =
                text::encode_pair(question_tokens, text::tokenize(s.text), sentence_model.vocab,
                                  static_cast<std::size_t>(sentence_model.enc_cfg.max_seq_len));
            double score = 0.0;
            {
                StopWatch watch(meter ? &meter->sentence_ms : nullptr);
                score = model::score_sentence(sentence_model, seq);
            }
            ++predictions;
            run.ranking.push_back(
                {s.sent_id + "@" + p.passage_id, s.sent_id, s.text, p.passage_id, score});
        }
    }
    if (run.ranking.empty()) throw NoCandidates("as2: no candidate sentences");
    if (meter) meter->sentence += predictions;
    sort_candidates(run.ranking);
    run.answer = answer_from_top(question_id, "as2", run.ranking, predictions);
    return run;
}

PipelineRun run_peasi_top1(const std::string& question_id,
                           const std::vector<std::string>& question_tokens,
                           const std::vector<corpus::Passage>& passages,
                           model::TrainedModel& pr_model, model::TrainedModel& easi_model,
                           PredictionMeter* meter) {
    if (passages.empty()) throw NoCandidates("peasi_top1: no passages");
    const auto scores = score_all_passages(passages, question_tokens, pr_model, meter);
    const auto order = rank_passages(passages, scores);
    const auto& top = passages[order.front().index];
    auto candidate = extract_candidate(top, question_tokens, easi_model, meter);
    const long predictions = static_cast<long>(passages.size()) + 1;
    candidate.score = order.front().score;  // rank by the passage score
    PipelineRun run;
    run.ranking.push_back(std::move(candidate));
    run.answer = answer_from_top(question_id, "peasi_top1", run.ranking, predictions);
    return run;
}

PipelineRun run_peasi_all_as2(const std::string& question_id,
                              const std::vector<std::string>& question_tokens,
                              const std::vector<corpus::Passage>& passages,
                              model::TrainedModel& pr_model, model::TrainedModel& easi_model,
                              model::TrainedModel& sentence_model, int top_n,
                              PredictionMeter* meter) {
    if (passages.empty()) throw NoCandidates("peasi_all_as2: no passages");
    if (top_n <= 0) throw Error("peasi_all_as2: top_n must be positive");
    const auto scores = score_all_passages(passages, question_tokens, pr_model, meter);
    const auto order = rank_passages(passages, scores);
    const std::size_t take = std::min(static_cast<std::size_t>(top_n), passages.size());

    PipelineRun run;
    for (std::size_t i = 0; i < take; ++i) {
        auto candidate =
            extract_candidate(passages[order[i].index], question_tokens, easi_model, meter);
        const auto seq =
            text::encode_pair(question_tokens, text::tokenize(candidate.text),
                              sentence_model.vocab,
                              static_cast<std::size_t>(sentence_model.enc_cfg.max_seq_len));
        {
            StopWatch watch(meter ? &meter->sentence_ms : nullptr);
            candidate.score = model::score_sentence(sentence_model, seq);
        }
        run.ranking.push_back(std::move(candidate));
    }
    if (meter) meter->sentence += static_cast<long>(take);
    sort_candidates(run.ranking);
    const long predictions = static_cast<long>(passages.size()) + 2 * static_cast<long>(take);
    run.answer = answer_from_top(question_id, "peasi_all_as2", run.ranking, predictions);
    return run;
}

json run_log_to_json(const RunLog& log) {
    return json{{"pipeline_mode", log.pipeline_mode},
                {"n_questions", log.n_questions},
                {"predictions", log.predictions},
                {"measured_ms", log.measured_ms}};
}

RunLog run_log_from_json(const json& j) {
    RunLog log;
    log.pipeline_mode = j.at("pipeline_mode").get<std::string>();
    log.n_questions = j.at("n_questions").get<long>();
    for (const auto& [key, value] : j.at("predictions").items())
        log.predictions[key] = value.get<long>();
    if (j.contains("measured_ms"))
        for (const auto& [key, value] : j.at("measured_ms").items())
            log.measured_ms[key] = value.get<double>();
    return log;
}

long display_ms(double ms) {
    return static_cast<long>(std::floor(ms + 0.5));
}

CostReport cost_report(std::span<const RunLog> logs, const CostOptions& costs) {
    CostReport report;
    const std::map<std::string, double> cost_of{
        {"as2", costs.as2_ms}, {"pr", costs.pr_ms}, {"easi", costs.easi_ms}};

    double as2_preds = -1.0, peasi_all_preds = -1.0;
    for (const RunLog& log : logs) {
        if (log.n_questions <= 0) throw Error("run log without questions");
        const double nq = static_cast<double>(log.n_questions);
        const bool is_peasi = log.pipeline_mode == "peasi_top1" ||
                              log.pipeline_mode == "peasi_all_as2" ||
                              log.pipeline_mode == "pr";
        if (!is_peasi && log.pipeline_mode != "as2")
            throw UnknownMode("unknown pipeline mode in run log: " + log.pipeline_mode);
        const std::string prefix =
            log.pipeline_mode == "peasi_top1" ? "peasi" : log.pipeline_mode;

        double total_latency = 0.0, total_preds = 0.0, total_measured = 0.0;
        for (const auto& [component, count] : log.predictions) {
            if (count == 0) continue;
            const auto it = cost_of.find(component);
            if (it == cost_of.end())
                throw UnknownMode("no configured cost for component: " + component);
            CostRow row;
            row.mode = log.pipeline_mode == "as2" ? "as2" : prefix + ":" + component;
            row.predictions = static_cast<double>(count) / nq;
            row.cost_ms = it->second;
            row.latency_ms = row.predictions * row.cost_ms;
            const auto measured = log.measured_ms.find(component);
            if (measured != log.measured_ms.end() && count > 0)
                row.measured_cost_ms = measured->second / static_cast<double>(count);
            total_latency += row.latency_ms;
            total_preds += row.predictions;
            total_measured += measured != log.measured_ms.end() ? measured->second / nq : 0.0;
            report.rows.push_back(row);
        }
        if (log.pipeline_mode == "as2") {
            as2_preds = total_preds;
        } else if (log.predictions.size() > 1) {
            CostRow all;
            all.mode = prefix + ":all";
            all.predictions = total_preds;
            all.latency_ms = total_latency;
            all.cost_ms = total_preds > 0 ? total_latency / total_preds : 0.0;
            all.measured_cost_ms = total_preds > 0 ? total_measured / total_preds : 0.0;
            report.rows.push_back(all);
            if (log.pipeline_mode == "peasi_top1") peasi_all_preds = total_preds;
        }
    }
    if (as2_preds > 0 && peasi_all_preds > 0)
        report.reduction = 1.0 - peasi_all_preds / as2_preds;
    return report;
}

std::string format_cost_table(const CostReport& report) {
    std::ostringstream out;
    out << "Model                 #Predictions   Cost (ms)   Latency (ms)   Measured (ms)\n";
    for (const auto& row : report.rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-20s %13.1f %11.1f %14ld %15.3f\n", row.mode.c_str(),
                      row.predictions, row.cost_ms, display_ms(row.latency_ms),
                      row.measured_cost_ms);
        out << line;
    }
    if (report.reduction.has_value()) {
        char line[96];
        std::snprintf(line, sizeof(line), "Prediction reduction vs as2: %.1f%%\n",
                      100.0 * *report.reduction);
        out << line;
    }
    return out.str();
}

json cost_report_to_json(const CostReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows)
        rows.push_back({{"mode", row.mode},
                        {"predictions", row.predictions},
                        {"cost_ms", row.cost_ms},
                        {"latency_ms", row.latency_ms},
                        {"latency_ms_display", display_ms(row.latency_ms)},
                        {"measured_cost_ms", row.measured_cost_ms}});
    json j{{"rows", rows}};
    if (report.reduction.has_value()) j["reduction"] = *report.reduction;
    return j;
}

EvalResult evaluate_split(const corpus::DatasetSplit& split, const EvalOptions& opt,
                          model::TrainedModel* pr_model, model::TrainedModel* easi_model,
                          model::TrainedModel* sentence_model) {
    const bool needs_pr = opt.mode != "as2";
    const bool needs_easi = opt.mode == "peasi_top1" || opt.mode == "peasi_all_as2";
    const bool needs_sentence = opt.mode == "as2" || opt.mode == "peasi_all_as2";
    if (opt.mode != "pr" && opt.mode != "as2" && opt.mode != "peasi_top1" &&
        opt.mode != "peasi_all_as2")
        throw UnknownMode("unknown eval mode: " + opt.mode);
    if (needs_pr && pr_model == nullptr) throw MissingCheckpoint("eval needs a pr model");
    if (needs_easi && easi_model == nullptr) throw MissingCheckpoint("eval needs an easi model");
    if (needs_sentence && sentence_model == nullptr)
        throw MissingCheckpoint("eval needs a sentence model");

    const auto passages = select_passage_group(split.passages, opt.group, opt.group_seed);

    std::unordered_map<std::string, std::vector<corpus::Passage>> by_question;
    for (const auto& p : passages) by_question[p.question_id].push_back(p);

    // Relevance of a sentence for a question comes from the annotation rows.
    std::unordered_map<std::string, std::unordered_set<std::string>> positive_sentences;
    for (const auto& l : split.qa_labels)
        if (l.label == corpus::SentenceLabel::positive)
            positive_sentences[l.question_id].insert(l.sent_id);

    EvalResult result;
    result.log.pipeline_mode = opt.mode;
    PredictionMeter meter;
    std::vector<metrics::JudgedRanking> rankings;

    for (const auto& q : split.questions) {
        const auto it = by_question.find(q.question_id);
        if (it == by_question.end() || it->second.empty()) continue;
        const auto question_tokens = text::tokenize(q.text);

        std::vector<corpus::Passage> candidates = it->second;
        if (opt.retrieve_top_n > 0) {
            const auto retrieved = retrieve(question_tokens, passages, opt.retrieve_top_n);
            std::unordered_map<std::string, const corpus::Passage*> by_id;
            for (const auto& p : passages) by_id[p.passage_id] = &p;
            candidates.clear();
            for (const auto& item : retrieved.items) candidates.push_back(*by_id.at(item.id));
        }
        ++result.n_questions;

        const auto* relevant = [&]() -> const std::unordered_set<std::string>* {
            const auto rit = positive_sentences.find(q.question_id);
            return rit == positive_sentences.end() ? nullptr : &rit->second;
        }();
        const auto sentence_relevant = [&](const std::string& sent_id) -> std::uint8_t {
            return relevant != nullptr && relevant->contains(sent_id) ? 1 : 0;
        };

        if (opt.mode == "pr") {
            // Passage-level ranking (Table-2 style evaluation).
            const auto scores = score_all_passages(candidates, question_tokens, *pr_model, &meter);
            const auto order = rank_passages(candidates, scores);
            metrics::JudgedRanking r;
            for (const auto& sp : order) {
                const auto& p = candidates[sp.index];
                r.ids.push_back(p.passage_id);
                r.relevant.push_back(p.label == corpus::PassageLabel::positive ? 1 : 0);
            }
            rankings.push_back(std::move(r));
            continue;
        }

        PipelineRun run;
        if (opt.mode == "as2") {
            run = run_as2(q.question_id, question_tokens, candidates, *sentence_model, &meter);
        } else if (opt.mode == "peasi_top1") {
            run = run_peasi_top1(q.question_id, question_tokens, candidates, *pr_model,
                                 *easi_model, &meter);
        } else {
            run = run_peasi_all_as2(q.question_id, question_tokens, candidates, *pr_model,
                                    *easi_model, *sentence_model, opt.top_n, &meter);
        }
        metrics::JudgedRanking r;
        for (const auto& c : run.ranking) {
            r.ids.push_back(c.item_id);
            r.relevant.push_back(sentence_relevant(c.sent_id));
        }
        rankings.push_back(std::move(r));
        result.answers.push_back(std::move(run.answer));
    }

    if (!rankings.empty()) {
        result.p_at_1 = metrics::p_at_1(rankings);
        // A top-1 run carries no ranking beyond its single answer; Table 3
        // leaves MAP/MRR blank there and so do we.
        if (opt.mode != "peasi_top1") {
            result.map = metrics::mean_average_precision(rankings);
            result.mrr = metrics::mean_reciprocal_rank(rankings);
        }
    }

    result.log.n_questions = result.n_questions;
    if (meter.pr > 0) {
        result.log.predictions["pr"] = meter.pr;
        result.log.measured_ms["pr"] = meter.pr_ms;
    }
    if (meter.easi > 0) {
        result.log.predictions["easi"] = meter.easi;
        result.log.measured_ms["easi"] = meter.easi_ms;
    }
    if (meter.sentence > 0) {
        result.log.predictions["as2"] = meter.sentence;
        result.log.measured_ms["as2"] = meter.sentence_ms;
    }
    return result;
}

}  // namespace peasi::pipeline
