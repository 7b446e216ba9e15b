#include "peasi/config.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "peasi/errors.hpp"

namespace peasi::cli {

using nlohmann::json;

namespace {

// Rejects keys outside the allowlist, reporting the full path.
void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path, "must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
}

template <class T>
void read_field(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key, "invalid value");
    }
}

void parse_data(const json& j, RunConfig& cfg) {
    check_keys(j, "data",
               {"dir", "n_questions", "positive_rate", "docs_per_question", "sentences_per_doc",
                "question_len", "sentence_len", "marker_pool", "hard_negative_rate",
                "dev_fraction", "test_fraction", "max_tokens", "max_windows", "k_max", "group"});
    auto& d = cfg.data;
    read_field(j, "data", "dir", d.dir);
    read_field(j, "data", "n_questions", d.generator.n_questions);
    read_field(j, "data", "positive_rate", d.generator.positive_rate);
    read_field(j, "data", "docs_per_question", d.generator.docs_per_question);
    read_field(j, "data", "sentences_per_doc", d.generator.sentences_per_doc);
    read_field(j, "data", "question_len", d.generator.question_len);
    read_field(j, "data", "sentence_len", d.generator.sentence_len);
    read_field(j, "data", "marker_pool", d.generator.marker_pool);
    read_field(j, "data", "hard_negative_rate", d.generator.hard_negative_rate);
    read_field(j, "data", "dev_fraction", d.generator.dev_fraction);
    read_field(j, "data", "test_fraction", d.generator.test_fraction);
    read_field(j, "data", "max_tokens", d.window.max_tokens);
    read_field(j, "data", "max_windows", d.window.max_windows);
    read_field(j, "data", "k_max", d.window.k_max);
    read_field(j, "data", "group", d.group);
    try {
        d.generator.validate();
        (void)corpus::passage_group_from_string(d.group);
    } catch (const Error& e) {
        throw ConfigError("data", e.what());
    }
    if (d.window.max_tokens <= 0 || d.window.max_windows <= 0 || d.window.k_max <= 0)
        throw ConfigError("data", "max_tokens/max_windows/k_max must be positive");
}

void parse_encoder(const json& j, RunConfig& cfg) {
    check_keys(j, "encoder",
               {"d_model", "n_heads", "n_layers", "d_ff", "max_seq_len", "dropout"});
    auto& e = cfg.encoder;
    read_field(j, "encoder", "d_model", e.d_model);
    read_field(j, "encoder", "n_heads", e.n_heads);
    read_field(j, "encoder", "n_layers", e.n_layers);
    read_field(j, "encoder", "d_ff", e.d_ff);
    read_field(j, "encoder", "max_seq_len", e.max_seq_len);
    read_field(j, "encoder", "dropout", e.dropout);
    if (e.d_model <= 0 || e.n_heads <= 0 || e.d_model % e.n_heads != 0)
        throw ConfigError("encoder.d_model", "must be positive and divisible by n_heads");
    if (e.dropout != 0.0) throw ConfigError("encoder.dropout", "only 0 is supported");
}

void parse_train(const json& j, RunConfig& cfg) {
    check_keys(j, "train",
               {"mode", "batch_size", "lr", "epochs", "lambda_pr", "lambda_easi",
                "stage1_pr_epochs", "stage1_easi_epochs"});
    auto& t = cfg.train;
    read_field(j, "train", "mode", t.mode);
    read_field(j, "train", "batch_size", t.batch_size);
    read_field(j, "train", "lr", t.lr);
    read_field(j, "train", "epochs", t.epochs);
    read_field(j, "train", "lambda_pr", t.lambda_pr);
    read_field(j, "train", "lambda_easi", t.lambda_easi);
    read_field(j, "train", "stage1_pr_epochs", t.stage1_pr_epochs);
    read_field(j, "train", "stage1_easi_epochs", t.stage1_easi_epochs);
    try {
        t.validate();
    } catch (const Error& e) {
        throw ConfigError("train", e.what());
    }
}

void parse_pipeline(const json& j, RunConfig& cfg) {
    check_keys(j, "pipeline", {"mode", "top_n", "retrieve_top_n", "costs"});
    auto& p = cfg.pipeline;
    read_field(j, "pipeline", "mode", p.mode);
    read_field(j, "pipeline", "top_n", p.top_n);
    read_field(j, "pipeline", "retrieve_top_n", p.retrieve_top_n);
    if (j.contains("costs")) {
        check_keys(j.at("costs"), "pipeline.costs", {"as2", "pr", "easi"});
        read_field(j.at("costs"), "pipeline.costs", "as2", p.costs.as2_ms);
        read_field(j.at("costs"), "pipeline.costs", "pr", p.costs.pr_ms);
        read_field(j.at("costs"), "pipeline.costs", "easi", p.costs.easi_ms);
    }
    if (p.mode != "pr" && p.mode != "as2" && p.mode != "peasi_top1" && p.mode != "peasi_all_as2")
        throw ConfigError("pipeline.mode", "unknown mode: " + p.mode);
    if (p.top_n <= 0) throw ConfigError("pipeline.top_n", "must be positive");
}

void parse_eval(const json& j, RunConfig& cfg) {
    check_keys(j, "eval", {"split", "group", "pr_model", "easi_model", "sentence_model"});
    auto& e = cfg.eval;
    read_field(j, "eval", "split", e.split);
    read_field(j, "eval", "group", e.group);
    read_field(j, "eval", "pr_model", e.pr_model);
    read_field(j, "eval", "easi_model", e.easi_model);
    read_field(j, "eval", "sentence_model", e.sentence_model);
    if (e.split != "train" && e.split != "dev" && e.split != "test")
        throw ConfigError("eval.split", "must be train, dev or test");
    try {
        (void)corpus::passage_group_from_string(e.group);
    } catch (const Error& err) {
        throw ConfigError("eval.group", err.what());
    }
}

void write_json_file(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out << j.dump(2) << '\n';
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const RunConfig& cfg) {
    write_json_file(dir / "manifest.json", json{{"format_version", kFormatVersion},
                                                {"command", command},
                                                {"config", config_snapshot(cfg)}});
}

model::TrainedModel* load_model_if(const std::string& path,
                                   std::optional<model::TrainedModel>& slot) {
    if (path.empty()) return nullptr;
    slot = model::load_model(path);
    return &*slot;
}

}  // namespace

RunConfig parse_config(const json& j) {
    check_keys(j, "", {"seed", "data", "encoder", "train", "pipeline", "eval"});
    if (!j.contains("seed")) throw ConfigError("seed", "required");
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
        throw ConfigError("seed", "must be an integer");
    RunConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.train.seed = cfg.seed;
    if (j.contains("data")) parse_data(j.at("data"), cfg);
    if (j.contains("encoder")) parse_encoder(j.at("encoder"), cfg);
    if (j.contains("train")) parse_train(j.at("train"), cfg);
    if (j.contains("pipeline")) parse_pipeline(j.at("pipeline"), cfg);
    if (j.contains("eval")) parse_eval(j.at("eval"), cfg);
    cfg.train.k_max = cfg.data.window.k_max;
    cfg.train.encoder = cfg.encoder;
    return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string(), "cannot open config file");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(file.string(), std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

json config_snapshot(const RunConfig& cfg) {
    const auto& g = cfg.data.generator;
    return json{
        {"seed", cfg.seed},
        {"data",
         {{"dir", cfg.data.dir},
          {"n_questions", g.n_questions},
          {"positive_rate", g.positive_rate},
          {"docs_per_question", g.docs_per_question},
          {"sentences_per_doc", g.sentences_per_doc},
          {"question_len", g.question_len},
          {"sentence_len", g.sentence_len},
          {"marker_pool", g.marker_pool},
          {"hard_negative_rate", g.hard_negative_rate},
          {"dev_fraction", g.dev_fraction},
          {"test_fraction", g.test_fraction},
          {"max_tokens", cfg.data.window.max_tokens},
          {"max_windows", cfg.data.window.max_windows},
          {"k_max", cfg.data.window.k_max},
          {"group", cfg.data.group}}},
        {"encoder",
         {{"d_model", cfg.encoder.d_model},
          {"n_heads", cfg.encoder.n_heads},
          {"n_layers", cfg.encoder.n_layers},
          {"d_ff", cfg.encoder.d_ff},
          {"max_seq_len", cfg.encoder.max_seq_len},
          {"dropout", cfg.encoder.dropout}}},
        {"train",
         {{"mode", cfg.train.mode},
          {"batch_size", cfg.train.batch_size},
          {"lr", cfg.train.lr},
          {"epochs", cfg.train.epochs},
          {"lambda_pr", cfg.train.lambda_pr},
          {"lambda_easi", cfg.train.lambda_easi},
          {"stage1_pr_epochs", cfg.train.stage1_pr_epochs},
          {"stage1_easi_epochs", cfg.train.stage1_easi_epochs}}},
        {"pipeline",
         {{"mode", cfg.pipeline.mode},
          {"top_n", cfg.pipeline.top_n},
          {"retrieve_top_n", cfg.pipeline.retrieve_top_n},
          {"costs",
           {{"as2", cfg.pipeline.costs.as2_ms},
            {"pr", cfg.pipeline.costs.pr_ms},
            {"easi", cfg.pipeline.costs.easi_ms}}}}},
        {"eval",
         {{"split", cfg.eval.split},
          {"group", cfg.eval.group},
          {"pr_model", cfg.eval.pr_model},
          {"easi_model", cfg.eval.easi_model},
          {"sentence_model", cfg.eval.sentence_model}}}};
}

void cmd_gen_synthetic(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    const auto splits = synth::generate(cfg.data.generator, cfg.seed);
    std::filesystem::create_directories(out_dir);
    for (const auto& split : splits) {
        const auto dir = out_dir / split.name;
        std::filesystem::create_directories(dir);
        corpus::write_documents(dir / "documents.jsonl", split.documents);
        corpus::write_questions(dir / "questions.jsonl", split.questions);
        corpus::write_qa_labels(dir / "qa_labels.jsonl", split.qa_labels);
    }
    write_manifest(out_dir, "gen-synthetic", cfg);
}

void cmd_build_corpus(const RunConfig& cfg, const std::filesystem::path& in_dir,
                      const std::filesystem::path& out_dir) {
    corpus::BuildCorpusOptions opt;
    opt.window = cfg.data.window;
    opt.group = corpus::passage_group_from_string(cfg.data.group);
    opt.seed = cfg.seed;

    json stats = json::object();
    std::filesystem::create_directories(out_dir);
    for (const std::string name : {"train", "dev", "test"}) {
        if (!std::filesystem::exists(in_dir / name / "documents.jsonl")) continue;
        auto split = corpus::load_split(in_dir, name, false);
        split = corpus::build_split_passages(std::move(split), opt);
        const auto dir = out_dir / name;
        std::filesystem::create_directories(dir);
        corpus::write_documents(dir / "documents.jsonl", split.documents);
        corpus::write_questions(dir / "questions.jsonl", split.questions);
        corpus::write_qa_labels(dir / "qa_labels.jsonl", split.qa_labels);
        corpus::write_passages(dir / "passages.jsonl", split.passages);
        const auto s = corpus::split_stats(split);
        stats[name] = {{"questions", s.questions}, {"documents", s.documents},
                       {"qp_pairs", s.qp_pairs},   {"qp_pos", s.qp_pos},
                       {"qp_neg", s.qp_neg},       {"qa_pairs", s.qa_pairs},
                       {"qa_pos", s.qa_pos},       {"qa_neg", s.qa_neg}};
        std::cout << name << ": questions=" << s.questions << " qp=" << s.qp_pairs << " (+"
                  << s.qp_pos << "/-" << s.qp_neg << ") qa=" << s.qa_pairs << " (+" << s.qa_pos
                  << "/-" << s.qa_neg << ")\n";
    }
    write_json_file(out_dir / "stats.json",
                    json{{"format_version", kFormatVersion},
                         {"config", config_snapshot(cfg)},
                         {"splits", stats}});
    write_manifest(out_dir, "build-corpus", cfg);
}

void cmd_train(const RunConfig& cfg, const std::filesystem::path& corpus_dir,
               const std::filesystem::path& out_dir) {
    const auto train_split = corpus::load_split(corpus_dir, "train", true);
    const auto dev_split = corpus::load_split(corpus_dir, "dev", true);

    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.encoder = cfg.encoder;
    tc.k_max = cfg.data.window.k_max;
    auto result = train::train(train_split, dev_split, tc);

    result.model.config_snapshot = config_snapshot(cfg);
    std::filesystem::create_directories(out_dir);
    model::save_model(result.model, out_dir);

    std::ofstream log(out_dir / "train_log.jsonl");
    if (!log) throw Error("cannot write train log");
    for (const auto& e : result.log)
        log << json{{"epoch", e.epoch},
                    {"loss", e.loss},
                    {"dev_p1", e.dev_p1},
                    {"dev_map", e.dev_map},
                    {"dev_mrr", e.dev_mrr}}
                   .dump()
            << '\n';
    std::cout << "trained mode=" << cfg.train.mode << " epochs=" << result.log.size()
              << " final dev_p1=" << (result.log.empty() ? 0.0 : result.log.back().dev_p1) << "\n";
}

void cmd_eval(const RunConfig& cfg, const std::filesystem::path& corpus_dir,
              const std::filesystem::path& out_dir) {
    const auto split = corpus::load_split(corpus_dir, cfg.eval.split, true);

    std::optional<model::TrainedModel> pr_slot, easi_slot, sentence_slot;
    model::TrainedModel* pr = load_model_if(cfg.eval.pr_model, pr_slot);
    model::TrainedModel* easi = load_model_if(cfg.eval.easi_model, easi_slot);
    model::TrainedModel* sentence = load_model_if(cfg.eval.sentence_model, sentence_slot);
    // One joint checkpoint may serve both roles.
    if (easi == nullptr && pr != nullptr && pr->easi_head.has_value()) easi = pr;

    pipeline::EvalOptions opt;
    opt.mode = cfg.pipeline.mode;
    opt.top_n = cfg.pipeline.top_n;
    opt.retrieve_top_n = cfg.pipeline.retrieve_top_n;
    opt.group = corpus::passage_group_from_string(cfg.eval.group);
    opt.group_seed = cfg.seed;

    const auto result = pipeline::evaluate_split(split, opt, pr, easi, sentence);

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream answers(out_dir / "answers.jsonl");
        if (!answers) throw Error("cannot write answers.jsonl");
        for (const auto& a : result.answers)
            answers << json{{"question_id", a.question_id},
                            {"mode", a.mode},
                            {"answer_text", a.sentence_text},
                            {"passage_id", a.passage_id},
                            {"predictions", a.predictions}}
                           .dump()
                    << '\n';
    }
    json metrics{{"format_version", kFormatVersion},
                 {"config", config_snapshot(cfg)},
                 {"mode", opt.mode},
                 {"passage_group", cfg.eval.group},
                 {"split", cfg.eval.split},
                 {"p_at_1", result.p_at_1},
                 {"map", result.map.has_value() ? json(*result.map) : json(nullptr)},
                 {"mrr", result.mrr.has_value() ? json(*result.mrr) : json(nullptr)},
                 {"n_questions", result.n_questions}};
    write_json_file(out_dir / "metrics.json", metrics);
    write_json_file(out_dir / "run_log.json", pipeline::run_log_to_json(result.log));
    std::cout << "eval mode=" << opt.mode << " split=" << cfg.eval.split
              << " p@1=" << result.p_at_1 << " questions=" << result.n_questions << "\n";
}

void cmd_cost_report(const RunConfig& cfg, const std::vector<std::filesystem::path>& run_logs,
                     const std::filesystem::path& out_file) {
    std::vector<pipeline::RunLog> logs;
    for (const auto& path : run_logs) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read run log " + path.string());
        json j;
        in >> j;
        logs.push_back(pipeline::run_log_from_json(j));
    }
    const auto report = pipeline::cost_report(logs, cfg.pipeline.costs);
    std::cout << pipeline::format_cost_table(report);
    json j = pipeline::cost_report_to_json(report);
    j["format_version"] = kFormatVersion;
    j["config"] = config_snapshot(cfg);
    write_json_file(out_file, j);
}

}  // namespace peasi::cli
