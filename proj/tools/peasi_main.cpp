#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "peasi/config.hpp"
#include "peasi/errors.hpp"

namespace {

// Builds the effective config from an optional file plus flag overrides.
peasi::cli::RunConfig make_config(const std::string& config_path, long long seed_flag,
                                  const std::vector<std::string>& sets) {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw peasi::ConfigError(config_path, "cannot open config file");
        in >> j;
    }
    if (seed_flag >= 0) j["seed"] = static_cast<std::uint64_t>(seed_flag);
    // --set section.key=value, mirroring the config paths.
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw peasi::ConfigError(s, "expected section.key=value");
        const std::string path = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t dot = path.find('.'); ; dot = path.find('.', start)) {
            parts.push_back(path.substr(start, dot - start));
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        nlohmann::json* node = &j;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
        const auto parsed = nlohmann::json::parse(value, nullptr, false);
        (*node)[parts.back()] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
    }
    return peasi::cli::parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PEASI: passage reranking with in-place answer sentence extraction"};
    app.require_subcommand(1);

    std::string config_path;
    long long seed_flag = -1;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON config file")->envname("PEASI_CONFIG");
    app.add_option("--seed", seed_flag, "Seed override (mandatory here or in the config)");
    app.add_option("--set", sets, "Override a config field, e.g. --set train.mode=easi");

    std::string out_dir, in_dir, corpus_dir, out_file;
    std::vector<std::string> run_logs;

    auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic labeled corpus");
    gen->add_option("--out", out_dir, "Output directory")->required();

    auto* build = app.add_subcommand("build-corpus",
                                     "Split documents into sentences, generate passage windows, "
                                     "propagate labels and report Table-1 statistics");
    build->add_option("--in", in_dir, "Directory produced by gen-synthetic")->required();
    build->add_option("--out", out_dir, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a model (pr, easi, sentence, mtl0, mtl1, mtl1_fuse)");
    train->add_option("--corpus", corpus_dir, "Directory produced by build-corpus")->required();
    train->add_option("--out", out_dir, "Model output directory")->required();

    auto* eval = app.add_subcommand("eval", "Run a pipeline mode over a split and emit metrics");
    eval->add_option("--corpus", corpus_dir, "Directory produced by build-corpus")->required();
    eval->add_option("--out", out_dir, "Output directory for metrics/answers/run log")->required();

    auto* cost = app.add_subcommand("cost-report", "Aggregate run logs into a Table-4 style report");
    cost->add_option("--runs", run_logs, "run_log.json files")->required();
    cost->add_option("--out", out_file, "Report output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // 0 for --help, 2 for usage/validation errors
    }

    try {
        const auto cfg = make_config(config_path, seed_flag, sets);
        if (gen->parsed()) {
            peasi::cli::cmd_gen_synthetic(cfg, out_dir);
        } else if (build->parsed()) {
            peasi::cli::cmd_build_corpus(cfg, in_dir, out_dir);
        } else if (train->parsed()) {
            peasi::cli::cmd_train(cfg, corpus_dir, out_dir);
        } else if (eval->parsed()) {
            peasi::cli::cmd_eval(cfg, corpus_dir, out_dir);
        } else if (cost->parsed()) {
            std::vector<std::filesystem::path> paths(run_logs.begin(), run_logs.end());
            peasi::cli::cmd_cost_report(cfg, paths, out_file);
        }
    } catch (const peasi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
