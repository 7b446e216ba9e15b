#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "peasi/corpus.hpp"
#include "peasi/pipeline.hpp"
#include "peasi/synthetic.hpp"
#include "peasi/training.hpp"

namespace peasi::cli {

// The one configuration document every command reads. Unknown keys are
// rejected with their field path; `seed` is mandatory; everything else has a
// documented default. The effective (fully defaulted) document is embedded in
// every output artifact as `config`.
struct RunConfig {
    std::uint64_t seed = 0;

    struct Data {
        std::string dir = "corpus";
        synth::GeneratorConfig generator;
        corpus::WindowingOptions window;
        std::string group = "all";  // train-time passage group for build-corpus
    } data;

    model::EncoderConfig encoder;

    train::TrainConfig train;

    struct Pipeline {
        std::string mode = "peasi_top1";
        int top_n = 5;
        int retrieve_top_n = 0;
        pipeline::CostOptions costs;
    } pipeline;

    struct Eval {
        std::string split = "dev";
        std::string group = "all";  // eval-time passage group filter
        std::string pr_model;
        std::string easi_model;
        std::string sentence_model;
    } eval;
};

// Parses and validates; throws ConfigError with the offending field path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& file);

// The effective configuration as deterministic JSON (defaults filled in).
nlohmann::json config_snapshot(const RunConfig& cfg);

constexpr int kFormatVersion = 1;

// ---- commands (the CLI subcommands bind straight to these) ----

void cmd_gen_synthetic(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_build_corpus(const RunConfig& cfg, const std::filesystem::path& in_dir,
                      const std::filesystem::path& out_dir);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& corpus_dir,
               const std::filesystem::path& out_dir);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& corpus_dir,
              const std::filesystem::path& out_dir);
void cmd_cost_report(const RunConfig& cfg, const std::vector<std::filesystem::path>& run_logs,
                     const std::filesystem::path& out_file);

}  // namespace peasi::cli
