#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recap/pipeline.hpp"

namespace {

using recap::cli::ConfigError;
using recap::cli::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

// --config / --preset are resolved before the option bindings so that
// explicit flags override file values
RunConfig base_config(int argc, char** argv) {
    RunConfig cfg;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--preset") cfg = RunConfig::preset(argv[i + 1]);
    }
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") cfg = RunConfig::from_json_file(argv[i + 1]);
    }
    return cfg;
}

void bind_common(CLI::App* cmd, RunConfig& cfg) {
    std::string sink;
    cmd->add_option("--config", sink, "JSON config file");
    cmd->add_option("--preset", sink, "built-in preset: toy or paper");
    cmd->add_option("--data", cfg.data, "conversation corpus (JSONL)");
    cmd->add_option("--traits", cfg.traits, "trait-labeled corpus (JSONL)");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--seed", cfg.seed, "RNG seed");
    cmd->add_option("--d-model", cfg.d_model, "model width");
    cmd->add_option("--prefix-len", cfg.prefix_len, "prefix slots N");
    cmd->add_option("--vocab-size", cfg.vocab_size, "BPE vocabulary size");
    cmd->add_option("--lr", cfg.lr, "learning rate");
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--batch-size", cfg.batch_size, "gradient accumulation batch");
    cmd->add_option("--pretrain-epochs", cfg.pretrain_epochs, "target-encoder pretraining epochs");
    cmd->add_option("--k", cfg.k, "retrieved history responses");
    cmd->add_option("--flavor", cfg.flavor, "retrieval flavor: style|semantic|mixed");
    cmd->add_option("--top-p", cfg.top_p, "nucleus sampling mass");
    cmd->add_option("--max-tokens", cfg.max_tokens, "generation length cap");
    cmd->add_option("--history-cap", cfg.history_cap, "history pairs kept per user");
}

std::vector<std::string> read_context_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open context file: " + path);
    std::vector<std::string> turns;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) turns.push_back(line);
    if (turns.empty()) throw ConfigError("context file has no turns: " + path);
    return turns;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    try {
        cfg = base_config(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    CLI::App app{"recap: retrieval-enhanced personalized dialogue pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a corpus and write the user split");
    bind_common(ingest, cfg);
    size_t synth_users = 200, synth_samples = 24;
    auto* synth = ingest->add_subcommand("synth", "generate a synthetic persona corpus");
    synth->add_option("--users", synth_users, "number of users");
    synth->add_option("--samples-per-user", synth_samples, "samples per user");

    // train-retriever
    auto* train_ret = app.add_subcommand("train-retriever", "pretrain encoder + train retriever");
    bind_common(train_ret, cfg);

    // train-generator
    auto* train_gen = app.add_subcommand("train-generator", "train the CAP generator");
    bind_common(train_gen, cfg);
    std::string gen_mode = "prefix", gen_histories = "";
    train_gen->add_option("--mode", gen_mode, "fusion mode: none|concat|prefix");
    train_gen->add_option("--histories", gen_histories,
                          "history source: recency|style|semantic|mixed (default: flavor)");

    // generate
    auto* generate = app.add_subcommand("generate", "decode responses for the test split or a user");
    bind_common(generate, cfg);
    recap::cli::GenerateOptions gopts;
    std::string gen_context_file;
    generate->add_option("--generator", gopts.generator_path, "generator checkpoint");
    std::string generate_mode = "prefix", generate_histories = "";
    generate->add_option("--mode", generate_mode, "fusion mode: none|concat|prefix");
    generate->add_option("--histories", generate_histories, "history source override");
    generate->add_option("--user", gopts.user_id, "generate for one user id");
    generate->add_option("--context-file", gen_context_file, "one context turn per line");
    generate->add_option("--generations", gopts.out_path, "output JSONL path");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score generations into a MetricReport");
    bind_common(evaluate, cfg);
    recap::cli::EvaluateOptions eopts;
    evaluate->add_option("--generations", eopts.generations_path, "generations JSONL")->required();
    evaluate->add_option("--report", eopts.report_path, "output report JSON");
    evaluate->add_option("--generator", eopts.generator_path, "generator checkpoint (perplexity)");
    evaluate->add_option("--retriever-style", eopts.retriever_style_path,
                         "style retriever checkpoint (style metrics + CAV)");
    evaluate->add_flag("--traits-metrics", eopts.traits_metrics, "fit and score trait models");

    // significance
    auto* significance = app.add_subcommand("significance", "paired t-test between two reports");
    std::string sig_a, sig_b, sig_metric = "bleu1", sig_out;
    size_t sig_subsets = 100, sig_size = 2000;
    uint64_t sig_seed = 1;
    significance->add_option("--a", sig_a, "report A")->required();
    significance->add_option("--b", sig_b, "report B")->required();
    significance->add_option("--metric", sig_metric, "per-example metric name");
    significance->add_option("--subsets", sig_subsets, "number of subsets");
    significance->add_option("--size", sig_size, "subset size");
    significance->add_option("--seed", sig_seed, "sampling seed");
    significance->add_option("--out", sig_out, "result JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) {
            if (synth->parsed()) {
                recap::cli::cmd_ingest_synth(cfg, synth_users, synth_samples);
                std::cout << "synthetic corpus written to " << cfg.out_dir << "\n";
            } else {
                const auto stats = recap::cli::cmd_ingest(cfg);
                std::cout << "ingested " << stats.n_samples << " samples from " << stats.n_users
                          << " users (" << stats.n_train_users << "/" << stats.n_valid_users
                          << "/" << stats.n_test_users << " train/valid/test)\n";
            }
        } else if (train_ret->parsed()) {
            if (cfg.flavor == "mixed") {
                const std::string p1 =
                    recap::cli::cmd_train_retriever(cfg, recap::retriever::Flavor::style);
                const std::string p2 =
                    recap::cli::cmd_train_retriever(cfg, recap::retriever::Flavor::semantic);
                std::cout << "wrote " << p1 << " and " << p2 << "\n";
            } else {
                const std::string p = recap::cli::cmd_train_retriever(
                    cfg, recap::retriever::flavor_from_name(cfg.flavor));
                std::cout << "wrote " << p << "\n";
            }
        } else if (train_gen->parsed()) {
            const auto mode = recap::prefgen::fusion_mode_from_name(gen_mode);
            const std::string source = gen_histories.empty() ? cfg.flavor : gen_histories;
            const std::string p = recap::cli::cmd_train_generator(cfg, mode, source);
            std::cout << "wrote " << p << "\n";
        } else if (generate->parsed()) {
            gopts.mode = recap::prefgen::fusion_mode_from_name(generate_mode);
            gopts.history_source =
                generate_histories.empty() ? cfg.flavor : generate_histories;
            if (gopts.generator_path.empty())
                gopts.generator_path =
                    recap::cli::generator_ckpt_path(cfg, gopts.mode, gopts.history_source);
            if (!gen_context_file.empty()) gopts.context = read_context_file(gen_context_file);
            if (!gopts.user_id.empty() && gopts.context.empty())
                throw ConfigError("--user requires --context-file");
            const std::string p = recap::cli::cmd_generate(cfg, gopts);
            std::cout << "wrote " << p << "\n";
        } else if (evaluate->parsed()) {
            if (eopts.report_path.empty()) eopts.report_path = cfg.out_dir + "/report.json";
            const auto report = recap::cli::cmd_evaluate(cfg, eopts);
            for (const auto& [name, value] : report.scalars)
                std::cout << name << " = " << value << "\n";
            std::cout << "wrote " << eopts.report_path << "\n";
        } else if (significance->parsed()) {
            const auto result = recap::cli::cmd_significance(sig_a, sig_b, sig_metric, sig_subsets,
                                                             sig_size, sig_seed, sig_out);
            std::cout << "metric " << sig_metric << ": t = " << result.t_stat
                      << ", p = " << result.p_value;
            if (result.flagged) std::cout << " [flagged: " << result.flag_reason << "]";
            std::cout << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
