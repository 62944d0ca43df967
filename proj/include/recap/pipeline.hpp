#pragma once

#include <optional>
#include <string>

#include "recap/corpus.hpp"
#include "recap/evalsuite.hpp"
#include "recap/prefix_generator.hpp"
#include "recap/retriever.hpp"
#include "recap/stats.hpp"

namespace recap::cli {

// invalid configuration or arguments; maps to exit code 1
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // paths
    std::string data;
    std::string traits;
    std::string out_dir = "out";

    // split
    double train_frac = 0.8, valid_frac = 0.1, test_frac = 0.1;

    // model dims
    size_t d_model = 64;
    size_t enc_layers = 2, enc_heads = 4;
    size_t dec_layers = 4, dec_heads = 4;
    size_t utt_layers = 2, utt_heads = 4;
    size_t ffn_mult = 4;
    size_t prefix_len = 8;  // N
    size_t vocab_size = 512;
    size_t max_positions = 96;
    size_t history_cap = 100;

    // training
    double lr = 1e-3;
    size_t epochs = 3;
    size_t batch_size = 1;
    uint64_t seed = 1;
    size_t pretrain_epochs = 2;
    double pretrain_lr = 1e-3;

    // retrieval
    std::string flavor = "style";  // style | semantic | mixed
    size_t k = 4;

    // generation
    double top_p = 0.8;
    size_t max_tokens = 48;

    void validate() const;  // throws ConfigError naming the offending field
    std::string to_json() const;
    static RunConfig from_json_file(const std::string& path);
    static RunConfig preset(const std::string& name);  // "toy" | "paper"
};

std::string retriever_ckpt_path(const RunConfig& cfg, retriever::Flavor f);
std::string generator_ckpt_path(const RunConfig& cfg, prefgen::FusionMode mode,
                                const std::string& history_source);

// deterministic corpus load + split from the config
corpus::CorpusSplit load_and_split(const RunConfig& cfg);

struct IngestStats {
    size_t n_samples = 0, n_users = 0;
    size_t n_train_users = 0, n_valid_users = 0, n_test_users = 0;
};

IngestStats cmd_ingest(const RunConfig& cfg);  // writes out_dir/split.json
void cmd_ingest_synth(const RunConfig& cfg, size_t n_users, size_t samples_per_user);

// pretrains the flavor's target encoder, trains the utterance
// transformer, writes out_dir/retriever_<flavor>.rckp
std::string cmd_train_retriever(const RunConfig& cfg, retriever::Flavor flavor);

// history_source: "recency" or a retrieval flavor; ignored for mode none
std::string cmd_train_generator(const RunConfig& cfg, prefgen::FusionMode mode,
                                const std::string& history_source);

struct GenerateOptions {
    std::string generator_path;
    prefgen::FusionMode mode = prefgen::FusionMode::none;
    std::string history_source = "recency";
    // batch over the test split when user_id is empty
    std::string user_id;
    std::vector<std::string> context;
    std::string out_path;
};

std::string cmd_generate(const RunConfig& cfg, const GenerateOptions& opts);

struct EvaluateOptions {
    std::string generations_path;
    std::string report_path;
    std::string generator_path;        // optional: enables perplexity
    std::string retriever_style_path;  // optional: enables style metrics + CAV
    bool traits_metrics = false;       // requires cfg.traits
};

evalsuite::MetricReport cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts);

evalsuite::TTestResult cmd_significance(const std::string& report_a, const std::string& report_b,
                                        const std::string& metric, size_t n_subsets,
                                        size_t subset_size, uint64_t seed,
                                        const std::string& out_path);

// Provides per-sample retrieved histories (retriever output or recency).
class HistorySource {
public:
    // source: "recency" | "style" | "semantic" | "mixed"; retriever
    // checkpoints are loaded from the config's out_dir as needed
    HistorySource(const RunConfig& cfg, const corpus::CorpusSplit& split,
                  const std::string& source);

    std::vector<std::string> retrieved_for(const std::string& user,
                                           const corpus::Sample& sample) const;

    const retriever::RetrieverModel* style_model() const {
        return style_ ? &*style_ : nullptr;
    }

private:
    const corpus::CorpusSplit& split_;
    std::string source_;
    size_t k_;
    std::optional<retriever::RetrieverModel> style_, semantic_;
    mutable std::map<std::string, retriever::RetrievalIndex> index_cache_;
};

}  // namespace recap::cli
