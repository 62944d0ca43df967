#pragma once

#include <functional>
#include <optional>

#include "recap/checkpoint.hpp"
#include "recap/corpus.hpp"
#include "recap/sampling.hpp"
#include "recap/tokenizer.hpp"
#include "recap/transformer.hpp"

namespace recap::prefgen {

enum class FusionMode { none, concat_history, prefix };

const char* fusion_mode_name(FusionMode m);
FusionMode fusion_mode_from_name(const std::string& name);

// CAP encoder + projections + prefix expansion + causal decoder.
// The same encoder serves context and history encoding (a split encoder
// is available behind `split_history_encoder`).
class CapModel {
public:
    CapModel() = default;
    CapModel(const nn::TransformerConfig& enc_cfg, const nn::TransformerConfig& dec_cfg,
             size_t prefix_len, size_t max_histories, nn::Vocab vocab, Rng& rng,
             bool split_history_encoder = false);

    struct EncodedContext {
        ad::NodePtr states;  // [len, d], final-layer token states
        bool truncated = false;
    };

    // overlong contexts are truncated from the left (oldest turns first)
    EncodedContext encode_context(const std::vector<std::string>& context_turns) const;

    // H_i = encoder(h_i) + q_i broadcast over positions; concatenated
    ad::NodePtr encode_histories(const std::vector<std::string>& retrieved) const;

    // P_c = Attn(E, C, C); P_h = Attn(P_c, H, H); slot-wise expansion to
    // L layers. Empty H feeds P_c straight into the expansion map.
    nn::PrefixBlock project_prefix(const ad::NodePtr& context_states,
                                   const ad::NodePtr& history_states) const;

    nn::PrefixBlock prefix_for(const std::vector<std::string>& context_turns,
                               const std::vector<std::string>& retrieved) const;

    // mean NLL per response token (teacher forced; context and history
    // positions contribute no loss)
    ad::NodePtr nll(const std::vector<std::string>& context_turns,
                    const std::vector<std::string>& retrieved, const std::string& response,
                    FusionMode mode) const;

    std::string generate(const std::vector<std::string>& context_turns,
                         const std::vector<std::string>& retrieved, FusionMode mode,
                         double top_p, size_t max_tokens, Rng& rng) const;

    nn::ParamList trainable_params() const;
    void save(const std::string& path, const std::string& config_json) const;
    static CapModel load(const std::string& path);

    nn::Vocab vocab;
    nn::EncoderModel encoder;
    std::optional<nn::EncoderModel> history_encoder;  // only when split
    ad::NodePtr q_table;    // [max_histories, d] history positional embeddings
    ad::NodePtr query_emb;  // E: [prefix_len, d]
    // two single-head cross-attention projections (no biases, matrices only)
    ad::NodePtr p1_wq, p1_wk, p1_wv;
    ad::NodePtr p2_wq, p2_wk, p2_wv;
    nn::Linear expand;  // [d, L*d] applied per prefix slot
    nn::DecoderModel decoder;
    size_t prefix_len = 0;
    size_t max_histories = 0;
};

struct GenTrainOptions {
    size_t epochs = 3;
    Real lr = Real(1e-3);
    uint64_t seed = 1;
    Real weight_decay = Real(0.01);
    size_t batch_size = 1;  // gradient accumulation
};

struct GenTrainTrace {
    std::vector<Real> epoch_train_nll;   // mean per response token
    std::vector<Real> epoch_valid_ppl;
    size_t best_epoch = 0;
};

// Supplies the retrieved history responses for one training sample
// (retriever output, recency fallback, or nothing for mode none).
using HistoryProvider =
    std::function<std::vector<std::string>(const std::string& user, const corpus::Sample&)>;

GenTrainTrace train_generator(CapModel& model, const corpus::CorpusSplit& split,
                              const HistoryProvider& histories, FusionMode mode,
                              const GenTrainOptions& opts);

// exp(total response-token NLL / total response-token count)
Real perplexity(const CapModel& model, const std::vector<corpus::Sample>& samples,
                const HistoryProvider& histories, FusionMode mode);

}  // namespace recap::prefgen
