#pragma once

#include <functional>
#include <map>
#include <optional>

#include "recap/checkpoint.hpp"
#include "recap/corpus.hpp"
#include "recap/tokenizer.hpp"
#include "recap/transformer.hpp"

namespace recap::retriever {

enum class Flavor { style, semantic };

const char* flavor_name(Flavor f);
Flavor flavor_from_name(const std::string& name);

struct UtteranceEmbedding {
    Tensor vector;  // [1, d]
    enum class Kind { context, response } kind;
    size_t position = 0;
};

// token ids of all turns joined with the separator token
std::vector<int> tokenize_turns(const nn::Vocab& vocab, const std::vector<std::string>& turns,
                                size_t max_positions);

// One retrieval flavor: a frozen token-level encoder that doubles as the
// training-target encoder, and a trainable utterance-level causal
// transformer with pair-position table p and type embeddings y_c / y_r.
class RetrieverModel {
public:
    RetrieverModel() = default;
    RetrieverModel(Flavor flavor, nn::Vocab vocab, const nn::TransformerConfig& token_cfg,
                   const nn::TransformerConfig& utterance_cfg, size_t history_cap, Rng& rng);

    // mean of the final-layer token states (Kind only labels the result)
    UtteranceEmbedding embed_utterance(const std::string& text,
                                       UtteranceEmbedding::Kind kind = UtteranceEmbedding::Kind::response,
                                       size_t position = 0) const;

    // cached frozen embedding of joined turns
    Tensor embed_turns_frozen(const std::vector<std::string>& turns) const;

    struct Composed {
        ad::NodePtr seq;                   // [n_slots, d]
        std::vector<size_t> context_rows;  // rows holding context slots
        size_t n_pairs = 0;
        bool has_current = false;
    };

    // interleaved [e_c1, e_r1, ..., e_cT, e_rT] (+ current context slot)
    Composed compose_inputs(const corpus::UserHistory& history,
                            const std::vector<std::string>* current_context) const;

    // utterance transformer outputs at every context slot, [n_ctx, d]
    ad::NodePtr predict_response_embeddings(const Composed& inputs) const;

    // inference-time query vector: output state at the appended
    // current-context slot
    Tensor predict_query(const corpus::UserHistory& history,
                         const std::vector<std::string>& current_context) const;

    // frozen target embedding of a response text (always non-differentiable)
    Tensor target_embedding(const std::string& response) const;

    nn::ParamList trainable_params() const;
    nn::ParamList all_params() const;
    void save(const std::string& path, const std::string& config_json) const;
    static RetrieverModel load(const std::string& path, Flavor expected_flavor);

    // Unfreezing fine-tunes the input token encoder; targets keep coming
    // from the cached frozen space.
    void set_train_token_encoder(bool trainable);

    Flavor flavor = Flavor::style;
    nn::Vocab vocab;
    nn::EncoderModel token_encoder;
    nn::TransformerStack utterance_transformer;  // causal over utterance slots
    ad::NodePtr p_table;                         // [history_cap + 1, d]
    ad::NodePtr y_context, y_response;           // [1, d]
    size_t history_cap = corpus::kHistoryCapPerUser;
    bool train_token_encoder = false;

private:
    mutable std::map<std::string, Tensor> embed_cache_;
};

struct RetrievalEntry {
    std::string response;
    Tensor style_vec;     // empty when no style model was supplied
    Tensor semantic_vec;  // empty when no semantic model was supplied
    size_t position = 0;
};

struct RetrievalIndex {
    std::string user_id;
    std::vector<RetrievalEntry> entries;
    bool has_style = false;
    bool has_semantic = false;
};

// Either model pointer may be null; the index then only supports the
// other flavor.
RetrievalIndex build_index(const RetrieverModel* style_model, const RetrieverModel* semantic_model,
                           const corpus::UserHistory& history);

// top-k responses by cosine under the chosen flavor, ties to the older
// entry; returns all entries when the index holds fewer than k
std::vector<std::string> retrieve(const RetrievalIndex& index, const Tensor& query, Flavor flavor,
                                  size_t k);

// k/2 style + k/2 semantic picks; a semantic pick that duplicates the
// style half is replaced by the next-ranked semantic candidate
std::vector<std::string> retrieve_mixed(const RetrievalIndex& index, const Tensor& style_query,
                                        const Tensor& semantic_query, size_t k);

struct TrainOptions {
    size_t epochs = 3;
    Real lr = Real(1e-3);
    uint64_t seed = 1;
    Real weight_decay = Real(0.01);
};

struct TrainTrace {
    std::vector<Real> epoch_train_loss;  // mean per response slot
    std::vector<Real> epoch_valid_loss;
    size_t best_epoch = 0;
};

// Sequence loss (Eq.-style sum of per-slot cosine losses) for one user
// sequence of (context, response) pairs.
ad::NodePtr sequence_loss(const RetrieverModel& model,
                          const std::vector<corpus::Sample>& pairs);

// AdamW + linear schedule over per-user sequences; keeps the parameters
// of the best validation epoch.
TrainTrace train_retriever(RetrieverModel& model, const corpus::CorpusSplit& split,
                           const TrainOptions& opts);

}  // namespace recap::retriever
