#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recap/autodiff.hpp"

namespace recap::nn {

using ParamList = std::vector<std::pair<std::string, ad::NodePtr>>;

struct TransformerConfig {
    size_t d_model = 64;
    size_t n_heads = 4;
    size_t n_layers = 2;
    size_t ffn_mult = 4;
    size_t max_positions = 256;
    size_t vocab_size = 1;
    bool causal = false;

    void validate() const;
};

TransformerConfig config_from_json(const std::string& json_text);
std::string config_to_json(const TransformerConfig& cfg);

// N per-layer prefix slot sequences, each [n_slots x d]. The decoder maps
// them through each layer's own key/value projections and prepends the
// results to that layer's self-attention keys/values; prefix slots never
// appear in the output sequence.
struct PrefixBlock {
    size_t n_layers = 0;
    size_t n_slots = 0;
    size_t d = 0;
    std::vector<ad::NodePtr> per_layer;  // size n_layers, each [n_slots, d]

    static PrefixBlock empty(size_t n_layers, size_t d);
};

struct Linear {
    ad::NodePtr W;  // [in, out]
    ad::NodePtr b;  // [1, out]
};

struct LayerNormParams {
    ad::NodePtr gamma, beta;  // [1, d]
};

struct Block {
    LayerNormParams ln1;
    Linear wq, wk, wv, wo;
    LayerNormParams ln2;
    Linear ff1, ff2;
};

ad::NodePtr linear(const ad::NodePtr& x, const Linear& l);

// Pre-norm residual stack usable both over token embeddings and over raw
// utterance vectors. Positional information is the caller's concern.
class TransformerStack {
public:
    TransformerStack() = default;
    TransformerStack(const TransformerConfig& cfg, const std::string& name, Rng& rng);

    // x: [n, d_model]; prefix (decoder only) must have n_layers entries
    ad::NodePtr forward(const ad::NodePtr& x, const PrefixBlock* prefix = nullptr) const;

    void collect_params(ParamList& out) const;
    void set_trainable(bool trainable);

    TransformerConfig cfg;
    std::string name;
    std::vector<Block> blocks;
    LayerNormParams ln_f;
};

class TokenEmbedding {
public:
    TokenEmbedding() = default;
    TokenEmbedding(size_t vocab_size, size_t d, size_t max_positions, const std::string& name,
                   Rng& rng);

    ad::NodePtr forward(const std::vector<int>& ids) const;  // tok + pos

    void collect_params(ParamList& out) const;
    void set_trainable(bool trainable);

    ad::NodePtr tok;  // [V, d]
    ad::NodePtr pos;  // [max_positions, d]
    size_t max_positions = 0;
};

// Non-causal token encoder: final-layer states and their mean pool.
class EncoderModel {
public:
    EncoderModel() = default;
    EncoderModel(const TransformerConfig& cfg, const std::string& name, Rng& rng);

    ad::NodePtr encode(const std::vector<int>& ids) const;         // [len, d]
    ad::NodePtr encode_pooled(const std::vector<int>& ids) const;  // [1, d]

    void collect_params(ParamList& out) const;
    void set_trainable(bool trainable);

    TransformerConfig cfg;
    TokenEmbedding emb;
    TransformerStack stack;
};

// Causal decoder with tied input/output embedding and optional per-layer
// prefix conditioning.
class DecoderModel {
public:
    DecoderModel() = default;
    DecoderModel(const TransformerConfig& cfg, const std::string& name, Rng& rng);

    // logits [len, vocab]; prefix layer count must match n_layers
    ad::NodePtr forward(const std::vector<int>& ids, const PrefixBlock* prefix = nullptr) const;

    void collect_params(ParamList& out) const;
    void set_trainable(bool trainable);

    TransformerConfig cfg;
    TokenEmbedding emb;
    TransformerStack stack;
};

void set_params_trainable(const ParamList& params, bool trainable);

}  // namespace recap::nn
