#include "recap/transformer.hpp"

#include <nlohmann/json.hpp>

namespace recap::nn {

using ad::NodePtr;

namespace {

constexpr Real kInitStd = Real(0.02);

Linear make_linear(size_t in, size_t out, const std::string& name, Rng& rng) {
    return Linear{ad::param(name + ".W", Tensor::randn({in, out}, rng, kInitStd)),
                  ad::param(name + ".b", Tensor::zeros({1, out}))};
}

LayerNormParams make_ln(size_t d, const std::string& name) {
    Tensor g({1, d});
    g.fill(Real(1));
    return LayerNormParams{ad::param(name + ".g", std::move(g)),
                           ad::param(name + ".b", Tensor::zeros({1, d}))};
}

void collect_linear(const Linear& l, ParamList& out) {
    out.emplace_back(l.W->name, l.W);
    out.emplace_back(l.b->name, l.b);
}

void collect_ln(const LayerNormParams& l, ParamList& out) {
    out.emplace_back(l.gamma->name, l.gamma);
    out.emplace_back(l.beta->name, l.beta);
}

}  // namespace

void TransformerConfig::validate() const {
    if (d_model < 1 || n_heads < 1 || n_layers < 1 || ffn_mult < 1 || max_positions < 1 ||
        vocab_size < 1)
        throw std::invalid_argument("TransformerConfig: all dims must be >= 1");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("TransformerConfig: d_model not divisible by n_heads");
}

TransformerConfig config_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    TransformerConfig c;
    c.d_model = j.at("d_model").get<size_t>();
    c.n_heads = j.at("n_heads").get<size_t>();
    c.n_layers = j.at("n_layers").get<size_t>();
    c.ffn_mult = j.at("ffn_mult").get<size_t>();
    c.max_positions = j.at("max_positions").get<size_t>();
    c.vocab_size = j.at("vocab_size").get<size_t>();
    c.causal = j.at("causal").get<bool>();
    c.validate();
    return c;
}

std::string config_to_json(const TransformerConfig& c) {
    nlohmann::json j{{"d_model", c.d_model},     {"n_heads", c.n_heads},
                     {"n_layers", c.n_layers},   {"ffn_mult", c.ffn_mult},
                     {"max_positions", c.max_positions}, {"vocab_size", c.vocab_size},
                     {"causal", c.causal}};
    return j.dump();
}

PrefixBlock PrefixBlock::empty(size_t n_layers, size_t d) {
    PrefixBlock p;
    p.n_layers = n_layers;
    p.n_slots = 0;
    p.d = d;
    for (size_t i = 0; i < n_layers; ++i) p.per_layer.push_back(ad::constant(Tensor({0, d})));
    return p;
}

ad::NodePtr linear(const NodePtr& x, const Linear& l) {
    return ad::add_rowvec(ad::matmul(x, l.W), l.b);
}

TransformerStack::TransformerStack(const TransformerConfig& c, const std::string& nm, Rng& rng)
    : cfg(c), name(nm) {
    cfg.validate();
    const size_t d = cfg.d_model;
    for (size_t li = 0; li < cfg.n_layers; ++li) {
        const std::string b = name + ".block" + std::to_string(li);
        Block blk;
        blk.ln1 = make_ln(d, b + ".ln1");
        blk.wq = make_linear(d, d, b + ".wq", rng);
        blk.wk = make_linear(d, d, b + ".wk", rng);
        blk.wv = make_linear(d, d, b + ".wv", rng);
        blk.wo = make_linear(d, d, b + ".wo", rng);
        blk.ln2 = make_ln(d, b + ".ln2");
        blk.ff1 = make_linear(d, d * cfg.ffn_mult, b + ".ff1", rng);
        blk.ff2 = make_linear(d * cfg.ffn_mult, d, b + ".ff2", rng);
        blocks.push_back(std::move(blk));
    }
    ln_f = make_ln(d, name + ".ln_f");
}

ad::NodePtr TransformerStack::forward(const NodePtr& x_in, const PrefixBlock* prefix) const {
    if (prefix && prefix->per_layer.size() != cfg.n_layers)
        throw std::invalid_argument("prefix layer mismatch: prefix has " +
                                    std::to_string(prefix->per_layer.size()) + " layers, decoder " +
                                    std::to_string(cfg.n_layers));
    NodePtr x = x_in;
    for (size_t li = 0; li < blocks.size(); ++li) {
        const Block& blk = blocks[li];
        NodePtr h = ad::layer_norm(x, blk.ln1.gamma, blk.ln1.beta);
        NodePtr q = linear(h, blk.wq);
        NodePtr k = linear(h, blk.wk);
        NodePtr v = linear(h, blk.wv);
        size_t n_prefix = 0;
        if (prefix && prefix->per_layer[li]->value.rows() > 0) {
            n_prefix = prefix->per_layer[li]->value.rows();
            NodePtr kp = linear(prefix->per_layer[li], blk.wk);
            NodePtr vp = linear(prefix->per_layer[li], blk.wv);
            k = ad::concat_rows({kp, k});
            v = ad::concat_rows({vp, v});
        }
        NodePtr attn = ad::multihead_attention(q, k, v, cfg.n_heads, cfg.causal, n_prefix);
        x = ad::add(x, linear(attn, blk.wo));
        NodePtr h2 = ad::layer_norm(x, blk.ln2.gamma, blk.ln2.beta);
        NodePtr f = linear(ad::gelu(linear(h2, blk.ff1)), blk.ff2);
        x = ad::add(x, f);
    }
    return ad::layer_norm(x, ln_f.gamma, ln_f.beta);
}

void TransformerStack::collect_params(ParamList& out) const {
    for (const Block& blk : blocks) {
        collect_ln(blk.ln1, out);
        collect_linear(blk.wq, out);
        collect_linear(blk.wk, out);
        collect_linear(blk.wv, out);
        collect_linear(blk.wo, out);
        collect_ln(blk.ln2, out);
        collect_linear(blk.ff1, out);
        collect_linear(blk.ff2, out);
    }
    collect_ln(ln_f, out);
}

void TransformerStack::set_trainable(bool trainable) {
    ParamList ps;
    collect_params(ps);
    set_params_trainable(ps, trainable);
}

TokenEmbedding::TokenEmbedding(size_t vocab_size, size_t d, size_t max_pos,
                               const std::string& name, Rng& rng)
    : max_positions(max_pos) {
    tok = ad::param(name + ".tok", Tensor::randn({vocab_size, d}, rng, kInitStd));
    pos = ad::param(name + ".pos", Tensor::randn({max_pos, d}, rng, kInitStd));
}

ad::NodePtr TokenEmbedding::forward(const std::vector<int>& ids) const {
    if (ids.size() > max_positions)
        throw std::invalid_argument("input length " + std::to_string(ids.size()) +
                                    " exceeds max_positions " + std::to_string(max_positions));
    return ad::add(ad::embedding(tok, ids), ad::slice_rows(pos, 0, ids.size()));
}

void TokenEmbedding::collect_params(ParamList& out) const {
    out.emplace_back(tok->name, tok);
    out.emplace_back(pos->name, pos);
}

void TokenEmbedding::set_trainable(bool trainable) {
    tok->needs_grad = trainable;
    pos->needs_grad = trainable;
}

EncoderModel::EncoderModel(const TransformerConfig& c, const std::string& name, Rng& rng)
    : cfg(c) {
    if (cfg.causal) throw std::invalid_argument("EncoderModel requires causal=false");
    cfg.validate();
    emb = TokenEmbedding(cfg.vocab_size, cfg.d_model, cfg.max_positions, name + ".emb", rng);
    stack = TransformerStack(cfg, name, rng);
}

ad::NodePtr EncoderModel::encode(const std::vector<int>& ids) const {
    if (ids.empty()) throw std::invalid_argument("encode: empty token sequence");
    return stack.forward(emb.forward(ids));
}

ad::NodePtr EncoderModel::encode_pooled(const std::vector<int>& ids) const {
    return ad::mean_rows(encode(ids));
}

void EncoderModel::collect_params(ParamList& out) const {
    emb.collect_params(out);
    stack.collect_params(out);
}

void EncoderModel::set_trainable(bool trainable) {
    emb.set_trainable(trainable);
    stack.set_trainable(trainable);
}

DecoderModel::DecoderModel(const TransformerConfig& c, const std::string& name, Rng& rng)
    : cfg(c) {
    if (!cfg.causal) throw std::invalid_argument("DecoderModel requires causal=true");
    cfg.validate();
    emb = TokenEmbedding(cfg.vocab_size, cfg.d_model, cfg.max_positions, name + ".emb", rng);
    stack = TransformerStack(cfg, name, rng);
}

ad::NodePtr DecoderModel::forward(const std::vector<int>& ids, const PrefixBlock* prefix) const {
    if (ids.empty()) throw std::invalid_argument("decoder: empty token sequence");
    NodePtr h = stack.forward(emb.forward(ids), prefix);
    return ad::matmul_nt(h, emb.tok);  // tied output embedding
}

void DecoderModel::collect_params(ParamList& out) const {
    emb.collect_params(out);
    stack.collect_params(out);
}

void DecoderModel::set_trainable(bool trainable) {
    emb.set_trainable(trainable);
    stack.set_trainable(trainable);
}

void set_params_trainable(const ParamList& params, bool trainable) {
    for (const auto& [name, node] : params) node->needs_grad = trainable;
}

}  // namespace recap::nn
