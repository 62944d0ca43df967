#include "recap/prefix_generator.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "recap/optim.hpp"

namespace recap::prefgen {

using ad::NodePtr;

const char* fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::none: return "none";
        case FusionMode::concat_history: return "concat";
        case FusionMode::prefix: return "prefix";
    }
    return "?";
}

FusionMode fusion_mode_from_name(const std::string& name) {
    if (name == "none") return FusionMode::none;
    if (name == "concat" || name == "concat_history") return FusionMode::concat_history;
    if (name == "prefix") return FusionMode::prefix;
    throw std::invalid_argument("unknown fusion mode: " + name);
}

CapModel::CapModel(const nn::TransformerConfig& enc_cfg, const nn::TransformerConfig& dec_cfg,
                   size_t n_prefix, size_t max_hist, nn::Vocab vc, Rng& rng,
                   bool split_history_encoder)
    : vocab(std::move(vc)), prefix_len(n_prefix), max_histories(max_hist) {
    if (enc_cfg.d_model != dec_cfg.d_model)
        throw std::invalid_argument("CapModel: encoder and decoder d_model must match");
    if (enc_cfg.vocab_size < vocab.size() || dec_cfg.vocab_size < vocab.size())
        throw std::invalid_argument("CapModel: vocab_size smaller than the vocab");
    const size_t d = enc_cfg.d_model;
    encoder = nn::EncoderModel(enc_cfg, "cap_enc", rng);
    if (split_history_encoder) history_encoder = nn::EncoderModel(enc_cfg, "cap_hist_enc", rng);
    q_table = ad::param("q_table", Tensor::randn({max_hist, d}, rng, Real(0.02)));
    query_emb = ad::param("query_emb", Tensor::randn({n_prefix, d}, rng, Real(0.02)));
    p1_wq = ad::param("p1.wq", Tensor::randn({d, d}, rng, Real(0.02)));
    p1_wk = ad::param("p1.wk", Tensor::randn({d, d}, rng, Real(0.02)));
    p1_wv = ad::param("p1.wv", Tensor::randn({d, d}, rng, Real(0.02)));
    p2_wq = ad::param("p2.wq", Tensor::randn({d, d}, rng, Real(0.02)));
    p2_wk = ad::param("p2.wk", Tensor::randn({d, d}, rng, Real(0.02)));
    p2_wv = ad::param("p2.wv", Tensor::randn({d, d}, rng, Real(0.02)));
    expand = nn::Linear{
        ad::param("expand.W", Tensor::randn({d, dec_cfg.n_layers * d}, rng, Real(0.02))),
        ad::param("expand.b", Tensor::zeros({1, dec_cfg.n_layers * d}))};
    decoder = nn::DecoderModel(dec_cfg, "dec", rng);
}

CapModel::EncodedContext CapModel::encode_context(
    const std::vector<std::string>& context_turns) const {
    if (context_turns.empty()) throw std::invalid_argument("encode_context: empty context");
    std::vector<int> ids;
    for (size_t i = 0; i < context_turns.size(); ++i) {
        if (i) ids.push_back(nn::Vocab::sep_id);
        const auto t = vocab.encode(context_turns[i]);
        ids.insert(ids.end(), t.begin(), t.end());
    }
    if (ids.empty()) throw std::invalid_argument("encode_context: empty context text");
    EncodedContext out;
    const size_t cap = encoder.cfg.max_positions;
    if (ids.size() > cap) {  // keep the newest tokens
        ids.erase(ids.begin(), ids.begin() + static_cast<ptrdiff_t>(ids.size() - cap));
        out.truncated = true;
    }
    out.states = encoder.encode(ids);
    return out;
}

ad::NodePtr CapModel::encode_histories(const std::vector<std::string>& retrieved) const {
    if (retrieved.size() > max_histories)
        throw std::invalid_argument("encode_histories: " + std::to_string(retrieved.size()) +
                                    " responses exceed capacity " +
                                    std::to_string(max_histories));
    const nn::EncoderModel& enc = history_encoder ? *history_encoder : encoder;
    const size_t d = enc.cfg.d_model;
    if (retrieved.empty()) return ad::constant(Tensor({0, d}));
    std::vector<NodePtr> blocks;
    for (size_t i = 0; i < retrieved.size(); ++i) {
        std::vector<int> ids = vocab.encode(retrieved[i]);
        if (ids.empty()) throw std::invalid_argument("encode_histories: empty history response");
        const size_t cap = enc.cfg.max_positions;
        if (ids.size() > cap)
            ids.erase(ids.begin(), ids.begin() + static_cast<ptrdiff_t>(ids.size() - cap));
        NodePtr h = enc.encode(ids);
        blocks.push_back(ad::add_rowvec(h, ad::slice_rows(q_table, i, 1)));
    }
    return ad::concat_rows(blocks);
}

nn::PrefixBlock CapModel::project_prefix(const NodePtr& context_states,
                                         const NodePtr& history_states) const {
    if (!context_states || context_states->value.rows() == 0)
        throw std::invalid_argument("project_prefix: empty context states");
    const size_t d = encoder.cfg.d_model;
    const size_t n_layers = decoder.cfg.n_layers;

    nn::PrefixBlock block;
    block.n_layers = n_layers;
    block.n_slots = prefix_len;
    block.d = d;

    if (prefix_len == 0) return nn::PrefixBlock::empty(n_layers, d);

    NodePtr p_c = ad::attention(ad::matmul(query_emb, p1_wq),
                                ad::matmul(context_states, p1_wk),
                                ad::matmul(context_states, p1_wv));
    NodePtr p_h = p_c;
    if (history_states && history_states->value.rows() > 0) {
        p_h = ad::attention(ad::matmul(p_c, p2_wq), ad::matmul(history_states, p2_wk),
                            ad::matmul(history_states, p2_wv));
    }
    NodePtr expanded = nn::linear(p_h, expand);  // [N, L*d]
    for (size_t l = 0; l < n_layers; ++l)
        block.per_layer.push_back(ad::slice_cols(expanded, l * d, d));
    return block;
}

nn::PrefixBlock CapModel::prefix_for(const std::vector<std::string>& context_turns,
                                     const std::vector<std::string>& retrieved) const {
    EncodedContext c = encode_context(context_turns);
    NodePtr h = encode_histories(retrieved);
    return project_prefix(c.states, h);
}

namespace {

struct TokenStream {
    std::vector<int> ids;        // bos + pre-response section + response + eos
    size_t response_start = 0;   // index of the first response token
};

// [bos] (+histories, concat mode) + context + [sep] + response + [eos];
// too-long streams lose pre-response tokens from the position right
// after bos, never response tokens.
TokenStream build_stream(const nn::Vocab& vocab, const std::vector<std::string>& context_turns,
                         const std::vector<std::string>& histories_or_empty,
                         const std::string& response, size_t max_positions) {
    if (context_turns.empty()) throw std::invalid_argument("generator: empty context");
    std::vector<int> pre;
    for (const auto& h : histories_or_empty) {
        const auto t = vocab.encode(h);
        pre.insert(pre.end(), t.begin(), t.end());
        pre.push_back(nn::Vocab::sep_id);
    }
    for (size_t i = 0; i < context_turns.size(); ++i) {
        if (i) pre.push_back(nn::Vocab::sep_id);
        const auto t = vocab.encode(context_turns[i]);
        pre.insert(pre.end(), t.begin(), t.end());
    }
    pre.push_back(nn::Vocab::sep_id);

    std::vector<int> resp = vocab.encode(response);
    resp.push_back(nn::Vocab::eos_id);
    if (resp.size() + 2 > max_positions)
        throw std::invalid_argument("generator: response exceeds max_positions");

    const size_t pre_budget = max_positions - 1 - resp.size();
    if (pre.size() > pre_budget)
        pre.erase(pre.begin(), pre.begin() + static_cast<ptrdiff_t>(pre.size() - pre_budget));

    TokenStream s;
    s.ids.push_back(nn::Vocab::bos_id);
    s.ids.insert(s.ids.end(), pre.begin(), pre.end());
    s.response_start = s.ids.size();
    s.ids.insert(s.ids.end(), resp.begin(), resp.end());
    return s;
}

}  // namespace

ad::NodePtr CapModel::nll(const std::vector<std::string>& context_turns,
                          const std::vector<std::string>& retrieved, const std::string& response,
                          FusionMode mode) const {
    if (response.empty()) throw std::invalid_argument("generator_nll: empty response");
    const std::vector<std::string> hist =
        mode == FusionMode::concat_history ? retrieved : std::vector<std::string>{};
    const TokenStream s =
        build_stream(vocab, context_turns, hist, response, decoder.cfg.max_positions);

    nn::PrefixBlock block;
    const nn::PrefixBlock* prefix = nullptr;
    if (mode == FusionMode::prefix) {
        block = prefix_for(context_turns, retrieved);
        prefix = &block;
    }

    const std::vector<int> inputs(s.ids.begin(), s.ids.end() - 1);
    const std::vector<int> targets(s.ids.begin() + 1, s.ids.end());
    std::vector<uint8_t> mask(targets.size(), 0);
    for (size_t j = s.response_start - 1; j < targets.size(); ++j) mask[j] = 1;

    NodePtr logits = decoder.forward(inputs, prefix);
    return ad::cross_entropy(logits, targets, mask);
}

std::string CapModel::generate(const std::vector<std::string>& context_turns,
                               const std::vector<std::string>& retrieved, FusionMode mode,
                               double top_p, size_t max_tokens, Rng& rng) const {
    const std::vector<std::string> hist =
        mode == FusionMode::concat_history ? retrieved : std::vector<std::string>{};
    // reuse the training layout with an empty response slot
    std::vector<int> ids;
    ids.push_back(nn::Vocab::bos_id);
    std::vector<int> pre;
    for (const auto& h : hist) {
        const auto t = vocab.encode(h);
        pre.insert(pre.end(), t.begin(), t.end());
        pre.push_back(nn::Vocab::sep_id);
    }
    for (size_t i = 0; i < context_turns.size(); ++i) {
        if (i) pre.push_back(nn::Vocab::sep_id);
        const auto t = vocab.encode(context_turns[i]);
        pre.insert(pre.end(), t.begin(), t.end());
    }
    pre.push_back(nn::Vocab::sep_id);
    const size_t pre_budget = decoder.cfg.max_positions > max_tokens + 1
                                  ? decoder.cfg.max_positions - max_tokens - 1
                                  : 1;
    if (pre.size() > pre_budget)
        pre.erase(pre.begin(), pre.begin() + static_cast<ptrdiff_t>(pre.size() - pre_budget));
    ids.insert(ids.end(), pre.begin(), pre.end());

    nn::PrefixBlock block;
    const nn::PrefixBlock* prefix = nullptr;
    if (mode == FusionMode::prefix) {
        block = prefix_for(context_turns, retrieved);
        prefix = &block;
    }

    std::vector<int> generated;
    for (size_t step = 0; step < max_tokens; ++step) {
        NodePtr logits = decoder.forward(ids, prefix);
        const size_t last = logits->value.rows() - 1;
        std::vector<Real> row(logits->value.row_ptr(last),
                              logits->value.row_ptr(last) + logits->value.cols());
        const int tok = nn::nucleus_sample(row, top_p, rng);
        if (tok == nn::Vocab::eos_id) break;
        generated.push_back(tok);
        ids.push_back(tok);
        if (ids.size() >= decoder.cfg.max_positions) break;
    }
    return vocab.decode(generated);
}

nn::ParamList CapModel::trainable_params() const {
    nn::ParamList ps;
    encoder.collect_params(ps);
    if (history_encoder) history_encoder->collect_params(ps);
    ps.emplace_back(q_table->name, q_table);
    ps.emplace_back(query_emb->name, query_emb);
    for (const auto& p : {p1_wq, p1_wk, p1_wv, p2_wq, p2_wk, p2_wv})
        ps.emplace_back(p->name, p);
    ps.emplace_back(expand.W->name, expand.W);
    ps.emplace_back(expand.b->name, expand.b);
    decoder.collect_params(ps);
    return ps;
}

void CapModel::save(const std::string& path, const std::string& config_json) const {
    nlohmann::json j;
    j["encoder"] = nlohmann::json::parse(nn::config_to_json(encoder.cfg));
    j["decoder"] = nlohmann::json::parse(nn::config_to_json(decoder.cfg));
    j["prefix_len"] = prefix_len;
    j["max_histories"] = max_histories;
    j["split_history_encoder"] = history_encoder.has_value();
    j["run_config"] = config_json.empty() ? nlohmann::json(nullptr)
                                          : nlohmann::json::parse(config_json);
    nn::ParamList ps = trainable_params();
    nn::save_checkpoint(path, "cap_generator", ps, &vocab, j.dump());
}

CapModel CapModel::load(const std::string& path) {
    nn::Checkpoint ckpt = nn::load_checkpoint(path, "cap_generator");
    if (!ckpt.vocab) throw std::runtime_error("generator checkpoint missing vocab: " + path);
    nlohmann::json j = nlohmann::json::parse(ckpt.config_json);
    nn::TransformerConfig enc_cfg = nn::config_from_json(j.at("encoder").dump());
    nn::TransformerConfig dec_cfg = nn::config_from_json(j.at("decoder").dump());
    Rng rng(0);  // overwritten by checkpoint tensors
    CapModel model(enc_cfg, dec_cfg, j.at("prefix_len").get<size_t>(),
                   j.at("max_histories").get<size_t>(), *ckpt.vocab, rng,
                   j.at("split_history_encoder").get<bool>());
    nn::ParamList ps = model.trainable_params();
    nn::restore_params(ckpt, ps);
    return model;
}

namespace {

struct SampleRef {
    const std::string* user;
    const corpus::Sample* sample;
};

std::vector<SampleRef> gather_samples(const corpus::CorpusSplit& split,
                                      const std::vector<std::string>& users) {
    std::vector<SampleRef> out;
    for (const auto& u : users) {
        auto it = split.samples.find(u);
        if (it == split.samples.end()) continue;
        for (const auto& s : it->second.training) out.push_back({&u, &s});
    }
    return out;
}

std::vector<Tensor> snapshot(const nn::ParamList& ps) {
    std::vector<Tensor> out;
    out.reserve(ps.size());
    for (const auto& [name, p] : ps) out.push_back(p->value);
    return out;
}

void restore(const nn::ParamList& ps, const std::vector<Tensor>& snap) {
    for (size_t i = 0; i < ps.size(); ++i) ps[i].second->value = snap[i];
}

size_t response_token_count(const nn::Vocab& vocab, const std::string& response) {
    return vocab.encode(response).size() + 1;  // + eos
}

}  // namespace

GenTrainTrace train_generator(CapModel& model, const corpus::CorpusSplit& split,
                              const HistoryProvider& histories, FusionMode mode,
                              const GenTrainOptions& opts) {
    std::vector<SampleRef> train = gather_samples(split, split.train_users);
    if (train.empty()) throw std::invalid_argument("train_generator: empty training set");
    std::vector<corpus::Sample> valid;
    for (const auto& u : split.valid_users) {
        auto it = split.samples.find(u);
        if (it == split.samples.end()) continue;
        for (const auto& s : it->second.training) valid.push_back(s);
    }

    nn::ParamList params = model.trainable_params();
    nn::AdamWState state;
    nn::AdamWConfig adam;
    adam.weight_decay = opts.weight_decay;
    const size_t batch = std::max<size_t>(1, opts.batch_size);
    const size_t steps_per_epoch = (train.size() + batch - 1) / batch;
    const size_t total_steps = opts.epochs * steps_per_epoch;

    GenTrainTrace trace;
    Real best_valid = std::numeric_limits<Real>::infinity();
    std::vector<Tensor> best_params = snapshot(params);
    Rng order_rng(opts.seed);
    size_t step = 0;
    for (size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::vector<SampleRef> order = train;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
        Real epoch_nll = 0;
        size_t epoch_tokens = 0;
        size_t bi = 0;
        while (bi < order.size()) {
            nn::zero_grads(params);
            size_t in_batch = 0;
            for (; in_batch < batch && bi < order.size(); ++in_batch, ++bi) {
                const SampleRef& ref = order[bi];
                const std::vector<std::string> retrieved =
                    mode == FusionMode::none ? std::vector<std::string>{}
                                             : histories(*ref.user, *ref.sample);
                ad::NodePtr loss =
                    model.nll(ref.sample->context, retrieved, ref.sample->response, mode);
                const size_t n_tok = response_token_count(model.vocab, ref.sample->response);
                epoch_nll += loss->scalar() * static_cast<Real>(n_tok);
                epoch_tokens += n_tok;
                ad::backward(loss);
            }
            // average accumulated gradients over the batch
            if (in_batch > 1) {
                const Real inv = Real(1) / static_cast<Real>(in_batch);
                for (auto& [name, p] : params)
                    for (Real& g : p->grad.data) g *= inv;
            }
            adamw_step(params, state, nn::linear_lr(step, total_steps, opts.lr), adam);
            ++step;
        }
        trace.epoch_train_nll.push_back(epoch_nll / static_cast<Real>(epoch_tokens));
        Real valid_ppl = std::numeric_limits<Real>::quiet_NaN();
        if (!valid.empty()) {
            valid_ppl = perplexity(model, valid, histories, mode);
            if (valid_ppl < best_valid) {
                best_valid = valid_ppl;
                best_params = snapshot(params);
                trace.best_epoch = epoch;
            }
        }
        trace.epoch_valid_ppl.push_back(valid_ppl);
    }
    if (!valid.empty()) restore(params, best_params);
    return trace;
}

Real perplexity(const CapModel& model, const std::vector<corpus::Sample>& samples,
                const HistoryProvider& histories, FusionMode mode) {
    if (samples.empty()) throw std::invalid_argument("perplexity: empty sample list");
    Real total = 0;
    size_t tokens = 0;
    for (const auto& s : samples) {
        const std::vector<std::string> retrieved =
            mode == FusionMode::none ? std::vector<std::string>{} : histories(s.user_id, s);
        const Real nll = model.nll(s.context, retrieved, s.response, mode)->scalar();
        const size_t n_tok = response_token_count(model.vocab, s.response);
        total += nll * static_cast<Real>(n_tok);
        tokens += n_tok;
    }
    return std::exp(total / static_cast<Real>(tokens));
}

}  // namespace recap::prefgen
