#include "recap/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "recap/optim.hpp"

namespace recap::retriever {

using ad::NodePtr;

const char* flavor_name(Flavor f) { return f == Flavor::style ? "style" : "semantic"; }

Flavor flavor_from_name(const std::string& name) {
    if (name == "style") return Flavor::style;
    if (name == "semantic") return Flavor::semantic;
    throw std::invalid_argument("unknown retriever flavor: " + name);
}

std::vector<int> tokenize_turns(const nn::Vocab& vocab, const std::vector<std::string>& turns,
                                size_t max_positions) {
    std::vector<int> ids;
    for (size_t i = 0; i < turns.size(); ++i) {
        if (i) ids.push_back(nn::Vocab::sep_id);
        const std::vector<int> t = vocab.encode(turns[i]);
        ids.insert(ids.end(), t.begin(), t.end());
    }
    if (ids.empty()) throw std::invalid_argument("tokenize_turns: empty text");
    if (ids.size() > max_positions)  // keep the newest tokens
        ids.erase(ids.begin(), ids.begin() + static_cast<ptrdiff_t>(ids.size() - max_positions));
    return ids;
}

RetrieverModel::RetrieverModel(Flavor fl, nn::Vocab vc, const nn::TransformerConfig& token_cfg,
                               const nn::TransformerConfig& utterance_cfg, size_t cap, Rng& rng)
    : flavor(fl), vocab(std::move(vc)), history_cap(cap) {
    if (token_cfg.d_model != utterance_cfg.d_model)
        throw std::invalid_argument("RetrieverModel: token and utterance d_model must match");
    if (!utterance_cfg.causal)
        throw std::invalid_argument("RetrieverModel: utterance transformer must be causal");
    if (token_cfg.vocab_size < vocab.size())
        throw std::invalid_argument("RetrieverModel: encoder vocab_size smaller than the vocab");
    token_encoder = nn::EncoderModel(token_cfg, "token_enc", rng);
    utterance_transformer = nn::TransformerStack(utterance_cfg, "utt", rng);
    const size_t d = token_cfg.d_model;
    p_table = ad::param("p_table", Tensor::randn({cap + 1, d}, rng, Real(0.02)));
    y_context = ad::param("y_context", Tensor::randn({1, d}, rng, Real(0.02)));
    y_response = ad::param("y_response", Tensor::randn({1, d}, rng, Real(0.02)));
    token_encoder.set_trainable(false);
}

UtteranceEmbedding RetrieverModel::embed_utterance(const std::string& text,
                                                   UtteranceEmbedding::Kind kind,
                                                   size_t position) const {
    if (text.empty()) throw std::invalid_argument("embed_utterance: empty text");
    const std::vector<int> ids =
        tokenize_turns(vocab, {text}, token_encoder.cfg.max_positions);
    UtteranceEmbedding e;
    e.vector = token_encoder.encode_pooled(ids)->value;
    e.kind = kind;
    e.position = position;
    return e;
}

Tensor RetrieverModel::embed_turns_frozen(const std::vector<std::string>& turns) const {
    std::string key;
    for (const auto& t : turns) {
        key += t;
        key.push_back('\x1e');
    }
    auto it = embed_cache_.find(key);
    if (it != embed_cache_.end()) return it->second;
    const std::vector<int> ids = tokenize_turns(vocab, turns, token_encoder.cfg.max_positions);
    Tensor v = token_encoder.encode_pooled(ids)->value;
    embed_cache_.emplace(std::move(key), v);
    return v;
}

RetrieverModel::Composed RetrieverModel::compose_inputs(
    const corpus::UserHistory& history, const std::vector<std::string>* current_context) const {
    const size_t t_pairs = history.pairs.size();
    if (t_pairs > history_cap)
        throw std::invalid_argument("compose_inputs: history length " + std::to_string(t_pairs) +
                                    " exceeds the position table (cap " +
                                    std::to_string(history_cap) + ")");

    auto embed = [&](const std::vector<std::string>& turns) -> NodePtr {
        if (train_token_encoder) {
            const std::vector<int> ids =
                tokenize_turns(vocab, turns, token_encoder.cfg.max_positions);
            return token_encoder.encode_pooled(ids);
        }
        return ad::constant(embed_turns_frozen(turns));
    };

    Composed out;
    std::vector<NodePtr> slots;
    for (size_t t = 0; t < t_pairs; ++t) {
        const corpus::Sample& pair = history.pairs[t];
        NodePtr pt = ad::slice_rows(p_table, t, 1);
        NodePtr ec = ad::add(ad::add(embed(pair.context), pt), y_context);
        NodePtr er = ad::add(ad::add(embed({pair.response}), pt), y_response);
        out.context_rows.push_back(slots.size());
        slots.push_back(ec);
        slots.push_back(er);
    }
    if (current_context) {
        if (current_context->empty())
            throw std::invalid_argument("compose_inputs: current context must be non-empty");
        NodePtr pt = ad::slice_rows(p_table, t_pairs, 1);
        slots.push_back(ad::add(ad::add(embed(*current_context), pt), y_context));
        out.has_current = true;
    }
    if (slots.empty())
        throw std::invalid_argument("compose_inputs: nothing to compose (empty history, no context)");
    out.seq = ad::concat_rows(slots);
    out.n_pairs = t_pairs;
    return out;
}

ad::NodePtr RetrieverModel::predict_response_embeddings(const Composed& inputs) const {
    NodePtr h = utterance_transformer.forward(inputs.seq);
    std::vector<size_t> rows = inputs.context_rows;
    if (inputs.has_current) rows.push_back(h->value.rows() - 1);
    return ad::select_rows(h, rows);
}

Tensor RetrieverModel::predict_query(const corpus::UserHistory& history,
                                     const std::vector<std::string>& current_context) const {
    Composed c = compose_inputs(history, &current_context);
    NodePtr h = utterance_transformer.forward(c.seq);
    const size_t last = h->value.rows() - 1;
    Tensor q({1, h->value.cols()});
    std::copy(h->value.row_ptr(last), h->value.row_ptr(last) + h->value.cols(), q.data.begin());
    return q;
}

Tensor RetrieverModel::target_embedding(const std::string& response) const {
    return embed_turns_frozen({response});
}

void RetrieverModel::set_train_token_encoder(bool trainable) {
    train_token_encoder = trainable;
    token_encoder.set_trainable(trainable);
}

nn::ParamList RetrieverModel::trainable_params() const {
    nn::ParamList ps;
    if (train_token_encoder) token_encoder.collect_params(ps);
    utterance_transformer.collect_params(ps);
    ps.emplace_back(p_table->name, p_table);
    ps.emplace_back(y_context->name, y_context);
    ps.emplace_back(y_response->name, y_response);
    return ps;
}

nn::ParamList RetrieverModel::all_params() const {
    nn::ParamList ps;
    token_encoder.collect_params(ps);
    utterance_transformer.collect_params(ps);
    ps.emplace_back(p_table->name, p_table);
    ps.emplace_back(y_context->name, y_context);
    ps.emplace_back(y_response->name, y_response);
    return ps;
}

void RetrieverModel::save(const std::string& path, const std::string& config_json) const {
    nn::ParamList ps = all_params();
    const std::string tag =
        flavor == Flavor::style ? "retriever_style" : "retriever_semantic";
    nlohmann::json j;
    j["token_encoder"] = nlohmann::json::parse(nn::config_to_json(token_encoder.cfg));
    j["utterance_transformer"] =
        nlohmann::json::parse(nn::config_to_json(utterance_transformer.cfg));
    j["history_cap"] = history_cap;
    j["run_config"] = config_json.empty() ? nlohmann::json(nullptr)
                                          : nlohmann::json::parse(config_json);
    nn::save_checkpoint(path, tag, ps, &vocab, j.dump());
}

RetrieverModel RetrieverModel::load(const std::string& path, Flavor expected_flavor) {
    const std::string tag =
        expected_flavor == Flavor::style ? "retriever_style" : "retriever_semantic";
    nn::Checkpoint ckpt = nn::load_checkpoint(path, tag);
    if (!ckpt.vocab) throw std::runtime_error("retriever checkpoint missing vocab: " + path);

    nlohmann::json j = nlohmann::json::parse(ckpt.config_json);
    nn::TransformerConfig token_cfg = nn::config_from_json(j.at("token_encoder").dump());
    nn::TransformerConfig utt_cfg = nn::config_from_json(j.at("utterance_transformer").dump());
    const size_t cap = j.at("history_cap").get<size_t>();

    Rng rng(0);  // overwritten immediately by the checkpoint tensors
    RetrieverModel model(expected_flavor, *ckpt.vocab, token_cfg, utt_cfg, cap, rng);
    nn::ParamList ps = model.all_params();
    nn::restore_params(ckpt, ps);
    model.token_encoder.set_trainable(false);
    return model;
}

RetrievalIndex build_index(const RetrieverModel* style_model,
                           const RetrieverModel* semantic_model,
                           const corpus::UserHistory& history) {
    if (!style_model && !semantic_model)
        throw std::invalid_argument("build_index: need at least one retriever model");
    RetrievalIndex index;
    index.user_id = history.user_id;
    index.has_style = style_model != nullptr;
    index.has_semantic = semantic_model != nullptr;
    for (size_t i = 0; i < history.pairs.size(); ++i) {
        RetrievalEntry e;
        e.response = history.pairs[i].response;
        e.position = i;
        if (style_model) e.style_vec = style_model->target_embedding(e.response);
        if (semantic_model) e.semantic_vec = semantic_model->target_embedding(e.response);
        index.entries.push_back(std::move(e));
    }
    return index;
}

namespace {

double cosine(const Tensor& a, const Tensor& b) {
    const Real na = l2_norm(a.data), nb = l2_norm(b.data);
    if (na == Real(0) || nb == Real(0))
        throw std::invalid_argument("retrieve: zero-norm vector in cosine");
    return static_cast<double>(dot(a.data.data(), b.data.data(), a.data.size())) /
           (static_cast<double>(na) * static_cast<double>(nb));
}

// entry order: descending similarity, ties to older (smaller) position
std::vector<size_t> ranked_entries(const RetrievalIndex& index, const Tensor& query,
                                   Flavor flavor) {
    if (query.data.empty()) throw std::invalid_argument("retrieve: empty query vector");
    if (flavor == Flavor::style && !index.has_style)
        throw std::invalid_argument("retrieve: index has no style vectors");
    if (flavor == Flavor::semantic && !index.has_semantic)
        throw std::invalid_argument("retrieve: index has no semantic vectors");
    std::vector<std::pair<double, size_t>> scored;
    scored.reserve(index.entries.size());
    for (size_t i = 0; i < index.entries.size(); ++i) {
        const Tensor& v = flavor == Flavor::style ? index.entries[i].style_vec
                                                  : index.entries[i].semantic_vec;
        if (v.data.size() != query.data.size())
            throw std::invalid_argument("retrieve: query dimension mismatch");
        scored.emplace_back(cosine(query, v), i);
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return index.entries[a.second].position < index.entries[b.second].position;
    });
    std::vector<size_t> order;
    order.reserve(scored.size());
    for (const auto& [s, i] : scored) order.push_back(i);
    return order;
}

}  // namespace

std::vector<std::string> retrieve(const RetrievalIndex& index, const Tensor& query, Flavor flavor,
                                  size_t k) {
    if (k < 1) throw std::invalid_argument("retrieve: k must be >= 1");
    const std::vector<size_t> order = ranked_entries(index, query, flavor);
    std::vector<std::string> out;
    for (size_t i = 0; i < order.size() && i < k; ++i)
        out.push_back(index.entries[order[i]].response);
    return out;
}

std::vector<std::string> retrieve_mixed(const RetrievalIndex& index, const Tensor& style_query,
                                        const Tensor& semantic_query, size_t k) {
    if (k % 2 != 0) throw std::invalid_argument("retrieve_mixed: k must be even");
    if (k == 0) throw std::invalid_argument("retrieve_mixed: k must be >= 2");
    const size_t half = k / 2;
    const std::vector<size_t> style_order = ranked_entries(index, style_query, Flavor::style);
    const std::vector<size_t> sem_order = ranked_entries(index, semantic_query, Flavor::semantic);

    std::vector<size_t> picked;
    for (size_t i = 0; i < style_order.size() && picked.size() < half; ++i)
        picked.push_back(style_order[i]);
    const size_t style_count = picked.size();

    for (size_t i = 0; i < sem_order.size() && picked.size() < style_count + half; ++i) {
        const size_t cand = sem_order[i];
        if (std::find(picked.begin(), picked.end(), cand) != picked.end()) continue;
        picked.push_back(cand);
    }

    std::vector<std::string> out;
    out.reserve(picked.size());
    for (size_t i : picked) out.push_back(index.entries[i].response);
    return out;
}

ad::NodePtr sequence_loss(const RetrieverModel& model, const std::vector<corpus::Sample>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("sequence_loss: empty pair list");
    corpus::UserHistory h;
    h.user_id = pairs.front().user_id;
    h.pairs = pairs;
    RetrieverModel::Composed c = model.compose_inputs(h, nullptr);
    NodePtr preds = model.predict_response_embeddings(c);
    std::vector<NodePtr> losses;
    for (size_t t = 0; t < pairs.size(); ++t) {
        NodePtr pred = ad::slice_rows(preds, t, 1);
        NodePtr target = ad::constant(model.target_embedding(pairs[t].response));
        losses.push_back(ad::cosine_loss(pred, target));
    }
    return ad::sum_scalars(losses);
}

namespace {

// time-ordered history + training pairs, newest `cap` of them
std::vector<corpus::Sample> user_sequence(const corpus::CorpusSplit& split,
                                          const std::string& user, size_t cap) {
    auto it = split.samples.find(user);
    if (it == split.samples.end()) return {};
    std::vector<corpus::Sample> seq = it->second.history;
    seq.insert(seq.end(), it->second.training.begin(), it->second.training.end());
    if (seq.size() > cap)
        seq.erase(seq.begin(), seq.begin() + static_cast<ptrdiff_t>(seq.size() - cap));
    return seq;
}

Real dataset_loss(const RetrieverModel& model, const corpus::CorpusSplit& split,
                  const std::vector<std::string>& users) {
    Real total = 0;
    size_t slots = 0;
    for (const auto& u : users) {
        const auto seq = user_sequence(split, u, model.history_cap);
        if (seq.empty()) continue;
        total += sequence_loss(model, seq)->scalar();
        slots += seq.size();
    }
    return slots ? total / static_cast<Real>(slots) : Real(0);
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

}  // namespace

TrainTrace train_retriever(RetrieverModel& model, const corpus::CorpusSplit& split,
                           const TrainOptions& opts) {
    std::vector<std::string> train_users;
    for (const auto& u : split.train_users)
        if (!user_sequence(split, u, model.history_cap).empty()) train_users.push_back(u);
    if (train_users.empty()) throw std::invalid_argument("train_retriever: empty training set");

    nn::ParamList params = model.trainable_params();
    nn::AdamWState state;
    nn::AdamWConfig adam;
    adam.weight_decay = opts.weight_decay;
    const size_t total_steps = opts.epochs * train_users.size();

    TrainTrace trace;
    Real best_valid = std::numeric_limits<Real>::infinity();
    std::vector<Tensor> best_params = snapshot(params);
    Rng order_rng(opts.seed);
    size_t step = 0;
    for (size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::vector<std::string> order = train_users;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
        Real epoch_loss = 0;
        size_t epoch_slots = 0;
        for (const auto& u : order) {
            const auto seq = user_sequence(split, u, model.history_cap);
            NodePtr loss = sequence_loss(model, seq);
            epoch_loss += loss->scalar();
            epoch_slots += seq.size();
            nn::zero_grads(params);
            ad::backward(loss);
            adamw_step(params, state, nn::linear_lr(step, total_steps, opts.lr), adam);
            ++step;
        }
        trace.epoch_train_loss.push_back(epoch_loss / static_cast<Real>(epoch_slots));
        const Real valid = dataset_loss(model, split, split.valid_users);
        trace.epoch_valid_loss.push_back(valid);
        if (valid < best_valid) {
            best_valid = valid;
            best_params = snapshot(params);
            trace.best_epoch = epoch;
        }
    }
    if (!split.valid_users.empty()) restore(params, best_params);
    return trace;
}

}  // namespace recap::retriever
