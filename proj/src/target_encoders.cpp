#include "recap/target_encoders.hpp"

#include <algorithm>
#include <map>

#include "recap/optim.hpp"
#include "recap/style_features.hpp"

namespace recap::retriever {

using ad::NodePtr;

namespace {

std::vector<std::vector<int>> tokenize_all(const nn::Vocab& vocab,
                                           const std::vector<std::string>& texts,
                                           size_t max_positions) {
    std::vector<std::vector<int>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::vector<int> ids = vocab.encode(t);
        if (ids.empty()) continue;
        if (ids.size() > max_positions) ids.resize(max_positions);
        out.push_back(std::move(ids));
    }
    if (out.empty()) throw std::invalid_argument("pretrain: no usable texts");
    return out;
}

}  // namespace

nn::EncoderModel pretrain_semantic_encoder(const nn::Vocab& vocab,
                                           const nn::TransformerConfig& cfg,
                                           const std::vector<std::string>& texts,
                                           const PretrainOptions& opts,
                                           std::vector<Real>* loss_trace, const std::string& name) {
    Rng rng(opts.seed);
    nn::EncoderModel enc(cfg, name, rng);
    auto seqs = tokenize_all(vocab, texts, cfg.max_positions);

    nn::ParamList params;
    enc.collect_params(params);
    nn::AdamWState state;
    nn::AdamWConfig adam;
    adam.weight_decay = Real(0.01);
    const size_t total_steps = opts.epochs * seqs.size();
    size_t step = 0;
    for (size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::vector<size_t> order(seqs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        Real epoch_loss = 0;
        size_t n_losses = 0;
        for (size_t si : order) {
            const std::vector<int>& ids = seqs[si];
            std::vector<int> masked = ids;
            std::vector<uint8_t> mask(ids.size(), 0);
            size_t n_masked = 0;
            for (size_t i = 0; i < ids.size(); ++i) {
                if (rng.uniform() < opts.mask_prob) {
                    masked[i] = nn::Vocab::pad_id;
                    mask[i] = 1;
                    ++n_masked;
                }
            }
            if (n_masked == 0) {  // always mask at least one position
                const size_t i = rng.uniform_int(ids.size());
                masked[i] = nn::Vocab::pad_id;
                mask[i] = 1;
            }
            NodePtr states = enc.encode(masked);
            NodePtr logits = ad::matmul_nt(states, enc.emb.tok);
            NodePtr loss = ad::cross_entropy(logits, ids, mask);
            epoch_loss += loss->scalar();
            ++n_losses;
            nn::zero_grads(params);
            ad::backward(loss);
            adamw_step(params, state, nn::linear_lr(step, total_steps, opts.lr), adam);
            ++step;
        }
        if (loss_trace) loss_trace->push_back(epoch_loss / static_cast<Real>(n_losses));
    }
    enc.set_trainable(false);
    return enc;
}

nn::EncoderModel pretrain_style_encoder(const nn::Vocab& vocab, const nn::TransformerConfig& cfg,
                                        const std::vector<std::string>& texts,
                                        const PretrainOptions& opts,
                                        std::vector<Real>* loss_trace, const std::string& name) {
    Rng rng(opts.seed);
    nn::EncoderModel enc(cfg, name, rng);

    // group usable texts by surface profile
    std::map<std::string, std::vector<size_t>> groups;
    std::vector<std::vector<int>> seqs;
    for (const auto& t : texts) {
        std::vector<int> ids = vocab.encode(t);
        if (ids.empty()) continue;
        if (ids.size() > cfg.max_positions) ids.resize(cfg.max_positions);
        groups[evalsuite::surface_profile_key(t)].push_back(seqs.size());
        seqs.push_back(std::move(ids));
    }
    std::vector<const std::vector<size_t>*> usable;
    for (const auto& [key, members] : groups)
        if (members.size() >= 2) usable.push_back(&members);
    if (usable.empty() || groups.size() < 2)
        throw std::invalid_argument(
            "pretrain_style_encoder: need at least two surface-profile groups");

    nn::ParamList params;
    enc.collect_params(params);
    nn::AdamWState state;
    nn::AdamWConfig adam;
    adam.weight_decay = Real(0.01);
    const size_t per_epoch = std::min(opts.max_triplets_per_epoch, seqs.size());
    const size_t total_steps = opts.epochs * per_epoch;
    size_t step = 0;
    for (size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        Real epoch_loss = 0;
        for (size_t ti = 0; ti < per_epoch; ++ti) {
            const auto& group = *usable[rng.uniform_int(usable.size())];
            const size_t ai = group[rng.uniform_int(group.size())];
            size_t pi = ai;
            while (pi == ai) pi = group[rng.uniform_int(group.size())];
            size_t ni = ai;
            // negative from any other profile group
            while (std::find(group.begin(), group.end(), ni) != group.end())
                ni = rng.uniform_int(seqs.size());

            NodePtr a = ad::mean_rows(enc.encode(seqs[ai]));
            NodePtr p = ad::mean_rows(enc.encode(seqs[pi]));
            NodePtr n = ad::mean_rows(enc.encode(seqs[ni]));
            // hinge(margin - cos(a,p) + cos(a,n)) written with 1-cos losses
            NodePtr l_ap = ad::cosine_loss(a, p);
            NodePtr l_an = ad::cosine_loss(a, n);
            NodePtr loss = ad::relu(ad::add(ad::sub(l_ap, l_an),
                                            ad::constant(Tensor::scalar(opts.triplet_margin))));
            epoch_loss += loss->scalar();
            if (loss->scalar() > Real(0)) {
                nn::zero_grads(params);
                ad::backward(loss);
                adamw_step(params, state, nn::linear_lr(step, total_steps, opts.lr), adam);
            }
            ++step;
        }
        if (loss_trace) loss_trace->push_back(epoch_loss / static_cast<Real>(per_epoch));
    }
    enc.set_trainable(false);
    return enc;
}

}  // namespace recap::retriever
