#pragma once

#include <vector>

#include "recap/tokenizer.hpp"
#include "recap/transformer.hpp"

namespace recap::retriever {

struct PretrainOptions {
    size_t epochs = 2;
    Real lr = Real(1e-3);
    uint64_t seed = 1;
    double mask_prob = 0.15;     // semantic objective
    Real triplet_margin = Real(0.4);  // style objective
    size_t max_triplets_per_epoch = 4000;
};

// Masked-token objective: mask ~15% of positions (pad id stands in for
// the mask token) and predict the original ids from the final states
// through the tied embedding.
nn::EncoderModel pretrain_semantic_encoder(const nn::Vocab& vocab,
                                           const nn::TransformerConfig& cfg,
                                           const std::vector<std::string>& texts,
                                           const PretrainOptions& opts,
                                           std::vector<Real>* loss_trace = nullptr,
                                           const std::string& name = "semantic_enc");

// Triplet objective over surface-profile groups: texts sharing the
// casing/contraction/punctuation profile are positives, others negatives;
// hinge on cosine with the configured margin.
nn::EncoderModel pretrain_style_encoder(const nn::Vocab& vocab, const nn::TransformerConfig& cfg,
                                        const std::vector<std::string>& texts,
                                        const PretrainOptions& opts,
                                        std::vector<Real>* loss_trace = nullptr,
                                        const std::string& name = "style_enc");

}  // namespace recap::retriever
