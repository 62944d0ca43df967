// Acceptance suite: one pass/fail line per criterion. Run with no
// arguments for the full battery or with criterion numbers to select.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "recap/evalsuite.hpp"
#include "recap/optim.hpp"
#include "recap/pipeline.hpp"
#include "recap/prefix_generator.hpp"
#include "recap/retriever.hpp"
#include "recap/stats.hpp"
#include "recap/synth.hpp"
#include "recap/target_encoders.hpp"
#include "recap/traits.hpp"

using namespace recap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using CriterionFn = std::function<Outcome()>;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << std::fixed << v;
    return ss.str();
}

// ---------------------------------------------------------------- helpers

nn::TransformerConfig enc_config(size_t d, size_t layers, size_t heads, size_t vocab,
                                 size_t max_pos, bool causal) {
    nn::TransformerConfig c;
    c.d_model = d;
    c.n_heads = heads;
    c.n_layers = layers;
    c.ffn_mult = 2;
    c.max_positions = max_pos;
    c.vocab_size = vocab;
    c.causal = causal;
    return c;
}

corpus::Sample make_pair(const std::string& user, const std::string& ctx, const std::string& resp,
                         int64_t ts) {
    corpus::Sample s;
    s.user_id = user;
    s.conversation_id = "c" + std::to_string(ts);
    s.timestamp = ts;
    s.context = {ctx};
    s.response = resp;
    return s;
}

void randomize(const nn::ParamList& params, Rng& rng, double std_dev = 0.4) {
    for (const auto& [name, p] : params)
        for (Real& v : p->value.data) v = static_cast<Real>(rng.gaussian() * std_dev);
}

struct FdResult {
    double worst = 0.0;
    size_t probes = 0;
};

FdResult fd_check(const std::function<ad::NodePtr()>& loss_fn, const nn::ParamList& params,
                  size_t n_probes, Rng& rng, double h = 1e-5) {
    ad::NodePtr loss = loss_fn();
    for (auto& [name, p] : params) p->zero_grad();
    ad::backward(loss);
    FdResult res;
    for (size_t probe = 0; probe < n_probes; ++probe) {
        const auto& [name, p] = params[rng.uniform_int(params.size())];
        const size_t i = rng.uniform_int(p->value.numel());
        const Real orig = p->value.data[i];
        p->value.data[i] = orig + static_cast<Real>(h);
        const double fp = static_cast<double>(loss_fn()->scalar());
        p->value.data[i] = orig - static_cast<Real>(h);
        const double fm = static_cast<double>(loss_fn()->scalar());
        p->value.data[i] = orig;
        const double fd = (fp - fm) / (2 * h);
        const double an = p->grad.data.empty() ? 0.0 : static_cast<double>(p->grad.data[i]);
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        res.worst = std::max(res.worst, rel);
        ++res.probes;
    }
    return res;
}

// ------------------------------------------------------------ criterion 1

Outcome criterion_gradient_suite() {
    // (a) retriever cosine loss through utterance embedding + hierarchy
    Rng rng(1001);
    nn::Vocab vocab = nn::Vocab::train({"hello there what a day", "more words to merge"}, 280);
    retriever::RetrieverModel rmodel(retriever::Flavor::style, vocab,
                                     enc_config(8, 2, 2, 280, 32, false),
                                     enc_config(8, 2, 2, 1, 32, true), 10, rng);
    rmodel.set_train_token_encoder(true);
    std::vector<corpus::Sample> pairs = {make_pair("u", "hello there", "what a day", 1),
                                         make_pair("u", "more words", "to merge", 2)};
    nn::ParamList rparams = rmodel.trainable_params();
    randomize(rparams, rng);
    auto rloss = [&]() { return retriever::sequence_loss(rmodel, pairs); };
    const FdResult ra = fd_check(rloss, rparams, 20, rng);

    // (b) generator NLL through CAP projections and the prefix-fused decoder
    Rng grng(1002);
    prefgen::CapModel gmodel(enc_config(8, 2, 2, 280, 48, false),
                             enc_config(8, 2, 2, 280, 48, true), 3, 4, vocab, grng);
    nn::ParamList gparams = gmodel.trainable_params();
    randomize(gparams, grng);
    auto gloss = [&]() {
        return gmodel.nll({"hello there"}, {"what a", "day more"}, "words to merge",
                          prefgen::FusionMode::prefix);
    };
    const FdResult rb = fd_check(gloss, gparams, 20, grng);

    Outcome out;
    out.pass = ra.worst < 1e-3 && rb.worst < 1e-3;
    out.detail = "retriever worst rel err " + fmt(ra.worst, 8) + " (" +
                 std::to_string(ra.probes) + " probes), generator worst rel err " +
                 fmt(rb.worst, 8) + " (" + std::to_string(rb.probes) + " probes), tol 1e-3";
    return out;
}

// ------------------------------------------------------------ criterion 2

Outcome criterion_prefix_zero() {
    size_t checked = 0;
    for (uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(2000 + trial);
        nn::DecoderModel dec(enc_config(16, 2, 4, 64, 32, true),
                             "dec" + std::to_string(trial), rng);
        const size_t len = 1 + rng.uniform_int(16);
        std::vector<int> ids;
        for (size_t i = 0; i < len; ++i) ids.push_back(static_cast<int>(rng.uniform_int(64)));
        auto plain = dec.forward(ids);
        nn::PrefixBlock empty = nn::PrefixBlock::empty(2, 16);
        auto fused = dec.forward(ids, &empty);
        if (plain->value.data != fused->value.data)
            return {false, "logits diverged on trial " + std::to_string(trial)};
        ++checked;
    }
    return {true, std::to_string(checked) + "/100 random inputs bit-identical with N=0 prefix"};
}

// ------------------------------------------------------------ criterion 3

Outcome criterion_causal_invariance() {
    // (a) decoder logits at position i are exactly invariant to suffix edits
    Rng rng(3001);
    nn::DecoderModel dec(enc_config(16, 2, 4, 64, 48, true), "dec", rng);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t len = 2 + rng.uniform_int(14);
        std::vector<int> ids;
        for (size_t i = 0; i < len; ++i) ids.push_back(static_cast<int>(rng.uniform_int(64)));
        auto base = dec.forward(ids);
        const size_t cut = rng.uniform_int(len - 1);
        std::vector<int> edited = ids;
        for (size_t j = cut + 1; j < len; ++j)
            edited[j] = static_cast<int>(rng.uniform_int(64));
        auto out = dec.forward(edited);
        for (size_t pos = 0; pos <= cut; ++pos)
            for (size_t v = 0; v < 64; ++v)
                if (out->value.at(pos, v) != base->value.at(pos, v))
                    return {false, "decoder leak at trial " + std::to_string(trial)};
    }

    // (b) retriever prediction at slot t invariant to later-slot edits
    Rng rrng(3002);
    nn::Vocab vocab = nn::Vocab::train({"alpha beta gamma delta epsilon zeta"}, 280);
    retriever::RetrieverModel model(retriever::Flavor::style, vocab,
                                    enc_config(16, 2, 4, 280, 32, false),
                                    enc_config(16, 2, 4, 1, 64, true), 12, rrng);
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
    for (int trial = 0; trial < 100; ++trial) {
        corpus::UserHistory h;
        h.user_id = "u";
        const size_t t_pairs = 2 + rrng.uniform_int(5);
        for (size_t i = 0; i < t_pairs; ++i)
            h.pairs.push_back(make_pair("u", words[rrng.uniform_int(words.size())],
                                        words[rrng.uniform_int(words.size())],
                                        static_cast<int64_t>(i)));
        auto base = model.predict_response_embeddings(model.compose_inputs(h, nullptr));
        const size_t t = rrng.uniform_int(t_pairs - 1);  // perturb strictly after slot t
        corpus::UserHistory edited = h;
        edited.pairs[t].response = "perturbed response text";
        for (size_t j = t + 1; j < t_pairs; ++j) {
            edited.pairs[j].context = {"perturbed context"};
            edited.pairs[j].response = "perturbed again";
        }
        auto out = model.predict_response_embeddings(model.compose_inputs(edited, nullptr));
        for (size_t slot = 0; slot <= t; ++slot)
            for (size_t j = 0; j < 16; ++j)
                if (out->value.at(slot, j) != base->value.at(slot, j))
                    return {false, "retriever leak at trial " + std::to_string(trial)};
    }
    return {true, "decoder and retriever exactly causal on 100 random cases each"};
}

// ------------------------------------------------------------ criterion 4

std::vector<std::string> oracle_topk(const retriever::RetrievalIndex& index, const Tensor& query,
                                     retriever::Flavor flavor, size_t k) {
    std::vector<std::pair<double, size_t>> scored;
    for (size_t i = 0; i < index.entries.size(); ++i) {
        const Tensor& v = flavor == retriever::Flavor::style ? index.entries[i].style_vec
                                                             : index.entries[i].semantic_vec;
        double num = 0, qn = 0, vn = 0;
        for (size_t j = 0; j < v.data.size(); ++j) {
            num += query.data[j] * v.data[j];
            qn += query.data[j] * query.data[j];
            vn += v.data[j] * v.data[j];
        }
        scored.emplace_back(num / std::sqrt(qn * vn), i);
    }
    std::stable_sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return index.entries[a.second].position < index.entries[b.second].position;
    });
    std::vector<std::string> out;
    for (size_t i = 0; i < scored.size() && i < k; ++i)
        out.push_back(index.entries[scored[i].second].response);
    return out;
}

Outcome criterion_retrieval_oracle() {
    Rng rng(4001);
    retriever::RetrievalIndex index;
    index.user_id = "u";
    index.has_style = index.has_semantic = true;
    for (size_t i = 0; i < 1000; ++i) {
        retriever::RetrievalEntry e;
        e.response = "r" + std::to_string(i);
        e.position = i;
        e.style_vec = Tensor::randn({1, 16}, rng, 1.0);
        e.semantic_vec = Tensor::randn({1, 16}, rng, 1.0);
        index.entries.push_back(std::move(e));
    }
    size_t comparisons = 0;
    for (size_t k : {size_t(1), size_t(5), size_t(10), size_t(1001)}) {
        for (int q = 0; q < 5; ++q) {
            const Tensor query = Tensor::randn({1, 16}, rng, 1.0);
            for (auto flavor : {retriever::Flavor::style, retriever::Flavor::semantic}) {
                if (retriever::retrieve(index, query, flavor, k) !=
                    oracle_topk(index, query, flavor, k))
                    return {false, "top-k mismatch at k=" + std::to_string(k)};
                ++comparisons;
            }
        }
    }

    // mixed: style half then semantic ranking with duplicate replacement
    for (int q = 0; q < 20; ++q) {
        const Tensor qs = Tensor::randn({1, 16}, rng, 1.0);
        const Tensor qm = Tensor::randn({1, 16}, rng, 1.0);
        const size_t k = 10;
        const auto style_all =
            oracle_topk(index, qs, retriever::Flavor::style, index.entries.size());
        const auto sem_all =
            oracle_topk(index, qm, retriever::Flavor::semantic, index.entries.size());
        std::vector<std::string> expected(style_all.begin(), style_all.begin() + k / 2);
        for (const auto& cand : sem_all) {
            if (expected.size() == k) break;
            if (std::find(expected.begin(), expected.end(), cand) != expected.end()) continue;
            expected.push_back(cand);
        }
        if (retriever::retrieve_mixed(index, qs, qm, k) != expected)
            return {false, "mixed merge mismatch on query " + std::to_string(q)};
        ++comparisons;
    }
    return {true, std::to_string(comparisons) + " top-k/mixed queries equal the exhaustive scan"};
}

// ------------------------------------------------------------ criterion 5

double oracle_bleu(const std::string& cand_s, const std::string& ref_s, int max_n) {
    const auto cand = evalsuite::tokenize_ws_lower(cand_s);
    const auto ref = evalsuite::tokenize_ws_lower(ref_s);
    if (cand.empty()) return 0.0;
    double log_sum = 0;
    for (int n = 1; n <= max_n; ++n) {
        std::map<std::string, int> cc, rc;
        for (size_t i = 0; i + n <= cand.size(); ++i) {
            std::string g;
            for (int k = 0; k < n; ++k) g += cand[i + k] + "\x1f";
            ++cc[g];
        }
        for (size_t i = 0; i + n <= ref.size(); ++i) {
            std::string g;
            for (int k = 0; k < n; ++k) g += ref[i + k] + "\x1f";
            ++rc[g];
        }
        int clipped = 0, total = 0;
        for (const auto& [g, c] : cc) {
            total += c;
            clipped += std::min(c, rc.count(g) ? rc[g] : 0);
        }
        if (total == 0 || clipped == 0) return 0.0;
        log_sum += std::log(double(clipped) / double(total));
    }
    double score = std::exp(log_sum / max_n);
    if (cand.size() < ref.size())
        score *= std::exp(1.0 - double(ref.size()) / double(cand.size()));
    return score;
}

double oracle_rouge(const std::string& cand_s, const std::string& ref_s) {
    const auto a = evalsuite::tokenize_ws_lower(cand_s);
    const auto b = evalsuite::tokenize_ws_lower(ref_s);
    if (a.empty() || b.empty()) return 0.0;
    std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (size_t i = 1; i <= a.size(); ++i)
        for (size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                            : std::max(dp[i - 1][j], dp[i][j - 1]);
    const int lcs = dp[a.size()][b.size()];
    if (lcs == 0) return 0.0;
    const double p = double(lcs) / a.size(), r = double(lcs) / b.size();
    return 2 * p * r / (p + r);
}

Outcome criterion_metric_oracles() {
    if (std::abs(evalsuite::bleu("the the the", "the cat", 1).value - 1.0 / 3.0) > 1e-12)
        return {false, "BLEU-1 worked example failed"};
    if (std::abs(evalsuite::rouge_l("a b c d", "a c b d").value - 0.75) > 1e-12)
        return {false, "ROUGE-L worked example failed"};

    const std::vector<std::string> pool = {"a",   "b",   "c",   "the", "cat", "dog",
                                           "ran", "sat", "big", "red", "x",   "y"};
    Rng rng(5001);
    auto sentence = [&]() {
        const size_t len = 1 + rng.uniform_int(9);
        std::string s;
        for (size_t i = 0; i < len; ++i) {
            if (i) s += ' ';
            s += pool[rng.uniform_int(pool.size())];
        }
        return s;
    };
    for (int i = 0; i < 1000; ++i) {
        const std::string cand = sentence(), ref = sentence();
        if (std::abs(evalsuite::bleu(cand, ref, 1).value - oracle_bleu(cand, ref, 1)) > 1e-12 ||
            std::abs(evalsuite::bleu(cand, ref, 2).value - oracle_bleu(cand, ref, 2)) > 1e-12)
            return {false, "BLEU mismatch on pair " + std::to_string(i)};
        if (std::abs(evalsuite::rouge_l(cand, ref).value - oracle_rouge(cand, ref)) > 1e-12)
            return {false, "ROUGE-L mismatch on pair " + std::to_string(i)};
    }
    return {true, "BLEU-1/2 and ROUGE-L equal brute force on 1000 pairs; worked examples exact"};
}

// ------------------------------------------------------------ criterion 6

Outcome criterion_overfit() {
    // single-pair retriever: cosine loss < 0.05 within 200 steps
    Rng rng(6001);
    nn::Vocab vocab = nn::Vocab::train({"hello there", "general reply"}, 270);
    retriever::RetrieverModel rmodel(retriever::Flavor::style, vocab,
                                     enc_config(16, 2, 4, 270, 32, false),
                                     enc_config(16, 2, 4, 1, 32, true), 10, rng);
    corpus::CorpusSplit rsplit;
    rsplit.train_users = {"u"};
    corpus::UserSamples rus;
    rus.training = {make_pair("u", "hello there", "general reply", 1)};
    rsplit.samples.emplace("u", rus);
    retriever::TrainOptions ropts;
    ropts.epochs = 200;  // one user sequence per epoch = 200 steps
    ropts.lr = Real(3e-3);
    ropts.weight_decay = Real(0);
    ropts.seed = 5;
    const auto rtrace = retriever::train_retriever(rmodel, rsplit, ropts);
    const double rloss = static_cast<double>(rtrace.epoch_train_loss.back());

    // 20-sample generator, prefix mode: train ppl < 2.0 within 500 steps
    const char* ctxs[] = {"how was your day",    "did you see the game", "any plans tonight",
                          "what are you reading", "is it raining there",  "how is the project",
                          "want to grab lunch",   "did the package arrive",
                          "how did the test go",  "are you coming over"};
    const char* resps[] = {"pretty good thanks",  "yeah what a finish", "just staying in",
                           "an old mystery novel", "pouring all morning", "nearly done now",
                           "sure where at",        "came this morning",  "better than expected",
                           "maybe later tonight"};
    std::vector<std::string> texts;
    corpus::CorpusSplit gsplit;
    corpus::UserSamples ua, ub;
    for (int i = 0; i < 10; ++i) {
        texts.push_back(ctxs[i]);
        texts.push_back(resps[i]);
        ua.training.push_back(make_pair("a", ctxs[i], resps[i], i));
        ub.training.push_back(make_pair("b", std::string(ctxs[i]) + " then",
                                        std::string(resps[i]) + " indeed", 100 + i));
        texts.push_back(ub.training.back().response);
    }
    gsplit.train_users = {"a", "b"};
    gsplit.samples.emplace("a", ua);
    gsplit.samples.emplace("b", ub);
    nn::Vocab gvocab = nn::Vocab::train(texts, 330);
    Rng grng(6002);
    prefgen::CapModel gmodel(enc_config(64, 2, 4, 330, 96, false),
                             enc_config(64, 2, 4, 330, 96, true), 4, 10, gvocab, grng);
    prefgen::GenTrainOptions gopts;
    gopts.epochs = 50;  // 20 samples at batch 2 = 10 steps/epoch = 500 steps
    gopts.batch_size = 2;
    gopts.lr = Real(3e-3);
    gopts.weight_decay = Real(0);
    gopts.seed = 6;
    auto histories = [&](const std::string&, const corpus::Sample& s) {
        return std::vector<std::string>{s.response};
    };
    const auto gtrace =
        prefgen::train_generator(gmodel, gsplit, histories, prefgen::FusionMode::prefix, gopts);
    const double gppl = std::exp(static_cast<double>(gtrace.epoch_train_nll.back()));

    Outcome out;
    out.pass = rloss < 0.05 && gppl < 2.0;
    out.detail = "retriever loss " + fmt(rloss) + " (< 0.05) after 200 steps, generator ppl " +
                 fmt(gppl) + " (< 2.0) after 500 steps";
    return out;
}

// ------------------------------------------------------------ criterion 7

struct SignaturePair {
    bool uppercase;
    evalsuite::ContractionClass contraction;
};

SignaturePair signature_pair_of(const std::string& text) {
    return {!evalsuite::is_all_lowercase(text), evalsuite::contraction_class(text)};
}

bool same_signature(const SignaturePair& a, const SignaturePair& b) {
    return a.uppercase == b.uppercase && a.contraction == b.contraction;
}

Outcome criterion_synthetic_personalization() {
    const std::string work = (fs::temp_directory_path() / "recap_acceptance_c7").string();
    fs::remove_all(work);
    fs::create_directories(work);

    cli::RunConfig cfg;
    cfg.out_dir = work;
    cfg.seed = 7;
    cfg.train_frac = 0.70;
    cfg.valid_frac = 0.05;
    cfg.test_frac = 0.25;
    cfg.d_model = 64;
    cfg.prefix_len = 8;
    cfg.vocab_size = 384;
    cfg.max_positions = 96;
    cfg.k = 4;
    cfg.epochs = 3;
    cfg.lr = 2e-3;
    cfg.pretrain_epochs = 2;
    cfg.pretrain_lr = 1e-3;
    cfg.top_p = 0.8;
    cfg.max_tokens = 40;

    cli::cmd_ingest_synth(cfg, 200, 24);
    cfg.data = work + "/synth_data.jsonl";
    const corpus::CorpusSplit split = cli::load_and_split(cfg);
    if (split.test_users.size() != 50)
        return {false,
                "expected 50 held-out users, got " + std::to_string(split.test_users.size())};

    cli::cmd_train_retriever(cfg, retriever::Flavor::style);
    const retriever::RetrieverModel style_model = retriever::RetrieverModel::load(
        cli::retriever_ckpt_path(cfg, retriever::Flavor::style), retriever::Flavor::style);

    // (a) style-flavor top-1 signature accuracy on pooled indices vs
    //     picking the most recent pool entry
    Rng pool_rng(701);
    size_t style_hits = 0, recency_hits = 0, n_eval = 0;
    std::vector<const corpus::Sample*> foreign;
    for (const auto& u : split.test_users) {
        const corpus::UserHistory own = corpus::history_of(split, u);
        if (own.pairs.empty()) continue;
        const SignaturePair sig = signature_pair_of(own.pairs.front().response);

        foreign.clear();
        for (const auto& v : split.test_users) {
            if (v == u) continue;
            for (const auto& s : split.samples.at(v).history)
                if (!same_signature(signature_pair_of(s.response), sig))
                    foreign.push_back(&s);
        }
        corpus::UserHistory pooled = own;
        for (int i = 0; i < 30; ++i)
            pooled.pairs.push_back(*foreign[pool_rng.uniform_int(foreign.size())]);
        std::sort(pooled.pairs.begin(), pooled.pairs.end(),
                  [](const corpus::Sample& a, const corpus::Sample& b) {
                      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                      return a.conversation_id < b.conversation_id;
                  });
        const retriever::RetrievalIndex index =
            retriever::build_index(&style_model, nullptr, pooled);

        const corpus::Sample& probe = split.samples.at(u).training.front();
        const Tensor query = style_model.predict_query(own, probe.context);
        const auto top1 = retriever::retrieve(index, query, retriever::Flavor::style, 1);
        if (!top1.empty() && same_signature(signature_pair_of(top1[0]), sig)) ++style_hits;
        if (same_signature(signature_pair_of(pooled.pairs.back().response), sig)) ++recency_hits;
        ++n_eval;
    }
    const double style_acc = double(style_hits) / double(n_eval);
    const double recency_acc = double(recency_hits) / double(n_eval);

    // (b) prefix-mode generation matches planted habits better than mode none
    cli::cmd_train_generator(cfg, prefgen::FusionMode::prefix, "style");
    cli::cmd_train_generator(cfg, prefgen::FusionMode::none, "recency");

    cli::GenerateOptions gen_prefix;
    gen_prefix.generator_path =
        cli::generator_ckpt_path(cfg, prefgen::FusionMode::prefix, "style");
    gen_prefix.mode = prefgen::FusionMode::prefix;
    gen_prefix.history_source = "style";
    gen_prefix.out_path = work + "/gen_prefix.jsonl";
    cli::cmd_generate(cfg, gen_prefix);

    cli::GenerateOptions gen_none;
    gen_none.generator_path = cli::generator_ckpt_path(cfg, prefgen::FusionMode::none, "recency");
    gen_none.mode = prefgen::FusionMode::none;
    gen_none.out_path = work + "/gen_none.jsonl";
    cli::cmd_generate(cfg, gen_none);

    auto style_match_rate = [&](const std::string& path) {
        std::ifstream f(path);
        std::string line;
        double total = 0;
        size_t n = 0;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            const std::string gen = j.at("generated").get<std::string>();
            const std::string ref = j.at("reference").get<std::string>();
            const double casing =
                evalsuite::is_all_lowercase(gen) == evalsuite::is_all_lowercase(ref) ? 1 : 0;
            const double contraction =
                evalsuite::contraction_class(gen) == evalsuite::contraction_class(ref) ? 1 : 0;
            total += 0.5 * (casing + contraction);
            ++n;
        }
        return n ? total / double(n) : 0.0;
    };
    const double prefix_rate = style_match_rate(work + "/gen_prefix.jsonl");
    const double none_rate = style_match_rate(work + "/gen_none.jsonl");

    Outcome out;
    out.pass = style_acc >= 0.9 && recency_acc <= 0.6 && prefix_rate >= none_rate + 0.10;
    out.detail = "retrieval signature acc " + fmt(style_acc) + " (>= 0.9) vs recency " +
                 fmt(recency_acc) + " (<= 0.6); generation style match prefix " +
                 fmt(prefix_rate) + " vs none " + fmt(none_rate) + " (gap >= 0.10)";
    return out;
}

// ------------------------------------------------------------ criterion 8

Outcome criterion_traits() {
    // noiseless linear age: one-hot documents, age linear in the marker id
    std::vector<corpus::TraitRecord> age_records;
    for (int i = 1; i <= 12; ++i) {
        corpus::TraitRecord r;
        r.user_id = "u" + std::to_string(i);
        r.responses = {"marker" + std::to_string(i)};
        r.age = 2.0 * i;
        age_records.push_back(r);
    }
    const auto age_model = evalsuite::fit_traits(age_records, evalsuite::TraitTask::age);
    const auto age_eval = evalsuite::eval_traits(age_model, age_records);
    if (std::abs(age_eval.score - 1.0) > 1e-6)
        return {false, "age pearson " + fmt(age_eval.score, 8) + " not 1.0 +- 1e-6"};

    // separable gender with C=10: training F1 = 1
    std::vector<corpus::TraitRecord> gender_records;
    for (int i = 0; i < 40; ++i) {
        corpus::TraitRecord r;
        r.user_id = "g" + std::to_string(i);
        r.responses = {i % 2 ? "blue ocean waves crash tonight" : "red desert sand dunes far"};
        r.gender = i % 2;
        gender_records.push_back(r);
    }
    const auto gender_model = evalsuite::fit_traits(gender_records, evalsuite::TraitTask::gender);
    if (gender_model.c != 10.0) return {false, "gender C is not 10"};
    const auto gender_eval = evalsuite::eval_traits(gender_model, gender_records);
    if (gender_eval.score != 1.0)
        return {false, "separable gender F1 " + fmt(gender_eval.score) + " not 1.0"};

    // shuffled labels: held-out accuracy within 3 sigma of chance
    Rng rng(8001);
    std::vector<corpus::TraitRecord> train_set, test_set;
    const std::vector<std::string> vocab_pool = {"wind", "rain", "sun",  "snow", "leaf",
                                                 "rock", "sand", "wave", "fire", "mist"};
    for (int i = 0; i < 600; ++i) {
        corpus::TraitRecord r;
        r.user_id = "s" + std::to_string(i);
        std::string doc;
        for (int w = 0; w < 6; ++w) {
            if (w) doc += ' ';
            doc += vocab_pool[rng.uniform_int(vocab_pool.size())];
        }
        r.responses = {doc};
        r.gender = static_cast<int>(rng.uniform_int(2));  // label independent of text
        (i < 300 ? train_set : test_set).push_back(r);
    }
    const auto shuffled_model = evalsuite::fit_traits(train_set, evalsuite::TraitTask::gender);
    std::vector<std::string> docs;
    std::vector<int> truth;
    for (const auto& r : test_set) {
        docs.push_back(r.responses[0]);
        truth.push_back(*r.gender);
    }
    const auto probs = evalsuite::trait_predict(shuffled_model, docs);
    size_t agree = 0;
    for (size_t i = 0; i < probs.size(); ++i)
        if ((probs[i] >= 0.5 ? 1 : 0) == truth[i]) ++agree;
    const double acc = double(agree) / double(probs.size());
    const double sigma = std::sqrt(0.25 / double(probs.size()));
    if (std::abs(acc - 0.5) > 3 * sigma)
        return {false, "shuffled-label accuracy " + fmt(acc) + " outside 0.5 +- 3 sigma"};

    return {true, "age r=1 exact, separable F1=1 at C=10, shuffled-label acc " + fmt(acc) +
                      " within 3 sigma of chance (sigma " + fmt(sigma) + ")"};
}

// ------------------------------------------------------------ criterion 9

Outcome criterion_cav() {
    // anchors equal to their positives always score
    std::vector<evalsuite::CavTriplet> equal_triplets(100);
    Rng erng(9001);
    for (auto& t : equal_triplets) {
        t.anchor = t.positive = "text " + std::to_string(erng.uniform_int(1000));
        t.negative = "other " + std::to_string(erng.uniform_int(1000));
    }
    auto hash_embed = [](const std::string& text) {
        std::hash<std::string> h;
        Rng r(h(text));
        Tensor v({1, 8});
        for (Real& x : v.data) x = static_cast<Real>(r.gaussian());
        return v;
    };
    if (evalsuite::cav_accuracy(equal_triplets, hash_embed) != 1.0)
        return {false, "anchor=positive triplets did not all score"};

    // random encoder on 2000 triplets: accuracy within 3 binomial sigma of 0.5
    synth::SynthOptions sopts;
    sopts.n_users = 40;
    sopts.samples_per_user = 10;
    const synth::SynthCorpus sc = synth::generate_corpus(sopts);
    std::vector<evalsuite::GeneratedResponse> anchors;
    Rng arng(9002);
    while (anchors.size() < 2000) {
        const auto& s = sc.samples[arng.uniform_int(sc.samples.size())];
        anchors.push_back(
            {"gen " + std::to_string(arng.uniform_int(100000)), s.user_id, s.domain_tag});
    }
    size_t skipped = 0;
    const auto triplets = evalsuite::build_cav_triplets(anchors, sc.samples, 9003, &skipped);
    for (const auto& t : triplets) {
        if (t.positive_domain == t.anchor_domain)
            return {false, "positive shares the anchor domain"};
        if (t.negative_author == t.anchor_author)
            return {false, "negative shares the anchor author"};
    }
    const double acc = evalsuite::cav_accuracy(triplets, hash_embed);
    const double sigma = std::sqrt(0.25 / double(triplets.size()));
    Outcome out;
    out.pass = std::abs(acc - 0.5) <= 3 * sigma;
    out.detail = "random-encoder CAV acc " + fmt(acc) + " on " + std::to_string(triplets.size()) +
                 " triplets (0.5 +- " + fmt(3 * sigma) + "); domain control held on all";
    return out;
}

// ----------------------------------------------------------- criterion 10

Outcome criterion_significance() {
    Rng rng(10001);
    std::vector<double> scores(2500);
    for (double& s : scores) s = rng.uniform();

    const auto same = evalsuite::paired_t_test(scores, scores, 100, 2000, 11);
    if (same.p_value != 1.0 || !same.flagged)
        return {false, "identical reports did not give flagged p=1"};

    std::vector<double> shifted = scores;
    for (double& s : shifted) s += 1.0;
    const auto shift = evalsuite::paired_t_test(scores, shifted, 100, 2000, 11);
    if (shift.p_value != 0.0 || !shift.flagged)
        return {false, "constant shift did not give flagged p=0"};

    std::vector<double> other(2500);
    for (double& s : other) s = rng.uniform();
    const auto ab = evalsuite::paired_t_test(scores, other, 100, 2000, 11);
    const auto ba = evalsuite::paired_t_test(other, scores, 100, 2000, 11);
    if (std::abs(ab.p_value - ba.p_value) > 1e-12)
        return {false, "two-sided p changed under argument swap"};

    return {true,
            "flagged p=1 on identical, flagged p=0 on constant shift, symmetric; "
            "ran at 100 subsets x 2000"};
}

// ----------------------------------------------------------- criterion 11

Outcome criterion_reproducibility() {
    auto read_file = [](const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    };

    auto run_pipeline = [&](const std::string& work) {
        fs::remove_all(work);
        fs::create_directories(work);
        cli::RunConfig cfg = cli::RunConfig::preset("toy");
        cfg.out_dir = work;
        cfg.seed = 11;
        cfg.train_frac = 0.7;
        cfg.valid_frac = 0.1;
        cfg.test_frac = 0.2;
        cfg.epochs = 1;
        cfg.pretrain_epochs = 1;
        cfg.vocab_size = 300;
        cfg.k = 2;
        cfg.max_tokens = 24;
        cli::cmd_ingest_synth(cfg, 20, 8);
        cfg.data = work + "/synth_data.jsonl";
        cli::cmd_ingest(cfg);
        cli::cmd_train_retriever(cfg, retriever::Flavor::style);
        cli::cmd_train_generator(cfg, prefgen::FusionMode::prefix, "style");
        cli::GenerateOptions gopts;
        gopts.generator_path =
            cli::generator_ckpt_path(cfg, prefgen::FusionMode::prefix, "style");
        gopts.mode = prefgen::FusionMode::prefix;
        gopts.history_source = "style";
        gopts.out_path = work + "/generations.jsonl";
        cli::cmd_generate(cfg, gopts);
        cli::EvaluateOptions eopts;
        eopts.generations_path = work + "/generations.jsonl";
        eopts.report_path = work + "/report.json";
        eopts.generator_path = gopts.generator_path;
        eopts.retriever_style_path = cli::retriever_ckpt_path(cfg, retriever::Flavor::style);
        cli::cmd_evaluate(cfg, eopts);
        return std::make_pair(read_file(work + "/generations.jsonl"),
                              read_file(work + "/report.json"));
    };

    const std::string base = (fs::temp_directory_path() / "recap_acceptance_c11").string();
    const auto run1 = run_pipeline(base + "_a");
    const auto run2 = run_pipeline(base + "_b");
    Outcome out;
    out.pass = !run1.first.empty() && run1 == run2;
    out.detail = out.pass ? "two pipeline runs produced byte-identical generations and reports"
                          : "pipeline outputs differ between identical runs";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::pair<std::string, CriterionFn>> criteria = {
        {"gradient suite (retriever + generator, rel err < 1e-3)", criterion_gradient_suite},
        {"prefix-zero identity (none == prefix with N=0)", criterion_prefix_zero},
        {"causal invariances (decoder suffix, retriever slots)", criterion_causal_invariance},
        {"retrieval oracle (exhaustive scan + mixed merge)", criterion_retrieval_oracle},
        {"metric oracles (BLEU/ROUGE brute force + worked examples)", criterion_metric_oracles},
        {"overfit checks (retriever < 0.05, generator ppl < 2.0)", criterion_overfit},
        {"synthetic personalization (style retrieval + prefix generation)",
         criterion_synthetic_personalization},
        {"traits regressors (age r=1, separable F1=1, shuffled chance)", criterion_traits},
        {"CAV (perfect, chance, domain control)", criterion_cav},
        {"significance machinery (degenerate rules, symmetry)", criterion_significance},
        {"reproducibility (byte-identical pipeline runs)", criterion_reproducibility},
    };

    std::set<size_t> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

    bool all_pass = true;
    for (size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && !selected.count(i + 1)) continue;
        const double t0 = now_seconds();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double dt = now_seconds() - t0;
        all_pass = all_pass && out.pass;
        std::cout << "[" << (out.pass ? "PASS" : "FAIL") << "] criterion " << (i + 1) << ": "
                  << criteria[i].first << " - " << out.detail << " (" << fmt(dt, 1) << "s)"
                  << std::endl;
    }
    std::cout << (all_pass ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << std::endl;
    return all_pass ? 0 : 1;
}
