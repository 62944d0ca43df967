#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "recap/retriever.hpp"
#include "recap/target_encoders.hpp"
#include "test_helpers.hpp"

using namespace recap;
using namespace recap::retriever;

namespace {

nn::TransformerConfig token_cfg(size_t d = 16) {
    nn::TransformerConfig c;
    c.d_model = d;
    c.n_heads = 4;
    c.n_layers = 2;
    c.ffn_mult = 2;
    c.max_positions = 48;
    c.vocab_size = 270;
    c.causal = false;
    return c;
}

nn::TransformerConfig utt_cfg(size_t d = 16) {
    nn::TransformerConfig c;
    c.d_model = d;
    c.n_heads = 4;
    c.n_layers = 2;
    c.ffn_mult = 2;
    c.max_positions = 64;
    c.vocab_size = 1;
    c.causal = true;
    return c;
}

RetrieverModel make_model(uint64_t seed = 1, size_t cap = 20) {
    Rng rng(seed);
    nn::Vocab vocab = nn::Vocab::train({"hello there", "general reply", "what a day"}, 270);
    return RetrieverModel(Flavor::style, vocab, token_cfg(), utt_cfg(), cap, rng);
}

corpus::Sample make_pair(const std::string& ctx, const std::string& resp, int64_t ts) {
    corpus::Sample s;
    s.user_id = "u";
    s.conversation_id = "c" + std::to_string(ts);
    s.timestamp = ts;
    s.context = {ctx};
    s.response = resp;
    return s;
}

// exhaustive scan oracle with the same tie rule (older position first)
std::vector<std::string> brute_force_topk(const RetrievalIndex& index, const Tensor& query,
                                          Flavor flavor, size_t k) {
    std::vector<std::pair<double, size_t>> scored;
    for (size_t i = 0; i < index.entries.size(); ++i) {
        const Tensor& v =
            flavor == Flavor::style ? index.entries[i].style_vec : index.entries[i].semantic_vec;
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

RetrievalIndex random_index(size_t n, size_t d, Rng& rng) {
    RetrievalIndex index;
    index.user_id = "u";
    index.has_style = true;
    index.has_semantic = true;
    for (size_t i = 0; i < n; ++i) {
        RetrievalEntry e;
        e.response = "resp" + std::to_string(i);
        e.position = i;
        e.style_vec = Tensor::randn({1, d}, rng, 1.0);
        e.semantic_vec = Tensor::randn({1, d}, rng, 1.0);
        index.entries.push_back(std::move(e));
    }
    return index;
}

}  // namespace

TEST_CASE("embed_utterance is deterministic and rejects empty text") {
    RetrieverModel model = make_model();
    const auto a = model.embed_utterance("same text twice");
    const auto b = model.embed_utterance("same text twice");
    CHECK(a.vector.data == b.vector.data);
    CHECK_THROWS_AS(model.embed_utterance(""), std::invalid_argument);
}

TEST_CASE("compose_inputs interleaves pairs and appends the current context") {
    RetrieverModel model = make_model();
    corpus::UserHistory h;
    h.user_id = "u";
    h.pairs = {make_pair("ctx one", "resp one", 1), make_pair("ctx two", "resp two", 2)};

    auto no_current = model.compose_inputs(h, nullptr);
    CHECK(no_current.seq->value.rows() == 4);
    CHECK(no_current.context_rows == std::vector<size_t>{0, 2});

    std::vector<std::string> current = {"now talking"};
    auto with_current = model.compose_inputs(h, &current);
    CHECK(with_current.seq->value.rows() == 5);
    CHECK(with_current.has_current);

    corpus::UserHistory empty;
    empty.user_id = "u";
    auto only_current = model.compose_inputs(empty, &current);
    CHECK(only_current.seq->value.rows() == 1);
}

TEST_CASE("same text at different positions composes differently") {
    RetrieverModel model = make_model();
    corpus::UserHistory h;
    h.user_id = "u";
    h.pairs = {make_pair("same text", "same text", 1), make_pair("same text", "same text", 2)};
    auto c = model.compose_inputs(h, nullptr);
    double diff = 0;
    for (size_t j = 0; j < c.seq->value.cols(); ++j)
        diff = std::max(diff, std::abs(static_cast<double>(c.seq->value.at(0, j) -
                                                           c.seq->value.at(2, j))));
    CHECK(diff > 1e-8);  // p_t differs
}

TEST_CASE("context vs response type embeddings differ for the same text") {
    RetrieverModel model = make_model();
    corpus::UserHistory h;
    h.user_id = "u";
    h.pairs = {make_pair("same text", "same text", 1)};
    auto c = model.compose_inputs(h, nullptr);
    double diff = 0;
    for (size_t j = 0; j < c.seq->value.cols(); ++j)
        diff = std::max(diff, std::abs(static_cast<double>(c.seq->value.at(0, j) -
                                                           c.seq->value.at(1, j))));
    CHECK(diff > 1e-8);  // y_c != y_r
}

TEST_CASE("history longer than the position table is an error") {
    RetrieverModel model = make_model(1, 3);
    corpus::UserHistory h;
    h.user_id = "u";
    for (int i = 0; i < 4; ++i) h.pairs.push_back(make_pair("c", "r", i));
    CHECK_THROWS_AS(model.compose_inputs(h, nullptr), std::invalid_argument);
}

TEST_CASE("prediction at slot t is invariant to later-slot perturbations") {
    RetrieverModel model = make_model(3);
    corpus::UserHistory h;
    h.user_id = "u";
    for (int i = 0; i < 4; ++i)
        h.pairs.push_back(make_pair("ctx " + std::to_string(i), "resp " + std::to_string(i), i));
    auto base = model.predict_response_embeddings(model.compose_inputs(h, nullptr));

    corpus::UserHistory edited = h;
    edited.pairs[2].response = "completely different and much longer text";
    edited.pairs[3].context = {"another substitute"};
    edited.pairs[3].response = "changed too";
    auto out = model.predict_response_embeddings(model.compose_inputs(edited, nullptr));

    // slots 0,1 see only pairs 0..1 inputs and the context of pair 2
    for (size_t t = 0; t < 2; ++t)
        for (size_t j = 0; j < 16; ++j)
            CHECK(out->value.at(t, j) == base->value.at(t, j));
    // slot 3 reads the changed context
    double diff = 0;
    for (size_t j = 0; j < 16; ++j)
        diff = std::max(diff,
                        std::abs(static_cast<double>(out->value.at(3, j) - base->value.at(3, j))));
    CHECK(diff > 1e-9);
}

TEST_CASE("sequence of one pair yields exactly one prediction") {
    RetrieverModel model = make_model();
    corpus::UserHistory h;
    h.user_id = "u";
    h.pairs = {make_pair("only ctx", "only resp", 1)};
    auto preds = model.predict_response_embeddings(model.compose_inputs(h, nullptr));
    CHECK(preds->value.rows() == 1);
}

TEST_CASE("retriever training loss gradients pass finite differences") {
    RetrieverModel model = make_model(11);
    model.set_train_token_encoder(true);  // exercise the full path
    std::vector<corpus::Sample> pairs = {make_pair("hello", "there", 1),
                                         make_pair("what", "a day", 2)};
    auto loss_fn = [&]() { return sequence_loss(model, pairs); };
    nn::ParamList params = model.trainable_params();
    Rng rng(123);
    auto res = recap::testing::finite_diff_check(loss_fn, params, 2, rng);
    CHECK(res.worst_rel_err < 1e-3);
}

TEST_CASE("build_index embeds every response under both flavors") {
    RetrieverModel style = make_model(21);
    Rng rng2(22);
    nn::Vocab vocab2 = style.vocab;
    RetrieverModel semantic(Flavor::semantic, vocab2, token_cfg(), utt_cfg(), 20, rng2);

    corpus::UserHistory h;
    h.user_id = "u";
    for (int i = 0; i < 3; ++i)
        h.pairs.push_back(make_pair("c" + std::to_string(i), "r" + std::to_string(i), i));

    const RetrievalIndex index = build_index(&style, &semantic, h);
    CHECK(index.entries.size() == 3);
    CHECK(index.has_style);
    CHECK(index.has_semantic);
    for (size_t i = 0; i < 3; ++i) {
        const auto expect = style.embed_utterance(h.pairs[i].response);
        CHECK(index.entries[i].style_vec.data == expect.vector.data);
    }

    corpus::UserHistory empty;
    empty.user_id = "u";
    CHECK(build_index(&style, nullptr, empty).entries.empty());
}

TEST_CASE("retrieve matches the exhaustive scan on 1000 random 16-d entries") {
    Rng rng(77);
    const RetrievalIndex index = random_index(1000, 16, rng);
    for (size_t k : {size_t(1), size_t(5), size_t(10), size_t(1001)}) {
        const Tensor q = Tensor::randn({1, 16}, rng, 1.0);
        CHECK(retrieve(index, q, Flavor::style, k) == brute_force_topk(index, q, Flavor::style, k));
        CHECK(retrieve(index, q, Flavor::semantic, k) ==
              brute_force_topk(index, q, Flavor::semantic, k));
    }
}

TEST_CASE("retrieve: self-similarity ranks the query's own vector first") {
    Rng rng(78);
    RetrievalIndex index = random_index(50, 8, rng);
    const Tensor q = index.entries[17].style_vec;
    CHECK(retrieve(index, q, Flavor::style, 1)[0] == "resp17");
}

TEST_CASE("retrieve edge cases") {
    Rng rng(79);
    const RetrievalIndex index = random_index(5, 8, rng);
    const Tensor q = Tensor::randn({1, 8}, rng, 1.0);
    CHECK(retrieve(index, q, Flavor::style, 10).size() == 5);  // k > size returns all
    CHECK_THROWS_AS(retrieve(index, q, Flavor::style, 0), std::invalid_argument);
    CHECK_THROWS_AS(retrieve(index, Tensor(), Flavor::style, 1), std::invalid_argument);
    RetrievalIndex style_only = index;
    style_only.has_semantic = false;
    CHECK_THROWS_AS(retrieve(style_only, q, Flavor::semantic, 1), std::invalid_argument);
}

TEST_CASE("retrieve ties break toward the older entry") {
    RetrievalIndex index;
    index.has_style = true;
    for (size_t i = 0; i < 3; ++i) {
        RetrievalEntry e;
        e.response = "r" + std::to_string(i);
        e.position = i;
        e.style_vec = Tensor({1, 2}, {1.0, 0.0});  // identical vectors = exact ties
        index.entries.push_back(e);
    }
    const Tensor q({1, 2}, {2.0, 0.0});
    CHECK(retrieve(index, q, Flavor::style, 2) == std::vector<std::string>{"r0", "r1"});
}

TEST_CASE("retrieve_mixed equals the documented merge oracle on random data") {
    Rng rng(80);
    const RetrievalIndex index = random_index(20, 16, rng);
    const Tensor qs = Tensor::randn({1, 16}, rng, 1.0);
    const Tensor qm = Tensor::randn({1, 16}, rng, 1.0);
    const size_t k = 10;

    // oracle: style top-5, then semantic ranking skipping duplicates
    const auto style_all = brute_force_topk(index, qs, Flavor::style, index.entries.size());
    const auto sem_all = brute_force_topk(index, qm, Flavor::semantic, index.entries.size());
    std::vector<std::string> expected(style_all.begin(), style_all.begin() + k / 2);
    for (const auto& cand : sem_all) {
        if (expected.size() == k) break;
        if (std::find(expected.begin(), expected.end(), cand) != expected.end()) continue;
        expected.push_back(cand);
    }
    CHECK(retrieve_mixed(index, qs, qm, k) == expected);
}

TEST_CASE("retrieve_mixed with identical rankings dedups into the top k") {
    Rng rng(81);
    const RetrievalIndex index = random_index(20, 16, rng);
    const Tensor q = Tensor::randn({1, 16}, rng, 1.0);
    RetrievalIndex same = index;
    for (auto& e : same.entries) e.semantic_vec = e.style_vec;
    const auto mixed = retrieve_mixed(same, q, q, 10);
    CHECK(mixed == brute_force_topk(same, q, Flavor::style, 10));
}

TEST_CASE("retrieve_mixed rejects odd k") {
    Rng rng(82);
    const RetrievalIndex index = random_index(4, 8, rng);
    const Tensor q = Tensor::randn({1, 8}, rng, 1.0);
    CHECK_THROWS_AS(retrieve_mixed(index, q, q, 3), std::invalid_argument);
}

TEST_CASE("single-pair training memorizes the target") {
    Rng rng(90);
    nn::Vocab vocab = nn::Vocab::train({"hello there", "general reply"}, 270);
    nn::TransformerConfig tc = token_cfg();
    nn::TransformerConfig uc = utt_cfg();
    RetrieverModel model(Flavor::style, vocab, tc, uc, 10, rng);

    corpus::CorpusSplit split;
    split.train_users = {"u"};
    corpus::UserSamples us;
    us.training = {make_pair("hello there", "general reply", 1)};
    split.samples.emplace("u", us);

    TrainOptions opts;
    opts.epochs = 200;  // one sequence per epoch = 200 steps
    opts.lr = Real(3e-3);
    opts.weight_decay = Real(0);
    opts.seed = 5;
    const TrainTrace trace = train_retriever(model, split, opts);
    CHECK(trace.epoch_train_loss.back() < Real(0.05));
}

TEST_CASE("equal seeds give identical loss traces") {
    corpus::CorpusSplit split;
    split.train_users = {"u"};
    corpus::UserSamples us;
    us.training = {make_pair("ctx a", "resp a", 1), make_pair("ctx b", "resp b", 2)};
    split.samples.emplace("u", us);

    auto run = [&]() {
        Rng rng(90);
        nn::Vocab vocab = nn::Vocab::train({"ctx a resp a ctx b resp b"}, 270);
        RetrieverModel model(Flavor::style, vocab, token_cfg(), utt_cfg(), 10, rng);
        TrainOptions opts;
        opts.epochs = 5;
        opts.seed = 5;
        return train_retriever(model, split, opts).epoch_train_loss;
    };
    CHECK(run() == run());
}

TEST_CASE("retriever checkpoint round trip preserves predictions") {
    RetrieverModel model = make_model(31);
    const std::string path =
        (std::filesystem::temp_directory_path() / "recap_test_retr.rckp").string();
    model.save(path, "");
    const RetrieverModel back = RetrieverModel::load(path, Flavor::style);
    corpus::UserHistory h;
    h.user_id = "u";
    h.pairs = {make_pair("some ctx", "some resp", 1)};
    const Tensor qa = model.predict_query(h, {"current"});
    const Tensor qb = back.predict_query(h, {"current"});
    CHECK(qa.data == qb.data);
    CHECK_THROWS_AS(RetrieverModel::load(path, Flavor::semantic), std::runtime_error);
    std::remove(path.c_str());
}
