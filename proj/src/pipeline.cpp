#include "recap/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "recap/synth.hpp"
#include "recap/target_encoders.hpp"
#include "recap/traits.hpp"

namespace recap::cli {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0,1]");
    if (std::abs(train_frac + valid_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("train_frac/valid_frac/test_frac must sum to 1");
    if (d_model == 0 || d_model % enc_heads != 0 || d_model % dec_heads != 0 ||
        d_model % utt_heads != 0)
        throw ConfigError("d_model must be divisible by every head count");
    if (vocab_size < nn::Vocab::base_size)
        throw ConfigError("vocab_size must be >= " + std::to_string(nn::Vocab::base_size));
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (k == 0) throw ConfigError("k must be >= 1");
    if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
    if (history_cap == 0) throw ConfigError("history_cap must be >= 1");
    if (flavor != "style" && flavor != "semantic" && flavor != "mixed")
        throw ConfigError("flavor must be style, semantic, or mixed");
}

std::string RunConfig::to_json() const {
    json j;
    j["data"] = data;
    j["traits"] = traits;
    j["out_dir"] = out_dir;
    j["train_frac"] = train_frac;
    j["valid_frac"] = valid_frac;
    j["test_frac"] = test_frac;
    j["d_model"] = d_model;
    j["enc_layers"] = enc_layers;
    j["enc_heads"] = enc_heads;
    j["dec_layers"] = dec_layers;
    j["dec_heads"] = dec_heads;
    j["utt_layers"] = utt_layers;
    j["utt_heads"] = utt_heads;
    j["ffn_mult"] = ffn_mult;
    j["prefix_len"] = prefix_len;
    j["vocab_size"] = vocab_size;
    j["max_positions"] = max_positions;
    j["history_cap"] = history_cap;
    j["lr"] = lr;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["pretrain_epochs"] = pretrain_epochs;
    j["pretrain_lr"] = pretrain_lr;
    j["flavor"] = flavor;
    j["k"] = k;
    j["top_p"] = top_p;
    j["max_tokens"] = max_tokens;
    return j.dump(2);
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig c;
    if (j.contains("preset")) c = preset(j["preset"].get<std::string>());
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("data", c.data);
    get("traits", c.traits);
    get("out_dir", c.out_dir);
    get("train_frac", c.train_frac);
    get("valid_frac", c.valid_frac);
    get("test_frac", c.test_frac);
    get("d_model", c.d_model);
    get("enc_layers", c.enc_layers);
    get("enc_heads", c.enc_heads);
    get("dec_layers", c.dec_layers);
    get("dec_heads", c.dec_heads);
    get("utt_layers", c.utt_layers);
    get("utt_heads", c.utt_heads);
    get("ffn_mult", c.ffn_mult);
    get("prefix_len", c.prefix_len);
    get("vocab_size", c.vocab_size);
    get("max_positions", c.max_positions);
    get("history_cap", c.history_cap);
    get("lr", c.lr);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get("pretrain_epochs", c.pretrain_epochs);
    get("pretrain_lr", c.pretrain_lr);
    get("flavor", c.flavor);
    get("k", c.k);
    get("top_p", c.top_p);
    get("max_tokens", c.max_tokens);
    return c;
}

RunConfig RunConfig::preset(const std::string& name) {
    RunConfig c;  // defaults are the toy preset
    if (name == "toy") return c;
    if (name == "paper") {
        c.d_model = 768;
        c.enc_layers = 12;
        c.enc_heads = 12;
        c.dec_layers = 12;
        c.dec_heads = 12;
        c.utt_layers = 6;
        c.utt_heads = 12;
        c.prefix_len = 30;
        c.vocab_size = 50257;
        c.max_positions = 512;
        c.lr = 5e-5;
        c.epochs = 10;
        c.k = 10;
        c.top_p = 0.8;
        c.max_tokens = 128;
        return c;
    }
    throw ConfigError("unknown preset: " + name);
}

std::string retriever_ckpt_path(const RunConfig& cfg, retriever::Flavor f) {
    return cfg.out_dir + "/retriever_" + retriever::flavor_name(f) + ".rckp";
}

std::string generator_ckpt_path(const RunConfig& cfg, prefgen::FusionMode mode,
                                const std::string& history_source) {
    std::string name = std::string("generator_") + prefgen::fusion_mode_name(mode);
    if (mode != prefgen::FusionMode::none) name += "_" + history_source;
    return cfg.out_dir + "/" + name + ".rckp";
}

corpus::CorpusSplit load_and_split(const RunConfig& cfg) {
    if (cfg.data.empty()) throw ConfigError("data path is required");
    if (!fs::exists(cfg.data)) throw ConfigError("data path does not exist: " + cfg.data);
    const auto samples = corpus::load_conversations(cfg.data);
    return corpus::split_by_user(samples, cfg.train_frac, cfg.valid_frac, cfg.test_frac, cfg.seed);
}

namespace {

void ensure_out_dir(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("out_dir is required");
    fs::create_directories(cfg.out_dir);
}

// deterministic order: per (sorted) user, history then training samples
std::vector<std::string> train_split_texts(const corpus::CorpusSplit& split,
                                           bool responses_only) {
    std::vector<std::string> texts;
    for (const auto& u : split.train_users) {
        auto it = split.samples.find(u);
        if (it == split.samples.end()) continue;
        for (const auto* list : {&it->second.history, &it->second.training}) {
            for (const auto& s : *list) {
                if (!responses_only)
                    for (const auto& turn : s.context) texts.push_back(turn);
                texts.push_back(s.response);
            }
        }
    }
    if (texts.empty()) throw ConfigError("training split has no texts");
    return texts;
}

nn::TransformerConfig encoder_config(const RunConfig& cfg) {
    nn::TransformerConfig c;
    c.d_model = cfg.d_model;
    c.n_heads = cfg.enc_heads;
    c.n_layers = cfg.enc_layers;
    c.ffn_mult = cfg.ffn_mult;
    c.max_positions = cfg.max_positions;
    c.vocab_size = cfg.vocab_size;
    c.causal = false;
    return c;
}

nn::TransformerConfig decoder_config(const RunConfig& cfg) {
    nn::TransformerConfig c;
    c.d_model = cfg.d_model;
    c.n_heads = cfg.dec_heads;
    c.n_layers = cfg.dec_layers;
    c.ffn_mult = cfg.ffn_mult;
    c.max_positions = cfg.max_positions;
    c.vocab_size = cfg.vocab_size;
    c.causal = true;
    return c;
}

nn::TransformerConfig utterance_config(const RunConfig& cfg) {
    nn::TransformerConfig c;
    c.d_model = cfg.d_model;
    c.n_heads = cfg.utt_heads;
    c.n_layers = cfg.utt_layers;
    c.ffn_mult = cfg.ffn_mult;
    c.max_positions = 2 * cfg.history_cap + 2;
    c.vocab_size = 1;  // operates on utterance vectors, not tokens
    c.causal = true;
    return c;
}

nn::Vocab build_vocab(const RunConfig& cfg, const corpus::CorpusSplit& split) {
    return nn::Vocab::train(train_split_texts(split, false), cfg.vocab_size);
}

}  // namespace

IngestStats cmd_ingest(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    const auto samples = corpus::load_conversations(cfg.data);
    const auto split =
        corpus::split_by_user(samples, cfg.train_frac, cfg.valid_frac, cfg.test_frac, cfg.seed);
    if (!cfg.traits.empty()) corpus::load_traits(cfg.traits);  // validation only

    IngestStats stats;
    stats.n_samples = samples.size();
    stats.n_users = split.samples.size();
    stats.n_train_users = split.train_users.size();
    stats.n_valid_users = split.valid_users.size();
    stats.n_test_users = split.test_users.size();

    json j;
    j["train_users"] = split.train_users;
    j["valid_users"] = split.valid_users;
    j["test_users"] = split.test_users;
    j["n_samples"] = stats.n_samples;
    j["seed"] = cfg.seed;
    std::ofstream f(cfg.out_dir + "/split.json", std::ios::trunc);
    f << j.dump(2) << "\n";
    return stats;
}

void cmd_ingest_synth(const RunConfig& cfg, size_t n_users, size_t samples_per_user) {
    if (n_users < 3) throw ConfigError("synth: users must be >= 3");
    if (samples_per_user < 1) throw ConfigError("synth: samples-per-user must be >= 1");
    ensure_out_dir(cfg);
    synth::SynthOptions opts;
    opts.n_users = n_users;
    opts.samples_per_user = samples_per_user;
    opts.seed = cfg.seed;
    const synth::SynthCorpus corpus_out = synth::generate_corpus(opts);
    corpus::write_conversations(cfg.out_dir + "/synth_data.jsonl", corpus_out.samples);
    corpus::write_traits(cfg.out_dir + "/synth_traits.jsonl", corpus_out.traits);
}

std::string cmd_train_retriever(const RunConfig& cfg, retriever::Flavor flavor) {
    cfg.validate();
    ensure_out_dir(cfg);
    const corpus::CorpusSplit split = load_and_split(cfg);
    const nn::Vocab vocab = build_vocab(cfg, split);

    retriever::PretrainOptions popts;
    popts.epochs = cfg.pretrain_epochs;
    popts.lr = static_cast<Real>(cfg.pretrain_lr);
    popts.seed = cfg.seed + 17;

    nn::EncoderModel target_encoder =
        flavor == retriever::Flavor::style
            ? retriever::pretrain_style_encoder(vocab, encoder_config(cfg),
                                                train_split_texts(split, true), popts, nullptr,
                                                "token_enc")
            : retriever::pretrain_semantic_encoder(vocab, encoder_config(cfg),
                                                   train_split_texts(split, false), popts,
                                                   nullptr, "token_enc");

    Rng rng(cfg.seed + 29);
    retriever::RetrieverModel model(flavor, vocab, encoder_config(cfg), utterance_config(cfg),
                                    cfg.history_cap, rng);
    model.token_encoder = std::move(target_encoder);
    model.token_encoder.set_trainable(false);

    retriever::TrainOptions topts;
    topts.epochs = cfg.epochs;
    topts.lr = static_cast<Real>(cfg.lr);
    topts.seed = cfg.seed + 31;
    retriever::train_retriever(model, split, topts);

    const std::string path = retriever_ckpt_path(cfg, flavor);
    model.save(path, cfg.to_json());
    return path;
}

HistorySource::HistorySource(const RunConfig& cfg, const corpus::CorpusSplit& split,
                             const std::string& source)
    : split_(split), source_(source), k_(cfg.k) {
    if (source == "recency") return;
    if (source == "style" || source == "mixed")
        style_ = retriever::RetrieverModel::load(retriever_ckpt_path(cfg, retriever::Flavor::style),
                                                 retriever::Flavor::style);
    if (source == "semantic" || source == "mixed")
        semantic_ = retriever::RetrieverModel::load(
            retriever_ckpt_path(cfg, retriever::Flavor::semantic), retriever::Flavor::semantic);
    if (source != "style" && source != "semantic" && source != "mixed")
        throw ConfigError("unknown history source: " + source);
}

std::vector<std::string> HistorySource::retrieved_for(const std::string& user,
                                                      const corpus::Sample& sample) const {
    const corpus::UserHistory history = corpus::history_of(split_, user);
    if (history.pairs.empty()) return {};

    if (source_ == "recency") {
        const size_t n = std::min(k_, history.pairs.size());
        std::vector<std::string> out;
        for (size_t i = history.pairs.size() - n; i < history.pairs.size(); ++i)
            out.push_back(history.pairs[i].response);
        return out;
    }

    auto it = index_cache_.find(user);
    if (it == index_cache_.end()) {
        it = index_cache_
                 .emplace(user, retriever::build_index(style_ ? &*style_ : nullptr,
                                                       semantic_ ? &*semantic_ : nullptr, history))
                 .first;
    }
    const retriever::RetrievalIndex& index = it->second;

    if (source_ == "style") {
        const Tensor q = style_->predict_query(history, sample.context);
        return retriever::retrieve(index, q, retriever::Flavor::style, k_);
    }
    if (source_ == "semantic") {
        const Tensor q = semantic_->predict_query(history, sample.context);
        return retriever::retrieve(index, q, retriever::Flavor::semantic, k_);
    }
    const Tensor qs = style_->predict_query(history, sample.context);
    const Tensor qm = semantic_->predict_query(history, sample.context);
    return retriever::retrieve_mixed(index, qs, qm, k_);
}

std::string cmd_train_generator(const RunConfig& cfg, prefgen::FusionMode mode,
                                const std::string& history_source) {
    cfg.validate();
    ensure_out_dir(cfg);
    const corpus::CorpusSplit split = load_and_split(cfg);
    const nn::Vocab vocab = build_vocab(cfg, split);

    Rng rng(cfg.seed + 41);
    prefgen::CapModel model(encoder_config(cfg), decoder_config(cfg), cfg.prefix_len,
                            std::max<size_t>(cfg.k, 10), vocab, rng);

    const std::string source = mode == prefgen::FusionMode::none ? "recency" : history_source;
    HistorySource histories(cfg, split, source);
    prefgen::GenTrainOptions topts;
    topts.epochs = cfg.epochs;
    topts.lr = static_cast<Real>(cfg.lr);
    topts.seed = cfg.seed + 43;
    topts.batch_size = cfg.batch_size;
    prefgen::train_generator(
        model, split,
        [&](const std::string& user, const corpus::Sample& s) {
            return histories.retrieved_for(user, s);
        },
        mode, topts);

    const std::string path = generator_ckpt_path(cfg, mode, history_source);
    model.save(path, cfg.to_json());
    return path;
}

std::string cmd_generate(const RunConfig& cfg, const GenerateOptions& opts) {
    cfg.validate();
    ensure_out_dir(cfg);
    if (opts.generator_path.empty()) throw ConfigError("generator checkpoint path is required");
    if (!fs::exists(opts.generator_path))
        throw ConfigError("generator checkpoint does not exist: " + opts.generator_path);
    const prefgen::CapModel model = prefgen::CapModel::load(opts.generator_path);
    const corpus::CorpusSplit split = load_and_split(cfg);
    const std::string source =
        opts.mode == prefgen::FusionMode::none ? "recency" : opts.history_source;
    HistorySource histories(cfg, split, source);

    const std::string out_path =
        opts.out_path.empty() ? cfg.out_dir + "/generations.jsonl" : opts.out_path;
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + out_path);

    auto emit = [&](const corpus::Sample& s, size_t idx) {
        const std::vector<std::string> retrieved =
            opts.mode == prefgen::FusionMode::none ? std::vector<std::string>{}
                                                   : histories.retrieved_for(s.user_id, s);
        Rng sample_rng(cfg.seed * 1000003ull + idx);
        const std::string generated = model.generate(s.context, retrieved, opts.mode, cfg.top_p,
                                                     cfg.max_tokens, sample_rng);
        json row;
        row["user_id"] = s.user_id;
        row["conversation_id"] = s.conversation_id;
        row["timestamp"] = s.timestamp;
        row["domain_tag"] = s.domain_tag;
        row["context"] = s.context;
        row["reference"] = s.response;
        row["generated"] = generated;
        row["mode"] = prefgen::fusion_mode_name(opts.mode);
        row["retrieved"] = retrieved;
        f << row.dump() << "\n";
    };

    if (!opts.user_id.empty()) {
        corpus::Sample probe;
        probe.user_id = opts.user_id;
        probe.conversation_id = "cli";
        probe.context = opts.context;
        probe.response = "";
        if (probe.context.empty()) throw ConfigError("generation context must be non-empty");
        const std::vector<std::string> retrieved =
            opts.mode == prefgen::FusionMode::none ? std::vector<std::string>{}
                                                   : histories.retrieved_for(probe.user_id, probe);
        Rng sample_rng(cfg.seed * 1000003ull);
        const std::string generated = model.generate(probe.context, retrieved, opts.mode,
                                                     cfg.top_p, cfg.max_tokens, sample_rng);
        json row;
        row["user_id"] = probe.user_id;
        row["context"] = probe.context;
        row["generated"] = generated;
        row["mode"] = prefgen::fusion_mode_name(opts.mode);
        row["retrieved"] = retrieved;
        f << row.dump() << "\n";
        return out_path;
    }

    size_t idx = 0;
    for (const auto& u : split.test_users) {
        auto it = split.samples.find(u);
        if (it == split.samples.end()) continue;
        for (const auto& s : it->second.training) emit(s, idx++);
    }
    return out_path;
}

namespace {

struct GenerationRow {
    std::string user_id, conversation_id, domain_tag, reference, generated, mode;
    std::vector<std::string> context, retrieved;
};

std::vector<GenerationRow> load_generations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open generations file: " + path);
    std::vector<GenerationRow> rows;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed JSON: " + e.what());
        }
        GenerationRow r;
        r.user_id = j.at("user_id").get<std::string>();
        r.generated = j.at("generated").get<std::string>();
        r.mode = j.value("mode", "none");
        r.conversation_id = j.value("conversation_id", "");
        r.domain_tag = j.value("domain_tag", "");
        r.reference = j.value("reference", "");
        if (j.contains("context")) r.context = j["context"].get<std::vector<std::string>>();
        if (j.contains("retrieved")) r.retrieved = j["retrieved"].get<std::vector<std::string>>();
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("generations file is empty: " + path);
    return rows;
}

}  // namespace

evalsuite::MetricReport cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts) {
    cfg.validate();
    ensure_out_dir(cfg);
    const std::vector<GenerationRow> rows = load_generations(opts.generations_path);

    evalsuite::MetricReport report;
    report.metadata["generations"] = opts.generations_path;
    report.metadata["seed"] = std::to_string(cfg.seed);
    report.metadata["mode"] = rows.front().mode;

    std::vector<std::string> generated, references;
    for (const auto& r : rows) {
        generated.push_back(r.generated);
        references.push_back(r.reference);
    }

    auto add_metric = [&](const std::string& name, std::vector<double> values) {
        double mean = 0;
        for (double v : values) mean += v;
        report.scalars[name] = values.empty() ? 0.0 : mean / static_cast<double>(values.size());
        report.per_example[name] = std::move(values);
    };

    std::vector<double> bleu1, bleu2, rougel, meteor;
    for (size_t i = 0; i < rows.size(); ++i) {
        bleu1.push_back(evalsuite::bleu(generated[i], references[i], 1).value);
        bleu2.push_back(evalsuite::bleu(generated[i], references[i], 2).value);
        rougel.push_back(evalsuite::rouge_l(generated[i], references[i]).value);
        meteor.push_back(evalsuite::meteor_lite(generated[i], references[i]));
    }
    add_metric("bleu1", std::move(bleu1));
    add_metric("bleu2", std::move(bleu2));
    add_metric("rouge_l", std::move(rougel));
    add_metric("meteor_lite", std::move(meteor));

    const evalsuite::StyleConsistency consistency =
        evalsuite::style_consistency(generated, references);
    add_metric("style_punctuation", consistency.punct_per_example);
    add_metric("style_contraction", consistency.contraction_per_example);
    add_metric("style_casing", consistency.casing_per_example);

    if (!opts.retriever_style_path.empty()) {
        const retriever::RetrieverModel style_model = retriever::RetrieverModel::load(
            opts.retriever_style_path, retriever::Flavor::style);
        auto embed = [&](const std::string& text) { return style_model.target_embedding(text); };

        std::vector<double> sims;
        for (size_t i = 0; i < rows.size(); ++i) {
            const std::string& gen = generated[i].empty() ? "." : generated[i];
            sims.push_back(evalsuite::style_similarity(embed(gen), embed(references[i])));
        }
        add_metric("style_embed_sim", std::move(sims));

        if (!cfg.data.empty() && fs::exists(cfg.data)) {
            const auto ground_truth = corpus::load_conversations(cfg.data);
            std::vector<evalsuite::GeneratedResponse> anchors;
            for (const auto& r : rows)
                anchors.push_back({r.generated.empty() ? "." : r.generated, r.user_id,
                                   r.domain_tag});
            size_t skipped = 0;
            const auto triplets =
                evalsuite::build_cav_triplets(anchors, ground_truth, cfg.seed, &skipped);
            std::vector<double> per_triplet;
            for (const auto& t : triplets) {
                const double correct = evalsuite::style_similarity(embed(t.anchor),
                                                                   embed(t.positive)) >
                                               evalsuite::style_similarity(embed(t.anchor),
                                                                           embed(t.negative))
                                           ? 1.0
                                           : 0.0;
                per_triplet.push_back(correct);
            }
            double acc = 0;
            for (double v : per_triplet) acc += v;
            report.scalars["cav_accuracy"] = acc / static_cast<double>(per_triplet.size());
            report.scalars["cav_skipped"] = static_cast<double>(skipped);
            report.per_example["cav_correct"] = std::move(per_triplet);
        }
    }

    if (!opts.generator_path.empty()) {
        const prefgen::CapModel model = prefgen::CapModel::load(opts.generator_path);
        Real total_nll = 0;
        size_t total_tokens = 0;
        std::vector<double> nlls;
        for (const auto& r : rows) {
            if (r.reference.empty() || r.context.empty()) continue;
            const prefgen::FusionMode mode = prefgen::fusion_mode_from_name(r.mode);
            const Real nll = model.nll(r.context, r.retrieved, r.reference, mode)->scalar();
            const size_t n_tok = model.vocab.encode(r.reference).size() + 1;
            nlls.push_back(static_cast<double>(nll));
            total_nll += nll * static_cast<Real>(n_tok);
            total_tokens += n_tok;
        }
        if (total_tokens > 0) {
            report.scalars["perplexity"] =
                std::exp(static_cast<double>(total_nll) / static_cast<double>(total_tokens));
            report.per_example["reference_nll"] = std::move(nlls);
        }
    }

    if (opts.traits_metrics) {
        if (cfg.traits.empty() || !fs::exists(cfg.traits))
            throw ConfigError("traits path is required for trait metrics");
        const auto records = corpus::load_traits(cfg.traits);
        // deterministic record split: fit on the first 80%, eval on the rest
        const size_t cut = records.size() * 8 / 10;
        if (cut == 0 || cut == records.size())
            throw ConfigError("traits file too small to split for evaluation");
        const std::vector<corpus::TraitRecord> fit_set(records.begin(), records.begin() + cut);
        const std::vector<corpus::TraitRecord> eval_set(records.begin() + cut, records.end());
        for (evalsuite::TraitTask task :
             {evalsuite::TraitTask::age, evalsuite::TraitTask::gender,
              evalsuite::TraitTask::mbti_ie, evalsuite::TraitTask::mbti_sn,
              evalsuite::TraitTask::mbti_tf, evalsuite::TraitTask::mbti_jp}) {
            try {
                const auto model = evalsuite::fit_traits(fit_set, task);
                const auto eval = evalsuite::eval_traits(model, eval_set);
                report.scalars[std::string("traits_") + evalsuite::trait_task_name(task)] =
                    eval.score;
            } catch (const std::invalid_argument&) {
                // task label absent from this corpus; skip
            }
        }
    }

    if (!opts.report_path.empty()) report.save(opts.report_path);
    return report;
}

evalsuite::TTestResult cmd_significance(const std::string& report_a, const std::string& report_b,
                                        const std::string& metric, size_t n_subsets,
                                        size_t subset_size, uint64_t seed,
                                        const std::string& out_path) {
    const evalsuite::MetricReport a = evalsuite::MetricReport::load(report_a);
    const evalsuite::MetricReport b = evalsuite::MetricReport::load(report_b);
    auto ia = a.per_example.find(metric);
    auto ib = b.per_example.find(metric);
    if (ia == a.per_example.end())
        throw ConfigError("metric not present in report A: " + metric);
    if (ib == b.per_example.end())
        throw ConfigError("metric not present in report B: " + metric);
    const auto result =
        evalsuite::paired_t_test(ia->second, ib->second, n_subsets, subset_size, seed);
    if (!out_path.empty()) {
        json j;
        j["metric"] = metric;
        j["p_value"] = result.p_value;
        j["t_stat"] = result.t_stat;
        j["n_subsets"] = result.n_subsets;
        j["flagged"] = result.flagged;
        j["flag_reason"] = result.flag_reason;
        std::ofstream f(out_path, std::ios::trunc);
        f << j.dump(2) << "\n";
    }
    return result;
}

}  // namespace recap::cli
