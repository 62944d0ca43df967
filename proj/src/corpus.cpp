#include "recap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace recap::corpus {

using nlohmann::json;

namespace {

[[noreturn]] void line_error(const std::string& path, size_t line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

const json& require_field(const json& j, const char* field, const std::string& path,
                          size_t line_no) {
    auto it = j.find(field);
    if (it == j.end()) line_error(path, line_no, std::string("missing required field: ") + field);
    return *it;
}

bool valid_mbti(const std::string& m) {
    static const char* axes = "IE SN TF JP";
    if (m.size() != 4) return false;
    for (int i = 0; i < 4; ++i) {
        const char a = axes[i * 3], b = axes[i * 3 + 1];
        if (m[i] != a && m[i] != b) return false;
    }
    return true;
}

bool sample_time_less(const Sample& a, const Sample& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.conversation_id < b.conversation_id;
}

}  // namespace

std::vector<Sample> load_conversations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open corpus file: " + path);
    std::vector<Sample> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            line_error(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        Sample s;
        s.user_id = require_field(j, "user_id", path, line_no).get<std::string>();
        s.conversation_id = require_field(j, "conversation_id", path, line_no).get<std::string>();
        s.timestamp = require_field(j, "timestamp", path, line_no).get<int64_t>();
        s.context = require_field(j, "context", path, line_no).get<std::vector<std::string>>();
        s.response = require_field(j, "response", path, line_no).get<std::string>();
        if (j.contains("domain_tag") && !j["domain_tag"].is_null())
            s.domain_tag = j["domain_tag"].get<std::string>();
        if (s.context.empty()) line_error(path, line_no, "context must be non-empty");
        if (s.response.empty()) line_error(path, line_no, "response must be non-empty");
        if (s.timestamp < 0) line_error(path, line_no, "timestamp must be >= 0");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TraitRecord> load_traits(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open traits file: " + path);
    std::vector<TraitRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            line_error(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        TraitRecord r;
        r.user_id = require_field(j, "user_id", path, line_no).get<std::string>();
        r.responses = require_field(j, "responses", path, line_no).get<std::vector<std::string>>();
        if (j.contains("age") && !j["age"].is_null()) r.age = j["age"].get<double>();
        if (j.contains("gender") && !j["gender"].is_null()) {
            const int g = j["gender"].get<int>();
            if (g != 0 && g != 1) line_error(path, line_no, "gender must be binary 0/1");
            r.gender = g;
        }
        if (j.contains("mbti") && !j["mbti"].is_null()) {
            const std::string m = j["mbti"].get<std::string>();
            if (!valid_mbti(m))
                line_error(path, line_no, "mbti must be 4 letters over I/E S/N T/F J/P: " + m);
            r.mbti = m;
        }
        if (!r.age && !r.gender && !r.mbti)
            line_error(path, line_no, "trait record must carry at least one trait");
        out.push_back(std::move(r));
    }
    return out;
}

std::string sample_to_json(const Sample& s) {
    json j{{"user_id", s.user_id},
           {"conversation_id", s.conversation_id},
           {"timestamp", s.timestamp},
           {"context", s.context},
           {"response", s.response},
           {"domain_tag", s.domain_tag}};
    return j.dump();
}

std::string trait_to_json(const TraitRecord& r) {
    json j{{"user_id", r.user_id}, {"responses", r.responses}};
    j["age"] = r.age ? json(*r.age) : json(nullptr);
    j["gender"] = r.gender ? json(*r.gender) : json(nullptr);
    j["mbti"] = r.mbti ? json(*r.mbti) : json(nullptr);
    return j.dump();
}

void write_conversations(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& s : samples) f << sample_to_json(s) << "\n";
}

void write_traits(const std::string& path, const std::vector<TraitRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& r : records) f << trait_to_json(r) << "\n";
}

CorpusSplit split_by_user(const std::vector<Sample>& samples, double train_frac,
                          double valid_frac, double test_frac, uint64_t seed) {
    if (std::abs(train_frac + valid_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("split_by_user: fractions must sum to 1");

    std::set<std::tuple<std::string, std::string, int64_t>> keys;
    std::map<std::string, std::vector<Sample>> by_user;
    for (const auto& s : samples) {
        auto key = std::make_tuple(s.user_id, s.conversation_id, s.timestamp);
        if (!keys.insert(key).second)
            throw std::invalid_argument("split_by_user: duplicate sample key (" + s.user_id +
                                        ", " + s.conversation_id + ", " +
                                        std::to_string(s.timestamp) + ")");
        by_user[s.user_id].push_back(s);
    }
    if (by_user.size() < 3)
        throw std::invalid_argument("split_by_user: need at least 3 distinct users, have " +
                                    std::to_string(by_user.size()));

    std::vector<std::string> users;
    users.reserve(by_user.size());
    for (const auto& [u, v] : by_user) users.push_back(u);
    // by_user is ordered, so `users` is sorted; Fisher-Yates on top is
    // then a pure function of the seed.
    Rng rng(seed);
    for (size_t i = users.size(); i > 1; --i)
        std::swap(users[i - 1], users[rng.uniform_int(i)]);

    const size_t n = users.size();
    const size_t cut1 = static_cast<size_t>(std::llround(train_frac * static_cast<double>(n)));
    const size_t cut2 = static_cast<size_t>(
        std::llround((train_frac + valid_frac) * static_cast<double>(n)));

    CorpusSplit split;
    split.train_users.assign(users.begin(), users.begin() + cut1);
    split.valid_users.assign(users.begin() + cut1, users.begin() + cut2);
    split.test_users.assign(users.begin() + cut2, users.end());
    std::sort(split.train_users.begin(), split.train_users.end());
    std::sort(split.valid_users.begin(), split.valid_users.end());
    std::sort(split.test_users.begin(), split.test_users.end());

    for (auto& [user, list] : by_user) {
        std::sort(list.begin(), list.end(), sample_time_less);
        UserSamples us;
        const size_t n_train = std::min(kTrainCapPerUser, list.size());
        us.training.assign(list.end() - static_cast<ptrdiff_t>(n_train), list.end());
        const size_t n_rest = list.size() - n_train;
        const size_t n_hist = std::min(kHistoryCapPerUser, n_rest);
        us.history.assign(list.begin() + static_cast<ptrdiff_t>(n_rest - n_hist),
                          list.begin() + static_cast<ptrdiff_t>(n_rest));
        split.samples.emplace(user, std::move(us));
    }
    return split;
}

UserHistory build_user_history(const std::vector<Sample>& samples, const std::string& user_id,
                               size_t cap) {
    if (cap < 1) throw std::invalid_argument("build_user_history: cap must be >= 1");
    UserHistory h;
    h.user_id = user_id;
    for (const auto& s : samples)
        if (s.user_id == user_id) h.pairs.push_back(s);
    std::sort(h.pairs.begin(), h.pairs.end(), sample_time_less);
    if (h.pairs.size() > cap)
        h.pairs.erase(h.pairs.begin(),
                      h.pairs.begin() + static_cast<ptrdiff_t>(h.pairs.size() - cap));
    return h;
}

UserHistory history_of(const CorpusSplit& split, const std::string& user_id) {
    UserHistory h;
    h.user_id = user_id;
    auto it = split.samples.find(user_id);
    if (it == split.samples.end()) return h;
    h.pairs = it->second.history;
    return h;
}

}  // namespace recap::corpus
