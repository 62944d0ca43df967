#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recap/common.hpp"

namespace recap::corpus {

// One (user, context turns, response) record; the atom of both training
// data and retrievable history.
struct Sample {
    std::string user_id;
    std::string conversation_id;
    int64_t timestamp = 0;
    std::vector<std::string> context;
    std::string response;
    std::string domain_tag;

    bool operator==(const Sample&) const = default;
};

struct UserHistory {
    std::string user_id;
    std::vector<Sample> pairs;  // ascending (timestamp, conversation_id)
};

struct UserSamples {
    std::vector<Sample> training;  // newest <= 10, ascending order
    std::vector<Sample> history;   // next-newest <= 100 older samples, ascending
};

struct CorpusSplit {
    std::vector<std::string> train_users, valid_users, test_users;
    std::map<std::string, UserSamples> samples;
};

struct TraitRecord {
    std::string user_id;
    std::vector<std::string> responses;
    std::optional<double> age;
    std::optional<int> gender;  // binary 0/1
    std::optional<std::string> mbti;
};

inline constexpr size_t kTrainCapPerUser = 10;
inline constexpr size_t kHistoryCapPerUser = 100;

std::vector<Sample> load_conversations(const std::string& path);
std::vector<TraitRecord> load_traits(const std::string& path);

void write_conversations(const std::string& path, const std::vector<Sample>& samples);
void write_traits(const std::string& path, const std::vector<TraitRecord>& records);

std::string sample_to_json(const Sample& s);
std::string trait_to_json(const TraitRecord& r);

// Shuffle users by seed, slice by fractions, then per user keep the 10
// newest samples for generator training and the 100 newest of the
// remaining older ones as retrievable history.
CorpusSplit split_by_user(const std::vector<Sample>& samples,
                          double train_frac, double valid_frac, double test_frac,
                          uint64_t seed);

// Newest `cap` samples of the user in ascending time order; unknown user
// yields an empty history.
UserHistory build_user_history(const std::vector<Sample>& samples, const std::string& user_id,
                               size_t cap = kHistoryCapPerUser);

// UserHistory over already-split per-user lists (history + training order)
UserHistory history_of(const CorpusSplit& split, const std::string& user_id);

}  // namespace recap::corpus
