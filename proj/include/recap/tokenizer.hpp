#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace recap::nn {

// Byte-level BPE. Ids 0..3 are the specials, 4..259 the raw bytes, and
// everything above a learned merge. Byte fallback makes encode/decode a
// lossless round trip on any input.
class Vocab {
public:
    static constexpr int pad_id = 0;
    static constexpr int bos_id = 1;
    static constexpr int eos_id = 2;
    static constexpr int sep_id = 3;
    static constexpr size_t n_special = 4;
    static constexpr size_t byte_base = n_special;  // byte b -> id byte_base + b
    static constexpr size_t base_size = n_special + 256;

    size_t size() const { return token_bytes.size(); }

    // Learn (vocab_size - 260) merges by greedy pair frequency,
    // ties broken lexicographically on the pair's byte strings.
    static Vocab train(const std::vector<std::string>& texts, size_t vocab_size);

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    std::vector<uint8_t> serialize() const;
    static Vocab deserialize(const std::vector<uint8_t>& bytes);

    bool operator==(const Vocab& o) const {
        return token_bytes == o.token_bytes && merges == o.merges;
    }

    std::vector<std::string> token_bytes;        // id -> byte string ("" for specials)
    std::vector<std::pair<int, int>> merges;     // learned order, ids into token_bytes
};

}  // namespace recap::nn
