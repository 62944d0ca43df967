#include "recap/tokenizer.hpp"

#include <map>
#include <stdexcept>

namespace recap::nn {

namespace {

std::vector<int> to_byte_ids(const std::string& text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int>(Vocab::byte_base + c));
    return ids;
}

void apply_merge(std::vector<int>& seq, int left, int right, int merged) {
    size_t w = 0;
    for (size_t r = 0; r < seq.size();) {
        if (r + 1 < seq.size() && seq[r] == left && seq[r + 1] == right) {
            seq[w++] = merged;
            r += 2;
        } else {
            seq[w++] = seq[r++];
        }
    }
    seq.resize(w);
}

Vocab base_vocab() {
    Vocab v;
    v.token_bytes.assign(Vocab::n_special, std::string());
    for (int b = 0; b < 256; ++b) v.token_bytes.push_back(std::string(1, static_cast<char>(b)));
    return v;
}

}  // namespace

Vocab Vocab::train(const std::vector<std::string>& texts, size_t vocab_size) {
    if (vocab_size < base_size)
        throw std::invalid_argument("Vocab::train: vocab_size must be >= " +
                                    std::to_string(base_size));
    Vocab v = base_vocab();
    std::vector<std::vector<int>> seqs;
    seqs.reserve(texts.size());
    for (const auto& t : texts) seqs.push_back(to_byte_ids(t));

    const size_t n_merges = vocab_size - base_size;
    for (size_t mi = 0; mi < n_merges; ++mi) {
        std::map<std::pair<int, int>, size_t> counts;
        for (const auto& s : seqs)
            for (size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
        if (counts.empty()) break;
        std::pair<int, int> best{-1, -1};
        size_t best_count = 0;
        for (const auto& [pair, cnt] : counts) {
            if (cnt < best_count) continue;
            if (cnt > best_count) {
                best = pair;
                best_count = cnt;
                continue;
            }
            const auto key = std::make_pair(v.token_bytes[pair.first], v.token_bytes[pair.second]);
            const auto best_key =
                std::make_pair(v.token_bytes[best.first], v.token_bytes[best.second]);
            if (key < best_key) best = pair;
        }
        const int merged = static_cast<int>(v.token_bytes.size());
        v.token_bytes.push_back(v.token_bytes[best.first] + v.token_bytes[best.second]);
        v.merges.push_back(best);
        for (auto& s : seqs) apply_merge(s, best.first, best.second, merged);
    }
    return v;
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> seq = to_byte_ids(text);
    for (size_t mi = 0; mi < merges.size(); ++mi)
        apply_merge(seq, merges[mi].first, merges[mi].second,
                    static_cast<int>(base_size + mi));
    return seq;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || static_cast<size_t>(id) >= token_bytes.size())
            throw std::invalid_argument("Vocab::decode: id out of range: " + std::to_string(id));
        out += token_bytes[static_cast<size_t>(id)];
    }
    return out;
}

std::vector<uint8_t> Vocab::serialize() const {
    std::vector<uint8_t> out;
    auto put_u32 = [&](uint32_t x) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((x >> (8 * i)) & 0xff));
    };
    put_u32(static_cast<uint32_t>(merges.size()));
    for (const auto& [l, r] : merges) {
        put_u32(static_cast<uint32_t>(l));
        put_u32(static_cast<uint32_t>(r));
    }
    return out;
}

Vocab Vocab::deserialize(const std::vector<uint8_t>& bytes) {
    size_t pos = 0;
    auto get_u32 = [&]() -> uint32_t {
        if (pos + 4 > bytes.size())
            throw std::runtime_error("Vocab::deserialize: truncated data");
        uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(bytes[pos++]) << (8 * i);
        return x;
    };
    Vocab v = base_vocab();
    const uint32_t n_merges = get_u32();
    for (uint32_t i = 0; i < n_merges; ++i) {
        const int l = static_cast<int>(get_u32());
        const int r = static_cast<int>(get_u32());
        if (l < 0 || r < 0 || static_cast<size_t>(l) >= v.token_bytes.size() ||
            static_cast<size_t>(r) >= v.token_bytes.size())
            throw std::runtime_error("Vocab::deserialize: merge id out of range");
        v.merges.emplace_back(l, r);
        v.token_bytes.push_back(v.token_bytes[l] + v.token_bytes[r]);
    }
    return v;
}

}  // namespace recap::nn
