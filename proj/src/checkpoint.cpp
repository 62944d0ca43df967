#include "recap/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace recap::nn {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'K', 'P'};
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeF64 = 1;
constexpr uint8_t kDtypeBytes = 2;

constexpr const char* kVocabName = "__vocab__";
constexpr const char* kConfigName = "__config__";
constexpr const char* kModuleName = "__module__";

void put_u32(std::string& out, uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void append_tensor_entry(std::string& out, const std::string& name, uint8_t dtype,
                         const std::vector<uint64_t>& dims, const void* payload,
                         size_t payload_bytes) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<uint32_t>(dims.size()));
    for (uint64_t d : dims) put_u64(out, d);
    out.push_back(static_cast<char>(dtype));
    out.append(static_cast<const char*>(payload), payload_bytes);
}

void append_real_tensor(std::string& out, const std::string& name, const Tensor& t) {
    std::vector<uint64_t> dims(t.shape.begin(), t.shape.end());
#ifdef RECAP_USE_FLOAT32
    const uint8_t dtype = kDtypeF32;
#else
    const uint8_t dtype = kDtypeF64;
#endif
    // Real is IEEE; serialize value-by-value to stay endian-explicit.
    std::string payload;
    payload.reserve(t.data.size() * sizeof(Real));
    for (Real v : t.data) {
        if constexpr (sizeof(Real) == 4) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(payload, bits);
        } else {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(payload, bits);
        }
    }
    append_tensor_entry(out, name, dtype, dims, payload.data(), payload.size());
}

void append_blob(std::string& out, const std::string& name, const std::vector<uint8_t>& bytes) {
    append_tensor_entry(out, name, kDtypeBytes, {static_cast<uint64_t>(bytes.size())},
                        bytes.data(), bytes.size());
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    uint32_t u32() {
        need(4);
        uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(byte()) << (8 * i);
        return x;
    }
    uint64_t u64() {
        need(8);
        uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(byte()) << (8 * i);
        return x;
    }
    uint8_t u8() {
        need(1);
        return byte();
    }
    std::string str(size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    uint8_t byte() { return static_cast<uint8_t>(data_[pos_++]); }
    void need(size_t n) const {
        if (pos_ + n > data_.size())
            throw std::runtime_error("checkpoint: truncated file");
    }
    std::string data_;
    size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& module_tag,
                     const ParamList& params, const Vocab* vocab,
                     const std::string& config_json) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kCheckpointVersion);

    uint32_t count = static_cast<uint32_t>(params.size()) + 2;  // + module + config
    if (vocab) ++count;
    put_u32(out, count);

    append_blob(out, kModuleName, std::vector<uint8_t>(module_tag.begin(), module_tag.end()));
    append_blob(out, kConfigName, std::vector<uint8_t>(config_json.begin(), config_json.end()));
    if (vocab) append_blob(out, kVocabName, vocab->serialize());
    for (const auto& [name, node] : params) append_real_tensor(out, name, node->value);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_tag) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(data));

    if (r.str(4) != std::string(kMagic, 4))
        throw std::runtime_error("checkpoint: not a checkpoint: " + path);
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    const uint32_t count = r.u32();
    for (uint32_t ti = 0; ti < count; ++ti) {
        const uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        const uint32_t rank = r.u32();
        std::vector<size_t> shape;
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const uint64_t dim = r.u64();
            shape.push_back(static_cast<size_t>(dim));
            numel *= static_cast<size_t>(dim);
        }
        const uint8_t dtype = r.u8();
        if (dtype == kDtypeBytes) {
            const std::string payload = r.str(numel);
            if (name == kModuleName) {
                ckpt.module_tag = payload;
            } else if (name == kConfigName) {
                ckpt.config_json = payload;
            } else if (name == kVocabName) {
                ckpt.vocab =
                    Vocab::deserialize(std::vector<uint8_t>(payload.begin(), payload.end()));
            } else {
                throw std::runtime_error("checkpoint: unknown blob entry: " + name);
            }
            continue;
        }
        Tensor t(shape);
        if (dtype == kDtypeF32) {
            const std::string payload = r.str(numel * 4);
            for (size_t i = 0; i < numel; ++i) {
                uint32_t bits = 0;
                for (int b = 0; b < 4; ++b)
                    bits |= static_cast<uint32_t>(static_cast<uint8_t>(payload[i * 4 + b]))
                            << (8 * b);
                float v;
                std::memcpy(&v, &bits, 4);
                t.data[i] = static_cast<Real>(v);
            }
        } else if (dtype == kDtypeF64) {
            const std::string payload = r.str(numel * 8);
            for (size_t i = 0; i < numel; ++i) {
                uint64_t bits = 0;
                for (int b = 0; b < 8; ++b)
                    bits |= static_cast<uint64_t>(static_cast<uint8_t>(payload[i * 8 + b]))
                            << (8 * b);
                double v;
                std::memcpy(&v, &bits, 8);
                t.data[i] = static_cast<Real>(v);
            }
        } else {
            throw std::runtime_error("checkpoint: unknown dtype tag " + std::to_string(dtype));
        }
        ckpt.tensors.emplace(name, std::move(t));
    }
    if (!r.at_end()) throw std::runtime_error("checkpoint: trailing bytes");

    if (!expected_tag.empty() && ckpt.module_tag != expected_tag)
        throw std::runtime_error("checkpoint: wrong module type: expected " + expected_tag +
                                 ", found " + ckpt.module_tag);
    return ckpt;
}

void restore_params(const Checkpoint& ckpt, ParamList& params) {
    for (auto& [name, node] : params) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw std::runtime_error("checkpoint: missing tensor " + name);
        if (it->second.shape != node->value.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        node->value = it->second;
    }
}

}  // namespace recap::nn
