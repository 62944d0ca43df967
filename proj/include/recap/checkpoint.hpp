#pragma once

#include <map>
#include <optional>
#include <string>

#include "recap/tensor.hpp"
#include "recap/tokenizer.hpp"
#include "recap/transformer.hpp"

namespace recap::nn {

// Container layout: magic "RCKP", u32 format version, u32 tensor count,
// then per tensor {u32 name length, UTF-8 name, u32 rank, u64 dims,
// u8 dtype tag, little-endian payload}. dtype tags: 0 = f32, 1 = f64,
// 2 = raw bytes. The vocab, the run-config snapshot, and the module tag
// ride along as byte blobs under reserved "__*__" names.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string module_tag;
    std::string config_json;
    std::optional<Vocab> vocab;
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const std::string& module_tag,
                     const ParamList& params, const Vocab* vocab,
                     const std::string& config_json);

// expected_tag empty = accept any module tag
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_tag = "");

// Copy checkpoint tensors into an existing parameter list by name.
void restore_params(const Checkpoint& ckpt, ParamList& params);

}  // namespace recap::nn
