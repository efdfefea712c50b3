#pragma once

#include <string>
#include <string_view>

#include "triage/model.hpp"

namespace triage {

// Checkpoint file layout (little-endian):
//   8 bytes  magic "TRIAGECK"
//   u32      format version
//   u64      header length in bytes
//   header   UTF-8 JSON: model config, tokenizer hash, adapter state,
//            strategy settings and a tensor index {name, shape, offset}
//   data     float32 tensors, row-major, at the indexed float offsets
inline constexpr std::string_view kCheckpointMagic = "TRIAGECK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string tokenizer_hash;
  std::string strategy;       // strategy the model was trained for
  std::size_t max_len = 0;    // truncation length (document or concatenated)
  std::size_t segment_size = 0;
  std::string extra_json = "{}";  // free-form provenance (train config, seed, ...)
};

struct Checkpoint {
  EncoderModel<float> model;
  CheckpointMeta meta;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

void save_checkpoint(const std::string& path, const EncoderModel<float>& model, const CheckpointMeta& meta);
// Throws FormatError on a malformed or incompatible file.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace triage
