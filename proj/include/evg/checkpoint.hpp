#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evg/model.hpp"

namespace evg {

// HCK1 layout, little-endian:
//   magic "HCK1", version u32, config_len u32, config JSON bytes,
//   tensor_count u32, then per tensor:
//   name_len u32, name bytes, rank u32, dims u32[rank], f32 values.

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorCode {
  kTruncated,
  kBadMagic,
  kUnsupportedVersion,
  kBadConfig,
  kDuplicateParameter,
  kMissingParameter,
  kUnexpectedParameter,
  kShapeMismatch,
  kTrailingBytes,
};

std::string_view to_string(CheckpointErrorCode code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorCode code, std::string detail);
  CheckpointErrorCode code() const noexcept { return code_; }

 private:
  CheckpointErrorCode code_;
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// Tensors are written in the model's canonical parameter order.
std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const ModelConfig& config);
/// Accepts tensors in any order; the result is in canonical order.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const ModelConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evg
