#include "evg/checkpoint.hpp"

#include <fstream>
#include <limits>
#include <map>

#include "evg/detail/byte_io.hpp"

namespace evg {

std::string_view to_string(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::kTruncated: return "truncated";
    case CheckpointErrorCode::kBadMagic: return "bad_magic";
    case CheckpointErrorCode::kUnsupportedVersion: return "unsupported_version";
    case CheckpointErrorCode::kBadConfig: return "bad_config";
    case CheckpointErrorCode::kDuplicateParameter: return "duplicate_parameter";
    case CheckpointErrorCode::kMissingParameter: return "missing_parameter";
    case CheckpointErrorCode::kUnexpectedParameter: return "unexpected_parameter";
    case CheckpointErrorCode::kShapeMismatch: return "shape_mismatch";
    case CheckpointErrorCode::kTrailingBytes: return "trailing_bytes";
  }
  return "unknown";
}

CheckpointError::CheckpointError(CheckpointErrorCode code, std::string detail)
    : std::runtime_error("HCK1 error (" + std::string(to_string(code)) + "): " + detail),
      code_(code) {}

namespace {

constexpr char kMagic[4] = {'H', 'C', 'K', '1'};
constexpr std::uint32_t kMaxRank = 8;

template <typename T>
T need(std::optional<T> v, const char* what) {
  if (!v) throw CheckpointError(CheckpointErrorCode::kTruncated, std::string("reading ") + what);
  return *v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const ModelConfig& config) {
  const Model model(config);
  model.check_params(params);
  detail::ByteWriter w;
  w.put_string(std::string_view(kMagic, 4));
  w.put(kCheckpointVersion);
  const std::string text = config.to_json();
  w.put(static_cast<std::uint32_t>(text.size()));
  w.put_string(text);
  w.put(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    w.put(static_cast<std::uint32_t>(params.names[i].size()));
    w.put_string(params.names[i]);
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) w.put(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.put_f32(v);
  }
  return std::move(w).take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = need(r.get_bytes(4), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw CheckpointError(CheckpointErrorCode::kBadMagic, "expected \"HCK1\"");
  }
  const auto version = need(r.get<std::uint32_t>(), "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorCode::kUnsupportedVersion,
                          "version " + std::to_string(version));
  }
  const auto config_len = need(r.get<std::uint32_t>(), "config length");
  const auto config_bytes = need(r.get_bytes(config_len), "config block");
  Checkpoint out;
  std::vector<ParamShape> expected;
  try {
    out.config = ModelConfig::from_json(std::string(config_bytes.begin(), config_bytes.end()));
    expected = Model(out.config).param_shapes();
  } catch (const ModelConfigError& e) {
    throw CheckpointError(CheckpointErrorCode::kBadConfig, e.what());
  }

  const auto count = need(r.get<std::uint32_t>(), "tensor count");
  std::map<std::string, BasicTensor<float>> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = need(r.get<std::uint32_t>(), "name length");
    const auto name_bytes = need(r.get_bytes(name_len), "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = need(r.get<std::uint32_t>(), "rank");
    if (rank > kMaxRank) {
      throw CheckpointError(CheckpointErrorCode::kShapeMismatch,
                            "tensor '" + name + "' has rank " + std::to_string(rank));
    }
    std::vector<int> shape;
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = need(r.get<std::uint32_t>(), "dimension");
      if (dim > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw CheckpointError(CheckpointErrorCode::kShapeMismatch,
                              "tensor '" + name + "' dimension " + std::to_string(dim));
      }
      // Any real tensor fits in the remaining bytes; reject before allocating.
      const std::uint64_t limit = r.remaining() / 4;
      if (dim != 0 && n > limit / dim) {
        throw CheckpointError(CheckpointErrorCode::kTruncated, "tensor '" + name + "' data");
      }
      n *= dim;
      shape.push_back(static_cast<int>(dim));
    }
    BasicTensor<float> t(shape);
    for (auto& v : t.data) v = need(r.get_f32(), "tensor data");
    if (!table.emplace(name, std::move(t)).second) {
      throw CheckpointError(CheckpointErrorCode::kDuplicateParameter, name);
    }
  }
  if (r.remaining() != 0) {
    throw CheckpointError(CheckpointErrorCode::kTrailingBytes,
                          std::to_string(r.remaining()) + " bytes after tensor table");
  }

  for (const auto& s : expected) {
    auto it = table.find(s.name);
    if (it == table.end()) throw CheckpointError(CheckpointErrorCode::kMissingParameter, s.name);
    if (it->second.shape != s.shape) {
      throw CheckpointError(CheckpointErrorCode::kShapeMismatch,
                            s.name + " is " + shape_string(it->second.shape) + ", expected " +
                                shape_string(s.shape));
    }
    out.params.names.push_back(s.name);
    out.params.tensors.push_back(std::move(it->second));
    table.erase(it);
  }
  if (!table.empty()) {
    throw CheckpointError(CheckpointErrorCode::kUnexpectedParameter, table.begin()->first);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const ModelConfig& config) {
  const auto bytes = encode_checkpoint(params, config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace evg
