#include "evg/events.hpp"

#include <fstream>
#include <sstream>

#include "evg/detail/byte_io.hpp"

namespace evg {

std::string_view to_string(StreamRule rule) {
  switch (rule) {
    case StreamRule::kOutOfBounds: return "out_of_bounds";
    case StreamRule::kBadPolarity: return "bad_polarity";
    case StreamRule::kTimestampOrder: return "timestamp_order";
    case StreamRule::kBadGeometry: return "bad_geometry";
  }
  return "unknown";
}

std::string ValidationReport::describe(std::size_t max_items) const {
  if (ok()) return "ok";
  std::ostringstream os;
  os << violations.size() << " violation(s):";
  for (std::size_t i = 0; i < violations.size() && i < max_items; ++i) {
    os << " [" << violations[i].index << ": " << to_string(violations[i].rule) << "]";
  }
  if (violations.size() > max_items) os << " ...";
  return os.str();
}

ValidationReport validate_stream(const EventStream& stream) {
  ValidationReport report;
  const auto& g = stream.geometry;
  if (g.width == 0 || g.height == 0) {
    report.violations.push_back({0, StreamRule::kBadGeometry});
  }
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (!g.contains(e.x, e.y)) report.violations.push_back({i, StreamRule::kOutOfBounds});
    if (e.p > 1) report.violations.push_back({i, StreamRule::kBadPolarity});
    if (i > 0 && e.t < stream.events[i - 1].t) {
      report.violations.push_back({i, StreamRule::kTimestampOrder});
    }
  }
  return report;
}

InvalidStreamError::InvalidStreamError(ValidationReport report)
    : std::runtime_error("invalid event stream: " + report.describe()),
      report_(std::move(report)) {}

std::string_view to_string(DecodeErrorCode code) {
  switch (code) {
    case DecodeErrorCode::kTruncatedHeader: return "truncated_header";
    case DecodeErrorCode::kBadMagic: return "bad_magic";
    case DecodeErrorCode::kUnsupportedVersion: return "unsupported_version";
    case DecodeErrorCode::kBadGeometry: return "bad_geometry";
    case DecodeErrorCode::kNonZeroReserved: return "nonzero_reserved";
    case DecodeErrorCode::kTruncatedRecord: return "truncated_record";
    case DecodeErrorCode::kTrailingBytes: return "trailing_bytes";
    case DecodeErrorCode::kOutOfBounds: return "out_of_bounds";
    case DecodeErrorCode::kBadPolarity: return "bad_polarity";
    case DecodeErrorCode::kTimestampOrder: return "timestamp_order";
  }
  return "unknown";
}

DecodeError::DecodeError(DecodeErrorCode code, std::string detail)
    : std::runtime_error("HEV1 decode error (" + std::string(to_string(code)) + "): " + detail),
      code_(code) {}

namespace {
constexpr char kMagic[4] = {'H', 'E', 'V', '1'};
}

// Header: magic[4] version:u16 width:u16 height:u16 reserved:u16 count:u32.
// Record: t:u64 x:u16 y:u16 p:u8 reserved[3].
std::vector<std::uint8_t> encode_events(const EventStream& stream) {
  auto report = validate_stream(stream);
  if (!report.ok()) throw InvalidStreamError(std::move(report));
  if (stream.events.size() > UINT32_MAX) {
    throw std::length_error("HEV1 supports at most 2^32-1 records");
  }

  detail::ByteWriter w;
  w.reserve(kHev1HeaderSize + kHev1RecordSize * stream.events.size());
  w.put_string(std::string_view(kMagic, 4));
  w.put<std::uint16_t>(kHev1Version);
  w.put<std::uint16_t>(stream.geometry.width);
  w.put<std::uint16_t>(stream.geometry.height);
  w.put<std::uint16_t>(0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(stream.events.size()));
  for (const Event& e : stream.events) {
    w.put<std::uint64_t>(e.t);
    w.put<std::uint16_t>(e.x);
    w.put<std::uint16_t>(e.y);
    w.put<std::uint8_t>(e.p);
    w.put<std::uint8_t>(0);
    w.put<std::uint16_t>(0);
  }
  return std::move(w).take();
}

EventStream decode_events(std::span<const std::uint8_t> bytes) {
  using enum DecodeErrorCode;
  if (bytes.size() < kHev1HeaderSize) {
    throw DecodeError(kTruncatedHeader, std::to_string(bytes.size()) + " bytes");
  }
  detail::ByteReader r(bytes);
  auto magic = *r.get_bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DecodeError(kBadMagic, "expected \"HEV1\"");
  auto version = *r.get<std::uint16_t>();
  if (version != kHev1Version) {
    throw DecodeError(kUnsupportedVersion, "version " + std::to_string(version));
  }
  EventStream stream;
  stream.geometry.width = *r.get<std::uint16_t>();
  stream.geometry.height = *r.get<std::uint16_t>();
  if (stream.geometry.width == 0 || stream.geometry.height == 0) {
    throw DecodeError(kBadGeometry, "zero width or height");
  }
  if (*r.get<std::uint16_t>() != 0) throw DecodeError(kNonZeroReserved, "header");
  const std::uint32_t count = *r.get<std::uint32_t>();

  const std::uint64_t needed = std::uint64_t{count} * kHev1RecordSize;
  if (r.remaining() < needed) {
    throw DecodeError(kTruncatedRecord, "header declares " + std::to_string(count) +
                                            " records, payload holds " +
                                            std::to_string(r.remaining() / kHev1RecordSize));
  }
  if (r.remaining() > needed) {
    throw DecodeError(kTrailingBytes, std::to_string(r.remaining() - needed) + " extra bytes");
  }

  stream.events.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Event e;
    e.t = *r.get<std::uint64_t>();
    e.x = *r.get<std::uint16_t>();
    e.y = *r.get<std::uint16_t>();
    e.p = *r.get<std::uint8_t>();
    const auto pad0 = *r.get<std::uint8_t>();
    const auto pad1 = *r.get<std::uint16_t>();
    const std::string at = "record " + std::to_string(i);
    if (pad0 != 0 || pad1 != 0) throw DecodeError(kNonZeroReserved, at);
    if (!stream.geometry.contains(e.x, e.y)) throw DecodeError(kOutOfBounds, at);
    if (e.p > 1) throw DecodeError(kBadPolarity, at);
    if (!stream.events.empty() && e.t < stream.events.back().t) {
      throw DecodeError(kTimestampOrder, at);
    }
    stream.events.push_back(e);
  }
  return stream;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw std::runtime_error("read failed: " + path.string());
  }
  return bytes;
}

void write_hev1(const std::filesystem::path& path, const EventStream& stream) {
  const auto bytes = encode_events(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EventStream read_hev1(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_events(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace evg
