// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/core/zip.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dapnet/core/error.hpp"

namespace dapnet::core {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
// 1980-01-01 00:00 in DOS format.
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;
constexpr std::uint16_t kDosTime = 0;

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 2 > b.size()) throw FormatError(FormatError::Kind::kTruncated, "zip: truncated record");
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError(FormatError::Kind::kTruncated, "zip: truncated record");
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
    throw FormatError(FormatError::Kind::kBadContainer, "zip: inflate init failed");
  }
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) {
    throw FormatError(FormatError::Kind::kTruncated, "zip: deflate stream ended early");
  }
  return out;
}

}  // namespace

void ZipWriter::add(std::string name, std::span<const std::uint8_t> bytes) {
  entries_.emplace_back(std::move(name), std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

void ZipWriter::add(std::string name, std::string_view text) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  add(std::move(name), std::span<const std::uint8_t>(p, text.size()));
}

std::vector<std::uint8_t> ZipWriter::finish() const {
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> central;
  for (const auto& [name, bytes] : entries_) {
    if (bytes.size() > 0xffffffffu) {
      throw ValidationError("zip: entry '" + name + "' exceeds 4 GiB");
    }
    const auto offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = crc_of(bytes);
    const auto size = static_cast<std::uint32_t>(bytes.size());
    const auto name_len = static_cast<std::uint16_t>(name.size());

    put32(out, kLocalSig);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // stored
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out.insert(out.end(), name.begin(), name.end());
    out.insert(out.end(), bytes.begin(), bytes.end());

    put32(central, kCentralSig);
    put16(central, 20);  // version made by
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosTime);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central.insert(central.end(), name.begin(), name.end());
  }
  const auto central_offset = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries_.size()));
  put16(out, static_cast<std::uint16_t>(entries_.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, central_offset);
  put16(out, 0);
  return out;
}

void ZipWriter::write(const std::filesystem::path& path) const { write_file_bytes(path, finish()); }

ZipReader ZipReader::from_bytes(std::vector<std::uint8_t> bytes) {
  const std::span<const std::uint8_t> b(bytes);
  if (b.size() < 22) {
    throw FormatError(FormatError::Kind::kBadContainer, "zip: file too small to be a zip archive");
  }
  // End-of-central-directory record sits in the last 22 + comment bytes.
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = b.size() >= 22 + 0xffff ? b.size() - 22 - 0xffff : 0;
  for (std::size_t at = b.size() - 22 + 1; at-- > lowest;) {
    if (get32(b, at) == kEndSig) {
      eocd = at;
      break;
    }
  }
  if (eocd == std::string::npos) {
    throw FormatError(FormatError::Kind::kBadContainer,
                      "zip: end-of-central-directory record not found");
  }
  const std::uint16_t count = get16(b, eocd + 10);
  std::size_t at = get32(b, eocd + 16);

  ZipReader reader;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (get32(b, at) != kCentralSig) {
      throw FormatError(FormatError::Kind::kBadContainer, "zip: corrupt central directory");
    }
    const std::uint16_t method = get16(b, at + 10);
    const std::uint32_t crc = get32(b, at + 16);
    const std::uint32_t csize = get32(b, at + 20);
    const std::uint32_t usize = get32(b, at + 24);
    const std::uint16_t name_len = get16(b, at + 28);
    const std::uint16_t extra_len = get16(b, at + 30);
    const std::uint16_t comment_len = get16(b, at + 32);
    const std::uint32_t local = get32(b, at + 42);
    if (at + 46 + name_len > b.size()) {
      throw FormatError(FormatError::Kind::kTruncated, "zip: truncated central directory");
    }
    std::string name(reinterpret_cast<const char*>(b.data() + at + 46), name_len);
    at += 46u + name_len + extra_len + comment_len;

    if (get32(b, local) != kLocalSig) {
      throw FormatError(FormatError::Kind::kBadContainer, "zip: bad local header for '" + name + "'");
    }
    const std::size_t data_at = local + 30u + get16(b, local + 26) + get16(b, local + 28);
    if (data_at + csize > b.size()) {
      throw FormatError(FormatError::Kind::kTruncated, "zip: entry '" + name + "' is truncated");
    }
    auto raw = b.subspan(data_at, csize);
    std::vector<std::uint8_t> content;
    if (method == 0) {
      content.assign(raw.begin(), raw.end());
    } else if (method == 8) {
      content = inflate_raw(raw, usize);
    } else {
      throw FormatError(FormatError::Kind::kBadContainer,
                        "zip: unsupported compression method " + std::to_string(method));
    }
    if (crc_of(content) != crc) {
      throw FormatError(FormatError::Kind::kChecksum, "zip: CRC mismatch in entry '" + name + "'");
    }
    reader.entries_[std::move(name)] = std::move(content);
  }
  return reader;
}

ZipReader ZipReader::open(const std::filesystem::path& path) {
  return from_bytes(read_file_bytes(path));
}

std::vector<std::string> ZipReader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

const std::vector<std::uint8_t>& ZipReader::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw FormatError(FormatError::Kind::kMissingEntry, "missing entry '" + name + "'");
  }
  return it->second;
}

std::string ZipReader::get_text(const std::string& name) const {
  const auto& bytes = get(name);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::vector<std::uint8_t> pack_f32(std::span<const float> values) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping");
  std::vector<std::uint8_t> out(values.size() * 4);
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<float> unpack_f32(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) {
    throw FormatError(FormatError::Kind::kShapeMismatch, "float32 payload length not a multiple of 4");
  }
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace dapnet::core
