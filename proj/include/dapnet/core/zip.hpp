// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dapnet::core {

// Minimal zip container. Entries are written uncompressed (method 0) with
// fixed timestamps so identical content yields identical bytes. The reader
// also accepts deflate (method 8) so files produced by other tools load.
class ZipWriter {
 public:
  void add(std::string name, std::span<const std::uint8_t> bytes);
  void add(std::string name, std::string_view text);

  std::vector<std::uint8_t> finish() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> entries_;
};

class ZipReader {
 public:
  static ZipReader from_bytes(std::vector<std::uint8_t> bytes);
  static ZipReader open(const std::filesystem::path& path);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::vector<std::string> names() const;
  // Throws FormatError(kMissingEntry) when absent.
  const std::vector<std::uint8_t>& get(const std::string& name) const;
  std::string get_text(const std::string& name) const;

 private:
  std::map<std::string, std::vector<std::uint8_t>> entries_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Little-endian float32 packing shared by every tensor entry.
std::vector<std::uint8_t> pack_f32(std::span<const float> values);
std::vector<float> unpack_f32(std::span<const std::uint8_t> bytes);

}  // namespace dapnet::core
