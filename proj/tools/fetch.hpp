// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evpose::fetch {

/// One file to download. `size` and `sha256` are verified when present.
struct ManifestEntry {
  std::string url;
  std::string name;  ///< file name inside the output directory
  std::optional<std::uint64_t> size;
  std::optional<std::string> sha256;  ///< lowercase hex
};

/// {"files": [{"url": ..., "name": ..., "size": ..., "sha256": ...}, ...]}
/// `name` defaults to the last path component of the URL.
std::vector<ManifestEntry> parse_manifest(std::string_view json_text);

std::string sha256_hex(std::string_view bytes);

/// Downloads every entry into `out_dir`. A body whose length disagrees with
/// the Content-Length header or the manifest size, or whose digest differs,
/// raises DataError and nothing is written for that entry.
void fetch_all(const std::vector<ManifestEntry>& entries, const std::filesystem::path& out_dir);

}  // namespace evpose::fetch
