// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "fetch.hpp"

#include <cctype>
#include <iomanip>
#include <sstream>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "evpose/error.hpp"
#include "evpose/pipeline.hpp"

namespace evpose::fetch {
namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("manifest: URL without scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("manifest: unsupported scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view json_text) {
  std::vector<ManifestEntry> entries;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& f : j.at("files")) {
      ManifestEntry e;
      e.url = f.at("url").get<std::string>();
      if (f.contains("name")) {
        e.name = f["name"].get<std::string>();
      } else {
        const std::string path = split_url(e.url).path;
        e.name = path.substr(path.find_last_of('/') + 1);
      }
      if (e.name.empty() || e.name.find('/') != std::string::npos || e.name == "." || e.name == "..") {
        throw ConfigError("manifest: bad file name for " + e.url);
      }
      if (f.contains("size")) e.size = f["size"].get<std::uint64_t>();
      if (f.contains("sha256")) {
        std::string hex = f["sha256"].get<std::string>();
        for (char& c : hex) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        e.sha256 = std::move(hex);
      }
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return entries;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void fetch_all(const std::vector<ManifestEntry>& entries, const std::filesystem::path& out_dir) {
  for (const ManifestEntry& e : entries) {
    const Url url = split_url(e.url);
    httplib::Client client(url.origin);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    auto res = client.Get(url.path);
    if (!res) {
      throw DataError("fetch " + e.url + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw DataError("fetch " + e.url + ": HTTP " + std::to_string(res->status));
    }
    const std::string& body = res->body;
    if (res->has_header("Content-Length")) {
      const auto declared = std::stoull(res->get_header_value("Content-Length"));
      if (declared != body.size()) {
        throw DataError("fetch " + e.url + ": received " + std::to_string(body.size()) +
                        " bytes, Content-Length says " + std::to_string(declared));
      }
    }
    if (e.size && *e.size != body.size()) {
      throw DataError("fetch " + e.url + ": received " + std::to_string(body.size()) +
                      " bytes, manifest says " + std::to_string(*e.size));
    }
    if (e.sha256 && sha256_hex(body) != *e.sha256) {
      throw DataError("fetch " + e.url + ": sha256 mismatch");
    }
    pipeline::write_file(out_dir / e.name, body);
  }
}

}  // namespace evpose::fetch
