#include "tbent/manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "tbent/errors.hpp"

namespace tbent {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for checksumming");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw DataError("sha256 unavailable");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

void RunManifest::add_input(const std::string& path) { inputs.push_back({path, sha256_file(path)}); }

void RunManifest::add_output(const std::string& path) { outputs.push_back({path, sha256_file(path)}); }

nlohmann::json to_json(const RunManifest& m) {
  auto files = [](const std::vector<FileEntry>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  return {{"command", m.command},
          {"software_version", kSoftwareVersion},
          {"config", m.config},
          {"inputs", files(m.inputs)},
          {"outputs", files(m.outputs)},
          {"format_versions", m.format_versions},
          {"seeds", m.seeds},
          {"wall_clock_s", m.wall_clock_s}};
}

std::string write_manifest(const RunManifest& m, const std::string& primary_output) {
  const std::string path = primary_output + ".manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path + "'");
  out << to_json(m).dump(2) << '\n';
  return path;
}

}  // namespace tbent
