#pragma once

// Reproducibility manifest: command line, seed, config hash, input/output
// file digests and wall time, written beside the outputs of every run.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "bms/errors.hpp"

namespace bms {

inline std::string sha256_hex(const void* data, std::size_t len) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (!EVP_Digest(data, len, md, &md_len, EVP_sha256(), nullptr))
    throw Error(ErrorCode::NumericFailure, "sha256 failed");
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < md_len; ++i) os << std::setw(2) << int(md[i]);
  return os.str();
}

inline std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, std::size_t(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  EVP_DigestFinal_ex(ctx, md, &md_len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < md_len; ++i) os << std::setw(2) << int(md[i]);
  return os.str();
}

struct RunManifest {
  std::string command;
  std::string tool_version = "0.1.0";
  std::uint64_t seed = 0;
  std::string config_hash;  // sha256 of the serialized effective config
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  double wall_seconds = 0.0;

  void add_input(const std::string& path) {
    inputs.emplace_back(path, sha256_file(path));
  }
  void add_output(const std::string& path) {
    outputs.emplace_back(path, sha256_file(path));
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& [p, d] : v) a.push_back({{"path", p}, {"sha256", d}});
      return a;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    j["wall_seconds"] = wall_seconds;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << to_json().dump(2) << "\n";
  }
};

// Wall-clock stopwatch for the manifest.
class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace bms
