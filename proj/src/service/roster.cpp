#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "sonder/error.hpp"
#include "sonder/service.hpp"

namespace sonder {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::InvalidInput, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

Roster Roster::parse_csv(std::string_view text) {
  Roster roster;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::ParseError, "roster line " + std::to_string(line_no) + " lacks a comma");
    }
    std::string id = line.substr(0, comma);
    std::string hash = line.substr(comma + 1);
    if (line_no == 1 && id == "id") continue;  // header
    if (hash.rfind("sha256:", 0) == 0) hash.erase(0, 7);
    if (hash.size() != 64) {
      throw Error(ErrorCode::ParseError, "roster line " + std::to_string(line_no) + " has a malformed hash");
    }
    roster.hashes_[std::move(id)] = std::move(hash);
  }
  return roster;
}

Roster Roster::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open roster " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void Roster::add(std::string id, std::string_view password) { hashes_[std::move(id)] = sha256_hex(password); }

bool Roster::verify(const std::string& id, std::string_view password) const {
  const auto it = hashes_.find(id);
  if (it == hashes_.end()) return false;
  const std::string candidate = sha256_hex(password);
  return candidate.size() == it->second.size() &&
         CRYPTO_memcmp(candidate.data(), it->second.data(), candidate.size()) == 0;
}

}  // namespace sonder
