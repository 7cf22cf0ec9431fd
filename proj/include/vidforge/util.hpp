#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include <json.hpp>

namespace vidforge {

using json = nlohmann::json;
namespace fs = std::filesystem;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace util {

inline std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

/// Incremental SHA-256 over OpenSSL's EVP interface.
class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw Error("sha256: EVP init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const unsigned char> data) {
    EVP_DigestUpdate(ctx_, data.data(), data.size());
    return *this;
  }
  Sha256& update(std::string_view s) {
    return update({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
  }
  // Length-prefixed field, so ("ab","c") and ("a","bc") hash differently.
  Sha256& field(std::string_view s) {
    std::uint64_t n = s.size();
    unsigned char len[8];
    for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(n >> (8 * i));
    update({len, 8});
    return update(s);
  }

  std::vector<unsigned char> digest() {
    std::vector<unsigned char> out(EVP_MAX_MD_SIZE);
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_, out.data(), &n);
    out.resize(n);
    return out;
  }
  std::string hex() { return to_hex(digest()); }

private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view s) { return Sha256{}.update(s).hex(); }

inline std::string base64(std::span<const unsigned char> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temp file and rename, so readers never see a partial file.
inline void write_file_atomic(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

inline void write_jsonl_atomic(const fs::path& p, const std::vector<json>& rows) {
  std::string buf;
  for (const auto& r : rows) {
    buf += r.dump();
    buf.push_back('\n');
  }
  write_file_atomic(p, buf);
}

/// Appends one complete line per call with a single write; a torn tail is
/// skipped by read_jsonl_tolerant.
class JsonlAppender {
public:
  explicit JsonlAppender(fs::path p) : path_(std::move(p)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  }
  void append(const json& row) {
    std::string line = row.dump();
    line.push_back('\n');
    std::lock_guard lock(mu_);
    std::FILE* f = std::fopen(path_.c_str(), "ab");
    if (!f) throw Error("cannot append to " + path_.string());
    std::fwrite(line.data(), 1, line.size(), f);
    std::fflush(f);
    std::fclose(f);
  }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
  std::mutex mu_;
};

/// Reads newline-terminated JSON rows; a final line without '\n' (a torn
/// append) is ignored. Missing file reads as empty.
inline std::vector<json> read_jsonl_tolerant(const fs::path& p) {
  std::vector<json> rows;
  if (!fs::exists(p)) return rows;
  std::string data = read_file(p);
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto nl = data.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string_view line(data.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    rows.push_back(json::parse(line));
  }
  return rows;
}

inline std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// splitmix64; used wherever a seeded, platform-stable stream is needed.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

private:
  std::uint64_t state_;
};

inline std::uint64_t seed_from(std::string_view s) {
  auto d = Sha256{}.update(s).digest();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(d[i]) << (8 * i);
  return v;
}

/// Runs fn(i) for i in [0, n) on at most `workers` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (n == 0) return;
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

}  // namespace util
}  // namespace vidforge
