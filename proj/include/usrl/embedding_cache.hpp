#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "usrl/conll.hpp"
#include "usrl/errors.hpp"
#include "usrl/tensor.hpp"

namespace usrl {

// Cache entry key: language code + unit separator + sentence id.
inline std::string cache_key(const std::string& language, const std::string& sentence_id) {
  return language + '\x1f' + sentence_id;
}

inline std::string cache_key(const Sentence& s) { return cache_key(s.language, s.id); }

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& what)
      : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str(std::size_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw DataError(what_ + ": truncated payload (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ")");
  }
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(what + ": cannot open \"" + path + "\"");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

/// Loaded embedding cache: pre-concatenated per-token vectors, one n x D
/// float32 matrix per sentence key.
struct EmbeddingCache {
  std::uint32_t width = 0;
  std::map<std::string, Tensor<float>> entries;
};

/// Writes the cache file format: magic "SRLE", version u32=1, D u32,
/// count u64, then per entry key length u32 + UTF-8 key, n u32, n*D float32
/// values, all little-endian. Entries are written in key order.
inline void write_cache(const std::map<std::string, Tensor<float>>& entries,
                        const std::string& path) {
  std::uint32_t width = 0;
  bool first = true;
  for (const auto& [key, mat] : entries) {
    if (first) {
      width = static_cast<std::uint32_t>(mat.cols());
      first = false;
    } else if (mat.cols() != width) {
      throw DataError("write_cache: entry \"" + key + "\" has width " +
                      std::to_string(mat.cols()) + ", expected " + std::to_string(width));
    }
  }
  std::string out;
  out += "SRLE";
  detail::put_u32(out, 1);
  detail::put_u32(out, width);
  detail::put_u64(out, entries.size());
  for (const auto& [key, mat] : entries) {
    detail::put_u32(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    detail::put_u32(out, static_cast<std::uint32_t>(mat.rows()));
    for (std::size_t i = 0; i < mat.size(); ++i) detail::put_f32(out, mat[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("write_cache: cannot open \"" + path + "\" for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write_cache: write failed for \"" + path + "\"");
}

inline EmbeddingCache read_cache_file(const std::string& path) {
  const std::string bytes = detail::slurp(path, "read_cache");
  detail::ByteReader reader(bytes, "read_cache");
  if (reader.str(4) != "SRLE") throw DataError("read_cache: bad magic in \"" + path + "\"");
  const std::uint32_t version = reader.u32();
  if (version != 1)
    throw DataError("read_cache: unsupported version " + std::to_string(version));
  EmbeddingCache cache;
  cache.width = reader.u32();
  const std::uint64_t count = reader.u64();
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t key_len = reader.u32();
    std::string key = reader.str(key_len);
    const std::uint32_t rows = reader.u32();
    Tensor<float> mat(rows, cache.width);
    for (std::size_t i = 0; i < mat.size(); ++i) mat[i] = reader.f32();
    cache.entries.emplace(std::move(key), std::move(mat));
  }
  if (!reader.done()) throw DataError("read_cache: trailing bytes in \"" + path + "\"");
  return cache;
}

/// Looks up one sentence in a cache file; the stored row count must match
/// the sentence's token count.
inline Tensor<float> read_cache(const std::string& path, const Sentence& sentence) {
  const EmbeddingCache cache = read_cache_file(path);
  const auto it = cache.entries.find(cache_key(sentence));
  if (it == cache.entries.end())
    throw DataError("read_cache: no entry for sentence id \"" + sentence.id +
                    "\" (language \"" + sentence.language + "\")");
  if (it->second.rows() != sentence.tokens.size())
    throw DataError("read_cache: sentence id \"" + sentence.id + "\" has " +
                    std::to_string(sentence.tokens.size()) + " tokens but the cache stores " +
                    std::to_string(it->second.rows()) + " rows");
  return it->second;
}

}  // namespace usrl
