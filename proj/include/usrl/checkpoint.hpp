#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "usrl/embedding_cache.hpp"
#include "usrl/errors.hpp"
#include "usrl/model.hpp"
#include "usrl/serialize.hpp"

namespace usrl {

struct CheckpointMeta {
  std::size_t epoch = 0;
  double dev_f1 = -1.0;
  std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const CheckpointMeta& m) {
  j = nlohmann::json{{"epoch", m.epoch}, {"dev_f1", m.dev_f1}, {"seed", m.seed}};
}

inline void from_json(const nlohmann::json& j, CheckpointMeta& m) {
  j.at("epoch").get_to(m.epoch);
  j.at("dev_f1").get_to(m.dev_f1);
  j.at("seed").get_to(m.seed);
}

namespace detail {

template <typename S>
const char* dtype_name() {
  if constexpr (std::is_same_v<S, float>) return "f32";
  else return "f64";
}

template <typename S>
void append_scalar_le(std::string& out, S v) {
  if constexpr (std::is_same_v<S, float>) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  } else {
    double d = static_cast<double>(v);
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

template <typename S>
S read_scalar_le(const char* p) {
  if constexpr (std::is_same_v<S, float>) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  } else {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return static_cast<S>(v);
  }
}

}  // namespace detail

inline constexpr char kCheckpointMagic[] = "USRL1\n";

/// Checkpoint container: magic "USRL1\n", u32 header length, UTF-8 JSON
/// header (version, model config, per-language inventories/embedders, the
/// tensor directory with name/shape/dtype/offset/length, metadata), then the
/// concatenated little-endian payloads at the stated offsets. Tensors are
/// written in name order.
template <typename S>
void save_checkpoint(const SrlModel<S>& model, const CheckpointMeta& meta,
                     const std::string& path) {
  std::vector<const Parameter<S>*> params;
  for (const Parameter<S>* p : model.parameters().all()) params.push_back(p);
  std::sort(params.begin(), params.end(),
            [](const Parameter<S>* a, const Parameter<S>* b) { return a->name < b->name; });

  const std::size_t scalar_bytes = std::is_same_v<S, float> ? 4 : 8;
  nlohmann::json directory = nlohmann::json::array();
  std::string payload;
  for (const Parameter<S>* p : params) {
    nlohmann::json entry;
    entry["name"] = p->name;
    entry["shape"] = p->value.shape();
    entry["dtype"] = detail::dtype_name<S>();
    entry["offset"] = payload.size();
    entry["length"] = p->value.size() * scalar_bytes;
    directory.push_back(std::move(entry));
    for (std::size_t i = 0; i < p->value.size(); ++i)
      detail::append_scalar_le<S>(payload, p->value[i]);
  }

  std::vector<LanguageInfo> languages;
  for (const std::string& code : model.language_codes())
    languages.push_back(model.language(code));

  nlohmann::json header;
  header["version"] = 1;
  header["model"] = model.config();
  header["languages"] = languages;
  header["tensors"] = directory;
  header["meta"] = meta;
  const std::string header_bytes = header.dump();

  std::string out(kCheckpointMagic, 6);
  const std::uint32_t hlen = static_cast<std::uint32_t>(header_bytes.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((hlen >> (8 * i)) & 0xff));
  out += header_bytes;
  out += payload;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("save_checkpoint: cannot open \"" + path + "\" for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("save_checkpoint: write failed for \"" + path + "\"");
}

template <typename S>
struct LoadedCheckpoint {
  std::unique_ptr<SrlModel<S>> model;
  CheckpointMeta meta;
};

/// Rebuilds the model from a checkpoint; forward outputs are bit-identical
/// to the saved model's.
template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
  const std::string bytes = detail::slurp(path, "load_checkpoint");
  if (bytes.size() < 10 || bytes.compare(0, 6, kCheckpointMagic, 6) != 0)
    throw DataError("load_checkpoint: bad magic in \"" + path + "\"");
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i)
    hlen |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[6 + i])) << (8 * i);
  if (10 + static_cast<std::size_t>(hlen) > bytes.size())
    throw DataError("load_checkpoint: truncated header in \"" + path + "\"");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(10, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("load_checkpoint: malformed header: ") + e.what());
  }
  if (header.at("version").get<int>() != 1)
    throw DataError("load_checkpoint: unsupported version " +
                    header.at("version").dump());

  const ModelConfig cfg = header.at("model").get<ModelConfig>();
  const std::vector<LanguageInfo> languages =
      header.at("languages").get<std::vector<LanguageInfo>>();

  LoadedCheckpoint<S> out;
  out.meta = header.at("meta").get<CheckpointMeta>();
  out.model = std::make_unique<SrlModel<S>>(cfg, languages);

  const std::string_view payload(bytes.data() + 10 + hlen, bytes.size() - 10 - hlen);
  const std::size_t scalar_bytes = std::is_same_v<S, float> ? 4 : 8;
  std::size_t filled = 0;
  for (const nlohmann::json& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    Parameter<S>* p = out.model->parameters().find(name);
    if (p == nullptr)
      throw DataError("load_checkpoint: unknown tensor \"" + name + "\"");
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != p->value.shape())
      throw DataError("load_checkpoint: tensor \"" + name + "\" has shape " +
                      shape_string(shape) + ", expected " + shape_string(p->value.shape()));
    const std::string dtype = entry.at("dtype").get<std::string>();
    if (dtype != detail::dtype_name<S>())
      throw DataError("load_checkpoint: tensor \"" + name + "\" has dtype " + dtype +
                      ", expected " + detail::dtype_name<S>());
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t length = entry.at("length").get<std::size_t>();
    if (length != p->value.size() * scalar_bytes)
      throw DataError("load_checkpoint: tensor \"" + name + "\" has length " +
                      std::to_string(length) + ", expected " +
                      std::to_string(p->value.size() * scalar_bytes));
    if (offset + length > payload.size())
      throw DataError("load_checkpoint: tensor \"" + name + "\" missing from payload (" +
                      std::to_string(offset + length) + " bytes needed, " +
                      std::to_string(payload.size()) + " present)");
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value[i] = detail::read_scalar_le<S>(payload.data() + offset + i * scalar_bytes);
    ++filled;
  }
  if (filled != out.model->parameters().count())
    throw DataError("load_checkpoint: " + std::to_string(filled) + " tensors in file, model has " +
                    std::to_string(out.model->parameters().count()));
  return out;
}

}  // namespace usrl
