#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "usrl/conll.hpp"
#include "usrl/embedder.hpp"
#include "usrl/errors.hpp"
#include "usrl/model.hpp"
#include "usrl/serialize.hpp"
#include "usrl/trainer.hpp"

namespace usrl {

struct LanguageData {
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  double fraction = 1.0;  // training-split sampling fraction
  EmbedderSpec embedder;
};

struct SweepConfig {
  std::string source = "en";
  std::string target = "fa";
  double target_fraction = 0.10;
  std::vector<int> fractions = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
};

/// Everything a run needs, merged from the JSON config file and flag
/// overrides. One seed drives model init, sampling, batching and dropout.
struct RunConfig {
  std::uint64_t seed = 13;
  std::string output_dir = "out";
  ModelConfig model;
  TrainConfig train;
  PredictOptions predict;
  std::map<std::string, LanguageData> languages;
  SweepConfig sweep;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& context) {
  if (!obj.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(context + ": unknown key \"" + key + "\"");
}

template <typename T>
void get_if(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      obj.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
    }
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  detail::check_keys(j, {"seed", "output_dir", "model", "train", "predict", "languages", "sweep"},
                     "config");
  RunConfig cfg;
  detail::get_if(j, "seed", cfg.seed);
  detail::get_if(j, "output_dir", cfg.output_dir);

  if (j.contains("model")) {
    const nlohmann::json& m = j.at("model");
    detail::check_keys(m, {"d_e", "hidden", "sent_layers", "arg_layers", "d_p", "d_s", "d_r"},
                       "config.model");
    detail::get_if(m, "d_e", cfg.model.d_e);
    detail::get_if(m, "hidden", cfg.model.hidden);
    detail::get_if(m, "sent_layers", cfg.model.sent_layers);
    detail::get_if(m, "arg_layers", cfg.model.arg_layers);
    detail::get_if(m, "d_p", cfg.model.d_p);
    detail::get_if(m, "d_s", cfg.model.d_s);
    detail::get_if(m, "d_r", cfg.model.d_r);
  }

  if (j.contains("train")) {
    const nlohmann::json& t = j.at("train");
    detail::check_keys(t,
                       {"epochs", "batch_size", "learning_rate", "weight_decay", "patience",
                        "language_weights", "freeze", "grad_clip", "teacher_forcing", "dropout"},
                       "config.train");
    detail::get_if(t, "epochs", cfg.train.epochs);
    detail::get_if(t, "batch_size", cfg.train.batch_size);
    detail::get_if(t, "learning_rate", cfg.train.learning_rate);
    detail::get_if(t, "weight_decay", cfg.train.weight_decay);
    detail::get_if(t, "patience", cfg.train.patience);
    detail::get_if(t, "language_weights", cfg.train.language_weights);
    detail::get_if(t, "freeze", cfg.train.freeze);
    detail::get_if(t, "grad_clip", cfg.train.grad_clip);
    detail::get_if(t, "teacher_forcing", cfg.train.teacher_forcing);
    detail::get_if(t, "dropout", cfg.train.dropout);
  }

  if (j.contains("predict")) {
    detail::check_keys(j.at("predict"), {"lemma_mask"}, "config.predict");
    detail::get_if(j.at("predict"), "lemma_mask", cfg.predict.lemma_mask);
  }

  if (j.contains("languages")) {
    if (!j.at("languages").is_object())
      throw ConfigError("config.languages: expected an object keyed by language code");
    for (const auto& [code, entry] : j.at("languages").items()) {
      detail::check_keys(entry, {"train", "dev", "test", "fraction", "embedder"},
                         "config.languages." + code);
      LanguageData data;
      detail::get_if(entry, "train", data.train_path);
      detail::get_if(entry, "dev", data.dev_path);
      detail::get_if(entry, "test", data.test_path);
      detail::get_if(entry, "fraction", data.fraction);
      if (data.fraction < 0.0 || data.fraction > 1.0)
        throw ConfigError("config.languages." + code + ".fraction must be in [0, 1]");
      if (entry.contains("embedder")) {
        detail::check_keys(entry.at("embedder"),
                           {"kind", "width", "lm_layers", "seed", "trainable", "path"},
                           "config.languages." + code + ".embedder");
        entry.at("embedder").get_to(data.embedder);
      }
      cfg.languages.emplace(code, std::move(data));
    }
  }

  if (j.contains("sweep")) {
    const nlohmann::json& s = j.at("sweep");
    detail::check_keys(s, {"source", "target", "target_fraction", "fractions"}, "config.sweep");
    detail::get_if(s, "source", cfg.sweep.source);
    detail::get_if(s, "target", cfg.sweep.target);
    detail::get_if(s, "target_fraction", cfg.sweep.target_fraction);
    detail::get_if(s, "fractions", cfg.sweep.fractions);
  }

  for (const auto& [code, weight] : cfg.train.language_weights) {
    if (!cfg.languages.count(code))
      throw ConfigError("config.train.language_weights names unknown language \"" + code + "\"");
    if (weight < 0.0)
      throw ConfigError("config.train.language_weights." + code + " must be >= 0");
  }
  return cfg;
}

/// Loads and schema-validates a config file; every referenced data path is
/// checked for existence before any work starts.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config \"" + path + "\": " + e.what());
  }
  RunConfig cfg = parse_run_config(j);
  for (const auto& [code, data] : cfg.languages) {
    for (const std::string& p : {data.train_path, data.dev_path, data.test_path})
      if (!p.empty() && !std::filesystem::exists(p))
        throw DataError("config.languages." + code + ": path \"" + p + "\" does not exist");
    if (data.embedder.kind == EmbedderKind::cache &&
        !std::filesystem::exists(data.embedder.cache_path))
      throw DataError("config.languages." + code + ": embedding cache \"" +
                      data.embedder.cache_path + "\" does not exist");
  }
  return cfg;
}

inline nlohmann::json effective_config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["model"] = {{"d_e", cfg.model.d_e},       {"hidden", cfg.model.hidden},
                {"sent_layers", cfg.model.sent_layers}, {"arg_layers", cfg.model.arg_layers},
                {"d_p", cfg.model.d_p},       {"d_s", cfg.model.d_s},
                {"d_r", cfg.model.d_r}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"weight_decay", cfg.train.weight_decay},
                {"patience", cfg.train.patience},
                {"language_weights", cfg.train.language_weights},
                {"freeze", cfg.train.freeze},
                {"grad_clip", cfg.train.grad_clip},
                {"teacher_forcing", cfg.train.teacher_forcing},
                {"dropout", cfg.train.dropout}};
  j["predict"] = {{"lemma_mask", cfg.predict.lemma_mask}};
  nlohmann::json langs = nlohmann::json::object();
  for (const auto& [code, data] : cfg.languages) {
    nlohmann::json entry;
    entry["train"] = data.train_path;
    entry["dev"] = data.dev_path;
    entry["test"] = data.test_path;
    entry["fraction"] = data.fraction;
    entry["embedder"] = data.embedder;
    langs[code] = std::move(entry);
  }
  j["languages"] = std::move(langs);
  j["sweep"] = {{"source", cfg.sweep.source},
                {"target", cfg.sweep.target},
                {"target_fraction", cfg.sweep.target_fraction},
                {"fractions", cfg.sweep.fractions}};
  return j;
}

inline Corpus load_corpus_file(const std::string& path, const std::string& language) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file \"" + path + "\"");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_conll09(text, language);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

/// Builds a LanguageInfo from the full (unsampled) training corpus so
/// inventories and vocabularies stay stable across sampling fractions.
inline LanguageInfo make_language_info(const std::string& code, const LanguageData& data,
                                       const Corpus& full_train) {
  LanguageInfo info;
  info.code = code;
  info.inventory = build_inventory(full_train);
  info.embedder = data.embedder;
  if (data.embedder.kind == EmbedderKind::lookup)
    info.vocabulary = build_vocabulary(full_train);
  return info;
}

}  // namespace usrl
