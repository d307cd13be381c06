#pragma once

#include <string>

#include <json.hpp>

#include "usrl/conll.hpp"
#include "usrl/embedder.hpp"
#include "usrl/model.hpp"
#include "usrl/trainer.hpp"

namespace usrl {

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_e", c.d_e},       {"hidden", c.hidden},
                     {"sent_layers", c.sent_layers}, {"arg_layers", c.arg_layers},
                     {"d_p", c.d_p},       {"d_s", c.d_s},
                     {"d_r", c.d_r},       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("d_e").get_to(c.d_e);
  j.at("hidden").get_to(c.hidden);
  j.at("sent_layers").get_to(c.sent_layers);
  j.at("arg_layers").get_to(c.arg_layers);
  j.at("d_p").get_to(c.d_p);
  j.at("d_s").get_to(c.d_s);
  j.at("d_r").get_to(c.d_r);
  j.at("seed").get_to(c.seed);
}

inline void to_json(nlohmann::json& j, const EmbedderSpec& s) {
  j = nlohmann::json{{"kind", embedder_kind_name(s.kind)}};
  switch (s.kind) {
    case EmbedderKind::toy:
      j["width"] = s.width;
      j["lm_layers"] = s.lm_layers;
      j["seed"] = s.seed;
      break;
    case EmbedderKind::lookup:
      j["width"] = s.width;
      j["trainable"] = s.trainable;
      break;
    case EmbedderKind::cache:
      j["path"] = s.cache_path;
      break;
  }
}

inline void from_json(const nlohmann::json& j, EmbedderSpec& s) {
  s = EmbedderSpec{};
  s.kind = embedder_kind_from_name(j.at("kind").get<std::string>());
  switch (s.kind) {
    case EmbedderKind::toy:
      if (j.contains("width")) j.at("width").get_to(s.width);
      if (j.contains("lm_layers")) j.at("lm_layers").get_to(s.lm_layers);
      if (j.contains("seed")) j.at("seed").get_to(s.seed);
      break;
    case EmbedderKind::lookup:
      if (j.contains("width")) j.at("width").get_to(s.width);
      if (j.contains("trainable")) j.at("trainable").get_to(s.trainable);
      break;
    case EmbedderKind::cache:
      j.at("path").get_to(s.cache_path);
      break;
  }
}

inline void to_json(nlohmann::json& j, const LabelInventory& inv) {
  j = nlohmann::json{{"language", inv.language}, {"senses", inv.senses}, {"roles", inv.roles}};
}

inline void from_json(const nlohmann::json& j, LabelInventory& inv) {
  j.at("language").get_to(inv.language);
  j.at("senses").get_to(inv.senses);
  j.at("roles").get_to(inv.roles);
}

inline void to_json(nlohmann::json& j, const LanguageInfo& info) {
  j = nlohmann::json{{"code", info.code},
                     {"inventory", info.inventory},
                     {"embedder", info.embedder},
                     {"vocabulary", info.vocabulary}};
}

inline void from_json(const nlohmann::json& j, LanguageInfo& info) {
  j.at("code").get_to(info.code);
  j.at("inventory").get_to(info.inventory);
  j.at("embedder").get_to(info.embedder);
  j.at("vocabulary").get_to(info.vocabulary);
}

inline void to_json(nlohmann::json& j, const TaskLosses& t) {
  j = nlohmann::json{{"predicate", t.predicate}, {"sense", t.sense}, {"role", t.role}};
}

inline void from_json(const nlohmann::json& j, TaskLosses& t) {
  j.at("predicate").get_to(t.predicate);
  j.at("sense").get_to(t.sense);
  j.at("role").get_to(t.role);
}

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"components", r.components},
                     {"total", r.total},
                     {"dev_f1", r.dev_f1},
                     {"dev_mean_f1", r.dev_mean_f1}};
}

inline void from_json(const nlohmann::json& j, EpochRecord& r) {
  j.at("epoch").get_to(r.epoch);
  j.at("components").get_to(r.components);
  j.at("total").get_to(r.total);
  j.at("dev_f1").get_to(r.dev_f1);
  j.at("dev_mean_f1").get_to(r.dev_mean_f1);
}

inline void to_json(nlohmann::json& j, const TrainHistory& h) {
  j = nlohmann::json{{"epochs", h.epochs},
                     {"best_epoch", h.best_epoch},
                     {"best_dev_f1", h.best_dev_f1},
                     {"seed", h.seed},
                     {"batch_counts", h.batch_counts},
                     {"optimizer_steps", h.optimizer_steps}};
}

inline void from_json(const nlohmann::json& j, TrainHistory& h) {
  j.at("epochs").get_to(h.epochs);
  j.at("best_epoch").get_to(h.best_epoch);
  j.at("best_dev_f1").get_to(h.best_dev_f1);
  j.at("seed").get_to(h.seed);
  j.at("batch_counts").get_to(h.batch_counts);
  j.at("optimizer_steps").get_to(h.optimizer_steps);
}

}  // namespace usrl
