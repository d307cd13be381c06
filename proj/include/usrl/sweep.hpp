#pragma once

#include <map>
#include <string>
#include <vector>

#include "usrl/conll.hpp"
#include "usrl/errors.hpp"
#include "usrl/eval.hpp"
#include "usrl/model.hpp"
#include "usrl/random.hpp"
#include "usrl/run_config.hpp"
#include "usrl/trainer.hpp"

namespace usrl {

/// The cross-lingual data-volume experiment: for each source-language
/// percentage, train a freshly seeded model on (sampled source + sampled
/// target) and evaluate on the target test set. Percentage 0 is the
/// monolingual setting: the source language is left out of the model
/// entirely, so its batch count is zero by construction. A training failure
/// stops the sweep and preserves the partial table.
template <typename S>
SweepTable run_sweep(const RunConfig& cfg, const std::vector<int>& fractions) {
  const std::string& source = cfg.sweep.source;
  const std::string& target = cfg.sweep.target;
  if (!cfg.languages.count(source))
    throw ConfigError("sweep: source language \"" + source + "\" not in config.languages");
  if (!cfg.languages.count(target))
    throw ConfigError("sweep: target language \"" + target + "\" not in config.languages");
  const LanguageData& source_data = cfg.languages.at(source);
  const LanguageData& target_data = cfg.languages.at(target);
  if (source_data.train_path.empty() || target_data.train_path.empty())
    throw ConfigError("sweep: both sweep languages need a train path");
  if (target_data.test_path.empty())
    throw ConfigError("sweep: target language needs a test path");

  const Corpus source_train = load_corpus_file(source_data.train_path, source);
  const Corpus target_train = load_corpus_file(target_data.train_path, target);
  const Corpus target_test = load_corpus_file(target_data.test_path, target);
  Corpus target_dev;
  if (!target_data.dev_path.empty())
    target_dev = load_corpus_file(target_data.dev_path, target);

  const LanguageInfo source_info = make_language_info(source, source_data, source_train);
  const LanguageInfo target_info = make_language_info(target, target_data, target_train);

  SweepTable table;
  table.source_language = source;
  table.target_language = target;
  table.seed = cfg.seed;

  for (const int percent : fractions) {
    if (percent < 0 || percent > 100)
      throw ConfigError("sweep: percentage " + std::to_string(percent) + " outside [0, 100]");
    try {
      const std::uint64_t row_seed = mix64(cfg.seed, static_cast<std::uint64_t>(percent));
      const Corpus target_sample =
          sample_fraction(target_train, cfg.sweep.target_fraction, row_seed);
      const Corpus source_sample =
          sample_fraction(source_train, static_cast<double>(percent) / 100.0, row_seed);

      std::vector<LanguageInfo> languages{target_info};
      std::map<std::string, const Corpus*> train_corpora{{target, &target_sample}};
      if (!source_sample.sentences.empty()) {
        languages.push_back(source_info);
        train_corpora.emplace(source, &source_sample);
      }

      ModelConfig model_cfg = cfg.model;
      model_cfg.seed = row_seed;
      SrlModel<S> model(model_cfg, languages);

      TrainConfig train_cfg = cfg.train;
      train_cfg.seed = row_seed;
      std::map<std::string, const Corpus*> dev_corpora;
      if (!target_dev.sentences.empty()) dev_corpora.emplace(target, &target_dev);
      const TrainHistory history = train(model, train_cfg, train_corpora, dev_corpora);

      Corpus predicted;
      predicted.language = target;
      for (const Sentence& s : target_test.sentences)
        predicted.sentences.push_back(model.predict_annotation(s, target, cfg.predict));
      const MetricsReport report = score(target_test, predicted);

      SweepRow row;
      row.english_percentage = percent;
      row.f1 = report.f1;
      row.precision = report.precision;
      row.recall = report.recall;
      row.batch_counts = history.batch_counts;
      if (!row.batch_counts.count(source)) row.batch_counts[source] = 0;
      table.rows.push_back(std::move(row));
    } catch (const Error& e) {
      table.aborted = true;
      table.error = "percentage " + std::to_string(percent) + ": " + e.what();
      break;
    }
  }
  return table;
}

}  // namespace usrl
