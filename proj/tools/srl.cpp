#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "usrl/usrl.hpp"
#include "usrl/verify.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 13;
  bool seed_set = false;
  std::string output_dir;
  bool output_dir_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* config = cmd->add_option("--config,-c", opts.config_path, "RunConfig JSON file");
  if (config_required) config->required();
  cmd->add_option("--seed", opts.seed, "Seed overriding the config (default 13)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--output-dir,-o", opts.output_dir, "Output directory override")
      ->each([&opts](const std::string&) { opts.output_dir_set = true; });
}

usrl::RunConfig effective_config(const CommonOpts& opts) {
  usrl::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = usrl::load_run_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.output_dir_set) cfg.output_dir = opts.output_dir;
  cfg.model.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw usrl::DataError("cannot open \"" + path.string() + "\" for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw usrl::DataError("write failed for \"" + path.string() + "\"");
}

fs::path prepare_output(const usrl::RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_text(dir / "effective_config.json", usrl::effective_config_json(cfg).dump(2) + "\n");
  return dir;
}

struct LoadedData {
  std::map<std::string, usrl::Corpus> full_train;
  std::map<std::string, usrl::Corpus> train;  // sampled per the config fraction
  std::map<std::string, usrl::Corpus> dev;
  std::vector<usrl::LanguageInfo> infos;
};

LoadedData load_training_data(const usrl::RunConfig& cfg) {
  if (cfg.languages.empty())
    throw usrl::ConfigError("config.languages is empty; nothing to train on");
  LoadedData data;
  for (const auto& [code, lang] : cfg.languages) {
    if (lang.train_path.empty())
      throw usrl::ConfigError("config.languages." + code + " has no train path");
    usrl::Corpus full = usrl::load_corpus_file(lang.train_path, code);
    data.infos.push_back(usrl::make_language_info(code, lang, full));
    data.train.emplace(code, usrl::sample_fraction(full, lang.fraction,
                                                   usrl::mix64(cfg.seed, usrl::fnv1a(code))));
    data.full_train.emplace(code, std::move(full));
    if (!lang.dev_path.empty())
      data.dev.emplace(code, usrl::load_corpus_file(lang.dev_path, code));
  }
  return data;
}

template <typename T>
std::map<std::string, const usrl::Corpus*> pointers(const std::map<std::string, T>& corpora) {
  std::map<std::string, const usrl::Corpus*> out;
  for (const auto& [code, corpus] : corpora) out.emplace(code, &corpus);
  return out;
}

int cmd_validate(const CommonOpts& opts, const std::vector<std::string>& files,
                 const std::string& language) {
  std::size_t total_violations = 0;
  auto lint = [&](const usrl::Corpus& corpus, const std::string& label,
                  const usrl::LabelInventory& inv) {
    std::size_t count = 0;
    for (const usrl::Sentence& s : corpus.sentences) {
      for (const usrl::Violation& v : usrl::validate_sentence(s, inv)) {
        std::cout << label << "\tsentence " << s.id << "\t" << v.field << "\t" << v.message
                  << "\n";
        ++count;
      }
    }
    std::cout << label << "\t" << corpus.sentences.size() << " sentences, " << count
              << " violations\n";
    total_violations += count;
  };

  if (!files.empty()) {
    if (language.empty())
      throw usrl::ConfigError("validate: --language is required with explicit files");
    for (const std::string& file : files) {
      const usrl::Corpus corpus = usrl::load_corpus_file(file, language);
      lint(corpus, file, usrl::build_inventory(corpus));
    }
  } else {
    if (opts.config_path.empty())
      throw usrl::ConfigError("validate: pass corpus files or --config");
    const usrl::RunConfig cfg = effective_config(opts);
    for (const auto& [code, lang] : cfg.languages) {
      if (lang.train_path.empty()) continue;
      const usrl::Corpus train = usrl::load_corpus_file(lang.train_path, code);
      const usrl::LabelInventory inv = usrl::build_inventory(train);
      lint(train, lang.train_path, inv);
      if (!lang.dev_path.empty())
        lint(usrl::load_corpus_file(lang.dev_path, code), lang.dev_path, inv);
      if (!lang.test_path.empty())
        lint(usrl::load_corpus_file(lang.test_path, code), lang.test_path, inv);
    }
  }
  if (total_violations > 0) throw usrl::DataError(std::to_string(total_violations) + " violations");
  return 0;
}

int cmd_inventory(const CommonOpts& opts) {
  const usrl::RunConfig cfg = effective_config(opts);
  if (cfg.languages.empty()) throw usrl::ConfigError("inventory: config.languages is empty");
  nlohmann::json out;
  out["seed"] = cfg.seed;
  for (const auto& [code, lang] : cfg.languages) {
    if (lang.train_path.empty())
      throw usrl::ConfigError("inventory: language " + code + " has no train path");
    out["inventories"][code] = usrl::build_inventory(usrl::load_corpus_file(lang.train_path, code));
  }
  const fs::path dir = prepare_output(cfg);
  const std::string text = out.dump(2) + "\n";
  write_text(dir / "inventories.json", text);
  std::cout << text;
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const usrl::RunConfig cfg = effective_config(opts);
  const LoadedData data = load_training_data(cfg);
  usrl::SrlModel<float> model(cfg.model, data.infos);
  const usrl::TrainHistory history =
      usrl::train(model, cfg.train, pointers(data.train), pointers(data.dev));

  const fs::path dir = prepare_output(cfg);
  usrl::CheckpointMeta meta;
  meta.epoch = history.best_epoch ? history.best_epoch : history.epochs.size();
  meta.dev_f1 = history.best_dev_f1;
  meta.seed = cfg.seed;
  usrl::save_checkpoint(model, meta, (dir / "checkpoint.usrl").string());
  write_text(dir / "history.json", nlohmann::json(history).dump(2) + "\n");

  std::cout << "trained " << history.epochs.size() << " epochs ("
            << history.optimizer_steps << " steps)\n";
  if (history.best_epoch)
    std::cout << "best dev mean F1 " << usrl::detail::two_decimals(history.best_dev_f1)
              << " at epoch " << history.best_epoch << "\n";
  std::cout << "checkpoint: " << (dir / "checkpoint.usrl").string() << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint, const std::string& gold_path,
             const std::string& pred_path, const std::string& language, bool no_lemma_mask) {
  usrl::RunConfig cfg = effective_config(opts);
  if (no_lemma_mask) cfg.predict.lemma_mask = false;
  const fs::path dir = prepare_output(cfg);

  // scoring-only mode: compare an existing prediction file against gold
  if (!pred_path.empty()) {
    if (language.empty())
      throw usrl::ConfigError("eval: --language is required with --pred");
    std::string gold_file = gold_path;
    if (gold_file.empty()) {
      if (!cfg.languages.count(language) || cfg.languages.at(language).test_path.empty())
        throw usrl::ConfigError("eval: no gold corpus (--gold or config test path)");
      gold_file = cfg.languages.at(language).test_path;
    }
    const usrl::Corpus gold = usrl::load_corpus_file(gold_file, language);
    const usrl::Corpus pred = usrl::load_corpus_file(pred_path, language);
    const usrl::MetricsReport report = usrl::score(gold, pred);
    write_text(dir / ("metrics_" + language + ".json"),
               usrl::render_report(report, usrl::ReportFormat::json));
    std::cout << usrl::render_report(report, usrl::ReportFormat::tsv);
    return 0;
  }

  if (checkpoint.empty()) throw usrl::ConfigError("eval: --checkpoint is required");
  auto loaded = usrl::load_checkpoint<float>(checkpoint);
  std::vector<std::string> codes = loaded.model->language_codes();
  if (!language.empty()) codes = {language};
  for (const std::string& code : codes) {
    std::string gold_file = gold_path;
    if (gold_file.empty()) {
      if (!cfg.languages.count(code) || cfg.languages.at(code).test_path.empty())
        throw usrl::ConfigError("eval: no test corpus for language " + code);
      gold_file = cfg.languages.at(code).test_path;
    }
    const usrl::Corpus gold = usrl::load_corpus_file(gold_file, code);
    usrl::Corpus pred;
    pred.language = code;
    for (const usrl::Sentence& s : gold.sentences)
      pred.sentences.push_back(loaded.model->predict_annotation(s, code, cfg.predict));
    const usrl::MetricsReport report = usrl::score(gold, pred);
    write_text(dir / ("metrics_" + code + ".json"),
               usrl::render_report(report, usrl::ReportFormat::json));
    write_text(dir / ("metrics_" + code + ".tsv"),
               usrl::render_report(report, usrl::ReportFormat::tsv));
    std::cout << code << "\tP " << usrl::detail::two_decimals(report.precision) << "\tR "
              << usrl::detail::two_decimals(report.recall) << "\tF1 "
              << usrl::detail::two_decimals(report.f1) << "\n";
  }
  return 0;
}

int cmd_predict(const CommonOpts& opts, const std::string& checkpoint, const std::string& input,
                const std::string& language, bool no_lemma_mask) {
  usrl::RunConfig cfg = effective_config(opts);
  if (no_lemma_mask) cfg.predict.lemma_mask = false;
  auto loaded = usrl::load_checkpoint<float>(checkpoint);
  if (!loaded.model->has_language(language))
    throw usrl::DataError("predict: checkpoint has no language \"" + language + "\"");
  const usrl::Corpus input_corpus = usrl::load_corpus_file(input, language);
  usrl::Corpus out;
  out.language = language;
  for (const usrl::Sentence& s : input_corpus.sentences)
    out.sentences.push_back(loaded.model->predict_annotation(s, language, cfg.predict));
  const fs::path dir = prepare_output(cfg);
  const fs::path path = dir / ("predictions_" + language + ".conll");
  write_text(path, usrl::write_conll09(out));
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& fractions_arg) {
  usrl::RunConfig cfg = effective_config(opts);
  std::vector<int> fractions = cfg.sweep.fractions;
  if (!fractions_arg.empty()) {
    fractions.clear();
    std::size_t start = 0;
    while (start <= fractions_arg.size()) {
      std::size_t comma = fractions_arg.find(',', start);
      if (comma == std::string::npos) comma = fractions_arg.size();
      const std::string piece = fractions_arg.substr(start, comma - start);
      try {
        if (!piece.empty()) fractions.push_back(std::stoi(piece));
      } catch (const std::exception&) {
        throw usrl::ConfigError("sweep: bad --fractions entry \"" + piece + "\"");
      }
      start = comma + 1;
    }
    if (fractions.empty()) throw usrl::ConfigError("sweep: --fractions is empty");
  }

  const usrl::SweepTable table = usrl::run_sweep<float>(cfg, fractions);
  const fs::path dir = prepare_output(cfg);
  write_text(dir / "sweep.tsv", usrl::render_report(table, usrl::ReportFormat::tsv));
  write_text(dir / "sweep.json", usrl::render_report(table, usrl::ReportFormat::json));
  std::cout << usrl::render_report(table, usrl::ReportFormat::tsv);
  if (table.aborted) throw usrl::NumericError("sweep aborted: " + table.error);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  const usrl::verify::SuiteResult result = usrl::verify::run_suite(seed);
  std::printf("linear layer      max relative error %.3e (tolerance %.0e)\n", result.linear_err,
              usrl::verify::kLinearTolerance);
  std::printf("bilstm layer      max relative error %.3e (tolerance %.0e)\n", result.bilstm_err,
              usrl::verify::kBilstmTolerance);
  std::printf("full model        max relative error %.3e (tolerance %.0e)\n", result.model_err,
              usrl::verify::kModelTolerance);
  if (!result.passed) throw usrl::NumericError("gradient check over tolerance");
  std::printf("gradcheck passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"usrl: cross-lingual semantic role labeler"};
  app.require_subcommand(1);

  CommonOpts validate_opts;
  std::vector<std::string> validate_files;
  std::string validate_language;
  CLI::App* validate = app.add_subcommand("validate", "Lint CoNLL-2009 corpora");
  add_common(validate, validate_opts, false);
  validate->add_option("files", validate_files, "Corpus files to lint");
  validate->add_option("--language,-l", validate_language, "Language code for explicit files");

  CommonOpts inventory_opts;
  CLI::App* inventory = app.add_subcommand("inventory", "Emit per-language label inventories");
  add_common(inventory, inventory_opts, true);

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Train a model from a RunConfig");
  add_common(train, train_opts, true);

  CommonOpts eval_opts;
  std::string eval_checkpoint, eval_gold, eval_pred, eval_language;
  bool eval_no_mask = false;
  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint (or a prediction file)");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", eval_checkpoint, "Model checkpoint");
  eval->add_option("--gold", eval_gold, "Gold corpus (defaults to the config test path)");
  eval->add_option("--pred", eval_pred, "Existing predictions to score instead of a model");
  eval->add_option("--language,-l", eval_language, "Restrict to one language");
  eval->add_flag("--no-lemma-mask", eval_no_mask, "Disable lemma-compatible sense masking");

  CommonOpts predict_opts;
  std::string predict_checkpoint, predict_input, predict_language;
  bool predict_no_mask = false;
  CLI::App* predict = app.add_subcommand("predict", "Annotate a corpus with a checkpoint");
  add_common(predict, predict_opts, false);
  predict->add_option("--checkpoint", predict_checkpoint, "Model checkpoint")->required();
  predict->add_option("--input,-i", predict_input, "Input CoNLL-2009 file")->required();
  predict->add_option("--language,-l", predict_language, "Language code")->required();
  predict->add_flag("--no-lemma-mask", predict_no_mask, "Disable lemma-compatible sense masking");

  CommonOpts sweep_opts;
  std::string sweep_fractions;
  CLI::App* sweep = app.add_subcommand("sweep", "Source-language data-volume experiment");
  add_common(sweep, sweep_opts, true);
  sweep->add_option("--fractions", sweep_fractions,
                    "Comma-separated percentages (default from config)");

  std::uint64_t gradcheck_seed = 13;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Run the finite-difference suite");
  gradcheck->add_option("--seed", gradcheck_seed, "Seed (default 13)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_opts, validate_files, validate_language);
    if (inventory->parsed()) return cmd_inventory(inventory_opts);
    if (train->parsed()) return cmd_train(train_opts);
    if (eval->parsed())
      return cmd_eval(eval_opts, eval_checkpoint, eval_gold, eval_pred, eval_language,
                      eval_no_mask);
    if (predict->parsed())
      return cmd_predict(predict_opts, predict_checkpoint, predict_input, predict_language,
                         predict_no_mask);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_fractions);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_seed);
  } catch (const usrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const usrl::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const usrl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
