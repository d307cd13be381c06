#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "usrl/conll.hpp"
#include "usrl/gradcheck.hpp"
#include "usrl/lstm.hpp"
#include "usrl/model.hpp"
#include "usrl/nn.hpp"
#include "usrl/tensor.hpp"
#include "usrl/trainer.hpp"

namespace usrl {

/// A deterministic bilingual 3-token fixture for gradient verification:
/// two toy-embedder languages, small widths, one predicate per sentence.
namespace verify {

inline Sentence fixture_sentence(const std::string& language, const std::string& prefix) {
  Sentence s;
  s.id = "1";
  s.language = language;
  for (int i = 1; i <= 3; ++i) {
    Token tok;
    tok.index = i;
    tok.form = prefix + "w" + std::to_string(i);
    tok.lemma = tok.form;
    tok.pos = i == 2 ? "V" : "N";
    s.tokens.push_back(tok);
  }
  s.tokens[1].fill_pred = true;
  s.tokens[1].pred_sense = prefix + "w2.01";
  PredicateFrame frame;
  frame.predicate_index = 2;
  frame.sense = prefix + "w2.01";
  frame.roles[1] = "A0";
  frame.roles[3] = "A1";
  s.frames.push_back(frame);
  return s;
}

inline LanguageInfo fixture_language(const std::string& code, const std::string& prefix,
                                     std::uint64_t seed) {
  LanguageInfo info;
  info.code = code;
  info.inventory.language = code;
  info.inventory.senses = {prefix + "w2.01", prefix + "w3.01"};
  info.inventory.roles = {kNullRole, "A0", "A1"};
  info.embedder.kind = EmbedderKind::toy;
  info.embedder.width = 4;
  info.embedder.lm_layers = 4;
  info.embedder.seed = seed;
  return info;
}

inline ModelConfig fixture_model_config(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.d_e = 8;
  cfg.hidden = 4;
  cfg.sent_layers = 1;
  cfg.arg_layers = 1;
  cfg.d_p = 6;
  cfg.d_s = 6;
  cfg.d_r = 6;
  cfg.seed = seed;
  return cfg;
}

struct SuiteResult {
  double linear_err = 0.0;
  double bilstm_err = 0.0;
  double model_err = 0.0;
  bool passed = false;
};

inline constexpr double kLinearTolerance = 1e-7;
inline constexpr double kBilstmTolerance = 1e-5;
inline constexpr double kModelTolerance = 1e-4;

// loss = sum of c .* f(x) for fixed random coefficients c, so the gradient of
// every output element is exercised.
inline double check_linear(std::uint64_t seed) {
  ParameterSet<double> params;
  Linear<double> layer(params, "lin", 2, 4);
  StableRng rng(seed);
  layer.init(rng);
  Tensor<double> x(3, 4), c(3, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.uniform(-1.0, 1.0);
  auto loss = [&](bool with_grad) {
    Tensor<double> y = layer.forward(x);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += c[i] * y[i];
    if (with_grad) layer.backward(x, c);
    return total;
  };
  return grad_check<double>(loss, params.all(), 1e-5).max_rel_err;
}

inline double check_bilstm(std::uint64_t seed) {
  ParameterSet<double> params;
  BiLstmLayer<double> layer(params, "bilstm", 5, 3);
  StableRng rng(seed);
  layer.init(rng);
  Tensor<double> x(4, 5), c(4, 6);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.uniform(-1.0, 1.0);
  auto loss = [&](bool with_grad) {
    BiLstmCtx<double> ctx;
    Tensor<double> y = layer.forward(x, ctx);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += c[i] * y[i];
    if (with_grad) layer.backward(ctx, c);
    return total;
  };
  return grad_check<double>(loss, params.all(), 1e-5).max_rel_err;
}

// Full model in high precision: the training objective over one sentence per
// language, teacher-forced, unit weights.
inline double check_model(std::uint64_t seed) {
  std::vector<LanguageInfo> languages{fixture_language("xx", "x", seed),
                                      fixture_language("yy", "y", seed + 1)};
  SrlModel<double> model(fixture_model_config(seed), languages);
  const Sentence sx = fixture_sentence("xx", "x");
  const Sentence sy = fixture_sentence("yy", "y");
  TrainConfig cfg;
  cfg.teacher_forcing = true;
  cfg.dropout = 0.0;
  auto loss = [&](bool with_grad) {
    double total = 0.0;
    for (const auto& [code, sentence] : std::map<std::string, const Sentence*>{
             {"xx", &sx}, {"yy", &sy}}) {
      Batch batch;
      batch.language = code;
      batch.sentences = {sentence};
      const auto sums = detail::process_batch(model, batch, cfg, with_grad, nullptr);
      total += (sums.pred_n ? sums.pred / static_cast<double>(sums.pred_n) : 0.0) +
               (sums.sense_n ? sums.sense / static_cast<double>(sums.sense_n) : 0.0) +
               (sums.role_n ? sums.role / static_cast<double>(sums.role_n) : 0.0);
    }
    return total;
  };
  return grad_check<double>(loss, model.parameters().all(), 1e-5).max_rel_err;
}

inline SuiteResult run_suite(std::uint64_t seed) {
  SuiteResult result;
  result.linear_err = check_linear(seed);
  result.bilstm_err = check_bilstm(seed);
  result.model_err = check_model(seed);
  result.passed = result.linear_err < kLinearTolerance &&
                  result.bilstm_err < kBilstmTolerance && result.model_err < kModelTolerance;
  return result;
}

}  // namespace verify
}  // namespace usrl
