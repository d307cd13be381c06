#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usrl/conll.hpp"
#include "usrl/embedder.hpp"
#include "usrl/errors.hpp"
#include "usrl/lstm.hpp"
#include "usrl/nn.hpp"
#include "usrl/random.hpp"
#include "usrl/tensor.hpp"

namespace usrl {

struct ModelConfig {
  std::size_t d_e = 128;        // word encoding width
  std::size_t hidden = 128;     // BiLSTM hidden size per direction
  std::size_t sent_layers = 2;  // sentence-encoder stack depth
  std::size_t arg_layers = 2;   // predicate-argument-encoder stack depth
  std::size_t d_p = 128;        // predicate representation width
  std::size_t d_s = 128;        // sense representation width
  std::size_t d_r = 128;        // role representation width
  std::uint64_t seed = 13;

  bool operator==(const ModelConfig&) const = default;
};

/// Everything the model needs to know about one language: its label spaces,
/// its embedding provider, and (for lookup providers) the form vocabulary.
struct LanguageInfo {
  std::string code;
  LabelInventory inventory;
  EmbedderSpec embedder;
  std::vector<std::string> vocabulary;  // lookup providers only
};

struct PredictOptions {
  bool lemma_mask = true;
};

template <typename S>
struct PredicateTrace {
  int position = 0;  // 0-based token position of the predicate
  Tensor<S> a0;      // n x 2*w_t base: row i = [t_p | t_i]
  ResidualStackCtx<S> arg_ctx;
  Tensor<S> a;           // n x w_a
  Tensor<S> z_r, r;      // n x d_r
  Tensor<S> role_logits; // n x |roles|
};

/// Full forward record: the spec's ForwardOutput plus everything the exact
/// backward pass needs. Intermediates t, p, s, a, r stay inspectable.
template <typename S>
struct ForwardTrace {
  std::string language;
  std::size_t n = 0;
  Tensor<S> h;         // n x Dh provider output
  Tensor<S> z_e, e;    // projection pre-activation / encoding
  ResidualStackCtx<S> sent_ctx;
  Tensor<S> t;         // n x w_t
  Tensor<S> z_p, p;    // predicate representation
  Tensor<S> z_s, s;    // sense representation
  Tensor<S> pred_logits;  // n x 2
  std::vector<int> predicate_positions;  // 0-based, ascending
  Tensor<S> s_pred;       // m x d_s (s rows at predicate positions)
  Tensor<S> sense_logits; // m x |senses|
  std::vector<PredicateTrace<S>> predicates;
};

template <typename S>
struct LossGrads {
  Tensor<S> dpred_logits;               // n x 2
  Tensor<S> dsense_logits;              // m x |senses|
  std::vector<Tensor<S>> drole_logits;  // per predicate, n x |roles|
};

/// The shared-encoder / language-specific-decoder SRL model. Universal
/// components (projection, sentence encoder, predicate/sense/role
/// representations, predicate-argument encoder) are single objects used by
/// every language; only the three affine decoder heads per language are
/// language-qualified.
template <typename S>
class SrlModel {
 public:
  SrlModel(ModelConfig cfg, std::vector<LanguageInfo> languages) : cfg_(cfg) {
    if (languages.empty()) throw ConfigError("model: no languages configured");
    if (cfg_.d_e < 1 || cfg_.hidden < 1 || cfg_.d_p < 1 || cfg_.d_s < 1 || cfg_.d_r < 1)
      throw ConfigError("model: representation widths must be >= 1");
    for (const LanguageInfo& lang : languages) {
      if (languages_.count(lang.code))
        throw ConfigError("model: duplicate language \"" + lang.code + "\"");
      languages_.emplace(lang.code, lang);
    }

    // Providers first: they pin the embedding width the projection consumes.
    for (auto& [code, info] : languages_) {
      providers_.emplace(code, make_provider(info));
      const std::size_t w = providers_.at(code)->output_width();
      if (embedding_width_ == 0) embedding_width_ = w;
      if (w != embedding_width_)
        throw ConfigError("model: embedding width " + std::to_string(w) + " for \"" + code +
                          "\" disagrees with " + std::to_string(embedding_width_));
    }

    proj_ = Linear<S>(params_, "universal.proj", cfg_.d_e, embedding_width_);
    sent_stack_ = ResidualBiLstmStack<S>(params_, "universal.sent", cfg_.d_e, cfg_.hidden,
                                         cfg_.sent_layers);
    pred_rep_ = Linear<S>(params_, "universal.pred", cfg_.d_p, t_width());
    sense_rep_ = Linear<S>(params_, "universal.sense", cfg_.d_s, t_width());
    arg_stack_ = ResidualBiLstmStack<S>(params_, "universal.arg", 2 * t_width(), cfg_.hidden,
                                        cfg_.arg_layers);
    role_rep_ = Linear<S>(params_, "universal.role", cfg_.d_r, a_width());

    for (auto& [code, info] : languages_) {
      LangDecoders dec;
      dec.pred = Linear<S>(params_, "lang." + code + ".pred", 2, cfg_.d_p);
      dec.sense = Linear<S>(params_, "lang." + code + ".sense", info.inventory.senses.size(),
                            cfg_.d_s);
      dec.role = Linear<S>(params_, "lang." + code + ".role", info.inventory.roles.size(),
                           cfg_.d_r);
      for (std::size_t i = 0; i < info.inventory.senses.size(); ++i)
        dec.lemma_senses[detail::sense_lemma(info.inventory.senses[i])].push_back(
            static_cast<int>(i));
      decoders_.emplace(code, std::move(dec));
    }

    init();
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<S>& parameters() { return params_; }
  const ParameterSet<S>& parameters() const { return params_; }
  std::size_t embedding_width() const { return embedding_width_; }

  std::size_t t_width() const { return cfg_.d_e + 2 * cfg_.hidden * cfg_.sent_layers; }
  std::size_t a_width() const { return 2 * t_width() + 2 * cfg_.hidden * cfg_.arg_layers; }

  std::vector<std::string> language_codes() const {
    std::vector<std::string> out;
    for (const auto& [code, info] : languages_) out.push_back(code);
    return out;
  }

  bool has_language(const std::string& code) const { return languages_.count(code) > 0; }

  const LanguageInfo& language(const std::string& code) const {
    const auto it = languages_.find(code);
    if (it == languages_.end()) throw DataError("model: unknown language \"" + code + "\"");
    return it->second;
  }

  const LabelInventory& inventory(const std::string& code) const {
    return language(code).inventory;
  }

  EmbeddingProvider<S>& provider(const std::string& code) {
    language(code);
    return *providers_.at(code);
  }
  const EmbeddingProvider<S>& provider(const std::string& code) const {
    language(code);
    return *providers_.at(code);
  }

  // --- universal encoding -------------------------------------------------

  struct SentenceEncoding {
    ResidualStackCtx<S> ctx;
    Tensor<S> t, z_p, p, z_s, s;
  };

  /// t = residual BiLSTM concatenation over e; p/s = Swish-affine rows of t.
  SentenceEncoding encode_sentence(const Tensor<S>& e, double dropout = 0.0,
                                   StableRng* dropout_rng = nullptr) const {
    if (e.cols() != cfg_.d_e)
      throw ShapeError("encode_sentence: e has width " + std::to_string(e.cols()) +
                       ", expected " + std::to_string(cfg_.d_e));
    SentenceEncoding enc;
    enc.t = sent_stack_.forward(e, enc.ctx, dropout, dropout_rng);
    enc.z_p = pred_rep_.forward(enc.t);
    enc.p = swish(enc.z_p);
    enc.z_s = sense_rep_.forward(enc.t);
    enc.s = swish(enc.z_s);
    return enc;
  }

  struct PredicateArgEncoding {
    Tensor<S> a0;
    ResidualStackCtx<S> ctx;
    Tensor<S> a, z_r, r;
  };

  /// Base row i is [t at p_index | t at i]; then the residual stack and the
  /// Swish-affine role representation.
  PredicateArgEncoding encode_predicate_args(const Tensor<S>& t, int p_index,
                                             double dropout = 0.0,
                                             StableRng* dropout_rng = nullptr) const {
    const std::size_t n = t.rows();
    if (p_index < 0 || static_cast<std::size_t>(p_index) >= n)
      throw DataError("encode_predicate_args: predicate position " + std::to_string(p_index) +
                      " outside [0, " + std::to_string(n) + ")");
    PredicateArgEncoding enc;
    enc.a0 = Tensor<S>(n, 2 * t.cols());
    const S* tp = t.row(static_cast<std::size_t>(p_index));
    for (std::size_t i = 0; i < n; ++i) {
      S* out = enc.a0.row(i);
      const S* ti = t.row(i);
      for (std::size_t k = 0; k < t.cols(); ++k) out[k] = tp[k];
      for (std::size_t k = 0; k < t.cols(); ++k) out[t.cols() + k] = ti[k];
    }
    enc.a = arg_stack_.forward(enc.a0, enc.ctx, dropout, dropout_rng);
    enc.z_r = role_rep_.forward(enc.a);
    enc.r = swish(enc.z_r);
    return enc;
  }

  struct DecodedHeads {
    Tensor<S> predicate_logits;  // n x 2
    Tensor<S> sense_logits;      // rows x |senses|
    Tensor<S> role_logits;       // rows x |roles|
  };

  /// Purely affine per-language logits over the given representations.
  DecodedHeads decode_heads(const Tensor<S>& p, const Tensor<S>& s, const Tensor<S>& r,
                            const std::string& lang) const {
    const LangDecoders& dec = decoder(lang);
    return {dec.pred.forward(p), dec.sense.forward(s), dec.role.forward(r)};
  }

  // --- end-to-end ---------------------------------------------------------

  /// Forward pass with an explicit predicate set (0-based positions).
  ForwardTrace<S> forward_with_predicates(const Sentence& sentence, const std::string& lang,
                                          const std::vector<int>& positions,
                                          double dropout = 0.0,
                                          StableRng* dropout_rng = nullptr) const {
    const LangDecoders& dec = decoder(lang);
    ForwardTrace<S> trace;
    trace.language = lang;
    trace.n = sentence.tokens.size();
    trace.h = providers_.at(lang)->embed(sentence);
    if (trace.h.cols() != embedding_width_)
      throw ShapeError("forward: provider emitted width " + std::to_string(trace.h.cols()) +
                       ", expected " + std::to_string(embedding_width_));
    trace.z_e = proj_.forward(trace.h);
    trace.e = swish(trace.z_e);

    SentenceEncoding enc;
    enc.t = sent_stack_.forward(trace.e, enc.ctx, dropout, dropout_rng);
    trace.sent_ctx = std::move(enc.ctx);
    trace.t = std::move(enc.t);
    trace.z_p = pred_rep_.forward(trace.t);
    trace.p = swish(trace.z_p);
    trace.z_s = sense_rep_.forward(trace.t);
    trace.s = swish(trace.z_s);
    trace.pred_logits = dec.pred.forward(trace.p);

    trace.predicate_positions = positions;
    const std::size_t m = positions.size();
    trace.s_pred = Tensor<S>(m, cfg_.d_s);
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t j = 0; j < cfg_.d_s; ++j)
        trace.s_pred(k, j) = trace.s(static_cast<std::size_t>(positions[k]), j);
    trace.sense_logits = dec.sense.forward(trace.s_pred);

    trace.predicates.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      PredicateTrace<S> pt;
      pt.position = positions[k];
      PredicateArgEncoding arg = encode_predicate_args(trace.t, positions[k], dropout, dropout_rng);
      pt.a0 = std::move(arg.a0);
      pt.arg_ctx = std::move(arg.ctx);
      pt.a = std::move(arg.a);
      pt.z_r = std::move(arg.z_r);
      pt.r = std::move(arg.r);
      pt.role_logits = dec.role.forward(pt.r);
      trace.predicates.push_back(std::move(pt));
    }
    return trace;
  }

  /// Teacher-forced forward: sense/role heads run at the gold predicate
  /// positions.
  ForwardTrace<S> forward_training(const Sentence& sentence, const std::string& lang,
                                   double dropout = 0.0,
                                   StableRng* dropout_rng = nullptr) const {
    return forward_with_predicates(sentence, lang, gold_positions(sentence), dropout,
                                   dropout_rng);
  }

  static std::vector<int> gold_positions(const Sentence& sentence) {
    std::vector<int> out;
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i)
      if (sentence.tokens[i].fill_pred) out.push_back(static_cast<int>(i));
    return out;
  }

  /// Exact backward pass; accumulates into parameter grads (including the
  /// embedding provider's, when trainable).
  void backward(const Sentence& sentence, ForwardTrace<S>& trace, const LossGrads<S>& grads) {
    LangDecoders& dec = decoder_mut(trace.language);
    const std::size_t n = trace.n;
    Tensor<S> dt(n, t_width());

    for (std::size_t k = 0; k < trace.predicates.size(); ++k) {
      PredicateTrace<S>& pt = trace.predicates[k];
      Tensor<S> dr = dec.role.backward(pt.r, grads.drole_logits[k]);
      Tensor<S> dz_r = swish_backward(pt.z_r, dr);
      Tensor<S> da = role_rep_.backward(pt.a, dz_r);
      Tensor<S> da0 = arg_stack_.backward(pt.arg_ctx, da);
      const std::size_t w = t_width();
      S* dtp = dt.row(static_cast<std::size_t>(pt.position));
      for (std::size_t i = 0; i < n; ++i) {
        const S* row = da0.row(i);
        axpy(S{1}, row, dtp, w);
        axpy(S{1}, row + w, dt.row(i), w);
      }
    }

    if (!trace.predicate_positions.empty()) {
      Tensor<S> ds_pred = dec.sense.backward(trace.s_pred, grads.dsense_logits);
      Tensor<S> ds(n, cfg_.d_s);
      for (std::size_t k = 0; k < trace.predicate_positions.size(); ++k)
        axpy(S{1}, ds_pred.row(k),
             ds.row(static_cast<std::size_t>(trace.predicate_positions[k])), cfg_.d_s);
      Tensor<S> dz_s = swish_backward(trace.z_s, ds);
      Tensor<S> dts = sense_rep_.backward(trace.t, dz_s);
      axpy(S{1}, dts.data(), dt.data(), dt.size());
    }

    Tensor<S> dp = dec.pred.backward(trace.p, grads.dpred_logits);
    Tensor<S> dz_p = swish_backward(trace.z_p, dp);
    Tensor<S> dtp2 = pred_rep_.backward(trace.t, dz_p);
    axpy(S{1}, dtp2.data(), dt.data(), dt.size());

    Tensor<S> de = sent_stack_.backward(trace.sent_ctx, dt);
    Tensor<S> dz_e = swish_backward(trace.z_e, de);
    Tensor<S> dh = proj_.backward(trace.h, dz_e);
    providers_.at(trace.language)->backward(sentence, dh);
  }

  /// Inference over the four pipeline stages: predicate positions from the
  /// predicate head's per-token argmax, then sense and role argmax per
  /// predicted predicate (null-role tokens are omitted from the frame).
  Sentence predict_annotation(const Sentence& input, const std::string& lang,
                              const PredictOptions& opts = {}) const {
    const LangDecoders& dec = decoder(lang);
    const LabelInventory& inv = inventory(lang);
    std::vector<int> positions;
    ForwardTrace<S> probe = forward_with_predicates(input, lang, {});
    for (std::size_t i = 0; i < input.tokens.size(); ++i)
      if (probe.pred_logits(i, 1) > probe.pred_logits(i, 0))
        positions.push_back(static_cast<int>(i));
    ForwardTrace<S> trace = forward_with_predicates(input, lang, positions);

    Sentence out;
    out.id = input.id;
    out.language = input.language;
    out.tokens = input.tokens;
    for (Token& tok : out.tokens) {
      tok.fill_pred = false;
      tok.pred_sense.reset();
    }

    for (std::size_t k = 0; k < positions.size(); ++k) {
      const std::size_t pos = static_cast<std::size_t>(positions[k]);
      Token& ptok = out.tokens[pos];
      PredicateFrame frame;
      frame.predicate_index = static_cast<int>(pos + 1);
      frame.sense = choose_sense(dec, inv, trace.sense_logits, k, ptok.lemma, opts);
      ptok.fill_pred = true;
      ptok.pred_sense = frame.sense;
      const Tensor<S>& rl = trace.predicates[k].role_logits;
      for (std::size_t i = 0; i < input.tokens.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < rl.cols(); ++c)
          if (rl(i, c) > rl(i, best)) best = c;
        if (best != 0) frame.roles[static_cast<int>(i + 1)] = inv.roles[best];
      }
      out.frames.push_back(std::move(frame));
    }
    return out;
  }

  void init() {
    StableRng rng(cfg_.seed);
    proj_.init(rng);
    sent_stack_.init(rng);
    pred_rep_.init(rng);
    sense_rep_.init(rng);
    arg_stack_.init(rng);
    role_rep_.init(rng);
    for (auto& [code, dec] : decoders_) {
      dec.pred.init(rng);
      dec.sense.init(rng);
      dec.role.init(rng);
    }
    for (auto& [code, provider] : providers_)
      if (auto* lookup = dynamic_cast<LookupEmbeddingProvider<S>*>(provider.get()))
        lookup->init(rng);
  }

 private:
  struct LangDecoders {
    Linear<S> pred;   // 2 x d_p
    Linear<S> sense;  // |senses| x d_s
    Linear<S> role;   // |roles| x d_r
    std::map<std::string, std::vector<int>> lemma_senses;
  };

  const LangDecoders& decoder(const std::string& lang) const {
    const auto it = decoders_.find(lang);
    if (it == decoders_.end()) throw DataError("model: unknown language \"" + lang + "\"");
    return it->second;
  }
  LangDecoders& decoder_mut(const std::string& lang) {
    const auto it = decoders_.find(lang);
    if (it == decoders_.end()) throw DataError("model: unknown language \"" + lang + "\"");
    return it->second;
  }

  std::unique_ptr<EmbeddingProvider<S>> make_provider(const LanguageInfo& info) {
    switch (info.embedder.kind) {
      case EmbedderKind::toy:
        return std::make_unique<ToyEmbeddingProvider<S>>(info.embedder);
      case EmbedderKind::lookup:
        return std::make_unique<LookupEmbeddingProvider<S>>(
            params_, "embedder." + info.code, info.vocabulary, info.embedder);
      case EmbedderKind::cache:
        return std::make_unique<CacheEmbeddingProvider<S>>(info.embedder.cache_path);
    }
    throw ConfigError("model: invalid embedder kind");
  }

  std::string choose_sense(const LangDecoders& dec, const LabelInventory& inv,
                           const Tensor<S>& sense_logits, std::size_t k,
                           const std::string& lemma, const PredictOptions& opts) const {
    if (inv.senses.empty()) return lemma + ".01";
    if (opts.lemma_mask) {
      const auto it = dec.lemma_senses.find(lemma);
      if (it == dec.lemma_senses.end()) return lemma + ".01";
      int best = it->second.front();
      for (const int cand : it->second)
        if (sense_logits(k, static_cast<std::size_t>(cand)) >
            sense_logits(k, static_cast<std::size_t>(best)))
          best = cand;
      return inv.senses[static_cast<std::size_t>(best)];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < sense_logits.cols(); ++c)
      if (sense_logits(k, c) > sense_logits(k, best)) best = c;
    return inv.senses[best];
  }

  ModelConfig cfg_;
  std::map<std::string, LanguageInfo> languages_;
  std::map<std::string, std::unique_ptr<EmbeddingProvider<S>>> providers_;
  ParameterSet<S> params_;
  std::size_t embedding_width_ = 0;

  Linear<S> proj_;
  ResidualBiLstmStack<S> sent_stack_;
  Linear<S> pred_rep_;
  Linear<S> sense_rep_;
  ResidualBiLstmStack<S> arg_stack_;
  Linear<S> role_rep_;
  std::map<std::string, LangDecoders> decoders_;
};

}  // namespace usrl
