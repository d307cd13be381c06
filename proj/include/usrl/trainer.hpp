#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "usrl/adamw.hpp"
#include "usrl/conll.hpp"
#include "usrl/errors.hpp"
#include "usrl/eval.hpp"
#include "usrl/model.hpp"
#include "usrl/nn.hpp"
#include "usrl/random.hpp"

namespace usrl {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  std::map<std::string, double> language_weights;  // absent languages weigh 1.0
  std::vector<std::string> freeze;                 // frozen name-path prefixes
  std::size_t patience = 5;
  std::uint64_t seed = 13;
  double grad_clip = 0.0;  // 0 disables clipping
  bool teacher_forcing = true;
  double dropout = 0.0;

  double weight_for(const std::string& language) const {
    const auto it = language_weights.find(language);
    return it == language_weights.end() ? 1.0 : it->second;
  }
};

struct Batch {
  std::string language;
  std::vector<const Sentence*> sentences;
};

/// One epoch of batches: every language's sentences are shuffled by the seed
/// and chunked, then the per-language batch lists are interleaved so that
/// emission stays proportional to each language's batch count (equal counts
/// alternate strictly). Every sentence appears exactly once.
inline std::vector<Batch> make_batches(const std::map<std::string, const Corpus*>& corpora,
                                       std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<std::string> langs;
  std::map<std::string, std::vector<Batch>> per_lang;
  std::size_t total_sentences = 0;
  for (const auto& [code, corpus] : corpora) {
    if (corpus == nullptr || corpus->sentences.empty()) continue;
    total_sentences += corpus->sentences.size();
    std::vector<std::size_t> order(corpus->sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    StableRng rng(mix64(seed, fnv1a(code)));
    rng.shuffle(order);
    std::vector<Batch>& batches = per_lang[code];
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      Batch b;
      b.language = code;
      const std::size_t end = std::min(order.size(), start + batch_size);
      for (std::size_t i = start; i < end; ++i)
        b.sentences.push_back(&corpus->sentences[order[i]]);
      batches.push_back(std::move(b));
    }
    langs.push_back(code);
  }
  if (total_sentences == 0) throw DataError("make_batches: all corpora are empty");

  std::vector<Batch> out;
  std::map<std::string, std::size_t> emitted;
  const std::size_t total_batches = [&] {
    std::size_t t = 0;
    for (const auto& [code, b] : per_lang) t += b.size();
    return t;
  }();
  for (std::size_t step = 0; step < total_batches; ++step) {
    // deficit round-robin: pick the language furthest behind its share
    const std::string* pick = nullptr;
    double best = 0.0;
    for (const std::string& code : langs) {
      const std::size_t have = per_lang[code].size();
      const std::size_t done = emitted[code];
      if (done >= have) continue;
      const double ratio = static_cast<double>(done + 1) / static_cast<double>(have);
      if (pick == nullptr || ratio < best) {
        pick = &code;
        best = ratio;
      }
    }
    out.push_back(std::move(per_lang[*pick][emitted[*pick]]));
    ++emitted[*pick];
  }
  return out;
}

struct TaskLosses {
  double predicate = 0.0;
  double sense = 0.0;
  double role = 0.0;
  double sum() const { return predicate + sense + role; }
};

struct LossBreakdown {
  double total = 0.0;
  std::map<std::string, TaskLosses> components;
};

/// The multi-task objective: total = sum over languages of
/// weight_l * (predicate + sense + role). Unit weights give the plain sum of
/// the per-language per-task cross-entropies.
inline LossBreakdown total_loss(const std::map<std::string, TaskLosses>& components,
                                const std::map<std::string, double>& weights = {}) {
  LossBreakdown out;
  out.components = components;
  for (const auto& [code, losses] : components) {
    const auto it = weights.find(code);
    const double w = it == weights.end() ? 1.0 : it->second;
    out.total += w * losses.sum();
  }
  return out;
}

/// Marks parameters under the given name-path prefixes non-trainable and
/// everything else trainable. A prefix matching nothing is a configuration
/// error.
template <typename S>
void apply_freeze(SrlModel<S>& model, const std::vector<std::string>& prefixes) {
  const auto params = model.parameters().all();
  for (Parameter<S>* p : params) p->trainable = true;
  for (const std::string& prefix : prefixes) {
    bool matched = false;
    for (Parameter<S>* p : params) {
      if (p->name.rfind(prefix, 0) == 0) {
        p->trainable = false;
        matched = true;
      }
    }
    if (!matched)
      throw ConfigError("freeze prefix \"" + prefix + "\" matches no parameters");
  }
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::map<std::string, TaskLosses> components;  // micro means over the epoch
  double total = 0.0;                            // weighted objective
  std::map<std::string, double> dev_f1;
  double dev_mean_f1 = -1.0;  // -1 when no dev corpora
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no dev selection happened
  double best_dev_f1 = -1.0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> batch_counts;  // per epoch, by language
  std::size_t optimizer_steps = 0;
};

namespace detail {

template <typename S>
struct BatchSums {
  double pred = 0.0, sense = 0.0, role = 0.0;
  std::size_t pred_n = 0, sense_n = 0, role_n = 0;
};

// Forward + loss (+ backward when with_grad) for one homogeneous-language
// batch. Loss gradients are pre-scaled by weight / per-task row count so the
// accumulated parameter grads are exactly d(weighted batch objective).
template <typename S>
BatchSums<S> process_batch(SrlModel<S>& model, const Batch& batch, const TrainConfig& cfg,
                           bool with_grad, StableRng* dropout_rng) {
  const LabelInventory& inv = model.inventory(batch.language);
  const double weight = cfg.weight_for(batch.language);

  std::vector<ForwardTrace<S>> traces;
  traces.reserve(batch.sentences.size());
  for (const Sentence* s : batch.sentences) {
    if (cfg.teacher_forcing) {
      traces.push_back(model.forward_training(*s, batch.language, cfg.dropout, dropout_rng));
    } else {
      ForwardTrace<S> probe = model.forward_with_predicates(*s, batch.language, {});
      std::vector<int> positions;
      for (std::size_t i = 0; i < s->tokens.size(); ++i)
        if (probe.pred_logits(i, 1) > probe.pred_logits(i, 0))
          positions.push_back(static_cast<int>(i));
      traces.push_back(model.forward_with_predicates(*s, batch.language, positions,
                                                     cfg.dropout, dropout_rng));
    }
  }

  BatchSums<S> sums;
  for (std::size_t si = 0; si < traces.size(); ++si) {
    sums.pred_n += batch.sentences[si]->tokens.size();
    sums.sense_n += traces[si].predicate_positions.size();
    sums.role_n += traces[si].predicate_positions.size() * batch.sentences[si]->tokens.size();
  }
  const S pred_scale = sums.pred_n ? static_cast<S>(weight / static_cast<double>(sums.pred_n)) : S{0};
  const S sense_scale = sums.sense_n ? static_cast<S>(weight / static_cast<double>(sums.sense_n)) : S{0};
  const S role_scale = sums.role_n ? static_cast<S>(weight / static_cast<double>(sums.role_n)) : S{0};

  for (std::size_t si = 0; si < traces.size(); ++si) {
    const Sentence& sent = *batch.sentences[si];
    ForwardTrace<S>& trace = traces[si];
    const std::size_t n = sent.tokens.size();
    const std::size_t m = trace.predicate_positions.size();

    std::map<int, const PredicateFrame*> gold;
    for (const PredicateFrame& f : sent.frames) gold.emplace(f.predicate_index, &f);

    LossGrads<S> grads;
    grads.dpred_logits = Tensor<S>(trace.pred_logits.shape());
    grads.dsense_logits = Tensor<S>(trace.sense_logits.shape());

    std::vector<int> pred_targets(n);
    std::vector<char> all_on(n, 1);
    for (std::size_t i = 0; i < n; ++i) pred_targets[i] = sent.tokens[i].fill_pred ? 1 : 0;
    sums.pred += softmax_xent_sum<S>(trace.pred_logits, pred_targets, all_on, pred_scale,
                                     with_grad ? &grads.dpred_logits : nullptr)
                     .first;

    std::vector<int> sense_targets(m, 0);
    std::vector<char> sense_mask(m, 0);
    for (std::size_t k = 0; k < m; ++k) {
      const auto it = gold.find(trace.predicate_positions[k] + 1);
      if (it == gold.end()) continue;  // non-gold predicate (scheduled mode)
      const int idx = inv.sense_index(it->second->sense);
      if (idx < 0)
        throw DataError("sentence id \"" + sent.id + "\": sense \"" + it->second->sense +
                        "\" not in the " + batch.language + " inventory");
      sense_targets[k] = idx;
      sense_mask[k] = 1;
    }
    sums.sense += softmax_xent_sum<S>(trace.sense_logits, sense_targets, sense_mask,
                                      sense_scale, with_grad ? &grads.dsense_logits : nullptr)
                      .first;

    grads.drole_logits.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      const Tensor<S>& logits = trace.predicates[k].role_logits;
      Tensor<S> dlogits(logits.shape());
      std::vector<int> role_targets(n, 0);
      const auto it = gold.find(trace.predicate_positions[k] + 1);
      if (it != gold.end()) {
        for (const auto& [arg, role] : it->second->roles) {
          const int idx = inv.role_index(role);
          if (idx < 0)
            throw DataError("sentence id \"" + sent.id + "\": role \"" + role +
                            "\" not in the " + batch.language + " inventory");
          role_targets[static_cast<std::size_t>(arg - 1)] = idx;
        }
      }
      sums.role += softmax_xent_sum<S>(logits, role_targets, all_on, role_scale,
                                       with_grad ? &dlogits : nullptr)
                       .first;
      grads.drole_logits.push_back(std::move(dlogits));
    }

    if (with_grad) model.backward(sent, trace, grads);
  }
  return sums;
}

template <typename S>
void clip_gradients(SrlModel<S>& model, double max_norm) {
  double sq = 0.0;
  const auto params = model.parameters().all();
  for (const Parameter<S>* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      const double g = static_cast<double>(p->grad[i]);
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const S scale = static_cast<S>(max_norm / norm);
  for (Parameter<S>* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
  }
}

}  // namespace detail

/// Mean semantic F1 of the model's predictions over a gold corpus.
template <typename S>
double evaluate_f1(const SrlModel<S>& model, const std::string& language, const Corpus& gold,
                   const PredictOptions& opts = {}) {
  Corpus pred;
  pred.language = gold.language;
  pred.sentences.reserve(gold.sentences.size());
  for (const Sentence& s : gold.sentences)
    pred.sentences.push_back(model.predict_annotation(s, language, opts));
  return score(gold, pred).f1;
}

/// Multi-task training loop: per epoch, shuffled homogeneous-language
/// batches, summed weighted objective, AdamW steps under the freeze policy,
/// dev-F1 model selection with early stopping after `patience` epochs
/// without improvement. Serial and bit-deterministic for a fixed seed.
template <typename S>
TrainHistory train(SrlModel<S>& model, const TrainConfig& cfg,
                   const std::map<std::string, const Corpus*>& train_corpora,
                   const std::map<std::string, const Corpus*>& dev_corpora) {
  std::vector<std::string> freeze = cfg.freeze;
  for (const std::string& code : model.language_codes()) {
    const LanguageInfo& info = model.language(code);
    // a lookup provider declared non-trainable acts as an implicit freeze
    if (info.embedder.kind == EmbedderKind::lookup && !info.embedder.trainable)
      freeze.push_back("embedder." + code + ".");
  }
  apply_freeze(model, freeze);

  AdamWConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW<S> optimizer(model.parameters().all(), opt_cfg);

  TrainHistory history;
  history.seed = cfg.seed;

  std::vector<Tensor<S>> best_values;
  const auto params = model.parameters().all();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<Batch> batches = make_batches(train_corpora, cfg.batch_size,
                                              mix64(cfg.seed, epoch));
    if (epoch == 1)
      for (const Batch& b : batches) ++history.batch_counts[b.language];

    std::map<std::string, detail::BatchSums<S>> epoch_sums;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      model.parameters().zero_grads();
      StableRng dropout_rng(mix64(mix64(cfg.seed, epoch), bi));
      detail::BatchSums<S> sums = detail::process_batch(
          model, batch, cfg, true, cfg.dropout > 0.0 ? &dropout_rng : nullptr);

      const double batch_obj =
          cfg.weight_for(batch.language) *
          ((sums.pred_n ? sums.pred / static_cast<double>(sums.pred_n) : 0.0) +
           (sums.sense_n ? sums.sense / static_cast<double>(sums.sense_n) : 0.0) +
           (sums.role_n ? sums.role / static_cast<double>(sums.role_n) : 0.0));
      if (!std::isfinite(batch_obj))
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) +
                           " (language " + batch.language + "): non-finite loss");

      if (cfg.grad_clip > 0.0) detail::clip_gradients(model, cfg.grad_clip);
      optimizer.step();
      ++history.optimizer_steps;

      detail::BatchSums<S>& agg = epoch_sums[batch.language];
      agg.pred += sums.pred;
      agg.sense += sums.sense;
      agg.role += sums.role;
      agg.pred_n += sums.pred_n;
      agg.sense_n += sums.sense_n;
      agg.role_n += sums.role_n;
    }

    EpochRecord record;
    record.epoch = epoch;
    std::map<std::string, TaskLosses> components;
    for (const auto& [code, sums] : epoch_sums) {
      TaskLosses t;
      t.predicate = sums.pred_n ? sums.pred / static_cast<double>(sums.pred_n) : 0.0;
      t.sense = sums.sense_n ? sums.sense / static_cast<double>(sums.sense_n) : 0.0;
      t.role = sums.role_n ? sums.role / static_cast<double>(sums.role_n) : 0.0;
      components.emplace(code, t);
    }
    const LossBreakdown breakdown = total_loss(components, cfg.language_weights);
    record.components = breakdown.components;
    record.total = breakdown.total;

    if (!dev_corpora.empty()) {
      double sum_f1 = 0.0;
      for (const auto& [code, corpus] : dev_corpora) {
        const double f1 = evaluate_f1(model, code, *corpus);
        record.dev_f1[code] = f1;
        sum_f1 += f1;
      }
      record.dev_mean_f1 = sum_f1 / static_cast<double>(dev_corpora.size());
      if (history.best_epoch == 0 || record.dev_mean_f1 > history.best_dev_f1) {
        history.best_epoch = epoch;
        history.best_dev_f1 = record.dev_mean_f1;
        best_values.clear();
        for (const Parameter<S>* p : params) best_values.push_back(p->value);
      }
    }
    history.epochs.push_back(std::move(record));

    if (!dev_corpora.empty() && epoch - history.best_epoch >= cfg.patience) break;
  }

  if (!best_values.empty())
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  return history;
}

}  // namespace usrl
