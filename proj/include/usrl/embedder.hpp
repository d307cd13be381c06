#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usrl/conll.hpp"
#include "usrl/embedding_cache.hpp"
#include "usrl/errors.hpp"
#include "usrl/nn.hpp"
#include "usrl/random.hpp"
#include "usrl/tensor.hpp"

namespace usrl {

/// Hidden-state stack of a language model: one n x d matrix per layer,
/// bottom to top.
template <typename S>
struct LayerStack {
  std::vector<Tensor<S>> layers;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t rows() const { return layers.empty() ? 0 : layers.front().rows(); }
  std::size_t width() const { return layers.empty() ? 0 : layers.front().cols(); }
};

enum class EmbedderKind { toy, lookup, cache };

/// Selects and parameterizes the contextual-embedding provider for one
/// language. Only the fields of the chosen kind are meaningful.
struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::toy;
  std::size_t width = 32;      // toy/lookup: per-layer width d (h width is 4d)
  std::size_t lm_layers = 12;  // toy: layer count K
  std::uint64_t seed = 13;     // toy
  bool trainable = true;       // lookup
  std::string cache_path;      // cache

  bool operator==(const EmbedderSpec&) const = default;
};

inline std::string embedder_kind_name(EmbedderKind k) {
  switch (k) {
    case EmbedderKind::toy: return "toy";
    case EmbedderKind::lookup: return "lookup";
    case EmbedderKind::cache: return "cache";
  }
  return "?";
}

inline EmbedderKind embedder_kind_from_name(const std::string& name) {
  if (name == "toy") return EmbedderKind::toy;
  if (name == "lookup") return EmbedderKind::lookup;
  if (name == "cache") return EmbedderKind::cache;
  throw ConfigError("unknown embedder kind \"" + name + "\"");
}

namespace detail {

// Stable per-element value in [-sqrt(3), sqrt(3)] (unit variance), derived
// from (language, form, layer, seed). Generated in double and cast so the
// standard and high precision modes see the same underlying stream.
inline double toy_value(std::uint64_t row_hash, std::size_t element) {
  std::uint64_t state = row_hash + 0x9e3779b97f4a7c15ull * (element + 1);
  const double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
  constexpr double sqrt3 = 1.7320508075688772;
  return (2.0 * unit - 1.0) * sqrt3;
}

inline std::uint64_t toy_row_hash(const std::string& language, const std::string& form,
                                  std::size_t layer, std::uint64_t seed) {
  std::uint64_t h = fnv1a(language);
  h = fnv1a("\x1f", h);
  h = fnv1a(form, h);
  h = fnv1a("\x1f", h);
  h = fnv1a_u64(layer, h);
  h = fnv1a_u64(seed, h);
  return h;
}

}  // namespace detail

/// Deterministic stand-in for a pretrained language model: every
/// (language, form, layer) gets a fixed pseudo-random vector, so identical
/// inputs give bit-identical stacks across runs and platforms.
template <typename S>
LayerStack<S> toy_embed(const Sentence& sentence, const EmbedderSpec& spec) {
  if (spec.kind != EmbedderKind::toy) throw ConfigError("toy_embed: spec kind is not toy");
  LayerStack<S> stack;
  stack.layers.reserve(spec.lm_layers);
  for (std::size_t k = 0; k < spec.lm_layers; ++k) {
    Tensor<S> layer(sentence.tokens.size(), spec.width);
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      const std::uint64_t h =
          detail::toy_row_hash(sentence.language, sentence.tokens[i].form, k, spec.seed);
      for (std::size_t j = 0; j < spec.width; ++j)
        layer(i, j) = static_cast<S>(detail::toy_value(h, j));
    }
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

/// Concatenates the hidden states of the top four layers, top layer first:
/// row i = [layer K | layer K-1 | layer K-2 | layer K-3].
template <typename S>
Tensor<S> concat_top_layers(const LayerStack<S>& stack) {
  const std::size_t k = stack.layer_count();
  if (k < 4)
    throw ShapeError("concat_top_layers: need at least 4 layers, got " + std::to_string(k));
  const std::size_t n = stack.rows(), d = stack.width();
  for (const auto& layer : stack.layers)
    if (layer.rows() != n || layer.cols() != d)
      throw ShapeError("concat_top_layers: layers disagree on shape");
  Tensor<S> h(n, 4 * d);
  for (std::size_t i = 0; i < n; ++i) {
    S* out = h.row(i);
    for (std::size_t top = 0; top < 4; ++top) {
      const S* src = stack.layers[k - 1 - top].row(i);
      for (std::size_t j = 0; j < d; ++j) out[top * d + j] = src[j];
    }
  }
  return h;
}

/// e_i = Swish(W^w h_i + b^w), row-wise.
template <typename S>
Tensor<S> project(const Tensor<S>& h, const Tensor<S>& w, const Tensor<S>& b) {
  return swish(linear_forward(h, w, b));
}

/// Produces the pre-concatenated contextual matrix h (n x width) for a
/// sentence. Lookup providers own trainable parameters; backward() routes
/// d(loss)/dh into them.
template <typename S>
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t output_width() const = 0;
  virtual Tensor<S> embed(const Sentence& sentence) const = 0;
  virtual void backward(const Sentence& sentence, const Tensor<S>& dh) {}
};

template <typename S>
class ToyEmbeddingProvider final : public EmbeddingProvider<S> {
 public:
  explicit ToyEmbeddingProvider(EmbedderSpec spec) : spec_(std::move(spec)) {
    if (spec_.lm_layers < 4)
      throw ConfigError("toy embedder: lm_layers must be >= 4, got " +
                        std::to_string(spec_.lm_layers));
  }

  std::size_t output_width() const override { return 4 * spec_.width; }

  Tensor<S> embed(const Sentence& sentence) const override {
    return concat_top_layers(toy_embed<S>(sentence, spec_));
  }

 private:
  EmbedderSpec spec_;
};

/// Trainable per-form table. Emits a single-layer stack replicated four
/// times so the top-4 concatenation applies uniformly downstream. Row 0 is
/// the unknown-form vector.
template <typename S>
class LookupEmbeddingProvider final : public EmbeddingProvider<S> {
 public:
  LookupEmbeddingProvider(ParameterSet<S>& params, const std::string& name_prefix,
                          std::vector<std::string> vocabulary, const EmbedderSpec& spec)
      : vocabulary_(std::move(vocabulary)), width_(spec.width) {
    table_ = params.create(name_prefix + ".table", {vocabulary_.size() + 1, width_});
    table_->trainable = spec.trainable;
    for (std::size_t i = 0; i < vocabulary_.size(); ++i)
      index_.emplace(vocabulary_[i], i + 1);
  }

  void init(StableRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(width_));
    for (std::size_t i = 0; i < table_->value.size(); ++i)
      table_->value[i] = static_cast<S>(rng.uniform(-bound, bound));
  }

  std::size_t output_width() const override { return 4 * width_; }

  Tensor<S> embed(const Sentence& sentence) const override {
    Tensor<S> h(sentence.tokens.size(), 4 * width_);
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      const S* src = table_->value.row(row_of(sentence.tokens[i].form));
      S* out = h.row(i);
      for (std::size_t rep = 0; rep < 4; ++rep)
        for (std::size_t j = 0; j < width_; ++j) out[rep * width_ + j] = src[j];
    }
    return h;
  }

  void backward(const Sentence& sentence, const Tensor<S>& dh) override {
    if (!table_->trainable) return;
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      S* grad = table_->grad.row(row_of(sentence.tokens[i].form));
      const S* src = dh.row(i);
      for (std::size_t rep = 0; rep < 4; ++rep)
        for (std::size_t j = 0; j < width_; ++j) grad[j] += src[rep * width_ + j];
    }
  }

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  std::size_t row_of(const std::string& form) const {
    const auto it = index_.find(form);
    return it == index_.end() ? 0 : it->second;
  }

  std::vector<std::string> vocabulary_;
  std::map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
  Parameter<S>* table_ = nullptr;
};

template <typename S>
class CacheEmbeddingProvider final : public EmbeddingProvider<S> {
 public:
  explicit CacheEmbeddingProvider(const std::string& path)
      : path_(path), cache_(read_cache_file(path)) {}

  std::size_t output_width() const override { return cache_.width; }

  Tensor<S> embed(const Sentence& sentence) const override {
    const auto it = cache_.entries.find(cache_key(sentence));
    if (it == cache_.entries.end())
      throw DataError("embedding cache \"" + path_ + "\": no entry for sentence id \"" +
                      sentence.id + "\" (language \"" + sentence.language + "\")");
    if (it->second.rows() != sentence.tokens.size())
      throw DataError("embedding cache \"" + path_ + "\": sentence id \"" + sentence.id +
                      "\" has " + std::to_string(sentence.tokens.size()) +
                      " tokens but the cache stores " + std::to_string(it->second.rows()) +
                      " rows");
    return it->second.template cast<S>();
  }

 private:
  std::string path_;
  EmbeddingCache cache_;
};

/// First-seen form vocabulary over a corpus (for lookup providers).
inline std::vector<std::string> build_vocabulary(const Corpus& corpus) {
  std::vector<std::string> vocab;
  std::map<std::string, bool> seen;
  for (const Sentence& s : corpus.sentences)
    for (const Token& tok : s.tokens)
      if (!seen.count(tok.form)) {
        seen.emplace(tok.form, true);
        vocab.push_back(tok.form);
      }
  return vocab;
}

}  // namespace usrl
