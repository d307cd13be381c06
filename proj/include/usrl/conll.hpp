#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "usrl/errors.hpp"
#include "usrl/random.hpp"

namespace usrl {

// Reserved argument-identification class; never written to CoNLL output.
inline constexpr const char* kNullRole = "<null>";

/// One CoNLL-2009 token row. Syntactic columns (PLEMMA..PDEPREL) are carried
/// opaquely for lossless round-trips; the model never reads them.
struct Token {
  int index = 1;  // 1-based
  std::string form;
  std::string lemma;
  std::string pos;
  bool fill_pred = false;
  std::optional<std::string> pred_sense;  // present iff fill_pred

  std::string plemma = "_";
  std::string ppos = "_";
  std::string feat = "_";
  std::string pfeat = "_";
  std::string head = "_";
  std::string phead = "_";
  std::string deprel = "_";
  std::string pdeprel = "_";

  bool operator==(const Token&) const = default;
};

/// A predicate with its sense and argument role assignments, keyed by the
/// 1-based token index of each argument.
struct PredicateFrame {
  int predicate_index = 0;  // 1-based token index
  std::string sense;
  std::map<int, std::string> roles;

  bool operator==(const PredicateFrame&) const = default;
};

struct Sentence {
  std::string id;
  std::string language;
  std::vector<Token> tokens;
  std::vector<PredicateFrame> frames;  // ordered by predicate_index

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

struct Corpus {
  std::string language;
  std::vector<Sentence> sentences;

  std::size_t size() const { return sentences.size(); }
  bool operator==(const Corpus&) const = default;
};

/// Per-language label spaces. roles[0] is always the reserved null role.
struct LabelInventory {
  std::string language;
  std::vector<std::string> senses;
  std::vector<std::string> roles;

  int sense_index(const std::string& label) const {
    for (std::size_t i = 0; i < senses.size(); ++i)
      if (senses[i] == label) return static_cast<int>(i);
    return -1;
  }
  int role_index(const std::string& label) const {
    for (std::size_t i = 0; i < roles.size(); ++i)
      if (roles[i] == label) return static_cast<int>(i);
    return -1;
  }
  bool operator==(const LabelInventory&) const = default;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c >> 4) == 0xe) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c >> 3) == 0x1e) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // overlongs and surrogates
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000))
      return false;
    if (cp >= 0xd800 && cp <= 0xdfff) return false;
    if (cp > 0x10ffff) return false;
    i += len;
  }
  return true;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

struct RawRow {
  std::size_t line_no;
  std::vector<std::string_view> cols;
};

inline Sentence build_sentence(const std::vector<RawRow>& rows, std::size_t block_line,
                               const std::string& language, std::string id) {
  const std::size_t ncols = rows.front().cols.size();
  for (const RawRow& row : rows) {
    if (row.cols.size() != ncols)
      throw ParseError(row.line_no, "expected " + std::to_string(ncols) + " columns, got " +
                                        std::to_string(row.cols.size()) +
                                        " (column count must be constant within a sentence)");
  }
  if (ncols < 14)
    throw ParseError(rows.front().line_no,
                     "expected at least 14 columns, got " + std::to_string(ncols));

  Sentence sentence;
  sentence.language = language;
  sentence.id = std::move(id);
  const std::size_t apred_count = ncols - 14;
  std::vector<std::size_t> predicate_rows;

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const RawRow& row = rows[r];
    Token tok;
    const std::string id_cell(row.cols[0]);
    try {
      std::size_t used = 0;
      tok.index = std::stoi(id_cell, &used);
      if (used != id_cell.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(row.line_no, "ID column is not an integer: \"" + id_cell + "\"");
    }
    if (tok.index != static_cast<int>(r + 1))
      throw ParseError(row.line_no, "ID " + id_cell + " out of sequence (expected " +
                                        std::to_string(r + 1) + ")");
    tok.form = std::string(row.cols[1]);
    tok.lemma = std::string(row.cols[2]);
    tok.plemma = std::string(row.cols[3]);
    tok.pos = std::string(row.cols[4]);
    tok.ppos = std::string(row.cols[5]);
    tok.feat = std::string(row.cols[6]);
    tok.pfeat = std::string(row.cols[7]);
    tok.head = std::string(row.cols[8]);
    tok.phead = std::string(row.cols[9]);
    tok.deprel = std::string(row.cols[10]);
    tok.pdeprel = std::string(row.cols[11]);

    const std::string_view fillpred = row.cols[12];
    const std::string_view pred = row.cols[13];
    if (fillpred == "Y") {
      if (pred == "_")
        throw ParseError(row.line_no, "FILLPRED is \"Y\" but PRED is \"_\"");
      tok.fill_pred = true;
      tok.pred_sense = std::string(pred);
      predicate_rows.push_back(r);
    } else if (fillpred == "_") {
      if (pred != "_")
        throw ParseError(row.line_no,
                         "PRED is \"" + std::string(pred) + "\" but FILLPRED is not \"Y\"");
    } else {
      throw ParseError(row.line_no,
                       "FILLPRED must be \"Y\" or \"_\", got \"" + std::string(fillpred) + "\"");
    }
    sentence.tokens.push_back(std::move(tok));
  }

  if (predicate_rows.size() != apred_count)
    throw ParseError(block_line, "sentence has " + std::to_string(predicate_rows.size()) +
                                     " predicates but " + std::to_string(apred_count) +
                                     " APRED columns");

  for (std::size_t j = 0; j < apred_count; ++j) {
    PredicateFrame frame;
    frame.predicate_index = static_cast<int>(predicate_rows[j] + 1);
    frame.sense = *sentence.tokens[predicate_rows[j]].pred_sense;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string_view cell = rows[r].cols[14 + j];
      if (cell != "_") frame.roles[static_cast<int>(r + 1)] = std::string(cell);
    }
    sentence.frames.push_back(std::move(frame));
  }
  return sentence;
}

}  // namespace detail

/// Parses a CoNLL-2009 document: tab-separated columns, blank-line sentence
/// boundaries, >= 14 columns per row plus one APRED column per predicate.
/// Sentence ids default to the 1-based position in the document; a
/// "# id = <id>" comment line directly before a block overrides that (the
/// writer emits one only when needed, so plain files round-trip byte-exactly).
inline Corpus parse_conll09(std::string_view text, const std::string& language) {
  Corpus corpus;
  corpus.language = language;

  std::vector<detail::RawRow> block;
  std::size_t block_line = 0;
  std::optional<std::string> pending_id;

  auto flush = [&]() {
    if (block.empty()) return;
    std::string id = pending_id ? *pending_id
                                : std::to_string(corpus.sentences.size() + 1);
    corpus.sentences.push_back(detail::build_sentence(block, block_line, language, std::move(id)));
    block.clear();
    pending_id.reset();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    const bool last = eol == text.size();
    pos = eol + 1;

    if (!detail::valid_utf8(line)) throw ParseError(line_no, "invalid UTF-8");

    if (line.empty()) {
      flush();
      if (last) break;
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view id_prefix = "# id = ";
      if (line.substr(0, id_prefix.size()) == id_prefix) {
        if (!block.empty())
          throw ParseError(line_no, "sentence id comment must precede the sentence block");
        pending_id = std::string(line.substr(id_prefix.size()));
      }
      if (last) break;
      continue;
    }
    if (block.empty()) block_line = line_no;
    block.push_back({line_no, detail::split_tabs(line)});
    if (last) break;
  }
  flush();
  return corpus;
}

/// Inverse of parse_conll09. Each sentence block is followed by one blank
/// line; empty cells are "_"; a sentence with no frames carries no APRED
/// columns.
inline std::string write_conll09(const Corpus& corpus) {
  std::string out;
  for (std::size_t si = 0; si < corpus.sentences.size(); ++si) {
    const Sentence& s = corpus.sentences[si];
    if (s.id != std::to_string(si + 1)) {
      out += "# id = ";
      out += s.id;
      out += '\n';
    }
    for (const Token& tok : s.tokens) {
      out += std::to_string(tok.index);
      out += '\t';
      out += tok.form;
      out += '\t';
      out += tok.lemma;
      out += '\t';
      out += tok.plemma;
      out += '\t';
      out += tok.pos;
      out += '\t';
      out += tok.ppos;
      out += '\t';
      out += tok.feat;
      out += '\t';
      out += tok.pfeat;
      out += '\t';
      out += tok.head;
      out += '\t';
      out += tok.phead;
      out += '\t';
      out += tok.deprel;
      out += '\t';
      out += tok.pdeprel;
      out += '\t';
      out += tok.fill_pred ? "Y" : "_";
      out += '\t';
      out += tok.pred_sense ? *tok.pred_sense : "_";
      for (const PredicateFrame& frame : s.frames) {
        out += '\t';
        auto it = frame.roles.find(tok.index);
        out += it == frame.roles.end() ? "_" : it->second;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

struct Violation {
  std::string field;
  int index = 0;  // token index or frame ordinal, 1-based where applicable
  std::string message;
};

namespace detail {

// "eat.01" -> "eat"; labels without a dot are their own lemma.
inline std::string sense_lemma(const std::string& sense) {
  const std::size_t dot = sense.rfind('.');
  return dot == std::string::npos ? sense : sense.substr(0, dot);
}

// A sense is acceptable when attested in the inventory or lemma-consistent
// (`<lemma>.<digits>`), which covers the predictor's unseen-lemma fallback.
inline bool sense_acceptable(const std::string& sense, const std::string& lemma,
                             const LabelInventory& inv) {
  if (inv.sense_index(sense) >= 0) return true;
  if (sense_lemma(sense) != lemma) return false;
  const std::size_t dot = sense.rfind('.');
  if (dot == std::string::npos || dot + 1 == sense.size()) return false;
  for (std::size_t i = dot + 1; i < sense.size(); ++i)
    if (sense[i] < '0' || sense[i] > '9') return false;
  return true;
}

}  // namespace detail

/// Checks every Sentence/PredicateFrame invariant plus label membership.
/// Violations are data, not failures: an empty list means the sentence is
/// well-formed with respect to the inventory.
inline std::vector<Violation> validate_sentence(const Sentence& s, const LabelInventory& inv) {
  std::vector<Violation> out;
  const int n = static_cast<int>(s.tokens.size());
  if (n == 0) out.push_back({"sentence.tokens", 0, "sentence has no tokens"});

  std::size_t fillpred_count = 0;
  for (int i = 0; i < n; ++i) {
    const Token& tok = s.tokens[static_cast<std::size_t>(i)];
    if (tok.index != i + 1)
      out.push_back({"token.index", i + 1,
                     "token index " + std::to_string(tok.index) + " out of sequence"});
    if (tok.fill_pred != tok.pred_sense.has_value())
      out.push_back({"token.pred_sense", tok.index,
                     tok.fill_pred ? "predicate token is missing its sense"
                                   : "non-predicate token carries a sense"});
    if (tok.fill_pred) ++fillpred_count;
  }

  if (s.frames.size() != fillpred_count)
    out.push_back({"sentence.frames", 0,
                   std::to_string(s.frames.size()) + " frames but " +
                       std::to_string(fillpred_count) + " predicate tokens"});

  int prev_pred = 0;
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    const PredicateFrame& frame = s.frames[f];
    const int ordinal = static_cast<int>(f + 1);
    if (frame.predicate_index <= prev_pred)
      out.push_back({"frame.predicate_index", ordinal, "predicate indices not strictly increasing"});
    prev_pred = frame.predicate_index;
    if (frame.predicate_index < 1 || frame.predicate_index > n) {
      out.push_back({"frame.predicate_index", ordinal,
                     "predicate index " + std::to_string(frame.predicate_index) +
                         " outside [1, " + std::to_string(n) + "]"});
      continue;
    }
    const Token& ptok = s.tokens[static_cast<std::size_t>(frame.predicate_index - 1)];
    if (!ptok.fill_pred)
      out.push_back({"frame.predicate_index", ordinal,
                     "token " + std::to_string(frame.predicate_index) + " is not a predicate"});
    else if (ptok.pred_sense && *ptok.pred_sense != frame.sense)
      out.push_back({"frame.sense", ordinal,
                     "frame sense \"" + frame.sense + "\" disagrees with token sense \"" +
                         *ptok.pred_sense + "\""});
    if (!detail::sense_acceptable(frame.sense, ptok.lemma, inv))
      out.push_back({"frame.sense", ordinal, "unknown sense label \"" + frame.sense + "\""});
    for (const auto& [arg, role] : frame.roles) {
      if (arg < 1 || arg > n)
        out.push_back({"frame.roles", ordinal,
                       "argument index " + std::to_string(arg) + " outside [1, " +
                           std::to_string(n) + "]"});
      if (role == kNullRole)
        out.push_back({"frame.roles", ordinal, "reserved null role used as an argument label"});
      else if (inv.role_index(role) < 0)
        out.push_back({"frame.roles", ordinal, "unknown role label \"" + role + "\""});
    }
  }
  return out;
}

/// Derives the language's label inventory: senses and roles in first-seen
/// order over the corpus traversal (sentences, then frames, then arguments
/// by token index), with the reserved null role prepended at index 0.
inline LabelInventory build_inventory(const Corpus& corpus) {
  if (corpus.sentences.empty())
    throw DataError("build_inventory: corpus \"" + corpus.language + "\" is empty");
  LabelInventory inv;
  inv.language = corpus.language;
  inv.roles.push_back(kNullRole);
  auto add = [](std::vector<std::string>& list, const std::string& label) {
    if (std::find(list.begin(), list.end(), label) == list.end()) list.push_back(label);
  };
  for (const Sentence& s : corpus.sentences) {
    for (const PredicateFrame& frame : s.frames) {
      add(inv.senses, frame.sense);
      for (const auto& [arg, role] : frame.roles) {
        (void)arg;
        if (role == kNullRole)
          throw DataError("build_inventory: corpus uses the reserved role label \"" +
                          std::string(kNullRole) + "\"");
        add(inv.roles, role);
      }
    }
  }
  return inv;
}

/// Keeps floor(fraction * |corpus|) sentences, chosen by a seeded uniform
/// shuffle and restored to their original relative order. Deterministic for
/// (corpus, fraction, seed).
inline Corpus sample_fraction(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw DataError("sample_fraction: fraction " + std::to_string(fraction) +
                    " outside [0, 1]");
  const std::size_t n = corpus.sentences.size();
  // nudge before floor so rational fractions like 3/10 survive binary rounding
  const std::size_t keep = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  StableRng rng(seed);
  rng.shuffle(order);
  order.resize(std::min(keep, n));
  std::sort(order.begin(), order.end());
  Corpus out;
  out.language = corpus.language;
  out.sentences.reserve(order.size());
  for (const std::size_t i : order) out.sentences.push_back(corpus.sentences[i]);
  return out;
}

}  // namespace usrl
