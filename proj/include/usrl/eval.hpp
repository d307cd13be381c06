#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "usrl/conll.hpp"
#include "usrl/errors.hpp"

namespace usrl {

/// One scorable labeled dependency: a (predicate, sense) decision or a
/// (predicate, argument, role) decision. Indices are 1-based token indices.
struct ScoredItem {
  enum class Kind { sense, role };
  Kind kind = Kind::sense;
  int predicate = 0;
  int argument = 0;  // 0 for sense items
  std::string label;

  auto operator<=>(const ScoredItem&) const = default;
};

/// One SENSE item per frame plus one ROLE item per (frame, argument) entry.
/// Null roles never appear (frames do not store them).
inline std::set<ScoredItem> extract_items(const Sentence& s) {
  std::set<ScoredItem> items;
  for (const PredicateFrame& frame : s.frames) {
    items.insert({ScoredItem::Kind::sense, frame.predicate_index, 0, frame.sense});
    for (const auto& [arg, role] : frame.roles)
      items.insert({ScoredItem::Kind::role, frame.predicate_index, arg, role});
  }
  return items;
}

/// Harmonic mean of two percentages; 0 when both are 0.
inline double f1_percent(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

struct MetricsReport {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold_items = 0;
  std::size_t predicted_items = 0;
  std::size_t matched_items = 0;

  double predicate_precision = 0.0;
  double predicate_recall = 0.0;
  double predicate_f1 = 0.0;
  double predicate_accuracy = 0.0;  // token-level predicate/non-predicate accuracy
  double sense_accuracy = 0.0;      // at predicates found by both sides
  double role_precision = 0.0;
  double role_recall = 0.0;
  double role_f1 = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

namespace detail {

struct Prf {
  double precision, recall, f1;
};

// Both sides empty counts as perfect agreement; empty predictions against
// non-empty gold score zero.
inline Prf prf(std::size_t gold, std::size_t pred, std::size_t matched) {
  if (gold == 0 && pred == 0) return {100.0, 100.0, 100.0};
  const double p = pred ? 100.0 * static_cast<double>(matched) / static_cast<double>(pred) : 0.0;
  const double r = gold ? 100.0 * static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
  return {p, r, f1_percent(p, r)};
}

}  // namespace detail

/// Micro-averaged labeled semantic scoring over sentence-aligned corpora:
/// precision = |G cap P| / |P| and recall = |G cap P| / |G| over the
/// per-sentence SENSE+ROLE item sets, with per-task breakdowns.
inline MetricsReport score(const Corpus& gold, const Corpus& pred) {
  if (gold.sentences.size() != pred.sentences.size())
    throw DataError("score: gold has " + std::to_string(gold.sentences.size()) +
                    " sentences, predictions have " + std::to_string(pred.sentences.size()));

  std::size_t g_all = 0, p_all = 0, m_all = 0;
  std::size_t g_pred = 0, p_pred = 0, m_pred = 0;
  std::size_t g_role = 0, p_role = 0, m_role = 0;
  std::size_t tokens = 0, tokens_correct = 0;
  std::size_t sense_at_matched = 0, sense_correct = 0;

  for (std::size_t si = 0; si < gold.sentences.size(); ++si) {
    const Sentence& gs = gold.sentences[si];
    const Sentence& ps = pred.sentences[si];
    if (gs.id != ps.id)
      throw DataError("score: sentence " + std::to_string(si + 1) + " id mismatch (\"" +
                      gs.id + "\" vs \"" + ps.id + "\")");
    if (gs.tokens.size() != ps.tokens.size())
      throw DataError("score: sentence id \"" + gs.id + "\" has " +
                      std::to_string(gs.tokens.size()) + " gold tokens but " +
                      std::to_string(ps.tokens.size()) + " predicted tokens");

    const std::set<ScoredItem> g_items = extract_items(gs);
    const std::set<ScoredItem> p_items = extract_items(ps);
    g_all += g_items.size();
    p_all += p_items.size();
    for (const ScoredItem& item : p_items) {
      if (g_items.count(item)) ++m_all;
      if (item.kind == ScoredItem::Kind::role) ++p_role;
      if (item.kind == ScoredItem::Kind::role && g_items.count(item)) ++m_role;
    }
    for (const ScoredItem& item : g_items)
      if (item.kind == ScoredItem::Kind::role) ++g_role;

    std::map<int, std::string> g_senses, p_senses;
    for (const PredicateFrame& f : gs.frames) g_senses.emplace(f.predicate_index, f.sense);
    for (const PredicateFrame& f : ps.frames) p_senses.emplace(f.predicate_index, f.sense);
    g_pred += g_senses.size();
    p_pred += p_senses.size();
    for (const auto& [idx, sense] : p_senses) {
      const auto it = g_senses.find(idx);
      if (it == g_senses.end()) continue;
      ++m_pred;
      ++sense_at_matched;
      if (it->second == sense) ++sense_correct;
    }
    tokens += gs.tokens.size();
    for (std::size_t i = 0; i < gs.tokens.size(); ++i)
      if (gs.tokens[i].fill_pred == ps.tokens[i].fill_pred) ++tokens_correct;
  }

  MetricsReport report;
  report.gold_items = g_all;
  report.predicted_items = p_all;
  report.matched_items = m_all;
  const detail::Prf main = detail::prf(g_all, p_all, m_all);
  report.precision = main.precision;
  report.recall = main.recall;
  report.f1 = main.f1;
  const detail::Prf predicate = detail::prf(g_pred, p_pred, m_pred);
  report.predicate_precision = predicate.precision;
  report.predicate_recall = predicate.recall;
  report.predicate_f1 = predicate.f1;
  report.predicate_accuracy =
      tokens ? 100.0 * static_cast<double>(tokens_correct) / static_cast<double>(tokens) : 100.0;
  report.sense_accuracy =
      sense_at_matched
          ? 100.0 * static_cast<double>(sense_correct) / static_cast<double>(sense_at_matched)
          : 0.0;
  const detail::Prf role = detail::prf(g_role, p_role, m_role);
  report.role_precision = role.precision;
  report.role_recall = role.recall;
  report.role_f1 = role.f1;
  return report;
}

struct SweepRow {
  int english_percentage = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::map<std::string, std::size_t> batch_counts;  // first-epoch batches per language

  bool operator==(const SweepRow&) const = default;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::string source_language;
  std::string target_language;
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string error;

  bool operator==(const SweepTable&) const = default;
};

enum class ReportFormat { tsv, json };

namespace detail {

inline std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1},
                     {"gold_items", r.gold_items},
                     {"predicted_items", r.predicted_items},
                     {"matched_items", r.matched_items},
                     {"predicate_precision", r.predicate_precision},
                     {"predicate_recall", r.predicate_recall},
                     {"predicate_f1", r.predicate_f1},
                     {"predicate_accuracy", r.predicate_accuracy},
                     {"sense_accuracy", r.sense_accuracy},
                     {"role_precision", r.role_precision},
                     {"role_recall", r.role_recall},
                     {"role_f1", r.role_f1}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
  j.at("precision").get_to(r.precision);
  j.at("recall").get_to(r.recall);
  j.at("f1").get_to(r.f1);
  j.at("gold_items").get_to(r.gold_items);
  j.at("predicted_items").get_to(r.predicted_items);
  j.at("matched_items").get_to(r.matched_items);
  j.at("predicate_precision").get_to(r.predicate_precision);
  j.at("predicate_recall").get_to(r.predicate_recall);
  j.at("predicate_f1").get_to(r.predicate_f1);
  j.at("predicate_accuracy").get_to(r.predicate_accuracy);
  j.at("sense_accuracy").get_to(r.sense_accuracy);
  j.at("role_precision").get_to(r.role_precision);
  j.at("role_recall").get_to(r.role_recall);
  j.at("role_f1").get_to(r.role_f1);
}

inline void to_json(nlohmann::json& j, const SweepRow& r) {
  j = nlohmann::json{{"english_percentage", r.english_percentage},
                     {"f1", r.f1},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"batch_counts", r.batch_counts}};
}

inline void from_json(const nlohmann::json& j, SweepRow& r) {
  j.at("english_percentage").get_to(r.english_percentage);
  j.at("f1").get_to(r.f1);
  j.at("precision").get_to(r.precision);
  j.at("recall").get_to(r.recall);
  j.at("batch_counts").get_to(r.batch_counts);
}

inline void to_json(nlohmann::json& j, const SweepTable& t) {
  j = nlohmann::json{{"rows", t.rows},
                     {"source_language", t.source_language},
                     {"target_language", t.target_language},
                     {"seed", t.seed},
                     {"aborted", t.aborted},
                     {"error", t.error}};
}

inline void from_json(const nlohmann::json& j, SweepTable& t) {
  j.at("rows").get_to(t.rows);
  j.at("source_language").get_to(t.source_language);
  j.at("target_language").get_to(t.target_language);
  j.at("seed").get_to(t.seed);
  j.at("aborted").get_to(t.aborted);
  j.at("error").get_to(t.error);
}

/// TSV: metric key-value rows, percentages with exactly two decimals.
/// JSON: lossless (round-trips through from_json).
inline std::string render_report(const MetricsReport& r, ReportFormat format) {
  if (format == ReportFormat::json) return nlohmann::json(r).dump(2) + "\n";
  std::string out;
  const auto row = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += '\t';
    out += value;
    out += '\n';
  };
  row("precision", detail::two_decimals(r.precision));
  row("recall", detail::two_decimals(r.recall));
  row("f1", detail::two_decimals(r.f1));
  row("gold_items", std::to_string(r.gold_items));
  row("predicted_items", std::to_string(r.predicted_items));
  row("matched_items", std::to_string(r.matched_items));
  row("predicate_precision", detail::two_decimals(r.predicate_precision));
  row("predicate_recall", detail::two_decimals(r.predicate_recall));
  row("predicate_f1", detail::two_decimals(r.predicate_f1));
  row("predicate_accuracy", detail::two_decimals(r.predicate_accuracy));
  row("sense_accuracy", detail::two_decimals(r.sense_accuracy));
  row("role_precision", detail::two_decimals(r.role_precision));
  row("role_recall", detail::two_decimals(r.role_recall));
  row("role_f1", detail::two_decimals(r.role_f1));
  return out;
}

inline std::string render_report(const SweepTable& table, ReportFormat format) {
  if (format == ReportFormat::json) return nlohmann::json(table).dump(2) + "\n";
  std::string out = "english_percentage\tF1\tPrecision\tRecall\n";
  for (const SweepRow& row : table.rows) {
    out += std::to_string(row.english_percentage);
    out += '\t';
    out += detail::two_decimals(row.f1);
    out += '\t';
    out += detail::two_decimals(row.precision);
    out += '\t';
    out += detail::two_decimals(row.recall);
    out += '\n';
  }
  return out;
}

inline MetricsReport parse_report_json(const std::string& text) {
  return nlohmann::json::parse(text).get<MetricsReport>();
}

inline SweepTable parse_sweep_json(const std::string& text) {
  return nlohmann::json::parse(text).get<SweepTable>();
}

}  // namespace usrl
