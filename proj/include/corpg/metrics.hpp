// SPDX-License-Identifier: Apache-2.0
//
// Document diversity metrics between an original text and its paraphrase:
// BLEU, word error rate and translation edit rate, plus the corpus report
// that adds coherence scores.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "corpg/coherence.hpp"
#include "corpg/error.hpp"
#include "corpg/parallel.hpp"
#include "corpg/text.hpp"

namespace corpg {

/// Word-level edit distance with unit substitution, insertion and deletion.
template <class T>
std::size_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <class T>
double wer(const std::vector<T>& hypothesis, const std::vector<T>& reference) {
  if (reference.empty()) throw UndefinedMetricError("wer: empty reference");
  return static_cast<double>(levenshtein(hypothesis, reference)) / static_cast<double>(reference.size());
}

struct TerConfig {
  std::size_t max_block = 10;     // longest block a shift may move
  std::size_t max_distance = 50;  // furthest a block may travel
};

struct TerResult {
  std::size_t shifts = 0;
  std::size_t edits = 0;  // residual edit distance after the shifts
  double score = 0.0;     // (shifts + edits) / |reference|
};

/// Moves hyp[begin, begin + len) so that it starts at `dest` in the result.
template <class T>
std::vector<T> apply_shift(const std::vector<T>& hyp, std::size_t begin, std::size_t len, std::size_t dest) {
  std::vector<T> rest;
  rest.reserve(hyp.size());
  rest.insert(rest.end(), hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(begin));
  rest.insert(rest.end(), hyp.begin() + static_cast<std::ptrdiff_t>(begin + len), hyp.end());
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(dest), hyp.begin() + static_cast<std::ptrdiff_t>(begin),
              hyp.begin() + static_cast<std::ptrdiff_t>(begin + len));
  return rest;
}

/// Greedy shift search: repeatedly applies the single block shift that lowers
/// the edit distance the most (ties: leftmost block, then shortest, then
/// smallest destination index), stopping when no shift lowers it.
template <class T>
TerResult ter_detail(const std::vector<T>& hypothesis, const std::vector<T>& reference, const TerConfig& cfg = {}) {
  if (reference.empty()) throw UndefinedMetricError("ter: empty reference");
  std::vector<T> hyp = hypothesis;
  std::size_t dist = levenshtein(hyp, reference);
  TerResult r;
  while (dist > 0) {
    std::size_t best_dist = dist;
    std::vector<T> best;
    const std::size_t n = hyp.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t len = 1; len <= cfg.max_block && i + len <= n; ++len) {
        const std::size_t lo = i > cfg.max_distance ? i - cfg.max_distance : 0;
        const std::size_t hi = std::min(n - len, i + cfg.max_distance);
        for (std::size_t dest = lo; dest <= hi; ++dest) {
          if (dest == i) continue;
          std::vector<T> cand = apply_shift(hyp, i, len, dest);
          const std::size_t d = levenshtein(cand, reference);
          if (d < best_dist) {
            best_dist = d;
            best = std::move(cand);
          }
        }
      }
    }
    if (best_dist == dist) break;
    hyp = std::move(best);
    dist = best_dist;
    ++r.shifts;
  }
  r.edits = dist;
  r.score = static_cast<double>(r.shifts + r.edits) / static_cast<double>(reference.size());
  return r;
}

template <class T>
double ter(const std::vector<T>& hypothesis, const std::vector<T>& reference, const TerConfig& cfg = {}) {
  return ter_detail(hypothesis, reference, cfg).score;
}

/// Clipped n-gram matches and candidate n-gram totals per order.
struct BleuStats {
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  explicit BleuStats(std::size_t max_n = 4) : matches(max_n, 0), totals(max_n, 0) {}

  BleuStats& operator+=(const BleuStats& o) {
    for (std::size_t n = 0; n < matches.size(); ++n) {
      matches[n] += o.matches[n];
      totals[n] += o.totals[n];
    }
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    return *this;
  }

  /// Geometric mean of precisions over the orders the candidate can fill,
  /// times the brevity penalty, on a 0..100 scale. No smoothing.
  double score() const {
    if (candidate_length == 0) return 0.0;
    double log_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 0; n < matches.size(); ++n) {
      if (totals[n] == 0) break;
      if (matches[n] == 0) return 0.0;
      log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
      ++orders;
    }
    const double c = static_cast<double>(candidate_length), r = static_cast<double>(reference_length);
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(log_sum / static_cast<double>(orders));
  }
};

template <class T>
BleuStats bleu_stats(const std::vector<T>& candidate, const std::vector<T>& reference, std::size_t max_n = 4) {
  BleuStats s(max_n);
  s.candidate_length = candidate.size();
  s.reference_length = reference.size();
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::map<std::vector<T>, std::size_t> ref_counts, cand_counts;
    for (std::size_t i = 0; i + n <= reference.size(); ++i) ++ref_counts[{reference.begin() + i, reference.begin() + i + n}];
    for (std::size_t i = 0; i + n <= candidate.size(); ++i) ++cand_counts[{candidate.begin() + i, candidate.begin() + i + n}];
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      s.matches[n - 1] += std::min(count, it == ref_counts.end() ? std::size_t{0} : it->second);
      s.totals[n - 1] += count;
    }
  }
  return s;
}

template <class T>
double bleu(const std::vector<T>& candidate, const std::vector<T>& reference, std::size_t max_n = 4) {
  if (reference.empty()) throw UndefinedMetricError("bleu: empty reference");
  return bleu_stats(candidate, reference, max_n).score();
}

/// Sentences joined into one token stream.
inline Tokens flatten(const TextDocument& doc) {
  Tokens out;
  for (const auto& s : doc.sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

struct DocumentScores {
  std::string id;
  double self_bleu = 0.0;
  double self_ter = 0.0;  // x100
  double self_wer = 0.0;  // x100
  bool has_coh = false;
  double coh = 0.0;    // x100
  double coh_p = 0.0;  // x100
};

struct EvalReport {
  std::vector<DocumentScores> documents;
  DocumentScores aggregate;  // id "AGGREGATE"
  std::size_t coh_skipped = 0;
};

struct ReportOptions {
  bool micro_bleu = false;  // pool n-gram counts over the corpus instead of averaging
  TerConfig ter{};
  int jobs = 1;
};

/// Per-document scores of `generated` against `original` (matched by
/// position) and their macro averages. COH is read from the generated text.
inline EvalReport corpus_report(const std::vector<TextDocument>& original, const std::vector<TextDocument>& generated,
                                const CoherenceOracle* oracle, const ReportOptions& opt = {}) {
  if (original.empty()) throw DataError("corpus_report: empty corpus");
  if (original.size() != generated.size()) {
    throw DataError("corpus_report: " + std::to_string(original.size()) + " originals but " +
                    std::to_string(generated.size()) + " outputs");
  }
  const std::size_t n = original.size();
  EvalReport rep;
  rep.documents.resize(n);
  std::vector<BleuStats> stats(n);
  parallel_for(n, opt.jobs, [&](std::size_t i) {
    const Tokens ref = flatten(original[i]);
    const Tokens hyp = flatten(generated[i]);
    if (ref.empty()) throw DataError("corpus_report: document '" + original[i].id + "' is empty");
    DocumentScores& d = rep.documents[i];
    d.id = original[i].id;
    stats[i] = bleu_stats(hyp, ref);
    d.self_bleu = stats[i].score();
    d.self_ter = 100.0 * ter(hyp, ref, opt.ter);
    d.self_wer = 100.0 * wer(hyp, ref);
    if (oracle && generated[i].sentences.size() >= 2) {
      const CohScores c = coh_metrics(generated[i], *oracle);
      d.has_coh = true;
      d.coh = 100.0 * c.coh;
      d.coh_p = 100.0 * c.coh_p;
    }
  });

  DocumentScores& a = rep.aggregate;
  a.id = "AGGREGATE";
  std::size_t with_coh = 0;
  BleuStats pooled;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = rep.documents[i];
    a.self_bleu += d.self_bleu;
    a.self_ter += d.self_ter;
    a.self_wer += d.self_wer;
    pooled += stats[i];
    if (d.has_coh) {
      a.coh += d.coh;
      a.coh_p += d.coh_p;
      ++with_coh;
    }
  }
  const double count = static_cast<double>(n);
  a.self_bleu = opt.micro_bleu ? pooled.score() : a.self_bleu / count;
  a.self_ter /= count;
  a.self_wer /= count;
  rep.coh_skipped = n - with_coh;
  if (with_coh > 0) {
    a.has_coh = true;
    a.coh /= static_cast<double>(with_coh);
    a.coh_p /= static_cast<double>(with_coh);
  }
  return rep;
}

namespace detail {
inline std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string csv_row(const DocumentScores& d) {
  std::string id = d.id;
  if (id.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : id) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    id = q + "\"";
  }
  return id + "," + csv_number(d.self_bleu) + "," + csv_number(d.self_ter) + "," + csv_number(d.self_wer) + "," +
         (d.has_coh ? csv_number(d.coh) : "") + "," + (d.has_coh ? csv_number(d.coh_p) : "") + "\n";
}
}  // namespace detail

/// Documents without COH (fewer than two sentences, or no oracle) leave the
/// coh columns empty.
inline std::string report_csv(const EvalReport& r) {
  std::string out = "id,self_bleu,self_ter,self_wer,coh,coh_p\n";
  for (const auto& d : r.documents) out += detail::csv_row(d);
  out += detail::csv_row(r.aggregate);
  return out;
}

}  // namespace corpg
