#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sqa/document.hpp"
#include "sqa/errors.hpp"
#include "sqa/rng.hpp"
#include "sqa/text.hpp"
#include "sqa/token_model.hpp"
#include "sqa/tokenizer.hpp"

namespace sqa {

// Search snippet located in a document body. The span is present only when
// the best-aligned window clears the match-ratio threshold below.
struct Snippet {
  std::string text;
  std::string doc_id;
  std::optional<std::pair<std::size_t, std::size_t>> span;  // [begin, end)
  double ratio = 0.0;
};

constexpr double kSnippetRatioThreshold = 0.75;

struct PromptSpec {
  std::string question;
  std::vector<Document> docs;         // already truncated
  std::vector<std::size_t> budgets;   // tokens granted per doc
  std::size_t total_budget = kPromptBudget;
};

// ---- corpus ----

class DocStore {
 public:
  DocStore() = default;
  explicit DocStore(std::vector<Document> docs) : docs_(std::move(docs)) {}

  void add(Document d) { docs_.push_back(std::move(d)); }
  const std::vector<Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

  const Document* find_by_id(std::string_view id) const {
    for (const auto& d : docs_) {
      if (d.id == id) return &d;
    }
    return nullptr;
  }

 private:
  std::vector<Document> docs_;
};

// ---- search ----

struct SiteFilter {
  enum class Kind { Restrict, Exclude };
  Kind kind = Kind::Restrict;
  std::string domain;
};

// Outgoing query-string augmentation used by external providers.
inline std::string augment_query(const std::string& query,
                                 const std::optional<SiteFilter>& filter) {
  if (!filter) return query;
  if (filter->kind == SiteFilter::Kind::Restrict) {
    return query + " site:" + filter->domain;
  }
  return query + " -site:" + filter->domain;
}

inline std::string url_host(std::string_view url) {
  const auto scheme = url.find("://");
  std::string_view rest = scheme == std::string_view::npos
                              ? url
                              : url.substr(scheme + 3);
  const auto slash = rest.find('/');
  if (slash != std::string_view::npos) rest = rest.substr(0, slash);
  return std::string(rest);
}

inline bool host_matches(std::string_view host, std::string_view domain) {
  if (host == domain) return true;
  return host.size() > domain.size() &&
         host.substr(host.size() - domain.size()) == domain &&
         host[host.size() - domain.size() - 1] == '.';
}

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::vector<Document> search(
      const std::string& query, int k,
      const std::optional<SiteFilter>& filter = std::nullopt) = 0;
};

// Reference provider over an ingested corpus: ranks by TFIDF cosine between
// the query and document bodies. idf(t) = ln(N / (1 + df(t))) over the
// corpus documents; ties keep ingestion order.
class LocalTfidfProvider : public SearchProvider {
 public:
  explicit LocalTfidfProvider(const DocStore& store) : store_(store) {
    const auto& docs = store.docs();
    doc_counts_.reserve(docs.size());
    for (const auto& d : docs) {
      doc_counts_.push_back(term_counts(word_tokens(d.body)));
      for (const auto& [term, n] : doc_counts_.back()) df_[term] += 1.0;
    }
  }

  std::vector<Document> search(
      const std::string& query, int k,
      const std::optional<SiteFilter>& filter = std::nullopt) override {
    if (k < 1) throw Error("search: k must be >= 1");
    if (store_.empty()) throw EmptyCorpus("search: corpus is empty");
    const double n_docs = static_cast<double>(store_.size());
    auto weigh = [&](const TermCounts& counts) {
      TermCounts v;
      for (const auto& [term, tf] : counts) {
        const auto it = df_.find(term);
        const double df = it == df_.end() ? 0.0 : it->second;
        v[term] = tf * std::log(n_docs / (1.0 + df));
      }
      return v;
    };
    const TermCounts qv = weigh(term_counts(word_tokens(query)));
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < store_.size(); ++i) {
      const Document& d = store_.docs()[i];
      if (filter) {
        const bool match = host_matches(url_host(d.url), filter->domain);
        if (filter->kind == SiteFilter::Kind::Restrict && !match) continue;
        if (filter->kind == SiteFilter::Kind::Exclude && match) continue;
      }
      scored.emplace_back(cosine(qv, weigh(doc_counts_[i])), i);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) {
                       return a.first > b.first;
                     });
    std::vector<Document> out;
    for (std::size_t i = 0; i < scored.size() && i < static_cast<std::size_t>(k);
         ++i) {
      out.push_back(store_.docs()[scored[i].second]);
    }
    return out;
  }

 private:
  const DocStore& store_;
  std::vector<TermCounts> doc_counts_;
  TermCounts df_;
};

inline std::vector<Document> search(SearchProvider& provider,
                                    const std::string& query, int k,
                                    const std::optional<SiteFilter>& filter =
                                        std::nullopt) {
  return provider.search(query, k, filter);
}

// ---- snippet fuzzy matching ----

// Best-aligned window by normalized edit distance:
//   ratio(s, w) = 1 - dist(s, w) / max(|s|, |w|),
// maximized over every contiguous window w of the body. The window scan
// prunes lengths that provably cannot beat the current best (for |w| > |s|,
// ratio <= |s|/|w|; for |w| < |s|, ratio <= |w|/|s|), which keeps the scan
// exact. Quadratic in the body length; fine at the scale this runs at.
inline Snippet fuzzy_match_snippet(const Document& doc,
                                   const std::string& snippet_text) {
  if (snippet_text.empty()) throw Error("fuzzy_match_snippet: empty snippet");
  const std::string& body = doc.body;
  const std::size_t sn = snippet_text.size();
  Snippet out;
  out.text = snippet_text;
  out.doc_id = doc.id;
  double best = -1.0;
  std::size_t best_begin = 0, best_end = 0;
  std::vector<std::size_t> cur(sn + 1), nxt(sn + 1);
  for (std::size_t start = 0; start < body.size(); ++start) {
    for (std::size_t i = 0; i <= sn; ++i) cur[i] = i;
    const std::size_t max_len = body.size() - start;
    for (std::size_t len = 1; len <= max_len; ++len) {
      if (best > 0 && len > sn &&
          static_cast<double>(sn) / static_cast<double>(len) <= best) {
        break;  // longer windows at this start cannot win
      }
      const char b = body[start + len - 1];
      nxt[0] = len;
      for (std::size_t i = 1; i <= sn; ++i) {
        const std::size_t sub = cur[i - 1] + (snippet_text[i - 1] == b ? 0 : 1);
        nxt[i] = std::min(std::min(nxt[i - 1] + 1, cur[i] + 1), sub);
      }
      std::swap(cur, nxt);
      const double denom = static_cast<double>(std::max(sn, len));
      const double ratio = 1.0 - static_cast<double>(cur[sn]) / denom;
      if (ratio > best) {
        best = ratio;
        best_begin = start;
        best_end = start + len;
      }
    }
  }
  out.ratio = best < 0 ? 0.0 : best;
  if (out.ratio >= kSnippetRatioThreshold && best_end > best_begin) {
    out.span = {best_begin, best_end};
  }
  return out;
}

// ---- budget allocation ----

// Splits `total` tokens across docs proportionally to the given factors.
// Rounding remainder goes to the last doc, so the outputs always sum to
// exactly `total`.
inline std::vector<std::size_t> allocate_budgets_from_factors(
    const std::vector<double>& factors, std::size_t total) {
  if (factors.empty()) throw Error("allocate_budgets: no factors");
  double sum = 0;
  for (const double f : factors) sum += f;
  std::vector<std::size_t> out(factors.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < factors.size(); ++i) {
    out[i] = static_cast<std::size_t>(
        std::floor(factors[i] / sum * static_cast<double>(total)));
    used += out[i];
  }
  out.back() = total - used;
  return out;
}

// Random split with factor_i ~ uniform(0.5, 1.5) and
// budget_i = factor_i / sum(factors) * total.
inline std::vector<std::size_t> allocate_budgets(std::size_t n_docs,
                                                 std::size_t total, Rng& rng) {
  if (n_docs < 1 || n_docs > 5) {
    throw Error("allocate_budgets: n_docs must be in [1, 5]");
  }
  if (total > kPromptBudget) {
    throw Error("allocate_budgets: total exceeds the prompt budget");
  }
  std::vector<double> factors(n_docs);
  for (auto& f : factors) f = rng.uniform(0.5, 1.5);
  return allocate_budgets_from_factors(factors, total);
}

// ---- truncation ----

enum class TruncateMode { Train, Infer };

constexpr std::size_t kInferLookBehindChars = 500;

namespace detail {

// Greedy token count of body[from, to).
inline std::size_t tokens_between(std::string_view body, std::size_t from,
                                  std::size_t to) {
  return Tokenizer::encode(body.substr(from, to - from)).size();
}

// Char offset after taking at most `budget` tokens from `from`.
inline std::size_t advance_tokens(std::string_view body, std::size_t from,
                                  std::size_t budget) {
  std::size_t i = from;
  std::size_t taken = 0;
  while (i < body.size() && taken < budget) {
    if (i + 1 < body.size() &&
        Tokenizer::delimiter_id(body[i], body[i + 1]) != Tokenizer::kVocabSize) {
      i += 2;
    } else {
      i += 1;
    }
    ++taken;
  }
  return i;
}

}  // namespace detail

// Cuts the document down to at most `budget` tokens around required_span
// (char range in body). The cut begins at a sentence or paragraph start. In
// Train mode the start is drawn uniformly from the starts that still fit the
// span; in Infer mode it is the first sentence start within 500 chars before
// the span (falling back to the closest fitting start when none qualifies).
inline Document truncate_around(const Document& doc,
                                std::pair<std::size_t, std::size_t>
                                    required_span,
                                std::size_t budget, TruncateMode mode,
                                Rng& rng) {
  const auto [span_begin, span_end] = required_span;
  if (span_begin >= span_end || span_end > doc.body.size()) {
    throw Error("truncate_around: span out of range");
  }
  if (detail::tokens_between(doc.body, span_begin, span_end) > budget) {
    throw SpanTooLarge("truncate_around: span alone exceeds the budget");
  }
  std::vector<std::size_t> starts;
  for (const auto& s : split_sentence_spans(doc.body)) {
    if (s.begin <= span_begin) starts.push_back(s.begin);
  }
  if (starts.empty()) starts.push_back(0);
  std::vector<std::size_t> valid;
  for (const std::size_t s : starts) {
    if (detail::tokens_between(doc.body, s, span_end) <= budget) {
      valid.push_back(s);
    }
  }
  if (valid.empty()) {
    throw SpanTooLarge(
        "truncate_around: no sentence-aligned start fits the budget");
  }
  std::size_t chosen;
  if (mode == TruncateMode::Train) {
    chosen = valid[rng.uniform_int(valid.size())];
  } else {
    const std::size_t window_lo =
        span_begin > kInferLookBehindChars ? span_begin - kInferLookBehindChars
                                           : 0;
    chosen = valid.back();  // closest fitting start, as fallback
    for (const std::size_t s : valid) {
      if (s >= window_lo) {
        chosen = s;
        break;
      }
    }
  }
  const std::size_t end = detail::advance_tokens(doc.body, chosen, budget);
  Document out = doc;
  out.body = doc.body.substr(chosen, std::max(end, span_end) - chosen);
  out.refresh_tokens();
  return out;
}

// ---- prompt assembly ----

// One "Page:" block per document, then the question and the answer cue.
inline std::string build_prompt(const std::string& question,
                                std::span<const Document> docs) {
  std::string out;
  for (const auto& d : docs) {
    out += "Page: ";
    out += d.title;
    out += "\n\n";
    out += d.body;
    out += "\n\n";
  }
  out += "Question: ";
  out += question;
  out += "\nAnswer:";
  if (Tokenizer::token_count(out) > kPromptBudget) {
    throw ContextOverflow("build_prompt: prompt exceeds " +
                          std::to_string(kPromptBudget) + " tokens");
  }
  return out;
}

inline std::string build_prompt(const PromptSpec& spec) {
  return build_prompt(spec.question, spec.docs);
}

// Training-style prompt assembly: picks how many documents to show, splits
// the token allowance at random, truncates every doc around its required
// span, and shuffles the order. The target doc (and its quote span) is
// always included intact.
inline PromptSpec assemble_prompt_spec(
    const std::string& question, const Document& target_doc,
    std::pair<std::size_t, std::size_t> quote_span,
    std::span<const Document> other_docs, Rng& rng,
    std::size_t total_budget = kPromptBudget) {
  std::size_t n_docs = 1;
  if (rng.uniform01() >= 1.0 / 3.0) {
    n_docs = 1 + rng.uniform_int(5);
  }
  n_docs = std::min(n_docs, 1 + other_docs.size());

  // Reserve room for the page headers and the question line.
  std::size_t overhead =
      Tokenizer::token_count("Question: " + question + "\nAnswer:");
  overhead += 10 + Tokenizer::token_count(target_doc.title);
  for (std::size_t i = 0; i + 1 < n_docs && i < other_docs.size(); ++i) {
    overhead += 10 + Tokenizer::token_count(other_docs[i].title);
  }
  const std::size_t doc_budget =
      total_budget > overhead ? total_budget - overhead : 0;

  std::vector<std::size_t> budgets;
  for (int attempt = 0; attempt < 32; ++attempt) {
    budgets = allocate_budgets(n_docs, doc_budget, rng);
    if (detail::tokens_between(target_doc.body, quote_span.first,
                               quote_span.second) <= budgets[0]) {
      break;
    }
    budgets.clear();
    if (n_docs > 1) --n_docs;  // grant the target more room and retry
  }
  if (budgets.empty()) {
    throw SpanTooLarge("assemble_prompt_spec: quote does not fit the prompt");
  }

  PromptSpec spec;
  spec.question = question;
  spec.total_budget = total_budget;
  spec.docs.push_back(truncate_around(target_doc, quote_span, budgets[0],
                                      TruncateMode::Train, rng));
  spec.budgets.push_back(budgets[0]);
  for (std::size_t i = 1; i < n_docs; ++i) {
    const Document& d = other_docs[i - 1];
    if (d.body.empty() || budgets[i] == 0) continue;
    Document t =
        truncate_around(d, {0, 1}, budgets[i], TruncateMode::Train, rng);
    spec.docs.push_back(std::move(t));
    spec.budgets.push_back(budgets[i]);
  }
  // Shuffle presentation order.
  for (std::size_t i = spec.docs.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(spec.docs[i - 1], spec.docs[j]);
    std::swap(spec.budgets[i - 1], spec.budgets[j]);
  }
  return spec;
}

}  // namespace sqa
