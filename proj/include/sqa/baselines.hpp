#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sqa/document.hpp"
#include "sqa/errors.hpp"
#include "sqa/rng.hpp"
#include "sqa/text.hpp"

namespace sqa {

struct SentenceList {
  std::vector<SentenceSpan> sentences;
};

inline SentenceList split_sentences(const std::string& body) {
  return SentenceList{split_sentence_spans(body)};
}

// The sentence closest in TFIDF space to the bag of words of
// question ++ answer. Term frequency is the raw count of lowercased word
// tokens; idf(t) = ln(S / (1 + df(t))) with the document's own sentences as
// the corpus units. Ties go to the earliest sentence.
inline SentenceSpan tfidf_sentence(const Document& doc,
                                   const std::string& question,
                                   const std::string& answer) {
  const auto sentences = split_sentence_spans(doc.body);
  if (sentences.empty()) {
    throw EmptyDocument("tfidf_sentence: document has no sentences");
  }
  const double s = static_cast<double>(sentences.size());
  std::vector<TermCounts> tfs;
  tfs.reserve(sentences.size());
  TermCounts df;
  for (const auto& sent : sentences) {
    tfs.push_back(term_counts(word_tokens(sent.text)));
    for (const auto& [term, n] : tfs.back()) df[term] += 1.0;
  }
  auto weigh = [&](const TermCounts& counts) {
    TermCounts v;
    for (const auto& [term, tf] : counts) {
      const auto it = df.find(term);
      const double d = it == df.end() ? 0.0 : it->second;
      v[term] = tf * std::log(s / (1.0 + d));
    }
    return v;
  };
  const TermCounts query =
      weigh(term_counts(word_tokens(question + " " + answer)));
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const double score = cosine(query, weigh(tfs[i]));
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return sentences[best];
}

// ROUGE-L F1 over word tokens: R = LCS/|ref|, P = LCS/|cand|,
// score = 2RP/(R+P); 0 when either side is empty.
inline double rouge_l(const std::string& candidate,
                      const std::string& reference) {
  const auto cand = word_tokens(candidate);
  const auto ref = word_tokens(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  // LCS length with two rolling rows.
  std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= cand.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      if (cand[i - 1] == ref[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[ref.size()]);
  if (lcs == 0) return 0.0;
  const double r = lcs / static_cast<double>(ref.size());
  const double p = lcs / static_cast<double>(cand.size());
  return 2.0 * r * p / (r + p);
}

struct EvidenceWindow {
  std::size_t doc_index = 0;
  std::size_t first_sentence = 0;
  std::size_t n_sentences = 0;
  std::string text;
  double score = 0.0;
};

namespace detail {

inline std::string join_sentences(std::span<const SentenceSpan> sents,
                                  std::size_t from, std::size_t count) {
  std::string out;
  for (std::size_t i = from; i < from + count; ++i) {
    if (!out.empty()) out += " ";
    out += sents[i].text;
  }
  return out;
}

}  // namespace detail

// Evidence for an answer: within each doc, the best window of exactly n+2
// consecutive sentences (n = sentences in the answer) by ROUGE-L against the
// answer; docs with fewer sentences contribute their whole sentence list.
// Across the per-doc champions, the one with the second-highest score wins
// (the highest when only one doc is given).
inline EvidenceWindow rouge_evidence(const std::string& answer,
                                     std::span<const Document> docs) {
  if (docs.empty()) throw EmptyDocuments("rouge_evidence: no documents");
  if (answer.empty()) throw Error("rouge_evidence: empty answer");
  const std::size_t n = split_sentence_spans(answer).size();
  const std::size_t want = n + 2;
  std::vector<EvidenceWindow> champions;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto sents = split_sentence_spans(docs[d].body);
    if (sents.empty()) continue;
    const std::size_t len = std::min(want, sents.size());
    EvidenceWindow best;
    best.score = -1.0;
    for (std::size_t i = 0; i + len <= sents.size(); ++i) {
      std::string text = detail::join_sentences(sents, i, len);
      const double score = rouge_l(text, answer);
      if (score > best.score) {
        best = EvidenceWindow{d, i, len, std::move(text), score};
      }
    }
    if (best.score >= 0) champions.push_back(std::move(best));
  }
  if (champions.empty()) {
    throw EmptyDocuments("rouge_evidence: documents have no sentences");
  }
  std::stable_sort(champions.begin(), champions.end(),
                   [](const EvidenceWindow& a, const EvidenceWindow& b) {
                     return a.score > b.score;
                   });
  return champions.size() >= 2 ? champions[1] : champions[0];
}

enum class TrivialEvidence { First, Random };

inline SentenceSpan trivial_evidence(const Document& doc, TrivialEvidence kind,
                                     Rng& rng) {
  const auto sents = split_sentence_spans(doc.body);
  if (sents.empty()) {
    throw EmptyDocument("trivial_evidence: document has no sentences");
  }
  if (kind == TrivialEvidence::First) return sents.front();
  return sents[rng.uniform_int(sents.size())];
}

}  // namespace sqa
