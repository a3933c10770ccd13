#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sqa {

inline bool ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

inline bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

// Word tokens: lowercased maximal alphanumeric runs. Everything else is a
// separator. Used for TFIDF, ROUGE and overlap features.
inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (ascii_alnum(c)) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

using TermCounts = std::unordered_map<std::string, double>;

inline TermCounts term_counts(const std::vector<std::string>& tokens) {
  TermCounts counts;
  for (const auto& t : tokens) counts[t] += 1.0;
  return counts;
}

// Cosine between sparse vectors; 0 when either vector is zero.
inline double cosine(const TermCounts& a, const TermCounts& b) {
  const TermCounts& small = a.size() <= b.size() ? a : b;
  const TermCounts& large = a.size() <= b.size() ? b : a;
  double dot = 0;
  for (const auto& [term, w] : small) {
    auto it = large.find(term);
    if (it != large.end()) dot += w * it->second;
  }
  double na = 0, nb = 0;
  for (const auto& [t, w] : a) na += w * w;
  for (const auto& [t, w] : b) nb += w * w;
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct SentenceSpan {
  std::string text;
  std::size_t begin = 0;  // char offsets into the parent body
  std::size_t end = 0;    // one past the last char
};

// Rule-based sentence segmentation. A sentence ends after a run of
// '.', '!' or '?' followed by whitespace and an uppercase letter, or at a
// blank line (paragraph break). Leading/trailing whitespace is trimmed off
// the spans; inner whitespace is kept.
inline std::vector<SentenceSpan> split_sentence_spans(std::string_view body) {
  std::vector<SentenceSpan> out;
  const std::size_t n = body.size();
  std::size_t i = 0;
  while (i < n && ascii_space(body[i])) ++i;
  std::size_t start = i;
  std::size_t last_nonws = i;
  auto flush = [&](std::size_t end) {
    if (start < n && end > start) {
      out.push_back({std::string(body.substr(start, end - start)), start, end});
    }
  };
  while (i < n) {
    const char c = body[i];
    if (!ascii_space(c)) last_nonws = i;
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i + 1;
      while (j < n && (body[j] == '.' || body[j] == '!' || body[j] == '?')) ++j;
      std::size_t k = j;
      while (k < n && ascii_space(body[k])) ++k;
      const bool boundary = k > j && k < n && body[k] >= 'A' && body[k] <= 'Z';
      if (boundary) {
        flush(j);
        i = k;
        start = k;
        last_nonws = k;
        continue;
      }
      i = j;
      last_nonws = j - 1;
      continue;
    }
    if (c == '\n') {
      std::size_t k = i + 1;
      while (k < n && (body[k] == ' ' || body[k] == '\t' || body[k] == '\r'))
        ++k;
      if (k < n && body[k] == '\n') {  // blank line
        flush(last_nonws + 1);
        while (k < n && ascii_space(body[k])) ++k;
        i = k;
        start = k;
        last_nonws = k;
        continue;
      }
    }
    ++i;
  }
  flush(last_nonws + 1 > n ? n : last_nonws + 1);
  return out;
}

// Levenshtein distance over bytes.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  std::vector<std::size_t> row(a.size() + 1);
  for (std::size_t i = 0; i <= a.size(); ++i) row[i] = i;
  for (std::size_t j = 1; j <= b.size(); ++j) {
    std::size_t prev = row[0];
    row[0] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      const std::size_t tmp = row[i];
      const std::size_t sub = prev + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[i] = std::min(std::min(row[i - 1] + 1, row[i] + 1), sub);
      prev = tmp;
    }
  }
  return row[a.size()];
}

}  // namespace sqa
