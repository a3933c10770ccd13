#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sqa/document.hpp"
#include "sqa/errors.hpp"
#include "sqa/token_model.hpp"

namespace sqa {

// Token-level suffix automaton over one document. Walking transitions from
// the root spells exactly the contiguous token subsequences of the document,
// so the transitions available at the current state answer "which tokens can
// extend the verbatim match".
class SuffixAutomaton {
 public:
  explicit SuffixAutomaton(std::span<const TokenId> tokens)
      : n_tokens_(tokens.size()) {
    // clean_run[p]: consecutive non-reserved tokens starting at p. Reserved
    // delimiter tokens can never appear inside a quote, so extension
    // feasibility is measured in clean runs.
    std::vector<std::size_t> clean_run(tokens.size() + 1, 0);
    for (std::size_t p = tokens.size(); p-- > 0;) {
      clean_run[p] =
          Tokenizer::is_reserved(tokens[p]) ? 0 : clean_run[p + 1] + 1;
    }
    max_clean_run_ = 0;
    for (const std::size_t r : clean_run) {
      max_clean_run_ = std::max(max_clean_run_, r);
    }

    states_.push_back(State{});  // root
    int last = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      last = extend(last, tokens[i], static_cast<long long>(i),
                    clean_run[i + 1]);
    }
    propagate();
  }

  std::size_t token_count() const { return n_tokens_; }
  std::size_t max_clean_run() const { return max_clean_run_; }

  int root() const { return 0; }

  std::optional<int> step(int state, TokenId token) const {
    const auto& next = states_[state].next;
    const auto it = next.find(token);
    if (it == next.end()) return std::nullopt;
    return it->second;
  }

  std::vector<TokenId> transitions(int state) const {
    std::vector<TokenId> out;
    out.reserve(states_[state].next.size());
    for (const auto& [t, s] : states_[state].next) out.push_back(t);
    return out;
  }

  // Smallest 0-based position at which an occurrence of the matched string
  // ends. Valid for every string of the state (they share end positions).
  long long min_end(int state) const { return states_[state].min_end; }

  // Tokens remaining after the earliest occurrence end: an upper bound on
  // how far the match can still grow.
  std::size_t max_extension(int state) const {
    if (state == 0) return n_tokens_;
    return n_tokens_ - 1 - static_cast<std::size_t>(states_[state].min_end);
  }

  // Longest run of non-reserved tokens that can follow the match at some
  // occurrence. Bounds how many quote tokens can still be emitted.
  std::size_t max_clean_extension(int state) const {
    if (state == 0) return max_clean_run_;
    return states_[state].max_clean_ext;
  }

 private:
  struct State {
    int len = 0;
    int link = -1;
    long long min_end = -1;          // -1 until propagated
    long long max_clean_ext = -1;    // -1 until propagated
    std::map<TokenId, int> next;
  };

  int extend(int last, TokenId c, long long pos, std::size_t clean_after) {
    const int cur = static_cast<int>(states_.size());
    states_.push_back(State{});
    states_[cur].len = states_[last].len + 1;
    states_[cur].min_end = pos;
    states_[cur].max_clean_ext = static_cast<long long>(clean_after);
    int p = last;
    while (p != -1 && !states_[p].next.count(c)) {
      states_[p].next[c] = cur;
      p = states_[p].link;
    }
    if (p == -1) {
      states_[cur].link = 0;
      return cur;
    }
    const int q = states_[p].next[c];
    if (states_[p].len + 1 == states_[q].len) {
      states_[cur].link = q;
      return cur;
    }
    const int clone = static_cast<int>(states_.size());
    states_.push_back(states_[q]);
    states_[clone].len = states_[p].len + 1;
    states_[clone].min_end = -1;  // resolved in propagate()
    states_[clone].max_clean_ext = -1;
    while (p != -1 && states_[p].next[c] == q) {
      states_[p].next[c] = clone;
      p = states_[p].link;
    }
    states_[q].link = clone;
    states_[cur].link = clone;
    return cur;
  }

  void propagate() {
    // All strings of a state share one set of occurrence ends, so both the
    // earliest end and the best clean continuation aggregate over the
    // suffix-link subtree.
    std::vector<int> order(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
      order[i] = static_cast<int>(i);
    }
    std::sort(order.begin(), order.end(), [this](int a, int b) {
      return states_[a].len > states_[b].len;
    });
    for (const int v : order) {
      if (v == 0) continue;
      const int p = states_[v].link;
      if (states_[v].min_end >= 0) {
        if (states_[p].min_end < 0 ||
            states_[v].min_end < states_[p].min_end) {
          states_[p].min_end = states_[v].min_end;
        }
      }
      states_[p].max_clean_ext =
          std::max(states_[p].max_clean_ext, states_[v].max_clean_ext);
    }
  }

  std::size_t n_tokens_;
  std::size_t max_clean_run_ = 0;
  std::vector<State> states_;
};

// Per-document substring index over the token caches of a context set.
class SubstringIndex {
 public:
  struct Cursor {
    int doc = -1;
    int state = 0;
    std::size_t length = 0;  // matched tokens so far
  };

  explicit SubstringIndex(std::span<const Document> docs) {
    std::size_t total = 0;
    for (const auto& d : docs) total += d.token_cache.size();
    if (total > kContextWindow) {
      throw ContextOverflow("build_index: " + std::to_string(total) +
                            " tokens exceed the context window of " +
                            std::to_string(kContextWindow));
    }
    total_tokens_ = total;
    automata_.reserve(docs.size());
    for (const auto& d : docs) {
      automata_.emplace_back(std::span<const TokenId>(d.token_cache));
    }
  }

  std::size_t doc_count() const { return automata_.size(); }
  std::size_t total_tokens() const { return total_tokens_; }
  std::size_t doc_tokens(int doc) const { return automata_[doc].token_count(); }
  std::size_t max_clean_run(int doc) const {
    return automata_[doc].max_clean_run();
  }

  Cursor start(int doc) const { return Cursor{doc, automata_[doc].root(), 0}; }

  std::optional<Cursor> advance(const Cursor& c, TokenId token) const {
    const auto next = automata_[c.doc].step(c.state, token);
    if (!next) return std::nullopt;
    return Cursor{c.doc, *next, c.length + 1};
  }

  std::vector<TokenId> allowed_next(const Cursor& c) const {
    return automata_[c.doc].transitions(c.state);
  }

  // Walks the match from scratch; nullopt when it does not occur.
  std::optional<Cursor> walk(int doc, std::span<const TokenId> match) const {
    Cursor c = start(doc);
    for (const TokenId t : match) {
      const auto next = advance(c, t);
      if (!next) return std::nullopt;
      c = *next;
    }
    return c;
  }

  // Tokens t such that match ++ t occurs contiguously in the document.
  // Empty when the match itself does not occur.
  std::vector<TokenId> allowed_next(int doc,
                                    std::span<const TokenId> match) const {
    const auto c = walk(doc, match);
    if (!c) return {};
    return allowed_next(*c);
  }

  std::size_t max_extension(const Cursor& c) const {
    if (c.length == 0) return automata_[c.doc].token_count();
    return automata_[c.doc].max_extension(c.state);
  }

  std::size_t max_clean_extension(const Cursor& c) const {
    if (c.length == 0) return automata_[c.doc].max_clean_run();
    return automata_[c.doc].max_clean_extension(c.state);
  }

 private:
  std::vector<SuffixAutomaton> automata_;
  std::size_t total_tokens_ = 0;
};

inline SubstringIndex build_index(std::span<const Document> docs) {
  return SubstringIndex(docs);
}

}  // namespace sqa
