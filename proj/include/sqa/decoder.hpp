#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqa/docstore.hpp"
#include "sqa/document.hpp"
#include "sqa/errors.hpp"
#include "sqa/rng.hpp"
#include "sqa/substring_index.hpp"
#include "sqa/syntax.hpp"
#include "sqa/token_model.hpp"
#include "sqa/tokenizer.hpp"

namespace sqa {

// Sampler states. The canonical surface shares '%' between sections, so at
// the token level the structural markers are: %< (enter claim), >% (end
// claim), byte '(' (the "%(" of the surface, its '%' carried by the >%),
// )% (end title), byte '[' (likewise), ]% (end quote).
enum class FsmState {
  Start,
  WithinClaim,
  EndedClaim,
  WithinTitle,
  EndedTitle,
  WithinQuote,
  EndedQuote,
};

inline const char* fsm_state_name(FsmState s) {
  switch (s) {
    case FsmState::Start: return "Start";
    case FsmState::WithinClaim: return "WithinClaim";
    case FsmState::EndedClaim: return "EndedClaim";
    case FsmState::WithinTitle: return "WithinTitle";
    case FsmState::EndedTitle: return "EndedTitle";
    case FsmState::WithinQuote: return "WithinQuote";
    case FsmState::EndedQuote: return "EndedQuote";
  }
  return "?";
}

struct SamplerState {
  FsmState fsm = FsmState::Start;
  std::size_t claim_tokens = 0;
  int last_claim_byte = -1;          // guards against spelling a delimiter
  std::vector<int> title_candidates;  // docs whose title matches the prefix
  std::size_t title_matched = 0;
  int bound_doc = -1;                 // fixed once the title closes
  SubstringIndex::Cursor quote_cursor;
  std::size_t quote_tokens = 0;
};

struct SampleConfig {
  double temperature = 1.0;
  std::size_t max_tokens = kSampleBudget;
  int max_retries = 16;
};

struct StepTrace {
  std::size_t step = 0;
  FsmState state = FsmState::Start;
  TokenId token = 0;
  std::size_t mask_size = 0;
};

using TraceSink = std::function<void(const StepTrace&)>;

// FSM + substring index that force sampled titles to equal a context
// document title and sampled quotes to be verbatim spans of the document the
// title names.
class ConstrainedDecoder {
 public:
  explicit ConstrainedDecoder(std::span<const Document> docs)
      : docs_(docs.begin(), docs.end()), index_(docs) {
    title_tokens_.reserve(docs_.size());
    for (std::size_t d = 0; d < docs_.size(); ++d) {
      TokenSeq tt = Tokenizer::encode(docs_[d].title);
      bool clean = !tt.empty();
      for (const TokenId t : tt) {
        if (Tokenizer::is_reserved(t)) clean = false;
      }
      title_tokens_.push_back(std::move(tt));
      title_clean_.push_back(clean);
      quotable_.push_back(index_.max_clean_run(static_cast<int>(d)) >=
                          kMinQuoteTokens);
    }
    min_usable_title_ = kNoPath;
    for (std::size_t d = 0; d < docs_.size(); ++d) {
      if (title_clean_[d] && quotable_[d]) {
        min_usable_title_ =
            std::min(min_usable_title_, title_tokens_[d].size());
      }
    }
  }

  const SubstringIndex& index() const { return index_; }
  std::span<const Document> docs() const { return docs_; }

  SamplerState initial_state() const { return SamplerState{}; }

  // The grammar mask, with nothing withheld for budget reasons. An empty
  // mask is a legal result and signals a dead end.
  TokenMask allowed_mask(const SamplerState& s) const {
    TokenMask mask(Tokenizer::kVocabSize, false);
    switch (s.fsm) {
      case FsmState::Start:
      case FsmState::EndedQuote:
        for (TokenId t = 0; t < Tokenizer::kByteTokens; ++t) mask[t] = true;
        mask[Tokenizer::kClaimOpen] = true;
        break;
      case FsmState::WithinClaim:
        for (TokenId t = 0; t < Tokenizer::kByteTokens; ++t) {
          if (claim_byte_ok(s, t)) mask[t] = true;
        }
        if (s.claim_tokens >= 1) mask[Tokenizer::kClaimClose] = true;
        break;
      case FsmState::EndedClaim:
        mask[static_cast<TokenId>('(')] = true;
        break;
      case FsmState::WithinTitle:
        for (const int d : s.title_candidates) {
          const auto& tt = title_tokens_[d];
          if (tt.size() > s.title_matched) mask[tt[s.title_matched]] = true;
          if (tt.size() == s.title_matched) {
            mask[Tokenizer::kTitleClose] = true;
          }
        }
        break;
      case FsmState::EndedTitle:
        mask[static_cast<TokenId>('[')] = true;
        break;
      case FsmState::WithinQuote: {
        const auto cursor = s.quote_tokens == 0 ? index_.start(s.bound_doc)
                                                : s.quote_cursor;
        for (const TokenId t : index_.allowed_next(cursor)) {
          if (!Tokenizer::is_reserved(t)) mask[t] = true;
        }
        if (s.quote_tokens >= kMinQuoteTokens) {
          mask[Tokenizer::kQuoteClose] = true;
        }
        break;
      }
    }
    return mask;
  }

  // Deterministic transition; throws IllegalTransition when the token is
  // not allowed in the current state.
  SamplerState step_fsm(const SamplerState& s, TokenId token) const {
    SamplerState n = s;
    switch (s.fsm) {
      case FsmState::Start:
      case FsmState::EndedQuote:
        if (token == Tokenizer::kClaimOpen) {
          n.fsm = FsmState::WithinClaim;
          n.claim_tokens = 0;
          n.last_claim_byte = -1;
          return n;
        }
        if (token < Tokenizer::kByteTokens) return n;  // free text
        throw IllegalTransition(illegal(s, token));
      case FsmState::WithinClaim:
        if (token == Tokenizer::kClaimClose && s.claim_tokens >= 1) {
          n.fsm = FsmState::EndedClaim;
          return n;
        }
        if (token < Tokenizer::kByteTokens && claim_byte_ok(s, token)) {
          n.claim_tokens += 1;
          n.last_claim_byte = static_cast<int>(token);
          return n;
        }
        throw IllegalTransition(illegal(s, token));
      case FsmState::EndedClaim:
        if (token == static_cast<TokenId>('(')) {
          n.fsm = FsmState::WithinTitle;
          n.title_candidates.clear();
          for (std::size_t d = 0; d < docs_.size(); ++d) {
            if (title_clean_[d]) n.title_candidates.push_back(static_cast<int>(d));
          }
          n.title_matched = 0;
          return n;
        }
        throw IllegalTransition(illegal(s, token));
      case FsmState::WithinTitle: {
        if (token == Tokenizer::kTitleClose) {
          for (const int d : s.title_candidates) {
            if (title_tokens_[d].size() == s.title_matched) {
              n.fsm = FsmState::EndedTitle;
              n.bound_doc = d;
              return n;
            }
          }
          throw IllegalTransition(illegal(s, token));
        }
        std::vector<int> narrowed;
        for (const int d : s.title_candidates) {
          const auto& tt = title_tokens_[d];
          if (tt.size() > s.title_matched && tt[s.title_matched] == token) {
            narrowed.push_back(d);
          }
        }
        if (narrowed.empty()) throw IllegalTransition(illegal(s, token));
        n.title_candidates = std::move(narrowed);
        n.title_matched += 1;
        return n;
      }
      case FsmState::EndedTitle:
        if (token == static_cast<TokenId>('[')) {
          n.fsm = FsmState::WithinQuote;
          n.quote_cursor = index_.start(s.bound_doc);
          n.quote_tokens = 0;
          return n;
        }
        throw IllegalTransition(illegal(s, token));
      case FsmState::WithinQuote: {
        if (token == Tokenizer::kQuoteClose &&
            s.quote_tokens >= kMinQuoteTokens) {
          n.fsm = FsmState::EndedQuote;
          return n;
        }
        if (!Tokenizer::is_reserved(token)) {
          const auto cursor = s.quote_tokens == 0 ? index_.start(s.bound_doc)
                                                  : s.quote_cursor;
          const auto next = index_.advance(cursor, token);
          if (next) {
            n.quote_cursor = *next;
            n.quote_tokens += 1;
            return n;
          }
        }
        throw IllegalTransition(illegal(s, token));
      }
    }
    throw IllegalTransition(illegal(s, token));
  }

  // One response, sampled under the grammar plus a lookahead guard that
  // keeps completion within the token budget reachable at every step. Dead
  // ends abort and retry from scratch.
  InlineEvidenceResponse constrained_sample(const TokenModel& model,
                                            const std::string& prompt,
                                            const SampleConfig& config,
                                            Rng& rng,
                                            const TraceSink& trace = nullptr)
      const {
    if (Tokenizer::token_count(prompt) > kPromptBudget) {
      throw ContextOverflow("constrained_sample: prompt exceeds " +
                            std::to_string(kPromptBudget) + " tokens");
    }
    const TokenSeq prompt_tokens = Tokenizer::encode(prompt);
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      TokenSeq seq = prompt_tokens;
      SamplerState state = initial_state();
      for (std::size_t emitted = 0; emitted < config.max_tokens; ++emitted) {
        const std::size_t remaining = config.max_tokens - emitted;
        TokenMask mask = allowed_mask(state);
        apply_guard(state, remaining, mask);
        const std::size_t n_allowed = mask_count(mask);
        if (n_allowed == 0) break;  // dead end: retry from scratch
        const TokenId token =
            sample_token(model, seq, mask, config.temperature, rng);
        if (trace) {
          trace(StepTrace{emitted, state.fsm, token, n_allowed});
        }
        state = step_fsm(state, token);
        seq.push_back(token);
        if (state.fsm == FsmState::EndedQuote) {
          const std::string text = Tokenizer::decode(
              TokenSeq(seq.begin() + prompt_tokens.size(), seq.end()));
          auto parsed = parse_response(text);
          if (parsed.responses.size() != 1) {
            throw Error("constrained_sample: emitted text did not parse");
          }
          return parsed.responses.front();
        }
      }
    }
    throw DeadEnd("constrained_sample: no completion after " +
                  std::to_string(config.max_retries) + " retries");
  }

 private:
  static constexpr std::size_t kNoPath =
      std::numeric_limits<std::size_t>::max() / 4;

  static std::string illegal(const SamplerState& s, TokenId token) {
    return std::string("token ") + std::to_string(token) +
           " not allowed in state " + fsm_state_name(s.fsm);
  }

  // Bytes are free inside a claim except when they would combine with the
  // previous byte into a reserved delimiter.
  bool claim_byte_ok(const SamplerState& s, TokenId byte) const {
    if (s.last_claim_byte < 0) return true;
    return Tokenizer::delimiter_id(static_cast<char>(s.last_claim_byte),
                                   static_cast<char>(byte)) ==
           Tokenizer::kVocabSize;
  }

  bool usable(int d) const { return title_clean_[d] && quotable_[d]; }

  // Minimal tokens from a fresh title to EndedQuote:
  //   title + )% + [ + 5 quote tokens + ]%
  std::size_t need_from_title(std::size_t title_remaining) const {
    return title_remaining + 1 + 1 + kMinQuoteTokens + 1;
  }

  std::size_t need(const SamplerState& s) const {
    switch (s.fsm) {
      case FsmState::Start:
      case FsmState::EndedQuote:
        if (min_usable_title_ >= kNoPath) return kNoPath;
        return 1 + 1 + 1 + 1 + need_from_title(min_usable_title_);
        // %<, first claim byte, >%, (
      case FsmState::WithinClaim:
        if (min_usable_title_ >= kNoPath) return kNoPath;
        return (s.claim_tokens == 0 ? 1 : 0) + 1 + 1 +
               need_from_title(min_usable_title_);
      case FsmState::EndedClaim:
        if (min_usable_title_ >= kNoPath) return kNoPath;
        return 1 + need_from_title(min_usable_title_);
      case FsmState::WithinTitle: {
        std::size_t best = kNoPath;
        for (const int d : s.title_candidates) {
          if (!usable(d)) continue;
          best = std::min(best,
                          need_from_title(title_tokens_[d].size() -
                                          s.title_matched));
        }
        return best;
      }
      case FsmState::EndedTitle:
        return 1 + kMinQuoteTokens + 1;
      case FsmState::WithinQuote:
        if (s.quote_tokens >= kMinQuoteTokens) return 1;
        return (kMinQuoteTokens - s.quote_tokens) + 1;
    }
    return kNoPath;
  }

  // Withholds tokens that would make finishing within the remaining budget
  // impossible: after taking an allowed token there must still be a path of
  // at most remaining-1 tokens to EndedQuote. Also pins the start of the
  // instance and halts at EndedQuote.
  void apply_guard(const SamplerState& s, std::size_t remaining,
                   TokenMask& mask) const {
    switch (s.fsm) {
      case FsmState::Start:
        for (TokenId t = 0; t < Tokenizer::kByteTokens; ++t) mask[t] = false;
        if (need(s) > remaining) mask[Tokenizer::kClaimOpen] = false;
        break;
      case FsmState::EndedQuote:
        for (std::size_t t = 0; t < mask.size(); ++t) mask[t] = false;
        break;
      case FsmState::WithinClaim: {
        if (min_usable_title_ >= kNoPath) {
          for (std::size_t t = 0; t < mask.size(); ++t) mask[t] = false;
          break;
        }
        // after a byte: claim nonempty, still need >% ( title ... ]%
        const std::size_t after_byte =
            1 + 1 + need_from_title(min_usable_title_);
        if (1 + after_byte > remaining) {
          for (TokenId t = 0; t < Tokenizer::kByteTokens; ++t) mask[t] = false;
        }
        const std::size_t after_close = 1 + need_from_title(min_usable_title_);
        if (1 + after_close > remaining) {
          mask[Tokenizer::kClaimClose] = false;
        }
        break;
      }
      case FsmState::EndedClaim:
        if (1 + need_from_title(min_usable_title_) > remaining ||
            min_usable_title_ >= kNoPath) {
          mask[static_cast<TokenId>('(')] = false;
        }
        break;
      case FsmState::WithinTitle: {
        // Recompute per next token over usable candidates only.
        TokenMask narrowed(mask.size(), false);
        for (const int d : s.title_candidates) {
          if (!usable(d)) continue;
          const auto& tt = title_tokens_[d];
          if (tt.size() > s.title_matched) {
            const TokenId t = tt[s.title_matched];
            const std::size_t after =
                need_from_title(tt.size() - s.title_matched - 1);
            if (1 + after <= remaining) narrowed[t] = true;
          } else if (tt.size() == s.title_matched) {
            // )% then [ then 5 quote tokens then ]%
            if (1 + (1 + kMinQuoteTokens + 1) <= remaining) {
              narrowed[Tokenizer::kTitleClose] = true;
            }
          }
        }
        for (std::size_t t = 0; t < mask.size(); ++t) {
          mask[t] = mask[t] && narrowed[t];
        }
        break;
      }
      case FsmState::EndedTitle:
        if (1 + 1 + kMinQuoteTokens + 1 > remaining) {
          mask[static_cast<TokenId>('[')] = false;
        }
        break;
      case FsmState::WithinQuote: {
        const auto cursor = s.quote_tokens == 0 ? index_.start(s.bound_doc)
                                                : s.quote_cursor;
        for (TokenId t = 0; t < Tokenizer::kByteTokens; ++t) {
          if (!mask[t]) continue;
          const auto next = index_.advance(cursor, t);
          if (!next) {
            mask[t] = false;
            continue;
          }
          const std::size_t matched = s.quote_tokens + 1;
          std::size_t after;
          if (matched >= kMinQuoteTokens) {
            after = 1;
          } else {
            const std::size_t more = kMinQuoteTokens - matched;
            after = more + 1;
            if (index_.max_clean_extension(*next) < more) {
              mask[t] = false;
              continue;
            }
          }
          if (1 + after > remaining) mask[t] = false;
        }
        break;
      }
    }
  }

  std::vector<Document> docs_;
  SubstringIndex index_;
  std::vector<TokenSeq> title_tokens_;
  std::vector<bool> title_clean_;
  std::vector<bool> quotable_;
  std::size_t min_usable_title_ = 0;
};

// Spec-level convenience: build the prompt from the docs and sample.
inline InlineEvidenceResponse constrained_sample(
    const TokenModel& model, std::span<const Document> docs,
    const std::string& question, const SampleConfig& config, Rng& rng,
    const TraceSink& trace = nullptr) {
  if (docs.empty()) throw EmptyDocuments("constrained_sample: no documents");
  const ConstrainedDecoder decoder(docs);
  return decoder.constrained_sample(model, build_prompt(question, docs),
                                    config, rng, trace);
}

}  // namespace sqa
