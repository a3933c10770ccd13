#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sqa/errors.hpp"
#include "sqa/rng.hpp"
#include "sqa/syntax.hpp"
#include "sqa/text.hpp"
#include "sqa/tokenizer.hpp"

namespace sqa {

enum class Preference { PreferA, PreferB, TieGood, TieBad, Unsure };

inline const char* preference_name(Preference p) {
  switch (p) {
    case Preference::PreferA: return "prefer_a";
    case Preference::PreferB: return "prefer_b";
    case Preference::TieGood: return "tie_good";
    case Preference::TieBad: return "tie_bad";
    case Preference::Unsure: return "unsure";
  }
  return "?";
}

struct Rating {
  std::string rater_id;
  std::string question_id;
  bool plausible_a = false;
  bool plausible_b = false;
  bool supported_a = false;
  bool supported_b = false;
  Preference preference = Preference::Unsure;
};

struct ComparisonRecord {
  std::string question_id;
  std::string question;
  InlineEvidenceResponse response_a;
  InlineEvidenceResponse response_b;
  std::vector<Rating> ratings;
};

// Strict majority; an exact tie returns false.
inline bool majority_vote(const std::vector<bool>& judgments) {
  if (judgments.empty()) throw EmptyJudgments("majority_vote: empty");
  std::size_t yes = 0;
  for (const bool b : judgments) yes += b ? 1 : 0;
  return 2 * yes > judgments.size();
}

// ---- features ----
//
// Feature order (kFeatureNames below):
//   0 claim_words       word-token count of the claim
//   1 quote_words       word-token count of the quote
//   2 short_quote       1 when the quote is under 5 tokenizer tokens
//   3 cos_q_claim       bag-of-words cosine(question, claim)
//   4 cos_claim_quote   bag-of-words cosine(claim, quote)
//   5 cos_q_quote       bag-of-words cosine(question, quote)
//   6 overlap_q_claim   fraction of distinct question words in the claim
//   7 overlap_q_quote   fraction of distinct question words in the quote
//   8 overlap_claim_quote fraction of distinct claim words in the quote
//   9 syntax_ok         1 when fields are delimiter-free, claim and quote
//                       nonempty, quote >= 5 tokens
//  10 bias              always 1

constexpr std::size_t kFeatureCount = 11;

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {
      "claim_words",    "quote_words",     "short_quote",
      "cos_q_claim",    "cos_claim_quote", "cos_q_quote",
      "overlap_q_claim", "overlap_q_quote", "overlap_claim_quote",
      "syntax_ok",      "bias"};
  return names;
}

namespace detail {

inline double overlap_fraction(const std::vector<std::string>& from,
                               const std::vector<std::string>& in) {
  if (from.empty()) return 0.0;
  TermCounts have;
  for (const auto& w : in) have[w] = 1.0;
  TermCounts distinct;
  for (const auto& w : from) distinct[w] = 1.0;
  double hit = 0;
  for (const auto& [w, one] : distinct) {
    if (have.count(w)) hit += 1.0;
  }
  return hit / static_cast<double>(distinct.size());
}

}  // namespace detail

inline std::vector<double> featurize(const std::string& question,
                                     const InlineEvidenceResponse& resp) {
  const auto qw = word_tokens(question);
  const auto cw = word_tokens(resp.claim);
  const auto uw = word_tokens(resp.quote);
  const TermCounts qv = term_counts(qw);
  const TermCounts cv = term_counts(cw);
  const TermCounts uv = term_counts(uw);
  const std::size_t quote_tokens = Tokenizer::token_count(resp.quote);
  const bool short_quote = quote_tokens < kMinQuoteTokens;
  const bool syntax_ok = !resp.claim.empty() && !resp.quote.empty() &&
                         !short_quote && !contains_delimiter(resp.claim) &&
                         !contains_delimiter(resp.doc_title) &&
                         !contains_delimiter(resp.quote);
  return {
      static_cast<double>(cw.size()),
      static_cast<double>(uw.size()),
      short_quote ? 1.0 : 0.0,
      cosine(qv, cv),
      cosine(cv, uv),
      cosine(qv, uv),
      detail::overlap_fraction(qw, cw),
      detail::overlap_fraction(qw, uw),
      detail::overlap_fraction(cw, uw),
      syntax_ok ? 1.0 : 0.0,
      1.0,
  };
}

// ---- scorer ----

struct PreferenceScorer {
  std::vector<double> weights;      // preference head
  std::vector<double> aux_weights;  // supported-and-plausible head

  double score_features(std::span<const double> f) const {
    double s = 0;
    for (std::size_t i = 0; i < f.size() && i < weights.size(); ++i) {
      s += weights[i] * f[i];
    }
    return s;
  }
};

inline double score(const PreferenceScorer& scorer, const std::string& question,
                    const InlineEvidenceResponse& resp) {
  return scorer.score_features(featurize(question, resp));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// P(A preferred over B); antisymmetric by construction.
inline double preference_probability(const PreferenceScorer& scorer,
                                     const std::string& question,
                                     const InlineEvidenceResponse& a,
                                     const InlineEvidenceResponse& b) {
  return sigmoid(score(scorer, question, a) - score(scorer, question, b));
}

inline double aux_probability(const PreferenceScorer& scorer,
                              const std::string& question,
                              const InlineEvidenceResponse& resp) {
  const auto f = featurize(question, resp);
  double s = 0;
  for (std::size_t i = 0; i < f.size() && i < scorer.aux_weights.size(); ++i) {
    s += scorer.aux_weights[i] * f[i];
  }
  return sigmoid(s);
}

// ---- training ----

// Cross-entropy targets per rating. Unsure contributes nothing; ties train
// toward maximum entropy.
inline std::optional<double> preference_target(Preference p) {
  switch (p) {
    case Preference::PreferA: return 1.0;
    case Preference::PreferB: return 0.0;
    case Preference::TieGood:
    case Preference::TieBad: return 0.5;
    case Preference::Unsure: return std::nullopt;
  }
  return std::nullopt;
}

// Featurized training problem; kept public so gradients can be checked
// against finite differences.
struct PairwiseProblem {
  struct PrefItem {
    std::vector<double> fa, fb;
    double target;  // 1, 0 or 0.5
  };
  struct AuxItem {
    std::vector<double> f;
    double label;  // majority-voted supported-and-plausible
  };
  std::vector<PrefItem> pref;
  std::vector<AuxItem> aux;
  std::size_t dim = 0;
};

inline PairwiseProblem build_problem(std::span<const ComparisonRecord> records) {
  PairwiseProblem prob;
  for (const auto& rec : records) {
    if (rec.ratings.empty()) continue;
    const auto fa = featurize(rec.question, rec.response_a);
    const auto fb = featurize(rec.question, rec.response_b);
    prob.dim = fa.size();
    for (const auto& r : rec.ratings) {
      const auto target = preference_target(r.preference);
      if (target) prob.pref.push_back({fa, fb, *target});
    }
    std::vector<bool> sp_a, sp_b;
    for (const auto& r : rec.ratings) {
      sp_a.push_back(r.supported_a && r.plausible_a);
      sp_b.push_back(r.supported_b && r.plausible_b);
    }
    prob.aux.push_back({fa, majority_vote(sp_a) ? 1.0 : 0.0});
    prob.aux.push_back({fb, majority_vote(sp_b) ? 1.0 : 0.0});
  }
  return prob;
}

// L = 1/2 * mean_pref CE(sigmoid(s_a - s_b), target)
//   + 1/2 * mean_aux  CE(sigmoid(v . f), label)
inline double pairwise_loss(const PairwiseProblem& prob,
                            std::span<const double> w,
                            std::span<const double> v) {
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto ce = [](double p, double t) {
    const double eps = 1e-12;
    return -(t * std::log(std::max(p, eps)) +
             (1 - t) * std::log(std::max(1 - p, eps)));
  };
  double lp = 0;
  for (const auto& item : prob.pref) {
    const double d = dot(item.fa, w) - dot(item.fb, w);
    lp += ce(sigmoid(d), item.target);
  }
  if (!prob.pref.empty()) lp /= static_cast<double>(prob.pref.size());
  double la = 0;
  for (const auto& item : prob.aux) {
    la += ce(sigmoid(dot(item.f, v)), item.label);
  }
  if (!prob.aux.empty()) la /= static_cast<double>(prob.aux.size());
  return 0.5 * lp + 0.5 * la;
}

// Analytic gradient of pairwise_loss with respect to (w, v).
inline std::pair<std::vector<double>, std::vector<double>> pairwise_gradient(
    const PairwiseProblem& prob, std::span<const double> w,
    std::span<const double> v) {
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  std::vector<double> gw(w.size(), 0.0), gv(v.size(), 0.0);
  if (!prob.pref.empty()) {
    const double scale = 0.5 / static_cast<double>(prob.pref.size());
    for (const auto& item : prob.pref) {
      const double d = dot(item.fa, w) - dot(item.fb, w);
      const double err = sigmoid(d) - item.target;
      for (std::size_t i = 0; i < w.size(); ++i) {
        gw[i] += scale * err * (item.fa[i] - item.fb[i]);
      }
    }
  }
  if (!prob.aux.empty()) {
    const double scale = 0.5 / static_cast<double>(prob.aux.size());
    for (const auto& item : prob.aux) {
      const double err = sigmoid(dot(item.f, v)) - item.label;
      for (std::size_t i = 0; i < v.size(); ++i) {
        gv[i] += scale * err * item.f[i];
      }
    }
  }
  return {std::move(gw), std::move(gv)};
}

struct TrainConfig {
  double lr = 0.5;
  int epochs = 400;
  std::uint64_t seed = 0;
};

// Full-batch gradient descent from zero weights. Deterministic given the
// config; the seed is kept for interface stability.
inline PreferenceScorer train_pairwise(std::span<const ComparisonRecord> records,
                                       const TrainConfig& config = {}) {
  const PairwiseProblem prob = build_problem(records);
  if (prob.pref.empty()) {
    throw NoTrainingSignal("train_pairwise: no non-unsure preferences");
  }
  PreferenceScorer scorer;
  scorer.weights.assign(prob.dim, 0.0);
  scorer.aux_weights.assign(prob.dim, 0.0);
  for (int e = 0; e < config.epochs; ++e) {
    const auto [gw, gv] =
        pairwise_gradient(prob, scorer.weights, scorer.aux_weights);
    for (std::size_t i = 0; i < prob.dim; ++i) {
      scorer.weights[i] -= config.lr * gw[i];
      scorer.aux_weights[i] -= config.lr * gv[i];
    }
  }
  return scorer;
}

// ---- rater agreement ----

// Fraction of non-tie gold preferences the ratings match, aligned by index.
inline double rater_agreement(std::span<const Rating> ratings,
                              std::span<const Rating> gold) {
  if (ratings.size() != gold.size()) {
    throw Error("rater_agreement: misaligned rating lists");
  }
  std::size_t comparable = 0, matched = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Preference g = gold[i].preference;
    if (g != Preference::PreferA && g != Preference::PreferB) continue;
    if (gold[i].question_id != ratings[i].question_id) {
      throw Error("rater_agreement: question ids out of order");
    }
    ++comparable;
    if (ratings[i].preference == g) ++matched;
  }
  if (comparable == 0) {
    throw NoComparableItems("rater_agreement: gold has no non-tie items");
  }
  return static_cast<double>(matched) / static_cast<double>(comparable);
}

constexpr double kSuperRaterThreshold = 0.85;

inline bool super_rater_gate(std::span<const Rating> ratings,
                             std::span<const Rating> gold) {
  return rater_agreement(ratings, gold) >= kSuperRaterThreshold;
}

// ---- FEVER-style augmentation ----

enum class FeverLabel { Supported, Refuted };
enum class FeverKind { TypeA, TypeB, TypeA2, TypeB2 };

struct FeverClaim {
  std::string claim;
  FeverLabel label = FeverLabel::Supported;
  std::string evidence_title;
  std::string evidence_text;
};

using ClaimToQuestion = std::function<std::string(const std::string&)>;

namespace detail {

inline std::string strip_period(const std::string& s) {
  if (!s.empty() && s.back() == '.') return s.substr(0, s.size() - 1);
  return s;
}

// Reference copula-split transform: "X is Y." -> "Who or what is X?".
inline std::string heuristic_question(const std::string& claim) {
  static const std::array<std::string, 4> copulas = {" is ", " are ", " was ",
                                                     " were "};
  for (const auto& c : copulas) {
    const auto pos = claim.find(c);
    if (pos != std::string::npos && pos > 0) {
      return "Who or what" + c.substr(0, c.size() - 1) + " " +
             claim.substr(0, pos) + "?";
    }
  }
  return strip_period(claim) + "?";
}

inline std::string fake_quote(std::span<const FeverClaim> claims,
                              std::size_t skip, Rng& rng) {
  std::vector<const FeverClaim*> others;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (i != skip) others.push_back(&claims[i]);
  }
  if (others.empty()) {
    throw Error("fever_augment: fake quotes need at least two claims");
  }
  const auto& source = *others[rng.uniform_int(others.size())];
  const auto sents = split_sentence_spans(source.evidence_text);
  if (sents.empty()) return source.evidence_text;
  const std::size_t take = 1 + rng.uniform_int(std::min<std::size_t>(2, sents.size()));
  const std::size_t from = rng.uniform_int(sents.size() - take + 1);
  std::string out;
  for (std::size_t i = from; i < from + take; ++i) {
    if (!out.empty()) out += " ";
    out += sents[i].text;
  }
  return out;
}

}  // namespace detail

// Turns fact-verification claims into synthetic preference comparisons.
// Type A: templated yes/no question, affirmative vs negative answer, both
// with the real quote. Type B: question from the claim, claim vs templated
// negation. A2/B2: like A/B but the rejected side carries a fake quote
// stitched from other claims' evidence (never marked supported).
inline std::vector<ComparisonRecord> fever_augment(
    std::span<const FeverClaim> claims, FeverKind kind, Rng& rng,
    const ClaimToQuestion& to_question = detail::heuristic_question) {
  static const std::array<std::string, 4> question_templates = {
      "{claim}?", "Is it true that {claim}?",
      "Is it correct to say that {claim}?", "{claim}. Do you agree?"};
  static const std::array<std::string, 3> affirmative = {"Yes.",
                                                         "This is correct.",
                                                         "It is true."};
  static const std::array<std::string, 3> negative = {"No.",
                                                      "This is not correct.",
                                                      "It is not true."};
  std::vector<ComparisonRecord> out;
  for (std::size_t idx = 0; idx < claims.size(); ++idx) {
    const FeverClaim& fc = claims[idx];
    if (fc.evidence_text.empty()) {
      throw EmptyEvidence("fever_augment: claim has no evidence");
    }
    const bool supported = fc.label == FeverLabel::Supported;
    std::string question;
    std::string good_answer, bad_answer;
    if (kind == FeverKind::TypeA || kind == FeverKind::TypeA2) {
      const auto& tpl = question_templates[rng.uniform_int(4)];
      const std::string base = detail::strip_period(fc.claim);
      std::string q = tpl;
      const auto pos = q.find("{claim}");
      q.replace(pos, 7, base);
      question = q;
      const std::string aff = affirmative[rng.uniform_int(3)];
      const std::string neg = negative[rng.uniform_int(3)];
      good_answer = supported ? aff : neg;
      bad_answer = supported ? neg : aff;
    } else {
      question = to_question(fc.claim);
      const std::string negated = "It is not true that " + fc.claim;
      good_answer = supported ? fc.claim : negated;
      bad_answer = supported ? negated : fc.claim;
    }

    std::string good_quote = fc.evidence_text;
    std::string bad_quote = fc.evidence_text;
    if (kind == FeverKind::TypeA2 || kind == FeverKind::TypeB2) {
      bad_quote = detail::fake_quote(claims, idx, rng);
    }

    ComparisonRecord rec;
    rec.question_id = "fever-" + std::to_string(idx);
    rec.question = question;
    const bool good_is_a = rng.uniform_int(2) == 0;
    const auto good = make_response(good_answer, fc.evidence_title, good_quote);
    const auto bad = make_response(bad_answer, fc.evidence_title, bad_quote);
    rec.response_a = good_is_a ? good : bad;
    rec.response_b = good_is_a ? bad : good;

    Rating r;
    r.rater_id = "fever";
    r.question_id = rec.question_id;
    r.preference = good_is_a ? Preference::PreferA : Preference::PreferB;
    const bool fake_bad =
        kind == FeverKind::TypeA2 || kind == FeverKind::TypeB2;
    // The preferred side is supported and plausible; the rejected side is
    // neither, and a fabricated quote can never support.
    (good_is_a ? r.supported_a : r.supported_b) = true;
    (good_is_a ? r.plausible_a : r.plausible_b) = true;
    if (fake_bad) {
      (good_is_a ? r.supported_b : r.supported_a) = false;
    }
    rec.ratings.push_back(r);
    out.push_back(std::move(rec));
  }
  return out;
}

// ---- proportion confidence interval ----

struct ProportionCi {
  double p_hat = 0;
  double half_width = 0;
};

inline ProportionCi proportion_ci(long long successes, long long n, double z) {
  if (n < 1 || successes < 0 || successes > n) {
    throw InvalidCounts("proportion_ci: need 0 <= successes <= n, n >= 1");
  }
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  return {p, z * std::sqrt(p * (1 - p) / static_cast<double>(n))};
}

}  // namespace sqa
