#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sqa/document.hpp"
#include "sqa/errors.hpp"
#include "sqa/text.hpp"
#include "sqa/tokenizer.hpp"

namespace sqa {

// One parsed answer-with-evidence instance. `raw` is the authoritative
// surface form: %<claim>%(doc_title)%[quote]% — note the '%' between
// sections is shared by the adjoining delimiters, exactly as serialized.
struct InlineEvidenceResponse {
  std::string claim;
  std::string doc_title;
  std::string quote;
  std::string raw;

  friend bool operator==(const InlineEvidenceResponse& a,
                         const InlineEvidenceResponse& b) {
    return a.claim == b.claim && a.doc_title == b.doc_title &&
           a.quote == b.quote && a.raw == b.raw;
  }
};

inline bool contains_delimiter(std::string_view field) {
  for (std::size_t i = 0; i + 1 < field.size(); ++i) {
    if (Tokenizer::delimiter_id(field[i], field[i + 1]) !=
        Tokenizer::kVocabSize) {
      return true;
    }
  }
  return false;
}

inline std::string serialize_response(const InlineEvidenceResponse& r) {
  for (const auto* field : {&r.claim, &r.doc_title, &r.quote}) {
    if (contains_delimiter(*field)) {
      throw DelimiterInField("field contains a reserved delimiter: " + *field);
    }
  }
  std::string out;
  out.reserve(r.claim.size() + r.doc_title.size() + r.quote.size() + 10);
  out += "%<";
  out += r.claim;
  out += ">%(";
  out += r.doc_title;
  out += ")%[";
  out += r.quote;
  out += "]%";
  return out;
}

inline InlineEvidenceResponse make_response(std::string claim,
                                            std::string doc_title,
                                            std::string quote) {
  InlineEvidenceResponse r{std::move(claim), std::move(doc_title),
                           std::move(quote), ""};
  r.raw = serialize_response(r);
  return r;
}

struct ParseDiagnostic {
  std::size_t position = 0;
  std::string message;
};

struct ParseResult {
  std::vector<InlineEvidenceResponse> responses;
  std::optional<ParseDiagnostic> diagnostic;  // first malformation, if any
};

namespace detail {

// Scans a field region starting at `from`: the first delimiter pair found
// must be `closer`. Returns its position, or nullopt after reporting.
inline std::optional<std::size_t> find_field_close(
    std::string_view text, std::size_t from, TokenId closer,
    std::optional<ParseDiagnostic>& diag, const char* what) {
  for (std::size_t i = from; i + 1 < text.size(); ++i) {
    const TokenId id = Tokenizer::delimiter_id(text[i], text[i + 1]);
    if (id == Tokenizer::kVocabSize) continue;
    if (id == closer) return i;
    if (!diag) {
      diag = ParseDiagnostic{
          i, std::string(what) + " interrupted by delimiter '" +
                 std::string(Tokenizer::delimiter_text(id)) + "'"};
    }
    return std::nullopt;
  }
  if (!diag) {
    diag = ParseDiagnostic{text.size(),
                           std::string(what) + " not closed before end"};
  }
  return std::nullopt;
}

}  // namespace detail

// Extracts every well-formed instance, left to right. Sections are
// non-greedy: each field ends at the first closing delimiter, and a field
// containing any other delimiter makes the attempt malformed. A malformed
// attempt records a diagnostic (first one only) and scanning resumes just
// past the failed opener.
inline ParseResult parse_response(std::string_view text) {
  ParseResult result;
  std::size_t i = 0;
  while (i + 1 < text.size()) {
    if (Tokenizer::delimiter_id(text[i], text[i + 1]) != Tokenizer::kClaimOpen) {
      ++i;
      continue;
    }
    const std::size_t p0 = i;
    auto fail = [&](std::size_t pos, const char* msg) {
      if (!result.diagnostic) result.diagnostic = ParseDiagnostic{pos, msg};
      i = p0 + 2;
    };
    auto close1 = detail::find_field_close(text, p0 + 2, Tokenizer::kClaimClose,
                                           result.diagnostic, "claim");
    if (!close1) {
      i = p0 + 2;
      continue;
    }
    // ">%(" shares its '%': the char right after the closer must be '('.
    const std::size_t title_at = *close1 + 3;
    if (*close1 + 2 >= text.size() || text[*close1 + 2] != '(') {
      fail(*close1 + 2, "expected '(' to open the title");
      continue;
    }
    auto close2 = detail::find_field_close(text, title_at,
                                           Tokenizer::kTitleClose,
                                           result.diagnostic, "title");
    if (!close2) {
      i = p0 + 2;
      continue;
    }
    const std::size_t quote_at = *close2 + 3;
    if (*close2 + 2 >= text.size() || text[*close2 + 2] != '[') {
      fail(*close2 + 2, "expected '[' to open the quote");
      continue;
    }
    auto close3 = detail::find_field_close(text, quote_at,
                                           Tokenizer::kQuoteClose,
                                           result.diagnostic, "quote");
    if (!close3) {
      i = p0 + 2;
      continue;
    }
    const std::size_t end = *close3 + 2;
    InlineEvidenceResponse r;
    r.claim = std::string(text.substr(p0 + 2, *close1 - (p0 + 2)));
    r.doc_title = std::string(text.substr(title_at, *close2 - title_at));
    r.quote = std::string(text.substr(quote_at, *close3 - quote_at));
    r.raw = std::string(text.substr(p0, end - p0));
    result.responses.push_back(std::move(r));
    i = end;
  }
  return result;
}

enum class Violation {
  MalformedQuote,
  WrongTitle,
  WrongQuote,
  EmptyClaim,
  EmptyQuote,
  ShortQuote,
};

inline const char* violation_name(Violation v) {
  switch (v) {
    case Violation::MalformedQuote: return "MalformedQuote";
    case Violation::WrongTitle: return "WrongTitle";
    case Violation::WrongQuote: return "WrongQuote";
    case Violation::EmptyClaim: return "EmptyClaim";
    case Violation::EmptyQuote: return "EmptyQuote";
    case Violation::ShortQuote: return "ShortQuote";
  }
  return "?";
}

struct ValidationReport {
  std::set<Violation> violations;
  bool ok() const { return violations.empty(); }
};

constexpr std::size_t kMinQuoteTokens = 5;

// Checks a response against the context documents. Every failure mode is a
// report entry; nothing throws besides the nonempty-docs precondition.
inline ValidationReport validate_response(const InlineEvidenceResponse& resp,
                                          std::span<const Document> docs,
                                          bool case_insensitive = false) {
  if (docs.empty()) throw EmptyDocuments("validate_response: no documents");
  ValidationReport report;
  for (const auto* field : {&resp.claim, &resp.doc_title, &resp.quote}) {
    if (contains_delimiter(*field)) {
      report.violations.insert(Violation::MalformedQuote);
      break;
    }
  }
  if (resp.claim.empty()) report.violations.insert(Violation::EmptyClaim);
  if (resp.quote.empty()) {
    report.violations.insert(Violation::EmptyQuote);
  } else if (Tokenizer::token_count(resp.quote) < kMinQuoteTokens) {
    report.violations.insert(Violation::ShortQuote);
  }
  bool title_found = false;
  bool quote_found = false;
  for (const Document& d : docs) {
    if (d.title != resp.doc_title) continue;
    title_found = true;
    if (resp.quote.empty()) {
      quote_found = true;
      continue;
    }
    if (case_insensitive) {
      if (ascii_lower(d.body).find(ascii_lower(resp.quote)) !=
          std::string::npos) {
        quote_found = true;
      }
    } else if (d.body.find(resp.quote) != std::string::npos) {
      quote_found = true;
    }
  }
  if (!title_found) {
    report.violations.insert(Violation::WrongTitle);
  } else if (!quote_found) {
    report.violations.insert(Violation::WrongQuote);
  }
  return report;
}

// Merges a response into a free-text answer, matching the layouts used when
// responses are shown next to ordinary cited posts.
inline std::string flatten_response(const InlineEvidenceResponse& resp,
                                    const std::string& url, int template_id) {
  switch (template_id) {
    case 0:
      return resp.claim + "\n\nAccording to the page \"" + resp.doc_title +
             "\"[1]:\n" + resp.quote + "\n\n[1] " + url;
    case 1:
      return resp.claim + "\n\nSee this fragment from \"" + resp.doc_title +
             "\"[1]:\n" + resp.quote + "\n\n[1] " + url;
    case 2:
      return resp.claim + "\n\n\"" + resp.quote + "\"\nSource: \"" +
             resp.doc_title + "\" [1]\n\n[1] " + url;
    default:
      throw UnknownTemplate("flatten_response: template " +
                            std::to_string(template_id));
  }
}

}  // namespace sqa
