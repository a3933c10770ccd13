#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sqa/errors.hpp"

namespace sqa {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Byte-level tokenizer with six reserved two-character delimiter tokens.
// Ids 0..255 are raw bytes; ids 256..261 are the delimiters below. Encoding
// is a greedy left-to-right longest match, so any occurrence of a delimiter
// pair in text becomes a single reserved token and two adjacent byte tokens
// can never spell a delimiter. decode(encode(t)) == t for every string.
//
// Note the canonical response surface shares '%' characters between
// sections ("...>%(..." is three characters), so a canonical instance
// encodes to: %< claim >% '(' title )% '[' quote ]% — the structural
// markers are the four tokens %<, >%, )%, ]% plus the bytes '(' and '['.
class Tokenizer {
 public:
  static constexpr TokenId kByteTokens = 256;
  static constexpr TokenId kClaimOpen = 256;   // %<
  static constexpr TokenId kClaimClose = 257;  // >%
  static constexpr TokenId kTitleOpen = 258;   // %(
  static constexpr TokenId kTitleClose = 259;  // )%
  static constexpr TokenId kQuoteOpen = 260;   // %[
  static constexpr TokenId kQuoteClose = 261;  // ]%
  static constexpr TokenId kVocabSize = 262;

  static constexpr std::array<std::string_view, 6> kDelimiters = {
      "%<", ">%", "%(", ")%", "%[", "]%"};

  static constexpr bool is_reserved(TokenId id) {
    return id >= kByteTokens && id < kVocabSize;
  }

  static constexpr std::string_view delimiter_text(TokenId id) {
    return kDelimiters[id - kByteTokens];
  }

  // Reserved id for a two-char delimiter, or kVocabSize if not one.
  static constexpr TokenId delimiter_id(char a, char b) {
    if (a == '%') {
      if (b == '<') return kClaimOpen;
      if (b == '(') return kTitleOpen;
      if (b == '[') return kQuoteOpen;
    } else if (b == '%') {
      if (a == '>') return kClaimClose;
      if (a == ')') return kTitleClose;
      if (a == ']') return kQuoteClose;
    }
    return kVocabSize;
  }

  static TokenSeq encode(std::string_view text) {
    TokenSeq out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
      if (i + 1 < text.size()) {
        const TokenId id = delimiter_id(text[i], text[i + 1]);
        if (id != kVocabSize) {
          out.push_back(id);
          i += 2;
          continue;
        }
      }
      out.push_back(static_cast<TokenId>(static_cast<unsigned char>(text[i])));
      ++i;
    }
    return out;
  }

  static std::string decode(const TokenSeq& tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (const TokenId id : tokens) {
      if (id < kByteTokens) {
        out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
      } else if (id < kVocabSize) {
        out.append(delimiter_text(id));
      } else {
        throw Error("decode: unknown token id " + std::to_string(id));
      }
    }
    return out;
  }

  static std::size_t token_count(std::string_view text) {
    return encode(text).size();
  }
};

}  // namespace sqa
