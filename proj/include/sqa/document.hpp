#pragma once

#include <string>

#include "sqa/tokenizer.hpp"

namespace sqa {

// A retrieved source text. token_cache always mirrors body.
struct Document {
  std::string id;
  std::string title;
  std::string url;
  std::string body;
  TokenSeq token_cache;

  Document() = default;
  Document(std::string id_, std::string title_, std::string url_,
           std::string body_)
      : id(std::move(id_)),
        title(std::move(title_)),
        url(std::move(url_)),
        body(std::move(body_)),
        token_cache(Tokenizer::encode(body)) {}

  void refresh_tokens() { token_cache = Tokenizer::encode(body); }
};

}  // namespace sqa
