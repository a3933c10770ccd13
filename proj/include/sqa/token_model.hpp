#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <unordered_map>
#include <vector>

#include "sqa/errors.hpp"
#include "sqa/rng.hpp"
#include "sqa/tokenizer.hpp"

namespace sqa {

// Model context limits, measured in reference-tokenizer tokens.
constexpr std::size_t kContextWindow = 4096;
constexpr std::size_t kSampleBudget = 256;
constexpr std::size_t kPromptBudget = kContextWindow - kSampleBudget;  // 3840

// Autoregressive next-token distribution over the tokenizer vocabulary.
// Implementations must be deterministic given the prefix.
class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<double> next_logits(
      std::span<const TokenId> prefix) const = 0;
};

// Add-k smoothed n-gram model. Counts are kept for every context length up
// to order-1 so short prefixes condition on what is available.
class NGramModel : public TokenModel {
 public:
  static constexpr int kMaxOrder = 8;

  explicit NGramModel(int order = 3, double smoothing = 1.0)
      : order_(order), smoothing_(smoothing) {
    if (order < 1 || order > kMaxOrder) {
      throw Error("ngram order must be in [1, 8]");
    }
    if (!(smoothing > 0)) throw Error("smoothing must be positive");
  }

  int order() const { return order_; }
  double smoothing() const { return smoothing_; }
  std::size_t vocab_size() const override { return Tokenizer::kVocabSize; }

  void add_sequence(std::span<const TokenId> seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const std::size_t max_len =
          std::min<std::size_t>(order_ - 1, i);
      for (std::size_t len = 0; len <= max_len; ++len) {
        auto& slot = table_[pack(seq.subspan(i - len, len))];
        slot.total += 1;
        slot.counts[seq[i]] += 1;
      }
    }
  }

  std::vector<double> next_logits(
      std::span<const TokenId> prefix) const override {
    const std::size_t ctx_len =
        std::min<std::size_t>(order_ - 1, prefix.size());
    const auto ctx = prefix.subspan(prefix.size() - ctx_len, ctx_len);
    const double v = static_cast<double>(Tokenizer::kVocabSize);
    std::vector<double> logits(Tokenizer::kVocabSize);
    const auto it = table_.find(pack(ctx));
    const double total = it == table_.end()
                             ? 0.0
                             : static_cast<double>(it->second.total);
    const double denom = total + smoothing_ * v;
    const double floor_logp = std::log(smoothing_ / denom);
    std::fill(logits.begin(), logits.end(), floor_logp);
    if (it != table_.end()) {
      for (const auto& [token, count] : it->second.counts) {
        logits[token] =
            std::log((static_cast<double>(count) + smoothing_) / denom);
      }
    }
    return logits;
  }

  // Exposed for tests and serialization.
  std::uint64_t context_total(std::span<const TokenId> ctx) const {
    const auto it = table_.find(pack(ctx));
    return it == table_.end() ? 0 : it->second.total;
  }
  std::uint64_t ngram_count(std::span<const TokenId> ctx, TokenId next) const {
    const auto it = table_.find(pack(ctx));
    if (it == table_.end()) return 0;
    const auto jt = it->second.counts.find(next);
    return jt == it->second.counts.end() ? 0 : jt->second;
  }

  void save(const std::string& path) const;
  static NGramModel load(const std::string& path);

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> counts;
  };

  // Prefix-free packing: 9 bits per token behind a sentinel bit, so
  // contexts of different lengths never collide. Requires order <= 8.
  static std::uint64_t pack(std::span<const TokenId> ctx) {
    std::uint64_t acc = 1;
    for (const TokenId t : ctx) acc = (acc << 9) | (t + 1);
    return acc;
  }

  int order_;
  double smoothing_;
  std::unordered_map<std::uint64_t, ContextCounts> table_;

  friend NGramModel train_ngram(const std::vector<TokenSeq>&, int, double);
};

inline NGramModel train_ngram(const std::vector<TokenSeq>& corpus,
                              int order = 3, double smoothing = 1.0) {
  NGramModel model(order, smoothing);
  for (const auto& seq : corpus) model.add_sequence(seq);
  return model;
}

using TokenMask = std::vector<bool>;

inline std::size_t mask_count(const TokenMask& mask) {
  std::size_t n = 0;
  for (const bool b : mask) n += b;
  return n;
}

// Draws a token from the renormalized masked distribution. Temperatures at
// or below 1e-9 select the masked argmax, smallest id on ties.
inline TokenId sample_token(const TokenModel& model,
                            std::span<const TokenId> prefix,
                            const TokenMask& mask, double temperature,
                            Rng& rng) {
  if (mask.size() != model.vocab_size()) {
    throw Error("sample_token: mask size mismatch");
  }
  const std::vector<double> logits = model.next_logits(prefix);
  double best = -HUGE_VAL;
  TokenId best_id = 0;
  bool any = false;
  for (TokenId t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    if (!any || logits[t] > best) {
      best = logits[t];
      best_id = t;
    }
    any = true;
  }
  if (!any) throw EmptyMask("sample_token: empty mask");
  if (temperature <= 1e-9) return best_id;

  double sum = 0;
  std::vector<double> probs(mask.size(), 0.0);
  for (TokenId t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    probs[t] = std::exp((logits[t] - best) / temperature);
    sum += probs[t];
  }
  const double u = rng.uniform01() * sum;
  double acc = 0;
  TokenId last = best_id;
  for (TokenId t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    acc += probs[t];
    last = t;
    if (u < acc) return t;
  }
  return last;  // numeric edge: u == sum
}

// Unmasked model log-probability of `continuation` given `prefix`. Chains
// one next_logits call per token.
inline double sequence_logprob(const TokenModel& model, TokenSeq prefix,
                               std::span<const TokenId> continuation) {
  double total = 0;
  for (const TokenId t : continuation) {
    const std::vector<double> logits = model.next_logits(prefix);
    double mx = logits[0];
    for (const double l : logits) mx = std::max(mx, l);
    double z = 0;
    for (const double l : logits) z += std::exp(l - mx);
    total += logits[t] - mx - std::log(z);
    prefix.push_back(t);
  }
  return total;
}

// ---- binary serialization ----
//
// Layout (little endian):
//   bytes 0..3   magic "SQNG"
//   u32 version (1)
//   u32 order, u32 vocab, f64 smoothing
//   u64 context_count, then per context (sorted by length, then tokens):
//     u8 ctx_len, u32 token * ctx_len,
//     u32 entry_count, then per entry (sorted by token): u32 token, u64 count

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) { return std::string(take(n), n); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("model file truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void NGramModel::save(const std::string& path) const {
  std::string out = "SQNG";
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(order_));
  detail::put_u32(out, Tokenizer::kVocabSize);
  detail::put_u64(out, std::bit_cast<std::uint64_t>(smoothing_));

  std::vector<std::pair<TokenSeq, const ContextCounts*>> contexts;
  contexts.reserve(table_.size());
  for (const auto& [key, cc] : table_) {
    TokenSeq ctx;
    std::uint64_t acc = key;
    while (acc != 1) {
      ctx.push_back(static_cast<TokenId>((acc & 0x1ff) - 1));
      acc >>= 9;
    }
    std::reverse(ctx.begin(), ctx.end());
    contexts.emplace_back(std::move(ctx), &cc);
  }
  std::sort(contexts.begin(), contexts.end(),
            [](const auto& a, const auto& b) {
              if (a.first.size() != b.first.size())
                return a.first.size() < b.first.size();
              return a.first < b.first;
            });
  detail::put_u64(out, contexts.size());
  for (const auto& [ctx, cc] : contexts) {
    out.push_back(static_cast<char>(ctx.size()));
    for (const TokenId t : ctx) detail::put_u32(out, t);
    std::vector<std::pair<TokenId, std::uint64_t>> entries(cc->counts.begin(),
                                                           cc->counts.end());
    std::sort(entries.begin(), entries.end());
    detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [t, c] : entries) {
      detail::put_u32(out, t);
      detail::put_u64(out, c);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline NGramModel NGramModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open model file: " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  detail::ByteReader r(std::move(data));
  if (r.bytes(4) != "SQNG") throw IoError("bad model magic: " + path);
  if (r.u32() != 1) throw IoError("unsupported model version: " + path);
  const int order = static_cast<int>(r.u32());
  const std::uint32_t vocab = r.u32();
  if (vocab != Tokenizer::kVocabSize) {
    throw IoError("model vocab mismatch: " + path);
  }
  const double smoothing = r.f64();
  NGramModel model(order, smoothing);
  const std::uint64_t n_ctx = r.u64();
  for (std::uint64_t i = 0; i < n_ctx; ++i) {
    const std::uint8_t len = r.u8();
    TokenSeq ctx(len);
    for (auto& t : ctx) t = r.u32();
    auto& slot = model.table_[pack(ctx)];
    const std::uint32_t n_entries = r.u32();
    for (std::uint32_t j = 0; j < n_entries; ++j) {
      const TokenId t = r.u32();
      const std::uint64_t c = r.u64();
      slot.counts[t] = c;
      slot.total += c;
    }
  }
  return model;
}

}  // namespace sqa
