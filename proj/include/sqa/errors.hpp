#pragma once

#include <stdexcept>
#include <string>

namespace sqa {

// Base class for all library errors. Subclasses exist so callers can catch
// a specific failure mode; the what() string carries the details.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DelimiterInField : Error {
  using Error::Error;
};
struct UnknownTemplate : Error {
  using Error::Error;
};

struct EmptyMask : Error {
  using Error::Error;
};
struct ContextOverflow : Error {
  using Error::Error;
};
struct IllegalTransition : Error {
  using Error::Error;
};
struct DeadEnd : Error {
  using Error::Error;
};

struct EmptyCorpus : Error {
  using Error::Error;
};
struct ProviderUnavailable : Error {
  using Error::Error;
};
struct SpanTooLarge : Error {
  using Error::Error;
};

struct EmptyDocument : Error {
  using Error::Error;
};
struct EmptyDocuments : Error {
  using Error::Error;
};

struct EmptyJudgments : Error {
  using Error::Error;
};
struct NoComparableItems : Error {
  using Error::Error;
};
struct NoTrainingSignal : Error {
  using Error::Error;
};
struct EmptyEvidence : Error {
  using Error::Error;
};
struct InvalidCounts : Error {
  using Error::Error;
};

struct EmptyItems : Error {
  using Error::Error;
};
struct RetrievalEmpty : Error {
  using Error::Error;
};
struct AllSamplesDeadEnded : Error {
  using Error::Error;
};

struct MissingField : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace sqa
