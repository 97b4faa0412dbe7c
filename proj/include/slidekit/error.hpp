// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace slidekit {

/// Root of every exception thrown by the toolkit. The CLI maps any Error to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SLIDEKIT_DEFINE_ERROR(Name)            \
  class Name : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  }

SLIDEKIT_DEFINE_ERROR(DimensionError);
SLIDEKIT_DEFINE_ERROR(IndexError);
SLIDEKIT_DEFINE_ERROR(RangeError);
SLIDEKIT_DEFINE_ERROR(ConfigError);
SLIDEKIT_DEFINE_ERROR(DegenerateError);
SLIDEKIT_DEFINE_ERROR(TrainingError);
SLIDEKIT_DEFINE_ERROR(IntegrityError);
SLIDEKIT_DEFINE_ERROR(InputError);
SLIDEKIT_DEFINE_ERROR(FormatError);
SLIDEKIT_DEFINE_ERROR(EncodingError);
SLIDEKIT_DEFINE_ERROR(EmptyBagError);
SLIDEKIT_DEFINE_ERROR(EscapingError);
SLIDEKIT_DEFINE_ERROR(IngestionError);
SLIDEKIT_DEFINE_ERROR(EmptyDocumentError);
SLIDEKIT_DEFINE_ERROR(StoreError);
SLIDEKIT_DEFINE_ERROR(RetrievalError);
SLIDEKIT_DEFINE_ERROR(PromptError);
SLIDEKIT_DEFINE_ERROR(RunError);

#undef SLIDEKIT_DEFINE_ERROR

/// Network-level failure after the retry budget is spent (5xx, timeout,
/// refused connection). `status` is 0 when no HTTP response was received.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

/// The server rejected the request (4xx); never retried.
class RequestError : public Error {
 public:
  RequestError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace slidekit
