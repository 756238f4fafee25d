#pragma once

#include <stdexcept>
#include <string>

namespace odmds {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, unusable configuration, violated call contracts. Exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data. Messages name the file/line or the
// offending identifier. Exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// Remote provider failures: transport errors after retries, bad status
// codes, malformed responses. Exit code 3.
class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace odmds
