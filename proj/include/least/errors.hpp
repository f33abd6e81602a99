#pragma once

#include <stdexcept>
#include <string>

namespace least {

// Base class for all validation-type failures. The CLI maps these to exit
// code 2; everything else is a plain crash.
class LeastError : public std::runtime_error {
 public:
  explicit LeastError(const std::string& what) : std::runtime_error(what) {}
};

class UnparseableDocument : public LeastError {
 public:
  explicit UnparseableDocument(const std::string& what) : LeastError(what) {}
};

class DanglingXPath : public LeastError {
 public:
  explicit DanglingXPath(const std::string& what) : LeastError(what) {}
};

class UnknownAttribute : public LeastError {
 public:
  explicit UnknownAttribute(const std::string& what) : LeastError(what) {}
};

class InsufficientLabeledPages : public LeastError {
 public:
  explicit InsufficientLabeledPages(const std::string& what) : LeastError(what) {}
};

class NoValidationEntries : public LeastError {
 public:
  explicit NoValidationEntries(const std::string& what) : LeastError(what) {}
};

class OverlappingSiteSets : public LeastError {
 public:
  explicit OverlappingSiteSets(const std::string& what) : LeastError(what) {}
};

class InsufficientPages : public LeastError {
 public:
  explicit InsufficientPages(const std::string& what) : LeastError(what) {}
};

class SoundnessViolation : public LeastError {
 public:
  explicit SoundnessViolation(const std::string& what) : LeastError(what) {}
};

class InvalidConfig : public LeastError {
 public:
  explicit InvalidConfig(const std::string& what) : LeastError(what) {}
};

}  // namespace least
