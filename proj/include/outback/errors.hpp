#ifndef OUTBACK_ERRORS_HPP
#define OUTBACK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace outback {

// Locator construction exhausted its reseeding budget. Indicates an array
// sizing bug; never expected with the shipped sizing rule.
struct ConstructionFailed : std::runtime_error {
  explicit ConstructionFailed(const std::string& what) : std::runtime_error(what) {}
};

// Cuckoo-style bucket assignment exceeded its displacement budget. The
// caller must retry with a larger bucket count.
struct AssignmentFailed : std::runtime_error {
  explicit AssignmentFailed(const std::string& what) : std::runtime_error(what) {}
};

// Truncated or corrupt serialized structure.
struct MalformedBytes : std::runtime_error {
  explicit MalformedBytes(const std::string& what) : std::runtime_error(what) {}
};

// Truncated or corrupt wire frame.
struct MalformedFrame : std::runtime_error {
  explicit MalformedFrame(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfRange : std::runtime_error {
  explicit OutOfRange(const std::string& what) : std::runtime_error(what) {}
};

struct ConnectionRefused : std::runtime_error {
  explicit ConnectionRefused(const std::string& what) : std::runtime_error(what) {}
};

struct Timeout : std::runtime_error {
  explicit Timeout(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyRing : std::runtime_error {
  explicit EmptyRing(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace outback

#endif  // OUTBACK_ERRORS_HPP
