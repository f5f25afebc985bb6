#pragma once

#include <stdexcept>
#include <string>

namespace condex {

// All library errors carry a short machine-parsable category name so the
// CLI can print "Category: message" and map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& msg)
      : std::runtime_error(category + ": " + msg), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error("ShapeError", msg) {}
};
struct RangeError : Error {
  explicit RangeError(const std::string& msg) : Error("RangeError", msg) {}
};
struct RangeViolation : Error {
  explicit RangeViolation(const std::string& msg) : Error("RangeViolation", msg) {}
};
struct NonFiniteCost : Error {
  explicit NonFiniteCost(const std::string& msg) : Error("NonFiniteCost", msg) {}
};
struct NonFiniteIterate : Error {
  explicit NonFiniteIterate(const std::string& msg) : Error("NonFiniteIterate", msg) {}
};
struct EmptyDataset : Error {
  explicit EmptyDataset(const std::string& msg) : Error("EmptyDataset", msg) {}
};
struct SizeMismatch : Error {
  explicit SizeMismatch(const std::string& msg) : Error("SizeMismatch", msg) {}
};
struct TailMassWarning : Error {
  explicit TailMassWarning(const std::string& msg) : Error("TailMassWarning", msg) {}
};
struct NonStationary : Error {
  explicit NonStationary(const std::string& msg) : Error("NonStationary", msg) {}
};
struct BadActionIndex : Error {
  explicit BadActionIndex(const std::string& msg) : Error("BadActionIndex", msg) {}
};
struct MissingActionData : Error {
  explicit MissingActionData(const std::string& msg) : Error("MissingActionData", msg) {}
};
struct GridMismatch : Error {
  explicit GridMismatch(const std::string& msg) : Error("GridMismatch", msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("ConfigError", msg) {}
};

}  // namespace condex
