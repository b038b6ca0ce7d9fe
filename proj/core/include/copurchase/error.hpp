#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace copurchase {

/// Bad or inconsistent input data (malformed files, impossible requests on a
/// given graph). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checked invariant did not hold. Maps to CLI exit code 3.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed record in an amazon-meta stream. The reader resynchronises on
/// the next `Id:` line, so callers may catch, log, and keep reading.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::int64_t record_id, std::uint64_t byte_offset)
      : DataError(what + " (record Id " + std::to_string(record_id) + ", byte " +
                  std::to_string(byte_offset) + ")"),
        record_id_(record_id),
        byte_offset_(byte_offset) {}

  /// -1 when the failure happened before an `Id:` line was seen.
  std::int64_t record_id() const noexcept { return record_id_; }
  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::int64_t record_id_;
  std::uint64_t byte_offset_;
};

}  // namespace copurchase
