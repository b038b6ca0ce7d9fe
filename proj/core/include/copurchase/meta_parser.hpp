#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "copurchase/error.hpp"

namespace copurchase {

/// Product group. The four named groups get their own kind; anything else
/// keeps its raw label under Other.
struct Group {
  enum class Kind : std::uint8_t { Book, DVD, Music, Video, Other };

  Kind kind = Kind::Other;
  std::string other;  // only meaningful for Kind::Other

  static Group from_label(std::string_view label);
  std::string label() const;

  friend bool operator==(const Group&, const Group&) = default;
};

struct CategoryLevel {
  std::string name;
  std::int64_t cat_id = 0;

  friend bool operator==(const CategoryLevel&, const CategoryLevel&) = default;
};

/// One `|`-delimited hierarchy line, root first.
struct CategoryPath {
  std::vector<CategoryLevel> levels;

  std::vector<std::int64_t> ids() const;

  friend bool operator==(const CategoryPath&, const CategoryPath&) = default;
};

struct ReviewSummary {
  int total = 0;
  int downloaded = 0;
  double avg_rating = 0.0;

  friend bool operator==(const ReviewSummary&, const ReviewSummary&) = default;
};

struct ProductRecord {
  std::int64_t id = -1;
  std::string asin;
  std::optional<std::string> title;
  std::optional<Group> group;
  std::optional<std::int64_t> salesrank;
  std::vector<std::string> similar_asins;  // deduplicated, first-seen order
  std::vector<CategoryPath> category_paths;
  std::optional<ReviewSummary> review_summary;
  bool discontinued = false;

  friend bool operator==(const ProductRecord&, const ProductRecord&) = default;
};

/// Parses `|Books[283155]|Subjects[1000]`. The id of each level is the
/// integer inside the token's final bracket pair; the name is everything
/// before that bracket (brackets inside names are allowed).
CategoryPath parse_category_line(std::string_view line);

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

/// Streaming reader over the SNAP amazon-meta text format. Memory use is
/// bounded by the largest single record.
///
/// next() throws ParseError for a malformed block. The reader has already
/// skipped to the start of the following record when it throws, so callers
/// can log and continue or stop.
class MetadataReader {
 public:
  explicit MetadataReader(std::istream& in);

  std::optional<ProductRecord> next();

  std::uint64_t records_read() const noexcept { return records_read_; }
  /// Value of the `Total items:` header line, when present.
  std::optional<std::int64_t> declared_total() const noexcept { return declared_total_; }

 private:
  bool read_line();
  [[noreturn]] void fail(const std::string& what, std::int64_t id, std::uint64_t offset);
  void skip_to_next_record();

  std::istream& in_;
  std::string line_;
  bool have_line_ = false;  // line_ holds a lookahead line not yet consumed
  bool eof_ = false;
  std::uint64_t offset_ = 0;       // byte offset of the start of line_
  std::uint64_t next_offset_ = 0;  // byte offset after line_
  std::uint64_t records_read_ = 0;
  std::optional<std::int64_t> declared_total_;
};

/// Opens `path` as a stream, transparently decompressing gzip input
/// (detected by magic bytes).
std::unique_ptr<std::istream> open_metadata_file(const std::string& path);

enum class OnParseError { Skip, Abort };

struct ParseOutcome {
  std::vector<ProductRecord> records;
  std::vector<std::string> errors;  // one message per skipped block
  std::optional<std::int64_t> declared_total;
};

/// Reads a whole stream. With OnParseError::Abort the first ParseError
/// propagates; with Skip it is recorded and parsing continues.
ParseOutcome parse_metadata(std::istream& in, OnParseError policy = OnParseError::Skip);

/// Same as parse_metadata but hands each record to `sink` instead of
/// collecting them.
std::vector<std::string> parse_metadata(std::istream& in, OnParseError policy,
                                        const std::function<void(ProductRecord&&)>& sink);

/// Keeps records that are not discontinued and carry both title and group.
std::vector<ProductRecord> filter_valid(std::vector<ProductRecord> records);
bool is_valid_record(const ProductRecord& r) noexcept;

/// Writes records back in the amazon-meta layout. Used for fixtures and
/// round-trip tests; output re-parses to equal records.
void write_metadata(std::ostream& out, const std::vector<ProductRecord>& records,
                    bool with_header = true);
void write_record(std::ostream& out, const ProductRecord& record);

}  // namespace copurchase
