#include "copurchase/meta_parser.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace copurchase {

namespace {

constexpr std::string_view kWhitespace = " \t\r";

std::string_view trim_left(std::string_view s) {
  const auto pos = s.find_first_not_of(kWhitespace);
  return pos == std::string_view::npos ? std::string_view{} : s.substr(pos);
}

std::string_view trim(std::string_view s) {
  s = trim_left(s);
  const auto pos = s.find_last_not_of(kWhitespace);
  return pos == std::string_view::npos ? std::string_view{} : s.substr(0, pos + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  s = trim(s);
  Int value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  double value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool valid_asin(std::string_view asin) {
  return asin.size() == 10 &&
         std::all_of(asin.begin(), asin.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
         });
}

/// Value after `label:` with the single separating space removed.
std::string_view field_value(std::string_view field, std::size_t label_len) {
  std::string_view v = field.substr(label_len);
  if (!v.empty() && v.front() == ' ') v.remove_prefix(1);
  return v;
}

// Input via zlib's gz* API, which also passes plain files through untouched.
class GzipStreambuf : public std::streambuf {
 public:
  explicit GzipStreambuf(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (file_ == nullptr) throw DataError("cannot open metadata file: " + path);
    gzbuffer(file_, 1 << 17);
  }
  ~GzipStreambuf() override {
    if (file_ != nullptr) gzclose(file_);
  }
  GzipStreambuf(const GzipStreambuf&) = delete;
  GzipStreambuf& operator=(const GzipStreambuf&) = delete;

 protected:
  int_type underflow() override {
    if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
    const int n = gzread(file_, buffer_, sizeof buffer_);
    if (n < 0) {
      int errnum = 0;
      throw DataError(std::string("gzip read error: ") + gzerror(file_, &errnum));
    }
    if (n == 0) return traits_type::eof();
    setg(buffer_, buffer_, buffer_ + n);
    return traits_type::to_int_type(*gptr());
  }

 private:
  gzFile file_;
  char buffer_[1 << 16];
};

class GzipIstream : public std::istream {
 public:
  explicit GzipIstream(const std::string& path) : std::istream(nullptr), buf_(path) {
    rdbuf(&buf_);
  }

 private:
  GzipStreambuf buf_;
};

}  // namespace

Group Group::from_label(std::string_view label) {
  if (label == "Book") return {Kind::Book, {}};
  if (label == "DVD") return {Kind::DVD, {}};
  if (label == "Music") return {Kind::Music, {}};
  if (label == "Video") return {Kind::Video, {}};
  return {Kind::Other, std::string(label)};
}

std::string Group::label() const {
  switch (kind) {
    case Kind::Book: return "Book";
    case Kind::DVD: return "DVD";
    case Kind::Music: return "Music";
    case Kind::Video: return "Video";
    case Kind::Other: return other;
  }
  return other;
}

std::vector<std::int64_t> CategoryPath::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(levels.size());
  for (const auto& level : levels) out.push_back(level.cat_id);
  return out;
}

CategoryPath parse_category_line(std::string_view line) {
  line = trim(line);
  if (line.empty() || line.front() != '|') {
    throw DataError("category line must start with '|': \"" + std::string(line) + "\"");
  }
  line.remove_prefix(1);

  CategoryPath path;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t bar = line.find('|', start);
    const std::string_view token =
        line.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);

    const std::size_t open = token.rfind('[');
    const bool closed = !token.empty() && token.back() == ']';
    std::optional<std::int64_t> id;
    if (open != std::string_view::npos && closed) {
      id = parse_int<std::int64_t>(token.substr(open + 1, token.size() - open - 2));
    }
    if (!id || *id < 0) {
      throw DataError("category token without a bracketed integer id: \"" + std::string(token) +
                      "\"");
    }
    path.levels.push_back({sanitize_utf8(token.substr(0, open)), *id});

    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return path;
}

std::string sanitize_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  const auto* s = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    std::size_t len = 0;
    std::uint32_t min_cp = 0;
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      min_cp = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      min_cp = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      min_cp = 0x10000;
    }
    bool ok = len != 0 && i + len <= n;
    std::uint32_t cp = 0;
    if (ok) {
      cp = c & (0xFF >> (len + 1));
      for (std::size_t k = 1; k < len; ++k) {
        if ((s[i + k] & 0xC0) != 0x80) {
          ok = false;
          break;
        }
        cp = (cp << 6) | (s[i + k] & 0x3F);
      }
    }
    ok = ok && cp >= min_cp && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
    if (ok) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      out.append("\xEF\xBF\xBD");
      ++i;
    }
  }
  return out;
}

MetadataReader::MetadataReader(std::istream& in) : in_(in) {}

bool MetadataReader::read_line() {
  if (have_line_) return true;
  if (eof_) return false;
  if (!std::getline(in_, line_)) {
    eof_ = true;
    return false;
  }
  offset_ = next_offset_;
  next_offset_ += line_.size() + (in_.eof() ? 0 : 1);
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();
  have_line_ = true;
  return true;
}

void MetadataReader::skip_to_next_record() {
  while (read_line()) {
    if (starts_with(line_, "Id:")) return;
    have_line_ = false;
  }
}

void MetadataReader::fail(const std::string& what, std::int64_t id, std::uint64_t offset) {
  skip_to_next_record();
  throw ParseError(what, id, offset);
}

std::optional<ProductRecord> MetadataReader::next() {
  // Header lines and blank separators before the next record.
  for (;;) {
    if (!read_line()) return std::nullopt;
    const std::string_view line = line_;
    if (starts_with(line, "Id:")) break;
    if (trim(line).empty()) {
      have_line_ = false;
      continue;
    }
    if (records_read_ == 0) {
      if (starts_with(line, "Total items:")) {
        declared_total_ = parse_int<std::int64_t>(line.substr(12));
      }
      have_line_ = false;
      continue;
    }
    const std::uint64_t at = offset_;
    have_line_ = false;
    fail("expected 'Id:' at start of record, got \"" + std::string(line.substr(0, 40)) + "\"", -1,
         at);
  }

  ProductRecord rec;
  {
    const std::uint64_t at = offset_;
    const auto id = parse_int<std::int64_t>(std::string_view(line_).substr(3));
    have_line_ = false;
    if (!id) fail("bad Id line", -1, at);
    rec.id = *id;
  }

  if (!read_line()) throw ParseError("truncated record: missing ASIN line", rec.id, next_offset_);
  {
    const std::uint64_t at = offset_;
    const std::string_view line = line_;
    if (!starts_with(line, "ASIN:")) fail("expected 'ASIN:' line", rec.id, at);
    const std::string_view asin = trim(line.substr(5));
    if (!valid_asin(asin)) fail("invalid ASIN \"" + std::string(asin) + "\"", rec.id, at);
    rec.asin = std::string(asin);
    have_line_ = false;
  }

  bool in_reviews = false;
  while (read_line()) {
    const std::string_view raw = line_;
    if (trim(raw).empty()) {
      have_line_ = false;
      break;
    }
    if (starts_with(raw, "Id:")) break;  // next record without a blank separator

    const std::uint64_t at = offset_;
    const std::string_view field = trim_left(raw);

    if (field == "discontinued product") {
      rec.discontinued = true;
    } else if (starts_with(field, "title:")) {
      rec.title = sanitize_utf8(field_value(field, 6));
    } else if (starts_with(field, "group:")) {
      rec.group = Group::from_label(sanitize_utf8(trim(field.substr(6))));
    } else if (starts_with(field, "salesrank:")) {
      const auto rank = parse_int<std::int64_t>(field.substr(10));
      if (!rank) fail("bad salesrank", rec.id, at);
      rec.salesrank = *rank;
    } else if (starts_with(field, "similar:")) {
      const auto tokens = split_ws(field.substr(8));
      const auto count = tokens.empty() ? std::nullopt : parse_int<std::size_t>(tokens[0]);
      if (!count) fail("bad similar count", rec.id, at);
      if (*count != tokens.size() - 1) {
        fail("similar count " + std::to_string(*count) + " does not match " +
                 std::to_string(tokens.size() - 1) + " listed ASINs",
             rec.id, at);
      }
      std::unordered_set<std::string_view> seen;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        if (!valid_asin(tokens[k])) {
          fail("invalid similar ASIN \"" + std::string(tokens[k]) + "\"", rec.id, at);
        }
        if (seen.insert(tokens[k]).second) rec.similar_asins.emplace_back(tokens[k]);
      }
    } else if (starts_with(field, "categories:")) {
      const auto count = parse_int<std::size_t>(field.substr(11));
      if (!count) fail("bad categories count", rec.id, at);
      have_line_ = false;
      for (std::size_t k = 0; k < *count; ++k) {
        if (!read_line()) {
          throw ParseError("truncated record: expected " + std::to_string(*count) +
                               " category lines, got " + std::to_string(k),
                           rec.id, next_offset_);
        }
        const std::string_view cat = trim(line_);
        if (cat.empty() || cat.front() != '|') {
          const std::uint64_t cat_at = offset_;
          fail("expected " + std::to_string(*count) + " category lines, got " + std::to_string(k),
               rec.id, cat_at);
        }
        try {
          rec.category_paths.push_back(parse_category_line(cat));
        } catch (const DataError& e) {
          const std::uint64_t cat_at = offset_;
          have_line_ = false;
          fail(e.what(), rec.id, cat_at);
        }
        have_line_ = false;
      }
      continue;
    } else if (starts_with(field, "reviews:")) {
      // "reviews: total: 2  downloaded: 2  avg rating: 5"
      const auto tokens = split_ws(field.substr(8));
      ReviewSummary summary;
      bool ok = tokens.size() == 7 && tokens[0] == "total:" && tokens[2] == "downloaded:" &&
                tokens[4] == "avg" && tokens[5] == "rating:";
      if (ok) {
        const auto total = parse_int<int>(tokens[1]);
        const auto downloaded = parse_int<int>(tokens[3]);
        const auto avg = parse_real(tokens[6]);
        ok = total && downloaded && avg;
        if (ok) summary = {*total, *downloaded, *avg};
      }
      if (ok) rec.review_summary = summary;
      in_reviews = true;
    } else if (in_reviews) {
      // Review detail rows are consumed without interpretation.
    } else {
      fail("unknown field \"" + std::string(field.substr(0, 40)) + "\"", rec.id, at);
    }
    have_line_ = false;
  }

  if (eof_ && !rec.discontinued && !in_reviews) {
    throw ParseError("truncated record: stream ended before reviews summary", rec.id,
                     next_offset_);
  }
  ++records_read_;
  return rec;
}

std::unique_ptr<std::istream> open_metadata_file(const std::string& path) {
  return std::make_unique<GzipIstream>(path);
}

std::vector<std::string> parse_metadata(std::istream& in, OnParseError policy,
                                        const std::function<void(ProductRecord&&)>& sink) {
  std::vector<std::string> errors;
  MetadataReader reader(in);
  for (;;) {
    try {
      auto rec = reader.next();
      if (!rec) break;
      sink(std::move(*rec));
    } catch (const ParseError& e) {
      if (policy == OnParseError::Abort) throw;
      errors.emplace_back(e.what());
    }
  }
  return errors;
}

ParseOutcome parse_metadata(std::istream& in, OnParseError policy) {
  ParseOutcome outcome;
  MetadataReader reader(in);
  for (;;) {
    try {
      auto rec = reader.next();
      if (!rec) break;
      outcome.records.push_back(std::move(*rec));
    } catch (const ParseError& e) {
      if (policy == OnParseError::Abort) throw;
      outcome.errors.emplace_back(e.what());
    }
  }
  outcome.declared_total = reader.declared_total();
  return outcome;
}

bool is_valid_record(const ProductRecord& r) noexcept {
  return !r.discontinued && r.title && !trim(*r.title).empty() && r.group;
}

std::vector<ProductRecord> filter_valid(std::vector<ProductRecord> records) {
  std::erase_if(records, [](const ProductRecord& r) { return !is_valid_record(r); });
  return records;
}

void write_record(std::ostream& out, const ProductRecord& r) {
  out << "Id:   " << r.id << '\n' << "ASIN: " << r.asin << '\n';
  if (r.discontinued) out << "  discontinued product\n";
  if (r.title) out << "  title: " << *r.title << '\n';
  if (r.group) out << "  group: " << r.group->label() << '\n';
  if (r.salesrank) out << "  salesrank: " << *r.salesrank << '\n';
  if (!r.discontinued || !r.similar_asins.empty()) {
    out << "  similar: " << r.similar_asins.size();
    for (const auto& a : r.similar_asins) out << "  " << a;
    out << '\n';
  }
  if (!r.discontinued || !r.category_paths.empty()) {
    out << "  categories: " << r.category_paths.size() << '\n';
    for (const auto& path : r.category_paths) {
      out << "   ";
      for (const auto& level : path.levels) out << '|' << level.name << '[' << level.cat_id << ']';
      out << '\n';
    }
  }
  if (r.review_summary) {
    char avg[32];
    const auto res = std::to_chars(avg, avg + sizeof avg, r.review_summary->avg_rating);
    out << "  reviews: total: " << r.review_summary->total
        << "  downloaded: " << r.review_summary->downloaded << "  avg rating: "
        << std::string_view(avg, static_cast<std::size_t>(res.ptr - avg)) << '\n';
  } else if (!r.discontinued) {
    out << "  reviews: total: 0  downloaded: 0  avg rating: 0\n";
  }
  out << '\n';
}

void write_metadata(std::ostream& out, const std::vector<ProductRecord>& records,
                    bool with_header) {
  if (with_header) {
    out << "# Full information about Amazon Share the Love products\n"
        << "Total items: " << records.size() << "\n\n";
  }
  for (const auto& r : records) write_record(out, r);
}

}  // namespace copurchase
