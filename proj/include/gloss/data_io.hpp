#pragma once

// Trip-record ingestion into hour x day-of-week x week x zone count tensors,
// dataset statistics, zone whitelists and event lists.
//
// Calendar convention: with d = whole days since the epoch date,
//   week index = d / 7 (weeks 1..W are blocks of 7 days from the epoch)
//   day index  = d % 7
// so mode 2 is aligned to the epoch's weekday, not to ISO weeks.

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gloss/error.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

// ---------------------------------------------------------------------------
// CSV

// Reads RFC 4180 style records: comma separated, double-quote quoting with ""
// escapes, quoted fields may span lines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Line number where the last returned record started (1-based).
  Index line() const { return record_line_; }

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_;
    record_line_ = line_;
    std::string field;
    bool quoted = false;
    for (;;) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
          if (ch == '"') {
            if (i + 1 < line.size() && line[i + 1] == '"') {
              field.push_back('"');
              ++i;
            } else {
              quoted = false;
            }
          } else {
            field.push_back(ch);
          }
        } else if (ch == '"') {
          quoted = true;
        } else if (ch == ',') {
          fields.push_back(std::move(field));
          field.clear();
        } else if (ch != '\r' || i + 1 != line.size()) {
          field.push_back(ch);
        }
      }
      if (!quoted) break;
      detail::require(static_cast<bool>(std::getline(in_, line)), ErrorKind::io,
                      "CSV: unterminated quoted field starting on line " + std::to_string(record_line_));
      ++line_;
      field.push_back('\n');
    }
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::istream& in_;
  Index line_ = 0;
  Index record_line_ = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// Zones and calendar

class ZoneIndex {
 public:
  ZoneIndex() = default;
  explicit ZoneIndex(std::vector<std::string> ids) : ids_(std::move(ids)) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      detail::require(!ids_[i].empty(), ErrorKind::invalid_argument, "zone ids must be non-empty");
      const bool inserted = lookup_.emplace(ids_[i], static_cast<Index>(i)).second;
      detail::require(inserted, ErrorKind::invalid_argument, "duplicate zone id '" + ids_[i] + "'");
    }
  }

  // One id per line; blank lines and lines starting with '#' are ignored.
  static ZoneIndex read(std::istream& in) {
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
      auto id = trim(line);
      if (id.empty() || id.front() == '#') continue;
      ids.push_back(std::move(id));
    }
    return ZoneIndex(std::move(ids));
  }

  Index size() const { return static_cast<Index>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<Index> find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> lookup_;
};

inline std::optional<std::chrono::sys_days> parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream is{std::string(trim(s))};
  if (!(is >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-') return std::nullopt;
  is >> std::ws;
  if (!is.eof()) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  std::ostringstream os;
  os << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
     << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day());
  return os.str();
}

struct CellTime {
  Index hour = 0;  // 0..23
  Index day = 0;   // 0..6, relative to the epoch weekday
  Index week = 0;  // 0-based
};

struct Calendar {
  std::chrono::sys_days epoch{std::chrono::year{2018} / 1 / 1};
  Index weeks = 52;

  static Calendar from_string(std::string_view date, Index weeks = 52) {
    auto d = parse_date(date);
    detail::require(d.has_value(), ErrorKind::invalid_argument, "invalid epoch date '" + std::string(date) + "'");
    return Calendar{*d, weeks};
  }

  // Day/week cell of a calendar date, or nullopt outside the covered weeks.
  std::optional<CellTime> locate(std::chrono::sys_days date, Index hour = 0) const {
    const auto days = (date - epoch).count();
    if (days < 0 || days >= 7 * weeks) return std::nullopt;
    return CellTime{hour, static_cast<Index>(days % 7), static_cast<Index>(days / 7)};
  }

  std::chrono::sys_days date_of(Index day, Index week) const {
    return epoch + std::chrono::days{week * 7 + day};
  }
};

// Parses a timestamp with a strftime-style format into (date, hour).
inline std::optional<std::pair<std::chrono::sys_days, Index>> parse_timestamp(const std::string& s,
                                                                              const std::string& format) {
  std::tm tm{};
  std::istringstream is(trim(s));
  is >> std::get_time(&tm, format.c_str());
  if (is.fail()) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{tm.tm_year + 1900},
                                        std::chrono::month{static_cast<unsigned>(tm.tm_mon + 1)},
                                        std::chrono::day{static_cast<unsigned>(tm.tm_mday)}};
  if (!ymd.ok() || tm.tm_hour < 0 || tm.tm_hour > 23) return std::nullopt;
  return std::pair{std::chrono::sys_days{ymd}, static_cast<Index>(tm.tm_hour)};
}

// ---------------------------------------------------------------------------
// Ingestion

enum class BadRowPolicy { fail, skip };

struct IngestOptions {
  std::string timestamp_column = "timestamp";
  std::string zone_column = "zone_id";
  std::string timestamp_format = "%Y-%m-%d %H:%M:%S";
  Calendar calendar;
  BadRowPolicy bad_rows = BadRowPolicy::fail;
};

struct IngestReport {
  Index accepted = 0;
  Index out_of_range = 0;  // outside the covered weeks
  Index unknown_zone = 0;  // not in the whitelist
  Index malformed = 0;
  std::vector<Index> malformed_lines;
};

struct IngestResult {
  DenseTensor counts;  // 24 x 7 x weeks x zones
  SupportSet omega;
  IngestReport report;
};

inline IngestResult ingest(std::istream& in, const ZoneIndex& zones, const IngestOptions& opt = {}) {
  detail::require(zones.size() >= 1, ErrorKind::invalid_argument, "zone whitelist is empty");
  detail::require(opt.calendar.weeks >= 1, ErrorKind::invalid_argument, "calendar must cover >= 1 week");
  IngestResult r{DenseTensor({24, 7, opt.calendar.weeks, zones.size()}), {}, {}};
  r.omega = SupportSet::full(r.counts.shape());

  CsvReader csv(in);
  std::vector<std::string> row;
  if (!csv.next(row)) return r;  // empty stream
  std::optional<std::size_t> ts_col, zone_col;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto name = trim(row[i]);
    if (name == opt.timestamp_column) ts_col = i;
    if (name == opt.zone_column) zone_col = i;
  }
  detail::require(ts_col && zone_col, ErrorKind::shape_mismatch,
                  "CSV header must contain '" + opt.timestamp_column + "' and '" + opt.zone_column + "' columns");

  auto bad_row = [&](const std::string& why) {
    if (opt.bad_rows == BadRowPolicy::fail)
      detail::fail(ErrorKind::io, "CSV line " + std::to_string(csv.line()) + ": " + why);
    ++r.report.malformed;
    r.report.malformed_lines.push_back(csv.line());
  };

  while (csv.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;  // blank line
    if (row.size() <= std::max(*ts_col, *zone_col)) {
      bad_row("expected at least " + std::to_string(std::max(*ts_col, *zone_col) + 1) + " fields");
      continue;
    }
    const auto stamp = parse_timestamp(row[*ts_col], opt.timestamp_format);
    if (!stamp) {
      bad_row("unparseable timestamp '" + row[*ts_col] + "'");
      continue;
    }
    const auto zone = zones.find(trim(row[*zone_col]));
    if (!zone) {
      ++r.report.unknown_zone;
      continue;
    }
    const auto cell = opt.calendar.locate(stamp->first, stamp->second);
    if (!cell) {
      ++r.report.out_of_range;
      continue;
    }
    r.counts(cell->hour, cell->day, cell->week, *zone) += 1.0;
    ++r.report.accepted;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
  std::vector<double> mean_row_std;  // per mode: mean over rows of the unfolding's row std
  double sparsity = 0.0;             // fraction of zero entries
  double max = 0.0;
  double mean = 0.0;
};

// Standard deviations are population (divide by the row length).
inline DatasetStats dataset_stats(const DenseTensor& t) {
  DatasetStats s;
  for (int n = 0; n < t.order(); ++n) {
    const Matrix x = unfold(t, n);
    const Vector mean = x.rowwise().mean();
    const Vector sd = ((x.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
    s.mean_row_std.push_back(sd.mean());
  }
  s.sparsity = static_cast<double>((t.array() == 0.0).count()) / static_cast<double>(t.size());
  s.max = t.vec().maxCoeff();
  s.mean = t.vec().mean();
  return s;
}

// ---------------------------------------------------------------------------
// Events

struct Event {
  std::string zone_id;
  std::chrono::sys_days date;
  Index start_hour = 0;  // inclusive, 0..23
  Index end_hour = 0;    // inclusive, start..23
  std::string name;
};

using EventList = std::vector<Event>;

// CSV with header zone_id,date,start_hour,end_hour,name.
inline EventList read_events(std::istream& in) {
  CsvReader csv(in);
  std::vector<std::string> row;
  EventList events;
  if (!csv.next(row)) return events;
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < row.size(); ++i) col[trim(row[i])] = i;
  for (const char* name : {"zone_id", "date", "start_hour", "end_hour", "name"})
    detail::require(col.count(name) != 0, ErrorKind::shape_mismatch,
                    std::string("events CSV is missing column '") + name + "'");
  while (csv.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    const std::string where = "events CSV line " + std::to_string(csv.line());
    detail::require(row.size() >= col.size(), ErrorKind::io, where + ": too few fields");
    Event e;
    e.zone_id = trim(row[col["zone_id"]]);
    auto date = parse_date(row[col["date"]]);
    detail::require(date.has_value(), ErrorKind::io, where + ": invalid date");
    e.date = *date;
    try {
      e.start_hour = std::stol(trim(row[col["start_hour"]]));
      e.end_hour = std::stol(trim(row[col["end_hour"]]));
    } catch (const std::exception&) {
      detail::fail(ErrorKind::io, where + ": hours must be integers");
    }
    detail::require(e.start_hour >= 0 && e.start_hour <= e.end_hour && e.end_hour < 24, ErrorKind::io,
                    where + ": hours must satisfy 0 <= start <= end < 24");
    e.name = row[col["name"]];
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace gloss
