// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/data.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eqsw/errors.hpp"

namespace eqsw {

namespace {

bool is_binary(double a) { return a == 0.0 || a == 1.0; }

// RFC-4180: split one record, honoring quoted fields. The reader accepts
// both LF and CRLF line ends; the writer always emits CRLF.
std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_number(const std::string& s, const std::string& context) {
  const char* b = s.data();
  const char* e = b + s.size();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ConfigError("bad numeric field '" + s + "' in " + context);
  if (!std::isfinite(v)) throw ConfigError("non-finite value in " + context);
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> expect_header(const std::string& line,
                                       const std::vector<std::string>& fixed,
                                       const std::string& path) {
  std::vector<std::string> cols = split_csv_record(line);
  if (cols.size() < fixed.size() )
    throw ConfigError("header of " + path + " has too few columns");
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (cols[i] != fixed[i])
      throw ConfigError("header of " + path + " must start with " + fixed[i] +
                        " at column " + std::to_string(i + 1) + ", got " + cols[i]);
  for (std::size_t i = fixed.size(); i < cols.size(); ++i) {
    std::string want = "l" + std::to_string(i - fixed.size() + 1);
    if (cols[i] != want)
      throw ConfigError("header of " + path + ": expected covariate column " + want + ", got " +
                        cols[i]);
  }
  return cols;
}

}  // namespace

int first_treated_time(const std::vector<TimePoint>& records) {
  for (const TimePoint& r : records)
    if (r.a == 1.0) return r.k;
  return kNeverTreated;
}

void validate_point(const std::vector<PointRow>& rows) {
  if (rows.empty()) throw ConfigError("point dataset is empty");
  std::size_t m = rows[0].l.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const PointRow& r = rows[i];
    if (!std::isfinite(r.y) || !r.l.all_finite())
      throw ConfigError("non-finite value at data row " + std::to_string(i + 1));
    if (!is_binary(r.a))
      throw ConfigError("treatment must be 0 or 1 at data row " + std::to_string(i + 1));
    if (r.l.size() != m) throw ConfigError("inconsistent covariate count across rows");
  }
}

void validate_long(const std::vector<PersonHistory>& persons) {
  if (persons.empty()) throw ConfigError("longitudinal dataset is empty");
  for (const PersonHistory& p : persons) {
    if (p.records.empty()) throw ConfigError("person " + p.id + " has no records");
    std::size_t m = p.records[0].l.size();
    for (std::size_t j = 0; j < p.records.size(); ++j) {
      const TimePoint& r = p.records[j];
      if (r.k != int(j))
        throw UnorderedRecords("person " + p.id + ": expected time " + std::to_string(j) +
                               ", got " + std::to_string(r.k));
      if (!is_binary(r.a)) throw ConfigError("person " + p.id + ": treatment must be 0 or 1");
      if (!r.l.all_finite()) throw ConfigError("person " + p.id + ": non-finite covariate");
      if (r.l.size() != m) throw ConfigError("person " + p.id + ": covariate count varies");
    }
    for (std::size_t j = 1; j < p.records.size(); ++j)
      if (p.records[j - 1].a == 1.0 && p.records[j].a != 1.0)
        throw ConfigError("person " + p.id + ": treatment is not absorbing");
    if (p.outcomes.size() != p.records.size() + 1)
      throw ConfigError("person " + p.id + ": expected " + std::to_string(p.records.size() + 1) +
                        " outcomes, got " + std::to_string(p.outcomes.size()));
    for (double y : p.outcomes)
      if (!std::isfinite(y)) throw ConfigError("person " + p.id + ": non-finite outcome");
    if (p.t_start != first_treated_time(p.records))
      throw ConfigError("person " + p.id + ": t_start inconsistent with records");
  }
}

std::vector<PointRow> load_point_csv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw ConfigError(path + " is empty");
  std::vector<std::string> cols = expect_header(lines[0], {"y", "a"}, path);
  std::size_t m = cols.size() - 2;
  std::vector<PointRow> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv_record(lines[i]);
    if (f.size() != cols.size())
      throw ConfigError(path + " row " + std::to_string(i) + ": wrong field count");
    std::string ctx = path + " row " + std::to_string(i);
    PointRow r;
    r.y = parse_number(f[0], ctx);
    r.a = parse_number(f[1], ctx);
    r.l = Vector(m);
    for (std::size_t j = 0; j < m; ++j) r.l[j] = parse_number(f[2 + j], ctx);
    rows.push_back(std::move(r));
  }
  validate_point(rows);
  return rows;
}

void save_point_csv(const std::string& path, const std::vector<PointRow>& rows) {
  validate_point(rows);
  std::ostringstream out;
  out << "y,a";
  for (std::size_t j = 0; j < rows[0].l.size(); ++j) out << ",l" << (j + 1);
  out << "\r\n";
  for (const PointRow& r : rows) {
    out << format_number(r.y) << ',' << format_number(r.a);
    for (std::size_t j = 0; j < r.l.size(); ++j) out << ',' << format_number(r.l[j]);
    out << "\r\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << out.str();
}

std::vector<PersonHistory> load_long_csv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw ConfigError(path + " is empty");
  std::vector<std::string> cols = expect_header(lines[0], {"id", "k", "a", "y"}, path);
  std::size_t m = cols.size() - 4;

  std::vector<PersonHistory> persons;
  std::string prev_id;
  std::vector<TimePoint> points;           // includes the final outcome row
  std::vector<double> ys;

  auto flush = [&]() {
    if (points.empty()) return;
    if (points.size() < 2)
      throw ConfigError(path + ": person " + prev_id + " needs at least two rows");
    if (points.back().k != points[points.size() - 2].k + 1)
      throw UnorderedRecords(path + ": person " + prev_id + " final outcome row is not at K+1");
    PersonHistory p;
    p.id = prev_id;
    p.outcomes = ys;
    points.pop_back();  // last row carries only its outcome
    p.records = std::move(points);
    p.t_start = first_treated_time(p.records);
    persons.push_back(std::move(p));
    points.clear();
    ys.clear();
  };

  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv_record(lines[i]);
    if (f.size() != cols.size())
      throw ConfigError(path + " row " + std::to_string(i) + ": wrong field count");
    std::string ctx = path + " row " + std::to_string(i);
    std::string id = f[0];
    if (id != prev_id) {
      for (const PersonHistory& seen : persons)
        if (seen.id == id)
          throw UnorderedRecords(path + ": rows of person " + id + " are not contiguous");
      flush();
      prev_id = id;
    }
    TimePoint tp;
    tp.k = int(parse_number(f[1], ctx));
    tp.a = parse_number(f[2], ctx);
    tp.l = Vector(m);
    for (std::size_t j = 0; j < m; ++j) tp.l[j] = parse_number(f[4 + j], ctx);
    if (!points.empty() && tp.k <= points.back().k)
      throw UnorderedRecords(path + ": person " + id + " times not increasing at row " +
                             std::to_string(i));
    points.push_back(std::move(tp));
    ys.push_back(parse_number(f[3], ctx));
  }
  flush();
  validate_long(persons);
  return persons;
}

void save_long_csv(const std::string& path, const std::vector<PersonHistory>& persons) {
  validate_long(persons);
  std::ostringstream out;
  std::size_t m = persons[0].records[0].l.size();
  out << "id,k,a,y";
  for (std::size_t j = 0; j < m; ++j) out << ",l" << (j + 1);
  out << "\r\n";
  for (const PersonHistory& p : persons) {
    for (std::size_t j = 0; j < p.records.size(); ++j) {
      const TimePoint& r = p.records[j];
      out << csv_escape(p.id) << ',' << r.k << ',' << format_number(r.a) << ','
          << format_number(p.outcomes[j]);
      for (std::size_t c = 0; c < m; ++c) out << ',' << format_number(r.l[c]);
      out << "\r\n";
    }
    // Final row: the k = K+1 outcome, with a and l repeated from k = K.
    const TimePoint& last = p.records.back();
    out << csv_escape(p.id) << ',' << (last.k + 1) << ',' << format_number(last.a) << ','
        << format_number(p.outcomes.back());
    for (std::size_t c = 0; c < m; ++c) out << ',' << format_number(last.l[c]);
    out << "\r\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << out.str();
}

}  // namespace eqsw
