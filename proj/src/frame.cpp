#include "svytree/frame.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "svytree/error.hpp"
#include "svytree/io.hpp"
#include "svytree/numeric.hpp"

namespace svytree {

VariableSpec VariableSpec::categorical(std::string name,
                                       std::vector<std::string> levels,
                                       VariableRole role) {
  return VariableSpec{std::move(name), VariableKind::Categorical, role,
                      std::move(levels)};
}

VariableSpec VariableSpec::numeric(std::string name, VariableRole role) {
  return VariableSpec{std::move(name), VariableKind::Numeric, role, {}};
}

std::optional<std::size_t> VariableSpec::level_index(
    std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return i;
  }
  return std::nullopt;
}

void validate_schema(std::span<const VariableSpec> specs) {
  std::set<std::string> names;
  bool has_predictor = false;
  bool has_study = false;
  for (const auto& s : specs) {
    if (s.name.empty()) throw Error(Errc::SchemaMismatch, "empty variable name");
    if (!names.insert(s.name).second) {
      throw Error(Errc::SchemaMismatch, "duplicate variable '" + s.name + "'");
    }
    if (s.is_categorical()) {
      if (s.levels.empty()) {
        throw Error(Errc::SchemaMismatch,
                    "categorical variable '" + s.name + "' has no levels");
      }
      std::set<std::string> seen;
      for (const auto& l : s.levels) {
        if (l.empty()) {
          throw Error(Errc::SchemaMismatch,
                      "empty level label in '" + s.name + "'");
        }
        if (!seen.insert(l).second) {
          throw Error(Errc::SchemaMismatch,
                      "duplicate level '" + l + "' in '" + s.name + "'");
        }
      }
      if (s.role == VariableRole::Study) {
        throw Error(Errc::SchemaMismatch,
                    "study variable '" + s.name + "' must be numeric");
      }
    } else if (!s.levels.empty()) {
      throw Error(Errc::SchemaMismatch,
                  "numeric variable '" + s.name + "' lists levels");
    }
    has_predictor |= s.role == VariableRole::Predictor;
    has_study |= s.role == VariableRole::Study;
  }
  if (!has_predictor) throw Error(Errc::SchemaMismatch, "no predictor variable");
  if (!has_study) throw Error(Errc::SchemaMismatch, "no study variable");
}

Frame::Frame(std::vector<VariableSpec> specs,
             std::vector<std::vector<double>> columns)
    : specs_(std::move(specs)), columns_(std::move(columns)) {
  validate_schema(specs_);
  if (columns_.size() != specs_.size()) {
    throw Error(Errc::SchemaMismatch, "column count does not match schema");
  }
  rows_ = columns_.front().size();
  if (rows_ == 0) throw Error(Errc::EmptyPopulation, "frame has no rows");
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != rows_) {
      throw Error(Errc::SchemaMismatch,
                  "column '" + specs_[c].name + "' has ragged length");
    }
    const auto& spec = specs_[c];
    for (std::size_t r = 0; r < rows_; ++r) {
      const double v = columns_[c][r];
      if (!std::isfinite(v)) {
        throw Error(Errc::NonNumeric, "row " + std::to_string(r + 1) +
                                          ", column " + spec.name);
      }
      if (spec.is_categorical() &&
          (v < 0 || v >= static_cast<double>(spec.levels.size()) ||
           v != std::floor(v))) {
        throw Error(Errc::UnknownLevel, "column " + spec.name + ", code " +
                                            format_number(v));
      }
    }
  }
}

std::optional<std::size_t> Frame::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Frame::column_index(std::string_view name) const {
  if (auto i = find_column(name)) return *i;
  throw Error(Errc::UnknownVariable,
              "no variable named '" + std::string(name) + "'");
}

std::vector<std::size_t> Frame::predictor_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].role == VariableRole::Predictor) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Frame::study_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].role == VariableRole::Study) out.push_back(i);
  }
  return out;
}

double Frame::total(std::size_t col) const {
  return compensated_sum(column(col));
}

std::string Frame::format_value(std::size_t col, std::size_t row) const {
  const double v = columns_.at(col).at(row);
  const auto& s = specs_[col];
  if (s.is_categorical()) return s.levels[static_cast<std::size_t>(v)];
  return format_number(v);
}

std::string format_number(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == ".";
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Frame read_frame_csv(std::istream& in, std::vector<VariableSpec> schema) {
  validate_schema(schema);
  std::string line;
  if (!std::getline(in, line) || strip(line).empty()) {
    throw Error(Errc::MissingHeader, "input has no header line");
  }
  // UTF-8 byte order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(strip(line));
  for (auto& h : header) h = strip(h);

  // For each schema column, the header position it is read from.
  std::vector<std::size_t> source(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    bool found = false;
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h] == schema[c].name) {
        source[c] = h;
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(Errc::SchemaMismatch,
                  "header lacks column '" + schema[c].name + "'");
    }
  }

  std::vector<std::vector<double>> columns(schema.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& spec = schema[c];
      const std::string cell =
          source[c] < fields.size() ? strip(fields[source[c]]) : std::string();
      auto where = [&] {
        return "row " + std::to_string(row) + ", column " + spec.name;
      };
      if (is_missing(cell) && !(spec.is_categorical() && spec.level_index(cell))) {
        throw Error(Errc::MissingValue, where());
      }
      if (spec.is_categorical()) {
        auto idx = spec.level_index(cell);
        if (!idx) {
          throw Error(Errc::UnknownLevel,
                      where() + ": level '" + cell + "' not in schema");
        }
        columns[c].push_back(static_cast<double>(*idx));
      } else {
        auto v = parse_number(cell);
        if (!v) throw Error(Errc::NonNumeric, where() + ": '" + cell + "'");
        columns[c].push_back(*v);
      }
    }
  }
  if (row == 0) throw Error(Errc::EmptyPopulation, "input has no data rows");
  return Frame(std::move(schema), std::move(columns));
}

Frame load_frame(const std::filesystem::path& path,
                 std::vector<VariableSpec> schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_frame_csv(in, std::move(schema));
}

void write_frame_csv(std::ostream& out, const Frame& frame) {
  const auto& specs = frame.specs();
  for (std::size_t c = 0; c < specs.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(specs[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < frame.size(); ++r) {
    for (std::size_t c = 0; c < specs.size(); ++c) {
      if (c) out << ',';
      out << csv_escape(frame.format_value(c, r));
    }
    out << '\n';
  }
}

void write_frame(const std::filesystem::path& path, const Frame& frame) {
  std::ostringstream ss;
  write_frame_csv(ss, frame);
  write_file_atomic(path, ss.str());
}

}  // namespace svytree
