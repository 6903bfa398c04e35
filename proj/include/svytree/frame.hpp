#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svytree {

enum class VariableKind { Categorical, Numeric };
enum class VariableRole { Predictor, Study };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::Numeric;
  VariableRole role = VariableRole::Predictor;
  /// Ordered, distinct level labels. Empty for numeric variables.
  std::vector<std::string> levels;

  static VariableSpec categorical(std::string name,
                                  std::vector<std::string> levels,
                                  VariableRole role = VariableRole::Predictor);
  static VariableSpec numeric(std::string name,
                              VariableRole role = VariableRole::Study);

  bool is_categorical() const noexcept {
    return kind == VariableKind::Categorical;
  }
  std::optional<std::size_t> level_index(std::string_view label) const;

  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

/// Throws SchemaMismatch unless names are unique, categorical levels are
/// distinct and non-empty, and at least one predictor and one study variable
/// are declared.
void validate_schema(std::span<const VariableSpec> specs);

/// Immutable finite population in column-major form. Categorical columns
/// hold the level index (0, 1, ...) as a double so that every column can be
/// viewed through the same span type.
class Frame {
 public:
  Frame(std::vector<VariableSpec> specs,
        std::vector<std::vector<double>> columns);

  std::size_t size() const noexcept { return rows_; }
  std::size_t num_columns() const noexcept { return specs_.size(); }

  const std::vector<VariableSpec>& specs() const noexcept { return specs_; }
  const VariableSpec& spec(std::size_t col) const { return specs_.at(col); }

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws UnknownVariable.
  std::size_t column_index(std::string_view name) const;

  std::span<const double> column(std::size_t col) const {
    return columns_.at(col);
  }
  std::span<const double> column(std::string_view name) const {
    return column(column_index(name));
  }

  std::vector<std::size_t> predictor_columns() const;
  std::vector<std::size_t> study_columns() const;

  /// Exact-as-possible population total of a numeric column.
  double total(std::size_t col) const;

  /// Display form of one cell (level label or shortest round-trip number).
  std::string format_value(std::size_t col, std::size_t row) const;

 private:
  std::vector<VariableSpec> specs_;
  std::vector<std::vector<double>> columns_;
  std::size_t rows_ = 0;
};

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Parses a finite number; returns nullopt on any trailing garbage.
std::optional<double> parse_number(std::string_view text);

Frame read_frame_csv(std::istream& in, std::vector<VariableSpec> schema);
Frame load_frame(const std::filesystem::path& path,
                 std::vector<VariableSpec> schema);

void write_frame_csv(std::ostream& out, const Frame& frame);
void write_frame(const std::filesystem::path& path, const Frame& frame);

}  // namespace svytree
