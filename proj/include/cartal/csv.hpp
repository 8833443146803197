#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cartal::csv {

/// Splits one CSV line. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Six significant digits, the serialization used by every output table.
std::string num(double value);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws SchemaError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
void write(const Table& table, const std::filesystem::path& path);

}  // namespace cartal::csv
