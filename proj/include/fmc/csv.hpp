#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fmc::csv {

/// Splits one CSV line on commas. Quoting is not supported; none of the
/// pipeline's formats need it.
std::vector<std::string_view> split(std::string_view line);

/// Shortest round-trip decimal representation.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

/// Empty field means missing. Throws ParseError on anything else that is not a number.
std::optional<double> parse_optional(std::string_view field);
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

class Reader {
public:
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  /// Index of a header column; throws SchemaError if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  /// Reads the next record into `fields`. Returns false at end of file.
  bool next(std::vector<std::string_view>& fields);
  std::size_t line_number() const noexcept { return line_no_; }

private:
  std::ifstream in_;
  std::string path_;
  std::string line_;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

class Writer {
public:
  explicit Writer(const std::filesystem::path& path);

  Writer& field(std::string_view s);
  Writer& field(double v);
  Writer& field(const std::optional<double>& v);
  Writer& field(long long v);
  Writer& field(int v) { return field(static_cast<long long>(v)); }
  Writer& field(std::size_t v) { return field(static_cast<long long>(v)); }
  void end_row();
  void row(const std::vector<std::string>& fields);

private:
  std::ofstream out_;
  bool first_ = true;
};

} // namespace fmc::csv
