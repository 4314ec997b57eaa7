#include "fmc/csv.hpp"

#include <charconv>
#include <cmath>

#include "fmc/errors.hpp"

namespace fmc::csv {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

double parse_double(std::string_view field) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::optional<double> parse_optional(std::string_view field) {
  if (field.empty() || field == "\r") {
    return std::nullopt;
  }
  return parse_double(field);
}

long long parse_int(std::string_view field) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("not an integer: '" + std::string(field) + "'");
  }
  return value;
}

Reader::Reader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
  if (!in_) {
    throw Error("cannot open " + path_);
  }
  if (!std::getline(in_, line_)) {
    throw SchemaError("empty file " + path_);
  }
  ++line_no_;
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();
  for (auto f : split(line_)) {
    header_.emplace_back(f);
  }
}

bool Reader::has_column(std::string_view name) const {
  for (const auto& h : header_) {
    if (h == name) return true;
  }
  return false;
}

std::size_t Reader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw SchemaError(path_ + ": missing column '" + std::string(name) + "'");
}

bool Reader::next(std::vector<std::string_view>& fields) {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.empty()) continue;
    fields = split(line_);
    return true;
  }
  return false;
}

Writer::Writer(const std::filesystem::path& path) : out_(path) {
  if (!out_) {
    throw Error("cannot write " + path.string());
  }
}

Writer& Writer::field(std::string_view s) {
  if (!first_) out_ << ',';
  out_ << s;
  first_ = false;
  return *this;
}

Writer& Writer::field(double v) { return field(std::string_view(format_double(v))); }

Writer& Writer::field(const std::optional<double>& v) {
  return field(std::string_view(format_optional(v)));
}

Writer& Writer::field(long long v) { return field(std::string_view(std::to_string(v))); }

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

void Writer::row(const std::vector<std::string>& fields) {
  for (const auto& f : fields) field(std::string_view(f));
  end_row();
}

} // namespace fmc::csv
