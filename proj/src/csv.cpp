#include "mwi/csv.hpp"

#include <charconv>

#include "mwi/error.hpp"

namespace mwi {

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_csv_number(std::string_view field) {
  if (field == kNotApplicable) return std::nullopt;
  double value = 0.0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw DataError("not a number: '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace mwi
