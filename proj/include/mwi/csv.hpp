#ifndef MWI_CSV_HPP_
#define MWI_CSV_HPP_

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mwi {

inline constexpr std::string_view kNotApplicable = "NA";

// Shortest decimal that parses back to the same double.
inline std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

inline std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string(kNotApplicable);
}

// Splits one CSV line on commas. Fields never contain quotes or commas in the
// files this project writes.
std::vector<std::string> split_csv_line(std::string_view line);

// Parses a numeric field; "NA" gives nullopt. Throws DataError otherwise.
std::optional<double> parse_csv_number(std::string_view field);

}  // namespace mwi

#endif  // MWI_CSV_HPP_
