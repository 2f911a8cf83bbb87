#ifndef REDMIX_CSV_HPP_
#define REDMIX_CSV_HPP_

// Comma-separated output: header row, LF line ends, shortest round-trip reals.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace redmix {

inline std::string format_real(double x) {
  if (std::isnan(x))
    return "nan";
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream &out, const std::vector<std::string> &header) : out_(out) {
    columns_ = header.size();
    for (const std::string &h : header)
      field(h);
    end_row();
  }

  CsvWriter &field(std::string_view s) {
    sep();
    out_ << s;
    return *this;
  }
  CsvWriter &field(double x) { return field(std::string_view(format_real(x))); }
  CsvWriter &field(int x) { return field(std::string_view(std::to_string(x))); }
  CsvWriter &field(long x) { return field(std::string_view(std::to_string(x))); }
  CsvWriter &field(unsigned long x) { return field(std::string_view(std::to_string(x))); }
  CsvWriter &field(bool b) { return field(std::string_view(b ? "1" : "0")); }
  CsvWriter &field(const char *s) { return field(std::string_view(s)); }
  CsvWriter &field(const std::string &s) { return field(std::string_view(s)); }
  /// Empty cell when absent.
  CsvWriter &field(const std::optional<double> &x) {
    return x ? field(*x) : field(std::string_view());
  }

  void end_row() {
    if (in_row_ != columns_)
      throw std::logic_error("csv row has " + std::to_string(in_row_) + " fields, header has " +
                             std::to_string(columns_));
    out_ << '\n';
    in_row_ = 0;
  }

 private:
  void sep() {
    if (in_row_++ > 0)
      out_ << ',';
  }

  std::ostream &out_;
  std::size_t columns_ = 0;
  std::size_t in_row_ = 0;
};

} // namespace redmix

#endif // REDMIX_CSV_HPP_
