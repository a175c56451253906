#pragma once

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace compclust {

class GridRefError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GridPrecision { Metres100, Kilometre1, Other };

/// A parsed OS National Grid reference; coordinates are the square centre.
struct GridRef {
  double easting = 0.0;   ///< metres
  double northing = 0.0;  ///< metres
  double square = 0.0;    ///< side of the referenced square, metres
  bool circa = false;     ///< "c." prefix: location less accurate

  GridPrecision precision() const {
    if (square == 100.0) return GridPrecision::Metres100;
    if (square == 1000.0) return GridPrecision::Kilometre1;
    return GridPrecision::Other;
  }

  std::string precision_label() const {
    if (circa) return "circa";
    switch (precision()) {
      case GridPrecision::Metres100: return "100m";
      case GridPrecision::Kilometre1: return "1km";
      case GridPrecision::Other: break;
    }
    return std::to_string(static_cast<long>(square)) + "m";
  }
};

namespace detail {

/// Index in the 25-letter grid alphabet (A..Z without I).
inline int grid_letter(char c, const std::string& text) {
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u < 'A' || u > 'Z') throw GridRefError("grid reference '" + text + "': expected a letter, got '" + c + "'");
  if (u == 'I') throw GridRefError("grid reference '" + text + "': letter I is not used");
  int l = u - 'A';
  if (l > 7) --l;
  return l;
}

}  // namespace detail

/// Parses "SU 230870", "SU2387", "c. SU 2387" and similar. Accepts an even
/// number of digits from 2 to 10 split equally into easting and northing.
inline GridRef parse_osgrid(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  GridRef g;
  if (s.size() >= 2 && (s[0] == 'c' || s[0] == 'C') && s[1] == '.') {
    g.circa = true;
    s.erase(0, 2);
  } else if (s.size() >= 3 && (s[0] == 'c' || s[0] == 'C') && std::isalpha(static_cast<unsigned char>(s[1])) &&
             std::isalpha(static_cast<unsigned char>(s[2]))) {
    g.circa = true;
    s.erase(0, 1);
  }
  if (s.size() < 2) throw GridRefError("grid reference '" + text + "': missing square letters");
  const int l1 = detail::grid_letter(s[0], text);
  const int l2 = detail::grid_letter(s[1], text);
  const std::string digits = s.substr(2);
  for (char c : digits)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw GridRefError("grid reference '" + text + "': unexpected character '" + c + "'");
  if (digits.empty() || digits.size() % 2 != 0 || digits.size() > 10)
    throw GridRefError("grid reference '" + text + "': need an even number of digits (2 to 10), got " +
                       std::to_string(digits.size()));
  const int e100k = ((l1 + 3) % 5) * 5 + l2 % 5;
  const int n100k = (19 - (l1 / 5) * 5) - l2 / 5;
  if (e100k < 0 || e100k > 7 || n100k < 0 || n100k > 12)
    throw GridRefError("grid reference '" + text + "': square letters outside Great Britain");
  const std::size_t half = digits.size() / 2;
  g.square = std::pow(10.0, 5 - static_cast<int>(half));
  const double e = std::stod(digits.substr(0, half)) * g.square;
  const double n = std::stod(digits.substr(half)) * g.square;
  g.easting = e100k * 100000.0 + e + g.square / 2.0;
  g.northing = n100k * 100000.0 + n + g.square / 2.0;
  return g;
}

}  // namespace compclust
