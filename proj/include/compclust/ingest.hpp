#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "osgrid.hpp"
#include "pattern.hpp"

namespace compclust {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// One row of the settlements table.
struct RawRecord {
  int line = 0;
  std::string county;
  std::string place;
  std::string parish;
  std::string gridref;
  std::string date;
};

/// Reads a `county,place,parish,gridref,date` table (header required; column
/// order taken from the header, names case-insensitive).
inline std::vector<RawRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty input");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[lower(trim(header[c]))] = c;
  for (const char* need : {"place", "gridref"})
    if (!col.count(need)) throw InputError(std::string("line 1: header lacks column '") + need + "'");
  auto field = [&](const std::vector<std::string>& f, const char* name) -> std::string {
    auto it = col.find(name);
    return it != col.end() && it->second < f.size() ? trim(f[it->second]) : std::string();
  };
  std::vector<RawRecord> out;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    RawRecord r{ln, field(f, "county"), field(f, "place"), field(f, "parish"), field(f, "gridref"), field(f, "date")};
    if (r.place.empty()) throw InputError("line " + std::to_string(ln) + ": empty placename");
    out.push_back(std::move(r));
  }
  return out;
}

/// Variant spellings mapped to one canonical placename (case-insensitive).
class AliasTable {
 public:
  void add(const std::string& variant, const std::string& canonical) { map_[lower(trim(variant))] = trim(canonical); }

  std::string canonical(const std::string& name) const {
    auto it = map_.find(lower(trim(name)));
    return it != map_.end() ? it->second : trim(name);
  }

  /// Groups treated as one placename in the settlements data.
  static AliasTable defaults() {
    AliasTable a;
    for (const char* v : {"Aston", "Easton"}) a.add(v, "Aston/Easton");
    for (const char* v : {"Charlton", "Charlcot"}) a.add(v, "Charlton/Charlcot");
    for (const char* v : {"Draycot", "Drayton"}) a.add(v, "Draycot/Drayton");
    for (const char* v : {"Walton", "Walcot"}) a.add(v, "Walton/Walcot");
    for (const char* v : {"Burton", "Bourton", "Bierton", "Buerton"}) a.add(v, "Burton");
    return a;
  }

  /// Lines `variant,canonical`; blank lines and lines starting with # ignored.
  void load(std::istream& in) {
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto f = split_csv_line(t);
      if (f.size() != 2 || trim(f[0]).empty() || trim(f[1]).empty())
        throw InputError("merge list line " + std::to_string(ln) + ": expected 'variant,canonical'");
      add(f[0], f[1]);
    }
  }

 private:
  std::map<std::string, std::string> map_;
};

/// Orders names numerically when both are integers, else lexicographically.
inline bool numeric_aware_less(const std::string& a, const std::string& b) {
  auto is_int = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin() + (s[0] == '-' ? 1 : 0), s.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
           s != "-";
  };
  if (is_int(a) && is_int(b)) {
    const long long x = std::stoll(a), y = std::stoll(b);
    if (x != y) return x < y;
  }
  return a < b;
}

struct CleaningEntry {
  std::string type;
  std::vector<int> lines;  ///< input lines (or row numbers) merged together
  Point2 location;         ///< resulting point (km)
  std::string reason;
};

struct IngestOptions {
  double merge_threshold_km = 3.0;
  double buffer_km = 3.0;               ///< added around the bounding box when no window is given
  std::optional<Window> window;
  std::vector<std::string> known_types;  ///< if set, fixes the type order
  bool reject_unknown = false;           ///< with known_types: unknown names are errors
};

struct IngestResult {
  PointPattern pattern;
  std::vector<CleaningEntry> log;
  std::vector<int> source_lines;  ///< first input line behind each point
};

namespace detail {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct Located {
  int line;
  std::string type;
  Point2 x;
};

inline IngestResult build_pattern(const std::vector<Located>& recs, const IngestOptions& opt) {
  IngestResult res;
  std::vector<std::string> types = opt.known_types;
  if (types.empty()) {
    for (const auto& r : recs) types.push_back(r.type);
    std::sort(types.begin(), types.end(), numeric_aware_less);
    types.erase(std::unique(types.begin(), types.end()), types.end());
  }
  std::map<std::string, int> type_index;
  for (std::size_t t = 0; t < types.size(); ++t) type_index[types[t]] = static_cast<int>(t);
  std::vector<int> mark(recs.size());
  for (std::size_t r = 0; r < recs.size(); ++r) {
    auto it = type_index.find(recs[r].type);
    if (it == type_index.end()) {
      if (opt.reject_unknown)
        throw InputError("line " + std::to_string(recs[r].line) + ": unknown placename '" + recs[r].type + "'");
      type_index[recs[r].type] = static_cast<int>(types.size());
      types.push_back(recs[r].type);
      it = type_index.find(recs[r].type);
      res.log.push_back({recs[r].type, {recs[r].line}, recs[r].x, "new category"});
    }
    mark[r] = it->second;
  }

  // transitive merge of same-type records closer than the threshold
  DisjointSets ds(recs.size());
  if (opt.merge_threshold_km > 0.0) {
    const double t2 = opt.merge_threshold_km * opt.merge_threshold_km;
    for (std::size_t a = 0; a < recs.size(); ++a)
      for (std::size_t b = a + 1; b < recs.size(); ++b)
        if (mark[a] == mark[b] && squared_distance(recs[a].x, recs[b].x) < t2)
          ds.unite(static_cast<int>(a), static_cast<int>(b));
  }
  std::map<int, std::vector<int>> groups;
  for (std::size_t r = 0; r < recs.size(); ++r) groups[ds.find(static_cast<int>(r))].push_back(static_cast<int>(r));

  std::vector<MarkedPoint> pts;
  for (const auto& [root, members] : groups) {
    Point2 c{};
    for (int r : members) c = c + recs[r].x;
    c = (1.0 / members.size()) * c;
    pts.push_back({c, mark[root]});
    res.source_lines.push_back(recs[root].line);
    if (members.size() > 1) {
      CleaningEntry e{types[mark[root]], {}, c, ""};
      for (int r : members) e.lines.push_back(recs[r].line);
      e.reason = members.size() == 2 ? "same placename within threshold: merged to midpoint"
                                     : "same placename within threshold (transitive): merged to centroid";
      res.log.push_back(std::move(e));
    }
  }
  Window w;
  if (opt.window) {
    w = *opt.window;
  } else if (!pts.empty()) {
    Rect b{pts[0].x.x, pts[0].x.y, pts[0].x.x, pts[0].x.y};
    for (const auto& p : pts) {
      b.x0 = std::min(b.x0, p.x.x);
      b.y0 = std::min(b.y0, p.x.y);
      b.x1 = std::max(b.x1, p.x.x);
      b.y1 = std::max(b.y1, p.x.y);
    }
    const double buf = std::max(opt.buffer_km, 1e-6);
    w = Window(Rect{b.x0 - buf, b.y0 - buf, b.x1 + buf, b.y1 + buf}, buf);
  }
  res.pattern = PointPattern(std::move(pts), std::max<int>(1, static_cast<int>(types.size())), w);
  res.pattern.type_names = std::move(types);
  return res;
}

}  // namespace detail

/// Placenames canonicalised, grid references converted to km at the square
/// centre, same-type records within the threshold merged (transitively).
inline IngestResult ingest_and_clean(const std::vector<RawRecord>& records, const AliasTable& aliases,
                                     const IngestOptions& opt = {}) {
  std::vector<detail::Located> recs;
  recs.reserve(records.size());
  for (const auto& r : records) {
    GridRef g;
    try {
      g = parse_osgrid(r.gridref);
    } catch (const GridRefError& e) {
      throw InputError("line " + std::to_string(r.line) + ": " + e.what());
    }
    recs.push_back({r.line, aliases.canonical(r.place), {g.easting / 1000.0, g.northing / 1000.0}});
  }
  return detail::build_pattern(recs, opt);
}

/// Reads the minimal `x_km,y_km,type` format (header required).
inline IngestResult read_minimal_csv(std::istream& in, const IngestOptions& opt = {}) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || lower(trim(header[0])) != "x_km" || lower(trim(header[1])) != "y_km" ||
      lower(trim(header[2])) != "type")
    throw InputError("line 1: expected header 'x_km,y_km,type'");
  std::vector<detail::Located> recs;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 3) throw InputError("line " + std::to_string(ln) + ": expected 3 fields");
    double x, y;
    try {
      std::size_t px, py;
      x = std::stod(f[0], &px);
      y = std::stod(f[1], &py);
      if (trim(f[0].substr(px)) != "" || trim(f[1].substr(py)) != "") throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("line " + std::to_string(ln) + ": malformed coordinates");
    }
    recs.push_back({ln, trim(f[2]), {x, y}});
  }
  return detail::build_pattern(recs, opt);
}

/// Detects the format from the header line and reads accordingly.
inline IngestResult read_pattern_file(const std::string& path, const AliasTable& aliases, const IngestOptions& opt) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  if (lower(trim(split_csv_line(first).at(0))) == "x_km") return read_minimal_csv(in, opt);
  return ingest_and_clean(read_records_csv(in), aliases, opt);
}

/// Writes `x_km,y_km,type` with round-trip precision.
inline void write_minimal_csv(std::ostream& out, const PointPattern& x) {
  out << "x_km,y_km,type\n";
  char buf[64];
  for (const auto& p : x.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", p.x.x, p.x.y);
    std::string name = x.type_name(p.mark);
    if (name.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : name) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      name = q + "\"";
    }
    out << buf << name << '\n';
  }
}

}  // namespace compclust
