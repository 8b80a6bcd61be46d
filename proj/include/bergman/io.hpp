#pragma once
// Descriptor files, CSV tables and JSON reports.
//
// Descriptors are plain "key = value" lines; '#' starts a comment. A weight
// descriptor needs `kind` plus the parameters of that kind; tabulated weights
// point at a two-column CSV (r, value) through `samples`, resolved relative to
// the descriptor. Symbol descriptors mirror the BoundedSymbol variants.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bergman/analysis.hpp"
#include "bergman/projection.hpp"
#include "bergman/weights.hpp"

namespace bergman {

inline constexpr int kSchemaVersion = 1;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& field, const std::string& message)
      : std::runtime_error(source + ":" + std::to_string(line) + ": field '" + field + "': " + message),
        line_(line),
        field_(field) {}
  [[nodiscard]] int line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

// ---------------------------------------------------------------------------
// key = value documents

class Descriptor {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Descriptor parse(std::istream& in, std::string source = "<descriptor>") {
    Descriptor d;
    d.source_ = std::move(source);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      const std::string text = trim(raw);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) throw ParseError(d.source_, line, text, "expected 'key = value'");
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key.empty()) throw ParseError(d.source_, line, "", "missing key before '='");
      if (d.entries_.count(key)) {
        throw ParseError(d.source_, line, key, "duplicate (first given on line " + std::to_string(d.entries_[key].line) + ")");
      }
      d.entries_[key] = {value, line};
      d.order_.push_back(key);
    }
    return d;
  }

  static Descriptor load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Descriptor d = parse(in, path.string());
    d.base_ = path.parent_path();
    return d;
  }

  [[nodiscard]] const std::string& source() const { return source_; }
  [[nodiscard]] const std::filesystem::path& base_dir() const { return base_; }
  [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) > 0; }
  [[nodiscard]] int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  [[nodiscard]] std::string text(const std::string& key) const { return require(key).value; }
  [[nodiscard]] std::string text_or(const std::string& key, std::string fallback) const {
    return has(key) ? text(key) : std::move(fallback);
  }

  [[nodiscard]] double number(const std::string& key) const {
    const Entry& e = require(key);
    return to_number(e.value, key, e.line);
  }
  [[nodiscard]] double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  /// Whitespace- or comma-separated numbers.
  [[nodiscard]] std::vector<double> numbers(const std::string& key) const {
    const Entry& e = require(key);
    std::vector<double> out;
    std::string token;
    std::istringstream ss(e.value);
    while (ss >> token) {
      std::istringstream parts(token);
      std::string piece;
      while (std::getline(parts, piece, ',')) {
        if (!piece.empty()) out.push_back(to_number(piece, key, e.line));
      }
    }
    if (out.empty()) throw ParseError(source_, e.line, key, "expected at least one number");
    return out;
  }

  [[nodiscard]] std::vector<int> integers(const std::string& key) const {
    std::vector<int> out;
    for (double v : numbers(key)) {
      if (v != std::floor(v) || std::abs(v) > 1e9) {
        throw ParseError(source_, line_of(key), key, "expected integers");
      }
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

  /// Fails on keys outside `allowed`, naming the first offender.
  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& key : order_) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ParseError(source_, entries_.at(key).line, key, "unknown field");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ParseError(source_, line_of(key), key, message);
  }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  [[nodiscard]] const Entry& require(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ParseError(source_, 0, key, "missing");
    return it->second;
  }

  [[nodiscard]] double to_number(const std::string& s, const std::string& key, int line) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ParseError(source_, line, key, "'" + s + "' is not a number");
    }
  }

  std::string source_;
  std::filesystem::path base_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

// ---------------------------------------------------------------------------
// CSV

/// Two numeric columns; an optional non-numeric first line is taken as header.
inline std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> a;
  std::vector<double> b;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = raw.find(',');
    if (comma == std::string::npos) throw ParseError(path.string(), line, "row", "expected two comma-separated columns");
    const std::string first = raw.substr(0, comma);
    const std::string second = raw.substr(comma + 1);
    char* end = nullptr;
    const double x = std::strtod(first.c_str(), &end);
    const bool numeric = end != first.c_str();
    if (!numeric && a.empty() && line == 1) continue;  // header
    char* end2 = nullptr;
    const double y = std::strtod(second.c_str(), &end2);
    if (!numeric) throw ParseError(path.string(), line, "r", "'" + first + "' is not a number");
    if (end2 == second.c_str()) throw ParseError(path.string(), line, "value", "'" + second + "' is not a number");
    a.push_back(x);
    b.push_back(y);
  }
  return {std::move(a), std::move(b)};
}

/// 12 significant digits, shortest form that reads back to the same value.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Rounds to 12 significant digits so the JSON serializer's shortest
/// round-trip output is stable and diffable.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_number(v).c_str(), nullptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
    write_row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("CsvWriter: row width differs from header");
    write_row(cells);
  }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"\n") != std::string::npos) {
        out_ << '"';
        for (char ch : c) out_ << (ch == '"' ? std::string("\"\"") : std::string(1, ch));
        out_ << '"';
      } else {
        out_ << c;
      }
    }
    out_ << '\n';
  }

  std::ostream& out_;
  std::size_t columns_;
};

// ---------------------------------------------------------------------------
// Descriptors to library objects

inline RadialWeight weight_from_descriptor(const Descriptor& d) {
  const std::string kind = d.text("kind");
  const std::string label = d.text_or("label", "");
  auto finite = [&](const char* key, double v) {
    if (!std::isfinite(v)) d.fail(key, "must be finite");
    return v;
  };
  try {
    if (kind == "standard") {
      d.only({"kind", "label", "alpha"});
      return RadialWeight::standard(finite("alpha", d.number("alpha")), label);
    }
    if (kind == "exponential") {
      d.only({"kind", "label", "c", "beta"});
      return RadialWeight::exponential(finite("c", d.number("c")), finite("beta", d.number("beta")), label);
    }
    if (kind == "logarithmic") {
      d.only({"kind", "label", "gamma"});
      return RadialWeight::logarithmic(finite("gamma", d.number("gamma")), label);
    }
    if (kind == "tabulated") {
      d.only({"kind", "label", "samples"});
      const std::filesystem::path file = d.base_dir() / d.text("samples");
      auto [r, v] = read_two_column_csv(file);
      return RadialWeight::tabulated(std::move(r), std::move(v), label.empty() ? "tabulated:" + file.filename().string() : label);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    // constructor-level validation: attribute it to the kind line
    d.fail("kind", e.what());
  }
  d.fail("kind", "unknown weight kind '" + kind + "' (standard, exponential, logarithmic, tabulated)");
}

inline RadialWeight load_weight(const std::filesystem::path& path) { return weight_from_descriptor(Descriptor::load(path)); }

inline BoundedSymbol symbol_from_descriptor(const Descriptor& d, int n) {
  const std::string kind = d.text("kind");
  auto index = [&](const char* key) {
    std::vector<int> v = d.integers(key);
    if (static_cast<int>(v.size()) != n) d.fail(key, "expected " + std::to_string(n) + " entries for n = " + std::to_string(n));
    for (int a : v) {
      if (a < 0) d.fail(key, "entries must be >= 0");
    }
    return v;
  };
  if (kind == "monomial") {
    d.only({"kind", "index"});
    return BoundedSymbol::monomial(index("index"));
  }
  if (kind == "conj_monomial") {
    d.only({"kind", "index"});
    return BoundedSymbol::conj_monomial(index("index"));
  }
  if (kind == "radial_indicator") {
    d.only({"kind", "r_lo", "r_hi"});
    const double lo = d.number("r_lo");
    const double hi = d.number("r_hi");
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) d.fail("r_hi", "need 0 <= r_lo < r_hi <= 1");
    return BoundedSymbol::radial_indicator(lo, hi);
  }
  if (kind == "unimodular_phase") {
    d.only({"kind", "holomorphic", "antiholomorphic"});
    return BoundedSymbol::unimodular_phase(index("holomorphic"), index("antiholomorphic"));
  }
  if (kind == "custom") {
    // values file: one "re,im" row per grid point in (radius, slice modulus, angle) order
    d.only({"kind", "radius_nodes", "modulus_nodes", "angles", "values"});
    const auto angles = d.integers("angles");
    if (angles.size() != 1 || angles[0] < 1) d.fail("angles", "expected one positive integer");
    auto [re, im] = read_two_column_csv(d.base_dir() / d.text("values"));
    std::vector<Complex> values(re.size());
    for (std::size_t i = 0; i < re.size(); ++i) values[i] = {re[i], im[i]};
    try {
      return BoundedSymbol::custom(CustomSymbol::from_grid(d.numbers("radius_nodes"), d.numbers("modulus_nodes"), angles[0],
                                                           std::move(values)));
    } catch (const std::invalid_argument& e) {
      d.fail("values", e.what());
    }
  }
  d.fail("kind", "unknown symbol kind '" + kind +
                     "' (monomial, conj_monomial, radial_indicator, unimodular_phase, custom)");
}

inline BoundedSymbol load_symbol(const std::filesystem::path& path, int n) {
  return symbol_from_descriptor(Descriptor::load(path), n);
}

// ---------------------------------------------------------------------------
// JSON reports

using Json = nlohmann::ordered_json;

inline Json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round12(v);
}

inline Json to_json(const DiagnosticsReport& r) {
  Json j;
  j["criterion_id"] = r.criterion_id;
  j["verdict"] = to_string(r.verdict);
  j["estimated_constant"] = json_number(r.estimated_constant);
  j["last_quartile_slope"] = json_number(r.last_quartile_slope);
  j["window_min"] = json_number(r.window_min);
  j["window_max"] = json_number(r.window_max);
  j["c0_ratio"] = r.c0_ratio ? json_number(*r.c0_ratio) : Json(nullptr);
  Json ev = Json::array();
  for (const auto& e : r.evidence) {
    ev.push_back({{"parameter", json_number(e.parameter)}, {"ratio", json_number(e.ratio)},
                  {"log_ratio", json_number(e.log_ratio)}, {"flagged", e.flagged}});
  }
  j["evidence"] = std::move(ev);
  j["notes"] = r.notes;
  return j;
}

inline Json to_json(std::span<const ProfilePoint> profile, const char* parameter_name, const char* value_name) {
  Json a = Json::array();
  for (const auto& p : profile) a.push_back({{parameter_name, json_number(p.parameter)}, {value_name, json_number(p.value)}});
  return a;
}

inline Json to_json(const TrendVerdict& t) {
  return {{"slope", json_number(t.slope)}, {"max_value", json_number(t.max_value)}, {"divergent", t.divergent},
          {"bounded", t.bounded}};
}

inline Json to_json(const TheoremReport& r) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = "theorem";
  j["weight_label"] = r.weight_label;
  j["n"] = r.n;
  j["conclusion"] = to_string(r.conclusion);
  j["dhat_verdict"] = to_json(r.dhat_verdict);
  j["moment_verdict"] = to_json(r.moment_verdict);
  j["functional_profile"] = to_json(r.functional_profile, "r", "M");
  j["majorant_profile"] = to_json(r.majorant_profile, "r", "U");
  j["lower_profile"] = to_json(r.lower_profile, "r", "value");
  j["cesaro_profile"] = to_json(r.cesaro_profile, "N", "value");
  j["functional_trend"] = to_json(r.functional_trend);
  j["cesaro_trend"] = to_json(r.cesaro_trend);
  j["sandwich_lower"] = json_number(r.sandwich_lower);
  j["sandwich_upper"] = json_number(r.sandwich_upper);
  j["notes"] = r.notes;
  j["failures"] = r.failures;
  return j;
}

/// Serialized form used by every command: 2-space indent, trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

namespace detail {

inline void expect(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("report schema: " + what);
}

inline void check_profile(const Json& j, const char* key, const char* p, const char* v) {
  expect(j.contains(key) && j[key].is_array(), std::string(key) + " must be an array");
  for (const auto& e : j[key]) {
    expect(e.is_object() && e.contains(p) && e.contains(v), std::string(key) + " entries need " + p + " and " + v);
    expect(e[p].is_number() && (e[v].is_number() || e[v].is_null()), std::string(key) + " entries must be numeric");
  }
}

inline void check_diagnostics(const Json& j) {
  expect(j.is_object(), "diagnostics must be an object");
  for (const char* key : {"criterion_id", "verdict"}) expect(j.contains(key) && j[key].is_string(), std::string(key) + " must be text");
  const std::string v = j["verdict"];
  expect(v == "IN_CLASS" || v == "NOT_IN_CLASS" || v == "INCONCLUSIVE", "unknown verdict " + v);
  expect(j.contains("evidence") && j["evidence"].is_array(), "evidence must be an array");
  expect(j.contains("notes") && j["notes"].is_array(), "notes must be an array");
}

}  // namespace detail

/// Structural check of an emitted report; throws naming the first violation.
inline void validate_report(const Json& j) {
  using detail::expect;
  expect(j.is_object(), "top level must be an object");
  expect(j.contains("schema_version") && j["schema_version"] == kSchemaVersion, "schema_version must be 1");
  expect(j.contains("report") && j["report"].is_string(), "report kind missing");
  const std::string kind = j["report"];
  if (kind == "theorem") {
    expect(j["weight_label"].is_string(), "weight_label must be text");
    const std::string c = j["conclusion"];
    expect(c == "CONSISTENT_BOUNDED" || c == "CONSISTENT_UNBOUNDED" || c == "INCONSISTENT" || c == "INCONCLUSIVE",
           "unknown conclusion " + c);
    detail::check_diagnostics(j["dhat_verdict"]);
    detail::check_diagnostics(j["moment_verdict"]);
    detail::check_profile(j, "functional_profile", "r", "M");
    detail::check_profile(j, "majorant_profile", "r", "U");
    detail::check_profile(j, "cesaro_profile", "N", "value");
  } else if (kind == "diagnose") {
    expect(j.contains("reports") && j["reports"].is_array() && !j["reports"].empty(), "reports must be a nonempty array");
    for (const auto& r : j["reports"]) detail::check_diagnostics(r);
  } else if (kind == "table") {
    expect(j.contains("columns") && j["columns"].is_array(), "columns must be an array");
    expect(j.contains("rows") && j["rows"].is_array(), "rows must be an array");
    for (const auto& row : j["rows"]) expect(row.is_array() && row.size() == j["columns"].size(), "row width differs from columns");
  } else {
    expect(false, "unknown report kind " + kind);
  }
}

}  // namespace bergman
