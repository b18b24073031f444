#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmelab/errors.hpp"
#include "mmelab/polynomial.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/sampler.hpp"

namespace mmelab {

// A small subset of TOML: [table] and [table.sub] headers, key = value lines,
// integers, floats, strings, booleans and (nested, multi-line) arrays, '#'
// comments. A ';' ends a key/value pair just like a newline.
namespace config {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> v;
  int line = 0;

  bool is_number() const { return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v); }

  double as_double() const {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw ConfigError(line, "expected a number");
  }
  std::int64_t as_int() const {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw ConfigError(line, "expected an integer");
  }
  const std::string& as_string() const {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError(line, "expected a string");
  }
  bool as_bool() const {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError(line, "expected true or false");
  }
  const Array& as_array() const {
    if (const auto* a = std::get_if<Array>(&v)) return *a;
    throw ConfigError(line, "expected an array");
  }
};

/// Flat view of a document: "table.key" -> value.
using Document = std::map<std::string, Value>;

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Document parse() {
    Document doc;
    std::string table;
    while (true) {
      skip_space_and_comments(true);
      if (at_end()) break;
      if (peek() == ';') {
        ++pos_;
        continue;
      }
      if (peek() == '[') {
        ++pos_;
        skip_space_and_comments(false);
        table = parse_dotted_key();
        skip_space_and_comments(false);
        expect(']');
        for (const auto& [k, v] : doc) {
          if (k == table) throw error("table [" + table + "] collides with a key");
        }
        if (!tables_.insert(table).second) throw error("duplicate table [" + table + "]");
        end_of_statement();
        continue;
      }
      const int key_line = line_;
      const std::string key = parse_dotted_key();
      skip_space_and_comments(false);
      expect('=');
      skip_space_and_comments(false);
      Value val = parse_value();
      val.line = key_line;
      const std::string full = table.empty() ? key : table + "." + key;
      if (doc.count(full)) throw ConfigError(key_line, "duplicate key '" + full + "'");
      doc.emplace(full, std::move(val));
      end_of_statement();
    }
    return doc;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }

  ConfigError error(const std::string& what) const { return ConfigError(line_, what); }

  void expect(char c) {
    if (peek() != c) throw error(std::string("expected '") + c + "'" + found());
    ++pos_;
  }

  std::string found() const {
    if (at_end()) return ", found end of input";
    return std::string(", found '") + peek() + "'";
  }

  // Newlines are only skipped when allowed (between statements, inside arrays).
  void skip_space_and_comments(bool newlines) {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (!at_end() && peek() != '\n') ++pos_;
      } else if (c == '\n' && newlines) {
        ++pos_;
        ++line_;
      } else {
        break;
      }
    }
  }

  void end_of_statement() {
    skip_space_and_comments(false);
    if (at_end()) return;
    if (peek() == '\n' || peek() == ';') {
      if (peek() == '\n') ++line_;
      ++pos_;
      return;
    }
    throw error("unexpected text after value" + found());
  }

  std::string parse_dotted_key() {
    std::string key;
    while (true) {
      const std::size_t start = pos_;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
      if (pos_ == start) throw error("expected a key" + found());
      key += s_.substr(start, pos_ - start);
      if (peek() != '.') break;
      ++pos_;
      key += '.';
    }
    return key;
  }

  Value parse_value() {
    Value out;
    out.line = line_;
    const char c = peek();
    if (c == '[') {
      ++pos_;
      Array arr;
      while (true) {
        skip_space_and_comments(true);
        if (peek() == ']') {
          ++pos_;
          break;
        }
        arr.push_back(parse_value());
        skip_space_and_comments(true);
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        skip_space_and_comments(true);
        expect(']');
        break;
      }
      out.v = std::move(arr);
      return out;
    }
    if (c == '"') {
      ++pos_;
      std::string str;
      while (true) {
        if (at_end() || peek() == '\n') throw error("unterminated string");
        char ch = s_[pos_++];
        if (ch == '"') break;
        if (ch == '\\') {
          if (at_end()) throw error("unterminated string");
          const char e = s_[pos_++];
          switch (e) {
            case 'n': ch = '\n'; break;
            case 't': ch = '\t'; break;
            case '"': ch = '"'; break;
            case '\\': ch = '\\'; break;
            default: throw error(std::string("unknown escape \\") + e);
          }
        }
        str += ch;
      }
      out.v = std::move(str);
      return out;
    }
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      out.v = true;
      return out;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      out.v = false;
      return out;
    }
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                         peek() == '.' || peek() == '_')) {
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) throw error("expected a value" + found());
    std::erase(tok, '_');
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (*b == '+') ++b;
    const bool looks_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "nan";
    if (!looks_float) {
      std::int64_t i = 0;
      const auto r = std::from_chars(b, e, i);
      if (r.ec == std::errc{} && r.ptr == e) {
        out.v = i;
        return out;
      }
    }
    double d = 0.0;
    const auto r = std::from_chars(b, e, d);
    if (r.ec != std::errc{} || r.ptr != e) throw error("malformed number '" + tok + "'");
    if (!std::isfinite(d)) throw error("non-finite number '" + tok + "'");
    out.v = d;
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> tables_;
};

inline Document parse(std::string_view text) { return Parser(text).parse(); }

}  // namespace config

/// One experiment: a map, the grids it is labeled on, and the sampler and
/// measure parameters.
struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<cplx> num;
  std::vector<cplx> den{cplx{1.0}};
  cplx center{};
  double half_width = 2.0;
  int resolution = 1024;                         // main atlas
  std::vector<int> ladder_resolutions{512, 1024, 2048};
  std::vector<double> epsilons{0.05, 0.02, 0.01};  // paired with ladder_resolutions
  double residual_epsilon = 0.02;
  int max_iter = 2000;
  int k_max = 4;
  int burn_in = kDefaultBurnIn;
  std::int64_t n_samples = 100000;
  std::uint64_t rng_seed = 1;
  std::uint64_t second_seed = 2;  // independent replica for the stability check
  int invariance_probes = 200;
  std::vector<std::string> ray_angles;
  std::vector<std::pair<std::string, std::string>> ray_pairs;
  std::string output_dir = "out";

  RationalMap map() const { return RationalMap(Polynomial(num), Polynomial(den)); }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::vector<cplx> coefficient_list(const config::Value& v) {
  std::vector<cplx> out;
  for (const auto& c : v.as_array()) {
    const auto& pair = c.as_array();
    if (pair.size() != 2) throw ConfigError(c.line, "coefficient must be a [re, im] pair");
    out.emplace_back(pair[0].as_double(), pair[1].as_double());
  }
  if (out.empty()) throw ConfigError(v.line, "coefficient list is empty");
  return out;
}

inline std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

}  // namespace detail

/// Builds a config from parsed text. Unknown keys and invalid values are
/// reported with their line number.
inline ExperimentConfig config_from_document(const config::Document& doc) {
  ExperimentConfig cfg;
  std::set<std::string> used;
  auto get = [&](const std::string& key) -> const config::Value* {
    const auto it = doc.find(key);
    if (it == doc.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };
  auto positive_int = [](const config::Value& v, std::int64_t lo, std::int64_t hi) {
    const auto i = v.as_int();
    if (i < lo || i > hi) {
      throw ConfigError(v.line, "value " + std::to_string(i) + " outside [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
    }
    return i;
  };

  if (const auto* v = get("name")) cfg.name = v->as_string();
  const auto* num = get("map.num");
  if (!num) throw ConfigError(0, "missing required key map.num");
  cfg.num = detail::coefficient_list(*num);
  if (const auto* v = get("map.den")) cfg.den = detail::coefficient_list(*v);
  if (const auto* v = get("window.center")) {
    const auto& a = v->as_array();
    if (a.size() != 2) throw ConfigError(v->line, "window.center must be [re, im]");
    cfg.center = {a[0].as_double(), a[1].as_double()};
  }
  if (const auto* v = get("window.half_width")) {
    cfg.half_width = v->as_double();
    if (!(cfg.half_width > 0.0)) throw ConfigError(v->line, "half_width must be positive");
  }
  if (const auto* v = get("atlas.resolution")) cfg.resolution = static_cast<int>(positive_int(*v, 64, 16384));
  if (const auto* v = get("atlas.max_iter")) cfg.max_iter = static_cast<int>(positive_int(*v, 1, 1000000));
  if (const auto* v = get("atlas.ladder")) {
    cfg.ladder_resolutions.clear();
    for (const auto& r : v->as_array()) cfg.ladder_resolutions.push_back(static_cast<int>(positive_int(r, 64, 16384)));
  }
  if (const auto* v = get("cycles.k_max")) cfg.k_max = static_cast<int>(positive_int(*v, 1, 6));
  if (const auto* v = get("sampler.burn_in")) cfg.burn_in = static_cast<int>(positive_int(*v, 1, 100000000));
  if (const auto* v = get("sampler.n")) cfg.n_samples = positive_int(*v, 1, 1000000000);
  if (const auto* v = get("sampler.rng_seed")) cfg.rng_seed = static_cast<std::uint64_t>(positive_int(*v, 0, INT64_MAX));
  if (const auto* v = get("sampler.second_seed")) {
    cfg.second_seed = static_cast<std::uint64_t>(positive_int(*v, 0, INT64_MAX));
  }
  if (const auto* v = get("measure.epsilons")) {
    cfg.epsilons.clear();
    for (const auto& e : v->as_array()) {
      const double x = e.as_double();
      if (!(x > 0.0)) throw ConfigError(e.line, "epsilon must be positive");
      cfg.epsilons.push_back(x);
    }
  }
  if (const auto* v = get("measure.residual_epsilon")) cfg.residual_epsilon = v->as_double();
  if (const auto* v = get("measure.invariance_probes")) {
    cfg.invariance_probes = static_cast<int>(positive_int(*v, 1, 1000000));
  }
  if (const auto* v = get("rays.angles")) {
    for (const auto& a : v->as_array()) cfg.ray_angles.push_back(a.as_string());
  }
  if (const auto* v = get("rays.pairs")) {
    for (const auto& p : v->as_array()) {
      const auto& pair = p.as_array();
      if (pair.size() != 2) throw ConfigError(p.line, "ray pair must list two angles");
      cfg.ray_pairs.emplace_back(pair[0].as_string(), pair[1].as_string());
    }
  }
  if (const auto* v = get("output.dir")) cfg.output_dir = v->as_string();

  for (const auto& [key, value] : doc) {
    if (!used.count(key)) throw ConfigError(value.line, "unknown key '" + key + "'");
  }
  if (cfg.ladder_resolutions.size() != cfg.epsilons.size()) {
    throw ConfigError(0, "atlas.ladder and measure.epsilons must have the same length");
  }
  try {
    (void)cfg.map();
  } catch (const Error& e) {
    throw ConfigError(num->line, std::string("invalid map: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig parse_config(std::string_view text) { return config_from_document(config::parse(text)); }

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Text form that parses back to an identical config (doubles are written in
/// shortest round-trip form).
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto coeffs = [&](const std::vector<cplx>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      os << (i ? ", " : "") << '[' << format_double(v[i].real()) << ", " << format_double(v[i].imag()) << ']';
    }
    os << "]\n";
  };
  auto as_float = [](double x) {
    std::string s = format_double(x);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  };
  os << "name = " << detail::quoted(cfg.name) << "\n\n[map]\nnum = ";
  coeffs(cfg.num);
  os << "den = ";
  coeffs(cfg.den);
  os << "\n[window]\ncenter = [" << as_float(cfg.center.real()) << ", " << as_float(cfg.center.imag()) << "]\n";
  os << "half_width = " << as_float(cfg.half_width) << "\n\n[atlas]\nresolution = " << cfg.resolution << "\nladder = [";
  for (std::size_t i = 0; i < cfg.ladder_resolutions.size(); ++i) os << (i ? ", " : "") << cfg.ladder_resolutions[i];
  os << "]\nmax_iter = " << cfg.max_iter << "\n\n[cycles]\nk_max = " << cfg.k_max << "\n\n[sampler]\nburn_in = "
     << cfg.burn_in << "\nn = " << cfg.n_samples << "\nrng_seed = " << cfg.rng_seed
     << "\nsecond_seed = " << cfg.second_seed << "\n\n[measure]\nepsilons = [";
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) os << (i ? ", " : "") << as_float(cfg.epsilons[i]);
  os << "]\nresidual_epsilon = " << as_float(cfg.residual_epsilon)
     << "\ninvariance_probes = " << cfg.invariance_probes << "\n\n[rays]\nangles = [";
  for (std::size_t i = 0; i < cfg.ray_angles.size(); ++i) os << (i ? ", " : "") << detail::quoted(cfg.ray_angles[i]);
  os << "]\npairs = [";
  for (std::size_t i = 0; i < cfg.ray_pairs.size(); ++i) {
    os << (i ? ", " : "") << '[' << detail::quoted(cfg.ray_pairs[i].first) << ", "
       << detail::quoted(cfg.ray_pairs[i].second) << ']';
  }
  os << "]\n\n[output]\ndir = " << detail::quoted(cfg.output_dir) << '\n';
  return os.str();
}

}  // namespace mmelab
