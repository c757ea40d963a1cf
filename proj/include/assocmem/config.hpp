// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration. Files are a TOML subset (tables, dotted keys,
// strings, numbers, booleans, arrays); JSON documents, including run
// manifests, are accepted by the same loader. See docs in README.md for the
// key reference.

#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <limits>
#include <locale>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "assocmem/analysis.hpp"
#include "assocmem/dynamics.hpp"
#include "assocmem/types.hpp"

namespace assocmem {

using Json = nlohmann::ordered_json;

// Raised for malformed or schema-violating configuration. `key` is the full
// dotted name of the offending entry (empty for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// --- TOML subset ------------------------------------------------------------------

namespace toml {

class Parser {
 public:
  explicit Parser(std::string_view text) : src_(text) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    std::string table_name;
    while (!eof()) {
      skip_ws_and_comments(true);
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (!eof() && peek() == '[') fail("arrays of tables are not supported");
        skip_inline_ws();
        const auto path = parse_key_path();
        skip_inline_ws();
        expect(']');
        table_name = join(path);
        table = &descend(root, path);
        if (!table->empty() || seen_tables_.count(table_name)) fail("table [" + table_name + "] defined twice");
        seen_tables_.insert(table_name);
      } else {
        const auto path = parse_key_path();
        skip_inline_ws();
        expect('=');
        skip_inline_ws();
        Json value = parse_value();
        std::vector<std::string> parent(path.begin(), path.end() - 1);
        Json& target = parent.empty() ? *table : descend(*table, parent);
        const std::string full = table_name.empty() ? join(path) : table_name + "." + join(path);
        if (target.contains(path.back())) fail("duplicate key '" + full + "'");
        target[path.back()] = std::move(value);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  std::set<std::string> seen_tables_;

  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  int line() const {
    int n = 1;
    for (std::size_t i = 0; i < pos_ && i < src_.size(); ++i) n += src_[i] == '\n';
    return n;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("", "config syntax error at line " + std::to_string(line()) + ": " + msg);
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : ".") + p;
    return s;
  }

  Json& descend(Json& from, const std::vector<std::string>& path) {
    Json* node = &from;
    for (const auto& k : path) {
      if (!node->contains(k)) (*node)[k] = Json::object();
      node = &(*node)[k];
      if (!node->is_object()) fail("key '" + k + "' is not a table");
    }
    return *node;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_ws_and_comments(bool newlines) {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        ++pos_;
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_inline_ws();
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
    if (!eof() && peek() == '\r') ++pos_;
    if (!eof() && peek() != '\n') fail("unexpected trailing characters");
    if (!eof()) ++pos_;
  }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_key() {
    if (!eof() && (peek() == '"' || peek() == '\'')) return parse_string();
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (start == pos_) fail("expected a key");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key()};
    skip_inline_ws();
    while (!eof() && peek() == '.') {
      ++pos_;
      skip_inline_ws();
      path.push_back(parse_key());
      skip_inline_ws();
    }
    return path;
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      ++pos_;
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (eof()) fail("unterminated escape");
        const char e = peek();
        ++pos_;
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  Json parse_array() {
    expect('[');
    Json arr = Json::array();
    while (true) {
      skip_ws_and_comments(true);
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_and_comments(true);
      if (!eof() && peek() == ',') {
        ++pos_;
      } else if (!eof() && peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json parse_value() {
    if (eof()) fail("missing value");
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    const std::size_t start = pos_;
    while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
           peek() != '#')
      ++pos_;
    std::string tok(src_.substr(start, pos_ - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok)
      if (ch != '_') digits += ch;
    if (digits.empty()) fail("missing value");
    const bool is_float = digits.find_first_of(".eEin") != std::string::npos;
    try {
      std::size_t used = 0;
      if (!is_float) {
        if (digits[0] == '-') {
          const long long v = std::stoll(digits, &used);
          if (used == digits.size()) return v;
        } else {
          const unsigned long long v = std::stoull(digits[0] == '+' ? digits.substr(1) : digits, &used);
          if (used == digits.size() - (digits[0] == '+' ? 1 : 0)) return v;
        }
      } else {
        std::istringstream is(digits);
        is.imbue(std::locale::classic());
        double v = 0.0;
        if (digits == "inf" || digits == "+inf") return std::numeric_limits<double>::infinity();
        if (digits == "-inf") return -std::numeric_limits<double>::infinity();
        if (is >> v && is.peek() == std::char_traits<char>::eof()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }
};

}  // namespace toml

inline Json parse_toml(std::string_view text) { return toml::Parser(text).parse(); }

// JSON if the first significant character is '{', TOML subset otherwise.
inline Json parse_config_text(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError("", std::string("config JSON error: ") + e.what());
    }
  }
  return parse_toml(text);
}

// --- schema --------------------------------------------------------------------

namespace schema {

enum class Kind { Str, UInt, Num, Bool, NumList, NumOrList, IndexListOrStr, NumListOrStr, OptUInt, OptStr };

struct Field {
  std::string key;  // dotted
  Kind kind;
  Json fallback;
  std::vector<std::string> choices{};
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"simulate", "landscape", "phase", "closed_form", "fig1",
                                          "fig2",     "fig3",      "fig4",  "fig5",        "fig6"};
  return c;
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      {"id", Kind::Str, "run"},
      {"command", Kind::Str, "simulate", commands()},
      {"seed", Kind::UInt, 0},
      {"output", Kind::OptStr, nullptr},
      {"embedding.kind", Kind::Str, "orthonormal", {"orthonormal", "correlated_pair", "sphere"}},
      {"embedding.d", Kind::UInt, 2},
      {"embedding.alpha", Kind::Num, 0.0},
      {"embedding.output_scale", Kind::Num, 1.0},
      {"embedding.seed", Kind::OptUInt, nullptr},
      {"task.n", Kind::UInt, 2},
      {"task.m", Kind::UInt, 2},
      {"task.targets", Kind::IndexListOrStr, "identity", {"identity", "modulo"}},
      {"task.freq", Kind::NumListOrStr, "uniform", {"uniform", "zipf", "pair"}},
      {"task.p1", Kind::Num, 0.75},
      {"dynamics.kind", Kind::Str, "GD", {"GD", "GF", "SGD", "SGF"}},
      {"dynamics.eta", Kind::NumOrList, 1.0},
      {"dynamics.batch_size", Kind::UInt, 1},
      {"dynamics.sigma", Kind::NumOrList, 0.0},
      {"dynamics.h", Kind::Num, 1e-2},
      {"dynamics.t_end", Kind::Num, 100},
      {"dynamics.record_every", Kind::Num, 1},
      {"dynamics.record_times", Kind::NumList, Json::array()},
      {"dynamics.gamma", Kind::Str, "none", {"none", "canonical", "two_token"}},
      {"dynamics.sharpness", Kind::Bool, false},
      {"dynamics.atol", Kind::Num, 1e-8},
      {"dynamics.rtol", Kind::Num, 1e-8},
      {"dynamics.divergence_threshold", Kind::Num, 1e12},
      {"dynamics.init", Kind::Str, "zero", {"zero", "gaussian"}},
      {"dynamics.init_scale", Kind::Num, 1.0},
      {"landscape.gamma1", Kind::NumList, Json::array({-10.0, 10.0})},
      {"landscape.gamma2", Kind::NumList, Json::array({-10.0, 10.0})},
      {"landscape.n1", Kind::UInt, 512},
      {"landscape.n2", Kind::UInt, 512},
      {"landscape.basis", Kind::Str, "canonical", {"canonical", "two_token"}},
      {"landscape.sharpness", Kind::Bool, false},
      {"landscape.contours", Kind::NumList, Json::array()},
      {"landscape.overlay", Kind::Bool, false},
      {"phase.axis", Kind::Str, "alpha", {"alpha", "log_ratio"}},
      {"phase.etas", Kind::NumList, Json::array({0.01, 0.1, 1.0, 10.0, 100.0})},
      {"phase.values", Kind::NumList, Json::array({-0.5, 0.0, 0.5, 0.9, 0.99})},
      {"phase.fixed_alpha", Kind::Num, 0.9},
      {"phase.fixed_p1", Kind::Num, 0.75},
      {"phase.cap", Kind::UInt, 1000000},
      {"phase.output_scale", Kind::Num, 1.0},
      {"closed_form.t_end", Kind::Num, 1000.0},
      {"closed_form.points", Kind::UInt, 200},
      {"closed_form.eta", Kind::Num, 1.0},
      {"closed_form.steps", Kind::UInt, 10000},
      {"figure.etas", Kind::NumList, Json::array()},
      {"figure.alphas", Kind::NumList, Json::array()},
      {"figure.dims", Kind::NumList, Json::array()},
      {"figure.log_ratios", Kind::NumList, Json::array()},
      {"figure.replicas", Kind::UInt, 1},
      {"figure.steps", Kind::UInt, 0},
      {"figure.grid", Kind::UInt, 0},
  };
  return f;
}

inline bool is_section(const std::string& name) {
  for (const auto& f : fields())
    if (f.key.rfind(name + ".", 0) == 0) return true;
  return false;
}

inline const Field* find(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

inline bool is_uint(const Json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

inline bool is_num_list(const Json& v) {
  if (!v.is_array()) return false;
  for (const auto& e : v)
    if (!e.is_number()) return false;
  return true;
}

inline void check(const Field& f, const Json& v) {
  auto bad = [&](const std::string& want) {
    throw ConfigError(f.key, "config key '" + f.key + "': expected " + want + ", got " + v.dump());
  };
  auto check_choice = [&] {
    if (f.choices.empty()) return;
    for (const auto& c : f.choices)
      if (v.get<std::string>() == c) return;
    std::string opts;
    for (const auto& c : f.choices) opts += (opts.empty() ? "" : " | ") + c;
    bad("one of " + opts);
  };
  switch (f.kind) {
    case Kind::Str:
      if (!v.is_string()) bad("a string");
      check_choice();
      break;
    case Kind::OptStr:
      if (!v.is_null() && !v.is_string()) bad("a string");
      break;
    case Kind::UInt:
      if (!is_uint(v)) bad("a non-negative integer");
      break;
    case Kind::OptUInt:
      if (!v.is_null() && !is_uint(v)) bad("a non-negative integer");
      break;
    case Kind::Num:
      if (!v.is_number()) bad("a number");
      break;
    case Kind::Bool:
      if (!v.is_boolean()) bad("true or false");
      break;
    case Kind::NumList:
      if (!is_num_list(v)) bad("an array of numbers");
      break;
    case Kind::NumOrList:
      if (!v.is_number() && !(is_num_list(v) && !v.empty())) bad("a number or a non-empty array of numbers");
      break;
    case Kind::IndexListOrStr:
      if (v.is_string()) {
        check_choice();
      } else {
        if (!v.is_array() || v.empty()) bad("a preset name or an array of class indices");
        for (const auto& e : v)
          if (!is_uint(e)) bad("a preset name or an array of class indices");
      }
      break;
    case Kind::NumListOrStr:
      if (v.is_string()) check_choice();
      else if (!is_num_list(v) || v.empty()) bad("a preset name or an array of frequencies");
      break;
  }
}

inline void collect(const Json& node, const std::string& prefix, Json& resolved) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (const Field* f = find(key)) {
      check(*f, it.value());
      const auto dot = f->key.find('.');
      if (dot == std::string::npos) resolved[f->key] = it.value();
      else resolved[f->key.substr(0, dot)][f->key.substr(dot + 1)] = it.value();
    } else if (it.value().is_object() && is_section(key)) {
      collect(it.value(), key, resolved);
    } else {
      throw ConfigError(key, "unknown config key '" + key + "'");
    }
  }
}

}  // namespace schema

// Every schema key with its default, in schema order.
inline Json default_config() {
  Json out = Json::object();
  for (const auto& f : schema::fields()) {
    const auto dot = f.key.find('.');
    if (dot == std::string::npos) out[f.key] = f.fallback;
    else out[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.fallback;
  }
  return out;
}

// Validates `doc` against the schema and overlays it on the defaults. A run
// manifest (an object with a "config" member) resolves to its config.
inline Json resolve_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a table/object");
  const Json& body = (doc.contains("config") && doc.contains("version")) ? doc.at("config") : doc;
  if (!body.is_object()) throw ConfigError("config", "manifest 'config' member must be an object");
  Json resolved = default_config();
  schema::collect(body, "", resolved);
  return resolved;
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return resolve_config(parse_config_text(ss.str()));
}

// --- typed view -------------------------------------------------------------------

struct ExperimentConfig {
  std::string id = "run";
  std::string command = "simulate";
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  EmbeddingSet embedding;
  TaskSpec task;
  DynamicsConfig dynamics;
  bool gaussian_init = false;
  double init_scale = 1.0;
  GridSpec landscape;
  std::vector<double> contours;
  bool overlay = false;
  PhaseSpec phase;
  struct ClosedForm {
    double t_end = 1000.0;
    std::size_t points = 200;
    double eta = 1.0;
    std::size_t steps = 10000;
  } closed_form;
  struct Figure {
    std::vector<double> etas, alphas, dims, log_ratios;
    std::size_t replicas = 1;
    std::size_t steps = 0;
    std::size_t grid = 0;
  } figure;
  Json resolved;  // echoed into the run manifest
};

namespace detail {

inline std::vector<double> num_list(const Json& v) {
  std::vector<double> out;
  if (v.is_number()) out.push_back(v.get<double>());
  else
    for (const auto& e : v) out.push_back(e.get<double>());
  return out;
}

inline void require_increasing(const std::vector<double>& v, const std::string& key) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1])) throw ConfigError(key, "config key '" + key + "': values must increase strictly");
}

inline std::pair<double, double> range_of(const Json& v, const std::string& key) {
  if (v.size() != 2) throw ConfigError(key, "config key '" + key + "': expected [lo, hi]");
  const double lo = v[0].get<double>(), hi = v[1].get<double>();
  if (!(hi > lo)) throw ConfigError(key, "config key '" + key + "': need lo < hi");
  return {lo, hi};
}

// Runs `fn`, rewrapping std::invalid_argument as a ConfigError on `key`.
template <class Fn>
auto keyed(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, "config key '" + key + "': " + e.what());
  }
}

}  // namespace detail

// Builds the typed configuration from a resolved tree. Semantic checks
// (ranges, shape compatibility) raise ConfigError naming the key at fault.
inline ExperimentConfig build_config(const Json& resolved) {
  using detail::keyed;
  ExperimentConfig cfg;
  cfg.resolved = resolved;
  cfg.id = resolved.at("id").get<std::string>();
  if (cfg.id.empty() || cfg.id.find_first_of("/\\") != std::string::npos || cfg.id == "." || cfg.id == "..")
    throw ConfigError("id", "config key 'id': must be a plain non-empty name");
  cfg.command = resolved.at("command").get<std::string>();
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  if (!resolved.at("output").is_null()) cfg.output = resolved.at("output").get<std::string>();

  const Json& t = resolved.at("task");
  const auto n = static_cast<Index>(t.at("n").get<std::uint64_t>());
  const auto m = static_cast<Index>(t.at("m").get<std::uint64_t>());
  if (n < 1) throw ConfigError("task.n", "config key 'task.n': need at least one token");
  if (m < 2) throw ConfigError("task.m", "config key 'task.m': need at least two classes");

  const Json& e = resolved.at("embedding");
  const std::string ekind = e.at("kind").get<std::string>();
  const auto d = static_cast<Index>(e.at("d").get<std::uint64_t>());
  if (d < 2) throw ConfigError("embedding.d", "config key 'embedding.d': dimension must be >= 2");
  const double scale = e.at("output_scale").get<double>();
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw ConfigError("embedding.output_scale", "config key 'embedding.output_scale': must be positive");
  if (ekind == "orthonormal") {
    if (n > d || m > d) throw ConfigError("embedding.d", "config key 'embedding.d': orthonormal embeddings need n, m <= d");
    cfg.embedding = orthonormal_embeddings(n, m, d, scale);
  } else if (ekind == "correlated_pair") {
    if (n != 2 || m != 2)
      throw ConfigError("embedding.kind", "config key 'embedding.kind': correlated_pair needs task.n = task.m = 2");
    const double alpha = e.at("alpha").get<double>();
    cfg.embedding = keyed("embedding.alpha", [&] { return correlated_pair_embeddings(alpha, d, scale); });
  } else {
    const std::uint64_t s = e.at("seed").is_null() ? cfg.seed : e.at("seed").get<std::uint64_t>();
    cfg.embedding = sphere_embeddings(n, m, d, s);
    cfg.embedding.outputs *= scale;
    cfg.embedding.output_scale = scale;
  }

  if (t.at("targets").is_string()) {
    if (t.at("targets") == "identity" && n > m)
      throw ConfigError("task.targets", "config key 'task.targets': identity targets need n <= m");
    cfg.task.targets = t.at("targets") == "identity" ? identity_targets(n) : modulo_targets(n, m);
  } else {
    for (const auto& y : t.at("targets")) cfg.task.targets.push_back(static_cast<Index>(y.get<std::uint64_t>()));
    if (static_cast<Index>(cfg.task.targets.size()) != n)
      throw ConfigError("task.targets", "config key 'task.targets': length differs from task.n");
  }
  const Json& fq = t.at("freq");
  if (fq.is_string()) {
    if (fq == "uniform") cfg.task.freq = uniform_freq(n);
    else if (fq == "zipf") cfg.task.freq = zipf_freq(n);
    else {
      if (n != 2) throw ConfigError("task.freq", "config key 'task.freq': preset 'pair' needs task.n = 2");
      cfg.task.freq = keyed("task.p1", [&] { return pair_freq(t.at("p1").get<double>()); });
    }
  } else {
    cfg.task.freq = detail::num_list(fq);
    if (static_cast<Index>(cfg.task.freq.size()) != n)
      throw ConfigError("task.freq", "config key 'task.freq': length differs from task.n");
    double total = 0.0;
    for (double q : cfg.task.freq) total += q;
    if (!(total > 0.0)) throw ConfigError("task.freq", "config key 'task.freq': frequencies must have positive sum");
    for (double& q : cfg.task.freq) q /= total;
  }
  keyed("task.targets", [&] {
    cfg.task.validate(m);
    return 0;
  });

  const Json& dy = resolved.at("dynamics");
  auto& dc = cfg.dynamics;
  const std::string dk = dy.at("kind").get<std::string>();
  dc.kind = dk == "GD" ? DynamicsKind::GD : dk == "GF" ? DynamicsKind::GF : dk == "SGD" ? DynamicsKind::SGD : DynamicsKind::SGF;
  dc.eta.values = detail::num_list(dy.at("eta"));
  for (double v : dc.eta.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("dynamics.eta", "config key 'dynamics.eta': must be finite and >= 0");
  dc.sigma.values = detail::num_list(dy.at("sigma"));
  for (double v : dc.sigma.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("dynamics.sigma", "config key 'dynamics.sigma': must be finite and >= 0");
  dc.batch_size = dy.at("batch_size").get<std::size_t>();
  if (dc.batch_size < 1 || dc.batch_size > dc.max_batch_size)
    throw ConfigError("dynamics.batch_size", "config key 'dynamics.batch_size': out of range");
  dc.h = dy.at("h").get<double>();
  if (!(dc.h > 0.0)) throw ConfigError("dynamics.h", "config key 'dynamics.h': must be positive");
  dc.t_end = dy.at("t_end").get<double>();
  if (!(dc.t_end >= 0.0) || !std::isfinite(dc.t_end)) throw ConfigError("dynamics.t_end", "config key 'dynamics.t_end': must be >= 0");
  dc.record_every = dy.at("record_every").get<double>();
  if (!(dc.record_every > 0.0)) throw ConfigError("dynamics.record_every", "config key 'dynamics.record_every': must be positive");
  const bool discrete = dc.kind == DynamicsKind::GD || dc.kind == DynamicsKind::SGD;
  if (discrete) {
    keyed("dynamics.t_end", [&] { return detail::step_count(dc.t_end); });
    keyed("dynamics.record_every", [&] { return detail::step_stride(dc.record_every); });
  }
  dc.record_times = detail::num_list(dy.at("record_times"));
  if (!dc.record_times.empty()) {
    keyed("dynamics.record_times", [&] { return detail::output_times(dc); });
  }
  const std::string gb = dy.at("gamma").get<std::string>();
  if (gb != "none") {
    dc.gamma = gb == "canonical" ? GammaBasis::Canonical : GammaBasis::TwoToken;
    keyed("dynamics.gamma", [&] {
      detail::check_gamma_mode(cfg.embedding, *dc.gamma);
      return 0;
    });
  }
  dc.track_sharpness = dy.at("sharpness").get<bool>();
  dc.ode.atol = dy.at("atol").get<double>();
  dc.ode.rtol = dy.at("rtol").get<double>();
  if (!(dc.ode.atol > 0.0)) throw ConfigError("dynamics.atol", "config key 'dynamics.atol': must be positive");
  if (!(dc.ode.rtol > 0.0)) throw ConfigError("dynamics.rtol", "config key 'dynamics.rtol': must be positive");
  dc.divergence_threshold = dy.at("divergence_threshold").get<double>();
  if (!(dc.divergence_threshold > 0.0))
    throw ConfigError("dynamics.divergence_threshold", "config key 'dynamics.divergence_threshold': must be positive");
  dc.seed = cfg.seed;
  cfg.gaussian_init = dy.at("init") == "gaussian";
  cfg.init_scale = dy.at("init_scale").get<double>();
  if (!(cfg.init_scale >= 0.0)) throw ConfigError("dynamics.init_scale", "config key 'dynamics.init_scale': must be >= 0");

  const Json& ls = resolved.at("landscape");
  std::tie(cfg.landscape.gamma1_min, cfg.landscape.gamma1_max) = detail::range_of(ls.at("gamma1"), "landscape.gamma1");
  std::tie(cfg.landscape.gamma2_min, cfg.landscape.gamma2_max) = detail::range_of(ls.at("gamma2"), "landscape.gamma2");
  cfg.landscape.n1 = static_cast<Index>(ls.at("n1").get<std::uint64_t>());
  cfg.landscape.n2 = static_cast<Index>(ls.at("n2").get<std::uint64_t>());
  if (cfg.landscape.n1 < 2) throw ConfigError("landscape.n1", "config key 'landscape.n1': need >= 2 points");
  if (cfg.landscape.n2 < 2) throw ConfigError("landscape.n2", "config key 'landscape.n2': need >= 2 points");
  cfg.landscape.basis = ls.at("basis") == "canonical" ? GammaBasis::Canonical : GammaBasis::TwoToken;
  cfg.landscape.with_sharpness = ls.at("sharpness").get<bool>();
  cfg.contours = detail::num_list(ls.at("contours"));
  cfg.overlay = ls.at("overlay").get<bool>();

  const Json& ph = resolved.at("phase");
  cfg.phase.axis = ph.at("axis") == "alpha" ? PhaseAxis::Alpha : PhaseAxis::LogRatio;
  cfg.phase.etas = detail::num_list(ph.at("etas"));
  cfg.phase.axis_values = detail::num_list(ph.at("values"));
  cfg.phase.fixed_alpha = ph.at("fixed_alpha").get<double>();
  cfg.phase.fixed_p1 = ph.at("fixed_p1").get<double>();
  cfg.phase.cap = ph.at("cap").get<std::uint64_t>();
  cfg.phase.output_scale = ph.at("output_scale").get<double>();
  if (cfg.phase.etas.empty()) throw ConfigError("phase.etas", "config key 'phase.etas': empty grid");
  for (double v : cfg.phase.etas)
    if (!(v > 0.0)) throw ConfigError("phase.etas", "config key 'phase.etas': learning rates must be positive");
  if (cfg.phase.axis_values.empty()) throw ConfigError("phase.values", "config key 'phase.values': empty grid");
  detail::require_increasing(cfg.phase.etas, "phase.etas");
  detail::require_increasing(cfg.phase.axis_values, "phase.values");
  if (cfg.phase.axis == PhaseAxis::Alpha) {
    for (double v : cfg.phase.axis_values)
      if (!(v >= -1.0 && v <= 1.0)) throw ConfigError("phase.values", "config key 'phase.values': alpha must lie in [-1, 1]");
  } else if (!(cfg.phase.fixed_alpha >= -1.0 && cfg.phase.fixed_alpha <= 1.0)) {
    throw ConfigError("phase.fixed_alpha", "config key 'phase.fixed_alpha': must lie in [-1, 1]");
  }
  if (cfg.phase.axis == PhaseAxis::Alpha && !(cfg.phase.fixed_p1 > 0.0 && cfg.phase.fixed_p1 < 1.0))
    throw ConfigError("phase.fixed_p1", "config key 'phase.fixed_p1': must lie in (0, 1)");
  if (cfg.phase.cap < 1) throw ConfigError("phase.cap", "config key 'phase.cap': must be >= 1");
  if (!(cfg.phase.output_scale > 0.0)) throw ConfigError("phase.output_scale", "config key 'phase.output_scale': must be positive");

  const Json& cf = resolved.at("closed_form");
  cfg.closed_form.t_end = cf.at("t_end").get<double>();
  cfg.closed_form.points = cf.at("points").get<std::size_t>();
  cfg.closed_form.eta = cf.at("eta").get<double>();
  cfg.closed_form.steps = cf.at("steps").get<std::size_t>();
  if (!(cfg.closed_form.t_end > 0.0)) throw ConfigError("closed_form.t_end", "config key 'closed_form.t_end': must be positive");
  if (cfg.closed_form.points < 2) throw ConfigError("closed_form.points", "config key 'closed_form.points': need >= 2");
  if (!(cfg.closed_form.eta > 0.0)) throw ConfigError("closed_form.eta", "config key 'closed_form.eta': must be positive");

  const Json& fg = resolved.at("figure");
  cfg.figure.etas = detail::num_list(fg.at("etas"));
  cfg.figure.alphas = detail::num_list(fg.at("alphas"));
  cfg.figure.dims = detail::num_list(fg.at("dims"));
  cfg.figure.log_ratios = detail::num_list(fg.at("log_ratios"));
  cfg.figure.replicas = fg.at("replicas").get<std::size_t>();
  cfg.figure.steps = fg.at("steps").get<std::size_t>();
  cfg.figure.grid = fg.at("grid").get<std::size_t>();
  // Shorthand for a square landscape raster.
  if (cfg.figure.grid > 0) {
    if (cfg.figure.grid < 2) throw ConfigError("figure.grid", "config key 'figure.grid': need at least 2 cells");
    cfg.landscape.n1 = cfg.landscape.n2 = static_cast<Index>(cfg.figure.grid);
  }
  for (double v : cfg.figure.etas)
    if (!(v > 0.0)) throw ConfigError("figure.etas", "config key 'figure.etas': learning rates must be positive");
  for (double v : cfg.figure.alphas)
    if (!(v >= -1.0 && v <= 1.0)) throw ConfigError("figure.alphas", "config key 'figure.alphas': must lie in [-1, 1]");
  for (double v : cfg.figure.dims)
    if (!(v >= 2.0) || v != std::floor(v)) throw ConfigError("figure.dims", "config key 'figure.dims': need integers >= 2");
  if (cfg.figure.replicas < 1) throw ConfigError("figure.replicas", "config key 'figure.replicas': must be >= 1");

  keyed("task", [&] {
    check_problem(cfg.embedding, cfg.task);
    return 0;
  });
  return cfg;
}

// Resolve + build in one go; `seed_override` replaces the top-level seed.
inline ExperimentConfig make_config(Json doc, std::optional<std::uint64_t> seed_override = {},
                                    std::optional<std::string> command = {}) {
  Json resolved = resolve_config(doc);
  if (seed_override) resolved["seed"] = *seed_override;
  if (command) resolved["command"] = *command;
  return build_config(resolved);
}

inline ExperimentConfig config_from_text(std::string_view text) { return make_config(parse_config_text(text)); }

}  // namespace assocmem
