#pragma once

// File formats: JSON for states, unitaries, plans, scenarios and reports;
// CSV for samples, rate curves and benchmark traces. Every double is written
// in its shortest round-trip decimal form.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "absim/errors.hpp"
#include "absim/exactsim.hpp"
#include "absim/fock.hpp"
#include "absim/hom.hpp"
#include "absim/interferometer.hpp"
#include "absim/lossmodel.hpp"
#include "absim/permanent.hpp"

namespace absim::io {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path.string());
  return ss.str();
}

// Writes next to the target and renames over it, so a failed run never
// leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("output directory " + dir.string() + " does not exist");
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw IoError("error while writing " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

// ----------------------------------------------------------- fock state

inline json to_json(const FockState& s) { return json(s.occupations()); }

inline FockState fock_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("Fock state must be a JSON integer array");
  std::vector<int> occ;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw ValidationError("Fock state entries must be integers");
    occ.push_back(v.get<int>());
  }
  return FockState(std::move(occ));
}

// -------------------------------------------------------------- unitary

inline json to_json(const ModeUnitary& u) {
  json re = json::array(), im = json::array();
  for (int r = 0; r < u.modes(); ++r) {
    json rr = json::array(), ii = json::array();
    for (int c = 0; c < u.modes(); ++c) {
      rr.push_back(u(r, c).real());
      ii.push_back(u(r, c).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  return {{"m", u.modes()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline ModeUnitary unitary_from_json(const json& j) {
  if (!j.is_object() || !j.contains("m") || !j.contains("re") || !j.contains("im")) {
    throw ValidationError("unitary JSON needs fields m, re, im");
  }
  const int m = j.at("m").get<int>();
  if (m < 1) throw ValidationError("unitary JSON: m must be >= 1");
  MatrixXc u(m, m);
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (!re.is_array() || !im.is_array() || static_cast<int>(re.size()) != m ||
      static_cast<int>(im.size()) != m) {
    throw ValidationError("unitary JSON: re and im must have m rows");
  }
  for (int r = 0; r < m; ++r) {
    if (static_cast<int>(re[r].size()) != m || static_cast<int>(im[r].size()) != m) {
      throw ValidationError("unitary JSON: row " + std::to_string(r) + " must have m entries");
    }
    for (int c = 0; c < m; ++c) u(r, c) = cplx(re[r][c].get<double>(), im[r][c].get<double>());
  }
  return ModeUnitary(std::move(u));
}

// ----------------------------------------------------------------- plan

inline json to_json(const CircuitPlan& plan) {
  json layers = json::array();
  for (const auto& layer : plan.layers) {
    json l = json::array();
    for (const auto& c : layer) {
      l.push_back({{"pair", {c.mode, c.mode + 1}}, {"theta", c.theta}, {"phi", c.phi}});
    }
    layers.push_back(std::move(l));
  }
  return {{"m", plan.m}, {"layers", std::move(layers)}, {"output_phases", plan.output_phases}};
}

inline CircuitPlan plan_from_json(const json& j) {
  if (!j.is_object() || !j.contains("layers")) throw ValidationError("plan JSON needs layers");
  CircuitPlan plan;
  plan.m = j.at("m").get<int>();
  for (const auto& l : j.at("layers")) {
    Layer layer;
    for (const auto& c : l) {
      const auto pair = c.at("pair").get<std::vector<int>>();
      if (pair.size() != 2 || pair[1] != pair[0] + 1) {
        throw ValidationError("plan JSON: a coupling must act on adjacent modes [m, m+1]");
      }
      layer.push_back({pair[0], c.at("theta").get<double>(), c.at("phi").get<double>()});
    }
    validate_layer(layer, plan.m);
    plan.layers.push_back(std::move(layer));
  }
  if (j.contains("output_phases")) plan.output_phases = j.at("output_phases").get<std::vector<double>>();
  return plan;
}

// ---------------------------------------------------------- distribution

inline json to_json(const OutputDistribution& d) {
  json out = json::array();
  for (const auto& o : d.outcomes) out.push_back({{"state", to_json(o.state)}, {"probability", o.probability}});
  return out;
}

// ------------------------------------------------------------- scenario

struct ScenarioFile {
  std::string source;
  std::optional<LossScenario> atomic;
  std::optional<PhotonicScenario> photonic;
  std::optional<ClassicalScenario> classical;
  std::optional<HomParams> hom;
  int n_min = 2;
  int n_max = 60;
};

namespace detail {

inline int line_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of "key" inside "section" (or anywhere when section is empty); 0
// when the text does not mention it.
inline int line_of(std::string_view text, std::string_view section, std::string_view key) {
  std::size_t from = 0;
  if (!section.empty()) {
    from = text.find("\"" + std::string(section) + "\"");
    if (from == std::string_view::npos) return 0;
  }
  if (key.empty()) return line_at(text, from);
  const std::size_t at = text.find("\"" + std::string(key) + "\"", from);
  return at == std::string_view::npos ? line_at(text, from) : line_at(text, at);
}

class FieldReader {
 public:
  FieldReader(std::string_view text, std::string source, std::string section, const json& obj)
      : text_(text), source_(std::move(source)), section_(std::move(section)), obj_(obj) {}

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    const std::string field = section_.empty() ? key : section_ + "." + key;
    const int line = line_of(text_, section_, key);
    throw ParseError(source_ + ":" + std::to_string(line) + ": field '" + field + "': " + why, field,
                     line);
  }

  // Numbers, or the strings "inf" / "infinity" where infinity is allowed.
  double number(const std::string& key, std::optional<double> fallback = std::nullopt,
                bool allow_inf = false) const {
    if (!obj_.contains(key)) {
      if (fallback) return *fallback;
      fail(key, "missing");
    }
    const json& v = obj_.at(key);
    if (v.is_number()) return v.get<double>();
    if (allow_inf && v.is_string()) {
      std::string s = v.get<std::string>();
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      if (s == "inf" || s == "infinity") return kInfinity;
    }
    fail(key, allow_inf ? "expected a number or \"inf\"" : "expected a number");
  }

  int integer(const std::string& key, int fallback) const {
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  template <typename Validate>
  void check(const std::string& key, Validate&& validate) const {
    try {
      validate();
    } catch (const ValidationError& e) {
      fail(key, e.what());
    }
  }

 private:
  std::string_view text_;
  std::string source_;
  std::string section_;
  const json& obj_;
};

// The offending field of a failed validate() is the first word of its message.
inline std::string first_word(const char* what) {
  std::string s(what);
  return s.substr(0, s.find(' '));
}

}  // namespace detail

inline ScenarioFile parse_scenario(std::string_view text, const std::string& source = "<scenario>") {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = detail::line_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), "", line);
  }
  if (!root.is_object()) throw ParseError(source + ":1: scenario must be a JSON object", "", 1);

  ScenarioFile f;
  f.source = source;
  const detail::FieldReader top(text, source, "", root);
  f.n_min = top.integer("n_min", 2);
  f.n_max = top.integer("n_max", 60);
  if (f.n_min < 1) top.fail("n_min", "must be >= 1");
  if (f.n_max < f.n_min) top.fail("n_max", "must be >= n_min");

  auto section = [&](const char* name) -> const json* {
    if (!root.contains(name)) return nullptr;
    if (!root.at(name).is_object()) top.fail(name, "expected an object");
    return &root.at(name);
  };

  if (const json* a = section("atomic")) {
    const detail::FieldReader r(text, source, "atomic", *a);
    LossScenario s;
    s.name = r.string("name", "atomic");
    s.t_step = r.number("t_step");
    s.tau_bg = r.number("tau_bg", std::nullopt, true);
    s.tau_tb = r.number("tau_tb", std::nullopt, true);
    s.t_init = r.number("t_init");
    s.t_det = r.number("t_det");
    s.eta_init = r.number("eta_init");
    s.eta_det = r.number("eta_det");
    s.mode_ratio_c = r.number("mode_ratio_c", 1.0);
    try {
      s.validate();
    } catch (const ValidationError& e) {
      r.fail(detail::first_word(e.what()), e.what());
    }
    f.atomic = s;
  }
  if (const json* p = section("photonic")) {
    const detail::FieldReader r(text, source, "photonic", *p);
    PhotonicScenario s;
    s.name = r.string("name", "photonic");
    s.r0 = r.number("r0");
    s.eta_f = r.number("eta_f");
    s.eta_c = r.number("eta_c", 1.0);
    try {
      s.validate();
    } catch (const ValidationError& e) {
      r.fail(detail::first_word(e.what()), e.what());
    }
    f.photonic = s;
  }
  if (const json* c = section("classical")) {
    const detail::FieldReader r(text, source, "classical", *c);
    ClassicalScenario s;
    s.name = r.string("name", "classical");
    s.a_tilde = r.number("a_tilde");
    r.check("a_tilde", [&] { s.validate(); });
    f.classical = s;
  }
  if (const json* h = section("hom")) {
    const detail::FieldReader r(text, source, "hom", *h);
    HomParams hp;
    hp.survival_s = r.number("survival_s");
    hp.p_lic0 = r.number("p_lic0");
    hp.gamma = r.number("gamma");
    hp.p_addr = r.number("p_addr", 1.0);
    hp.p_rec = r.number("p_rec", 1.0);
    try {
      hp.validate();
    } catch (const ValidationError& e) {
      // "HOM parameter <field> must ..."
      std::string what = e.what();
      const auto from = std::string("HOM parameter ").size();
      r.fail(what.substr(from, what.find(' ', from) - from), what);
    }
    f.hom = hp;
  }
  return f;
}

inline ScenarioFile load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.string());
}

inline json to_json(const ScenarioFile& f) {
  auto num = [](double v) { return std::isinf(v) ? json("inf") : json(v); };
  json j;
  j["n_min"] = f.n_min;
  j["n_max"] = f.n_max;
  if (f.atomic) {
    const auto& s = *f.atomic;
    j["atomic"] = {{"name", s.name},         {"t_step", s.t_step},   {"tau_bg", num(s.tau_bg)},
                   {"tau_tb", num(s.tau_tb)}, {"t_init", s.t_init},   {"t_det", s.t_det},
                   {"eta_init", s.eta_init},  {"eta_det", s.eta_det}, {"mode_ratio_c", s.mode_ratio_c}};
  }
  if (f.photonic) {
    const auto& p = *f.photonic;
    j["photonic"] = {{"name", p.name}, {"r0", p.r0}, {"eta_f", p.eta_f}, {"eta_c", p.eta_c}};
  }
  if (f.classical) j["classical"] = {{"name", f.classical->name}, {"a_tilde", f.classical->a_tilde}};
  if (f.hom) {
    const auto& h = *f.hom;
    j["hom"] = {{"survival_s", h.survival_s}, {"p_lic0", h.p_lic0}, {"gamma", h.gamma},
                {"p_addr", h.p_addr},         {"p_rec", h.p_rec}};
  }
  return j;
}

// ------------------------------------------------------------------ hom

inline HomOutcomes parse_hom_counts(std::string_view text, const std::string& source = "<data>") {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = detail::line_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), "", line);
  }
  if (!root.is_object()) throw ParseError(source + ":1: counts must be a JSON object", "", 1);
  const detail::FieldReader r(text, source, "", root);
  std::array<std::uint64_t, 3> n{};
  for (int k = 0; k < 3; ++k) {
    const std::string key = "n" + std::to_string(k);
    if (!root.contains(key)) r.fail(key, "missing");
    const json& v = root.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) r.fail(key, "expected a non-negative integer");
    n[k] = v.get<std::uint64_t>();
  }
  return outcomes_from_counts(n[0], n[1], n[2]);
}

inline json to_json(const BunchingFit& fit) {
  return {{"p_bunch", fit.p_bunch},
          {"sigma", fit.sigma},
          {"gamma", fit.gamma},
          {"trials_kept", fit.trials_kept},
          {"significance", fit.significance()}};
}

// Monte Carlo outcomes; the n0/n1/n2 keys make the file valid fit input.
inline json to_json(const HomOutcomes& o) {
  return {{"trials_kept", o.trials_kept}, {"p0", o.p0},           {"p1", o.p1},
          {"p2", o.p2},                   {"n0", o.counts[0]},    {"n1", o.counts[1]},
          {"n2", o.counts[2]}};
}

// ------------------------------------------------------------------ csv

inline std::string rate_csv(const std::vector<RateRow>& rows) {
  std::string out = "N,r_atomic,r_photonic,r_classical\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + format_double(r.r_atomic) + "," +
           format_double(r.r_photonic) + "," + format_double(r.r_classical) + "\n";
  }
  return out;
}

inline std::string samples_csv(int m, const std::vector<FockState>& samples) {
  std::string out;
  for (int k = 0; k < m; ++k) out += (k ? ",m" : "m") + std::to_string(k);
  out += "\n";
  for (const auto& s : samples) {
    for (int k = 0; k < m; ++k) out += (k ? "," : "") + std::to_string(s[k]);
    out += "\n";
  }
  return out;
}

inline std::string benchmark_csv(const BenchmarkResult& b) {
  std::string out = "realization,step,p_j\n";
  for (std::size_t r = 0; r < b.traces.size(); ++r) {
    const auto& p = b.traces[r].p_j;
    for (std::size_t j = 0; j < p.size(); ++j) {
      out += std::to_string(r) + "," + std::to_string(j + 1) + "," + format_double(p[j]) + "\n";
    }
  }
  return out;
}

inline json benchmark_summary(const BenchmarkResult& b) {
  return {{"n", b.config.n},
          {"m", b.config.m},
          {"realizations", b.config.realizations},
          {"seed", b.config.seed},
          {"tau_tb_over_texec", b.config.tau_tb_over_texec},
          {"random_phases", b.config.random_phases},
          {"mean_p_j", b.mean_p_j},
          {"mean_p_total", b.mean_p_total},
          {"model_p_step", b.model_p_step},
          {"model_p_step_pow_M", b.model_p_step_pow_m}};
}

}  // namespace absim::io
