#include "dirtytx/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "dirtytx/kernels.hpp"
#include "dirtytx/montecarlo.hpp"
#include "dirtytx/units.hpp"

#ifndef DIRTYTX_VERSION
#define DIRTYTX_VERSION "unknown"
#endif

namespace dirtytx {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys{"experiment", "description", "seed",      "units",
                                     "hardware",   "signal",      "n_samples", "n_channels",
                                     "channel",    "perturbation", "output",   "record_wall_time"};
const std::set<std::string> kUnitKeys{"gamma2_db",       "gamma2_db_sweep",   "kappa2_db",
                                      "kappa2_db_sweep", "sigma_w2_dbm",      "p_x_dbm",
                                      "inv_sigma_n2_db", "inv_sigma_n2_db_sweep",
                                      "eta_p_x_dbm",     "grid_p_x_dbm"};

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) fail("unknown key '" + k + "' in " + where);
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) fail(what + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(what + " must be finite");
  return d;
}

// Scalar or two-element array applied per branch.
std::array<double, 2> pair_of(const json& v, const std::string& what) {
  if (v.is_number()) {
    const double d = number(v, what);
    return {d, d};
  }
  if (v.is_array() && v.size() == 2) return {number(v[0], what), number(v[1], what)};
  fail(what + " must be a number or a two-element array");
}

// Number, list of numbers, or {"start", "stop", "points"} (inclusive, uniform).
std::vector<double> sweep(const json& v, const std::string& what) {
  if (v.is_number()) return {number(v, what)};
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& e : v) out.push_back(number(e, what));
    return out;
  }
  if (v.is_object()) {
    check_keys(v, {"start", "stop", "points"}, what);
    if (!v.contains("start") || !v.contains("stop") || !v.contains("points"))
      fail(what + " range needs start, stop and points");
    const double a = number(v["start"], what + ".start");
    const double b = number(v["stop"], what + ".stop");
    if (!v["points"].is_number_integer()) fail(what + ".points must be an integer");
    const long n = v["points"].get<long>();
    if (n < 0 || n > 100000) fail(what + ".points out of range");
    std::vector<double> out;
    for (long i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    return out;
  }
  fail(what + " must be a number, a list or a range object");
}

std::size_t count(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(what + " must be a non-negative integer");
  return v.get<std::size_t>();
}

cplx complex_of(const json& v, const std::string& what) {
  if (v.is_number()) return {number(v, what), 0.0};
  if (v.is_array() && v.size() == 2) return {number(v[0], what), number(v[1], what)};
  fail(what + " must be a number or [re, im]");
}

// Disallow decibel-suffixed keys outside the units block.
void reject_db_keys(const json& v, const std::string& where) {
  if (!v.is_object()) return;
  for (const auto& [k, e] : v.items()) {
    const bool db = (k.size() > 3 && k.substr(k.size() - 3) == "_db") ||
                    (k.size() > 4 && k.substr(k.size() - 4) == "_dbm");
    if (db) fail("decibel field '" + k + "' in " + where + "; dB/dBm belong in \"units\"");
    reject_db_keys(e, where + "." + k);
  }
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return fnv1a64(std::to_string(seed) + ":" + std::to_string(a) + ":" + std::to_string(b));
}

double to_db(double v) { return units::linear_to_db(v); }
double to_dbm(double w) { return units::watt_to_dbm(w); }

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("unknown output format '" + s + "' (csv or json)");
}

const std::vector<ExperimentInfo>& experiment_kinds() {
  static const std::vector<ExperimentInfo> kinds{
      {"gaussian-validation", "solved u vs the Qx Gaussian approximation: covariance NMSE, KS, Bussgang residual"},
      {"nmse-sweep", "closed-form and Monte Carlo branch NMSE versus input power, min-max optimum"},
      {"backoff-vs-gain", "min-max optimal input power and NMSE versus amplifier power gain"},
      {"se-perturbation", "SE of the optimal precoder under phase shifts and amplitude scalings of c1"},
      {"se-mrt-sweep", "SE versus input power for conventional and distortion-aware MRT, one channel"},
      {"se-average", "average SE of the three precoders versus channel gain over noise"},
      {"se-vs-crosstalk", "average SE of the three precoders versus crosstalk power"},
  };
  return kinds;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

HardwareConfig ExperimentConfig::hardware_with_kappa(const std::array<double, 2>& k2_db) const {
  HardwareConfig h = hw;
  for (int l = 0; l < 2; ++l)
    h.kappa[l] = std::polar(std::sqrt(units::db_to_linear(k2_db[l])), kappa_phase[l]);
  return h;
}

HardwareConfig ExperimentConfig::hardware_with_gain(const HardwareConfig& base, double g2_db) const {
  HardwareConfig h = base;
  h.gamma = {std::sqrt(units::db_to_linear(g2_db)), std::sqrt(units::db_to_linear(g2_db))};
  return h;
}

ExperimentConfig parse_config(const json& j_in, std::optional<std::uint64_t> seed_override) {
  json j = j_in;
  check_keys(j, kTopKeys, "config");
  if (seed_override) j["seed"] = *seed_override;

  ExperimentConfig c;
  if (!j.contains("experiment") || !j["experiment"].is_string()) fail("missing string 'experiment'");
  c.kind = j["experiment"].get<std::string>();
  bool known = false;
  for (const auto& k : experiment_kinds()) known = known || c.kind == k.kind;
  if (!known) fail("unknown experiment kind '" + c.kind + "'");

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      fail("seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }

  for (const char* block : {"hardware", "signal", "perturbation", "output"})
    if (j.contains(block)) reject_db_keys(j[block], block);

  // Defaults: symmetric transmitter.
  std::array<double, 2> g2_db{30.0, 30.0};
  std::array<double, 2> k2_db{-50.0, -50.0};
  double sw_dbm = -10.0;
  c.hw.rho = {-0.025, -0.025};
  c.signal = {0.0, 1.0, cplx{}};

  const json units_block = j.value("units", json::object());
  check_keys(units_block, kUnitKeys, "units");
  if (units_block.contains("gamma2_db")) g2_db = pair_of(units_block["gamma2_db"], "units.gamma2_db");
  if (units_block.contains("kappa2_db")) k2_db = pair_of(units_block["kappa2_db"], "units.kappa2_db");
  if (units_block.contains("sigma_w2_dbm"))
    sw_dbm = number(units_block["sigma_w2_dbm"], "units.sigma_w2_dbm");
  if (units_block.contains("gamma2_db_sweep"))
    c.gamma2_db = sweep(units_block["gamma2_db_sweep"], "units.gamma2_db_sweep");
  if (units_block.contains("kappa2_db_sweep")) {
    const json& ks = units_block["kappa2_db_sweep"];
    if (ks.is_array() && !ks.empty() && ks[0].is_array()) {
      for (const auto& e : ks) c.kappa2_db.push_back(pair_of(e, "units.kappa2_db_sweep"));
    } else {
      for (double k : sweep(ks, "units.kappa2_db_sweep")) c.kappa2_db.push_back({k, k});
    }
  } else {
    c.kappa2_db.push_back(k2_db);
  }
  if (units_block.contains("p_x_dbm"))
    for (double d : sweep(units_block["p_x_dbm"], "units.p_x_dbm")) c.p_x.push_back(units::dbm_to_watt(d));
  if (units_block.contains("inv_sigma_n2_db")) {
    const double s = number(units_block["inv_sigma_n2_db"], "units.inv_sigma_n2_db");
    c.sigma_n2 = units::db_to_linear(-s);
    c.inv_sigma_n2_db = {s};
  }
  if (units_block.contains("inv_sigma_n2_db_sweep"))
    c.inv_sigma_n2_db = sweep(units_block["inv_sigma_n2_db_sweep"], "units.inv_sigma_n2_db_sweep");
  auto range_dbm = [&](const char* key, double& lo, double& hi, int& pts) {
    if (!units_block.contains(key)) return;
    const json& r = units_block[key];
    check_keys(r, {"start", "stop", "points"}, std::string("units.") + key);
    if (r.contains("start")) lo = number(r["start"], key);
    if (r.contains("stop")) hi = number(r["stop"], key);
    if (r.contains("points")) pts = static_cast<int>(count(r["points"], key));
    if (!(hi > lo) || pts < 2) fail(std::string("units.") + key + " needs stop > start and points >= 2");
  };
  range_dbm("eta_p_x_dbm", c.eta.lo_dbm, c.eta.hi_dbm, c.eta.points);
  range_dbm("grid_p_x_dbm", c.nmse_grid.lo_dbm, c.nmse_grid.hi_dbm, c.nmse_grid.points);

  if (j.contains("hardware")) {
    const json& h = j["hardware"];
    check_keys(h, {"rho", "kappa_phase_rad"}, "hardware");
    if (h.contains("rho")) c.hw.rho = pair_of(h["rho"], "hardware.rho");
    if (h.contains("kappa_phase_rad")) c.kappa_phase = pair_of(h["kappa_phase_rad"], "hardware.kappa_phase_rad");
  }
  if (j.contains("signal")) {
    const json& s = j["signal"];
    check_keys(s, {"beta", "xi"}, "signal");
    if (s.contains("beta")) c.signal.beta = number(s["beta"], "signal.beta");
    if (s.contains("xi")) c.signal.xi = complex_of(s["xi"], "signal.xi");
  }
  if (j.contains("n_samples")) c.n_samples = count(j["n_samples"], "n_samples");
  if (j.contains("n_channels")) c.n_channels = count(j["n_channels"], "n_channels");
  if (j.contains("channel")) {
    const json& h = j["channel"];
    if (!h.is_array() || h.size() != 2) fail("channel must be [h1, h2] with h = [re, im]");
    c.channel = CVec2{complex_of(h[0], "channel[0]"), complex_of(h[1], "channel[1]")};
  }
  if (j.contains("perturbation")) {
    const json& p = j["perturbation"];
    check_keys(p, {"phase_points", "scales"}, "perturbation");
    if (p.contains("phase_points")) c.phase_points = static_cast<int>(count(p["phase_points"], "perturbation.phase_points"));
    if (p.contains("scales")) c.scales = sweep(p["scales"], "perturbation.scales");
  }
  if (c.scales.empty())
    for (int i = 0; i < 30; ++i) c.scales.push_back(0.1 + 2.9 * i / 29.0);
  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, {"path", "format"}, "output");
    if (o.contains("path")) {
      if (!o["path"].is_string()) fail("output.path must be a string");
      c.output_path = o["path"].get<std::string>();
    }
    if (o.contains("format")) {
      if (!o["format"].is_string()) fail("output.format must be a string");
      c.format = parse_format(o["format"].get<std::string>());
    }
  }
  if (j.contains("record_wall_time")) {
    if (!j["record_wall_time"].is_boolean()) fail("record_wall_time must be a boolean");
    c.record_wall_time = j["record_wall_time"].get<bool>();
  }

  c.hw.gamma = {std::sqrt(units::db_to_linear(g2_db[0])), std::sqrt(units::db_to_linear(g2_db[1]))};
  c.hw.sigma_w2 = units::dbm_to_watt(sw_dbm);
  c.hw.kappa = c.hardware_with_kappa(c.kappa2_db.front()).kappa;

  try {
    c.hw.validate();
    c.signal.with_power(1.0).validate();
  } catch (const DomainError& e) {
    fail(e.what());
  }
  if (!(c.sigma_n2 > 0.0)) fail("sigma_n2 must be positive");

  json canon = j;
  canon.erase("output");
  c.hash = hex64(fnv1a64(canon.dump()));
  return c;
}

ExperimentConfig parse_config_text(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, seed_override);
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), seed_override);
}

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw NumericalError("ResultTable: row width mismatch");
  for (double v : row)
    if (std::isnan(v)) throw NumericalError("ResultTable: NaN in result row");
  rows.push_back(std::move(row));
}

void ResultTable::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata)
    if (k == key) {
      v = value;
      return;
    }
  metadata.emplace_back(key, value);
}

std::optional<std::string> ResultTable::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  return std::nullopt;
}

std::vector<double> ResultTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].name == name) {
      std::vector<double> out;
      for (const auto& r : rows) out.push_back(r[c]);
      return out;
    }
  throw DomainError("ResultTable: no column '" + name + "'");
}

namespace {

struct SeTriple {
  double opt = 0.0, da = 0.0, conv = 0.0;
};

SeTriple average_se(const std::vector<CVec2>& hs, double sigma_n2, const HardwareConfig& hw,
                    const EtaGridOptions& eta, Exec exec) {
  std::vector<SeTriple> per(hs.size());
  kernels::for_each(exec, hs.size(), [&](std::size_t i) {
    const ChannelSpec ch{hs[i], sigma_n2};
    per[i] = {optimal_precoder(ch, hw).se, distortion_aware_mrt(ch, hw, eta).se,
              conventional_mrt(ch, hw).se};
  });
  SeTriple m;
  for (const auto& s : per) {
    m.opt += s.opt;
    m.da += s.da;
    m.conv += s.conv;
  }
  const double n = static_cast<double>(hs.size());
  return {m.opt / n, m.da / n, m.conv / n};
}

CVec2 single_channel(const ExperimentConfig& c) {
  return c.channel ? *c.channel : sample_channels(1, c.seed).front();
}

ResultTable gaussian_validation(const ExperimentConfig& c, Exec exec) {
  ResultTable t;
  t.columns = {{"p_x", "dBm"},          {"cov_nmse_cross", "dB"}, {"cov_nmse_full", "dB"},
               {"ks_re_u1", "-"},        {"ks_im_u1", "-"},        {"ks_re_u2", "-"},
               {"ks_im_u2", "-"},        {"bussgang_residual", "-"}, {"n_failed", "count"}};
  SimulationOptions opt;
  opt.exec = exec;
  for (std::size_t i = 0; i < c.p_x.size(); ++i) {
    const SignalSpec spec = c.signal.with_power(c.p_x[i]);
    const auto b = simulate(c.hw, spec, c.n_samples, sub_seed(c.seed, 0, i), opt);
    const auto cov = covariance_nmse(b, c.hw);
    const auto ks = empirical_cdf_distance(b, build_bussgang_model(c.hw, spec));
    const double res = bussgang_residual(b, empirical_bussgang_gains(b, c.hw));
    t.add_row({to_dbm(c.p_x[i]), to_db(cov.cross), to_db(cov.full), ks.d[0], ks.d[1], ks.d[2],
               ks.d[3], res, static_cast<double>(b.n_failed)});
  }
  return t;
}

ResultTable nmse_sweep(const ExperimentConfig& c, Exec exec) {
  const bool mc = c.n_samples > 0;
  ResultTable t;
  t.columns = {{"kappa1_sq", "dB"}, {"kappa2_sq", "dB"}, {"p_x", "dBm"}, {"nmse1", "dB"}, {"nmse2", "dB"}};
  if (mc) {
    t.columns.push_back({"mc_nmse1", "dB"});
    t.columns.push_back({"mc_nmse2", "dB"});
  }
  t.columns.push_back({"optimum", "flag"});
  SimulationOptions opt;
  opt.exec = exec;
  for (std::size_t k = 0; k < c.kappa2_db.size(); ++k) {
    const HardwareConfig hw = c.hardware_with_kappa(c.kappa2_db[k]);
    auto row_at = [&](double p, std::size_t tag, bool optimum) {
      const SignalSpec spec = c.signal.with_power(p);
      const auto r = nmse_branches(hw, spec, p);
      std::vector<double> row{c.kappa2_db[k][0], c.kappa2_db[k][1], to_dbm(p), to_db(r.nmse1), to_db(r.nmse2)};
      if (mc) {
        const auto b = simulate(hw, spec, c.n_samples, sub_seed(c.seed, k, tag), opt);
        const auto e = empirical_nmse(b, hw, spec);
        row.push_back(to_db(e[0]));
        row.push_back(to_db(e[1]));
      }
      row.push_back(optimum ? 1.0 : 0.0);
      t.add_row(std::move(row));
    };
    for (std::size_t i = 0; i < c.p_x.size(); ++i) row_at(c.p_x[i], i, false);
    const auto sol = minmax_backoff(hw, c.signal);
    row_at(sol.p_x_opt, c.p_x.size(), true);
    std::ostringstream key;
    key << "optimum_case_" << k;
    t.set_meta(key.str(), std::to_string(sol.active_case));
  }
  return t;
}

ResultTable backoff_vs_gain(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {{"kappa1_sq", "dB"}, {"kappa2_sq", "dB"}, {"gamma_sq", "dB"}, {"p_x_opt", "dBm"},
               {"nmse_max", "dB"},  {"nmse1", "dB"},     {"nmse2", "dB"},    {"active_case", "-"}};
  const std::vector<double> gains = c.gamma2_db.empty()
                                        ? std::vector<double>{units::linear_to_db(c.hw.gamma[0] * c.hw.gamma[0])}
                                        : c.gamma2_db;
  for (const auto& k2 : c.kappa2_db) {
    for (double g : gains) {
      const HardwareConfig hw = c.hardware_with_gain(c.hardware_with_kappa(k2), g);
      const auto sol = minmax_backoff(hw, c.signal);
      const auto r = nmse_branches(hw, c.signal.with_power(sol.p_x_opt), sol.p_x_opt);
      t.add_row({k2[0], k2[1], g, to_dbm(sol.p_x_opt), to_db(sol.achieved), to_db(r.nmse1),
                 to_db(r.nmse2), static_cast<double>(sol.active_case)});
    }
  }
  return t;
}

ResultTable se_perturbation(const ExperimentConfig& c) {
  const ChannelSpec ch{single_channel(c), c.sigma_n2};
  const HardwareConfig& hw = c.hw;
  const auto sol = optimal_precoder(ch, hw);
  ResultTable t;
  t.columns = {{"perturbation", "0=phase,1=scale"}, {"parameter", "rad|-"}, {"se", "bit/channel use"},
               {"se_optimal", "bit/channel use"}};
  const int n = c.phase_points;
  for (int i = 0; i < n; ++i) {
    const double th = n == 1 ? 0.0 : 2.0 * std::numbers::pi * i / (n - 1);
    t.add_row({0.0, th, perturbed_se_phase(sol, ch, hw, th), sol.se});
  }
  for (double s : c.scales) t.add_row({1.0, s, perturbed_se_scale(sol, ch, hw, s), sol.se});
  t.set_meta("optimal_provenance", sol.provenance);
  t.set_meta("optimal_p_x_dbm", format_number(to_dbm(sol.p_x)));
  return t;
}

ResultTable se_mrt_sweep(const ExperimentConfig& c) {
  const ChannelSpec ch{single_channel(c), c.sigma_n2};
  const HardwareConfig& hw = c.hw;
  ResultTable t;
  t.columns = {{"precoder", "0=conv-mrt,1=da-mrt,2=conv-mrt-opt,3=optimal"}, {"p_x", "dBm"},
               {"se", "bit/channel use"}};
  for (double p : c.p_x) t.add_row({0.0, to_dbm(p), conventional_mrt_se(ch, hw, p)});
  const auto curve = distortion_aware_mrt_curve(ch, hw, c.eta);
  for (std::size_t i = 0; i < curve.se.size(); ++i) t.add_row({1.0, to_dbm(curve.p_x[i]), curve.se[i]});
  const auto conv = conventional_mrt(ch, hw);
  t.add_row({2.0, to_dbm(conv.p_x), conv.se});
  const auto opt = optimal_precoder(ch, hw);
  t.add_row({3.0, to_dbm(opt.p_x), opt.se});
  t.set_meta("conv_mrt_provenance", conv.provenance);
  t.set_meta("optimal_provenance", opt.provenance);
  return t;
}

ResultTable se_average(const ExperimentConfig& c, Exec exec) {
  ResultTable t;
  t.columns = {{"inv_sigma_n2", "dB"}, {"se_optimal", "bit/channel use"}, {"se_da_mrt", "bit/channel use"},
               {"se_conv_mrt", "bit/channel use"}};
  const auto hs = sample_channels(c.n_channels, c.seed);
  const std::vector<double> snrs = c.inv_sigma_n2_db.empty() ? std::vector<double>{0.0} : c.inv_sigma_n2_db;
  for (double s : snrs) {
    const auto m = average_se(hs, units::db_to_linear(-s), c.hw, c.eta, exec);
    t.add_row({s, m.opt, m.da, m.conv});
  }
  return t;
}

ResultTable se_vs_crosstalk(const ExperimentConfig& c, Exec exec) {
  ResultTable t;
  t.columns = {{"kappa1_sq", "dB"}, {"kappa2_sq", "dB"}, {"se_optimal", "bit/channel use"},
               {"se_da_mrt", "bit/channel use"}, {"se_conv_mrt", "bit/channel use"}};
  const auto hs = sample_channels(c.n_channels, c.seed);
  for (const auto& k2 : c.kappa2_db) {
    const auto m = average_se(hs, c.sigma_n2, c.hardware_with_kappa(k2), c.eta, exec);
    t.add_row({k2[0], k2[1], m.opt, m.da, m.conv});
  }
  return t;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& c, Exec exec) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultTable t;
  if (c.kind == "gaussian-validation")
    t = gaussian_validation(c, exec);
  else if (c.kind == "nmse-sweep")
    t = nmse_sweep(c, exec);
  else if (c.kind == "backoff-vs-gain")
    t = backoff_vs_gain(c);
  else if (c.kind == "se-perturbation")
    t = se_perturbation(c);
  else if (c.kind == "se-mrt-sweep")
    t = se_mrt_sweep(c);
  else if (c.kind == "se-average")
    t = se_average(c, exec);
  else if (c.kind == "se-vs-crosstalk")
    t = se_vs_crosstalk(c, exec);
  else
    throw ConfigError("unknown experiment kind '" + c.kind + "'");

  std::vector<std::pair<std::string, std::string>> meta{
      {"experiment", c.kind}, {"config_hash", c.hash}, {"seed", std::to_string(c.seed)},
      {"version", DIRTYTX_VERSION}};
  if (c.record_wall_time) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    meta.emplace_back("wall_time_s", format_number(s));
  }
  meta.insert(meta.end(), t.metadata.begin(), t.metadata.end());
  t.metadata = std::move(meta);
  return t;
}

std::string format_number(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const ResultTable& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out += ',';
    out += csv_field(t.columns[c].name + " [" + t.columns[c].unit + "]");
  }
  out += "\r\n";
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out += ',';
      out += format_number(r[c]);
    }
    out += "\r\n";
  }
  return out;
}

std::string to_json(const ResultTable& t) {
  nlohmann::ordered_json j;
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.metadata) j["metadata"][k] = v;
  j["columns"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    nlohmann::ordered_json col;
    col["name"] = t.columns[c].name;
    col["unit"] = t.columns[c].unit;
    col["values"] = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) col["values"].push_back(r[c]);
    j["columns"].push_back(std::move(col));
  }
  return j.dump(2) + "\n";
}

std::string emit(const ResultTable& t, OutputFormat f) {
  return f == OutputFormat::csv ? to_csv(t) : to_json(t);
}

}  // namespace dirtytx
