#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "iongate/config.hpp"
#include "iongate/iongate.hpp"

namespace iongate::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { ok = 0, config_error = 2, physics_error = 3 };

using nlohmann::ordered_json;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Collects every file a command writes; the manifest goes out last.
class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir_ / name).string());
    f << content;
    files_.push_back({{"file", name}, {"sha256", sha256_hex(content)}});
  }

  void write_json(const std::string& name, ordered_json doc) {
    doc["manifest"] = "manifest.json";
    write(name, doc.dump(2) + "\n");
  }

  void write_manifest(const std::string& command, const ConfigMap& resolved, const ordered_json& inputs) {
    ordered_json m;
    m["command"] = command;
    m["version"] = version;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
    m["timestamp"] = stamp;
    m["config"] = ordered_json(resolved);
    m["inputs"] = inputs;
    m["artifacts"] = files_;
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    if (!f) throw ConfigError("cannot write manifest");
    f << m.dump(2) << "\n";
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  ordered_json files_ = ordered_json::array();
};

// CSV writer with a header row and round-trip precision.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    out_ << std::setprecision(17);
    bool first = true;
    for (auto h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << "\n";
  }

  template <class... T>
  void row(const T&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << "\n";
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  unsigned threads = 1;
  bool json_errors = false;
  std::vector<std::string> sets;

  std::string axis = "x";
  bool vectors = false;

  double b_min = -15.0;
  double b_max = 0.0;
  std::size_t b_points = 60;

  std::string pair = "59,62";
  double mu_rel = 9.3e-3;
  double tau_periods = 500.0;
  std::size_t segments = 5;
  std::size_t window = 8;
  std::string branch = "1,1";
  double mu_min = 0.0;
  double mu_max = 0.03;
  std::size_t mu_points = 151;

  std::string target;
};

inline std::pair<long, long> parse_int_pair(const std::string& flag, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError(flag + " expects two comma-separated integers");
  try {
    std::size_t p1 = 0, p2 = 0;
    const std::string a = text.substr(0, comma), b = text.substr(comma + 1);
    const long x = std::stol(a, &p1), y = std::stol(b, &p2);
    if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument(text);
    return {x, y};
  } catch (const std::logic_error&) {
    throw ConfigError(flag + " expects two comma-separated integers, got '" + text + "'");
  }
}

inline IonPair parse_pair(const std::string& text) {
  const auto [a, b] = parse_int_pair("--pair", text);
  if (a < 1 || b < 1) throw ConfigError("--pair indices are 1-based");
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

inline SpinBranch parse_branch(const std::string& text) {
  const auto [a, b] = parse_int_pair("--branch", text);
  if (std::abs(a) != 1 || std::abs(b) != 1) throw ConfigError("--branch entries must be +1 or -1");
  return {static_cast<int>(a), static_cast<int>(b)};
}

inline Axis parse_axis(const std::string& text) {
  if (text == "x") return Axis::transverse_x;
  if (text == "y") return Axis::transverse_y;
  if (text == "z") return Axis::axial;
  throw ConfigError("--axis must be x, y or z");
}

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::transverse_x: return "x";
    case Axis::transverse_y: return "y";
    default: return "z";
  }
}

inline double to_hz(double omega) { return omega / constants::two_pi; }

// State shared by the command handlers.
struct Context {
  Options opt;
  RunConfig rc;
  std::ostream& out;
  std::ostream& err;
  Artifacts& art;

  double tau0() const { return constants::two_pi / rc.params.omega_x; }
  double detuning(double rel) const { return rc.params.omega_x * (1.0 + rel); }

  std::vector<double> mu_grid() const {
    if (opt.mu_points < 2) throw ConfigError("--points must be at least 2");
    if (!(opt.mu_max > opt.mu_min)) throw ConfigError("--mu-max must exceed --mu-min");
    std::vector<double> g(opt.mu_points);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = opt.mu_min + (opt.mu_max - opt.mu_min) * static_cast<double>(i) / static_cast<double>(g.size() - 1);
    }
    return g;
  }
};

inline ordered_json gate_json(const GateResult& r, double omega_x) {
  ordered_json j;
  j["pair"] = {r.schedule.target_pair.first, r.schedule.target_pair.second};
  j["mu_rel"] = r.schedule.detuning / omega_x - 1.0;
  j["gate_time_s"] = r.schedule.gate_time;
  j["segments"] = r.schedule.n_segments();
  j["amplitudes_rad_per_s"] = r.schedule.amplitudes;
  j["phase_rad"] = r.phase;
  j["phase_sign"] = r.phase >= 0.0 ? 1 : -1;
  j["infidelity_exact"] = r.infidelity_exact;
  j["infidelity_quadratic"] = r.infidelity_quadratic;
  return j;
}

inline std::string amplitudes_csv(const GateResult& r) {
  Csv csv{"segment", "t_start_s", "t_end_s", "amplitude_rad_per_s"};
  for (std::size_t s = 0; s < r.schedule.n_segments(); ++s) {
    const auto seg = r.schedule.segment(s);
    csv.row(s + 1, seg.begin, seg.end, r.schedule.amplitudes[s]);
  }
  return csv.str();
}

inline std::string scan_csv(const std::vector<ScanPoint>& scan, double omega_x) {
  Csv csv{"mu_rel", "infidelity_exact", "infidelity_quadratic", "phase_rad"};
  for (const auto& pt : scan) {
    const double rel = pt.detuning / omega_x - 1.0;
    if (pt.result) {
      csv.row(rel, pt.infidelity, pt.result->infidelity_quadratic, pt.result->phase);
    } else {
      csv.row(rel, "nan", "nan", "nan");
    }
  }
  return csv.str();
}

inline const ScanPoint* best_point(const std::vector<ScanPoint>& scan) {
  const ScanPoint* best = nullptr;
  for (const auto& pt : scan) {
    if (pt.result && (!best || pt.infidelity < best->infidelity)) best = &pt;
  }
  return best;
}

inline std::string response_csv(const ResponseProfile& prof) {
  Csv csv{"ion", "max_displacement_m", "normalized"};
  for (std::size_t n = 0; n < prof.ions.size(); ++n) csv.row(prof.ions[n], prof.max_displacement[n], prof.normalized[n]);
  return csv.str();
}

inline void emit(Context& c, const ordered_json& summary) { c.out << summary.dump(2) << "\n"; }

// ---- commands -------------------------------------------------------------

inline int cmd_chain_solve(Context& c) {
  const IonChain chain = c.rc.build_chain();
  const auto stats = spacing_stats(chain);
  Csv csv{"ion", "z_m", "z_dimensionless"};
  const auto u = chain.dimensionless_positions();
  for (std::size_t i = 0; i < chain.size(); ++i) csv.row(i + 1, chain.positions[i], u[i]);
  c.art.write("chain.csv", csv.str());
  Csv sp{"ion", "spacing_m"};
  for (std::size_t i = 0; i < stats.spacings.size(); ++i) sp.row(i + 1, stats.spacings[i]);
  c.art.write("spacings.csv", sp.str());

  ordered_json j;
  j["n_ions"] = chain.size();
  j["n_edge"] = chain.n_edge;
  if (chain.potential.kind == PotentialKind::quartic) j["b"] = b_parameter(chain.potential, chain.params);
  j["alpha2"] = chain.potential.alpha2;
  j["alpha4"] = chain.potential.alpha4;
  j["length_scale_m"] = chain.units.length;
  j["qubit_mean_spacing_m"] = stats.qubit_mean;
  j["s_z_m"] = stats.s_z;
  j["relative_deviation"] = stats.relative_deviation;
  c.art.write_json("chain.json", j);
  emit(c, j);
  return ok;
}

inline int cmd_chain_optimize_b(Context& c) {
  const auto opt = optimize_b(c.rc.params, c.rc.n_ions, c.rc.n_edge, {c.opt.b_min, c.opt.b_max}, c.rc.mean_spacing,
                              c.opt.b_points, c.opt.threads);
  Csv csv{"b", "s_z_m", "relative_deviation"};
  for (const auto& pt : opt.curve) csv.row(pt.b, pt.s_z, pt.relative_deviation);
  c.art.write("b_curve.csv", csv.str());
  ordered_json j;
  j["b_opt"] = opt.b_opt;
  j["s_z_m"] = opt.s_z;
  j["relative_deviation"] = opt.relative_deviation;
  j["length_scale_m"] = opt.length_scale;
  j["minimum"] = opt.location == MinimumLocation::interior         ? "interior"
                 : opt.location == MinimumLocation::lower_boundary ? "lower_boundary"
                                                                   : "upper_boundary";
  c.art.write_json("optimize_b.json", j);
  emit(c, j);
  if (opt.at_boundary()) {
    c.err << "error: s_z minimum lies on the edge of the B range; widen --b-min/--b-max\n";
    return physics_error;
  }
  return ok;
}

inline int cmd_modes(Context& c) {
  const Axis axis = parse_axis(c.opt.axis);
  const IonChain chain = c.rc.build_chain();
  const ModeSet modes = diagonalize(chain, axis);
  const std::string tag = axis_name(axis);
  Csv csv{"mode", "frequency_hz"};
  for (std::size_t k = 0; k < modes.size(); ++k) csv.row(k, to_hz(modes.frequencies[k]));
  c.art.write("modes_" + tag + ".csv", csv.str());
  if (c.opt.vectors) {
    std::ostringstream v;
    v << std::setprecision(17) << "ion";
    for (std::size_t k = 0; k < modes.size(); ++k) v << ",mode_" << k;
    v << "\n";
    for (Eigen::Index n = 0; n < modes.vectors.rows(); ++n) {
      v << modes.ions[static_cast<std::size_t>(n)] + 1;
      for (Eigen::Index k = 0; k < modes.vectors.cols(); ++k) v << "," << modes.vectors(n, k);
      v << "\n";
    }
    c.art.write("mode_vectors_" + tag + ".csv", v.str());
  }
  ordered_json j;
  j["axis"] = tag;
  j["modes"] = modes.size();
  j["min_frequency_hz"] = to_hz(*std::min_element(modes.frequencies.begin(), modes.frequencies.end()));
  j["max_frequency_hz"] = to_hz(*std::max_element(modes.frequencies.begin(), modes.frequencies.end()));
  j["stability_threshold_hz"] = to_hz(stability_threshold_exact(chain));
  c.art.write_json("modes_" + tag + ".json", j);
  emit(c, j);
  return ok;
}

struct ThermalSummary {
  std::vector<double> delta_z;
  double qubit_mean = 0.0;
  double nbar_lowest_axial = 0.0;
  double nbar_x_mean = 0.0;
};

inline ThermalSummary thermal_summary(const IonChain& chain, ThermalConvention conv) {
  const auto ax = diagonalize(chain, Axis::axial);
  const auto tr = diagonalize(chain, Axis::transverse_x);
  const auto th_ax = thermal_state(ax, chain.params, conv);
  const auto th_tr = thermal_state(tr, chain.params, conv);
  ThermalSummary s;
  s.delta_z = axial_position_fluctuation(ax, th_ax, chain.params);
  const auto first = s.delta_z.begin() + static_cast<std::ptrdiff_t>(chain.n_edge);
  const auto last = s.delta_z.end() - static_cast<std::ptrdiff_t>(chain.n_edge);
  s.qubit_mean = std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
  s.nbar_lowest_axial = th_ax.nbar.front();
  s.nbar_x_mean = std::accumulate(th_tr.nbar.begin(), th_tr.nbar.end(), 0.0) / static_cast<double>(th_tr.nbar.size());
  return s;
}

inline std::string delta_z_csv(const std::vector<double>& dz) {
  Csv csv{"ion", "delta_z_m"};
  for (std::size_t n = 0; n < dz.size(); ++n) csv.row(n + 1, dz[n]);
  return csv.str();
}

inline int cmd_thermal(Context& c) {
  const IonChain chain = c.rc.build_chain();
  const auto s = thermal_summary(chain, c.rc.convention);
  c.art.write("delta_z.csv", delta_z_csv(s.delta_z));
  ordered_json j;
  j["beta_convention"] = c.rc.convention == ThermalConvention::paper ? "paper" : "standard";
  j["delta_z_qubit_mean_m"] = s.qubit_mean;
  j["nbar_lowest_axial"] = s.nbar_lowest_axial;
  j["nbar_x_mean"] = s.nbar_x_mean;
  c.art.write_json("thermal.json", j);
  emit(c, j);
  return ok;
}

struct GateSetup {
  IonChain chain;
  ModeSet modes;
  ThermalState thermal;
};

inline GateSetup gate_setup(const Context& c) {
  GateSetup g{c.rc.build_chain(), {}, {}};
  g.modes = diagonalize(g.chain, Axis::transverse_x);
  g.thermal = thermal_state(g.modes, g.chain.params, c.rc.convention);
  return g;
}

inline int cmd_gate_optimize(Context& c) {
  const auto g = gate_setup(c);
  const auto r = optimize_segments(parse_pair(c.opt.pair), c.detuning(c.opt.mu_rel), c.opt.tau_periods * c.tau0(),
                                   c.opt.segments, g.modes, g.thermal, g.chain.params);
  c.art.write("amplitudes.csv", amplitudes_csv(r));
  const auto j = gate_json(r, g.chain.params.omega_x);
  c.art.write_json("gate.json", j);
  emit(c, j);
  return ok;
}

inline int cmd_gate_scan(Context& c) {
  const auto g = gate_setup(c);
  std::vector<double> mu;
  for (double rel : c.mu_grid()) mu.push_back(c.detuning(rel));
  const auto scan = scan_detuning(parse_pair(c.opt.pair), mu, c.opt.tau_periods * c.tau0(), c.opt.segments, g.modes,
                                  g.thermal, g.chain.params, c.opt.threads);
  c.art.write("scan.csv", scan_csv(scan, g.chain.params.omega_x));
  const auto* best = best_point(scan);
  if (!best) throw PhysicsError("no detuning in the scan produced a usable pulse");
  ordered_json j;
  j["tau_periods"] = c.opt.tau_periods;
  j["points"] = scan.size();
  j["best"] = gate_json(*best->result, g.chain.params.omega_x);
  c.art.write("amplitudes.csv", amplitudes_csv(*best->result));
  c.art.write_json("scan.json", j);
  emit(c, j);
  return ok;
}

inline int cmd_gate_response(Context& c) {
  const auto g = gate_setup(c);
  const auto r = optimize_segments(parse_pair(c.opt.pair), c.detuning(c.opt.mu_rel), c.opt.tau_periods * c.tau0(),
                                   c.opt.segments, g.modes, g.thermal, g.chain.params);
  const auto prof = response_profile(r, g.modes, g.chain.params, parse_branch(c.opt.branch));
  c.art.write("response.csv", response_csv(prof));
  auto j = gate_json(r, g.chain.params.omega_x);
  j["branch"] = c.opt.branch;
  c.art.write_json("response.json", j);
  emit(c, j);
  return ok;
}

inline int cmd_gate_truncate(Context& c) {
  const IonChain chain = c.rc.build_chain();
  const auto t = truncated_chain_gate(parse_pair(c.opt.pair), c.opt.window, chain, c.detuning(c.opt.mu_rel),
                                      c.opt.tau_periods * c.tau0(), c.opt.segments, c.rc.convention);
  c.art.write("amplitudes_full.csv", amplitudes_csv(t.full));
  c.art.write("amplitudes_window.csv", amplitudes_csv(t.result));
  ordered_json j;
  j["window"] = c.opt.window;
  j["first_free_ion"] = t.first_free;
  j["last_free_ion"] = t.last_free;
  j["amplitude_distance"] = t.amplitude_distance;
  j["full"] = gate_json(t.full, chain.params.omega_x);
  j["window_result"] = gate_json(t.result, chain.params.omega_x);
  c.art.write_json("truncate.json", j);
  emit(c, j);
  return ok;
}

inline int cmd_errors(Context& c) {
  const IonChain chain = c.rc.build_chain();
  const auto ax = diagonalize(chain, Axis::axial);
  const auto tr = diagonalize(chain, Axis::transverse_x);
  const auto b = full_budget(chain, ax, tr, chain.params, c.rc.convention);
  ordered_json j;
  j["crosstalk_p"] = b.crosstalk_p;
  j["axial_rabi_infidelity"] = b.axial_rabi_infidelity;
  j["anharmonic_infidelity"] = b.anharmonic_infidelity;
  j["lamb_dicke_infidelity"] = b.lamb_dicke_infidelity;
  j["inputs"] = {{"waist_m", b.waist},
                 {"mean_spacing_m", b.mean_spacing},
                 {"delta_z_m", b.delta_z},
                 {"eta_x", b.eta_x},
                 {"nbar_x", b.nbar_x}};
  j["note"] = b.note;
  c.art.write_json("errors.json", j);

  auto line = [&](const char* name, double v) {
    c.out << "  " << std::left << std::setw(28) << name << std::scientific << std::setprecision(3) << v << "\n";
  };
  c.out << "error budget\n";
  line("cross-talk P_c", b.crosstalk_p);
  line("axial Rabi dF1", b.axial_rabi_infidelity);
  line("anharmonicity dF2", b.anharmonic_infidelity);
  line("Lamb-Dicke dF3 [*]", b.lamb_dicke_infidelity);
  c.out << "inputs\n";
  line("waist (m)", b.waist);
  line("mean spacing (m)", b.mean_spacing);
  line("delta z (m)", b.delta_z);
  line("eta_x", b.eta_x);
  line("nbar_x", b.nbar_x);
  c.out << "[*] " << b.note << "\n";
  c.out.unsetf(std::ios::floatfield);
  return ok;
}

// ---- figure presets --------------------------------------------------------

inline const std::vector<double>& preset_gate_times() {
  static const std::vector<double> t{50.0, 100.0, 250.0, 500.0};
  return t;
}

inline int reproduce(Context& c) {
  const std::string& t = c.opt.target;
  if (t == "fig2b" || t == "fig2c") {
    const auto opt = optimize_b(c.rc.params, c.rc.n_ions, c.rc.n_edge, {c.opt.b_min, c.opt.b_max},
                                c.rc.mean_spacing, c.opt.b_points, c.opt.threads);
    ordered_json j;
    j["b_opt"] = opt.b_opt;
    j["relative_deviation"] = opt.relative_deviation;
    if (t == "fig2b") {
      Csv csv{"b", "s_z_m", "relative_deviation"};
      for (const auto& pt : opt.curve) csv.row(pt.b, pt.s_z, pt.relative_deviation);
      c.art.write("fig2b.csv", csv.str());
    } else {
      const auto chain = solve_for_spacing(opt.b_opt, c.rc.mean_spacing, c.rc.params, c.rc.n_ions, c.rc.n_edge);
      const auto stats = spacing_stats(chain);
      Csv csv{"ion", "spacing_m", "qubit"};
      for (std::size_t i = 0; i < stats.spacings.size(); ++i) {
        const bool qubit = i >= chain.n_edge && i + chain.n_edge + 1 < chain.size();
        csv.row(i + 1, stats.spacings[i], qubit ? 1 : 0);
      }
      c.art.write("fig2c.csv", csv.str());
      j["stability_threshold_hz"] = to_hz(stability_threshold_exact(chain));
    }
    c.art.write_json(t + ".json", j);
    emit(c, j);
    return ok;
  }

  const auto g = gate_setup(c);
  const auto& p = g.chain.params;
  const IonPair pair = parse_pair(c.opt.pair);
  std::vector<double> mu;
  for (double rel : c.mu_grid()) mu.push_back(c.detuning(rel));

  if (t == "fig3a") {
    Csv csv{"tau_periods", "mu_rel", "infidelity_exact"};
    ordered_json j;
    j["band_hz"] = {to_hz(g.modes.frequencies.back()), to_hz(g.modes.frequencies.front())};
    for (double periods : preset_gate_times()) {
      const auto scan = scan_detuning(pair, mu, periods * c.tau0(), c.opt.segments, g.modes, g.thermal, p,
                                      c.opt.threads);
      for (const auto& pt : scan) csv.row(periods, pt.detuning / p.omega_x - 1.0, pt.infidelity);
      if (const auto* best = best_point(scan)) {
        j["best"].push_back({{"tau_periods", periods},
                             {"mu_rel", best->detuning / p.omega_x - 1.0},
                             {"infidelity_exact", best->infidelity}});
      }
    }
    c.art.write("fig3a.csv", csv.str());
    c.art.write_json("fig3a.json", j);
    emit(c, j);
    return ok;
  }

  const double mu_opt = c.detuning(c.opt.mu_rel);
  const double tau = c.opt.tau_periods * c.tau0();
  if (t == "fig3b") {
    const auto w4 = truncated_chain_gate(pair, 4, g.chain, mu_opt, tau, c.opt.segments, c.rc.convention);
    const auto w8 = truncated_chain_gate(pair, 8, g.chain, mu_opt, tau, c.opt.segments, c.rc.convention);
    // Report every profile with the full solution's sign.
    auto aligned = [&](const GateResult& r) {
      std::vector<double> a = r.schedule.amplitudes;
      double dot = 0.0;
      for (std::size_t s = 0; s < a.size(); ++s) dot += a[s] * w4.full.schedule.amplitudes[s];
      if (dot < 0.0) {
        for (double& x : a) x = -x;
      }
      return a;
    };
    const auto a4 = aligned(w4.result), a8 = aligned(w8.result);
    Csv csv{"segment", "t_start_s", "t_end_s", "full", "window_4", "window_8"};
    for (std::size_t s = 0; s < c.opt.segments; ++s) {
      const auto seg = w4.full.schedule.segment(s);
      csv.row(s + 1, seg.begin, seg.end, w4.full.schedule.amplitudes[s], a4[s], a8[s]);
    }
    c.art.write("fig3b.csv", csv.str());
    ordered_json j;
    j["full"] = gate_json(w4.full, p.omega_x);
    j["distance_window_4"] = w4.amplitude_distance;
    j["distance_window_8"] = w8.amplitude_distance;
    c.art.write_json("fig3b.json", j);
    emit(c, j);
    return ok;
  }
  if (t == "fig3c") {
    const auto r = optimize_segments(pair, mu_opt, tau, c.opt.segments, g.modes, g.thermal, p);
    const auto prof = response_profile(r, g.modes, p, parse_branch(c.opt.branch));
    c.art.write("fig3c.csv", response_csv(prof));
    const auto j = gate_json(r, p.omega_x);
    c.art.write_json("fig3c.json", j);
    emit(c, j);
    return ok;
  }
  if (t == "fig4") {
    const auto s = thermal_summary(g.chain, c.rc.convention);
    c.art.write("fig4.csv", delta_z_csv(s.delta_z));
    ordered_json j;
    j["delta_z_qubit_mean_m"] = s.qubit_mean;
    c.art.write_json("fig4.json", j);
    emit(c, j);
    return ok;
  }
  throw ConfigError("unknown reproduce target '" + t + "'");
}

// ---- entry point -----------------------------------------------------------

inline void report(std::ostream& err, bool json, int code, const std::string& kind, const std::string& message) {
  if (json) {
    ordered_json e;
    e["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    err << e.dump() << "\n";
  } else {
    err << "error: " << message << "\n";
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options opt;
  CLI::App app{"Trapped-ion chain, normal mode and two-qubit gate toolkit", "iongate"};
  app.set_version_flag("--version", version);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", opt.config_path, "TOML or JSON file with flat key = value settings");
  app.add_option("--out", opt.out_dir, "Directory for CSV/JSON artifacts")->capture_default_str();
  app.add_option("--threads", opt.threads, "Worker threads for scans")->check(CLI::Range(1u, 256u));
  app.add_flag("--json-errors", opt.json_errors, "Print errors as JSON objects");
  app.add_option("--set", opt.sets, "Override a config key (key=value)")->take_all();

  auto add_b_range = [&](CLI::App* s) {
    s->add_option("--b-min", opt.b_min, "Lower end of the B scan")->capture_default_str();
    s->add_option("--b-max", opt.b_max, "Upper end of the B scan")->capture_default_str();
    s->add_option("--b-points", opt.b_points, "Grid points in the B scan")->capture_default_str();
  };
  auto add_gate = [&](CLI::App* s) {
    s->add_option("--pair", opt.pair, "Target ions, 1-based, e.g. 59,62")->capture_default_str();
    s->add_option("--mu-rel", opt.mu_rel, "Detuning (mu - omega_x)/omega_x")->capture_default_str();
    s->add_option("--tau-periods", opt.tau_periods, "Gate time in units of 2 pi/omega_x")->capture_default_str();
    s->add_option("--segments", opt.segments, "Number of pulse segments")->capture_default_str();
    s->add_option("--mu-min", opt.mu_min, "Scan start (relative detuning)")->capture_default_str();
    s->add_option("--mu-max", opt.mu_max, "Scan end (relative detuning)")->capture_default_str();
    s->add_option("--points", opt.mu_points, "Scan points")->capture_default_str();
    s->add_option("--window", opt.window, "Free ions in the truncated chain")->capture_default_str();
    s->add_option("--branch", opt.branch, "Spin eigenvalues of the targets, e.g. 1,-1")->capture_default_str();
  };

  auto* chain = app.add_subcommand("chain", "Equilibrium positions");
  chain->require_subcommand(1);
  auto* chain_solve = chain->add_subcommand("solve", "Solve the equilibrium for the configured trap");
  auto* chain_opt = chain->add_subcommand("optimize-b", "Minimize spacing variance over B");
  add_b_range(chain_opt);
  auto* modes = app.add_subcommand("modes", "Normal modes along one axis");
  modes->add_option("--axis", opt.axis, "x, y or z")->capture_default_str();
  modes->add_flag("--vectors", opt.vectors, "Also write mode vectors");
  auto* thermal = app.add_subcommand("thermal", "Thermal occupations and axial position spread");
  auto* gate = app.add_subcommand("gate", "Segmented-pulse two-qubit gates");
  gate->require_subcommand(1);
  auto* g_opt = gate->add_subcommand("optimize", "Optimize one pulse");
  auto* g_scan = gate->add_subcommand("scan", "Optimize over a detuning grid");
  auto* g_resp = gate->add_subcommand("response", "Ion response profile of the optimized pulse");
  auto* g_trunc = gate->add_subcommand("truncate", "Re-optimize with only a window of ions free");
  for (auto* s : {g_opt, g_scan, g_resp, g_trunc}) add_gate(s);
  auto* errors = app.add_subcommand("errors", "Scalar error budget");
  auto* repro = app.add_subcommand("reproduce", "Regenerate figure data at the baseline");
  repro->add_option("target", opt.target, "fig2b|fig2c|fig3a|fig3b|fig3c|fig4")
      ->required()
      ->check(CLI::IsMember({"fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4"}));
  add_b_range(repro);
  add_gate(repro);

  std::vector<const char*> argv{"iongate"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, opt.json_errors, config_error, "usage", e.what());
    if (!opt.json_errors) err << app.help();
    return config_error;
  }

  std::string command;
  for (const auto& a : args) command += (command.empty() ? "" : " ") + a;

  try {
    ConfigMap config;
    ordered_json inputs = ordered_json::object();
    if (!opt.config_path.empty()) {
      const std::string text = read_file(opt.config_path);
      inputs[opt.config_path] = sha256_hex(text);
      config = load_config_file(opt.config_path);
    }
    for (const auto& kv : opt.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
      config[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    Artifacts art(opt.out_dir);
    Context ctx{opt, resolve_config(config), out, err, art};

    int code = ok;
    if (chain_solve->parsed()) code = cmd_chain_solve(ctx);
    else if (chain_opt->parsed()) code = cmd_chain_optimize_b(ctx);
    else if (modes->parsed()) code = cmd_modes(ctx);
    else if (thermal->parsed()) code = cmd_thermal(ctx);
    else if (g_opt->parsed()) code = cmd_gate_optimize(ctx);
    else if (g_scan->parsed()) code = cmd_gate_scan(ctx);
    else if (g_resp->parsed()) code = cmd_gate_response(ctx);
    else if (g_trunc->parsed()) code = cmd_gate_truncate(ctx);
    else if (errors->parsed()) code = cmd_errors(ctx);
    else if (repro->parsed()) code = reproduce(ctx);
    art.write_manifest(command, ctx.rc.resolved, inputs);
    return code;
  } catch (const ConfigError& e) {
    report(err, opt.json_errors, config_error, "config", e.what());
    return config_error;
  } catch (const StabilityError& e) {
    report(err, opt.json_errors, physics_error, "stability", e.what());
    return physics_error;
  } catch (const PhysicsError& e) {
    report(err, opt.json_errors, physics_error, "physics", e.what());
    return physics_error;
  }
}

}  // namespace iongate::cli
