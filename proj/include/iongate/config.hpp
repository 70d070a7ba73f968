#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "iongate/chain.hpp"
#include "iongate/errors.hpp"
#include "iongate/modes.hpp"
#include "iongate/physcore.hpp"

namespace iongate {

inline ConfigMap parse_json_config(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("JSON config must be a flat object");
  ConfigMap out;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else if (value.is_number() || value.is_boolean()) {
      out[key] = value.dump();
    } else {
      throw ConfigError("config key '" + key + "' must hold a scalar");
    }
  }
  return out;
}

// Flat TOML subset: `key = value` lines, '#' comments, scalar values only.
inline ConfigMap parse_toml_config(std::string_view text) {
  ConfigMap out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string body;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      body += c;
    }
    body = trim(body);
    if (body.empty()) continue;
    if (body.front() == '[') throw ConfigError("TOML config must be flat (line " + std::to_string(line_no) + ")");
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value on line " + std::to_string(line_no));
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("empty key or value on line " + std::to_string(line_no));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else {
      value.erase(std::remove(value.begin(), value.end(), '_'), value.end());
    }
    if (out.contains(key)) throw ConfigError("duplicate key '" + key + "'");
    out[key] = value;
  }
  return out;
}

inline ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() == ".toml") return parse_toml_config(text);
  if (path.extension() == ".json") return parse_json_config(text);
  const auto first = text.find_first_not_of(" \t\r\n");
  return first != std::string::npos && text[first] == '{' ? parse_json_config(text) : parse_toml_config(text);
}

inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = physical_param_keys();
    k.insert({"n_ions", "n_edge", "b", "mean_spacing_m", "alpha2", "alpha4", "beta_convention"});
    return k;
  }();
  return keys;
}

// Physical parameters plus chain and thermal settings shared by every command.
struct RunConfig {
  ConfigMap resolved;
  PhysicalParams params;
  std::size_t n_ions = 120;
  std::size_t n_edge = 10;
  double b = -6.1;
  double mean_spacing = 10e-6;
  std::optional<AxialPotential> explicit_potential;
  ThermalConvention convention = ThermalConvention::paper;

  IonChain build_chain() const {
    if (explicit_potential) return solve_equilibrium(*explicit_potential, params, n_ions, std::nullopt, n_edge);
    return solve_for_spacing(b, mean_spacing, params, n_ions, n_edge);
  }
};

inline std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = detail::parse_number(key, text);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e7) throw ConfigError("'" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline ThermalConvention parse_convention(const std::string& text) {
  if (text == "paper") return ThermalConvention::paper;
  if (text == "standard") return ThermalConvention::standard;
  throw ConfigError("beta_convention must be 'paper' or 'standard'");
}

inline RunConfig resolve_config(const ConfigMap& config) {
  for (const auto& [key, value] : config) {
    if (!run_config_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig rc;
  ConfigMap physical;
  for (const auto& key : physical_param_keys()) {
    if (auto it = config.find(key); it != config.end()) physical[key] = it->second;
  }
  rc.params = make_params(physical);

  auto text = [&](const std::string& key) -> std::optional<std::string> {
    auto it = config.find(key);
    if (it == config.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = text("n_ions")) rc.n_ions = parse_count("n_ions", *v);
  if (auto v = text("n_edge")) rc.n_edge = parse_count("n_edge", *v);
  if (rc.n_ions < 2) throw ConfigError("n_ions must be at least 2");
  if (rc.n_ions < 2 * rc.n_edge + 2) throw ConfigError("n_edge leaves no qubit ions");
  if (auto v = text("beta_convention")) rc.convention = parse_convention(*v);

  const bool explicit_pot = config.contains("alpha2") || config.contains("alpha4");
  if (explicit_pot) {
    if (config.contains("b") || config.contains("mean_spacing_m")) {
      throw ConfigError("give either alpha2/alpha4 or b/mean_spacing_m, not both");
    }
    if (!config.contains("alpha2")) throw ConfigError("missing key 'alpha2'");
    const double a2 = detail::parse_number("alpha2", *text("alpha2"));
    const double a4 = config.contains("alpha4") ? detail::parse_number("alpha4", *text("alpha4")) : 0.0;
    rc.explicit_potential = a4 == 0.0 ? AxialPotential::harmonic(a2) : AxialPotential::quartic(a2, a4);
  } else {
    if (auto v = text("b")) rc.b = detail::parse_number("b", *v);
    if (auto v = text("mean_spacing_m")) rc.mean_spacing = detail::parse_number("mean_spacing_m", *v);
    if (!std::isfinite(rc.b)) throw ConfigError("'b' must be finite");
    if (!(rc.mean_spacing > 0.0)) throw ConfigError("'mean_spacing_m' must be positive");
  }

  rc.resolved = config;
  auto fill = [&](const std::string& key, const std::string& value) { rc.resolved.try_emplace(key, value); };
  fill("mass_amu", "171");
  fill("omega_x_hz", "5e6");
  fill("omega_y_hz", "5e6");
  if (!config.contains("temperature_k")) fill("temperature_hz", "1e7");
  fill("wavevector_per_m", "1.56e7");
  fill("waist_m", "4e-6");
  fill("n_ions", std::to_string(rc.n_ions));
  fill("n_edge", std::to_string(rc.n_edge));
  fill("beta_convention", rc.convention == ThermalConvention::paper ? "paper" : "standard");
  if (!explicit_pot) {
    fill("b", "-6.1");
    fill("mean_spacing_m", "1e-5");
  }
  return rc;
}

}  // namespace iongate
