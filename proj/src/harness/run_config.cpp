// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cca::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view v, std::string_view key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(v) +
                      "' as a number");
  }
  return out;
}

bool parse_bool(std::string_view v, std::string_view key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" +
                    std::string(v) + "'");
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

Setter size_field(std::size_t CcaConfig::*field) {
  return [field](RunConfig& c, std::string_view v, std::string_view k) {
    c.cca.*field = parse_number<std::size_t>(v, k);
  };
}

Setter demo_size(std::size_t DemoConfig::*field) {
  return [field](RunConfig& c, std::string_view v, std::string_view k) {
    c.demo.*field = parse_number<std::size_t>(v, k);
  };
}

Setter demo_real(double DemoConfig::*field) {
  return [field](RunConfig& c, std::string_view v, std::string_view k) {
    c.demo.*field = parse_number<double>(v, k);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"c_in", size_field(&CcaConfig::c_in)},
      {"c_mid", size_field(&CcaConfig::c_mid)},
      {"c_out", size_field(&CcaConfig::c_out)},
      {"n_keys", size_field(&CcaConfig::n_keys)},
      {"stride", size_field(&CcaConfig::stride)},
      {"heads", size_field(&CcaConfig::heads)},
      {"layers", size_field(&CcaConfig::layers)},
      {"ffn_hidden", size_field(&CcaConfig::ffn_hidden)},
      {"dilation_rates",
       [](RunConfig& c, std::string_view v, std::string_view k) {
         std::array<std::size_t, kLcfeBranches> rates{};
         std::size_t i = 0;
         while (!v.empty()) {
           const auto comma = v.find(',');
           if (i == rates.size()) throw ConfigError("config key 'dilation_rates': expected 3 rates");
           rates[i++] = parse_number<std::size_t>(trim(v.substr(0, comma)), k);
           v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
         }
         if (i != rates.size()) throw ConfigError("config key 'dilation_rates': expected 3 rates");
         c.cca.rates = rates;
       }},
      {"bias", [](RunConfig& c, std::string_view v, std::string_view k) { c.cca.bias = parse_bool(v, k); }},
      {"positional_encoding",
       [](RunConfig& c, std::string_view v, std::string_view k) {
         c.cca.positional_encoding = parse_bool(v, k);
       }},
      {"layer_norm_eps",
       [](RunConfig& c, std::string_view v, std::string_view k) {
         c.cca.layer_norm_eps = parse_number<double>(v, k);
       }},
      {"scatter",
       [](RunConfig& c, std::string_view v, std::string_view) {
         if (v == "add") c.cca.scatter = ScatterMode::add;
         else if (v == "overwrite") c.cca.scatter = ScatterMode::overwrite;
         else throw ConfigError("config key 'scatter': expected add or overwrite");
       }},
      {"seed", [](RunConfig& c, std::string_view v, std::string_view k) { c.seed = parse_number<std::uint64_t>(v, k); }},
      {"dtype", [](RunConfig& c, std::string_view v, std::string_view) { c.dtype = parse_dtype(v); }},
      {"interpolation",
       [](RunConfig& c, std::string_view v, std::string_view) {
         if (v == "all_points") c.interpolation = metrics::Interpolation::all_points;
         else if (v == "101") c.interpolation = metrics::Interpolation::points101;
         else throw ConfigError("config key 'interpolation': expected all_points or 101");
       }},
      {"gradcheck.tolerance",
       [](RunConfig& c, std::string_view v, std::string_view k) {
         c.gradcheck_tolerance = parse_number<double>(v, k);
       }},
      {"demo.epochs", demo_size(&DemoConfig::epochs)},
      {"demo.learning_rate", demo_real(&DemoConfig::learning_rate)},
      {"demo.size", demo_size(&DemoConfig::size)},
      {"demo.patches", demo_size(&DemoConfig::patches)},
      {"demo.patch_side", demo_size(&DemoConfig::patch_side)},
      {"demo.amplitude", demo_real(&DemoConfig::amplitude)},
      {"demo.noise", demo_real(&DemoConfig::noise)},
      {"demo.key_radius", demo_size(&DemoConfig::key_radius)},
  };
  return table;
}

}  // namespace

DType parse_dtype(std::string_view text) {
  if (text == "f32") return DType::f32;
  if (text == "f64") return DType::f64;
  throw ConfigError("dtype must be f32 or f64, got '" + std::string(text) + "'");
}

std::string_view dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    }
    try {
      it->second(config, value, key);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string default_config_text() {
  const RunConfig d;
  std::ostringstream os;
  os << "# CCA block\n"
     << "c_in = " << d.cca.c_in << "\n"
     << "c_mid = " << d.cca.c_mid << "\n"
     << "c_out = " << d.cca.c_out << "\n"
     << "n_keys = " << d.cca.n_keys << "\n"
     << "dilation_rates = " << d.cca.rates[0] << ',' << d.cca.rates[1] << ',' << d.cca.rates[2]
     << "\n"
     << "stride = " << d.cca.stride << "          # conv1/conv2 stride, 1 or 2\n"
     << "bias = true\n"
     << "heads = " << d.cca.heads << "\n"
     << "layers = " << d.cca.layers << "\n"
     << "ffn_hidden = 0          # 0 means 4 * c_mid\n"
     << "positional_encoding = false\n"
     << "layer_norm_eps = " << d.cca.layer_norm_eps << "\n"
     << "scatter = add           # add | overwrite\n"
     << "# run\n"
     << "seed = " << d.seed << "\n"
     << "dtype = f32             # f32 | f64\n"
     << "interpolation = all_points   # all_points | 101\n"
     << "gradcheck.tolerance = " << d.gradcheck_tolerance << "\n"
     << "# synthetic demo\n"
     << "demo.epochs = " << d.demo.epochs << "\n"
     << "demo.learning_rate = " << d.demo.learning_rate << "\n"
     << "demo.size = " << d.demo.size << "\n"
     << "demo.patches = " << d.demo.patches << "\n"
     << "demo.patch_side = " << d.demo.patch_side << "\n"
     << "demo.amplitude = " << d.demo.amplitude << "\n"
     << "demo.noise = " << d.demo.noise << "\n"
     << "demo.key_radius = " << d.demo.key_radius << "\n";
  return os.str();
}

}  // namespace cca::harness
