#pragma once

// Scenario files, CSV time series and JSON run reports.
//
// Scenario files are flat `key = value` text, one entry per line, `#` starts
// a comment. Followers are listed front to back, one `follower` line each:
//
//     tau = 0.5
//     T = 10
//     dt_output = 0.01
//     dt_oracle = 0.001
//     epsilon = 0.1
//     strategy = ca-timevarying
//     trajectory_form = exact
//     leader = 23 2                  # p0 v0
//     follower = 18 2.5 1 6 2 1 12   # p v a omega d r mu

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "platoon/errors.hpp"
#include "platoon/oracle.hpp"
#include "platoon/scenario.hpp"

namespace platoon {

inline constexpr std::string_view kPaperPreset = "paper-sec5";

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(std::string_view text, std::size_t line, std::string_view field) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError("field '" + std::string(field) + "': expected a finite number, got '" +
                          std::string(text) + "'",
                      line);
  }
  return v;
}

inline std::vector<double> parse_numbers(std::string_view text, std::size_t count,
                                         std::size_t line, std::string_view field) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto b = text.find_first_not_of(" \t,", pos);
    if (b == std::string_view::npos) break;
    auto e = text.find_first_of(" \t,", b);
    if (e == std::string_view::npos) e = text.size();
    out.push_back(parse_number(text.substr(b, e - b), line, field));
    pos = e;
  }
  if (out.size() != count) {
    throw ConfigError("field '" + std::string(field) + "': expected " + std::to_string(count) +
                          " numbers, got " + std::to_string(out.size()),
                      line);
  }
  return out;
}

}  // namespace detail

// Parses and validates a scenario document.
inline PlatoonConfig parse_config(std::istream& in) {
  PlatoonConfig c;
  c.followers.clear();
  std::set<std::string> seen;
  std::optional<CaVariant> variant;
  bool have_leader = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = detail::trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key(detail::trim(text.substr(0, eq)));
    const std::string_view value = detail::trim(text.substr(eq + 1));
    if (key != "follower" && !seen.insert(key).second) {
      throw ConfigError("duplicate key '" + key + "'", line);
    }

    if (key == "tau") {
      c.tau = detail::parse_number(value, line, key);
    } else if (key == "T") {
      c.T = detail::parse_number(value, line, key);
    } else if (key == "dt_output") {
      c.dt_output = detail::parse_number(value, line, key);
    } else if (key == "dt_oracle") {
      c.dt_oracle = detail::parse_number(value, line, key);
    } else if (key == "epsilon") {
      c.epsilon = detail::parse_number(value, line, key);
    } else if (key == "strategy") {
      const auto s = parse_strategy(value);
      if (!s) throw ConfigError("field 'strategy': unknown value '" + std::string(value) + "'", line);
      c.strategy = *s;
    } else if (key == "variant") {
      variant = parse_variant(value);
      if (!variant) throw ConfigError("field 'variant': unknown value '" + std::string(value) + "'", line);
    } else if (key == "trajectory_form") {
      const auto f = parse_trajectory_form(value);
      if (!f) {
        throw ConfigError("field 'trajectory_form': unknown value '" + std::string(value) + "'", line);
      }
      c.trajectory_form = *f;
    } else if (key == "leader") {
      const auto v = detail::parse_numbers(value, 2, line, key);
      c.leader = {v[0], v[1]};
      have_leader = true;
    } else if (key == "follower") {
      const auto v = detail::parse_numbers(value, 7, line, key);
      c.followers.push_back({make_state(v[0], v[1], v[2]), FollowerParams{v[3], v[4], v[5], v[6]}});
    } else {
      throw ConfigError("unknown key '" + key + "'", line);
    }
  }
  if (!have_leader) throw ConfigError("missing key 'leader'");
  if (variant) {
    const auto implied = variant_of(c.strategy);
    if (implied && *implied != *variant) {
      throw ConfigError("field 'variant' (" + std::string(to_string(*variant)) +
                        ") contradicts strategy " + std::string(to_string(c.strategy)));
    }
  }
  validate(c);
  return c;
}

inline PlatoonConfig parse_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

// A scenario file path or the name of a built-in preset.
inline PlatoonConfig load_config(const std::string& path_or_name) {
  if (path_or_name == kPaperPreset) return paper_sec5_config();
  std::ifstream in(path_or_name);
  if (!in) throw IoError("cannot open scenario file '" + path_or_name + "'");
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline std::vector<std::string> csv_header(std::size_t followers) {
  std::vector<std::string> cols{"t"};
  for (std::size_t i = 0; i <= followers; ++i) {
    const std::string s = std::to_string(i);
    for (const char* q : {"p_", "v_", "a_", "u_"}) cols.push_back(q + s);
  }
  for (std::size_t i = 1; i <= followers; ++i) cols.push_back("spacing_" + std::to_string(i));
  for (std::size_t i = 1; i <= followers; ++i) cols.push_back("f_" + std::to_string(i));
  return cols;
}

inline void write_csv(std::ostream& out, std::span<const TrajectorySample> samples,
                      std::size_t followers) {
  const auto header = csv_header(followers);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& s : samples) {
    out << format_double(s.t);
    for (std::size_t i = 0; i <= followers; ++i) {
      const double u = i == 0 ? 0.0 : s.controls[i - 1];
      out << ',' << format_double(s.states[i](0)) << ',' << format_double(s.states[i](1)) << ','
          << format_double(s.states[i](2)) << ',' << format_double(u);
    }
    for (double g : s.spacings) out << ',' << format_double(g);
    for (double f : s.risks) out << ',' << format_double(f);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON report

using Json = nlohmann::ordered_json;

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const RunReport& r) {
  Json j;
  j["terminal_spacing_errors"] = r.terminal_spacing_errors;
  j["terminal_position_errors"] = r.terminal_position_errors;
  Json mins = Json::array();
  for (const auto& m : r.min_spacing) mins.push_back({{"value", m.value}, {"time", m.time}});
  j["min_spacing"] = mins;
  Json events = Json::array();
  for (const auto& e : r.collision_events) {
    events.push_back({{"follower", e.follower}, {"entry", e.entry}, {"exit", optional_json(e.exit)}});
  }
  j["collision_events"] = events;
  Json peaks = Json::array();
  Json peak_values = Json::array();
  for (const auto& p : r.peak_risk) {
    peaks.push_back(p.time);
    peak_values.push_back(p.value);
  }
  j["peak_risk_times"] = peaks;
  j["peak_risk_values"] = peak_values;
  Json formed = Json::array();
  for (const auto& f : r.platoon_formed_time) formed.push_back(optional_json(f));
  j["platoon_formed_time"] = formed;
  j["platoon_threshold"] = {{"value", kPlatoonThreshold}, {"quantity", "position spacing error"}};
  j["min_velocity_margin"] = {{"value", r.min_velocity_margin.value},
                              {"time", r.min_velocity_margin.time}};
  j["costs"] = r.costs;
  j["costs_with_collision"] = r.costs_with_collision;
  return j;
}

inline Json to_json(const BestResponseReport& b) {
  Json margins = Json::array();
  for (const auto& m : b.margins) {
    margins.push_back({{"basis", m.basis_index}, {"sign", m.sign}, {"margin", m.margin}});
  }
  return {{"follower", b.follower},      {"baseline_cost", b.baseline_cost},
          {"magnitude", b.magnitude},    {"tolerance", b.tolerance},
          {"worst_margin", b.worst_margin()}, {"passed", b.passed()},
          {"margins", margins}};
}

inline Json config_json(const PlatoonConfig& c) {
  Json followers = Json::array();
  for (const auto& f : c.followers) {
    followers.push_back({{"p", f.x0(0)},
                         {"v", f.x0(1)},
                         {"a", f.x0(2)},
                         {"omega", f.params.omega},
                         {"d", f.params.d},
                         {"r", f.params.r},
                         {"mu", f.params.mu}});
  }
  Json j;
  j["tau"] = c.tau;
  j["T"] = c.T;
  j["dt_output"] = c.dt_output;
  j["dt_oracle"] = c.dt_oracle;
  j["epsilon"] = c.epsilon;
  j["strategy"] = std::string(to_string(c.strategy));
  if (const auto v = variant_of(c.strategy)) j["variant"] = std::string(to_string(*v));
  j["trajectory_form"] = std::string(to_string(c.trajectory_form));
  j["leader"] = {{"p0", c.leader.p0}, {"v0", c.leader.v0}};
  j["followers"] = followers;
  return j;
}

// Inverse of parse_config.
inline std::string format_config(const PlatoonConfig& c) {
  std::ostringstream out;
  out << "tau = " << format_double(c.tau) << '\n'
      << "T = " << format_double(c.T) << '\n'
      << "dt_output = " << format_double(c.dt_output) << '\n'
      << "dt_oracle = " << format_double(c.dt_oracle) << '\n'
      << "epsilon = " << format_double(c.epsilon) << '\n'
      << "strategy = " << to_string(c.strategy) << '\n'
      << "trajectory_form = " << to_string(c.trajectory_form) << '\n'
      << "leader = " << format_double(c.leader.p0) << ' ' << format_double(c.leader.v0) << '\n';
  for (const auto& f : c.followers) {
    out << "follower =";
    for (double v : {f.x0(0), f.x0(1), f.x0(2), f.params.omega, f.params.d, f.params.r, f.params.mu}) {
      out << ' ' << format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Plot script

inline std::string plot_script(const std::string& csv_path, std::size_t followers) {
  std::ostringstream s;
  s << "#!/usr/bin/env python3\n"
    << "import csv\n"
    << "import matplotlib.pyplot as plt\n\n"
    << "CSV = " << nlohmann::json(csv_path).dump() << "\n"
    << "N = " << followers << "\n\n"
    << "with open(CSV) as fh:\n"
    << "    rows = list(csv.DictReader(fh))\n"
    << "t = [float(r['t']) for r in rows]\n"
    << "fig, axes = plt.subplots(1, 5, figsize=(22, 4))\n"
    << "for q, ax, label in zip('pvau', axes, ['position', 'velocity', 'acceleration', 'control']):\n"
    << "    for i in range(N + 1):\n"
    << "        ax.plot(t, [float(r[f'{q}_{i}']) for r in rows], label=f'vehicle {i}')\n"
    << "    ax.set_xlabel('t'); ax.set_ylabel(label)\n"
    << "for i in range(1, N + 1):\n"
    << "    axes[4].plot(t, [float(r[f'f_{i}']) for r in rows], label=f'f_{i}')\n"
    << "axes[4].set_xlabel('t'); axes[4].set_ylabel('collision risk')\n"
    << "for ax in axes:\n"
    << "    ax.legend(fontsize='small')\n"
    << "fig.tight_layout()\n"
    << "fig.savefig(CSV.rsplit('.', 1)[0] + '.png', dpi=150)\n";
  return s.str();
}

}  // namespace platoon
