#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bemopt/core/error.hpp"

namespace bemopt {

enum class VariableKind { Static, Daily, Hourly };

inline std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::Static: return "static";
    case VariableKind::Daily: return "daily";
    case VariableKind::Hourly: return "hourly";
  }
  return "static";
}

inline std::optional<VariableKind> parse_kind(std::string_view s) {
  if (s == "static") return VariableKind::Static;
  if (s == "daily") return VariableKind::Daily;
  if (s == "hourly") return VariableKind::Hourly;
  return std::nullopt;
}

struct VariableSpec {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;
  VariableKind kind = VariableKind::Static;

  // Number of grid points min, min+step, ..., max.
  std::size_t atoms() const {
    return static_cast<std::size_t>(std::llround((max - min) / step)) + 1;
  }
  double atom(std::size_t i) const { return min + static_cast<double>(i) * step; }

  // Snap to the nearest grid point inside [min, max].
  double quantize(double value) const {
    if (!(value > min)) return min;
    if (!(value < max)) return max;
    const auto i = std::llround((value - min) / step);
    return std::clamp(min + static_cast<double>(i) * step, min, max);
  }

  double width() const { return max - min; }

  // Empty string when valid, otherwise a description of the violation.
  std::string violation() const {
    if (name.empty()) return "empty name";
    if (!std::isfinite(min) || !std::isfinite(max) || !std::isfinite(step)) return "non-finite bound";
    if (min > max) return "min > max";
    if (!(step > 0.0)) return "step must be positive";
    const double ratio = (max - min) / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
      return "(max - min) is not an integer multiple of step";
    return {};
  }
};

// Versioned list of variable specs. Parsed from a line-oriented text file:
//
//   bemopt-schema 1
//   # name min max step kind
//   capacitance_kJ_perdegreK_perm3 50 300 10 static
class Schema {
 public:
  static constexpr int kVersion = 1;

  Schema() = default;
  explicit Schema(std::vector<VariableSpec> variables, int version = kVersion)
      : version_(version), variables_(std::move(variables)) {
    for (const auto& v : variables_) {
      if (auto why = v.violation(); !why.empty())
        throw InputError("schema variable '" + v.name + "': " + why);
    }
  }

  int version() const { return version_; }
  const std::vector<VariableSpec>& variables() const { return variables_; }

  const VariableSpec* find(std::string_view name) const {
    for (const auto& v : variables_)
      if (v.name == name) return &v;
    return nullptr;
  }
  const VariableSpec& at(std::string_view name) const {
    if (const auto* v = find(name)) return *v;
    throw InputError("schema is missing variable '" + std::string(name) + "'");
  }

  static Schema parse(std::istream& in) {
    std::string line;
    int line_no = 0;
    int version = -1;
    std::vector<VariableSpec> vars;
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream ls(line);
      if (version < 0) {
        std::string magic;
        ls >> magic >> version;
        if (magic != "bemopt-schema" || ls.fail())
          throw InputError("schema line " + std::to_string(line_no) + ": expected 'bemopt-schema <version>' header");
        if (version != kVersion)
          throw InputError("schema line " + std::to_string(line_no) + ": unsupported version " + std::to_string(version));
        continue;
      }
      VariableSpec spec;
      std::string kind;
      ls >> spec.name >> spec.min >> spec.max >> spec.step >> kind;
      std::string extra;
      if (ls.fail() || (ls >> extra))
        throw InputError("schema line " + std::to_string(line_no) + ": expected 'name min max step kind'");
      const auto k = parse_kind(kind);
      if (!k) throw InputError("schema line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
      spec.kind = *k;
      if (auto why = spec.violation(); !why.empty())
        throw InputError("schema line " + std::to_string(line_no) + ": " + why);
      for (const auto& v : vars)
        if (v.name == spec.name)
          throw InputError("schema line " + std::to_string(line_no) + ": duplicate variable '" + spec.name + "'");
      vars.push_back(std::move(spec));
    }
    if (version < 0) throw InputError("schema: missing 'bemopt-schema <version>' header");
    return Schema(std::move(vars), version);
  }

  static Schema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open schema file '" + path + "'");
    return parse(in);
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "bemopt-schema " << version_ << "\n# name min max step kind\n";
    out.precision(17);
    for (const auto& v : variables_)
      out << v.name << ' ' << v.min << ' ' << v.max << ' ' << v.step << ' ' << to_string(v.kind) << '\n';
    return out.str();
  }

 private:
  int version_ = kVersion;
  std::vector<VariableSpec> variables_;
};

// Ranges of the building, BMS and occupancy variables.
inline Schema default_schema() {
  using K = VariableKind;
  std::vector<VariableSpec> v = {
      {"airchange_infiltration_vol_per_h", 0.1, 0.5, 0.1, K::Static},
      {"capacitance_kJ_perdegreK_perm3", 50, 300, 10, K::Static},
      {"power_VCV_kW_heat", 0, 1000, 100, K::Static},
      {"power_VCV_kW_clim", 0, 1000, 100, K::Static},
      {"nb_occupants", 1000, 2000, 200, K::Static},
      {"nb_PCs", 1000, 2000, 200, K::Static},
      {"percent_light_night", 0, 70, 10, K::Static},
      {"percent_PCs_night", 0, 70, 10, K::Static},
      {"facade_1_thickness_2", 0.05, 0.15, 0.05, K::Static},
      {"facade_2_thickness_2", 0.05, 0.15, 0.05, K::Static},
      {"facade_3_thickness_2", 0.05, 0.15, 0.05, K::Static},
      {"facade_4_thickness_2", 0.05, 0.15, 0.05, K::Static},
      {"roof_1_thickness_3", 0.05, 0.15, 0.05, K::Static},
      {"facade_1_window_area_percent", 40, 50, 5, K::Static},
      {"facade_2_window_area_percent", 40, 50, 5, K::Static},
      {"facade_3_window_area_percent", 40, 50, 5, K::Static},
      {"facade_4_window_area_percent", 40, 50, 5, K::Static},
      {"start_clim_day", 7, 9, 1, K::Daily},
      {"end_clim_day", 18, 20, 1, K::Daily},
      {"t_clim_red_day", 24, 30, 0.5, K::Daily},
      {"t_clim_conf_day", 20, 24, 0.5, K::Daily},
      {"start_heat_day", 6, 8, 1, K::Daily},
      {"end_heat_day", 17, 19, 1, K::Daily},
      {"t_heat_red_day", 17, 22, 0.5, K::Daily},
      {"t_heat_conf_day", 22, 24, 0.5, K::Daily},
      {"start_ventilation_day", 7, 9, 1, K::Daily},
      {"end_ventilation_day", 18, 20, 1, K::Daily},
      {"t_ventilation_day", 18, 26, 0.5, K::Daily},
      {"vol_ventilation_day", 0.7, 1.6, 0.3, K::Daily},
      {"start_occupation_monday", 7, 9, 1, K::Daily},
      {"start_occupation_tuesday", 7, 9, 1, K::Daily},
      {"start_occupation_wednesday", 7, 9, 1, K::Daily},
      {"start_occupation_thursday", 7, 9, 1, K::Daily},
      {"start_occupation_friday", 7, 9, 1, K::Daily},
      {"end_occupation_monday", 17, 20, 1, K::Daily},
      {"end_occupation_tuesday", 17, 20, 1, K::Daily},
      {"end_occupation_wednesday", 17, 20, 1, K::Daily},
      {"end_occupation_thursday", 17, 20, 1, K::Daily},
      {"end_occupation_friday", 17, 20, 1, K::Daily},
  };
  return Schema(std::move(v));
}

}  // namespace bemopt
