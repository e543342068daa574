#include "ramsteer/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ramsteer/csv.hpp"

namespace ramsteer {
namespace {

struct KeyDef {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Field>
KeyDef real(const char* section, const char* key, Field field) {
  return {section, key, [field](const ExperimentConfig& c) { return format_double(field(c)); },
          [field](ExperimentConfig& c, const std::string& v) { field(c) = parse_double(v); }};
}

template <typename Field>
KeyDef integer(const char* section, const char* key, Field field) {
  return {section, key,
          [field](const ExperimentConfig& c) { return std::to_string(field(c)); },
          [field](ExperimentConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(field(c))>;
            if constexpr (std::is_signed_v<T>) {
              const auto x = parse_int(v);
              if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
                throw std::invalid_argument("integer out of range: '" + v + "'");
              }
              field(c) = static_cast<T>(x);
            } else {
              const auto x = parse_uint(v);
              if (x > std::numeric_limits<T>::max()) {
                throw std::invalid_argument("integer out of range: '" + v + "'");
              }
              field(c) = static_cast<T>(x);
            }
          }};
}

#define RS_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> defs = {
      real("geometry", "w0_write_m", RS_FIELD(geometry.w0_write_m)),
      real("geometry", "w0_read_m", RS_FIELD(geometry.w0_read_m)),
      real("geometry", "w0_pump_m", RS_FIELD(geometry.w0_pump_m)),
      real("geometry", "cell_length_m", RS_FIELD(geometry.cell_length_m)),
      real("geometry", "lambda_write_m", RS_FIELD(geometry.lambda_write_m)),
      real("geometry", "lambda_read_m", RS_FIELD(geometry.lambda_read_m)),
      real("geometry", "write_theta_x_urad", RS_FIELD(theta_write.x_urad)),
      real("geometry", "write_theta_y_urad", RS_FIELD(theta_write.y_urad)),

      real("chain", "f1_m", RS_FIELD(chain.f1_m)),
      real("chain", "f2_m", RS_FIELD(chain.f2_m)),
      real("chain", "f3_m", RS_FIELD(chain.f3_m)),
      real("chain", "base_freq_hz", RS_FIELD(chain.base_freq_hz)),
      real("chain", "aod_slope_rad_per_hz", RS_FIELD(chain.aod_slope_rad_per_hz)),
      real("chain", "band_halfwidth_hz", RS_FIELD(chain.band_halfwidth_hz)),
      real("chain", "steer_axis_x", RS_FIELD(chain.steer_axis.x_urad)),
      real("chain", "steer_axis_y", RS_FIELD(chain.steer_axis.y_urad)),

      real("modes", "gain_shrink", RS_FIELD(modes.gain_shrink)),
      real("modes", "spot_shape_constant", RS_FIELD(modes.spot_shape_constant)),
      real("modes", "envelope_fwhm_urad", RS_FIELD(modes.envelope_fwhm_urad)),
      real("modes", "mean_photons_per_mode", RS_FIELD(modes.mean_photons_per_mode)),
      real("modes", "grid_spacing_ratio", RS_FIELD(modes.grid_spacing_ratio)),

      real("retrieval", "eta0", RS_FIELD(retrieval.eta0)),
      real("retrieval", "diffusion_m2_per_s", RS_FIELD(retrieval.diffusion_m2_per_s)),
      real("retrieval", "tau_storage_s", RS_FIELD(retrieval.tau_storage_s)),
      real("retrieval", "aberration_scale_urad", RS_FIELD(retrieval.aberration_scale_urad)),
      real("retrieval", "noise_floor", RS_FIELD(retrieval.noise_floor)),

      integer("camera", "width_px", RS_FIELD(camera.width_px)),
      integer("camera", "height_px", RS_FIELD(camera.height_px)),
      real("camera", "pixel_pitch_m", RS_FIELD(camera.pixel_pitch_m)),

      integer("herald", "modes", RS_FIELD(herald.modes)),
      real("herald", "zeta", RS_FIELD(herald.zeta)),
      real("herald", "eta_retrieve", RS_FIELD(herald.eta_retrieve)),
      real("herald", "eta_detect", RS_FIELD(herald.eta_detect)),
      real("herald", "switch_latency_s", RS_FIELD(herald.switch_latency_s)),
      real("herald", "memory_lifetime_s", RS_FIELD(herald.memory_lifetime_s)),
      integer("herald", "shots", RS_FIELD(herald_shots)),

      integer("run", "seed", RS_FIELD(run.seed)),
      integer("run", "n_frames", RS_FIELD(run.n_frames)),
      integer("run", "threads", RS_FIELD(run.threads)),

      real("analysis", "reference_radius_urad", RS_FIELD(analysis.reference_radius_urad)),
      real("analysis", "fit_half_window_urad", RS_FIELD(analysis.fit_half_window_urad)),
      real("analysis", "peak_half_window_urad", RS_FIELD(analysis.peak_half_window_urad)),
      integer("analysis", "batches", RS_FIELD(analysis.batches)),

      real("steer", "target_x_urad", RS_FIELD(steer.target.x_urad)),
      real("steer", "target_y_urad", RS_FIELD(steer.target.y_urad)),
      integer("steer", "frames_per_fiber", RS_FIELD(steer.frames_per_fiber)),

      integer("fibers", "count", RS_FIELD(fibers.count)),
      real("fibers", "spacing_urad", RS_FIELD(fibers.spacing_urad)),
      real("fibers", "radius_urad", RS_FIELD(fibers.radius_urad)),
  };
  return defs;
}

#undef RS_FIELD

const char* const kSectionOrder[] = {"geometry", "chain",    "modes", "retrieval", "camera", "herald",
                                     "run",      "analysis", "steer", "fibers",    "metadata"};

bool known_section(const std::string& s) {
  for (const char* name : kSectionOrder) {
    if (s == name) {
      return true;
    }
  }
  return false;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
}

void require(bool ok, const std::string& msg) {
  if (!ok) {
    throw ConfigError(msg);
  }
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.metadata = {
      {"detuning_write", "1 GHz"},
      {"detuning_read", "1 GHz"},
      {"pump_duration", "350 us"},
      {"write_duration", "8 us"},
      {"read_duration", "8 us"},
      {"storage_time", "1 us"},
      {"cell_temperature", "80 C"},
      {"filter_temperature", "100 C"},
      {"bias_field", "12 mT"},
      {"pump_power", "70 mW"},
      {"write_power", "16 mW"},
      {"read_power", "16 mW"},
      {"buffer_gas", "1 Torr Kr"},
  };
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  std::map<std::string, const KeyDef*> index;
  for (const auto& d : registry()) {
    index[std::string(d.section) + "." + d.key] = &d;
  }

  ExperimentConfig cfg = default_config();
  bool metadata_seen = false;
  std::set<std::string> seen;
  std::string section;
  int p_line = 0;
  int zeta_line = 0;
  double p_value = 0.0;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        fail(source, line_no, "malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) {
        fail(source, line_no, "unknown section [" + section + "]");
      }
      if (section == "metadata" && !metadata_seen) {
        cfg.metadata.clear();
        metadata_seen = true;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(source, line_no, "expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (section.empty()) {
      fail(source, line_no, "key '" + key + "' outside any section");
    }
    if (key.empty()) {
      fail(source, line_no, "empty key");
    }
    const std::string full = section + "." + key;
    if (!seen.insert(full).second) {
      fail(source, line_no, "duplicate key " + full);
    }
    if (section == "metadata") {
      cfg.metadata.emplace_back(key, value);
      continue;
    }
    try {
      if (full == "herald.p") {
        p_value = parse_double(value);
        p_line = line_no;
        continue;
      }
      const auto it = index.find(full);
      if (it == index.end()) {
        fail(source, line_no, "unknown key '" + key + "' in [" + section + "]");
      }
      it->second->set(cfg, value);
      if (full == "herald.zeta") {
        zeta_line = line_no;
      }
    } catch (const std::invalid_argument& e) {
      fail(source, line_no, full + ": " + e.what());
    }
  }

  if (p_line > 0) {
    if (!(p_value >= 0.0 && p_value < 1.0)) {
      fail(source, p_line, "herald.p must lie in [0, 1)");
    }
    const double zeta = HeraldConfig::zeta_from_p(p_value);
    if (zeta_line > 0) {
      const double tol = 1e-9 * std::max(1.0, std::abs(zeta));
      if (std::abs(cfg.herald.zeta - zeta) > tol) {
        fail(source, p_line,
             "herald.p = " + format_double(p_value) + " disagrees with herald.zeta = " +
                 format_double(cfg.herald.zeta) + " (expected p = zeta / (1 + zeta))");
      }
    } else {
      cfg.herald.zeta = zeta;
    }
  }

  try {
    validate_config(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path + ": cannot open config file");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const char* section : kSectionOrder) {
    out << '[' << section << "]\n";
    if (std::string(section) == "metadata") {
      for (const auto& [k, v] : cfg.metadata) {
        out << k << " = " << v << '\n';
      }
    } else {
      for (const auto& d : registry()) {
        if (std::string(d.section) == section) {
          out << d.key << " = " << d.get(cfg) << '\n';
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

std::uint64_t config_checksum(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.run.threads = 0;
  return fnv1a64(emit_config(c));
}

void validate_config(const ExperimentConfig& cfg) {
  try {
    cfg.geometry.validate();
    cfg.chain.validate();
    cfg.retrieval.validate();
    cfg.herald.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(cfg.theta_write.finite() && cfg.theta_write.norm() < kParaxialLimitUrad,
          "geometry.write_theta must be finite and paraxial");
  require(cfg.camera.width_px > 0 && cfg.camera.height_px > 0, "camera.width_px and camera.height_px must be > 0");
  require(cfg.camera.pixel_pitch_m > 0.0, "camera.pixel_pitch_m must be positive");
  require(cfg.run.n_frames >= 1, "run.n_frames must be >= 1");
  require(cfg.run.n_frames <= 0xffffffffull, "run.n_frames exceeds the stack format limit");
  require(cfg.herald_shots >= 1, "herald.shots must be >= 1");
  require(cfg.analysis.reference_radius_urad >= 0.0, "analysis.reference_radius_urad must be >= 0");
  require(cfg.analysis.fit_half_window_urad > 0.0, "analysis.fit_half_window_urad must be positive");
  require(cfg.analysis.peak_half_window_urad > 0.0, "analysis.peak_half_window_urad must be positive");
  require(cfg.analysis.batches >= 2, "analysis.batches must be >= 2");
  require(cfg.steer.target.finite() && cfg.steer.target.norm() < kParaxialLimitUrad,
          "steer.target must be finite and paraxial");
  require(cfg.steer.frames_per_fiber >= 2, "steer.frames_per_fiber must be >= 2");
  require(cfg.fibers.count >= 1, "fibers.count must be >= 1");
  require(cfg.fibers.spacing_urad >= 0.0, "fibers.spacing_urad must be >= 0");
  require(cfg.fibers.radius_urad >= 0.0, "fibers.radius_urad must be >= 0");
  try {
    (void)build_mode_set(cfg.geometry, cfg.modes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

geometry::PaneMapping pane_mapping(const ExperimentConfig& cfg) {
  return geometry::PaneMapping::centred(cfg.camera.width_px, cfg.camera.height_px, cfg.camera.pixel_pitch_m,
                                        cfg.chain.f3_m);
}

Scenario make_scenario(const ExperimentConfig& cfg) {
  Scenario sc;
  sc.geom = cfg.geometry;
  sc.theta_write = cfg.theta_write;
  sc.modes = build_mode_set(cfg.geometry, cfg.modes);
  sc.retrieval = cfg.retrieval;
  sc.pane = pane_mapping(cfg);
  return sc;
}

}  // namespace ramsteer
