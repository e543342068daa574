#include "ramsteer/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ramsteer/csv.hpp"
#include "ramsteer/rng.hpp"

namespace ramsteer {
namespace {

double dot(const Angle2D& a, const Angle2D& b) { return a.x_urad * b.x_urad + a.y_urad * b.y_urad; }

// Readout direction solving k_r = k_aS - k_w + k_S exactly.
Angle2D exact_readout(const Angle2D& theta_S, const Angle2D& theta_w, const Angle2D& target_aS,
                      const BeamGeometry& geom) {
  const auto ka = geometry::angle_to_k(target_aS, geom.lambda_read_m);
  const auto kw = geometry::angle_to_k(theta_w, geom.lambda_write_m);
  const auto ks = geometry::angle_to_k(theta_S, geom.lambda_write_m);
  return geometry::k_to_angle({ka.kx - kw.kx + ks.kx, ka.ky - kw.ky + ks.ky, geom.lambda_read_m});
}

}  // namespace

SteeringCommand compensating_readout(const Angle2D& theta_S, const Angle2D& theta_w, const Angle2D& target_aS,
                                     const OpticalChain& chain, const BeamGeometry& geom) {
  chain.validate();
  const Angle2D exact = exact_readout(theta_S, theta_w, target_aS, geom);
  const Angle2D u = chain.unit_axis();
  const double along = dot(exact, u);
  const Angle2D perp = exact - u * along;
  const double limit = chain.max_cell_deflection_urad();

  SteeringCommand cmd;
  cmd.required_deflection_urad = along;
  cmd.off_axis_urad = perp.norm();
  cmd.reachable = cmd.off_axis_urad <= kOffAxisToleranceUrad && std::abs(along) <= limit * (1.0 + 1e-12);
  if (cmd.reachable) {
    cmd.theta_read = exact;
    cmd.drive_freq_hz = geometry::drive_freq_for_deflection(along, chain);
    cmd.expected_theta_aS = target_aS;
  } else {
    const double clamped = std::clamp(along, -limit, limit);
    cmd.theta_read = u * clamped;
    cmd.drive_freq_hz = geometry::drive_freq_for_deflection(clamped, chain);
    cmd.expected_theta_aS = geometry::phase_match(theta_w, theta_S, cmd.theta_read, geom);
  }
  return cmd;
}

bool FeasibleSegment::contains(const Angle2D& theta_S, double tol_urad) const {
  const Angle2D d = theta_S - centre;
  const double t = dot(d, direction);
  const double perp = (d - direction * t).norm();
  return perp <= tol_urad && std::abs(t) <= half_length_urad + tol_urad;
}

std::vector<Angle2D> FeasibleSegment::sample(int count, double spacing_urad) const {
  std::vector<Angle2D> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(centre + direction * ((i - 0.5 * (count - 1)) * spacing_urad));
  }
  return out;
}

FeasibleSegment feasible_region(const OpticalChain& chain, const BeamGeometry& geom, const Angle2D& theta_w,
                                const Angle2D& target_aS) {
  chain.validate();
  // theta_S = theta_w - target * lw/lr + u * t * lw/lr, |t| <= max deflection.
  const double ratio = geom.lambda_write_m / geom.lambda_read_m;
  FeasibleSegment seg;
  seg.centre = theta_w - target_aS * ratio;
  seg.direction = chain.unit_axis();
  seg.half_length_urad = chain.max_cell_deflection_urad() * ratio;
  return seg;
}

void HeraldConfig::validate() const {
  if (modes < 1) {
    throw std::invalid_argument("herald.modes must be >= 1");
  }
  if (!(zeta >= 0.0) || !std::isfinite(zeta)) {
    throw std::invalid_argument("herald.zeta must be finite and >= 0");
  }
  if (!(eta_retrieve >= 0.0 && eta_retrieve <= 1.0)) {
    throw std::invalid_argument("herald.eta_retrieve must lie in [0, 1]");
  }
  if (!(eta_detect >= 0.0 && eta_detect <= 1.0)) {
    throw std::invalid_argument("herald.eta_detect must lie in [0, 1]");
  }
  if (!(switch_latency_s >= 0.0) || !(memory_lifetime_s >= 0.0)) {
    throw std::invalid_argument("herald latency and lifetime must be >= 0");
  }
}

HeraldStats run_herald_protocol(const HeraldConfig& cfg, std::uint64_t shots, std::uint64_t seed) {
  cfg.validate();
  if (shots == 0) {
    throw std::invalid_argument("herald: shots must be >= 1");
  }
  const bool in_time = cfg.switch_latency_s <= cfg.memory_lifetime_s;
  std::geometric_distribution<long> excitations(1.0 / (1.0 + cfg.zeta));
  std::binomial_distribution<long> detect;
  std::binomial_distribution<long> retrieve;
  using BinParam = std::binomial_distribution<long>::param_type;

  HeraldStats st;
  st.shots = shots;
  for (std::uint64_t shot = 0; shot < shots; ++shot) {
    Philox4x32 rng = make_stream(seed, StreamDomain::kHeraldShot, shot);
    // Modes after the first heralded one cannot change the outcome.
    for (int m = 0; m < cfg.modes; ++m) {
      const long n = excitations(rng);
      if (n == 0 || detect(rng, BinParam(n, cfg.eta_detect)) == 0) {
        continue;
      }
      ++st.heralds;
      if (n >= 2) {
        ++st.multi_excitation_events;
      }
      if (in_time && retrieve(rng, BinParam(n, cfg.eta_retrieve)) >= 1) {
        ++st.routed_successes;
      }
      break;
    }
  }
  const double n = static_cast<double>(shots);
  st.herald_prob = static_cast<double>(st.heralds) / n;
  st.success_prob = static_cast<double>(st.routed_successes) / n;
  st.multi_given_herald = st.heralds > 0 ? static_cast<double>(st.multi_excitation_events) / static_cast<double>(st.heralds)
                                         : std::numeric_limits<double>::quiet_NaN();
  return st;
}

// With q = 1/(1+zeta), P(n) = q (1-q)^n, and independent thinning of n by
// probability eta, P(no survivor) = q / (1 - (1-q)(1-eta)).
double herald_prob_per_mode(const HeraldConfig& cfg) {
  const double q = 1.0 / (1.0 + cfg.zeta);
  return 1.0 - q / (1.0 - (1.0 - q) * (1.0 - cfg.eta_detect));
}

double herald_prob_exact(const HeraldConfig& cfg) {
  return 1.0 - std::pow(1.0 - herald_prob_per_mode(cfg), cfg.modes);
}

double multi_given_herald_exact(const HeraldConfig& cfg) {
  const double q = 1.0 / (1.0 + cfg.zeta);
  const double ph = herald_prob_per_mode(cfg);
  if (!(ph > 0.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  // Heralded with exactly one excitation: P(n = 1) * eta_detect.
  return 1.0 - q * (1.0 - q) * cfg.eta_detect / ph;
}

double success_prob_exact(const HeraldConfig& cfg) {
  if (cfg.switch_latency_s > cfg.memory_lifetime_s) {
    return 0.0;
  }
  const double q = 1.0 / (1.0 + cfg.zeta);
  const double ph = herald_prob_per_mode(cfg);
  if (!(ph > 0.0)) {
    return 0.0;
  }
  const double none_d = q / (1.0 - (1.0 - q) * (1.0 - cfg.eta_detect));
  const double none_r = q / (1.0 - (1.0 - q) * (1.0 - cfg.eta_retrieve));
  const double none_both = q / (1.0 - (1.0 - q) * (1.0 - cfg.eta_detect) * (1.0 - cfg.eta_retrieve));
  const double both = 1.0 - none_d - none_r + none_both;
  return herald_prob_exact(cfg) * both / ph;
}

void write_herald_csv(const std::string& path, const HeraldConfig& cfg, const HeraldStats& st,
                      std::uint64_t config_checksum, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  write_comment(out, "config_checksum", hex64(config_checksum));
  write_comment(out, "seed", std::to_string(seed));
  out << "modes,zeta,p,shots,heralds,routed_successes,multi_excitation_events,herald_prob,success_prob,"
         "multi_given_herald,herald_prob_exact,success_prob_exact,multi_given_herald_exact\n";
  out << cfg.modes << ',' << format_double(cfg.zeta) << ',' << format_double(cfg.p()) << ',' << st.shots << ','
      << st.heralds << ',' << st.routed_successes << ',' << st.multi_excitation_events << ','
      << format_double(st.herald_prob) << ',' << format_double(st.success_prob) << ','
      << format_double(st.multi_given_herald) << ',' << format_double(herald_prob_exact(cfg)) << ','
      << format_double(success_prob_exact(cfg)) << ',' << format_double(multi_given_herald_exact(cfg)) << '\n';
}

std::vector<Angle2D> read_schedule(const std::string& path, const OpticalChain& chain) {
  const CsvTable t = read_csv_file(path);
  const int shot = t.column("shot");
  const int tx = t.column("theta_read_x_urad");
  const int ty = t.column("theta_read_y_urad");
  const int fq = t.column("drive_freq_hz");
  const bool angles = tx >= 0 && ty >= 0;
  if (shot < 0 || (!angles && fq < 0)) {
    throw std::invalid_argument(path +
                                ": schedule needs shot and theta_read_x_urad/theta_read_y_urad or drive_freq_hz");
  }
  std::vector<Angle2D> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) {
      throw std::invalid_argument(path + ": row " + std::to_string(i + 1) + " has " + std::to_string(row.size()) +
                                  " fields, expected " + std::to_string(t.header.size()));
    }
    if (parse_uint(row[static_cast<std::size_t>(shot)]) != i) {
      throw std::invalid_argument(path + ": shots must run 0..n-1 in order (row " + std::to_string(i + 1) + ")");
    }
    if (angles) {
      out.push_back({parse_double(row[static_cast<std::size_t>(tx)]), parse_double(row[static_cast<std::size_t>(ty)])});
    } else {
      out.push_back(geometry::aod_chain_angle(parse_double(row[static_cast<std::size_t>(fq)]), chain));
    }
  }
  return out;
}

void write_schedule(const std::string& path, const std::vector<Angle2D>& schedule, std::uint64_t config_checksum,
                    std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  write_comment(out, "config_checksum", hex64(config_checksum));
  write_comment(out, "seed", std::to_string(seed));
  out << "shot,theta_read_x_urad,theta_read_y_urad\n";
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    out << i << ',' << format_double(schedule[i].x_urad) << ',' << format_double(schedule[i].y_urad) << '\n';
  }
}

}  // namespace ramsteer
