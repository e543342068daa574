#include "ramsteer/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "ramsteer/analysis.hpp"
#include "ramsteer/csv.hpp"
#include "ramsteer/fit.hpp"
#include "ramsteer/frame_io.hpp"

namespace ramsteer {
namespace {

// Rejected arguments (bad reference, unreadable schedule) share the config exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run) { return splitmix64(seed ^ splitmix64(run + 0x51)); }

double dot(const Angle2D& a, const Angle2D& b) { return a.x_urad * b.x_urad + a.y_urad * b.y_urad; }

std::string fmt(const Angle2D& a) { return "(" + format_double(a.x_urad) + ", " + format_double(a.y_urad) + ")"; }

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const UsageError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

OutputTag tag_for(std::uint64_t checksum, std::uint64_t seed) { return {checksum, seed, {}}; }

void log_identity(std::ostream& log, std::uint64_t checksum, std::uint64_t seed) {
  log << "config_checksum=" << hex64(checksum) << " seed=" << seed << '\n';
}

// Streams a simulated run straight into the correlator.
void simulate_into(const Scenario& sc, std::uint64_t n, const Angle2D& theta_read, std::uint64_t seed,
                   unsigned threads, BatchedCorrelator& corr) {
  const std::vector<Angle2D> schedule(n, theta_read);
  simulate_frames(sc, n, schedule, seed, [&](Frame&& f) { corr.add(f); }, threads);
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& opt) {
  ExperimentConfig cfg = opt.config_path.empty() ? default_config() : load_config(opt.config_path);
  if (opt.seed) {
    cfg.run.seed = *opt.seed;
  }
  if (opt.frames) {
    cfg.run.n_frames = *opt.frames;
  }
  if (opt.shots) {
    cfg.herald_shots = *opt.shots;
  }
  if (opt.threads) {
    cfg.run.threads = *opt.threads;
  }
  if (opt.target) {
    cfg.steer.target = *opt.target;
  }
  try {
    validate_config(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("command line: ") + e.what());
  }
  return cfg;
}

std::vector<Angle2D> fiber_grid(const ExperimentConfig& cfg) {
  const auto seg = feasible_region(cfg.chain, cfg.geometry, cfg.theta_write, cfg.steer.target);
  return seg.sample(cfg.fibers.count, cfg.fibers.spacing_urad);
}

int cmd_simulate(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig cfg = resolve_config(opt);
    const Scenario sc = make_scenario(cfg);
    const std::uint64_t checksum = config_checksum(cfg);
    std::vector<Angle2D> schedule;
    if (!opt.schedule_path.empty()) {
      try {
        schedule = read_schedule(opt.schedule_path, cfg.chain);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      if (schedule.size() != cfg.run.n_frames) {
        throw UsageError(opt.schedule_path + ": " + std::to_string(schedule.size()) + " shots, run needs " +
                         std::to_string(cfg.run.n_frames));
      }
    }
    const std::string out = opt.out.empty() ? "stack.rmns" : opt.out;
    StackHeader h;
    h.width = static_cast<std::uint32_t>(sc.pane.width_px);
    h.height = static_cast<std::uint32_t>(sc.pane.height_px);
    h.pixel_pitch_m = sc.pane.pixel_pitch_m;
    h.f3_m = sc.pane.f3_m;
    h.seed = cfg.run.seed;
    h.config_checksum = checksum;
    StackWriter writer(out, h);
    int clipped = 0;
    simulate_frames(
        sc, cfg.run.n_frames, schedule, cfg.run.seed,
        [&](Frame&& f) {
          clipped += f.meta.clipped_modes[1];
          if (opt.csv_frame && f.shot_index == *opt.csv_frame) {
            write_frame_csv(out + ".frame" + std::to_string(f.shot_index) + ".csv", f, sc.pane, cfg.run.seed,
                            checksum);
          }
          writer.write(f);
        },
        cfg.run.threads);
    writer.close();
    log_identity(log, checksum, cfg.run.seed);
    log << "modes=" << sc.modes.modes.size() << " frames=" << writer.written() << " out=" << out
        << " file_checksum=" << hex64(file_checksum(out)) << '\n';
    if (clipped > 0) {
      log << "anti-Stokes mode centres clipped off the pane: " << clipped << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_correlate(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] {
    if (opt.stack_path.empty()) {
      throw UsageError("correlate needs an input stack");
    }
    const ExperimentConfig cfg = resolve_config(opt);
    StackReader reader(opt.stack_path);
    const StackHeader h = reader.header();
    if (h.count < static_cast<std::uint32_t>(cfg.analysis.batches)) {
      throw UsageError(opt.stack_path + ": " + std::to_string(h.count) + " frames, need at least " +
                       std::to_string(cfg.analysis.batches));
    }
    const auto pane = pane_mapping(h);

    Reference ref;
    ref.pane = Pane::kStokes;
    ref.radius_urad = cfg.analysis.reference_radius_urad;
    if (opt.fiber) {
      const auto fibers = fiber_grid(cfg);
      if (*opt.fiber < 0 || *opt.fiber >= static_cast<int>(fibers.size())) {
        throw UsageError("fiber id " + std::to_string(*opt.fiber) + " outside 0.." +
                         std::to_string(fibers.size() - 1));
      }
      ref.centre = fibers[static_cast<std::size_t>(*opt.fiber)];
      ref.radius_urad = cfg.fibers.radius_urad;
    } else if (opt.ref) {
      ref.centre = *opt.ref;
    }
    if (!geometry::angle_to_pixel(ref.centre, pane).on_pane) {
      throw UsageError("reference " + fmt(ref.centre) + " urad lies off the pane");
    }

    BatchedCorrelator corr(pane, {ref}, h.count, static_cast<std::size_t>(cfg.analysis.batches));
    Frame f;
    while (reader.next(f)) {
      corr.add(f);
    }
    const CorrelationMap map = correlation_map(corr.merged(0));
    const SpotMeasurement spots = measure_spots(corr, 0, cfg.analysis.fit_half_window_urad, cfg.analysis.peak_half_window_urad);

    const std::string prefix = opt.out.empty() ? "correlate" : opt.out;
    OutputTag tag = tag_for(h.config_checksum, h.seed);
    write_map_csv(prefix + ".map.csv", map, tag);
    write_map_pgm(prefix + ".map.pgm", map, tag);
    OutputTag fit_tag = tag;
    fit_tag.extra = {{"spot", "twin"},
                     {"peak_mean", format_double(spots.peak.mean)},
                     {"peak_stderr", format_double(spots.peak.stderr_)}};
    write_fit_csv(prefix + ".fit.csv", spots.twin, fit_tag);
    fit_tag.extra = {{"spot", "reference"}};
    write_fit_csv(prefix + ".ref_fit.csv", spots.reference_spot, fit_tag);
    const Angle2D through = spots.twin.ok() ? spots.twin.centre : ref.centre * -1.0;
    if (geometry::angle_to_pixel(through, pane).on_pane) {
      write_profile_csv(prefix + ".section_x.csv", cross_section(map, Pane::kAntiStokes, Axis::kX, through), tag);
      write_profile_csv(prefix + ".section_y.csv", cross_section(map, Pane::kAntiStokes, Axis::kY, through), tag);
    }

    log_identity(log, h.config_checksum, h.seed);
    log << "frames=" << map.n_frames << " ref=" << fmt(ref.centre) << " radius=" << format_double(ref.radius_urad)
        << '\n';
    log << "twin: status=" << to_string(spots.twin.status) << " centre=" << fmt(spots.twin.centre)
        << " fwhm=(" << format_double(spots.twin.fwhm_x_urad) << ", " << format_double(spots.twin.fwhm_y_urad)
        << ") peak=" << format_double(spots.peak.mean) << " +- " << format_double(spots.peak.stderr_) << '\n';
    log << "reference spot: status=" << to_string(spots.reference_spot.status)
        << " centre=" << fmt(spots.reference_spot.centre) << '\n';
    return static_cast<int>(spots.twin.ok() && spots.reference_spot.ok() ? kExitOk : kExitFitFailed);
  });
}

int cmd_steer(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] {
    ExperimentConfig cfg = resolve_config(opt);
    if (opt.frames) {
      if (*opt.frames < 2) {
        throw ConfigError("command line: --frames must be >= 2 for steer");
      }
      cfg.steer.frames_per_fiber = *opt.frames;
    }
    const Scenario sc = make_scenario(cfg);
    const std::uint64_t checksum = config_checksum(cfg);
    const std::uint64_t n = cfg.steer.frames_per_fiber;
    const auto batches = static_cast<std::size_t>(cfg.analysis.batches);
    const double hw = cfg.analysis.fit_half_window_urad;
    const double fwhm = sc.modes.spot_fwhm_urad;
    const Angle2D target = cfg.steer.target;
    const Angle2D u = cfg.chain.unit_axis();
    const auto fibers = fiber_grid(cfg);

    std::vector<Reference> refs;
    std::vector<Angle2D> sampled;  // where each fiber reference actually looks
    for (const auto& c : fibers) {
      refs.push_back({Pane::kStokes, c, cfg.fibers.radius_urad});
      if (!geometry::angle_to_pixel(c, sc.pane).on_pane) {
        throw UsageError("fiber " + fmt(c) + " urad lies off the pane");
      }
      sampled.push_back(reference_centroid(refs.back(), sc.pane));
    }

    // Uncompensated baseline: all fibers share one run at theta_read = 0.
    BatchedCorrelator baseline(sc.pane, refs, n, batches);
    simulate_into(sc, n, {}, run_seed(cfg.run.seed, 0), cfg.run.threads, baseline);
    std::vector<double> xs, ys;
    std::vector<GaussianSpotFit> baseline_twins;
    bool any_fit_failed = false;
    for (std::size_t i = 0; i < fibers.size(); ++i) {
      const auto m = measure_spots(baseline, i, hw, cfg.analysis.peak_half_window_urad);
      baseline_twins.push_back(m.twin);
      if (m.twin.ok()) {
        xs.push_back(dot(sampled[i], u));
        ys.push_back(dot(m.twin.centre, u));
      } else {
        any_fit_failed = true;
      }
    }
    // Informational only: with diffusion on, mid-range twin centres sit a few
    // urad outward, which steepens a short-baseline regression by ~3%.
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_se = std::numeric_limits<double>::quiet_NaN();
    if (xs.size() >= 2) {
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
      }
      mx /= static_cast<double>(xs.size());
      my /= static_cast<double>(xs.size());
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
      }
      if (sxx > 0.0) {
        slope = sxy / sxx;
        if (xs.size() > 2) {
          double ssr = 0.0;
          for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - my - slope * (xs[i] - mx);
            ssr += r * r;
          }
          slope_se = std::sqrt(ssr / static_cast<double>(xs.size() - 2) / sxx);
        }
      }
    }
    const double expected_slope = -cfg.geometry.lambda_read_m / cfg.geometry.lambda_write_m;

    const std::string prefix = opt.out.empty() ? "steer" : opt.out;
    std::ofstream out(prefix + ".steer.csv");
    if (!out) {
      throw std::runtime_error("cannot open " + prefix + ".steer.csv for writing");
    }
    write_comment(out, "config_checksum", hex64(checksum));
    write_comment(out, "seed", std::to_string(cfg.run.seed));
    write_comment(out, "target_x_urad", format_double(target.x_urad));
    write_comment(out, "target_y_urad", format_double(target.y_urad));
    write_comment(out, "frames_per_run", std::to_string(n));
    write_comment(out, "nominal_spot_fwhm_urad", format_double(fwhm));
    write_comment(out, "baseline_slope", format_double(slope));
    write_comment(out, "baseline_slope_se", format_double(slope_se));
    write_comment(out, "expected_slope", format_double(expected_slope));
    out << "fiber,theta_S_x_urad,theta_S_y_urad,reachable,theta_read_x_urad,theta_read_y_urad,drive_freq_hz,"
           "expected_aS_x_urad,expected_aS_y_urad,twin_x_urad,twin_y_urad,twin_fwhm_x_urad,twin_fwhm_y_urad,"
           "twin_error_urad,stokes_x_urad,stokes_y_urad,stokes_error_urad,fit_status,pass,baseline_twin_x_urad,"
           "baseline_twin_y_urad\n";

    log_identity(log, checksum, cfg.run.seed);
    log << "baseline slope=" << format_double(slope) << " se=" << format_double(slope_se)
        << " expected=" << format_double(expected_slope) << '\n';

    bool any_unreachable = false;
    bool all_pass = true;
    for (std::size_t i = 0; i < fibers.size(); ++i) {
      const std::string baseline_cols = "," + format_double(baseline_twins[i].centre.x_urad) + "," +
                                        format_double(baseline_twins[i].centre.y_urad) + "\n";
      const auto cmd = compensating_readout(fibers[i], cfg.theta_write, target, cfg.chain, cfg.geometry);
      out << i << ',' << format_double(fibers[i].x_urad) << ',' << format_double(fibers[i].y_urad) << ','
          << (cmd.reachable ? 1 : 0) << ',' << format_double(cmd.theta_read.x_urad) << ','
          << format_double(cmd.theta_read.y_urad) << ',' << format_double(cmd.drive_freq_hz) << ','
          << format_double(cmd.expected_theta_aS.x_urad) << ',' << format_double(cmd.expected_theta_aS.y_urad);
      if (!cmd.reachable) {
        any_unreachable = true;
        out << ",nan,nan,nan,nan,nan,nan,nan,nan,unreachable,0" << baseline_cols;
        log << "fiber " << i << " " << fmt(fibers[i]) << ": unreachable (needs "
            << format_double(cmd.required_deflection_urad) << " urad along the axis, "
            << format_double(cmd.off_axis_urad) << " off axis)\n";
        continue;
      }
      BatchedCorrelator run(sc.pane, {refs[i]}, n, batches);
      simulate_into(sc, n, cmd.theta_read, run_seed(cfg.run.seed, i + 1), cfg.run.threads, run);
      const auto m = measure_spots(run, 0, hw, cfg.analysis.peak_half_window_urad);
      const bool fits_ok = m.twin.ok() && m.reference_spot.ok();
      any_fit_failed = any_fit_failed || !fits_ok;
      const double twin_err = (m.twin.centre - target).norm();
      const double stokes_err = (m.reference_spot.centre - sampled[i]).norm();
      const bool pass = fits_ok && twin_err < fwhm / 4.0 && stokes_err < fwhm / 4.0;
      all_pass = all_pass && pass;
      out << ',' << format_double(m.twin.centre.x_urad) << ',' << format_double(m.twin.centre.y_urad) << ','
          << format_double(m.twin.fwhm_x_urad) << ',' << format_double(m.twin.fwhm_y_urad) << ','
          << format_double(twin_err) << ',' << format_double(m.reference_spot.centre.x_urad) << ','
          << format_double(m.reference_spot.centre.y_urad) << ',' << format_double(stokes_err) << ','
          << (fits_ok ? "ok" : to_string(m.twin.ok() ? m.reference_spot.status : m.twin.status)) << ','
          << (pass ? 1 : 0) << baseline_cols;
      log << "fiber " << i << " " << fmt(fibers[i]) << ": drive=" << format_double(cmd.drive_freq_hz)
          << " Hz twin=" << fmt(m.twin.centre) << " error=" << format_double(twin_err)
          << " urad stokes_error=" << format_double(stokes_err) << " urad " << (pass ? "PASS" : "FAIL") << '\n';
    }
    log << "report: " << prefix << ".steer.csv\n";
    if (any_unreachable) {
      return static_cast<int>(kExitUnreachable);
    }
    if (any_fit_failed) {
      return static_cast<int>(kExitFitFailed);
    }
    return static_cast<int>(all_pass ? kExitOk : kExitFailure);
  });
}

int cmd_herald(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentConfig cfg = resolve_config(opt);
    const std::uint64_t checksum = config_checksum(cfg);
    const HeraldStats st = run_herald_protocol(cfg.herald, cfg.herald_shots, cfg.run.seed);
    const std::string prefix = opt.out.empty() ? "herald" : opt.out;
    write_herald_csv(prefix + ".herald.csv", cfg.herald, st, checksum, cfg.run.seed);

    std::ofstream sweep(prefix + ".sweep.csv");
    if (!sweep) {
      throw std::runtime_error("cannot open " + prefix + ".sweep.csv for writing");
    }
    write_comment(sweep, "config_checksum", hex64(checksum));
    write_comment(sweep, "seed", std::to_string(cfg.run.seed));
    sweep << "modes,p,herald_prob_exact,success_prob_exact\n";
    for (const int m : {10, 100, 1000}) {
      HeraldConfig h = cfg.herald;
      h.modes = m;
      sweep << m << ',' << format_double(h.p()) << ',' << format_double(herald_prob_exact(h)) << ','
            << format_double(success_prob_exact(h)) << '\n';
    }

    log_identity(log, checksum, cfg.run.seed);
    log << "shots=" << st.shots << " heralds=" << st.heralds << " herald_prob=" << format_double(st.herald_prob)
        << " (exact " << format_double(herald_prob_exact(cfg.herald)) << ")"
        << " success_prob=" << format_double(st.success_prob) << " (exact "
        << format_double(success_prob_exact(cfg.herald)) << ")"
        << " multi_given_herald=" << format_double(st.multi_given_herald) << " (exact "
        << format_double(multi_given_herald_exact(cfg.herald)) << ")\n";
    return static_cast<int>(kExitOk);
  });
}

}  // namespace ramsteer
