#include "ramsteer/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "ramsteer/csv.hpp"

namespace ramsteer {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using ResidualFn = std::function<void(const VectorXd&, VectorXd&)>;

struct LsqResult {
  VectorXd p;
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
};

void numeric_jacobian(const ResidualFn& f, const VectorXd& p, const VectorXd& scale, MatrixXd& J, VectorXd& rp,
                      VectorXd& rm) {
  VectorXd q = p;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = 1e-6 * std::max(std::abs(p[j]), scale[j]);
    q[j] = p[j] + h;
    f(q, rp);
    q[j] = p[j] - h;
    f(q, rm);
    q[j] = p[j];
    J.col(j) = (rp - rm) / (2.0 * h);
  }
}

// Gauss-Newton steps; when a step fails to lower the cost, Levenberg damping
// on the diagonal of J^T J is switched on and relaxed again after successes.
LsqResult least_squares(const ResidualFn& f, VectorXd p, const VectorXd& scale, Eigen::Index m,
                        const FitOptions& opt) {
  LsqResult out;
  VectorXd r(m), rn(m), rp(m), rm(m);
  MatrixXd J(m, p.size());
  f(p, r);
  double cost = r.squaredNorm();
  double lambda = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    numeric_jacobian(f, p, scale, J, rp, rm);
    const MatrixXd A = J.transpose() * J;
    const VectorXd g = J.transpose() * r;
    const double diag_floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    VectorXd delta;
    for (int attempt = 0; attempt < 40; ++attempt) {
      MatrixXd M = A;
      if (lambda > 0.0) {
        M.diagonal() += lambda * A.diagonal().cwiseMax(diag_floor);
      }
      delta = M.ldlt().solve(-g);
      if (delta.allFinite()) {
        const VectorXd pn = p + delta;
        f(pn, rn);
        const double cn = rn.squaredNorm();
        if (std::isfinite(cn) && cn <= cost) {
          p = pn;
          r = rn;
          cost = cn;
          accepted = true;
          lambda = lambda > 1e-9 ? lambda * 0.1 : 0.0;
          break;
        }
      }
      lambda = lambda == 0.0 ? 1e-3 : lambda * 10.0;
    }
    if (!accepted) {
      // No downhill direction left at working precision.
      out.converged = true;
      break;
    }
    double rel = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      rel = std::max(rel, std::abs(delta[j]) / (std::abs(p[j]) + scale[j]));
    }
    if (rel < opt.rel_step_tol) {
      out.converged = true;
      break;
    }
  }
  out.p = p;
  out.cost = cost;
  return out;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

struct Sample {
  double x;
  double y;
  double v;
};

FitStatus classify(bool converged, bool finite, double sx, double sy, double amp, double rms, double snr,
                   bool in_window) {
  if (!converged) {
    return FitStatus::kNotConverged;
  }
  if (!finite || !(sx > 0.0) || !(sy > 0.0) || !(amp > 0.0)) {
    return FitStatus::kDegenerate;
  }
  if (!in_window) {
    return FitStatus::kOutsideWindow;
  }
  if (amp < snr * rms) {
    return FitStatus::kLowSignal;
  }
  return FitStatus::kOk;
}

}  // namespace

const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::kOk:
      return "ok";
    case FitStatus::kTooFewPixels:
      return "too_few_pixels";
    case FitStatus::kNotConverged:
      return "not_converged";
    case FitStatus::kDegenerate:
      return "degenerate";
    case FitStatus::kOutsideWindow:
      return "outside_window";
    case FitStatus::kLowSignal:
      return "low_signal";
  }
  return "unknown";
}

GaussianSpotFit fit_gaussian_spot(std::span<const double> pane_values, const geometry::PaneMapping& pane,
                                  const Angle2D& window_centre, double half_window_urad,
                                  std::span<const std::size_t> masked, const FitOptions& opt) {
  if (pane_values.size() != pane.pixel_count()) {
    throw std::invalid_argument("fit_gaussian_spot: value count does not match the pane");
  }
  if (!(half_window_urad > 0.0)) {
    throw std::invalid_argument("fit_gaussian_spot: half window must be positive");
  }
  std::vector<bool> skip(pane_values.size(), false);
  for (const auto i : masked) {
    if (i < skip.size()) {
      skip[i] = true;
    }
  }

  std::vector<Sample> s;
  int col_lo = pane.width_px, col_hi = -1, row_lo = pane.height_px, row_hi = -1;
  for (int row = 0; row < pane.height_px; ++row) {
    for (int col = 0; col < pane.width_px; ++col) {
      const std::size_t idx = static_cast<std::size_t>(row) * pane.width_px + col;
      const Angle2D a = geometry::pixel_to_angle(col, row, pane) - window_centre;
      if (std::abs(a.x_urad) > half_window_urad || std::abs(a.y_urad) > half_window_urad) {
        continue;
      }
      if (skip[idx] || !std::isfinite(pane_values[idx])) {
        continue;
      }
      s.push_back({a.x_urad, a.y_urad, pane_values[idx]});
      col_lo = std::min(col_lo, col);
      col_hi = std::max(col_hi, col);
      row_lo = std::min(row_lo, row);
      row_hi = std::max(row_hi, row);
    }
  }

  GaussianSpotFit fit;
  fit.pixels_used = s.size();
  if (s.size() < 25 || col_hi - col_lo + 1 < 5 || row_hi - row_lo + 1 < 5) {
    fit.status = FitStatus::kTooFewPixels;
    return fit;
  }

  const double px = pane.urad_per_pixel();
  std::vector<double> vals(s.size());
  std::transform(s.begin(), s.end(), vals.begin(), [](const Sample& q) { return q.v; });
  const double offset0 = median(vals);
  const double vmax = *std::max_element(vals.begin(), vals.end());
  const double amp0 = vmax - offset0;

  std::vector<Sample> sorted = s;
  std::sort(sorted.begin(), sorted.end(), [](const Sample& a, const Sample& b) { return a.v > b.v; });
  const std::size_t top =
      std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(opt.top_fraction * static_cast<double>(s.size()))));
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    cx += sorted[i].x;
    cy += sorted[i].y;
  }
  cx /= static_cast<double>(top);
  cy /= static_cast<double>(top);
  const auto above_half =
      std::count_if(s.begin(), s.end(), [&](const Sample& q) { return q.v > offset0 + 0.5 * amp0; });
  // Area above half maximum of a round Gaussian is 2 pi ln2 sigma^2.
  const double sigma0 = std::clamp(std::sqrt(static_cast<double>(above_half) * px * px / (2.0 * kPi * 0.6931471805599453)),
                                   0.5 * px, half_window_urad);

  const auto m = static_cast<Eigen::Index>(s.size());
  const ResidualFn residual = [&](const VectorXd& p, VectorXd& r) {
    const double ix = 1.0 / (2.0 * p[3] * p[3]);
    const double iy = 1.0 / (2.0 * p[4] * p[4]);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double dx = s[static_cast<std::size_t>(k)].x - p[1];
      const double dy = s[static_cast<std::size_t>(k)].y - p[2];
      r[k] = p[0] * std::exp(-(dx * dx * ix + dy * dy * iy)) + p[5] - s[static_cast<std::size_t>(k)].v;
    }
  };
  VectorXd p0(6);
  p0 << amp0, cx, cy, sigma0, sigma0, offset0;
  const double amp_scale = std::max(std::abs(amp0), 1e-12);
  VectorXd scale(6);
  scale << amp_scale, px, px, px, px, amp_scale;

  const auto res = least_squares(residual, p0, scale, m, opt);
  const VectorXd& p = res.p;
  fit.centre = Angle2D{p[1], p[2]} + window_centre;
  fit.fwhm_x_urad = kFwhmPerSigma * std::abs(p[3]);
  fit.fwhm_y_urad = kFwhmPerSigma * std::abs(p[4]);
  fit.amplitude = p[0];
  fit.offset = p[5];
  fit.rms_residual = std::sqrt(res.cost / static_cast<double>(m));
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  const bool in_window = std::abs(p[1]) <= half_window_urad && std::abs(p[2]) <= half_window_urad;
  fit.status = classify(res.converged, p.allFinite() && std::isfinite(fit.rms_residual), std::abs(p[3]),
                        std::abs(p[4]), p[0], fit.rms_residual, opt.min_snr, in_window);
  return fit;
}

ProfileFit fit_gaussian_profile(const Profile& profile, double window_centre_urad, double half_window_urad,
                                const FitOptions& opt) {
  if (profile.coord_urad.size() != profile.values.size()) {
    throw std::invalid_argument("fit_gaussian_profile: coordinate and value counts differ");
  }
  std::vector<double> xs, vs;
  for (std::size_t i = 0; i < profile.values.size(); ++i) {
    const double dx = profile.coord_urad[i] - window_centre_urad;
    if (std::abs(dx) <= half_window_urad && std::isfinite(profile.values[i])) {
      xs.push_back(dx);
      vs.push_back(profile.values[i]);
    }
  }
  ProfileFit fit;
  if (xs.size() < 7) {
    fit.status = FitStatus::kTooFewPixels;
    return fit;
  }
  const double step = profile.coord_urad.size() > 1
                          ? std::abs(profile.coord_urad[1] - profile.coord_urad[0])
                          : 1.0;
  const double offset0 = median(vs);
  const auto imax = static_cast<std::size_t>(std::max_element(vs.begin(), vs.end()) - vs.begin());
  const double amp0 = vs[imax] - offset0;
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vs[a] > vs[b]; });
  const std::size_t top = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::ceil(opt.top_fraction * static_cast<double>(xs.size()))));
  double c0 = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    c0 += xs[order[i]];
  }
  c0 /= static_cast<double>(top);
  const auto above_half = std::count_if(vs.begin(), vs.end(), [&](double v) { return v > offset0 + 0.5 * amp0; });
  const double sigma0 =
      std::clamp(static_cast<double>(above_half) * step / kFwhmPerSigma, 0.5 * step, half_window_urad);

  const auto m = static_cast<Eigen::Index>(xs.size());
  const ResidualFn residual = [&](const VectorXd& p, VectorXd& r) {
    const double is = 1.0 / (2.0 * p[2] * p[2]);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double dx = xs[static_cast<std::size_t>(k)] - p[1];
      r[k] = p[0] * std::exp(-dx * dx * is) + p[3] - vs[static_cast<std::size_t>(k)];
    }
  };
  VectorXd p0(4);
  p0 << amp0, c0, sigma0, offset0;
  const double amp_scale = std::max(std::abs(amp0), 1e-12);
  VectorXd scale(4);
  scale << amp_scale, step, step, amp_scale;
  const auto res = least_squares(residual, p0, scale, m, opt);
  const VectorXd& p = res.p;
  fit.centre_urad = p[1] + window_centre_urad;
  fit.fwhm_urad = kFwhmPerSigma * std::abs(p[2]);
  fit.amplitude = p[0];
  fit.offset = p[3];
  fit.rms_residual = std::sqrt(res.cost / static_cast<double>(m));
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.status = classify(res.converged, p.allFinite() && std::isfinite(fit.rms_residual), std::abs(p[2]),
                        std::abs(p[2]), p[0], fit.rms_residual, opt.min_snr,
                        std::abs(p[1]) <= half_window_urad);
  return fit;
}

GaussianSpotFit locate_twin_spot(const CorrelationMap& map, double half_window_urad, Pane pane,
                                 const FitOptions& opt) {
  const auto values = map.pane_values(pane);
  std::vector<std::size_t> masked;
  if (pane == map.reference.pane) {
    masked = reference_pixels(map.reference, map.pane);
  }
  std::vector<bool> skip(values.size(), false);
  for (const auto i : masked) {
    skip[i] = true;
  }
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!skip[i] && std::isfinite(values[i]) && (best == values.size() || values[i] > values[best])) {
      best = i;
    }
  }
  if (best == values.size()) {
    GaussianSpotFit fit;
    fit.status = FitStatus::kTooFewPixels;
    return fit;
  }
  const int col = static_cast<int>(best % static_cast<std::size_t>(map.pane.width_px));
  const int row = static_cast<int>(best / static_cast<std::size_t>(map.pane.width_px));
  return fit_gaussian_spot(values, map.pane, geometry::pixel_to_angle(col, row, map.pane), half_window_urad,
                           masked, opt);
}

GaussianSpotFit locate_reference_spot(const CorrelationMap& map, double half_window_urad, const FitOptions& opt) {
  const auto masked = reference_pixels(map.reference, map.pane);
  return fit_gaussian_spot(map.pane_values(map.reference.pane), map.pane, map.reference.centre, half_window_urad,
                           masked, opt);
}

SpotMeasurement measure_spots(const BatchedCorrelator& corr, std::size_t ref, double half_window_urad,
                              double peak_half_window_urad, const FitOptions& opt) {
  SpotMeasurement m;
  const CorrelationMap full = correlation_map(corr.merged(ref));
  m.twin = locate_twin_spot(full, half_window_urad, Pane::kAntiStokes, opt);
  m.reference_spot = locate_reference_spot(full, half_window_urad, opt);
  m.peak = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  if (!m.twin.ok()) {
    return m;
  }
  std::vector<double> peaks;
  for (std::size_t b = 0; b < corr.batch_count(); ++b) {
    if (corr.batch(ref, b).n() < 2) {
      continue;
    }
    const CorrelationMap part = correlation_map(corr.batch(ref, b));
    const auto f = fit_gaussian_spot(part.pane_values(Pane::kAntiStokes), part.pane, m.twin.centre,
                                     peak_half_window_urad, {}, opt);
    if (f.ok()) {
      peaks.push_back(f.peak());
    }
  }
  m.peak_batches = peaks.size();
  if (peaks.size() >= 2) {
    m.peak = batch_mean(peaks);
  }
  return m;
}

void write_fit_csv(const std::string& path, const GaussianSpotFit& fit, const OutputTag& tag) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  write_comment(out, "config_checksum", hex64(tag.config_checksum));
  write_comment(out, "seed", std::to_string(tag.seed));
  for (const auto& [k, v] : tag.extra) {
    write_comment(out, k, v);
  }
  out << "centre_x_urad,centre_y_urad,fwhm_x_urad,fwhm_y_urad,amplitude,offset,rms_residual,converged,iterations,"
         "status\n";
  out << format_double(fit.centre.x_urad) << ',' << format_double(fit.centre.y_urad) << ','
      << format_double(fit.fwhm_x_urad) << ',' << format_double(fit.fwhm_y_urad) << ','
      << format_double(fit.amplitude) << ',' << format_double(fit.offset) << ','
      << format_double(fit.rms_residual) << ',' << (fit.converged ? 1 : 0) << ',' << fit.iterations << ','
      << to_string(fit.status) << '\n';
}

}  // namespace ramsteer
