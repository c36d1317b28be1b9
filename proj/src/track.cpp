// Copyright 2026 The stintopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stintopt/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "stintopt/errors.hpp"

namespace stintopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform double in [0, 1) from the top 53 bits; std::uniform_real_distribution
// is not reproducible across standard libraries.
double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// TrackProfile

TrackProfile::TrackProfile(std::vector<TrackSample> samples,
                           std::vector<PitZone> pit_zones)
    : samples_(std::move(samples)), pit_zones_(std::move(pit_zones)) {
  if (samples_.size() < 2) {
    throw InputError("track needs at least two samples");
  }
  if (samples_.front().s != 0.0) {
    throw InputError("track samples must start at s=0");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& p = samples_[i];
    if (!std::isfinite(p.s) || !std::isfinite(p.kappa) ||
        !std::isfinite(p.grade)) {
      throw InputError("non-finite track sample at row " + std::to_string(i));
    }
    if (i > 0 && !(p.s > samples_[i - 1].s)) {
      throw InputError("track s must be strictly increasing (row " +
                       std::to_string(i) + ")");
    }
  }
  for (const auto& z : pit_zones_) {
    if (!(z.s_end > z.s_start) || !(z.v_limit > 0.0)) {
      throw InputError("pit zone needs s_end > s_start and v_limit > 0");
    }
  }
}

double TrackProfile::max_spacing() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    worst = std::max(worst, samples_[i].s - samples_[i - 1].s);
  }
  return worst;
}

double TrackProfile::wrap(double s) const {
  const double lap = s_lap();
  double x = std::fmod(s, lap);
  if (x < 0.0) x += lap;
  return x;
}

std::size_t TrackProfile::locate(double x) const {
  // Index i of the interval [s_i, s_{i+1}] containing x.
  auto it = std::upper_bound(
      samples_.begin(), samples_.end(), x,
      [](double v, const TrackSample& p) { return v < p.s; });
  const auto i = static_cast<std::size_t>(std::distance(samples_.begin(), it));
  return std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, samples_.size() - 2);
}

double TrackProfile::kappa_at(double s) const {
  const double x = wrap(s);
  const std::size_t i = locate(x);
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  const double w = (x - a.s) / (b.s - a.s);
  return a.kappa + w * (b.kappa - a.kappa);
}

double TrackProfile::grade_at(double s) const {
  const double x = wrap(s);
  const std::size_t i = locate(x);
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  const double w = (x - a.s) / (b.s - a.s);
  return a.grade + w * (b.grade - a.grade);
}

std::optional<double> TrackProfile::pit_limit_at(double s) const {
  const double x = wrap(s);
  std::optional<double> limit;
  for (const auto& z : pit_zones_) {
    if (x >= z.s_start && x <= z.s_end) {
      limit = limit ? std::min(*limit, z.v_limit) : z.v_limit;
    }
  }
  return limit;
}

// ---------------------------------------------------------------------------
// Grip

void GripState::validate() const {
  if (!(mu_scale > 0.0 && mu_scale <= 1.5)) {
    throw InputError("mu_scale must lie in (0, 1.5]");
  }
  if (!(aero_scale > 0.0 && aero_scale <= 1.5)) {
    throw InputError("aero_scale must lie in (0, 1.5]");
  }
  if (v_cap && !(*v_cap > 0.0)) {
    throw InputError("v_cap must be positive");
  }
}

GripSchedule& GripSchedule::with_mu_ramp(Ramp ramp) {
  if (!(ramp.s_end > ramp.s_start)) throw InputError("empty grip ramp");
  mu_ramp_ = ramp;
  return *this;
}

GripSchedule& GripSchedule::with_aero_window(Window w) {
  if (!(w.s_end > w.s_start)) throw InputError("empty aero window");
  aero_windows_.push_back(w);
  return *this;
}

GripSchedule& GripSchedule::with_cap_window(Window w) {
  if (!(w.s_end > w.s_start) || !(w.value > 0.0)) {
    throw InputError("cap window needs positive length and speed");
  }
  cap_windows_.push_back(w);
  return *this;
}

GripState GripSchedule::at(double s) const {
  GripState g = base_;
  if (mu_ramp_) {
    const auto& r = *mu_ramp_;
    const double w = std::clamp((s - r.s_start) / (r.s_end - r.s_start), 0.0, 1.0);
    g.mu_scale *= r.mu_from + w * (r.mu_to - r.mu_from);
  }
  for (const auto& w : aero_windows_) {
    if (s >= w.s_start && s < w.s_end) g.aero_scale *= w.value;
  }
  for (const auto& w : cap_windows_) {
    if (s >= w.s_start && s < w.s_end) {
      g.v_cap = g.v_cap ? std::min(*g.v_cap, w.value) : w.value;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Grid

std::vector<double> Grid::steps() const {
  std::vector<double> h(intervals());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = step(k);
  return h;
}

namespace {

// Desired optimizer step at every track sample: 5 m within corners, rising
// linearly to 25 m over the transition band. Periodic in the lap.
std::vector<double> desired_steps(const TrackProfile& track) {
  const auto samples = track.samples();
  const std::size_t n = samples.size();
  const double lap = track.s_lap();
  std::vector<double> dist(n, kInf);
  bool any_corner = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(samples[i].kappa) >= kCornerCurvature) {
      dist[i] = 0.0;
      any_corner = true;
    }
  }
  if (any_corner) {
    // Two sweeps per direction cover wrap-around.
    double last = -kInf;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < n; ++i) {
        const double s = samples[i].s + pass * lap;
        if (dist[i] == 0.0) last = s;
        dist[i] = std::min(dist[i], s - last);
      }
    }
    double next = kInf;
    for (int pass = 1; pass >= 0; --pass) {
      for (std::size_t i = n; i-- > 0;) {
        const double s = samples[i].s + pass * lap - lap;
        if (dist[i] == 0.0) next = s;
        dist[i] = std::min(dist[i], next - s);
      }
    }
  }
  std::vector<double> step(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::min(1.0, dist[i] / kStepTransition);
    step[i] = kCornerStep + (kStraightStep - kCornerStep) * w;
  }
  return step;
}

double interp_periodic(const TrackProfile& track, const std::vector<double>& v,
                       double s) {
  const auto samples = track.samples();
  const double x = track.wrap(s);
  auto it = std::upper_bound(
      samples.begin(), samples.end(), x,
      [](double a, const TrackSample& p) { return a < p.s; });
  std::size_t i = static_cast<std::size_t>(std::distance(samples.begin(), it));
  i = std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, samples.size() - 2);
  const double w = (x - samples[i].s) / (samples[i + 1].s - samples[i].s);
  return v[i] + w * (v[i + 1] - v[i]);
}

}  // namespace

Grid build_grid(const TrackProfile& track, double s0, double s_stint,
                GridMode mode) {
  if (!(s0 >= 0.0) || !(s_stint > s0)) {
    throw InputError("empty horizon: need 0 <= s0 < s_stint");
  }
  const double finest =
      mode == GridMode::kOptimizer ? kCornerStep : kSimulationStep;
  if (track.max_spacing() > finest + 1e-9) {
    throw InputError("track sampling coarser than the requested step");
  }
  Grid grid;
  grid.nodes.push_back(s0);
  if (mode == GridMode::kSimulation) {
    const auto whole = static_cast<std::size_t>(
        std::floor((s_stint - s0) / kSimulationStep + 1e-9));
    grid.nodes.reserve(whole + 2);
    for (std::size_t k = 1; k <= whole; ++k) {
      grid.nodes.push_back(s0 + static_cast<double>(k) * kSimulationStep);
    }
    if (s_stint - grid.nodes.back() > 1e-9) {
      grid.nodes.push_back(s_stint);
    } else {
      grid.nodes.back() = s_stint;
    }
    return grid;
  }

  const auto desired = desired_steps(track);
  const auto wanted = [&](double s) { return interp_periodic(track, desired, s); };
  double s = s0;
  while (s_stint - s > 1e-9) {
    const double remaining = s_stint - s;
    // Largest whole step in [5, 25] not exceeding the desired step at any
    // whole-meter offset inside it.
    int h = static_cast<int>(kStraightStep);
    for (; h > static_cast<int>(kCornerStep); --h) {
      bool ok = true;
      for (int j = 0; j <= h && ok; ++j) {
        if (static_cast<double>(j) > remaining) break;
        ok = wanted(s + j) >= static_cast<double>(h) - 1e-9;
      }
      if (ok) break;
    }
    double step = static_cast<double>(h);
    if (remaining <= step + 1e-9) {
      step = remaining;
    } else if (remaining - step < kCornerStep) {
      // Split the tail evenly rather than leave a sliver or overshoot.
      step = 0.5 * remaining;
    }
    s = (remaining - step <= 1e-9) ? s_stint : s + step;
    grid.nodes.push_back(s);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Kinetic-energy bound

double max_speed(double kappa, const VehicleParams& params,
                 const GripState& grip, std::optional<double> extra_cap) {
  double cap = params.v_max;
  if (grip.v_cap) cap = std::min(cap, *grip.v_cap);
  if (extra_cap) cap = std::min(cap, *extra_cap);
  const double k = std::abs(kappa);
  if (k == 0.0) return cap;
  const double mu = params.mu0 * grip.mu_scale;
  const double denom =
      params.m * k - mu * 0.5 * params.rho_cl_A * grip.aero_scale;
  if (denom <= 0.0) return cap;
  return std::min(cap, std::sqrt(mu * params.m * kGravity / denom));
}

std::vector<double> max_kinetic_energy(const TrackProfile& track,
                                       const VehicleParams& params,
                                       const GripSchedule& grip,
                                       std::span<const double> nodes) {
  std::vector<double> bound(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double s = nodes[i];
    const GripState g = grip.at(s);
    const double v = max_speed(track.kappa_at(s), params, g, track.pit_limit_at(s));
    if (!std::isfinite(v)) throw DownforceUnboundedError(i);
    bound[i] = 0.5 * params.m_eq * v * v;
  }
  return bound;
}

std::vector<double> max_kinetic_energy(const TrackProfile& track,
                                       const VehicleParams& params,
                                       const GripState& grip,
                                       const Grid& grid) {
  return max_kinetic_energy(track, params, GripSchedule(grip), grid.nodes);
}

// ---------------------------------------------------------------------------
// Synthetic circuit

TrackProfile generate_synthetic_track(std::uint64_t seed, int n_corners,
                                      double s_lap) {
  if (n_corners < 1) throw InputError("need at least one corner");
  if (!(s_lap >= 500.0)) throw InputError("lap must be at least 500 m");
  std::mt19937_64 rng(seed);

  struct Corner {
    double angle;   // signed turning angle [rad]
    double radius;  // m
    double ramp;    // m, per side
    double length() const { return std::abs(angle) * radius + ramp; }
  };
  std::vector<Corner> corners(static_cast<std::size_t>(n_corners));
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    auto& c = corners[i];
    const double mag = 0.35 + 2.2 * unit(rng);
    const bool left = i > 0 && unit(rng) < 0.25;
    c.angle = left ? -mag : mag;
    c.radius = 30.0 + 150.0 * unit(rng);
    (left ? neg_sum : pos_sum) += mag;
  }
  // One full turn of heading per lap.
  const double scale = (2.0 * std::numbers::pi + neg_sum) / pos_sum;
  for (auto& c : corners) {
    if (c.angle > 0.0) c.angle *= scale;
    c.ramp = std::min(30.0, 0.5 * std::abs(c.angle) * c.radius);
  }

  constexpr double kMinStraight = 40.0;
  double corner_total = 0.0;
  for (const auto& c : corners) corner_total += c.length();
  const double straight_total = s_lap - corner_total;
  if (straight_total < kMinStraight * n_corners) {
    throw InputError("corners do not fit: lap cannot be closed within " +
                     std::to_string(s_lap) + " m");
  }
  std::vector<double> weights(corners.size());
  double wsum = 0.0;
  for (auto& w : weights) {
    w = 0.4 + 1.2 * unit(rng);
    wsum += w;
  }
  const double spare = straight_total - kMinStraight * n_corners;

  // Segment table: [start, end) with a curvature law.
  struct Segment {
    double start;
    const Corner* corner;  // nullptr for a straight
  };
  std::vector<Segment> segments;
  double s = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    segments.push_back({s, nullptr});
    s += kMinStraight + spare * weights[i] / wsum;
    segments.push_back({s, &corners[i]});
    s += corners[i].length();
  }

  const auto kappa_of = [&](double x) {
    auto it = std::upper_bound(
        segments.begin(), segments.end(), x,
        [](double v, const Segment& seg) { return v < seg.start; });
    const Segment& seg = *std::prev(it);
    if (seg.corner == nullptr) return 0.0;
    const Corner& c = *seg.corner;
    const double u = x - seg.start;
    const double len = c.length();
    const double peak = std::copysign(1.0 / c.radius, c.angle);
    if (u < c.ramp) return peak * u / c.ramp;
    if (u > len - c.ramp) return peak * std::max(0.0, len - u) / c.ramp;
    return peak;
  };

  std::vector<TrackSample> samples;
  const auto whole = static_cast<std::size_t>(std::floor(s_lap));
  samples.reserve(whole + 2);
  for (std::size_t i = 0; i <= whole; ++i) {
    const double x = static_cast<double>(i);
    if (x >= s_lap) break;
    samples.push_back({x, kappa_of(x), 0.0});
  }
  samples.push_back({s_lap, 0.0, 0.0});
  return TrackProfile(std::move(samples));
}

// ---------------------------------------------------------------------------
// CSV

TrackProfile load_track_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open track file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "s,kappa,grade") {
    throw InputError("track file " + path.string() +
                     ": expected header 's,kappa,grade'");
  }
  std::vector<TrackSample> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    double v[3];
    for (int c = 0; c < 3; ++c) {
      if (!std::getline(ss, cell, ',')) {
        throw InputError("track file row " + std::to_string(row) +
                         ": expected 3 columns");
      }
      try {
        std::size_t used = 0;
        v[c] = std::stod(cell, &used);
        if (trim(cell.substr(used)) != "") throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InputError("track file row " + std::to_string(row) +
                         ": bad number '" + cell + "'");
      }
    }
    if (!samples.empty() && v[0] == samples.back().s) {
      throw InputError("track file row " + std::to_string(row) +
                       ": duplicate s value");
    }
    samples.push_back({v[0], v[1], v[2]});
  }
  return TrackProfile(std::move(samples));
}

void save_track_csv(const TrackProfile& track,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "s,kappa,grade\n";
  for (const auto& p : track.samples()) {
    out << p.s << ',' << p.kappa << ',' << p.grade << '\n';
  }
}

}  // namespace stintopt
