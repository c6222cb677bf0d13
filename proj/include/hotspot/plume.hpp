#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hotspot {

// World-frame position in metres: x east, y north, z above ground.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct DispersionCoefficients {
  double sigma_y = 0.0;  // m
  double sigma_z = 0.0;  // m
};

// Receptor position in the plume frame: origin at the source, downwind_x
// along the direction the wind blows toward, crosswind_y perpendicular.
struct DownwindFrame {
  double downwind_x = 0.0;
  double crosswind_y = 0.0;
};

// Steady-state Gaussian plume over flat terrain. wind_direction_deg is the
// meteorological convention: the compass bearing the wind blows FROM
// (0 = north, 90 = east).
struct PlumeConfig {
  double wind_speed = 4.0;            // m/s
  double wind_direction_deg = 320.0;  // deg
  int stability_class = 2;            // 1 (very unstable) .. 6 (very stable)
  double source_x = 150.0;            // m
  double source_y = 850.0;            // m
  double source_z = 0.0;              // m, ground-level release
  double cell_size = 100.0;           // m, edge length of the emitting cell
  double background_ppm = 400.0;
  double air_temperature_k = 288.15;
  double pressure_kpa = 101.325;

  void validate() const {
    if (!(wind_speed > 0.0))
      throw std::invalid_argument("PlumeConfig: wind_speed must be > 0");
    if (!(wind_direction_deg >= 0.0) || !(wind_direction_deg < 360.0))
      throw std::invalid_argument("PlumeConfig: wind_direction_deg must lie in [0, 360)");
    if (stability_class < 1 || stability_class > 6)
      throw std::invalid_argument("PlumeConfig: stability_class must lie in 1..6");
    if (!(cell_size > 0.0))
      throw std::invalid_argument("PlumeConfig: cell_size must be > 0");
    if (!(source_z >= 0.0))
      throw std::invalid_argument("PlumeConfig: source_z must be >= 0");
    if (!(background_ppm >= 0.0))
      throw std::invalid_argument("PlumeConfig: background_ppm must be >= 0");
    if (!(air_temperature_k > 0.0) || !(pressure_kpa > 0.0))
      throw std::invalid_argument("PlumeConfig: temperature and pressure must be > 0");
  }
};

namespace detail {
inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
}  // namespace detail

inline DownwindFrame downwind_frame(const Point3& p, const PlumeConfig& cfg) {
  // Downwind bearing is the FROM bearing plus 180; bearings measure from
  // north, so the unit vector is (sin b, cos b).
  const double beta = detail::deg_to_rad(std::fmod(cfg.wind_direction_deg + 180.0, 360.0));
  const double ux = std::sin(beta);
  const double uy = std::cos(beta);
  const double dx = p.x - cfg.source_x;
  const double dy = p.y - cfg.source_y;
  return {dx * ux + dy * uy, -dx * uy + dy * ux};
}

// Briggs open-country interpolation formulas, stability classes A-F mapped
// to 1-6, nominal validity 100 m .. 10 km downwind:
//
//   class   sigma_y                      sigma_z
//   1 (A)   0.22 x (1 + 1e-4 x)^-1/2     0.20 x
//   2 (B)   0.16 x (1 + 1e-4 x)^-1/2     0.12 x
//   3 (C)   0.11 x (1 + 1e-4 x)^-1/2     0.08 x (1 + 2e-4 x)^-1/2
//   4 (D)   0.08 x (1 + 1e-4 x)^-1/2     0.06 x (1 + 1.5e-3 x)^-1/2
//   5 (E)   0.06 x (1 + 1e-4 x)^-1/2     0.03 x (1 + 3e-4 x)^-1
//   6 (F)   0.04 x (1 + 1e-4 x)^-1/2     0.016 x (1 + 3e-4 x)^-1
inline DispersionCoefficients dispersion(double downwind_x, int stability_class) {
  if (!(downwind_x > 0.0))
    throw std::domain_error("dispersion: downwind distance must be > 0");
  if (stability_class < 1 || stability_class > 6)
    throw std::invalid_argument("dispersion: stability_class must lie in 1..6");
  const double x = downwind_x;
  constexpr double ay[6] = {0.22, 0.16, 0.11, 0.08, 0.06, 0.04};
  const double sigma_y = ay[stability_class - 1] * x / std::sqrt(1.0 + 1e-4 * x);
  double sigma_z = 0.0;
  switch (stability_class) {
    case 1: sigma_z = 0.20 * x; break;
    case 2: sigma_z = 0.12 * x; break;
    case 3: sigma_z = 0.08 * x / std::sqrt(1.0 + 2e-4 * x); break;
    case 4: sigma_z = 0.06 * x / std::sqrt(1.0 + 1.5e-3 * x); break;
    case 5: sigma_z = 0.03 * x / (1.0 + 3e-4 * x); break;
    case 6: sigma_z = 0.016 * x / (1.0 + 3e-4 * x); break;
  }
  return {sigma_y, sigma_z};
}

inline constexpr double kGasConstant = 8.314462618;  // J mol^-1 K^-1
inline constexpr double kMolarMassCo2 = 44.01;       // g/mol

// Ideal-gas conversion factor from mg m^-3 to ppm(v) of CO2 at the
// configured temperature and pressure.
inline double ppm_per_mg_m3(const PlumeConfig& cfg) {
  return kGasConstant * cfg.air_temperature_k / (cfg.pressure_kpa * kMolarMassCo2);
}

// Excess concentration in ppm per unit surface flux (mg m^-2 s^-1) emitted
// by one grid cell. Ground-reflection plume; receptors at or upwind of the
// source plane see zero excess. The observation operator is this factor
// times the flux, so linearity in flux is exact.
inline double excess_factor(const Point3& p, const PlumeConfig& cfg) {
  const DownwindFrame f = downwind_frame(p, cfg);
  if (f.downwind_x <= 0.0) return 0.0;
  const auto [sigma_y, sigma_z] = dispersion(f.downwind_x, cfg.stability_class);
  const double emission_per_flux = cfg.cell_size * cfg.cell_size;  // mg/s per unit flux
  const double norm =
      emission_per_flux / (2.0 * std::numbers::pi * cfg.wind_speed * sigma_y * sigma_z);
  const double lateral = std::exp(-f.crosswind_y * f.crosswind_y / (2.0 * sigma_y * sigma_y));
  const double zm = p.z - cfg.source_z;
  const double zp = p.z + cfg.source_z;
  const double vertical = std::exp(-zm * zm / (2.0 * sigma_z * sigma_z)) +
                          std::exp(-zp * zp / (2.0 * sigma_z * sigma_z));
  return norm * lateral * vertical * ppm_per_mg_m3(cfg);
}

// Total concentration in ppm at receptor p for surface flux phi.
inline double concentration(double phi, const Point3& p, const PlumeConfig& cfg) {
  if (!(phi >= 0.0)) throw std::domain_error("concentration: flux must be >= 0");
  return cfg.background_ppm + excess_factor(p, cfg) * phi;
}

}  // namespace hotspot
