//! Physical scenario: spherical cell geometry, traffic demand, link budget
//! and the average channel-gain matrix.
//!
//! Cells are laid out as a synthetic hexagonal tiling projected onto the
//! sphere around a seed point (the satellite nadir for the presets). The
//! average uplink gain between the beam boresighted on cell `i` and a
//! device in cell `j` is
//!
//! ```text
//! g_ij = G_t * G_r(theta_ij) / (4 pi d_j / lambda)^2
//! ```
//!
//! with `theta_ij` the angle at the satellite between the boresight to
//! cell `i` and the direction to cell `j`, and `d_j` the slant range. All
//! devices in a cell share the cell-center gain.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Mean Earth radius (km).
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant (dBW/K/Hz).
pub const BOLTZMANN_DBW: f64 = -228.6;
/// Default cell circumradius (km), matching a hex tiling sized for
/// ~50 km beam diameters.
pub const DEFAULT_CELL_RADIUS_KM: f64 = 23.73;

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One serving cell: position, demand and activation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    /// Geodetic latitude of the cell center (degrees).
    pub lat_deg: f64,
    /// Geodetic longitude of the cell center (degrees).
    pub lon_deg: f64,
    /// Device count N_i (may be fractional; the demand model output is real).
    pub demand: f64,
    /// Per-device activation probability alpha_i in (0, 1].
    pub activation: f64,
}

impl Cell {
    fn validate(&self, idx: usize) -> Result<()> {
        if self.demand.is_nan() || self.demand < 1.0 {
            return Err(Error::Validation {
                field: format!("cells[{idx}].demand"),
                message: format!("device count must be >= 1, got {}", self.demand),
            });
        }
        if !(self.activation > 0.0 && self.activation <= 1.0) {
            return Err(Error::Validation {
                field: format!("cells[{idx}].activation"),
                message: format!("activation probability out of range (0, 1]: {}", self.activation),
            });
        }
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(Error::Validation {
                field: format!("cells[{idx}].lat"),
                message: format!("latitude out of [-90, 90]: {}", self.lat_deg),
            });
        }
        if !(-180.0..180.0).contains(&self.lon_deg) {
            return Err(Error::Validation {
                field: format!("cells[{idx}].lon"),
                message: format!("longitude out of [-180, 180): {}", self.lon_deg),
            });
        }
        Ok(())
    }
}

/// Satellite position above the spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteGeometry {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub altitude_km: f64,
    pub earth_radius_km: f64,
}

impl SatelliteGeometry {
    pub fn new(lat_deg: f64, lon_deg: f64, altitude_km: f64) -> Self {
        Self { lat_deg, lon_deg, altitude_km, earth_radius_km: EARTH_RADIUS_KM }
    }

    fn validate(&self) -> Result<()> {
        if self.altitude_km.is_nan() || self.altitude_km <= 0.0 {
            return Err(Error::Validation {
                field: "satellite.altitude_km".into(),
                message: format!("altitude must be positive, got {}", self.altitude_km),
            });
        }
        Ok(())
    }
}

/// Uplink budget. Gains and ratios are configured in dB and exposed in
/// linear scale through accessors so that scenario files round-trip
/// bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Device transmit gain (dBi).
    pub g_t_dbi: f64,
    /// Carrier frequency (Hz).
    pub f_c_hz: f64,
    /// Satellite antenna aperture diameter (m).
    pub aperture_m: f64,
    /// Aperture efficiency in (0, 1].
    pub efficiency: f64,
    /// System SNR rho = P_tx / (N0 B) (dB).
    pub rho_db: f64,
    /// SINR decoding threshold (dB).
    pub gamma_th_db: f64,
    /// Resource blocks per time slot.
    pub n_r: usize,
}

impl LinkBudget {
    /// Device transmit gain, linear.
    pub fn g_t(&self) -> f64 {
        db_to_linear(self.g_t_dbi)
    }

    /// System SNR rho, linear.
    pub fn rho(&self) -> f64 {
        db_to_linear(self.rho_db)
    }

    /// SINR threshold, linear.
    pub fn gamma_th(&self) -> f64 {
        db_to_linear(self.gamma_th_db)
    }

    /// Carrier wavelength (m).
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c_hz
    }

    /// Boresight receive gain G_max = efficiency * (pi D / lambda)^2, linear.
    pub fn g_max(&self) -> f64 {
        let x = PI * self.aperture_m / self.wavelength();
        self.efficiency * x * x
    }

    fn validate(&self) -> Result<()> {
        let positives: [(&str, f64); 3] = [
            ("link.f_c_hz", self.f_c_hz),
            ("link.aperture_m", self.aperture_m),
            ("link.efficiency", self.efficiency),
        ];
        for (field, v) in positives {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Validation {
                    field: field.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        if self.efficiency > 1.0 {
            return Err(Error::Validation {
                field: "link.efficiency".into(),
                message: format!("aperture efficiency must be in (0, 1], got {}", self.efficiency),
            });
        }
        if self.n_r == 0 {
            return Err(Error::Validation {
                field: "link.n_r".into(),
                message: "resource block count must be >= 1".into(),
            });
        }
        for (field, v) in [
            ("link.rho_db", self.rho_db),
            ("link.gamma_th_db", self.gamma_th_db),
            ("link.g_t_dbi", self.g_t_dbi),
        ] {
            if !v.is_finite() {
                return Err(Error::Validation {
                    field: field.into(),
                    message: "must be finite".into(),
                });
            }
        }
        Ok(())
    }
}

/// System SNR from transmit power and receiver figure of merit:
/// `rho = P_tx * (G/T) / (k * B * G_rmax)`, returned linear.
///
/// The boresight gain divides out because `G/T` already contains the
/// receive gain that the channel-gain matrix accounts for separately.
pub fn rho_from_link_budget(
    p_tx_w: f64,
    g_over_t_db_per_k: f64,
    bandwidth_hz: f64,
    g_r_max_linear: f64,
) -> f64 {
    let k = db_to_linear(BOLTZMANN_DBW);
    let t_sys = g_r_max_linear / db_to_linear(g_over_t_db_per_k);
    p_tx_w / (k * t_sys * bandwidth_hz)
}

/// Complete immutable scenario shared by the solvers and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cells: Vec<Cell>,
    pub geometry: SatelliteGeometry,
    pub link: LinkBudget,
    /// Average channel gains g_ij (linear), N_c x N_c.
    pub gains: DMatrix<f64>,
    /// Slots per beam-hopping window.
    pub n_slot: usize,
    /// Simultaneous beams.
    pub n_b: usize,
}

impl Scenario {
    /// Builds a scenario and computes the gain matrix from geometry.
    pub fn new(
        cells: Vec<Cell>,
        geometry: SatelliteGeometry,
        link: LinkBudget,
        n_slot: usize,
        n_b: usize,
    ) -> Result<Self> {
        let gains = gain_matrix(&cells, &geometry, &link)?;
        Self::with_gains(cells, geometry, link, gains, n_slot, n_b)
    }

    /// Builds a scenario with a precomputed gain matrix.
    pub fn with_gains(
        cells: Vec<Cell>,
        geometry: SatelliteGeometry,
        link: LinkBudget,
        gains: DMatrix<f64>,
        n_slot: usize,
        n_b: usize,
    ) -> Result<Self> {
        let s = Self { cells, geometry, link, gains, n_slot, n_b };
        s.validate()?;
        Ok(s)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Per-cell demand vector N_i.
    pub fn demands(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.demand).collect()
    }

    /// Per-cell activation probabilities alpha_i.
    pub fn activations(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.activation).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.cells.len();
        if n == 0 {
            return Err(Error::Validation {
                field: "cells".into(),
                message: "scenario needs at least one cell".into(),
            });
        }
        for (idx, c) in self.cells.iter().enumerate() {
            c.validate(idx)?;
        }
        self.geometry.validate()?;
        self.link.validate()?;
        if self.n_slot == 0 {
            return Err(Error::Validation {
                field: "pattern_dims.n_slot".into(),
                message: "slot count must be >= 1".into(),
            });
        }
        if self.n_b == 0 || (n > 1 && self.n_b >= n) {
            return Err(Error::Validation {
                field: "pattern_dims.n_b".into(),
                message: format!("beam count must satisfy 1 <= n_b < n_cells, got {}", self.n_b),
            });
        }
        if self.gains.nrows() != n || self.gains.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "gain matrix is {}x{}, expected {n}x{n}",
                self.gains.nrows(),
                self.gains.ncols()
            )));
        }
        if self.gains.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return Err(Error::Validation {
                field: "gains".into(),
                message: "all channel gains must be strictly positive and finite".into(),
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Spherical geometry helpers
// ---------------------------------------------------------------------------

fn ecef_km(lat_deg: f64, lon_deg: f64, radius_km: f64) -> [f64; 3] {
    let lat = lat_deg.to_radians();
    let lon = lon_deg.to_radians();
    [
        radius_km * lat.cos() * lon.cos(),
        radius_km * lat.cos() * lon.sin(),
        radius_km * lat.sin(),
    ]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Great-circle distance between two geodetic points (km).
pub fn great_circle_km(lat1_deg: f64, lon1_deg: f64, lat2_deg: f64, lon2_deg: f64) -> f64 {
    let (p1, l1) = (lat1_deg.to_radians(), lon1_deg.to_radians());
    let (p2, l2) = (lat2_deg.to_radians(), lon2_deg.to_radians());
    let a = ((p2 - p1) / 2.0).sin().powi(2)
        + p1.cos() * p2.cos() * ((l2 - l1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Destination point on the sphere from a start point, initial bearing
/// (radians, clockwise from north) and arc distance (km).
fn destination(lat_deg: f64, lon_deg: f64, bearing_rad: f64, distance_km: f64) -> (f64, f64) {
    let delta = distance_km / EARTH_RADIUS_KM;
    let p1 = lat_deg.to_radians();
    let l1 = lon_deg.to_radians();
    let p2 = (p1.sin() * delta.cos() + p1.cos() * delta.sin() * bearing_rad.cos()).asin();
    let l2 = l1
        + (bearing_rad.sin() * delta.sin() * p1.cos())
            .atan2(delta.cos() - p1.sin() * p2.sin());
    let mut lon2 = l2.to_degrees();
    // normalize to [-180, 180)
    lon2 = (lon2 + 540.0).rem_euclid(360.0) - 180.0;
    (p2.to_degrees(), lon2)
}

// ---------------------------------------------------------------------------
// Hexagonal cell grid
// ---------------------------------------------------------------------------

/// Hexagonally packed cell centers nearest a seed point on the sphere,
/// ordered by great-circle distance from the seed.
///
/// Axial hexagon coordinates are laid out on the local tangent plane
/// (pointy-top, neighbor spacing `sqrt(3) * cell_radius_km`) and mapped to
/// geodetic coordinates via bearing/distance from the seed.
pub fn build_cell_grid(
    center_lat_deg: f64,
    center_lon_deg: f64,
    cell_radius_km: f64,
    n_cells: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_cells == 0 {
        return Err(Error::Validation {
            field: "n_cells".into(),
            message: "grid needs at least one cell".into(),
        });
    }
    if cell_radius_km.is_nan() || cell_radius_km <= 0.0 {
        return Err(Error::Validation {
            field: "cell_radius_km".into(),
            message: format!("cell radius must be positive, got {cell_radius_km}"),
        });
    }
    // smallest ring count k with 1 + 3k(k+1) >= n_cells
    let mut rings = 0usize;
    while 1 + 3 * rings * (rings + 1) < n_cells {
        rings += 1;
    }
    // keep the tangent-plane mapping sane: reject tilings whose outer ring
    // would extend beyond a quarter of the Earth's circumference / 4
    let extent_km = rings as f64 * 3f64.sqrt() * cell_radius_km;
    if extent_km > EARTH_RADIUS_KM * PI / 4.0 {
        return Err(Error::InstanceTooLarge(format!(
            "{n_cells} cells of radius {cell_radius_km} km exceed the tiling extent"
        )));
    }

    let spacing = 3f64.sqrt() * cell_radius_km;
    let mut centers: Vec<(f64, f64, i64, i64, f64)> = Vec::new();
    let k = rings as i64;
    for q in -k..=k {
        let r_lo = (-k).max(-q - k);
        let r_hi = k.min(-q + k);
        for r in r_lo..=r_hi {
            // pointy-top axial -> planar offsets (x east, y north)
            let x = spacing * (q as f64 + r as f64 / 2.0);
            let y = spacing * 3f64.sqrt() / 2.0 * r as f64;
            let d = (x * x + y * y).sqrt();
            let (lat, lon) = if d == 0.0 {
                (center_lat_deg, center_lon_deg)
            } else {
                destination(center_lat_deg, center_lon_deg, x.atan2(y), d)
            };
            let gc = great_circle_km(center_lat_deg, center_lon_deg, lat, lon);
            centers.push((lat, lon, q, r, gc));
        }
    }
    centers.sort_by(|a, b| {
        a.4.partial_cmp(&b.4)
            .unwrap()
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    Ok(centers.into_iter().take(n_cells).map(|c| (c.0, c.1)).collect())
}

// ---------------------------------------------------------------------------
// Traffic demand
// ---------------------------------------------------------------------------

/// Hybrid traffic demand: `N_i = n_avg * (eta * u_i + (1 - eta) * p_i)`.
pub fn demand_model(u_i: f64, p_i: f64, eta: f64, n_avg: f64) -> f64 {
    n_avg * (eta * u_i + (1.0 - eta) * p_i)
}

/// Population-centric demand factors `p_i = P_i^beta / mean_j(P_j^beta)`,
/// normalized so the factors average to one.
pub fn population_scaling(populations: &[f64], beta: f64) -> Vec<f64> {
    let powered: Vec<f64> = populations.iter().map(|&p| p.powf(beta)).collect();
    let mean = powered.iter().sum::<f64>() / powered.len() as f64;
    powered.iter().map(|&p| p / mean).collect()
}

/// Synthetic log-normal cell populations (median 1000, shape `sigma`).
pub fn synthetic_populations(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(1000f64.ln(), sigma).expect("valid sigma");
    (0..n).map(|_| rng.sample(normal).exp()).collect()
}

/// Loads a `cell_id,population` CSV covering ids `0..n` exactly once each.
pub fn load_population_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.to_ascii_lowercase().starts_with("cell_id") {
            continue;
        }
        let mut parts = line.split(',');
        let id: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Validation {
                field: format!("population csv line {}", lineno + 1),
                message: "expected `cell_id,population`".into(),
            })?;
        let pop: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Validation {
                field: format!("population csv line {}", lineno + 1),
                message: "expected `cell_id,population`".into(),
            })?;
        rows.push((id, pop));
    }
    rows.sort_by_key(|r| r.0);
    for (want, (id, _)) in rows.iter().enumerate() {
        if *id != want {
            return Err(Error::Validation {
                field: "population csv".into(),
                message: format!("cell ids must cover 0..n exactly once; missing or duplicate id {want}"),
            });
        }
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

// ---------------------------------------------------------------------------
// Antenna pattern and channel gains
// ---------------------------------------------------------------------------

/// Bessel function of the first kind J1, by the classic rational
/// approximations (Abramowitz & Stegun 9.4); absolute error below ~1e-7.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let result = if ax < 8.0 {
        let y = x * x;
        let r = x
            * (72362614232.0
                + y * (-7895059235.0
                    + y * (242396853.1
                        + y * (-2972611.439 + y * (15704.48260 + y * (-30.16036606))))));
        let s = 144725228442.0
            + y * (2300535178.0
                + y * (18583304.74 + y * (99447.43394 + y * (376.9991397 + y))));
        return r / s;
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 2.356194491;
        let p = 1.0
            + y * (0.183105e-2
                + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * (-0.240337019e-6))));
        let q = 0.04687499995
            + y * (-0.2002690873e-3
                + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        (0.636619772 / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q)
    };
    if x < 0.0 {
        -result
    } else {
        result
    }
}

/// Normalized sidelobe floor applied to the aperture pattern so channel
/// gains stay strictly positive even at pattern nulls.
const PATTERN_FLOOR: f64 = 1e-12;

/// Circular-aperture (Airy) receive gain at off-boresight angle `theta`:
/// `G_r(theta) = G_max * 4 |J1(u)/u|^2` with `u = (2 pi a / lambda) sin theta`.
pub fn receive_gain(theta_rad: f64, link: &LinkBudget) -> f64 {
    let a = link.aperture_m / 2.0;
    let u = 2.0 * PI * a / link.wavelength() * theta_rad.sin().abs();
    let pattern = if u < 1e-6 {
        1.0
    } else {
        let ratio = bessel_j1(u) / u;
        4.0 * ratio * ratio
    };
    link.g_max() * pattern.max(PATTERN_FLOOR)
}

/// Average channel-gain matrix `g[i][j]` between the beam boresighted on
/// cell `i` and devices in cell `j`. Fails if any cell sees the satellite
/// at or below the horizon.
pub fn gain_matrix(
    cells: &[Cell],
    geometry: &SatelliteGeometry,
    link: &LinkBudget,
) -> Result<DMatrix<f64>> {
    let n = cells.len();
    let sat = ecef_km(
        geometry.lat_deg,
        geometry.lon_deg,
        geometry.earth_radius_km + geometry.altitude_km,
    );
    let mut dirs = Vec::with_capacity(n);
    let mut slant_m = Vec::with_capacity(n);
    for (j, c) in cells.iter().enumerate() {
        let pos = ecef_km(c.lat_deg, c.lon_deg, geometry.earth_radius_km);
        let to_cell = [pos[0] - sat[0], pos[1] - sat[1], pos[2] - sat[2]];
        let d = norm3(&to_cell);
        // elevation of the satellite above the cell's local horizon
        let up = [pos[0], pos[1], pos[2]];
        let sin_el = -dot3(&to_cell, &up) / (d * norm3(&up));
        if sin_el <= 0.0 {
            return Err(Error::BelowHorizon { cell: j });
        }
        dirs.push([to_cell[0] / d, to_cell[1] / d, to_cell[2] / d]);
        slant_m.push(d * 1000.0);
    }
    let lambda = link.wavelength();
    let g_t = link.g_t();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let cos_theta = dot3(&dirs[i], &dirs[j]).clamp(-1.0, 1.0);
            let theta = cos_theta.acos();
            let fspl = (4.0 * PI * slant_m[j] / lambda).powi(2);
            g[(i, j)] = g_t * receive_gain(theta, link) / fspl;
        }
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Scenario file (JSON)
// ---------------------------------------------------------------------------

pub const SCENARIO_SCHEMA: &str = "beamhop-scenario-v1";

#[derive(Serialize, Deserialize)]
struct CellFile {
    id: usize,
    lat: f64,
    lon: f64,
    demand: f64,
    activation: f64,
}

#[derive(Serialize, Deserialize)]
struct SatelliteFile {
    lat: f64,
    lon: f64,
    altitude_km: f64,
}

#[derive(Serialize, Deserialize)]
struct RhoBudgetFile {
    p_tx_dbm: f64,
    g_over_t_db: f64,
    bandwidth_hz: f64,
}

#[derive(Serialize, Deserialize)]
struct LinkFile {
    g_t_dbi: f64,
    f_c_hz: f64,
    aperture_m: f64,
    efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_budget: Option<RhoBudgetFile>,
    gamma_th_db: f64,
    n_r: usize,
}

#[derive(Serialize, Deserialize)]
struct PatternDimsFile {
    n_slot: usize,
    n_b: usize,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    schema: String,
    cells: Vec<CellFile>,
    satellite: SatelliteFile,
    link: LinkFile,
    pattern_dims: PatternDimsFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    gains: Option<Vec<Vec<f64>>>,
}

/// Serializes a scenario to the JSON scenario format (gains included).
pub fn scenario_to_json(s: &Scenario) -> String {
    let file = ScenarioFile {
        schema: SCENARIO_SCHEMA.into(),
        cells: s
            .cells
            .iter()
            .map(|c| CellFile {
                id: c.id,
                lat: c.lat_deg,
                lon: c.lon_deg,
                demand: c.demand,
                activation: c.activation,
            })
            .collect(),
        satellite: SatelliteFile {
            lat: s.geometry.lat_deg,
            lon: s.geometry.lon_deg,
            altitude_km: s.geometry.altitude_km,
        },
        link: LinkFile {
            g_t_dbi: s.link.g_t_dbi,
            f_c_hz: s.link.f_c_hz,
            aperture_m: s.link.aperture_m,
            efficiency: s.link.efficiency,
            rho_db: Some(s.link.rho_db),
            rho_budget: None,
            gamma_th_db: s.link.gamma_th_db,
            n_r: s.link.n_r,
        },
        pattern_dims: PatternDimsFile { n_slot: s.n_slot, n_b: s.n_b },
        gains: Some(
            (0..s.n_cells())
                .map(|i| (0..s.n_cells()).map(|j| s.gains[(i, j)]).collect())
                .collect(),
        ),
    };
    serde_json::to_string_pretty(&file).expect("scenario serialization cannot fail")
}

/// Parses a scenario from JSON. Gains are recomputed from geometry when the
/// file omits them; `rho_db` may alternatively be given as link-budget
/// sub-fields (`rho_budget`).
pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.schema != SCENARIO_SCHEMA {
        return Err(Error::Validation {
            field: "schema".into(),
            message: format!("expected `{SCENARIO_SCHEMA}`, got `{}`", file.schema),
        });
    }
    let cells: Vec<Cell> = file
        .cells
        .iter()
        .map(|c| Cell {
            id: c.id,
            lat_deg: c.lat,
            lon_deg: c.lon,
            demand: c.demand,
            activation: c.activation,
        })
        .collect();
    let geometry = SatelliteGeometry::new(
        file.satellite.lat,
        file.satellite.lon,
        file.satellite.altitude_km,
    );
    let mut link = LinkBudget {
        g_t_dbi: file.link.g_t_dbi,
        f_c_hz: file.link.f_c_hz,
        aperture_m: file.link.aperture_m,
        efficiency: file.link.efficiency,
        rho_db: 0.0,
        gamma_th_db: file.link.gamma_th_db,
        n_r: file.link.n_r,
    };
    link.rho_db = match (file.link.rho_db, &file.link.rho_budget) {
        (Some(db), _) => db,
        (None, Some(budget)) => {
            let p_tx_w = db_to_linear(budget.p_tx_dbm - 30.0);
            linear_to_db(rho_from_link_budget(
                p_tx_w,
                budget.g_over_t_db,
                budget.bandwidth_hz,
                link.g_max(),
            ))
        }
        (None, None) => {
            return Err(Error::Validation {
                field: "link.rho_db".into(),
                message: "one of `rho_db` or `rho_budget` is required".into(),
            })
        }
    };
    match file.gains {
        Some(rows) => {
            let n = cells.len();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch(format!(
                    "gains must be a {n}x{n} row-major matrix"
                )));
            }
            let gains = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            Scenario::with_gains(cells, geometry, link, gains, file.pattern_dims.n_slot, file.pattern_dims.n_b)
        }
        None => Scenario::new(cells, geometry, link, file.pattern_dims.n_slot, file.pattern_dims.n_b),
    }
}

/// Writes a scenario file. `load_scenario(save_scenario(s))` reproduces `s`
/// bit-exactly.
pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_json(s))?;
    Ok(())
}

/// Reads a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    scenario_from_json(&text)
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

/// Parameters for synthetic scenario generation.
#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub altitude_km: f64,
    pub cell_radius_km: f64,
    pub n_cells: usize,
    pub n_slot: usize,
    pub n_b: usize,
    /// Average traffic demand per cell.
    pub n_avg: f64,
    /// Weight of the ubiquitous (uniform) demand component.
    pub eta: f64,
    /// Population scaling exponent.
    pub beta: f64,
    /// Per-device activation probability applied to every cell.
    pub activation: f64,
    pub g_t_dbi: f64,
    pub f_c_hz: f64,
    pub aperture_m: f64,
    pub efficiency: f64,
    /// Explicit system SNR; `None` derives it from the power/bandwidth
    /// defaults via [`rho_from_link_budget`].
    pub rho_db: Option<f64>,
    pub gamma_th_db: f64,
    pub n_r: usize,
    /// Log-normal shape for synthetic populations.
    pub population_sigma: f64,
    /// Explicit per-cell populations (e.g. from CSV); `None` draws
    /// synthetic ones.
    pub populations: Option<Vec<f64>>,
}

impl Default for GeneratorParams {
    /// Full-scale defaults: 80 cells, 6 beams, 64 slots, 20 resource
    /// blocks, demand mix eta = 0.3.
    fn default() -> Self {
        Self {
            center_lat_deg: 0.0,
            center_lon_deg: 0.0,
            altitude_km: 600.0,
            cell_radius_km: DEFAULT_CELL_RADIUS_KM,
            n_cells: 80,
            n_slot: 64,
            n_b: 6,
            n_avg: 1000.0,
            eta: 0.3,
            beta: 0.5,
            activation: 0.01,
            g_t_dbi: 0.0,
            f_c_hz: 2.0e9,
            aperture_m: 2.0,
            efficiency: 0.55,
            rho_db: None,
            gamma_th_db: 5.0,
            n_r: 20,
            population_sigma: 1.0,
            populations: None,
        }
    }
}

impl GeneratorParams {
    /// Desk-scale preset: 20 cells, 3 beams, 16 slots.
    pub fn desk() -> Self {
        Self { n_cells: 20, n_slot: 16, n_b: 3, ..Self::default() }
    }
}

/// Default UE transmit power (W) used when `rho_db` is not given.
pub const DEFAULT_P_TX_W: f64 = 0.2;
/// Default receiver figure of merit G/T (dB/K).
pub const DEFAULT_G_OVER_T_DB: f64 = 1.1;
/// Default bandwidth per resource block (Hz).
pub const DEFAULT_RB_BANDWIDTH_HZ: f64 = 1.0e6;

/// Generates a scenario: hex cell grid at the satellite nadir, seeded
/// demand draws, and the channel-gain matrix.
pub fn generate_scenario(params: &GeneratorParams, seed: u64) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&params.eta) {
        return Err(Error::Validation {
            field: "eta".into(),
            message: format!("demand mix weight must be in [0, 1], got {}", params.eta),
        });
    }
    let centers = build_cell_grid(
        params.center_lat_deg,
        params.center_lon_deg,
        params.cell_radius_km,
        params.n_cells,
    )?;
    let mut link = LinkBudget {
        g_t_dbi: params.g_t_dbi,
        f_c_hz: params.f_c_hz,
        aperture_m: params.aperture_m,
        efficiency: params.efficiency,
        rho_db: 0.0,
        gamma_th_db: params.gamma_th_db,
        n_r: params.n_r,
    };
    link.rho_db = params.rho_db.unwrap_or_else(|| {
        linear_to_db(rho_from_link_budget(
            DEFAULT_P_TX_W,
            DEFAULT_G_OVER_T_DB,
            DEFAULT_RB_BANDWIDTH_HZ,
            link.g_max(),
        ))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform: Vec<f64> = (0..params.n_cells).map(|_| rng.random_range(0.5..1.5)).collect();
    let populations = match &params.populations {
        Some(p) => {
            if p.len() != params.n_cells {
                return Err(Error::DimensionMismatch(format!(
                    "{} populations supplied for {} cells",
                    p.len(),
                    params.n_cells
                )));
            }
            p.clone()
        }
        None => synthetic_populations(params.n_cells, params.population_sigma, rng.random()),
    };
    let scaling = population_scaling(&populations, params.beta);

    let cells: Vec<Cell> = centers
        .into_iter()
        .enumerate()
        .map(|(i, (lat, lon))| Cell {
            id: i,
            lat_deg: lat,
            lon_deg: lon,
            demand: demand_model(uniform[i], scaling[i], params.eta, params.n_avg).max(1.0),
            activation: params.activation,
        })
        .collect();

    let geometry = SatelliteGeometry::new(params.center_lat_deg, params.center_lon_deg, params.altitude_km);
    Scenario::new(cells, geometry, link, params.n_slot, params.n_b)
}
