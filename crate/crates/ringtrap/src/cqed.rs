//! Atom-photon coupling metrics (mode area/volume, g, cooperativity) and the
//! (W, H, R) geometry sweep that optimizes cooperativity under a roughness
//! budget.

use crate::domain::{AtomSpecies, Grid2D, RingGeometry, C_LIGHT};
use crate::error::{Error, Result};
use crate::loss::{
    fit_kappa_to_q, q_surface_scattering, QBreakdown, RoughnessSpec,
    SurroundingIndices, Q_CEILING,
};
use crate::modes::{
    adjacent_cladding_index, bend_loss_q, default_window, solve_modes, ModeField, Polarization,
    SolveOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

/// Effective mode area at the atom position:
/// A_m = int eps |E|^2 drho dz / (eps_a |E(rho_a, z_a)|^2).
/// The atom must sit in vacuum (eps = 1), outside the dielectric.
pub fn mode_area(mode: &ModeField, eps_map: &Grid2D, atom_pos: (f64, f64)) -> Result<f64> {
    let (rho_a, z_a) = atom_pos;
    let eps_atom = eps_map.interpolate(rho_a, z_a)?;
    if (eps_atom - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "atom position ({:.3e}, {:.3e}) lies inside dielectric (eps = {eps_atom:.4})",
            rho_a, z_a
        )));
    }
    let intensity_atom = mode.intensity(rho_a, z_a)?;
    if intensity_atom <= 0.0 {
        return Err(Error::InvalidInput("mode vanishes at the atom position".into()));
    }
    let drho = eps_map.rho[1] - eps_map.rho[0];
    let dz = eps_map.z[1] - eps_map.z[0];
    let mut integral = 0.0;
    for i in 0..eps_map.rho.len() {
        for j in 0..eps_map.z.len() {
            integral += eps_map.at(i, j) * mode.intensity_at(i, j);
        }
    }
    Ok(integral * drho * dz / (eps_atom * intensity_atom))
}

/// V_m = A_m * L (resonator circumference).
pub fn mode_volume(mode_area: f64, geometry: &RingGeometry) -> f64 {
    mode_area * geometry.circumference()
}

/// Reduced-dipole coupling rate g = sqrt(3 lambda^3 omega gamma / (16 pi^2 V_m)).
pub fn coupling_g(mode_volume: f64, species: &AtomSpecies, omega: f64) -> Result<f64> {
    if mode_volume <= 0.0 {
        return Err(Error::InvalidInput("mode volume must be positive".into()));
    }
    let lambda = 2.0 * PI * C_LIGHT / omega;
    Ok((3.0 * lambda.powi(3) * omega * species.gamma / (16.0 * PI * PI * mode_volume)).sqrt())
}

/// C = 4 g^2 / (kappa gamma).
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    if kappa <= 0.0 || gamma <= 0.0 {
        return Err(Error::InvalidInput("kappa and gamma must be positive".into()));
    }
    Ok(4.0 * g * g / (kappa * gamma))
}

/// Equivalent quality-factor form C = (3 lambda^3 / 4 pi^2) (Q / V_m),
/// exactly equal to `cooperativity` when g and kappa derive from the same
/// (V_m, Q).
pub fn cooperativity_qv(lambda: f64, q: f64, mode_volume: f64) -> Result<f64> {
    if mode_volume <= 0.0 || q <= 0.0 {
        return Err(Error::InvalidInput("Q and mode volume must be positive".into()));
    }
    Ok(3.0 * lambda.powi(3) / (4.0 * PI * PI) * q / mode_volume)
}

/// Single-geometry cQED evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CqedReport {
    pub geometry: RingGeometry,
    pub polarization: Polarization,
    pub atom_position: (f64, f64),
    pub n_eff: f64,
    /// Mode angular frequency (the solve wavelength), rad/s.
    pub omega: f64,
    pub mode_area: f64,
    pub mode_volume: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub cooperativity: f64,
    pub q_breakdown: crate::loss::QBreakdown,
}

/// Knobs shared by `evaluate_geometry` and the sweep.
#[derive(Debug, Clone)]
pub struct CqedOptions {
    /// Height of the atom above the waveguide top surface, m.
    pub atom_height: f64,
    /// Cross-section grid spacing for the mode solve, m.
    pub grid_spacing: f64,
    /// Absorption-limited quality factor; `Q_CEILING` disables the channel.
    pub q_absorption: f64,
}

impl Default for CqedOptions {
    fn default() -> Self {
        Self { atom_height: 100e-9, grid_spacing: 40e-9, q_absorption: Q_CEILING }
    }
}

/// Key for the memoized mode solves: (W, H, R, lambda) in integer picometers
/// plus the grid spacing. One solve covers both polarizations.
type SolveKey = (i64, i64, i64, i64, i64, i64);

fn solve_key(geometry: &RingGeometry, wavelength: f64, spacing: f64) -> SolveKey {
    let pm = |v: f64| (v * 1e12).round() as i64;
    // the straight-length slot doubles as the ring/racetrack discriminator:
    // the racetrack is solved as a straight guide
    let shape_slot = match geometry.shape {
        crate::domain::ResonatorShape::Ring => -1,
        crate::domain::ResonatorShape::Racetrack => pm(geometry.straight_length),
    };
    (
        pm(geometry.width),
        pm(geometry.height),
        pm(geometry.radius),
        shape_slot,
        pm(wavelength),
        pm(spacing),
    )
}

type SolveEntry = (Vec<ModeField>, Grid2D);

fn solve_cache() -> &'static Mutex<HashMap<SolveKey, SolveEntry>> {
    static CACHE: OnceLock<Mutex<HashMap<SolveKey, SolveEntry>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Bound on cached solves; a coarse solve is ~100 kB so this caps the cache
/// near 1 GB for full-resolution sweeps.
const SOLVE_CACHE_CAP: usize = 8192;

/// Solves (or recalls) the guided modes of `geometry` at `wavelength`.
pub fn cached_solve(
    geometry: &RingGeometry,
    wavelength: f64,
    spacing: f64,
) -> Result<(Vec<ModeField>, Grid2D)> {
    let key = solve_key(geometry, wavelength, spacing);
    if let Some(hit) = solve_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let window = default_window(geometry, spacing)?;
    let eps = crate::domain::build_epsilon_map_averaged(geometry, &window, wavelength)?;
    let options = SolveOptions {
        bend_radius: match geometry.shape {
            crate::domain::ResonatorShape::Ring => Some(geometry.radius),
            crate::domain::ResonatorShape::Racetrack => None,
        },
        circumference: geometry.circumference(),
        cladding_index: adjacent_cladding_index(geometry),
    };
    let modes = solve_modes(&eps, wavelength, 2, options)?;
    let mut guard = solve_cache().lock().unwrap();
    if guard.len() >= SOLVE_CACHE_CAP {
        guard.clear();
    }
    guard.insert(key, (modes.clone(), eps.clone()));
    Ok((modes, eps))
}

/// Full chain for one geometry: mode solve -> Q_ss + Q_bend (+ absorption)
/// -> kappa -> A_m, V_m, g -> C, for the requested polarization. The atom
/// sits at (rho, z) = (R, atom_height) on a lattice antinode.
pub fn evaluate_geometry(
    geometry: &RingGeometry,
    species: &AtomSpecies,
    roughness: &RoughnessSpec,
    polarization: Polarization,
    options: &CqedOptions,
) -> Result<CqedReport> {
    let wavelength = species.lambda_d1;
    let (modes, eps) = cached_solve(geometry, wavelength, options.grid_spacing)?;
    let mode = modes
        .into_iter()
        .find(|m| m.polarization == polarization)
        .ok_or_else(|| Error::Cutoff { cladding: adjacent_cladding_index(geometry) })?;

    let indices = SurroundingIndices::from_geometry(geometry);
    let q_ss = q_surface_scattering(&mode, geometry, roughness, &indices)?;
    let q_bend = bend_loss_q(
        &mode,
        geometry.radius,
        geometry.radius + 0.5 * geometry.width,
        geometry.stack.superstrate_index,
    )?;
    let q_breakdown = QBreakdown::combined(
        q_ss.q_ss_top,
        q_ss.q_ss_bottom,
        q_ss.q_ss_sidewalls,
        q_bend,
        options.q_absorption,
    )?;
    let kappa = fit_kappa_to_q(mode.omega, q_breakdown.q_total)?;
    if kappa == 0.0 {
        return Err(Error::InvalidInput(
            "total Q above ceiling: cooperativity unbounded with kappa_c = 0".into(),
        ));
    }

    let atom_position = (geometry.radius, options.atom_height);
    let area = mode_area(&mode, &eps, atom_position)?;
    let volume = mode_volume(area, geometry);
    let g = coupling_g(volume, species, mode.omega)?;
    let c = cooperativity(g, kappa, species.gamma)?;
    Ok(CqedReport {
        geometry: geometry.clone(),
        polarization,
        atom_position,
        n_eff: mode.n_eff,
        omega: mode.omega,
        mode_area: area,
        mode_volume: volume,
        g,
        kappa,
        gamma: species.gamma,
        cooperativity: c,
        q_breakdown,
    })
}

/// Inclusive linear range start..=stop at the given step.
pub fn sweep_axis(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 || stop < start {
        return Err(Error::InvalidInput("sweep axis needs step > 0 and stop >= start".into()));
    }
    let n = ((stop - start) / step + 0.5).floor() as usize + 1;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// Sweep specification: the cartesian product of the three axes.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub widths: Vec<f64>,
    pub heights: Vec<f64>,
    pub radii: Vec<f64>,
    pub roughness: RoughnessSpec,
    pub species: AtomSpecies,
    pub polarization: Polarization,
    pub options: CqedOptions,
    /// Membrane template; the core cross-section is substituted per point.
    pub stack: crate::domain::MembraneStack,
    pub core_index: f64,
}

impl SweepConfig {
    /// Default axes: W in [0.6, 1.4] um step 50 nm, H in [0.2, 0.45] um step
    /// 10 nm, R in [8, 24] um step 2 um.
    pub fn new(
        roughness: RoughnessSpec,
        species: AtomSpecies,
        polarization: Polarization,
    ) -> Self {
        Self {
            widths: sweep_axis(0.6e-6, 1.4e-6, 50e-9).unwrap(),
            heights: sweep_axis(0.2e-6, 0.45e-6, 10e-9).unwrap(),
            radii: sweep_axis(8e-6, 24e-6, 2e-6).unwrap(),
            roughness,
            species,
            polarization,
            options: CqedOptions::default(),
            stack: crate::domain::MembraneStack::suspended_membrane(2.0e-6, 0.55e-6),
            core_index: 2.0,
        }
    }
}

/// One sweep point: either a report or the reason the point was excluded
/// (no guided mode, atom clipping the dielectric, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    pub outcome: std::result::Result<CqedReport, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    /// Points in deterministic (W, H, R) row-major key order.
    pub points: Vec<SweepPoint>,
    /// Index into `points` of the highest-cooperativity report.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_report(&self) -> Option<&CqedReport> {
        self.best.and_then(|i| self.points[i].outcome.as_ref().ok())
    }
}

/// Evaluates the full (W, H, R) grid in parallel. The argmax is taken in key
/// order with strict improvement, so ties and parallel scheduling cannot
/// change the winner.
pub fn geometry_sweep(config: &SweepConfig) -> Result<SweepResult> {
    let mut keys = Vec::new();
    for &w in &config.widths {
        for &h in &config.heights {
            for &r in &config.radii {
                keys.push((w, h, r));
            }
        }
    }
    if keys.is_empty() {
        return Err(Error::InvalidInput("sweep ranges are empty".into()));
    }
    let points: Vec<SweepPoint> = keys
        .par_iter()
        .map(|&(w, h, r)| {
            let outcome = RingGeometry::ring(r, w, h, config.core_index, config.stack.clone())
                .and_then(|geometry| {
                    evaluate_geometry(
                        &geometry,
                        &config.species,
                        &config.roughness,
                        config.polarization,
                        &config.options,
                    )
                })
                .map_err(|e| e.to_string());
            SweepPoint { width: w, height: h, radius: r, outcome }
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, point) in points.iter().enumerate() {
        if let Ok(report) = &point.outcome {
            if best
                .map(|b| {
                    report.cooperativity
                        > points[b].outcome.as_ref().map(|r| r.cooperativity).unwrap_or(f64::MIN)
                })
                .unwrap_or(true)
            {
                best = Some(i);
            }
        }
    }
    Ok(SweepResult { points, best })
}
