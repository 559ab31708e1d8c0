//! Trap-potential composition and analysis: two-color evanescent traps,
//! top-illumination standing-wave traps, tweezer + lattice sums, minimum /
//! saddle / depth / frequency extraction, and power-ratio and transport scans.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::domain::{
    convert_polarizability, AtomSpecies, Grid2D, Layer, RingGeometry, C_LIGHT, EPS0, HBAR, K_B,
};
use crate::error::{Error, Result};
use crate::modes::{mode_diagnostics, ModeField};
use crate::multilayer::{reflection_coefficient, standing_wave};
use crate::potential::PotentialGrid;
use crate::resonator::{DriveResponse, ResonatorParams};
use crate::stark::{casimir_polder, scalar_shift};

/// A scan point is "open" when no interior minimum deeper than this exists.
pub const OPEN_TRAP_MIN_DEPTH: f64 = K_B * 1e-6;

/// Vertical extent of the composed near-field trap window above the surface.
pub const TRAP_WINDOW_TOP: f64 = 0.75e-6;

/// Sampling of the analysis grid the solved modes are resampled onto before
/// trap composition: fine enough that minima, saddles, and watershed passes
/// are located well below the mode-solver spacing.
const ANALYSIS_SPACING: f64 = 5e-9;

/// Target finite-difference step of the local quadratic model. On grids
/// finer than this the stencil strides several cells so the curvature is
/// probed at the scale the underlying solve actually resolves.
const HESSIAN_STEP: f64 = 15e-9;

/// One guided color of the two-color trap: a solved mode, its permittivity
/// map, and the steady-state responses of the drive tones exciting it.
#[derive(Debug, Clone)]
pub struct ColorDrive<'a> {
    pub mode: &'a ModeField,
    pub eps_map: &'a Grid2D,
    pub responses: Vec<DriveResponse>,
}

/// Longitudinal lattice constant of the standing wave formed by a guided
/// mode: d = pi / beta = lambda / (2 n_eff).
pub fn lattice_constant(mode: &ModeField) -> f64 {
    PI / mode.k
}

/// Input power that produces the target energy build-up at the given tone
/// frequency: the exact inverse of the steady-state build-up relation.
pub fn required_power(target_buildup: f64, params: &ResonatorParams, omega: f64) -> Result<f64> {
    if !(target_buildup > 0.0) {
        return Err(Error::InvalidInput("target build-up must be positive".into()));
    }
    if params.kappa_c <= 0.0 {
        return Err(Error::InvalidInput("required power needs kappa_c > 0".into()));
    }
    let alpha = num_complex::Complex64::new(0.5 * params.kappa(), omega - params.omega0);
    let beta2 = params.beta * params.beta;
    let denom = (alpha * alpha + beta2).norm_sqr();
    Ok(target_buildup * HBAR * params.omega0 * denom
        / (params.kappa_c * (alpha.norm_sqr() + beta2)))
}

fn wavelength_of(mode: &ModeField) -> f64 {
    2.0 * PI * C_LIGHT / mode.omega
}

/// Bilinear resampling of one field component with the free-space evanescent
/// decay exp(-kappa z) divided out first: the interpolant then acts on a
/// slowly varying residual, so the exponential tail is reproduced without
/// sampling ripple at the new spacing.
fn resample_component(src: &Grid2D, kappa: f64, rho: &[f64], z: &[f64]) -> Result<Grid2D> {
    let nz = src.z.len();
    let mut weighted = src.clone();
    for i in 0..src.rho.len() {
        for j in 0..nz {
            weighted.values[i * nz + j] *= (kappa * src.z[j]).exp();
        }
    }
    let mut out = Grid2D::zeros(rho.to_vec(), z.to_vec())?;
    for (i, &r) in rho.iter().enumerate() {
        for (j, &zz) in z.iter().enumerate() {
            out.set(i, j, weighted.interpolate(r, zz)? * (-kappa * zz).exp());
        }
    }
    Ok(out)
}

/// Resamples a solved mode and its permittivity map onto the analysis axes.
fn resample_mode(mode: &ModeField, eps: &Grid2D, rho: &[f64], z: &[f64]) -> Result<(ModeField, Grid2D)> {
    let k0 = mode.omega / C_LIGHT;
    let kappa = (mode.k * mode.k - k0 * k0).max(0.0).sqrt();
    let out = ModeField {
        e_rho: resample_component(&mode.e_rho, kappa, rho, z)?,
        e_phi_im: resample_component(&mode.e_phi_im, kappa, rho, z)?,
        e_z: resample_component(&mode.e_z, kappa, rho, z)?,
        ..mode.clone()
    };
    let eps_out = resample_component(eps, 0.0, rho, z)?;
    Ok((out, eps_out))
}

/// Uniform axis from `lo` to `hi` (inclusive) at the analysis spacing.
fn analysis_axis(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / ANALYSIS_SPACING).round() as usize;
    (0..=n).map(|i| lo + i as f64 * ANALYSIS_SPACING).collect()
}

/// Sums the scalar light shifts of one color's tones over the full mode
/// cross-section, with an optional common corrugation-phase offset.
fn color_shift(
    color: &ColorDrive,
    species: &AtomSpecies,
    l_samples: &[f64],
    phase_offset: f64,
    term: &str,
) -> Result<PotentialGrid> {
    if color.responses.is_empty() {
        return Err(Error::InvalidInput("each color needs at least one drive tone".into()));
    }
    let pol = species.polarizability(wavelength_of(color.mode))?;
    let diagnostics = mode_diagnostics(color.mode, color.eps_map)?;
    let mut total: Option<PotentialGrid> = None;
    for response in &color.responses {
        let mut shifted = *response;
        shifted.xi_pm += phase_offset;
        let u = scalar_shift(color.mode, &diagnostics, &shifted, &pol, l_samples)?;
        total = Some(match total {
            None => u,
            Some(t) => t.add(&u)?,
        });
    }
    let mut out = total.expect("at least one tone");
    out.terms = vec![term.to_string()];
    Ok(out)
}

/// Extracts the sub-grid with rho within the waveguide footprint and
/// 0 < z <= TRAP_WINDOW_TOP, preserving values, masks, and provenance.
fn slice_trap_window(grid: &PotentialGrid, geometry: &RingGeometry) -> Result<PotentialGrid> {
    let half = 0.5 * geometry.width + 1e-12;
    let keep_i: Vec<usize> = (0..grid.rho.len())
        .filter(|&i| (grid.rho[i] - geometry.radius).abs() <= half)
        .collect();
    let keep_k: Vec<usize> = (0..grid.z.len())
        .filter(|&k| grid.z[k] > 1e-12 && grid.z[k] <= TRAP_WINDOW_TOP)
        .collect();
    if keep_i.len() < 5 || keep_k.len() < 5 {
        return Err(Error::InvalidInput(
            "mode grid too coarse to slice a trap window above the waveguide".into(),
        ));
    }
    let rho: Vec<f64> = keep_i.iter().map(|&i| grid.rho[i]).collect();
    let z: Vec<f64> = keep_k.iter().map(|&k| grid.z[k]).collect();
    let mut out = PotentialGrid::zeros(rho, grid.l.clone(), z, "window");
    out.terms = grid.terms.clone();
    for (ii, &i) in keep_i.iter().enumerate() {
        for j in 0..grid.l.len() {
            for (kk, &k) in keep_k.iter().enumerate() {
                let src = grid.idx(i, j, k);
                let dst = out.idx(ii, j, kk);
                out.values[dst] = grid.values[src];
                out.mask[dst] = grid.mask[src];
            }
        }
    }
    Ok(out)
}

/// Composes the two-color evanescent trap above the waveguide: attractive
/// red lattice, repulsive blue sheet, plus the Casimir-Polder surface term.
/// The red corrugation is re-phased so that l = 0 is a lattice site.
pub fn two_color_trap(
    red: &ColorDrive,
    blue: &ColorDrive,
    species: &AtomSpecies,
    geometry: &RingGeometry,
    l_samples: &[f64],
) -> Result<PotentialGrid> {
    if l_samples.is_empty() {
        return Err(Error::InvalidInput("two_color_trap needs longitudinal samples".into()));
    }
    if red.responses.is_empty() || blue.responses.is_empty() {
        return Err(Error::InvalidInput("each color needs at least one drive tone".into()));
    }
    if red.mode.e_rho.rho != blue.mode.e_rho.rho || red.mode.e_rho.z != blue.mode.e_rho.z {
        return Err(Error::GridMismatch("red and blue modes solved on different grids".into()));
    }
    // resample both solved colors onto a shared fine analysis window above
    // the waveguide footprint
    let rho_axis = analysis_axis(geometry.radius - 0.5 * geometry.width, geometry.radius + 0.5 * geometry.width);
    let z_axis = analysis_axis(ANALYSIS_SPACING, TRAP_WINDOW_TOP);
    let (mode_r, eps_r) = resample_mode(red.mode, red.eps_map, &rho_axis, &z_axis)?;
    let (mode_b, eps_b) = resample_mode(blue.mode, blue.eps_map, &rho_axis, &z_axis)?;
    let red = ColorDrive { mode: &mode_r, eps_map: &eps_r, responses: red.responses.clone() };
    let blue = ColorDrive { mode: &mode_b, eps_map: &eps_b, responses: blue.responses.clone() };
    // put a lattice antinode (sin -> cos) at l = 0 by shifting the free
    // corrugation phase of the red color; the port sign multiplies the
    // corrugation, so a backward drive needs the opposite quadrature
    let phase = red.responses[0].sign * FRAC_PI_2 - red.responses[0].xi_pm;
    let u_red = color_shift(&red, species, l_samples, phase, "evanescent_red")?;
    let u_blue = color_shift(&blue, species, l_samples, 0.0, "evanescent_blue")?;
    let full = u_red.add(&u_blue)?;
    let window = slice_trap_window(&full, geometry)?;
    let cp = casimir_polder(geometry, species, &window.rho, &window.l, &window.z)?;
    window.add(&cp)
}

/// Exact pointwise composition of evanescent, tweezer, and surface terms.
pub fn tweezer_plus_lattice(
    ev: &PotentialGrid,
    tw: &PotentialGrid,
    cp: &PotentialGrid,
) -> Result<PotentialGrid> {
    PotentialGrid::sum(&[ev, tw, cp])
}

/// A focused Gaussian beam at normal incidence from above.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBeam {
    pub wavelength: f64,
    /// 1/e^2 intensity radius, m.
    pub waist: f64,
    pub power: f64,
}

impl GaussianBeam {
    fn validate(&self) -> Result<()> {
        if !(self.waist >= 0.5 * self.wavelength) {
            return Err(Error::InvalidInput(
                "beam waist must be at least half the wavelength".into(),
            ));
        }
        if self.power < 0.0 {
            return Err(Error::InvalidInput("beam power must be non-negative".into()));
        }
        Ok(())
    }
}

/// Optical potential of a top-illuminating beam reflected off the waveguide
/// + membrane stack: planar standing wave times a transverse Gaussian
/// envelope centered at `center` = (rho0, l0). No surface term.
fn beam_potential(
    geometry: &RingGeometry,
    species: &AtomSpecies,
    beam: &GaussianBeam,
    center: (f64, f64),
    rho_samples: &[f64],
    l_samples: &[f64],
    z_samples: &[f64],
) -> Result<PotentialGrid> {
    beam.validate()?;
    let pol = species.polarizability(beam.wavelength)?;
    let alpha0 = convert_polarizability(pol.alpha0);
    // the waveguide acts as an extra planar layer on top of the membrane
    let mut layers = vec![Layer { thickness: geometry.height, index: geometry.core_index }];
    layers.extend(geometry.stack.layers.iter().rev().cloned());
    let n_in = geometry.stack.superstrate_index;
    let r = reflection_coefficient(&layers, n_in, 1.0, beam.wavelength)?;
    let k = 2.0 * PI * n_in / beam.wavelength;
    let peak_intensity = 2.0 * beam.power / (PI * beam.waist * beam.waist);
    let field_sq = peak_intensity / (2.0 * EPS0 * C_LIGHT);
    let inv_w2 = 2.0 / (beam.waist * beam.waist);

    let mut out =
        PotentialGrid::zeros(rho_samples.to_vec(), l_samples.to_vec(), z_samples.to_vec(), "tweezer");
    for (i, &rho) in rho_samples.iter().enumerate() {
        let dr = rho - center.0;
        for (j, &l) in l_samples.iter().enumerate() {
            let dl = l - center.1;
            let envelope = (-(dr * dr + dl * dl) * inv_w2).exp();
            for (kz, &z) in z_samples.iter().enumerate() {
                let s = standing_wave(r, k, z);
                out.set(i, j, kz, -alpha0 * field_sq * envelope * s);
            }
        }
    }
    Ok(out)
}

/// Top-illumination trap: standing-wave tweezer potential plus the
/// Casimir-Polder surface term over the waveguide footprint.
pub fn top_illumination_potential(
    geometry: &RingGeometry,
    species: &AtomSpecies,
    beam: &GaussianBeam,
    center: (f64, f64),
    rho_samples: &[f64],
    l_samples: &[f64],
    z_samples: &[f64],
) -> Result<PotentialGrid> {
    let tw = beam_potential(geometry, species, beam, center, rho_samples, l_samples, z_samples)?;
    let cp = casimir_polder(geometry, species, rho_samples, l_samples, z_samples)?;
    tw.add(&cp)
}

/// Analysis of one composed trap potential.
#[derive(Debug, Clone)]
pub struct TrapReport {
    /// Trap minimum (rho_t, l_t, z_t), m, after quadratic refinement.
    pub center: (f64, f64, f64),
    /// Barrier height from the minimum to the lowest escape, J.
    pub depth: f64,
    /// Lowest-barrier pass (rho_s, z_s), m.
    pub saddle: (f64, f64),
    /// (omega_rho', omega_l, omega_z'), rad/s, along the principal axes.
    pub frequencies: [f64; 3],
    /// Principal axes as unit vectors in (rho, l, z), same order.
    pub principal_axes: [[f64; 3]; 3],
    /// Rotation of the rho' axis out of the rho direction, rad.
    pub tilt_angle: f64,
}

/// Either a bound trap or an open potential with its escape direction.
#[derive(Debug, Clone)]
pub enum TrapAnalysis {
    Trapped(TrapReport),
    Open { escape: String },
}

impl TrapAnalysis {
    pub fn report(&self) -> Option<&TrapReport> {
        match self {
            TrapAnalysis::Trapped(r) => Some(r),
            TrapAnalysis::Open { .. } => None,
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, TrapAnalysis::Open { .. })
    }
}

struct GridDims {
    ni: usize,
    nl: usize,
    nz: usize,
}

impl GridDims {
    fn of(u: &PotentialGrid) -> Self {
        Self { ni: u.rho.len(), nl: u.l.len(), nz: u.z.len() }
    }

    fn split(&self, n: usize) -> (usize, usize, usize) {
        (n / (self.nl * self.nz), (n / self.nz) % self.nl, n % self.nz)
    }

    fn join(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nl + j) * self.nz + k
    }

    fn neighbors(&self, n: usize, out: &mut Vec<usize>) {
        out.clear();
        let (i, j, k) = self.split(n);
        if i > 0 {
            out.push(self.join(i - 1, j, k));
        }
        if i + 1 < self.ni {
            out.push(self.join(i + 1, j, k));
        }
        if j > 0 {
            out.push(self.join(i, j - 1, k));
        }
        if j + 1 < self.nl {
            out.push(self.join(i, j + 1, k));
        }
        if k > 0 {
            out.push(self.join(i, j, k - 1));
        }
        if k + 1 < self.nz {
            out.push(self.join(i, j, k + 1));
        }
    }
}

/// Escape nodes: radial or vertical grid boundaries (the modeled window
/// ends) and nodes adjacent to the masked surface-divergence region. The
/// longitudinal boundaries do not count: the lattice continues there.
fn escape_reason(u: &PotentialGrid, dims: &GridDims, node: usize) -> Option<&'static str> {
    let (i, j, k) = dims.split(node);
    if dims.nz > 1 && k == 0 {
        return Some("downward (-z) through the lower grid boundary");
    }
    if dims.nz > 1 && k + 1 == dims.nz {
        return Some("upward (+z) through the upper grid boundary");
    }
    if dims.ni > 1 && (i == 0 || i + 1 == dims.ni) {
        return Some("radially through the grid boundary");
    }
    let mut nb = Vec::with_capacity(6);
    dims.neighbors(node, &mut nb);
    let _ = j;
    if nb.iter().any(|&m| u.mask[m]) {
        return Some("into the masked surface region");
    }
    None
}

#[derive(PartialEq)]
struct HeapLevel(f64);

impl Eq for HeapLevel {}
impl PartialOrd for HeapLevel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapLevel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct EscapeSearch {
    /// Lowest level at which the minimum's basin connects to an escape.
    level: f64,
    /// Node realizing the barrier maximum along the optimal path.
    saddle: usize,
}

/// Widest-path (minimax) search from `start` to the escape set: returns the
/// lowest potential level that connects the start to any escape node, and
/// the pass (saddle) node on the optimal path. `extra_escape` extends the
/// escape set (e.g. "any node deeper than the local minimum" for per-basin
/// barriers).
fn minimax_escape(
    u: &PotentialGrid,
    dims: &GridDims,
    start: usize,
    extra_escape: &dyn Fn(usize) -> bool,
) -> Option<EscapeSearch> {
    let n = u.values.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut path_max = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(HeapLevel, usize)>> = BinaryHeap::new();
    dist[start] = u.values[start];
    path_max[start] = start;
    heap.push(Reverse((HeapLevel(dist[start]), start)));
    let mut nb = Vec::with_capacity(6);
    while let Some(Reverse((HeapLevel(level), node))) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if escape_reason(u, dims, node).is_some() || extra_escape(node) {
            return Some(EscapeSearch { level, saddle: path_max[node] });
        }
        dims.neighbors(node, &mut nb);
        for idx in 0..nb.len() {
            let m = nb[idx];
            if done[m] || u.mask[m] {
                continue;
            }
            let cand = level.max(u.values[m]);
            if cand < dist[m] {
                dist[m] = cand;
                path_max[m] = if u.values[m] >= level { m } else { path_max[node] };
                heap.push(Reverse((HeapLevel(cand), m)));
            }
        }
    }
    None
}

fn axis_spacing(axis: &[f64]) -> Result<f64> {
    if axis.len() < 2 {
        return Ok(0.0);
    }
    let h = axis[1] - axis[0];
    for w in axis.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-6 * h.abs() {
            return Err(Error::InvalidInput("trap analysis needs uniform grid axes".into()));
        }
    }
    Ok(h)
}

/// Local quadratic model of the potential around a grid node: gradient and
/// Hessian by central differences, Richardson-refined where the stencil
/// allows a double-step.
struct QuadraticModel {
    gradient: Vector3<f64>,
    hessian: Matrix3<f64>,
    value: f64,
    /// Per-axis grid spacing; 0 marks a singleton (flat) axis.
    steps: [f64; 3],
}

fn quadratic_model(u: &PotentialGrid, dims: &GridDims, node: usize) -> Result<QuadraticModel> {
    let (i, j, k) = dims.split(node);
    let idx = [i, j, k];
    let lens = [dims.ni, dims.nl, dims.nz];
    let grid_steps = [axis_spacing(&u.rho)?, axis_spacing(&u.l)?, axis_spacing(&u.z)?];
    // margin available on each axis (0 = singleton/flat); on sub-solver-scale
    // grids the stencil strides toward HESSIAN_STEP so curvature is probed
    // at the resolved scale
    let mut margin = [0usize; 3];
    let mut stride = [1usize; 3];
    let mut steps = grid_steps;
    for a in 0..3 {
        if lens[a] > 1 {
            margin[a] = idx[a].min(lens[a] - 1 - idx[a]);
            if margin[a] == 0 {
                return Err(Error::InvalidInput(
                    "trap minimum sits on the grid boundary".into(),
                ));
            }
            stride[a] = ((HESSIAN_STEP / grid_steps[a]).round() as usize).clamp(1, margin[a]);
            steps[a] = stride[a] as f64 * grid_steps[a];
        }
    }
    let sample = |d: [i64; 3]| -> f64 {
        let ii = (i as i64 + d[0]) as usize;
        let jj = (j as i64 + d[1]) as usize;
        let kk = (k as i64 + d[2]) as usize;
        u.at(ii, jj, kk)
    };
    let f0 = u.values[node];

    let mut gradient = Vector3::zeros();
    let mut hessian = Matrix3::zeros();
    let axis_delta = |a: usize, m: i64| -> [i64; 3] {
        let mut d = [0i64; 3];
        d[a] = m;
        d
    };
    for a in 0..3 {
        if margin[a] == 0 {
            // flat axis: dummy unit curvature keeps the 3x3 system regular;
            // reported as a zero frequency
            hessian[(a, a)] = 1.0;
            continue;
        }
        let h = steps[a];
        let s = stride[a] as i64;
        let g1 = (sample(axis_delta(a, s)) - sample(axis_delta(a, -s))) / (2.0 * h);
        let d1 = (sample(axis_delta(a, s)) - 2.0 * f0 + sample(axis_delta(a, -s))) / (h * h);
        if margin[a] >= 2 * stride[a] {
            let g2 = (sample(axis_delta(a, 2 * s)) - sample(axis_delta(a, -2 * s))) / (4.0 * h);
            let d2 = (sample(axis_delta(a, 2 * s)) - 2.0 * f0 + sample(axis_delta(a, -2 * s)))
                / (4.0 * h * h);
            gradient[a] = (4.0 * g1 - g2) / 3.0;
            hessian[(a, a)] = (4.0 * d1 - d2) / 3.0;
        } else {
            gradient[a] = g1;
            hessian[(a, a)] = d1;
        }
    }
    for a in 0..3 {
        for b in (a + 1)..3 {
            if margin[a] == 0 || margin[b] == 0 {
                continue;
            }
            let cross = |m: i64| -> f64 {
                let (sa, sb) = (m * stride[a] as i64, m * stride[b] as i64);
                let mut dpp = [0i64; 3];
                dpp[a] = sa;
                dpp[b] = sb;
                let mut dpm = [0i64; 3];
                dpm[a] = sa;
                dpm[b] = -sb;
                let mut dmp = [0i64; 3];
                dmp[a] = -sa;
                dmp[b] = sb;
                let mut dmm = [0i64; 3];
                dmm[a] = -sa;
                dmm[b] = -sb;
                (sample(dpp) + sample(dmm) - sample(dpm) - sample(dmp))
                    / (4.0 * (m as f64 * steps[a]) * (m as f64 * steps[b]))
            };
            let c1 = cross(1);
            let value = if margin[a] >= 2 * stride[a] && margin[b] >= 2 * stride[b] {
                (4.0 * c1 - cross(2)) / 3.0
            } else {
                c1
            };
            hessian[(a, b)] = value;
            hessian[(b, a)] = value;
        }
    }
    let mut steps_out = steps;
    for a in 0..3 {
        if margin[a] == 0 {
            steps_out[a] = 0.0;
        }
    }
    Ok(QuadraticModel { gradient, hessian, value: f0, steps: steps_out })
}

impl QuadraticModel {
    /// Newton offset toward the interpolated minimum, clamped to half a grid
    /// cell per axis.
    fn refine(&self) -> (Vector3<f64>, f64) {
        let delta = self
            .hessian
            .lu()
            .solve(&(-self.gradient))
            .unwrap_or_else(Vector3::zeros);
        let mut clamped = delta;
        for a in 0..3 {
            let limit = 0.5 * self.steps[a].abs();
            clamped[a] = clamped[a].clamp(-limit, limit);
        }
        let value = self.value
            + self.gradient.dot(&clamped)
            + 0.5 * (self.hessian * clamped).dot(&clamped);
        (clamped, value)
    }
}

/// Iterated Newton refinement toward the nearest stationary point: re-models
/// the potential at each step's nearest grid node until the step settles
/// within the node's cell. Works for minima and saddle passes alike; falls
/// back to the raw node value when the stencil runs out of room.
fn refine_stationary(
    u: &PotentialGrid,
    dims: &GridDims,
    start: usize,
) -> (usize, Vector3<f64>, f64) {
    let nearest = |axis: &[f64], x: f64| -> usize {
        if axis.len() == 1 {
            return 0;
        }
        let h = axis[1] - axis[0];
        (((x - axis[0]) / h).round() as isize).clamp(0, axis.len() as isize - 1) as usize
    };
    let mut node = start;
    let mut best = match quadratic_model(u, dims, node) {
        Ok(m) => m.refine(),
        Err(_) => return (node, Vector3::zeros(), u.values[node]),
    };
    for _ in 0..60 {
        let (i, j, k) = dims.split(node);
        let p = [u.rho[i] + best.0[0], u.l[j] + best.0[1], u.z[k] + best.0[2]];
        let next = dims.join(nearest(&u.rho, p[0]), nearest(&u.l, p[1]), nearest(&u.z, p[2]));
        if next == node || u.mask[next] {
            break;
        }
        match quadratic_model(u, dims, next) {
            Ok(m) => {
                node = next;
                best = m.refine();
            }
            Err(_) => break,
        }
    }
    (node, best.0, best.1)
}

/// Assigns Hessian eigenpairs to the (rho', l, z') axes by dominant
/// component: the l-dominant pair first, then rho among the remainder.
fn assign_axes(
    eigenvalues: &Vector3<f64>,
    eigenvectors: &Matrix3<f64>,
) -> [(f64, Vector3<f64>); 3] {
    let mut remaining: Vec<usize> = vec![0, 1, 2];
    let take = |remaining: &mut Vec<usize>, component: usize| -> usize {
        let pos = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| {
                eigenvectors[(component, *a.1)]
                    .abs()
                    .total_cmp(&eigenvectors[(component, *b.1)].abs())
            })
            .map(|(p, _)| p)
            .expect("non-empty");
        remaining.remove(pos)
    };
    let l_pair = take(&mut remaining, 1);
    let rho_pair = take(&mut remaining, 0);
    let z_pair = remaining[0];
    let vec_of = |c: usize| -> Vector3<f64> {
        let mut v = eigenvectors.column(c).into_owned();
        // sign convention: largest component positive
        let lead = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        if v[lead] < 0.0 {
            v = -v;
        }
        v
    };
    [
        (eigenvalues[rho_pair], vec_of(rho_pair)),
        (eigenvalues[l_pair], vec_of(l_pair)),
        (eigenvalues[z_pair], vec_of(z_pair)),
    ]
}

fn analyze_from(
    u: &PotentialGrid,
    species: &AtomSpecies,
    start: usize,
    local_basin: bool,
) -> Result<TrapAnalysis> {
    let dims = GridDims::of(u);
    for (len, name) in [(dims.ni, "rho"), (dims.nz, "z")] {
        if len < 5 {
            return Err(Error::InvalidInput(format!(
                "trap analysis needs at least 5 {name} samples"
            )));
        }
    }
    if dims.nl > 1 && dims.nl < 5 {
        return Err(Error::InvalidInput(
            "trap analysis needs either 1 or >= 5 longitudinal samples".into(),
        ));
    }
    if u.mask[start] {
        return Err(Error::InvalidInput("trap search started on a masked sample".into()));
    }
    if let Some(reason) = escape_reason(u, &dims, start) {
        return Ok(TrapAnalysis::Open { escape: reason.to_string() });
    }
    let floor = u.values[start];
    let extra: Box<dyn Fn(usize) -> bool> = if local_basin {
        Box::new(move |n: usize| u.values[n] < floor)
    } else {
        Box::new(|_| false)
    };
    let escape = minimax_escape(u, &dims, start, extra.as_ref()).ok_or_else(|| {
        Error::InvalidInput("no escape boundary reachable from the trap minimum".into())
    })?;

    let (center_node, delta, refined_value) = refine_stationary(u, &dims, start);
    let model = quadratic_model(u, &dims, center_node)?;
    // refine the pass as well: iterated Newton steps walk the nearly flat
    // ridge between basin and escape to its stationary point
    let (saddle_node, saddle_delta, saddle_value) = refine_stationary(u, &dims, escape.saddle);
    let depth = saddle_value - refined_value;
    if depth <= OPEN_TRAP_MIN_DEPTH {
        let reason = escape_reason(u, &dims, escape.saddle)
            .unwrap_or("over the lowest saddle")
            .to_string();
        return Ok(TrapAnalysis::Open { escape: reason });
    }

    let eigen = nalgebra::SymmetricEigen::new(model.hessian);
    let assigned = assign_axes(&eigen.eigenvalues, &eigen.eigenvectors);
    let mut frequencies = [0.0; 3];
    let mut axes = [[0.0; 3]; 3];
    for (slot, (lambda, vec)) in assigned.iter().enumerate() {
        axes[slot] = [vec[0], vec[1], vec[2]];
        // slots are ordered (rho', l, z'), matching the grid axes; singleton
        // axes carry a dummy unit curvature and report zero frequency
        if model.steps[slot] == 0.0 {
            frequencies[slot] = 0.0;
            continue;
        }
        if *lambda <= 0.0 {
            return Ok(TrapAnalysis::Open {
                escape: "non-positive curvature at the located minimum".to_string(),
            });
        }
        frequencies[slot] = (lambda / species.mass).sqrt();
    }
    let tilt = {
        let v = assigned[0].1;
        let mut angle = v[2].atan2(v[0]);
        if angle > FRAC_PI_2 {
            angle -= PI;
        }
        if angle <= -FRAC_PI_2 {
            angle += PI;
        }
        angle
    };

    let (i, j, k) = dims.split(center_node);
    let center = (u.rho[i] + delta[0], u.l[j] + delta[1], u.z[k] + delta[2]);
    let (si, _, sk) = dims.split(saddle_node);
    Ok(TrapAnalysis::Trapped(TrapReport {
        center,
        depth,
        saddle: (u.rho[si] + saddle_delta[0], u.z[sk] + saddle_delta[2]),
        frequencies,
        principal_axes: axes,
        tilt_angle: tilt,
    }))
}

/// Locates the global minimum of the potential and reports the trap: depth
/// to the lowest escape (surface or window boundary), saddle position,
/// quadratically refined center, and Hessian frequencies / principal axes.
pub fn analyze_trap(u: &PotentialGrid, species: &AtomSpecies) -> Result<TrapAnalysis> {
    let dims = GridDims::of(u);
    let mut nb = Vec::with_capacity(6);
    // Deepest interior local minimum. Escape-adjacent nodes (grid edges and
    // the rim of the masked surface region) cannot host a trap: anything
    // there drains straight out of the window.
    let mut start: Option<usize> = None;
    for n in 0..u.values.len() {
        if u.mask[n] || escape_reason(u, &dims, n).is_some() {
            continue;
        }
        dims.neighbors(n, &mut nb);
        if nb.iter().any(|&m| !u.mask[m] && u.values[m] < u.values[n]) {
            continue;
        }
        if start.map_or(true, |s| u.values[n] < u.values[s]) {
            start = Some(n);
        }
    }
    // Fall back to the raw argmin so the open-trap report names the
    // direction the potential drains.
    let start = match start {
        Some(s) => s,
        None => u
            .values
            .iter()
            .enumerate()
            .filter(|(n, _)| !u.mask[*n])
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(n, _)| n)
            .ok_or_else(|| Error::InvalidInput("potential grid has no unmasked samples".into()))?,
    };
    analyze_from(u, species, start, false)
}

/// Steepest-descent walk over grid neighbors from the node nearest `seed`
/// down to its local minimum.
fn descend(u: &PotentialGrid, dims: &GridDims, seed: (f64, f64, f64)) -> Result<usize> {
    let nearest = |axis: &[f64], x: f64| -> usize {
        axis.iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(n, _)| n)
            .expect("non-empty axis")
    };
    let mut node = dims.join(nearest(&u.rho, seed.0), nearest(&u.l, seed.1), nearest(&u.z, seed.2));
    if u.mask[node] {
        return Err(Error::InvalidInput("trap search seed lies in the masked region".into()));
    }
    let mut nb = Vec::with_capacity(6);
    loop {
        dims.neighbors(node, &mut nb);
        let best = nb
            .iter()
            .copied()
            .filter(|&m| !u.mask[m])
            .min_by(|a, b| u.values[*a].total_cmp(&u.values[*b]));
        match best {
            Some(m) if u.values[m] < u.values[node] => node = m,
            _ => return Ok(node),
        }
    }
}

/// Analyzes the local trap basin nearest to `seed`: descends to the local
/// minimum and reports depth as the lowest barrier out of that basin
/// (to the surface, a window boundary, or any deeper neighboring site).
pub fn analyze_trap_at(
    u: &PotentialGrid,
    species: &AtomSpecies,
    seed: (f64, f64, f64),
) -> Result<TrapAnalysis> {
    let dims = GridDims::of(u);
    let node = descend(u, &dims, seed)?;
    analyze_from(u, species, node, true)
}

/// One point of the power-ratio scan.
#[derive(Debug, Clone, Copy)]
pub struct RatioScanPoint {
    /// I_red / I_blue build-up ratio.
    pub ratio: f64,
    /// Vertical trap position, m (NaN when open).
    pub z_t: f64,
    /// Radial offset rho_t - rho_w, m (NaN when open).
    pub rho_offset: f64,
    /// Trap depth, J (0 when open).
    pub depth: f64,
    pub open: bool,
}

/// Scans the red/blue build-up ratio at fixed blue tones: for each ratio the
/// red responses are rescaled so that the total red build-up equals
/// ratio x (total blue build-up), and the trap is re-analyzed.
pub fn power_ratio_scan(
    red: &ColorDrive,
    blue: &ColorDrive,
    species: &AtomSpecies,
    geometry: &RingGeometry,
    l_samples: &[f64],
    ratios: &[f64],
) -> Result<Vec<RatioScanPoint>> {
    if ratios.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidInput("build-up ratios must be non-negative".into()));
    }
    let i_red: f64 = red.responses.iter().map(|r| r.i_buildup).sum();
    let i_blue: f64 = blue.responses.iter().map(|r| r.i_buildup).sum();
    if i_red <= 0.0 || i_blue <= 0.0 {
        return Err(Error::InvalidInput("ratio scan needs non-zero base build-ups".into()));
    }
    ratios
        .par_iter()
        .map(|&ratio| {
            let scale = ratio * i_blue / i_red;
            let responses: Vec<DriveResponse> = red
                .responses
                .iter()
                .map(|r| {
                    let mut s = *r;
                    s.i_buildup *= scale;
                    s.i_tilde *= scale;
                    s
                })
                .collect();
            let scaled = ColorDrive { mode: red.mode, eps_map: red.eps_map, responses };
            let u = two_color_trap(&scaled, blue, species, geometry, l_samples)?;
            let point = match analyze_trap(&u, species)? {
                TrapAnalysis::Trapped(rep) => RatioScanPoint {
                    ratio,
                    z_t: rep.center.2,
                    rho_offset: rep.center.0 - geometry.radius,
                    depth: rep.depth,
                    open: false,
                },
                TrapAnalysis::Open { .. } => RatioScanPoint {
                    ratio,
                    z_t: f64::NAN,
                    rho_offset: f64::NAN,
                    depth: 0.0,
                    open: true,
                },
            };
            Ok(point)
        })
        .collect()
}

/// One step of a tweezer transport schedule.
#[derive(Debug, Clone, Copy)]
pub struct TransportStep {
    pub power: f64,
    pub l_center: f64,
}

/// Analysis of the tracked site at one schedule step.
#[derive(Debug, Clone)]
pub struct TransportPoint {
    pub step: TransportStep,
    pub report: TrapReport,
}

/// Outcome of a transport schedule: the completed trajectory, plus the
/// failing step if the tracked minimum vanished or jumped.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub points: Vec<TransportPoint>,
    pub failure: Option<(usize, String)>,
}

impl TransportResult {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Tracks the continuously connected local minimum of evanescent + surface
/// potential plus a moving tweezer across the schedule. `max_step_motion`
/// bounds how far the tracked minimum may move per step (schedule
/// granularity precondition); exceeding it or losing the minimum records a
/// failure at the offending step.
pub fn transport_sequence(
    ev_cp: &PotentialGrid,
    geometry: &RingGeometry,
    species: &AtomSpecies,
    beam: &GaussianBeam,
    schedule: &[TransportStep],
    max_step_motion: f64,
) -> Result<TransportResult> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("transport schedule is empty".into()));
    }
    if !(max_step_motion > 0.0) {
        return Err(Error::InvalidInput("max_step_motion must be positive".into()));
    }
    let mut points = Vec::with_capacity(schedule.len());
    let mut tracked: Option<(f64, f64, f64)> = None;
    for (idx, step) in schedule.iter().enumerate() {
        let stepped = GaussianBeam { power: step.power, ..*beam };
        let tw = beam_potential(
            geometry,
            species,
            &stepped,
            (geometry.radius, step.l_center),
            &ev_cp.rho,
            &ev_cp.l,
            &ev_cp.z,
        )?;
        let total = ev_cp.add(&tw)?;
        let seed = tracked.unwrap_or((geometry.radius, step.l_center, 120e-9));
        let analysis = analyze_trap_at(&total, species, seed)?;
        match analysis {
            TrapAnalysis::Open { escape } => {
                return Ok(TransportResult {
                    points,
                    failure: Some((idx, format!("tracked site opened: escape {escape}"))),
                });
            }
            TrapAnalysis::Trapped(report) => {
                if let Some(prev) = tracked {
                    let motion = ((report.center.0 - prev.0).powi(2)
                        + (report.center.1 - prev.1).powi(2)
                        + (report.center.2 - prev.2).powi(2))
                    .sqrt();
                    if motion > max_step_motion {
                        return Ok(TransportResult {
                            points,
                            failure: Some((
                                idx,
                                format!(
                                    "tracked minimum jumped {:.0} nm in one step",
                                    motion * 1e9
                                ),
                            )),
                        });
                    }
                }
                tracked = Some(report.center);
                points.push(TransportPoint { step: *step, report });
            }
        }
    }
    Ok(TransportResult { points, failure: None })
}
