//! Physical constants, atom species data, resonator geometry, and dielectric
//! map construction shared by every other module.
//!
//! Unit convention: SI everywhere inside the library, angular frequencies
//! internally, ordinary frequencies (omega / 2 pi) at I/O boundaries.
//! Coordinates: z = 0 at the waveguide top surface, rho measured from the
//! ring axis so the waveguide center line sits at rho = R.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 2.997_924_58e8;
/// Atomic unit of polarizability expressed in C^2 m^2 / J.
pub const ATOMIC_POLARIZABILITY_UNIT: f64 = 1.648_78e-41;
/// Cesium-133 mass, kg.
pub const CESIUM_MASS: f64 = 2.206_946_8e-25;

/// Converts a polarizability from atomic units to SI (C^2 m^2 / J).
pub fn convert_polarizability(alpha_au: f64) -> f64 {
    alpha_au * ATOMIC_POLARIZABILITY_UNIT
}

/// Scalar/vector/tensor dynamic polarizabilities at one wavelength, in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizabilitySet {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl PolarizabilitySet {
    /// S-state ground-level set: the tensor part is identically zero.
    pub fn ground_state(alpha0: f64, alpha1: f64) -> Self {
        Self { alpha0, alpha1, alpha2: 0.0 }
    }
}

/// Wavelength key in integer picometers so the map lookup is exact.
fn wavelength_key(wavelength: f64) -> u64 {
    (wavelength * 1e12).round() as u64
}

/// Atom species data required by the trap and cQED calculations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSpecies {
    pub name: String,
    /// Angular decay rate, rad/s.
    pub gamma: f64,
    /// D1 transition wavelength, m.
    pub lambda_d1: f64,
    /// Total angular momentum quantum number of the trapped ground state.
    pub f_quantum: f64,
    /// Atom mass, kg.
    pub mass: f64,
    /// Casimir-Polder coefficient over h, Hz um^4.
    pub c4_over_h: f64,
    /// Casimir-Polder effective wavelength, m.
    pub lambda_bar: f64,
    polarizabilities: BTreeMap<u64, PolarizabilitySet>,
}

impl AtomSpecies {
    /// Cesium with the ground-state polarizabilities at the two magic trap
    /// wavelengths 935.3 nm and 793.5 nm.
    pub fn cesium() -> Self {
        let mut polarizabilities = BTreeMap::new();
        // alpha1 at 935.3 nm carries one extra digit so the stored pair
        // reproduces the tabulated ratio alpha1/alpha0 = -0.5382.
        polarizabilities.insert(
            wavelength_key(935.3e-9),
            PolarizabilitySet::ground_state(3033.0, -1632.4),
        );
        polarizabilities.insert(
            wavelength_key(793.5e-9),
            PolarizabilitySet::ground_state(-2111.0, -643.0),
        );
        Self {
            name: "cesium".into(),
            gamma: 2.0 * PI * 4.6e6,
            lambda_d1: 894.0e-9,
            f_quantum: 4.0,
            mass: CESIUM_MASS,
            c4_over_h: 267.0,
            lambda_bar: 136e-9,
            polarizabilities,
        }
    }

    pub fn polarizability(&self, wavelength: f64) -> Result<PolarizabilitySet> {
        self.polarizabilities
            .get(&wavelength_key(wavelength))
            .copied()
            .ok_or(Error::MissingPolarizability { wavelength_nm: wavelength * 1e9 })
    }

    pub fn set_polarizability(&mut self, wavelength: f64, set: PolarizabilitySet) {
        self.polarizabilities.insert(wavelength_key(wavelength), set);
    }

    /// Casimir-Polder C4 coefficient in J m^4.
    pub fn c4(&self) -> f64 {
        self.c4_over_h * 2.0 * PI * HBAR * 1e-24
    }
}

/// Ring or racetrack outline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonatorShape {
    Ring,
    Racetrack,
}

/// One membrane layer: thickness and refractive index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness: f64,
    pub index: f64,
}

/// Membrane layers beneath the waveguide core, ordered bottom-to-top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneStack {
    pub layers: Vec<Layer>,
    pub superstrate_index: f64,
}

impl MembraneStack {
    pub fn new(layers: Vec<Layer>, superstrate_index: f64) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            if layer.thickness <= 0.0 {
                return Err(Error::InvalidInput(format!("stack layer {i} thickness must be > 0")));
            }
            if layer.index < 1.0 {
                return Err(Error::InvalidInput(format!("stack layer {i} index must be >= 1")));
            }
        }
        if superstrate_index < 1.0 {
            return Err(Error::InvalidInput("superstrate index must be >= 1".into()));
        }
        Ok(Self { layers, superstrate_index })
    }

    /// Suspended SiO2 + Si3N4 membrane of the fabricated platform.
    pub fn suspended_membrane(oxide_thickness: f64, nitride_thickness: f64) -> Self {
        Self {
            layers: vec![
                Layer { thickness: nitride_thickness, index: 2.0 },
                Layer { thickness: oxide_thickness, index: 1.45 },
            ],
            superstrate_index: 1.0,
        }
    }

    /// Index of the medium at height `z_below` (>= 0) beneath the waveguide
    /// bottom surface. Below the last layer the membrane is suspended in vacuum.
    pub fn index_below(&self, z_below: f64) -> f64 {
        let mut depth = 0.0;
        for layer in self.layers.iter().rev() {
            depth += layer.thickness;
            if z_below <= depth {
                return layer.index;
            }
        }
        1.0
    }

    /// Largest refractive index among the media surrounding the core.
    pub fn max_cladding_index(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.index)
            .chain(std::iter::once(self.superstrate_index))
            .fold(1.0, f64::max)
    }
}

/// Waveguide cross-section plus ring (or racetrack) layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    pub shape: ResonatorShape,
    /// Bend radius R, m.
    pub radius: f64,
    /// Straight segment length per side (racetrack only), m.
    pub straight_length: f64,
    /// Waveguide width W, m.
    pub width: f64,
    /// Waveguide height H, m.
    pub height: f64,
    /// Core refractive index at the operating wavelength.
    pub core_index: f64,
    pub stack: MembraneStack,
}

impl RingGeometry {
    pub fn ring(radius: f64, width: f64, height: f64, core_index: f64, stack: MembraneStack) -> Result<Self> {
        Self::new(ResonatorShape::Ring, radius, 0.0, width, height, core_index, stack)
    }

    pub fn racetrack(
        radius: f64,
        straight_length: f64,
        width: f64,
        height: f64,
        core_index: f64,
        stack: MembraneStack,
    ) -> Result<Self> {
        Self::new(ResonatorShape::Racetrack, radius, straight_length, width, height, core_index, stack)
    }

    fn new(
        shape: ResonatorShape,
        radius: f64,
        straight_length: f64,
        width: f64,
        height: f64,
        core_index: f64,
        stack: MembraneStack,
    ) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::InvalidInput("radius must be > 0".into()));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidInput("width and height must be > 0".into()));
        }
        if core_index < 1.0 {
            return Err(Error::InvalidInput("core index must be >= 1".into()));
        }
        if shape == ResonatorShape::Ring && straight_length != 0.0 {
            return Err(Error::InvalidInput("ring has no straight segment".into()));
        }
        if straight_length < 0.0 {
            return Err(Error::InvalidInput("straight length must be >= 0".into()));
        }
        Ok(Self { shape, radius, straight_length, width, height, core_index, stack })
    }

    /// Resonator circumference L.
    pub fn circumference(&self) -> f64 {
        2.0 * PI * self.radius + 2.0 * self.straight_length
    }

    /// Fig. 1 baseline: (W, H, R) = (1.1, 0.29, 16) um on the suspended membrane.
    pub fn paper_baseline() -> Self {
        RingGeometry::ring(
            16e-6,
            1.1e-6,
            0.29e-6,
            2.0,
            MembraneStack::suspended_membrane(2.0e-6, 0.55e-6),
        )
        .expect("baseline geometry is valid")
    }

    /// SEM geometry of the fabricated devices: (W, H, R) = (0.95, 0.36, 16) um.
    pub fn fabricated() -> Self {
        RingGeometry::ring(
            16e-6,
            0.95e-6,
            0.36e-6,
            2.0,
            MembraneStack::suspended_membrane(2.0e-6, 0.55e-6),
        )
        .expect("fabricated geometry is valid")
    }
}

/// Uniformly-sampled 2-D scalar field over a (rho, z) cross-section window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub rho: Vec<f64>,
    pub z: Vec<f64>,
    /// Row-major: values[i_rho * z.len() + i_z].
    pub values: Vec<f64>,
}

impl Grid2D {
    pub fn zeros(rho: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        check_uniform(&rho, "rho")?;
        check_uniform(&z, "z")?;
        let values = vec![0.0; rho.len() * z.len()];
        Ok(Self { rho, z, values })
    }

    /// Window [rho_min, rho_max] x [z_min, z_max] at the requested spacing.
    /// The realized spacing is the nearest value that divides the span evenly.
    pub fn window(rho_min: f64, rho_max: f64, z_min: f64, z_max: f64, spacing: f64) -> Result<Self> {
        if spacing <= 0.0 || rho_max <= rho_min || z_max <= z_min {
            return Err(Error::InvalidInput("degenerate grid window".into()));
        }
        let n_rho = ((rho_max - rho_min) / spacing).round() as usize + 1;
        let n_z = ((z_max - z_min) / spacing).round() as usize + 1;
        let rho = linspace(rho_min, rho_max, n_rho);
        let z = linspace(z_min, z_max, n_z);
        Grid2D::zeros(rho, z)
    }

    #[inline]
    pub fn n_rho(&self) -> usize {
        self.rho.len()
    }

    #[inline]
    pub fn n_z(&self) -> usize {
        self.z.len()
    }

    #[inline]
    pub fn at(&self, i_rho: usize, i_z: usize) -> f64 {
        self.values[i_rho * self.z.len() + i_z]
    }

    #[inline]
    pub fn set(&mut self, i_rho: usize, i_z: usize, v: f64) {
        self.values[i_rho * self.z.len() + i_z] = v;
    }

    pub fn d_rho(&self) -> f64 {
        self.rho[1] - self.rho[0]
    }

    pub fn d_z(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    /// Same axes, all-zero values.
    pub fn like(&self) -> Self {
        Self { rho: self.rho.clone(), z: self.z.clone(), values: vec![0.0; self.values.len()] }
    }

    /// Bilinear interpolation; errors outside the window.
    pub fn interpolate(&self, rho: f64, z: f64) -> Result<f64> {
        let (ir, fr) = locate(&self.rho, rho)?;
        let (iz, fz) = locate(&self.z, z)?;
        let nz = self.z.len();
        let v00 = self.values[ir * nz + iz];
        let v01 = self.values[ir * nz + iz + 1];
        let v10 = self.values[(ir + 1) * nz + iz];
        let v11 = self.values[(ir + 1) * nz + iz + 1];
        Ok(v00 * (1.0 - fr) * (1.0 - fz) + v01 * (1.0 - fr) * fz + v10 * fr * (1.0 - fz) + v11 * fr * fz)
    }

    /// Trapezoidal integral over the window.
    pub fn integrate(&self) -> f64 {
        let (nr, nz) = (self.rho.len(), self.z.len());
        let mut total = 0.0;
        for i in 0..nr {
            let wr = if i == 0 || i == nr - 1 { 0.5 } else { 1.0 };
            for j in 0..nz {
                let wz = if j == 0 || j == nz - 1 { 0.5 } else { 1.0 };
                total += wr * wz * self.values[i * nz + j];
            }
        }
        total * self.d_rho() * self.d_z()
    }
}

fn locate(axis: &[f64], x: f64) -> Result<(usize, f64)> {
    let n = axis.len();
    if x < axis[0] || x > axis[n - 1] {
        return Err(Error::InvalidInput(format!(
            "coordinate {x:.4e} outside grid range [{:.4e}, {:.4e}]",
            axis[0],
            axis[n - 1]
        )));
    }
    let h = axis[1] - axis[0];
    let idx = (((x - axis[0]) / h).floor() as usize).min(n - 2);
    Ok((idx, ((x - axis[0]) - idx as f64 * h) / h))
}

fn check_uniform(axis: &[f64], name: &str) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::InvalidInput(format!("{name} axis needs >= 2 samples")));
    }
    let h = axis[1] - axis[0];
    if h <= 0.0 {
        return Err(Error::InvalidInput(format!("{name} axis must be strictly increasing")));
    }
    for w in axis.windows(2) {
        let d = w[1] - w[0];
        if d <= 0.0 || (d - h).abs() > 1e-6 * h.abs() {
            return Err(Error::InvalidInput(format!("{name} axis must be uniformly spaced")));
        }
    }
    Ok(())
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + i as f64 * h).collect()
}

/// Required free margin between the core and each open window edge.
pub const EPSILON_MAP_MARGIN: f64 = 1.0e-6;

/// Builds the relative-permittivity map eps(rho, z) = n^2 for `geometry` on
/// `grid`. Cell values are sampled at the cell center (the grid node); no
/// sub-cell averaging is applied.
///
/// The waveguide core occupies [rho_w - W/2, rho_w + W/2] x [-H, 0] with
/// rho_w = R; membrane layers extend laterally across the whole window.
pub fn build_epsilon_map(geometry: &RingGeometry, grid: &Grid2D, _wavelength: f64) -> Result<Grid2D> {
    let rho_w = geometry.radius;
    let half_w = geometry.width / 2.0;
    let h = geometry.height;
    let rho_lo = grid.rho[0];
    let rho_hi = *grid.rho.last().unwrap();
    let z_hi = *grid.z.last().unwrap();
    let m = EPSILON_MAP_MARGIN * (1.0 - 1e-12);
    if rho_w - half_w - rho_lo < m || rho_hi - (rho_w + half_w) < m || z_hi < m {
        return Err(Error::GridSizing(format!(
            "window [{:.3} um, {:.3} um] x [.., {:.3} um] must contain the core \
             [{:.3} um, {:.3} um] x [-{:.3} um, 0] plus {:.1} um margin on each open side",
            rho_lo * 1e6,
            rho_hi * 1e6,
            z_hi * 1e6,
            (rho_w - half_w) * 1e6,
            (rho_w + half_w) * 1e6,
            h * 1e6,
            EPSILON_MAP_MARGIN * 1e6
        )));
    }

    let mut eps = grid.like();
    for (i, &rho) in grid.rho.iter().enumerate() {
        let lateral = (rho - rho_w).abs() <= half_w;
        for (j, &z) in grid.z.iter().enumerate() {
            let n = if z > 0.0 {
                geometry.stack.superstrate_index
            } else if z >= -h {
                if lateral {
                    geometry.core_index
                } else {
                    geometry.stack.superstrate_index
                }
            } else {
                geometry.stack.index_below(-h - z)
            };
            eps.set(i, j, n * n);
        }
    }
    Ok(eps)
}

/// Like [`build_epsilon_map`] but with exact sub-cell area averaging
/// (permittivity smoothing extension): each cell holds the area-weighted mean
/// of eps over the cell rectangle. All material regions are axis-aligned
/// rectangles, so the overlap fractions are exact. This makes eps — and
/// therefore n_eff — vary smoothly under sub-cell geometry changes and
/// restores second-order grid convergence at material interfaces.
pub fn build_epsilon_map_averaged(
    geometry: &RingGeometry,
    grid: &Grid2D,
    wavelength: f64,
) -> Result<Grid2D> {
    // reuse the window-size validation
    build_epsilon_map(geometry, grid, wavelength)?;
    let rho_w = geometry.radius;
    let half_w = geometry.width / 2.0;
    let h_core = geometry.height;
    let n_sup = geometry.stack.superstrate_index;
    let eps_sup = n_sup * n_sup;
    let eps_core = geometry.core_index * geometry.core_index;

    // z breakpoints (descending) and the eps on each side of the core band
    let mut z_edges = vec![f64::INFINITY, 0.0, -h_core];
    let mut band_eps_out = vec![eps_sup, eps_sup];
    let mut band_eps_in = vec![eps_sup, eps_core];
    let mut depth = h_core;
    for layer in geometry.stack.layers.iter().rev() {
        depth += layer.thickness;
        z_edges.push(-depth);
        band_eps_out.push(layer.index * layer.index);
        band_eps_in.push(layer.index * layer.index);
    }
    z_edges.push(f64::NEG_INFINITY);
    band_eps_out.push(1.0);
    band_eps_in.push(1.0);

    let (hx, hz) = (grid.d_rho(), grid.d_z());
    let mut eps = grid.like();
    for (i, &rho) in grid.rho.iter().enumerate() {
        let (x_lo, x_hi) = (rho - hx / 2.0, rho + hx / 2.0);
        let in_frac = ((x_hi.min(rho_w + half_w) - x_lo.max(rho_w - half_w)) / hx).clamp(0.0, 1.0);
        for (j, &z) in grid.z.iter().enumerate() {
            let (z_lo, z_hi) = (z - hz / 2.0, z + hz / 2.0);
            let mut acc = 0.0;
            for b in 0..band_eps_out.len() {
                let overlap = (z_hi.min(z_edges[b]) - z_lo.max(z_edges[b + 1])).max(0.0);
                if overlap > 0.0 {
                    let band = in_frac * band_eps_in[b] + (1.0 - in_frac) * band_eps_out[b];
                    acc += overlap / hz * band;
                }
            }
            eps.set(i, j, acc);
        }
    }
    Ok(eps)
}

/// Empty-geometry permittivity map (vacuum everywhere); used by tests.
pub fn vacuum_epsilon_map(grid: &Grid2D) -> Grid2D {
    let mut eps = grid.like();
    eps.values.iter_mut().for_each(|v| *v = 1.0);
    eps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarizability_conversion_matches_direct_multiplication() {
        assert_eq!(convert_polarizability(0.0), 0.0);
        assert!((convert_polarizability(3033.0) - 5.0007e-38).abs() < 5e-42);
        assert!((convert_polarizability(-2111.0) - (-3.4806e-38)).abs() < 5e-42);
    }

    #[test]
    fn polarizability_conversion_is_linear() {
        let (a, b) = (3033.0, -643.0);
        let lhs = convert_polarizability(a + b);
        let rhs = convert_polarizability(a) + convert_polarizability(b);
        assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn cesium_table_ratios() {
        let cs = AtomSpecies::cesium();
        let red = cs.polarizability(935.3e-9).unwrap();
        let blue = cs.polarizability(793.5e-9).unwrap();
        assert!((red.alpha1 / red.alpha0 - (-0.5382)).abs() < 1e-4);
        assert!((blue.alpha1 / blue.alpha0 - 0.3046).abs() < 1e-4);
        assert_eq!(red.alpha2, 0.0);
        assert_eq!(blue.alpha2, 0.0);
    }

    #[test]
    fn missing_polarizability_is_an_error() {
        let cs = AtomSpecies::cesium();
        assert!(matches!(
            cs.polarizability(1064e-9),
            Err(Error::MissingPolarizability { .. })
        ));
    }

    #[test]
    fn vacuum_window_is_all_ones() {
        let grid = Grid2D::window(12e-6, 20e-6, -2e-6, 2e-6, 50e-9).unwrap();
        let eps = vacuum_epsilon_map(&grid);
        assert!(eps.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn epsilon_map_region_membership() {
        let geom = RingGeometry::ring(
            16e-6,
            1.1e-6,
            0.29e-6,
            2.0,
            MembraneStack::suspended_membrane(2.0e-6, 0.55e-6),
        )
        .unwrap();
        let grid = Grid2D::window(13e-6, 19e-6, -1.5e-6, 1.5e-6, 10e-9).unwrap();
        let eps = build_epsilon_map(&geom, &grid, 894e-9).unwrap();
        // core center reads n_core^2
        assert_eq!(eps.interpolate(16e-6, -0.145e-6).unwrap(), 4.0);
        // 50 nm above the surface reads vacuum
        assert_eq!(eps.interpolate(16e-6, 50e-9).unwrap(), 1.0);
        // oxide directly beneath the core bottom
        assert_eq!(eps.interpolate(16e-6, -0.29e-6 - 0.2e-6).unwrap(), 1.45 * 1.45);
    }

    #[test]
    fn epsilon_map_rebuild_is_bit_identical() {
        let geom = RingGeometry::paper_baseline();
        let grid = Grid2D::window(13e-6, 19e-6, -1.5e-6, 1.5e-6, 20e-9).unwrap();
        let a = build_epsilon_map(&geom, &grid, 894e-9).unwrap();
        let b = build_epsilon_map(&geom, &grid, 894e-9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn epsilon_map_shifts_by_one_cell_under_half_cell_offset() {
        let geom = RingGeometry::paper_baseline();
        let h = 20e-9;
        let grid_a = Grid2D::window(13e-6, 19e-6, -1.5e-6, 1.5e-6, h).unwrap();
        // shift the window by half a cell: boundary cell centers cross the
        // core edge, so the map moves by exactly one column
        let grid_b = Grid2D::window(13e-6 + h / 2.0, 19e-6 + h / 2.0, -1.5e-6, 1.5e-6, h).unwrap();
        let a = build_epsilon_map(&geom, &grid_a, 894e-9).unwrap();
        let b = build_epsilon_map(&geom, &grid_b, 894e-9).unwrap();
        let nz = grid_a.n_z();
        // column i of the shifted map equals column i of the original wherever
        // the half-cell offset moves the sampled region boundary left by one
        let mut diffs = 0;
        for i in 1..grid_a.n_rho() {
            for j in 0..nz {
                if a.at(i, j) != b.at(i, j) && a.at(i, j) != b.at(i - 1, j) {
                    diffs += 1;
                }
            }
        }
        assert_eq!(diffs, 0);
    }

    #[test]
    fn undersized_window_is_rejected_with_sizing_diagnostic() {
        let geom = RingGeometry::paper_baseline();
        let grid = Grid2D::window(15e-6, 17e-6, -1.0e-6, 1.0e-6, 20e-9).unwrap();
        match build_epsilon_map(&geom, &grid, 894e-9) {
            Err(Error::GridSizing(msg)) => assert!(msg.contains("margin")),
            other => panic!("expected sizing error, got {other:?}"),
        }
    }

    #[test]
    fn circumference() {
        let ring = RingGeometry::paper_baseline();
        assert!((ring.circumference() - 2.0 * PI * 16e-6).abs() < 1e-18);
        let rt = RingGeometry::racetrack(
            10e-6,
            20e-6,
            1.0e-6,
            0.3e-6,
            2.0,
            MembraneStack::suspended_membrane(2e-6, 0.55e-6),
        )
        .unwrap();
        assert!((rt.circumference() - (2.0 * PI * 10e-6 + 40e-6)).abs() < 1e-18);
    }
}
