//! Surface-scattering-limited quality factor via the volume-current method,
//! combination of loss channels, and the kappa = omega0/Q bridge.

use crate::domain::{RingGeometry, C_LIGHT, EPS0, HBAR};
use crate::error::{Error, Result};
use crate::modes::ModeField;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quality factors above this are reported as "above ceiling" rather than as
/// non-finite numbers.
pub const Q_CEILING: f64 = 1e12;

/// Gaussian-correlated surface roughness of the four waveguide surfaces:
/// rms amplitude sigma and correlation length L for the sidewalls (pm),
/// top, and bottom. Valid in the sigma, L << lambda regime.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoughnessSpec {
    pub sigma_pm: f64,
    pub l_pm: f64,
    pub sigma_t: f64,
    pub l_t: f64,
    pub sigma_b: f64,
    pub l_b: f64,
}

impl RoughnessSpec {
    /// Measured roughness of the fabricated devices, in meters.
    pub fn fabricated() -> Self {
        Self { sigma_pm: 2e-9, l_pm: 60e-9, sigma_t: 1.4e-9, l_t: 73e-9, sigma_b: 1.6e-9, l_b: 84e-9 }
    }

    /// Projected roughness with improved processing.
    pub fn improved() -> Self {
        Self { sigma_pm: 1.4e-9, l_pm: 39e-9, sigma_t: 0.1e-9, l_t: 10e-9, sigma_b: 0.1e-9, l_b: 10e-9 }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.sigma_pm, self.l_pm, self.sigma_t, self.l_t, self.sigma_b, self.l_b];
        if all.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput("roughness parameters must be non-negative".into()));
        }
        Ok(())
    }
}

/// Relative permittivities of the media just outside each surface. Defaults
/// come from the geometry's stack (vacuum above and beside, oxide below).
#[derive(Debug, Clone, Copy)]
pub struct SurroundingIndices {
    pub top: f64,
    pub bottom: f64,
    pub side: f64,
}

impl SurroundingIndices {
    pub fn from_geometry(geometry: &RingGeometry) -> Self {
        Self {
            top: geometry.stack.superstrate_index,
            bottom: geometry.stack.index_below(0.0),
            side: geometry.stack.superstrate_index,
        }
    }
}

/// Per-channel quality factors, each clamped at `Q_CEILING`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QBreakdown {
    pub q_ss_top: f64,
    pub q_ss_bottom: f64,
    pub q_ss_sidewalls: f64,
    pub q_bend: f64,
    pub q_absorption: f64,
    pub q_total: f64,
}

impl QBreakdown {
    /// Harmonic combination of the stored channels into `q_total`.
    pub fn combined(
        q_ss_top: f64,
        q_ss_bottom: f64,
        q_ss_sidewalls: f64,
        q_bend: f64,
        q_absorption: f64,
    ) -> Result<Self> {
        let q_total = combine_q(&[q_ss_top, q_ss_bottom, q_ss_sidewalls, q_bend, q_absorption])?;
        Ok(Self { q_ss_top, q_ss_bottom, q_ss_sidewalls, q_bend, q_absorption, q_total })
    }

    /// Surface-scattering-only quality factor.
    pub fn q_ss(&self) -> Result<f64> {
        combine_q(&[self.q_ss_top, self.q_ss_bottom, self.q_ss_sidewalls])
    }

    pub fn above_ceiling(&self) -> bool {
        self.q_total >= Q_CEILING
    }
}

/// Harmonic combination 1/Q = sum 1/Q_i, clamped at `Q_CEILING`. Channels at
/// or above the ceiling (including infinity) contribute no loss.
pub fn combine_q(parts: &[f64]) -> Result<f64> {
    let mut inv = 0.0;
    for &q in parts {
        if !(q > 0.0) {
            return Err(Error::InvalidInput(format!("quality factors must be positive, got {q}")));
        }
        if q < Q_CEILING {
            inv += 1.0 / q;
        }
    }
    Ok(if inv > 0.0 { (1.0 / inv).min(Q_CEILING) } else { Q_CEILING })
}

/// kappa = omega0 / Q; a Q at or above the ceiling maps to kappa = 0.
pub fn fit_kappa_to_q(omega0: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput("quality factor must be positive".into()));
    }
    Ok(if q >= Q_CEILING { 0.0 } else { omega0 / q })
}

/// Field components sampled on the outer side of one surface.
struct SurfaceField {
    e_rho: Vec<f64>,
    e_phi: Vec<f64>,
    e_z: Vec<f64>,
    /// Coordinate along the surface (rho for top/bottom, z for sidewalls).
    coord: Vec<f64>,
}

/// How to turn grid samples near an interface into outer-side surface fields.
#[doc(hidden)]
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSampling {
    /// Distance outside the surface at which fields are sampled, m.
    pub offset: f64,
    /// Scale the normal component by eps_core/eps_out (dielectric boundary
    /// condition applied to the sampled value).
    pub scale_normal: bool,
}

impl Default for SurfaceSampling {
    fn default() -> Self {
        // At an interface node of the permittivity-averaged discretization the
        // eigenvector already carries the boundary-layer value of the field in
        // the transition region where the scatterers sit, so the interface row
        // is interpolated directly with no extra boundary-condition scaling.
        Self { offset: 0.0, scale_normal: false }
    }
}

/// Samples the mode on a horizontal surface (z = const) across the core
/// width, from the medium with permittivity `eps_out`. `outward` is +1 for
/// the top surface, -1 for the bottom.
fn horizontal_surface_field(
    mode: &ModeField,
    geometry: &RingGeometry,
    z_surface: f64,
    outward: f64,
    eps_out: f64,
    sampling: SurfaceSampling,
) -> Result<SurfaceField> {
    let eps_core = geometry.core_index * geometry.core_index;
    let scale = if sampling.scale_normal { eps_core / eps_out } else { 1.0 };
    let z_sample = z_surface + outward * sampling.offset;
    let rho_lo = geometry.radius - 0.5 * geometry.width;
    let rho_hi = geometry.radius + 0.5 * geometry.width;
    let mut out =
        SurfaceField { e_rho: Vec::new(), e_phi: Vec::new(), e_z: Vec::new(), coord: Vec::new() };
    for &rho in &mode.e_rho.rho {
        if rho < rho_lo || rho > rho_hi {
            continue;
        }
        out.e_rho.push(mode.e_rho.interpolate(rho, z_sample)?);
        out.e_phi.push(mode.e_phi_im.interpolate(rho, z_sample)?);
        out.e_z.push(mode.e_z.interpolate(rho, z_sample)? * scale);
        out.coord.push(rho);
    }
    if out.coord.len() < 2 {
        return Err(Error::GridSizing("mode grid does not resolve the core width".into()));
    }
    Ok(out)
}

/// Samples the mode on a vertical sidewall (rho = const) across the core
/// height. `outward` is +1 for the outer wall, -1 for the inner.
fn vertical_surface_field(
    mode: &ModeField,
    geometry: &RingGeometry,
    rho_surface: f64,
    outward: f64,
    eps_out: f64,
    sampling: SurfaceSampling,
) -> Result<SurfaceField> {
    let eps_core = geometry.core_index * geometry.core_index;
    let scale = if sampling.scale_normal { eps_core / eps_out } else { 1.0 };
    let rho_sample = rho_surface + outward * sampling.offset;
    let mut out =
        SurfaceField { e_rho: Vec::new(), e_phi: Vec::new(), e_z: Vec::new(), coord: Vec::new() };
    for &z in &mode.e_rho.z {
        if z < -geometry.height || z > 0.0 {
            continue;
        }
        out.e_rho.push(mode.e_rho.interpolate(rho_sample, z)? * scale);
        out.e_phi.push(mode.e_phi_im.interpolate(rho_sample, z)?);
        out.e_z.push(mode.e_z.interpolate(rho_sample, z)?);
        out.coord.push(z);
    }
    if out.coord.len() < 2 {
        return Err(Error::GridSizing("mode grid does not resolve the core height".into()));
    }
    Ok(out)
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Per-component rho-weighted surface average on a horizontal surface:
/// (1/RW) int rho |E_alpha(rho, z_i)|^2 drho.
fn horizontal_average(field: &SurfaceField, geometry: &RingGeometry) -> [f64; 3] {
    let norm = 1.0 / (geometry.radius * geometry.width);
    let weigh = |e: &[f64]| -> f64 {
        let ys: Vec<f64> = e.iter().zip(field.coord.iter()).map(|(&v, &rho)| rho * v * v).collect();
        norm * trapezoid(&field.coord, &ys)
    };
    [weigh(&field.e_rho), weigh(&field.e_phi), weigh(&field.e_z)]
}

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-based initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const ETA_GEOMETRIC: f64 = 4.0 / 3.0;

/// Per-component Fourier-weighted sidewall average:
/// (1/(eta H^2)) int_{-1}^{1} |E~_alpha(k~)|^2 eta_alpha(k~) dk~, with
/// E~(k~) = int E_alpha(z) exp(-i k k~ z) dz over the wall height.
fn sidewall_average(field: &SurfaceField, geometry: &RingGeometry, k: f64) -> [f64; 3] {
    let (nodes, weights) = gauss_legendre(64);
    let h = geometry.height;
    let mut out = [0.0; 3];
    for (ni, &kt) in nodes.iter().enumerate() {
        let mut spectra = [0.0; 3];
        for (ci, e) in [&field.e_rho, &field.e_phi, &field.e_z].into_iter().enumerate() {
            let re: Vec<f64> = e
                .iter()
                .zip(field.coord.iter())
                .map(|(&v, &z)| v * (k * kt * z).cos())
                .collect();
            let im: Vec<f64> = e
                .iter()
                .zip(field.coord.iter())
                .map(|(&v, &z)| -v * (k * kt * z).sin())
                .collect();
            let re_int = trapezoid(&field.coord, &re);
            let im_int = trapezoid(&field.coord, &im);
            spectra[ci] = re_int * re_int + im_int * im_int;
        }
        let eta_transverse = 0.5 * (1.0 + kt * kt);
        let eta_z = 1.0 - kt * kt;
        out[0] += weights[ni] * spectra[0] * eta_transverse;
        out[1] += weights[ni] * spectra[1] * eta_transverse;
        out[2] += weights[ni] * spectra[2] * eta_z;
    }
    for v in out.iter_mut() {
        *v /= ETA_GEOMETRIC * h * h;
    }
    out
}

/// Surface-scattering quality factors of the four waveguide surfaces via the
/// volume-current method, for a normalized mode. Interface fields are taken
/// from the outer-medium side (tangential components continuous, normal
/// components scaled by the permittivity ratio).
pub fn q_surface_scattering(
    mode: &ModeField,
    geometry: &RingGeometry,
    roughness: &RoughnessSpec,
    indices: &SurroundingIndices,
) -> Result<QBreakdown> {
    q_surface_scattering_with(mode, geometry, roughness, indices, SurfaceSampling::default())
}

#[doc(hidden)]
pub fn q_surface_scattering_with(
    mode: &ModeField,
    geometry: &RingGeometry,
    roughness: &RoughnessSpec,
    indices: &SurroundingIndices,
    sampling: SurfaceSampling,
) -> Result<QBreakdown> {
    if !mode.normalized {
        return Err(Error::InvalidInput("mode must be normalized".into()));
    }
    roughness.validate()?;
    // free-space wavelength and radiation wavevector (scatterers radiate into vacuum)
    let lambda = 2.0 * PI * C_LIGHT / mode.omega;
    let k0 = mode.omega / C_LIGHT;
    let eps_core = geometry.core_index * geometry.core_index;
    let radius = geometry.radius;
    let width = geometry.width;
    let height = geometry.height;

    // normalization gives int eps |E|^2 d^3r = hbar omega / (2 eps0)
    let stored = HBAR * mode.omega / (2.0 * EPS0);

    // top and bottom films
    let channel = |delta_eps: f64, v_eff: f64, avg: [f64; 3]| -> f64 {
        let sum: f64 = avg.iter().map(|&a| delta_eps * delta_eps * v_eff * v_eff * a / stored).sum();
        if sum <= 0.0 {
            return Q_CEILING;
        }
        (3.0 * lambda.powi(3) / (8.0 * PI.powf(3.5) * sum)).min(Q_CEILING)
    };

    let eps_top = indices.top * indices.top;
    let top_field = horizontal_surface_field(mode, geometry, 0.0, 1.0, eps_top, sampling)?;
    let v_top = roughness.sigma_t * roughness.l_t * (radius * width).sqrt();
    let q_top = channel(eps_core - eps_top, v_top, horizontal_average(&top_field, geometry));

    let eps_bottom = indices.bottom * indices.bottom;
    let bottom_field =
        horizontal_surface_field(mode, geometry, -height, -1.0, eps_bottom, sampling)?;
    let v_bottom = roughness.sigma_b * roughness.l_b * (radius * width).sqrt();
    let q_bottom =
        channel(eps_core - eps_bottom, v_bottom, horizontal_average(&bottom_field, geometry));

    // sidewalls
    let eps_side = indices.side * indices.side;
    let mut side_sum = 0.0;
    for sign in [-1.0, 1.0] {
        let rho_wall = radius + sign * 0.5 * width;
        let field = vertical_surface_field(mode, geometry, rho_wall, sign, eps_side, sampling)?;
        let v_wall = roughness.sigma_pm * height * (roughness.l_pm * rho_wall).sqrt();
        let avg = sidewall_average(&field, geometry, k0);
        let d = eps_core - eps_side;
        side_sum += avg.iter().map(|&a| d * d * v_wall * v_wall * a / stored).sum::<f64>();
    }
    let q_side = if side_sum > 0.0 {
        (3.0 * lambda.powi(3) / (8.0 * PI.powf(3.5) * side_sum)).min(Q_CEILING)
    } else {
        Q_CEILING
    };

    QBreakdown::combined(q_top, q_bottom, q_side, Q_CEILING, Q_CEILING)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RingGeometry;
    use crate::modes::{bend_loss_q, test_coarse_tm_mode};

    #[test]
    fn kappa_bridge_and_combination() {
        let omega0 = 2.0 * PI * 334.792e12;
        let kappa = fit_kappa_to_q(omega0, 3.2e5).unwrap();
        assert!((kappa / (2.0 * PI * 1.046e9) - 1.0).abs() < 0.01, "kappa {kappa}");
        assert_eq!(fit_kappa_to_q(omega0, Q_CEILING).unwrap(), 0.0);
        let omega_d1 = 2.0 * PI * crate::domain::C_LIGHT / 894e-9;
        let kappa = fit_kappa_to_q(omega_d1, 4.5e6).unwrap();
        assert!((kappa / (2.0 * PI * 74.5e6) - 1.0).abs() < 0.01, "kappa {kappa}");

        assert_eq!(combine_q(&[1e6, Q_CEILING, Q_CEILING]).unwrap(), 1e6);
        assert_eq!(combine_q(&[2e6, 2e6]).unwrap(), 1e6);
        assert_eq!(combine_q(&[5e5]).unwrap(), combine_q(&[5e5, 5e5 * 1e18]).unwrap());
        assert!(combine_q(&[-1.0]).is_err());
    }

    #[test]
    fn scattering_q_scaling_laws() {
        let (mode, _, _) = test_coarse_tm_mode(894e-9);
        let geometry = RingGeometry::fabricated();
        let indices = SurroundingIndices::from_geometry(&geometry);
        let base = RoughnessSpec::fabricated();
        let q0 = q_surface_scattering(&mode, &geometry, &base, &indices).unwrap();

        // doubling every sigma at fixed L quarters Q exactly
        let doubled = RoughnessSpec {
            sigma_pm: 2.0 * base.sigma_pm,
            sigma_t: 2.0 * base.sigma_t,
            sigma_b: 2.0 * base.sigma_b,
            ..base
        };
        let q2 = q_surface_scattering(&mode, &geometry, &doubled, &indices).unwrap();
        for (a, b) in [
            (q0.q_ss_top, q2.q_ss_top),
            (q0.q_ss_bottom, q2.q_ss_bottom),
            (q0.q_ss_sidewalls, q2.q_ss_sidewalls),
        ] {
            assert!((a / b - 4.0).abs() < 1e-9, "{a} vs {b}");
        }

        // halving L_t at fixed sigma quarters the top channel's loss
        let half_l = RoughnessSpec { l_t: 0.5 * base.l_t, ..base };
        let qh = q_surface_scattering(&mode, &geometry, &half_l, &indices).unwrap();
        assert!((qh.q_ss_top / q0.q_ss_top - 4.0).abs() < 1e-9);
        assert!((qh.q_ss_bottom / q0.q_ss_bottom - 1.0).abs() < 1e-12);

        // zero roughness hits the ceiling
        let mirror = RoughnessSpec {
            sigma_pm: 0.0,
            sigma_t: 0.0,
            sigma_b: 0.0,
            ..base
        };
        let qm = q_surface_scattering(&mode, &geometry, &mirror, &indices).unwrap();
        assert!(qm.above_ceiling());

        // index-matched surroundings remove that surface's contribution
        let matched = SurroundingIndices { top: geometry.core_index, ..indices };
        let qt = q_surface_scattering(&mode, &geometry, &base, &matched).unwrap();
        assert_eq!(qt.q_ss_top, Q_CEILING);
    }

    #[test]
    fn fabricated_geometry_matches_measured_q() {
        let (mode, _, _) = test_coarse_tm_mode(894e-9);
        let geometry = RingGeometry::fabricated();
        let indices = SurroundingIndices::from_geometry(&geometry);
        let q = q_surface_scattering(&mode, &geometry, &RoughnessSpec::fabricated(), &indices)
            .unwrap();
        let q_ss = q.q_ss().unwrap();
        assert!(
            q_ss > 3.5e5 / 2.0 && q_ss < 3.5e5 * 2.0,
            "Q_ss = {q_ss:.3e} (top {:.2e}, bottom {:.2e}, side {:.2e})",
            q.q_ss_top,
            q.q_ss_bottom,
            q.q_ss_sidewalls
        );
    }

    #[test]
    fn improved_roughness_reaches_projected_q() {
        // improved projection quoted for the baseline geometry
        let geometry = RingGeometry::paper_baseline();
        let (mode, _, _) = crate::modes::test_coarse_tm_mode_for(geometry.clone(), 894e-9);
        let indices = SurroundingIndices::from_geometry(&geometry);
        let q = q_surface_scattering(&mode, &geometry, &RoughnessSpec::improved(), &indices)
            .unwrap();
        let q_bend =
            bend_loss_q(&mode, geometry.radius, geometry.radius + 0.5 * geometry.width, 1.0)
                .unwrap();
        let total = combine_q(&[q.q_ss().unwrap(), q_bend]).unwrap();
        assert!(
            total > 4.5e6 / 2.0 && total < 4.5e6 * 2.0,
            "Q = {total:.3e} (ss {:.3e}, bend {q_bend:.3e})",
            q.q_ss().unwrap()
        );
    }

    #[test]
    fn sidewall_weighting_reduces_to_plain_average_for_thin_walls() {
        // synthetic thin-wall field: Gaussian profile over H = lambda/50
        let lambda = 894e-9;
        let k = 2.0 * PI / lambda;
        let h = lambda / 50.0;
        let n = 101;
        let zs: Vec<f64> = (0..n).map(|i| -h + h * i as f64 / (n - 1) as f64).collect();
        let es: Vec<f64> =
            zs.iter().map(|&z| (-((z + 0.5 * h) / (0.3 * h)).powi(2)).exp()).collect();
        let geometry = RingGeometry::ring(
            16e-6,
            1e-6,
            h,
            2.0,
            crate::domain::MembraneStack::suspended_membrane(2e-6, 0.55e-6),
        )
        .unwrap();
        let field = SurfaceField {
            e_rho: es.clone(),
            e_phi: vec![0.0; n],
            e_z: es.clone(),
            coord: zs.clone(),
        };
        let weighted = sidewall_average(&field, &geometry, k);
        let plain = {
            let mean = trapezoid(&zs, &es) / h;
            mean * mean
        };
        // eta integrals: transverse int (1+k~^2)/2 dk~ = 4/3, z: int (1-k~^2) = 4/3,
        // both normalized by eta = 4/3, so the thin-wall limit is the plain average
        assert!((weighted[0] / plain - 1.0).abs() < 0.01, "{} vs {plain}", weighted[0]);
        assert!((weighted[2] / plain - 1.0).abs() < 0.01, "{} vs {plain}", weighted[2]);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (nodes, weights) = gauss_legendre(64);
        let quad = |f: &dyn Fn(f64) -> f64| -> f64 {
            nodes.iter().zip(weights.iter()).map(|(&x, &w)| w * f(x)).sum()
        };
        assert!((quad(&|_| 1.0) - 2.0).abs() < 1e-13);
        assert!((quad(&|x| x * x) - 2.0 / 3.0).abs() < 1e-13);
        assert!((quad(&|x| x.powi(9)) - 0.0).abs() < 1e-13);
        assert!((quad(&|x| (3.0 * x).cos()) - 2.0 * (3.0_f64).sin() / 3.0).abs() < 1e-12);
    }
}
