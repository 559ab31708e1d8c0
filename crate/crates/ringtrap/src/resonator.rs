//! Coupled-mode theory of a back-scattering-split resonance: drive response,
//! standing-wave intensity, mixed normal modes, doublet spectrum fitting, and
//! drive-tone schemes that cancel lattice corrugation or vector light shifts.

use crate::domain::{Grid2D, HBAR};
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, FitOptions};
use crate::modes::{ModeDiagnostics, ModeField};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Minimum frequency separation between simultaneously driven tones for the
/// incoherent-sum treatment of their light shifts to hold (well above any
/// trap frequency).
pub const DEFAULT_MIN_TONE_SEPARATION: f64 = 2.0 * PI * 100e6;

/// Coupled-mode parameters of one azimuthal resonance doublet.
#[derive(Debug, Clone, Copy)]
pub struct ResonatorParams {
    /// Bare (unsplit) resonance frequency, rad/s.
    pub omega0: f64,
    /// Intrinsic loss rate, rad/s.
    pub kappa_i: f64,
    /// Bus-waveguide coupling rate, rad/s.
    pub kappa_c: f64,
    /// Coherent back-scattering rate between the circulating modes, rad/s.
    pub beta: f64,
    /// Back-scattering phase, rad.
    pub xi: f64,
}

impl ResonatorParams {
    pub fn new(omega0: f64, kappa_i: f64, kappa_c: f64, beta: f64, xi: f64) -> Result<Self> {
        if !(kappa_i >= 0.0 && kappa_c >= 0.0 && beta >= 0.0) {
            return Err(Error::InvalidInput(
                "loss and back-scattering rates must be non-negative".into(),
            ));
        }
        if kappa_i + kappa_c <= 0.0 {
            return Err(Error::InvalidInput("total loss rate must be positive".into()));
        }
        Ok(Self { omega0, kappa_i, kappa_c, beta, xi })
    }

    /// Total loss rate kappa = kappa_i + kappa_c.
    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_c
    }

    /// Loaded quality factor omega0 / kappa.
    pub fn quality_factor(&self) -> f64 {
        self.omega0 / self.kappa()
    }
}

/// Which end of the bus waveguide injects the drive. The plus port excites
/// the counter-clockwise circulating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    Plus,
    Minus,
}

impl Port {
    /// Sign of the intensity corrugation driven from this port.
    pub fn sign(self) -> f64 {
        match self {
            Port::Plus => 1.0,
            Port::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Port {
        match self {
            Port::Plus => Port::Minus,
            Port::Minus => Port::Plus,
        }
    }
}

/// One continuous-wave drive applied to the bus waveguide.
#[derive(Debug, Clone, Copy)]
pub struct DriveTone {
    pub port: Port,
    /// Input power in the waveguide, W.
    pub power: f64,
    /// Drive frequency, rad/s.
    pub omega: f64,
}

/// Steady-state intra-resonator response to one drive tone.
#[derive(Debug, Clone, Copy)]
pub struct DriveResponse {
    /// alpha = kappa/2 + i*(omega - omega0), rad/s.
    pub alpha: Complex64,
    /// Photon-number build-up factor for the intensity.
    pub i_buildup: f64,
    /// Build-up factor weighting the vector light shift.
    pub i_tilde: f64,
    /// Standing-wave visibility per unit of the mode's visibility amplitude v.
    pub visibility_v: f64,
    /// Corrugation phase xi +- arg(alpha) for this port.
    pub xi_pm: f64,
    /// Corrugation sign (+1 for the plus port, -1 for the minus port).
    pub sign: f64,
}

/// Steady-state response of the split resonance to a single drive tone.
pub fn drive_response(params: &ResonatorParams, tone: &DriveTone) -> Result<DriveResponse> {
    let kappa = params.kappa();
    if kappa <= 0.0 {
        return Err(Error::InvalidInput("total loss rate must be positive".into()));
    }
    if tone.power < 0.0 {
        return Err(Error::InvalidInput("drive power must be non-negative".into()));
    }
    let delta = tone.omega - params.omega0;
    let alpha = Complex64::new(0.5 * kappa, delta);
    let beta = params.beta;
    let denom = (alpha * alpha + Complex64::new(beta * beta, 0.0)).norm_sqr();
    // photon energy taken at the bare resonance: |delta| << omega0, and this
    // keeps the build-up factors exactly even in detuning
    let i0 = params.kappa_c * tone.power / (HBAR * params.omega0);
    let a2 = alpha.norm_sqr();
    let i_buildup = i0 * (a2 + beta * beta) / denom;
    let i_tilde = i0 * (a2 - beta * beta) / denom;
    let visibility_v = 2.0 * alpha.norm() * beta / (a2 + beta * beta);
    let sign = tone.port.sign();
    let xi_pm = params.xi + sign * alpha.arg();
    Ok(DriveResponse { alpha, i_buildup, i_tilde, visibility_v, xi_pm, sign })
}

/// Intra-resonator amplitudes (a_plus, a_minus) of the circulating modes for
/// one tone, normalized so |a|^2 counts photons (|s|^2 = P / hbar omega).
pub fn intracavity_amplitudes(
    params: &ResonatorParams,
    tone: &DriveTone,
) -> Result<(Complex64, Complex64)> {
    let response = drive_response(params, tone)?;
    let alpha = response.alpha;
    let beta = params.beta;
    let k = Complex64::new(0.0, params.kappa_c.sqrt());
    let s = (tone.power / (HBAR * params.omega0)).sqrt();
    let denom = alpha * alpha + Complex64::new(beta * beta, 0.0);
    let phase = Complex64::new(0.0, params.xi).exp();
    let (s_plus, s_minus) = match tone.port {
        Port::Plus => (Complex64::new(s, 0.0), Complex64::new(0.0, 0.0)),
        Port::Minus => (Complex64::new(0.0, 0.0), Complex64::new(s, 0.0)),
    };
    let i = Complex64::i();
    let a_plus = k * (alpha * s_plus + i * beta * phase * s_minus) / denom;
    let a_minus = k * (i * beta * phase.conj() * s_plus + alpha * s_minus) / denom;
    Ok((a_plus, a_minus))
}

/// Pointwise intensity |E|^2 of the corrugated standing wave at arc-length
/// position `l` along the ring:
/// I * |E(rho,z)|^2 * [1 + sign * V * v(rho,z) * sin(2 k l + xi_pm)].
pub fn standing_wave_intensity(
    mode: &ModeField,
    diagnostics: &ModeDiagnostics,
    response: &DriveResponse,
    l: f64,
) -> Result<Grid2D> {
    if !mode.normalized {
        return Err(Error::InvalidInput("mode must be normalized".into()));
    }
    if mode.e_rho.rho != diagnostics.v_map.rho || mode.e_rho.z != diagnostics.v_map.z {
        return Err(Error::GridMismatch("mode and diagnostics grids differ".into()));
    }
    let k_lattice = mode.n_eff * mode.k;
    let phase = (2.0 * k_lattice * l + response.xi_pm).sin();
    let mut out = mode.e_rho.like();
    for idx in 0..out.values.len() {
        // bare |E|^2: the epsilon-weighted diagnostics map is for energy
        // integrals, not for the field the atom samples
        let base = mode.e_rho.values[idx] * mode.e_rho.values[idx]
            + mode.e_phi_im.values[idx] * mode.e_phi_im.values[idx]
            + mode.e_z.values[idx] * mode.e_z.values[idx];
        let v = diagnostics.v_map.values[idx];
        out.values[idx] =
            response.i_buildup * base * (1.0 + response.sign * response.visibility_v * v * phase);
    }
    Ok(out)
}

/// Which quadrature of the standing-wave doublet a mixed mode occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedBranch {
    /// Transverse components vary as cos(m phi + xi/2).
    Cosine,
    /// Transverse components vary as sin(m phi + xi/2).
    Sine,
}

/// One of the two standing-wave normal modes formed by back-scattering.
/// The transverse components (rho, z) share one azimuthal quadrature and the
/// phi component the orthogonal one; the stored profiles are the travelling
/// mode's, and the sqrt(2) renormalization is applied on evaluation.
#[derive(Debug, Clone)]
pub struct MixedModeField {
    pub e_rho: Grid2D,
    pub e_phi_im: Grid2D,
    pub e_z: Grid2D,
    pub m_azimuthal: f64,
    pub xi: f64,
    pub omega: f64,
    pub branch: MixedBranch,
}

impl MixedModeField {
    /// Azimuthal factor multiplying the transverse (rho, z) components.
    pub fn transverse_factor(&self, phi: f64) -> f64 {
        let arg = self.m_azimuthal * phi + 0.5 * self.xi;
        let q = match self.branch {
            MixedBranch::Cosine => arg.cos(),
            MixedBranch::Sine => arg.sin(),
        };
        std::f64::consts::SQRT_2 * q
    }

    /// Azimuthal factor multiplying the phi component (orthogonal quadrature;
    /// the sign difference between branches drops out of intensities).
    pub fn phi_factor(&self, phi: f64) -> f64 {
        let arg = self.m_azimuthal * phi + 0.5 * self.xi;
        let q = match self.branch {
            MixedBranch::Cosine => -arg.sin(),
            MixedBranch::Sine => arg.cos(),
        };
        std::f64::consts::SQRT_2 * q
    }

    /// |E|^2 at grid node (i, j) and azimuth phi.
    pub fn intensity_at(&self, phi: f64, i: usize, j: usize) -> f64 {
        let t = self.transverse_factor(phi);
        let p = self.phi_factor(phi);
        let er = self.e_rho.at(i, j);
        let ez = self.e_z.at(i, j);
        let ep = self.e_phi_im.at(i, j);
        (er * er + ez * ez) * t * t + ep * ep * p * p
    }

    /// Energy normalization integral 2 eps0 R \int dphi \iint eps |E|^2 drho dz,
    /// evaluated with `n_phi` azimuthal quadrature nodes. Equals hbar*omega for
    /// a properly normalized parent mode.
    pub fn normalization_integral(&self, eps_map: &Grid2D, radius: f64, n_phi: usize) -> Result<f64> {
        if eps_map.rho != self.e_rho.rho || eps_map.z != self.e_rho.z {
            return Err(Error::GridMismatch("epsilon map grid differs from mode grid".into()));
        }
        // separate transverse and phi-component cross sections once; the phi
        // integral then weights them with the two quadrature factors
        let mut trans = 0.0;
        let mut axial = 0.0;
        let mut cell = self.e_rho.like();
        for idx in 0..cell.values.len() {
            let er = self.e_rho.values[idx];
            let ez = self.e_z.values[idx];
            cell.values[idx] = eps_map.values[idx] * (er * er + ez * ez);
        }
        trans += cell.integrate();
        for idx in 0..cell.values.len() {
            let ep = self.e_phi_im.values[idx];
            cell.values[idx] = eps_map.values[idx] * ep * ep;
        }
        axial += cell.integrate();
        let mut phi_int = 0.0;
        let dphi = 2.0 * PI / n_phi as f64;
        for n in 0..n_phi {
            let phi = n as f64 * dphi;
            let t = self.transverse_factor(phi);
            let p = self.phi_factor(phi);
            phi_int += (trans * t * t + axial * p * p) * dphi;
        }
        Ok(2.0 * crate::domain::EPS0 * radius * phi_int)
    }
}

/// The two standing-wave normal modes of the split resonance, built from a
/// normalized travelling mode.
pub fn mixed_mode_fields(mode: &ModeField, params: &ResonatorParams) -> Result<(MixedModeField, MixedModeField)> {
    if !mode.normalized {
        return Err(Error::InvalidInput("mode must be normalized".into()));
    }
    let make = |branch| MixedModeField {
        e_rho: mode.e_rho.clone(),
        e_phi_im: mode.e_phi_im.clone(),
        e_z: mode.e_z.clone(),
        m_azimuthal: mode.m_azimuthal,
        xi: params.xi,
        omega: mode.omega,
        branch,
    };
    Ok((make(MixedBranch::Cosine), make(MixedBranch::Sine)))
}

/// Build-up factor at unit drive (kappa_c P / hbar omega = 1) as a function
/// of squared detuning u = (omega - omega0)^2.
fn buildup_unit(u: f64, kappa: f64, beta: f64) -> f64 {
    let c = 0.25 * kappa * kappa + beta * beta;
    (c + u) / ((c - u) * (c - u) + kappa * kappa * u)
}

fn i_tilde_unit(u: f64, kappa: f64, beta: f64) -> f64 {
    let c = 0.25 * kappa * kappa + beta * beta;
    let d = 0.25 * kappa * kappa - beta * beta;
    (u + d) / ((c - u) * (c - u) + kappa * kappa * u)
}

/// Squared detuning at which the build-up factor peaks. Zero for
/// beta <= kappa / (2 sqrt(3)); the doublet maxima sit at +-sqrt of this.
pub fn peak_detuning_squared(kappa: f64, beta: f64) -> f64 {
    let c = 0.25 * kappa * kappa + beta * beta;
    (2.0 * beta * c.sqrt() - c).max(0.0)
}

/// Modeled scattered-intensity spectrum:
/// s(omega) = amplitude * I(omega)/I_peak + baseline.
pub fn model_spectrum(
    params: &ResonatorParams,
    amplitude: f64,
    baseline: f64,
    omegas: &[f64],
) -> Vec<f64> {
    let kappa = params.kappa();
    let u_peak = peak_detuning_squared(kappa, params.beta);
    let i_peak = buildup_unit(u_peak, kappa, params.beta);
    omegas
        .iter()
        .map(|&omega| {
            let delta = omega - params.omega0;
            amplitude * buildup_unit(delta * delta, kappa, params.beta) / i_peak + baseline
        })
        .collect()
}

/// Result of a doublet spectrum fit. Scattered intensity constrains only the
/// total loss rate: the kappa_i / kappa_c split is not identifiable from this
/// data and `kappa` is reported as their sum; take kappa_c from an external
/// calibration when a split is required downstream.
#[derive(Debug, Clone)]
pub struct SpectrumFit {
    pub omega0: f64,
    pub kappa: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub baseline: f64,
    /// Linear baseline slope per rad/s, present only if requested.
    pub slope: Option<f64>,
    /// One-sigma uncertainties for (omega0, kappa, beta, amplitude, baseline
    /// [, slope]) from the scaled parameter covariance.
    pub uncertainties: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl SpectrumFit {
    /// Loaded quality factor omega0 / kappa.
    pub fn quality_factor(&self) -> f64 {
        self.omega0 / self.kappa
    }
}

/// Least-squares fit of (omega0, kappa, beta, amplitude, baseline) to a
/// scattered-intensity spectrum. `with_slope` adds a linear baseline term to
/// absorb peak asymmetry the symmetric coupled-mode model cannot produce.
pub fn fit_spectrum(samples: &[(f64, f64)], with_slope: bool) -> Result<SpectrumFit> {
    if samples.len() < 7 {
        return Err(Error::DegenerateData(format!(
            "{} samples cannot constrain the doublet model (need >= 7)",
            samples.len()
        )));
    }
    let omegas: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let counts: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let c_min = counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w_min = omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let w_max = omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = w_max - w_min;
    let amp0 = c_max - c_min;
    if !(span > 0.0) || amp0 <= 1e-12 * c_max.abs().max(1.0) {
        return Err(Error::DegenerateData("spectrum is flat".into()));
    }

    // initial guesses: peaks above half-amplitude locate omega0 and the
    // splitting; the half-maximum crossing width sets the loss-rate scale
    let half = c_min + 0.5 * amp0;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..counts.len() - 1 {
        if counts[i] > half && counts[i] >= counts[i - 1] && counts[i] > counts[i + 1] {
            peaks.push(i);
        }
    }
    let above: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > half).collect();
    let width = if above.len() >= 2 {
        (omegas[*above.last().unwrap()] - omegas[above[0]]).abs().max(span / counts.len() as f64)
    } else {
        span / 10.0
    };
    let (omega0_0, kappa0, beta0) = if peaks.len() >= 2 {
        let lo = omegas[peaks[0]];
        let hi = omegas[*peaks.last().unwrap()];
        ((lo + hi) / 2.0, (hi - lo).abs().max(width / 2.0), (hi - lo).abs() / 2.0)
    } else {
        let i_peak = (0..counts.len()).max_by(|&a, &b| counts[a].total_cmp(&counts[b])).unwrap();
        (omegas[i_peak], width, width / 4.0)
    };

    // fit in scaled variables so every parameter is O(1)
    let s = span;
    let w_c = 0.5 * (w_min + w_max);
    let mut p0 = vec![(omega0_0 - w_c) / s, kappa0 / s, beta0 / s, amp0, c_min];
    if with_slope {
        p0.push(0.0);
    }
    let n = samples.len();
    let omegas_f = omegas.clone();
    let counts_f = counts.clone();
    let fit = levenberg_marquardt(
        move |p, out| {
            let kappa = p[1].abs() * s;
            let beta = p[2].abs() * s;
            let omega0 = w_c + p[0] * s;
            let u_peak = peak_detuning_squared(kappa, beta);
            let i_peak = buildup_unit(u_peak, kappa, beta);
            for (i, (&w, &c)) in omegas_f.iter().zip(counts_f.iter()).enumerate() {
                let delta = w - omega0;
                let mut model = p[3] * buildup_unit(delta * delta, kappa, beta) / i_peak + p[4];
                if p.len() > 5 {
                    model += p[5] * (w - w_c) / s;
                }
                out[i] = model - c;
            }
        },
        &p0,
        n,
        FitOptions::default(),
    )?;

    let p = &fit.params;
    let scale = |k: usize| -> f64 {
        match k {
            0..=2 => s,
            _ => 1.0,
        }
    };
    let mut uncertainties = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let var = if fit.covariance.nrows() > k { fit.covariance[(k, k)].max(0.0) } else { 0.0 };
        uncertainties.push(var.sqrt() * scale(k));
    }
    Ok(SpectrumFit {
        omega0: w_c + p[0] * s,
        kappa: p[1].abs() * s,
        beta: p[2].abs() * s,
        amplitude: p[3],
        baseline: p[4],
        slope: if with_slope { Some(p[5] / s) } else { None },
        uncertainties,
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
    })
}

/// Target of a drive-tone scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EliminationGoal {
    /// Cancel the vector light shift.
    ZeroVectorShift,
    /// Cancel the intensity corrugation (standing-wave lattice).
    ZeroLattice,
    /// Cancel both simultaneously.
    Both,
}

/// Which scheme the planner selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EliminationScheme {
    /// Single tone at |alpha| = beta where the vector build-up vanishes
    /// (requires beta > kappa/2).
    SingleToneCritical,
    /// Two tones on opposite ports with equal vector build-up factors, one at
    /// the intensity peak.
    DualToneBalanced,
    /// Two tones on opposite ports at mirrored detunings; both the lattice
    /// and the vector shift cancel.
    DualToneSymmetric,
}

/// A planned set of drive tones with their predicted responses.
#[derive(Debug, Clone)]
pub struct EliminationPlan {
    pub scheme: EliminationScheme,
    pub tones: Vec<DriveTone>,
    pub responses: Vec<DriveResponse>,
}

/// Chooses drive tones that cancel the vector light shift and/or the lattice
/// corrugation. Each tone carries `power`; dual-tone schemes respect
/// `min_separation` between tone frequencies so the incoherent sum applies.
pub fn elimination_scheme(
    params: &ResonatorParams,
    goal: EliminationGoal,
    power: f64,
    min_separation: f64,
) -> Result<EliminationPlan> {
    let kappa = params.kappa();
    let beta = params.beta;
    let plan = |scheme, detunings: Vec<(Port, f64)>| -> Result<EliminationPlan> {
        let mut tones = Vec::new();
        let mut responses = Vec::new();
        for (port, delta) in detunings {
            let tone = DriveTone { port, power, omega: params.omega0 + delta };
            responses.push(drive_response(params, &tone)?);
            tones.push(tone);
        }
        Ok(EliminationPlan { scheme, tones, responses })
    };
    match goal {
        EliminationGoal::ZeroVectorShift => {
            if beta > kappa / 2.0 {
                // |alpha| = beta is reachable on a single tone
                let delta = (beta * beta - 0.25 * kappa * kappa).sqrt();
                return plan(EliminationScheme::SingleToneCritical, vec![(Port::Plus, delta)]);
            }
            if beta == 0.0 {
                return Err(Error::InfeasibleScheme("no back-scattering: the vector build-up never differs between detunings".into()));
            }
            // opposite-port pair with equal vector build-up; one tone sits at
            // the intensity peak, the second at the other root of
            // i_tilde(u) = i_tilde(u_peak), a quadratic in u = delta^2
            let c = 0.25 * kappa * kappa + beta * beta;
            let d = 0.25 * kappa * kappa - beta * beta;
            let u1 = peak_detuning_squared(kappa, beta);
            let g1 = i_tilde_unit(u1, kappa, beta);
            if !(g1 > 0.0) {
                return Err(Error::InfeasibleScheme("vector build-up vanishes at the intensity peak".into()));
            }
            let b_coef = kappa * kappa * g1 - 2.0 * c * g1 - 1.0;
            let c_coef = g1 * c * c - d;
            let u2 = if u1 > 0.0 { c_coef / (g1 * u1) } else { -b_coef / g1 };
            if !(u2.is_finite() && u2 >= 0.0) || (u2 - u1).abs() < 1e-9 * c {
                return Err(Error::InfeasibleScheme("no second detuning with matching vector build-up".into()));
            }
            let d1 = u1.sqrt();
            // pick the sign of the second detuning that best separates tones
            let d2 = if (d1 - u2.sqrt()).abs() >= min_separation { u2.sqrt() } else { -u2.sqrt() };
            if (d1 - d2).abs() < min_separation {
                return Err(Error::InfeasibleScheme("balanced tones fall within the minimum separation".into()));
            }
            plan(
                EliminationScheme::DualToneBalanced,
                vec![(Port::Plus, d1), (Port::Minus, d2)],
            )
        }
        EliminationGoal::ZeroLattice | EliminationGoal::Both => {
            // mirrored detunings on opposite ports: xi_+ = xi_- so the
            // corrugations cancel exactly, and the even vector build-up
            // factors cancel through the opposite port signs
            let delta = peak_detuning_squared(kappa, beta).sqrt().max(0.5 * min_separation);
            plan(
                EliminationScheme::DualToneSymmetric,
                vec![(Port::Plus, delta), (Port::Minus, -delta)],
            )
        }
    }
}

/// Visibility of the incoherent sum of two opposite-port standing waves with
/// build-ups (I_plus, I_minus), per-tone visibilities (V_plus, V_minus), and
/// corrugation phase difference |xi_plus - xi_minus|.
pub fn combined_visibility(
    i_plus: f64,
    i_minus: f64,
    v_plus: f64,
    v_minus: f64,
    delta_xi: f64,
) -> Result<f64> {
    if i_plus + i_minus <= 0.0 {
        return Err(Error::InvalidInput("total build-up must be positive".into()));
    }
    let a = i_plus * v_plus;
    let b = i_minus * v_minus;
    let num = (a * a + b * b - 2.0 * a * b * delta_xi.cos()).max(0.0).sqrt();
    Ok(num / (i_plus + i_minus))
}
