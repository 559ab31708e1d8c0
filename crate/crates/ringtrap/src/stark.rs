//! AC Stark shifts of a driven, back-scattering-mixed resonator field:
//! standing-wave scalar shift, vector-shift operator coefficients, and the
//! Casimir-Polder surface potential.

use crate::domain::{convert_polarizability, AtomSpecies, PolarizabilitySet, RingGeometry};
use crate::error::{Error, Result};
use crate::modes::{ModeDiagnostics, ModeField};
use crate::potential::PotentialGrid;
use crate::resonator::DriveResponse;

/// Depth below which the Casimir-Polder divergence makes grid samples
/// physically meaningless; such samples are masked, not searched.
pub const SURFACE_MASK_DEPTH: f64 = 5e-9;

/// Light-shift contributions of one or more drive tones, as operator
/// coefficients: `scalar` is state-independent, `vector_diag` multiplies
/// F_z/F and `vector_offdiag` multiplies (F_+ + F_-)/2F.
#[derive(Debug, Clone)]
pub struct ShiftField {
    pub scalar: PotentialGrid,
    pub vector_diag: PotentialGrid,
    pub vector_offdiag: PotentialGrid,
    pub wavelength: f64,
}

impl ShiftField {
    /// Builds the full shift of one tone on the given longitudinal samples.
    pub fn from_tone(
        mode: &ModeField,
        diagnostics: &ModeDiagnostics,
        response: &DriveResponse,
        pol: &PolarizabilitySet,
        l_samples: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            scalar: scalar_shift(mode, diagnostics, response, pol, l_samples)?,
            vector_diag: vector_shift(mode, diagnostics, response, pol, l_samples)?.0,
            vector_offdiag: vector_shift(mode, diagnostics, response, pol, l_samples)?.1,
            wavelength: 2.0 * std::f64::consts::PI * crate::domain::C_LIGHT / mode.omega,
        })
    }

    /// Incoherent sum with another tone's shift (valid for well-separated
    /// tone frequencies).
    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            scalar: self.scalar.add(&other.scalar)?,
            vector_diag: self.vector_diag.add(&other.vector_diag)?,
            vector_offdiag: self.vector_offdiag.add(&other.vector_offdiag)?,
            wavelength: self.wavelength,
        })
    }
}

fn check_inputs(mode: &ModeField, diagnostics: &ModeDiagnostics) -> Result<()> {
    if !mode.normalized {
        return Err(Error::InvalidInput("mode must be normalized".into()));
    }
    if mode.e_rho.rho != diagnostics.v_map.rho || mode.e_rho.z != diagnostics.v_map.z {
        return Err(Error::GridMismatch("mode and diagnostics grids differ".into()));
    }
    Ok(())
}

/// Standing-wave scalar light shift, J:
/// U_s = -alpha0 * I * |E(rho,z)|^2 [1 + sign * V * v * sin(2 k l + xi_pm)].
pub fn scalar_shift(
    mode: &ModeField,
    diagnostics: &ModeDiagnostics,
    response: &DriveResponse,
    pol: &PolarizabilitySet,
    l_samples: &[f64],
) -> Result<PotentialGrid> {
    check_inputs(mode, diagnostics)?;
    let alpha0 = convert_polarizability(pol.alpha0);
    // the standing-wave period is set by the propagation constant:
    // d = pi / beta = lambda / (2 n_eff)
    let k_lattice = mode.k;
    let mut out = PotentialGrid::zeros(
        mode.e_rho.rho.clone(),
        l_samples.to_vec(),
        mode.e_rho.z.clone(),
        "scalar_light_shift",
    );
    for (j, &l) in l_samples.iter().enumerate() {
        let lattice = (2.0 * k_lattice * l + response.xi_pm).sin();
        for i in 0..out.rho.len() {
            for k in 0..out.z.len() {
                let base = mode.e_rho.at(i, k).powi(2)
                    + mode.e_phi_im.at(i, k).powi(2)
                    + mode.e_z.at(i, k).powi(2);
                let v = diagnostics.v_map.at(i, k);
                let corrugated = 1.0 + response.sign * response.visibility_v * v * lattice;
                out.set(i, j, k, -alpha0 * response.i_buildup * base * corrugated);
            }
        }
    }
    Ok(out)
}

/// Vector light-shift operator coefficients, J, independent of l:
/// diag = -sign * alpha1 * I_tilde * E_phi E_rho (multiplies F_z/F),
/// offdiag = +sign * alpha1 * I_tilde * E_phi E_z (multiplies (F_+ + F_-)/2F).
pub fn vector_shift(
    mode: &ModeField,
    diagnostics: &ModeDiagnostics,
    response: &DriveResponse,
    pol: &PolarizabilitySet,
    l_samples: &[f64],
) -> Result<(PotentialGrid, PotentialGrid)> {
    check_inputs(mode, diagnostics)?;
    let alpha1 = convert_polarizability(pol.alpha1);
    let mut diag = PotentialGrid::zeros(
        mode.e_rho.rho.clone(),
        l_samples.to_vec(),
        mode.e_rho.z.clone(),
        "vector_light_shift_diag",
    );
    let mut offdiag = diag.like("vector_light_shift_offdiag");
    for i in 0..diag.rho.len() {
        for k in 0..diag.z.len() {
            let e_phi = mode.e_phi_im.at(i, k);
            let d = -response.sign * alpha1 * response.i_tilde * e_phi * mode.e_rho.at(i, k);
            let o = response.sign * alpha1 * response.i_tilde * e_phi * mode.e_z.at(i, k);
            for j in 0..diag.l.len() {
                diag.set(i, j, k, d);
                offdiag.set(i, j, k, o);
            }
        }
    }
    Ok((diag, offdiag))
}

/// Casimir-Polder surface potential above the waveguide:
/// U_cp = -C4 / [z^3 (z + lambda_bar)] for |rho - R| <= W/2, zero outside.
/// Samples shallower than `SURFACE_MASK_DEPTH` are masked.
pub fn casimir_polder(
    geometry: &RingGeometry,
    species: &AtomSpecies,
    rho_samples: &[f64],
    l_samples: &[f64],
    z_samples: &[f64],
) -> Result<PotentialGrid> {
    if let Some(&bad) = z_samples.iter().find(|&&z| z <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "Casimir-Polder potential is only modeled above the surface (z = {bad:e} m)"
        )));
    }
    let c4 = species.c4();
    let lambda_bar = species.lambda_bar;
    let mut out = PotentialGrid::zeros(
        rho_samples.to_vec(),
        l_samples.to_vec(),
        z_samples.to_vec(),
        "casimir_polder",
    );
    for (i, &rho) in rho_samples.iter().enumerate() {
        let inside = (rho - geometry.radius).abs() <= 0.5 * geometry.width;
        for (k, &z) in z_samples.iter().enumerate() {
            let u = if inside { -c4 / (z.powi(3) * (z + lambda_bar)) } else { 0.0 };
            let masked = z < SURFACE_MASK_DEPTH;
            for j in 0..l_samples.len() {
                let idx = out.idx(i, j, k);
                out.values[idx] = u;
                out.mask[idx] = masked;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid2D, K_B};
    use crate::modes::{mode_diagnostics, test_coarse_mode, ModeField};
    use crate::resonator::{
        drive_response, elimination_scheme, DriveTone, EliminationGoal, EliminationScheme, Port,
        ResonatorParams, DEFAULT_MIN_TONE_SEPARATION,
    };
    use std::f64::consts::PI;

    fn ghz(v: f64) -> f64 {
        2.0 * PI * v * 1e9
    }

    fn fixture() -> (ModeField, ModeDiagnostics, ResonatorParams) {
        let (mode, eps, _radius) = test_coarse_mode(935.3e-9);
        let diagnostics = mode_diagnostics(&mode, &eps).unwrap();
        let params =
            ResonatorParams::new(mode.omega, ghz(0.5), ghz(0.5), ghz(0.6), 0.0).unwrap();
        (mode, diagnostics, params)
    }

    fn red_pol() -> PolarizabilitySet {
        crate::domain::AtomSpecies::cesium().polarizability(935.3e-9).unwrap()
    }

    fn blue_pol() -> PolarizabilitySet {
        crate::domain::AtomSpecies::cesium().polarizability(793.5e-9).unwrap()
    }

    #[test]
    fn scalar_shift_sign_follows_polarizability() {
        let (mode, diagnostics, params) = fixture();
        let tone = DriveTone { port: Port::Plus, power: 1e-6, omega: params.omega0 };
        let response = drive_response(&params, &tone).unwrap();
        let ls = [0.0, 0.1e-6, 0.2e-6];

        let red = scalar_shift(&mode, &diagnostics, &response, &red_pol(), &ls).unwrap();
        assert!(red.values.iter().all(|&u| u <= 0.0), "red detuned shift must attract");
        assert!(red.values.iter().any(|&u| u < 0.0));

        let blue = scalar_shift(&mode, &diagnostics, &response, &blue_pol(), &ls).unwrap();
        assert!(blue.values.iter().all(|&u| u >= 0.0), "blue detuned shift must repel");

        // zero drive power gives an identically zero shift
        let dark = drive_response(
            &params,
            &DriveTone { port: Port::Plus, power: 0.0, omega: params.omega0 },
        )
        .unwrap();
        let off = scalar_shift(&mode, &diagnostics, &dark, &red_pol(), &ls).unwrap();
        assert!(off.values.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn scalar_shift_is_linear_in_power() {
        let (mode, diagnostics, params) = fixture();
        let ls = [0.05e-6];
        let r1 = drive_response(
            &params,
            &DriveTone { port: Port::Plus, power: 1e-6, omega: params.omega0 + ghz(0.2) },
        )
        .unwrap();
        let r2 = drive_response(
            &params,
            &DriveTone { port: Port::Plus, power: 2e-6, omega: params.omega0 + ghz(0.2) },
        )
        .unwrap();
        let u1 = scalar_shift(&mode, &diagnostics, &r1, &red_pol(), &ls).unwrap();
        let u2 = scalar_shift(&mode, &diagnostics, &r2, &red_pol(), &ls).unwrap();
        for (a, b) in u1.values.iter().zip(u2.values.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn vector_shift_vanishes_at_critical_detuning() {
        let (mode, diagnostics, _) = fixture();
        // beta > kappa/2 so the single-tone scheme applies
        let params = ResonatorParams::new(mode.omega, ghz(0.5), ghz(0.5), ghz(1.0), 0.0).unwrap();
        let plan = elimination_scheme(
            &params,
            EliminationGoal::ZeroVectorShift,
            1e-6,
            DEFAULT_MIN_TONE_SEPARATION,
        )
        .unwrap();
        assert_eq!(plan.scheme, EliminationScheme::SingleToneCritical);
        let (diag, offdiag) =
            vector_shift(&mode, &diagnostics, &plan.responses[0], &red_pol(), &[0.0]).unwrap();
        let scale = convert_polarizability(red_pol().alpha1)
            * plan.responses[0].i_buildup
            * diagnostics.intensity_map.values.iter().cloned().fold(0.0_f64, f64::max);
        for grid in [&diag, &offdiag] {
            for &v in &grid.values {
                assert!(v.abs() <= 1e-9 * scale.abs());
            }
        }
    }

    #[test]
    fn vector_to_scalar_ratio_matches_polarization_factors() {
        let (mode, diagnostics, params) = fixture();
        let tone = DriveTone { port: Port::Plus, power: 1e-6, omega: params.omega0 + ghz(0.9) };
        let response = drive_response(&params, &tone).unwrap();
        let pol = red_pol();
        let ls = [0.0];
        let (diag, offdiag) = vector_shift(&mode, &diagnostics, &response, &pol, &ls).unwrap();

        // against an l-averaged scalar envelope: |U^v_mu| / (alpha0 I |E|^2)
        // = |alpha1/alpha0| * 2|f_mu| * I_tilde/I, with the diagonal term
        // pairing E_phi E_rho and the off-diagonal pairing E_phi E_z
        let alpha_ratio = (pol.alpha1 / pol.alpha0).abs();
        let i_ratio = (response.i_tilde / response.i_buildup).abs();
        let i_peak = diagnostics
            .intensity_map
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let (pi, pk) = (i_peak / mode.e_rho.z.len(), i_peak % mode.e_rho.z.len());
        let total = mode.e_rho.at(pi, pk).powi(2)
            + mode.e_phi_im.at(pi, pk).powi(2)
            + mode.e_z.at(pi, pk).powi(2);
        let envelope = convert_polarizability(pol.alpha0) * response.i_buildup * total;
        let f_diag = diagnostics.f_z_map.values[i_peak];
        let f_offdiag = diagnostics.f_rho_map.values[i_peak];
        let expect_diag = alpha_ratio * 2.0 * f_diag.abs() * i_ratio * envelope.abs();
        let expect_off = alpha_ratio * 2.0 * f_offdiag.abs() * i_ratio * envelope.abs();
        assert!((diag.values[i_peak].abs() / expect_diag - 1.0).abs() < 1e-9);
        assert!((offdiag.values[i_peak].abs() / expect_off - 1.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_dual_tones_cancel_vector_shift() {
        let (mode, diagnostics, _) = fixture();
        let params = ResonatorParams::new(mode.omega, ghz(0.5), ghz(0.5), ghz(0.4), 0.0).unwrap();
        let plan = elimination_scheme(
            &params,
            EliminationGoal::ZeroVectorShift,
            1e-6,
            DEFAULT_MIN_TONE_SEPARATION,
        )
        .unwrap();
        assert_eq!(plan.scheme, EliminationScheme::DualToneBalanced);
        let pol = red_pol();
        let ls = [0.0];
        let (d1, o1) = vector_shift(&mode, &diagnostics, &plan.responses[0], &pol, &ls).unwrap();
        let (d2, o2) = vector_shift(&mode, &diagnostics, &plan.responses[1], &pol, &ls).unwrap();
        let scale = d1.values.iter().cloned().map(f64::abs).fold(0.0_f64, f64::max);
        let sum_d = d1.add(&d2).unwrap();
        let sum_o = o1.add(&o2).unwrap();
        for &v in sum_d.values.iter().chain(sum_o.values.iter()) {
            assert!(v.abs() <= 1e-9 * scale, "residual vector shift {v:e} vs scale {scale:e}");
        }
    }

    #[test]
    fn symmetric_scheme_cancels_scalar_corrugation_pointwise() {
        let (mode, diagnostics, params) = fixture();
        let plan =
            elimination_scheme(&params, EliminationGoal::Both, 1e-6, DEFAULT_MIN_TONE_SEPARATION)
                .unwrap();
        let pol = red_pol();
        let ls: Vec<f64> = (0..9).map(|n| n as f64 * 37e-9).collect();
        let u1 = scalar_shift(&mode, &diagnostics, &plan.responses[0], &pol, &ls).unwrap();
        let u2 = scalar_shift(&mode, &diagnostics, &plan.responses[1], &pol, &ls).unwrap();
        let total = u1.add(&u2).unwrap();
        // the sum must be l-independent pointwise
        for i in 0..total.rho.len() {
            for k in 0..total.z.len() {
                let reference = total.at(i, 0, k);
                for j in 1..total.l.len() {
                    let v = total.at(i, j, k);
                    assert!(
                        (v - reference).abs() <= 1e-6 * reference.abs().max(1e-300),
                        "corrugation residual at ({i},{j},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn casimir_polder_matches_closed_form() {
        let geometry = crate::domain::RingGeometry::paper_baseline();
        let species = crate::domain::AtomSpecies::cesium();
        let rho = vec![geometry.radius - 1.0e-6, geometry.radius, geometry.radius + 0.3e-6];
        let z: Vec<f64> = (1..=60).map(|n| n as f64 * 10e-9).collect();
        let grid = casimir_polder(&geometry, &species, &rho, &[0.0], &z).unwrap();

        let c4 = species.c4();
        // the closed form holds exactly at every in-window sample
        for (k, &zv) in z.iter().enumerate() {
            let u = grid.at(1, 0, k);
            assert!((u * zv.powi(3) * (zv + species.lambda_bar) + c4).abs() <= 1e-12 * c4);
            // outside the lateral window the potential is zero
            assert_eq!(grid.at(0, 0, k), 0.0);
            // attractive and monotonically increasing toward zero
            assert!(u < 0.0);
            if k > 0 {
                assert!(u > grid.at(1, 0, k - 1));
            }
        }
        // reference value at z = 100 nm: about -k_B x 54 uK
        let k100 = z.iter().position(|&zv| (zv - 100e-9).abs() < 1e-12).unwrap();
        let u100_uk = grid.at(1, 0, k100) / K_B * 1e6;
        assert!((u100_uk + 54.0).abs() < 1.0, "U_cp(100 nm) = {u100_uk} uK");

        // shallow samples are masked, deeper ones are not
        let shallow = casimir_polder(&geometry, &species, &rho, &[0.0], &[2e-9, 50e-9]).unwrap();
        assert!(shallow.mask[shallow.idx(1, 0, 0)]);
        assert!(!shallow.mask[shallow.idx(1, 0, 1)]);

        // the model is undefined at or below the surface
        assert!(casimir_polder(&geometry, &species, &rho, &[0.0], &[0.0]).is_err());
        assert!(casimir_polder(&geometry, &species, &rho, &[0.0], &[-1e-9]).is_err());
    }

    #[test]
    fn rejects_unnormalized_modes() {
        let (mode, diagnostics, params) = fixture();
        let mut raw = mode.clone();
        raw.normalized = false;
        let tone = DriveTone { port: Port::Plus, power: 1e-6, omega: params.omega0 };
        let response = drive_response(&params, &tone).unwrap();
        assert!(scalar_shift(&raw, &diagnostics, &response, &red_pol(), &[0.0]).is_err());
        let _ = Grid2D::zeros(vec![0.0], vec![0.0]);
    }
}
