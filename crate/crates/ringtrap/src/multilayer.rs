//! Plane-wave optics of the planar membrane stack at normal incidence:
//! complex reflection coefficient from characteristic transfer matrices and
//! the standing-wave intensity profile above the top surface.

use num_complex::Complex64;

use crate::domain::Layer;
use crate::error::{Error, Result};

/// Complex reflection coefficient for a normally incident plane wave hitting
/// `layers` (ordered from the incidence side) from a medium of index `n_in`,
/// exiting into a half-space of index `n_out`. The phase is referenced to the
/// first interface. Lossless (real-index) layers only.
pub fn reflection_coefficient(
    layers: &[Layer],
    n_in: f64,
    n_out: f64,
    wavelength: f64,
) -> Result<Complex64> {
    if wavelength <= 0.0 {
        return Err(Error::InvalidInput("wavelength must be positive".into()));
    }
    if n_in < 1.0 || n_out < 1.0 {
        return Err(Error::InvalidInput("bounding media must have index >= 1".into()));
    }
    for (i, layer) in layers.iter().enumerate() {
        if !(layer.thickness > 0.0) || !(layer.index >= 1.0) || !layer.index.is_finite() {
            return Err(Error::InvalidInput(format!(
                "layer {i} must have positive thickness and real index >= 1"
            )));
        }
    }
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    // characteristic matrix product, incidence side first
    let mut m = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];
    for layer in layers {
        let delta = k0 * layer.index * layer.thickness;
        let (s, c) = delta.sin_cos();
        let mj = [
            [Complex64::new(c, 0.0), Complex64::new(0.0, s / layer.index)],
            [Complex64::new(0.0, layer.index * s), Complex64::new(c, 0.0)],
        ];
        m = [
            [
                m[0][0] * mj[0][0] + m[0][1] * mj[1][0],
                m[0][0] * mj[0][1] + m[0][1] * mj[1][1],
            ],
            [
                m[1][0] * mj[0][0] + m[1][1] * mj[1][0],
                m[1][0] * mj[0][1] + m[1][1] * mj[1][1],
            ],
        ];
    }
    let top = m[0][0] + m[0][1] * n_out;
    let bottom = m[1][0] + m[1][1] * n_out;
    Ok((n_in * top - bottom) / (n_in * top + bottom))
}

/// Standing-wave intensity factor |exp(-ikz) + r exp(ikz)|^2 at height z
/// above the reflecting surface, normalized to the incident intensity. The
/// incident wave travels downward (-z) and the reflection upward.
pub fn standing_wave(r: Complex64, k: f64, z: f64) -> f64 {
    1.0 + r.norm_sqr() + 2.0 * (r * Complex64::new(0.0, 2.0 * k * z).exp()).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 935e-9;

    #[test]
    fn bare_interface_matches_fresnel() {
        let r = reflection_coefficient(&[], 1.0, 1.45, LAMBDA).unwrap();
        let fresnel = (1.0 - 1.45) / (1.0 + 1.45);
        assert!((r.re - fresnel).abs() < 1e-14);
        assert!(r.im.abs() < 1e-14);
    }

    #[test]
    fn half_wave_layer_is_transparent() {
        // a half-wave layer leaves the underlying reflection unchanged
        let n = 2.0;
        let layer = Layer { thickness: LAMBDA / (2.0 * n), index: n };
        let r = reflection_coefficient(&[layer], 1.0, 1.45, LAMBDA).unwrap();
        let bare = reflection_coefficient(&[], 1.0, 1.45, LAMBDA).unwrap();
        assert!((r - bare).norm() < 1e-12);

        // while a quarter-wave layer modifies it maximally: r = (1 - n^2/n_s)/(1 + n^2/n_s)
        let quarter = Layer { thickness: LAMBDA / (4.0 * n), index: n };
        let rq = reflection_coefficient(&[quarter], 1.0, 1.45, LAMBDA).unwrap();
        let expect = (1.0 - n * n / 1.45) / (1.0 + n * n / 1.45);
        assert!((rq.re - expect).abs() < 1e-12, "{rq} vs {expect}");
        assert!(rq.im.abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved_for_lossless_stacks() {
        // |r| <= 1 for arbitrary lossless stacks
        for (t1, t2) in [(0.1e-6, 0.3e-6), (0.29e-6, 2.0e-6), (0.6e-6, 1.1e-6)] {
            let layers = [
                Layer { thickness: t1, index: 2.0 },
                Layer { thickness: t2, index: 1.45 },
                Layer { thickness: 0.6e-6, index: 2.0 },
            ];
            let r = reflection_coefficient(&layers, 1.0, 1.0, LAMBDA).unwrap();
            assert!(r.norm() <= 1.0 + 1e-12, "|r| = {}", r.norm());
        }
    }

    #[test]
    fn perfect_mirror_standing_wave_has_quarter_wave_antinode() {
        let r = Complex64::new(-1.0, 0.0);
        let k = 2.0 * PI / LAMBDA;
        // node at the surface
        assert!(standing_wave(r, k, 0.0).abs() < 1e-12);
        // first antinode at z = lambda/4 with fourfold intensity
        let z_max = LAMBDA / 4.0;
        assert!((standing_wave(r, k, z_max) - 4.0).abs() < 1e-12);
        // and it is a maximum
        let eps = 1e-9;
        assert!(standing_wave(r, k, z_max - eps) < 4.0);
        assert!(standing_wave(r, k, z_max + eps) < 4.0);
    }

    #[test]
    fn rejects_invalid_layers() {
        let bad = [Layer { thickness: -1e-7, index: 2.0 }];
        assert!(reflection_coefficient(&bad, 1.0, 1.0, LAMBDA).is_err());
        let absorbing = [Layer { thickness: 1e-7, index: 0.5 }];
        assert!(reflection_coefficient(&absorbing, 1.0, 1.0, LAMBDA).is_err());
        assert!(reflection_coefficient(&[], 1.0, 1.0, -1.0).is_err());
    }
}
