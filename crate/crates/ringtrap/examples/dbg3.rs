// scratch: absolute field normalization check at 25 nm
use ringtrap::cqed::cached_solve;
use ringtrap::domain::{
    convert_polarizability, AtomSpecies, RingGeometry, C_LIGHT, EPS0, HBAR, K_B,
};
use ringtrap::modes::Polarization;

fn main() {
    let spacing = 25e-9;
    let geometry = RingGeometry::paper_baseline();
    let species = AtomSpecies::cesium();
    let (modes_r, eps_r) = cached_solve(&geometry, 935.3e-9, spacing).unwrap();
    let mode = modes_r.iter().find(|m| m.polarization == Polarization::TM).unwrap();

    // normalization integral 2 eps0 L int eps |E|^2 dA vs hbar omega
    let g = &mode.e_rho;
    let (dr, dz) = (g.rho[1] - g.rho[0], g.z[1] - g.z[0]);
    let mut integral = 0.0;
    for i in 0..g.rho.len() {
        for k in 0..g.z.len() {
            let e2 = mode.e_rho.at(i, k).powi(2)
                + mode.e_phi_im.at(i, k).powi(2)
                + mode.e_z.at(i, k).powi(2);
            integral += eps_r.at(i, k) * e2 * dr * dz;
        }
    }
    let lhs = 2.0 * EPS0 * geometry.circumference() * integral;
    let rhs = HBAR * mode.omega;
    println!("normalization lhs/rhs = {:.6}", lhs / rhs);
    println!("int eps|E|^2 dA = {:.4e} V^2 (expect {:.4e})", integral,
        rhs / (2.0 * EPS0 * geometry.circumference()));

    // field at the atom position (R, 100 nm)
    let e2_atom = mode.intensity(geometry.radius, 100e-9).unwrap();
    println!("|E(atom)|^2 per photon = {:.4e} (V/m)^2", e2_atom);
    let alpha = convert_polarizability(3033.0);
    let u_red = alpha * 2.4e5 * e2_atom;
    println!("U_red(atom) = {:.2} uK", u_red / K_B * 1e6);
    println!("lambda check {:.1} nm", 2.0 * std::f64::consts::PI * C_LIGHT / mode.omega * 1e9);
    let _ = species;
}
