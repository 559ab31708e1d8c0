// scratch: racetrack trap anchor check
use ringtrap::cqed::cached_solve;
use ringtrap::domain::{AtomSpecies, MembraneStack, RingGeometry, K_B};
use ringtrap::modes::Polarization;
use ringtrap::resonator::{
    drive_response, elimination_scheme, DriveTone, EliminationGoal, ResonatorParams,
};
use ringtrap::trap::{analyze_trap, lattice_constant, required_power, two_color_trap, ColorDrive};
use std::f64::consts::PI;

fn ghz(v: f64) -> f64 {
    2.0 * PI * v * 1e9
}

fn main() {
    let spacing: f64 =
        std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(15e-9);
    let straight: f64 =
        std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(6.9e-6);
    let geometry = RingGeometry::racetrack(
        8e-6,
        straight,
        1.1e-6,
        0.29e-6,
        2.0,
        MembraneStack::suspended_membrane(2.0e-6, 0.55e-6),
    )
    .unwrap();
    println!("circumference L = {:.1} um", geometry.circumference() * 1e6);
    let species = AtomSpecies::cesium();
    let t0 = std::time::Instant::now();
    let (modes_r, eps_r) = cached_solve(&geometry, 935.3e-9, spacing).unwrap();
    let (modes_b, eps_b) = cached_solve(&geometry, 793.5e-9, spacing).unwrap();
    println!("solves took {:?}", t0.elapsed());
    let mode_r = modes_r.iter().find(|m| m.polarization == Polarization::TM).unwrap();
    let mode_b = modes_b.iter().find(|m| m.polarization == Polarization::TM).unwrap();
    println!("red n_eff={:.4}, blue n_eff={:.4}", mode_r.n_eff, mode_b.n_eff);

    let params_r = ResonatorParams::new(mode_r.omega, ghz(0.5), ghz(0.5), ghz(0.6), 0.0).unwrap();
    let params_b = ResonatorParams::new(mode_b.omega, ghz(0.5), ghz(0.5), ghz(0.6), 0.0).unwrap();

    let plan_r =
        elimination_scheme(&params_r, EliminationGoal::ZeroVectorShift, 1e-6, ghz(0.05)).unwrap();
    let p_r = required_power(4.2e4, &params_r, plan_r.tones[0].omega).unwrap();
    let tone_r = DriveTone { power: p_r, ..plan_r.tones[0] };
    let resp_r = drive_response(&params_r, &tone_r).unwrap();
    println!("P_r = {:.1} uW (target 56), I_r = {:.3e}", p_r * 1e6, resp_r.i_buildup);

    let plan_b = elimination_scheme(&params_b, EliminationGoal::Both, 1e-6, ghz(0.05)).unwrap();
    let mut resp_b = Vec::new();
    let mut p_b_total = 0.0;
    for tone in &plan_b.tones {
        let p = required_power(4.0e4, &params_b, tone.omega).unwrap();
        p_b_total += p;
        resp_b.push(drive_response(&params_b, &DriveTone { power: p, ..*tone }).unwrap());
    }
    println!("P_b total = {:.1} uW (target 110)", p_b_total * 1e6);

    let d = lattice_constant(mode_r);
    println!("lattice constant d = {:.1} nm", d * 1e9);
    let n_l = 10usize;
    let l_samples: Vec<f64> =
        (-(n_l as i64)..=(n_l as i64)).map(|n| n as f64 * d / (2.0 * n_l as f64)).collect();
    let red = ColorDrive { mode: mode_r, eps_map: &eps_r, responses: vec![resp_r] };
    let blue = ColorDrive { mode: mode_b, eps_map: &eps_b, responses: resp_b };
    let u = two_color_trap(&red, &blue, &species, &geometry, &l_samples).unwrap();
    match analyze_trap(&u, &species).unwrap() {
        ringtrap::trap::TrapAnalysis::Trapped(rep) => {
            println!(
                "center: (rho_t - R, l_t, z_t) = ({:.1}, {:.1}, {:.1}) nm [target (0, -, 100)]",
                (rep.center.0 - geometry.radius) * 1e9,
                rep.center.1 * 1e9,
                rep.center.2 * 1e9
            );
            println!("depth = {:.1} uK [target ~130]", rep.depth / K_B * 1e6);
            println!(
                "saddle: ({:.1}, {:.1}) nm [target (+-275, 67)]",
                (rep.saddle.0 - geometry.radius) * 1e9,
                rep.saddle.1 * 1e9
            );
            println!(
                "freqs/2pi = ({:.0}, {:.0}, {:.0}) kHz [targets 80, 786, 681]",
                rep.frequencies[0] / (2.0 * PI) * 1e-3,
                rep.frequencies[1] / (2.0 * PI) * 1e-3,
                rep.frequencies[2] / (2.0 * PI) * 1e-3
            );
            println!("tilt = {:.2} deg", rep.tilt_angle.to_degrees());
        }
        ringtrap::trap::TrapAnalysis::Open { escape } => println!("OPEN: {escape}"),
    }
}
