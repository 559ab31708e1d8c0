// scratch: two-color trap anchor check
use ringtrap::cqed::cached_solve;
use ringtrap::domain::{AtomSpecies, RingGeometry, K_B};
use ringtrap::modes::Polarization;
use ringtrap::resonator::{
    drive_response, elimination_scheme, DriveTone, EliminationGoal, Port, ResonatorParams,
};
use ringtrap::trap::{
    analyze_trap, lattice_constant, required_power, two_color_trap, ColorDrive,
};
use std::f64::consts::PI;

fn ghz(v: f64) -> f64 {
    2.0 * PI * v * 1e9
}

fn main() {
    let spacing: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(25e-9);
    let geometry = RingGeometry::paper_baseline();
    let species = AtomSpecies::cesium();
    let t0 = std::time::Instant::now();
    let (modes_r, eps_r) = cached_solve(&geometry, 935.3e-9, spacing).unwrap();
    let (modes_b, eps_b) = cached_solve(&geometry, 793.5e-9, spacing).unwrap();
    println!("solves took {:?}", t0.elapsed());
    for m in modes_r.iter() {
        println!("red  mode {:?} n_eff={:.4}", m.polarization, m.n_eff);
    }
    for m in modes_b.iter() {
        println!("blue mode {:?} n_eff={:.4}", m.polarization, m.n_eff);
    }
    let mode_r = modes_r.iter().find(|m| m.polarization == Polarization::TM).unwrap();
    let mode_b = modes_b.iter().find(|m| m.polarization == Polarization::TM).unwrap();

    let params_r = ResonatorParams::new(mode_r.omega, ghz(0.5), ghz(0.5), ghz(0.6), 0.0).unwrap();
    let params_b = ResonatorParams::new(mode_b.omega, ghz(0.5), ghz(0.5), ghz(0.6), 0.0).unwrap();

    // red: single tone at |alpha| = beta
    let plan_r = elimination_scheme(&params_r, EliminationGoal::ZeroVectorShift, 1e-6, ghz(0.05))
        .unwrap();
    let p_r = required_power(2.4e5, &params_r, plan_r.tones[0].omega).unwrap();
    let tone_r = DriveTone { power: p_r, ..plan_r.tones[0] };
    let resp_r = drive_response(&params_r, &tone_r).unwrap();
    println!("P_r = {:.1} uW, I_r = {:.3e}, V = {:.3}", p_r * 1e6, resp_r.i_buildup, resp_r.visibility_v);

    // blue: symmetric dual tones
    let plan_b = elimination_scheme(&params_b, EliminationGoal::Both, 1e-6, ghz(0.05)).unwrap();
    let mut resp_b = Vec::new();
    let mut p_b_total = 0.0;
    for tone in &plan_b.tones {
        let p = required_power(2.7e5, &params_b, tone.omega).unwrap();
        p_b_total += p;
        resp_b.push(drive_response(&params_b, &DriveTone { power: p, ..*tone }).unwrap());
    }
    println!("P_b total = {:.1} uW, I_b = {:.3e}", p_b_total * 1e6,
        resp_b.iter().map(|r| r.i_buildup).sum::<f64>());

    let d = lattice_constant(mode_r);
    println!("lattice constant d = {:.1} nm", d * 1e9);

    let n_l = 10usize;
    let l_samples: Vec<f64> = (-(n_l as i64)..=(n_l as i64)).map(|n| n as f64 * d / (2.0 * n_l as f64)).collect();
    let red = ColorDrive { mode: mode_r, eps_map: &eps_r, responses: vec![resp_r] };
    let blue = ColorDrive { mode: mode_b, eps_map: &eps_b, responses: resp_b };
    let t1 = std::time::Instant::now();
    let u = two_color_trap(&red, &blue, &species, &geometry, &l_samples).unwrap();
    println!("trap grid {}x{}x{} built in {:?}", u.rho.len(), u.l.len(), u.z.len(), t1.elapsed());
    // diagnostics: global argmin and near-surface rows
    {
        let (nr, nl, nz) = (u.rho.len(), u.l.len(), u.z.len());
        let mut best = (f64::INFINITY, 0usize, 0usize, 0usize);
        for i in 0..nr {
            for j in 0..nl {
                for k in 0..nz {
                    let idx = (i * nl + j) * nz + k;
                    if !u.mask[idx] && u.values[idx] < best.0 {
                        best = (u.values[idx], i, j, k);
                    }
                }
            }
        }
        println!(
            "argmin U = {:.1} uK at (rho-R, l, z) = ({:.1}, {:.1}, {:.1}) nm",
            best.0 / K_B * 1e6,
            (u.rho[best.1] - geometry.radius) * 1e9,
            u.l[best.2] * 1e9,
            u.z[best.3] * 1e9
        );
        let j0 = nl / 2;
        for k in 0..nz.min(5) {
            print!("z={:5.1}nm:", u.z[k] * 1e9);
            for i in (0..nr).step_by(4) {
                let idx = (i * nl + j0) * nz + k;
                if u.mask[idx] {
                    print!("   mask ");
                } else {
                    print!(" {:8.0}", u.values[idx] / K_B * 1e6);
                }
            }
            println!();
        }
        print!("rho-R   :");
        for i in (0..nr).step_by(4) {
            print!(" {:8.0}", (u.rho[i] - geometry.radius) * 1e9);
        }
        println!();
    }
    let t2 = std::time::Instant::now();
    match analyze_trap(&u, &species).unwrap() {
        ringtrap::trap::TrapAnalysis::Trapped(rep) => {
            println!("analyze took {:?}", t2.elapsed());
            println!(
                "center: (rho_t - R, l_t, z_t) = ({:.1}, {:.1}, {:.1}) nm",
                (rep.center.0 - geometry.radius) * 1e9,
                rep.center.1 * 1e9,
                rep.center.2 * 1e9
            );
            println!("depth = {:.1} uK", rep.depth / K_B * 1e6);
            println!(
                "saddle: ({:.1}, {:.1}) nm",
                (rep.saddle.0 - geometry.radius) * 1e9,
                rep.saddle.1 * 1e9
            );
            println!(
                "freqs/2pi = ({:.0}, {:.0}, {:.0}) kHz  [targets 175, 1500, 1180]",
                rep.frequencies[0] / (2.0 * PI) * 1e-3,
                rep.frequencies[1] / (2.0 * PI) * 1e-3,
                rep.frequencies[2] / (2.0 * PI) * 1e-3
            );
            println!("tilt = {:.1} deg", rep.tilt_angle.to_degrees());
        }
        ringtrap::trap::TrapAnalysis::Open { escape } => println!("OPEN: {escape}"),
    }
}
