use lhylab_core::lattice::*;
use lhylab_core::potential::*;

fn main() {
    // (1) IR constant: lim_R [ sum_{0<|k|<=R} 1/k^2 - 4 pi R ]
    for max_n in [2_500usize, 10_000, 40_000, 160_000, 640_000] {
        let t = enumerate_shells(max_n);
        let mut s = KahanSum::new();
        for n in 1..=max_n {
            s.add(t.r3(n) as f64 / n as f64);
        }
        let r = (max_n as f64).sqrt();
        println!("R = {r:8.1}  I(R) = {:+.6}", s.value() - 4.0 * std::f64::consts::PI * r);
    }

    // (2) S_a at kappa = 0.5 for the square barrier (V0=2, R=1)
    let pot = RadialPotential::SquareBarrier { v0: 2.0, radius: 1.0 };
    let tabs = ScatteringTables::build(&pot, 4.0).unwrap();
    let a = tabs.scattering_length();
    let epa = tabs.eight_pi_a();
    let lhy_coeff = 512.0 * std::f64::consts::PI.sqrt() / 15.0;
    println!("a = {a:.12}, 8pi a = {epa:.8}, lhy coeff = {lhy_coeff:.6}");
    let kappa = 0.5;
    for log_n in [3.0f64, 3.5, 4.0, 4.5, 5.0] {
        let n_part = 10f64.powf(log_n);
        let s_a = n_part.powf(kappa) * epa; // s = 8 pi a N^kappa
        // summand F(p) = 0.5 (sqrt(p^4 + 2 p^2 s) - p^2 - s + s^2/(2p^2))
        let f = |p: f64| {
            if p == 0.0 { return 0.0; }
            let p2 = p * p;
            let t = s_a / p2;
            if t < 1e-3 {
                // series: p^2 [ t^3/2 - 5 t^4/8 + 7 t^5/8 - 21 t^6/16 ]
                0.5 * p2 * (t * t * t * (0.5 - 0.625 * t + 0.875 * t * t - 1.3125 * t * t * t)) * 2.0 / 2.0
            } else {
                0.5 * ((p2 * p2 + 2.0 * p2 * s_a).sqrt() - p2 - s_a + s_a * s_a / (2.0 * p2))
            }
        };
        // truncation: |p| <= max(20 sqrt(8 pi a) N^{kappa/2}, 2pi*40)
        let p_max = (20.0 * epa.sqrt() * n_part.powf(kappa / 2.0)).max(TWO_PI * 40.0);
        let max_n = ((p_max / TWO_PI).powi(2)).ceil() as usize;
        let shells = enumerate_shells(max_n);
        let tail = TailModel { amplitude: s_a.powi(3) / 2.0, exponent: 4.0 };
        let (sum, est) = radial_lattice_sum(f, &shells, Some(tail)).unwrap();
        let total = sum + est.tail_bound;
        let norm = a.powf(2.5) * n_part.powf(2.5 * kappa);
        println!(
            "N = 10^{log_n:.1}  shells = {max_n:7}  S_a = {total:.6e}  ratio = {:.4}  dev = {:+.3}%",
            total / norm,
            (total / norm / lhy_coeff - 1.0) * 100.0
        );
    }
}
