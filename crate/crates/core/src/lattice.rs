//! The momentum lattice `2*pi*Z^3` organized by radial shells.
//!
//! Every sum the verification needs is radial, so it reduces to
//! `sum_n r3(n) * h(2*pi*sqrt(n))` where `r3(n)` counts integer triples with
//! `k1^2 + k2^2 + k3^2 = n`.  Shells are enumerated once by walking ordered
//! triples `k1 >= k2 >= k3 >= 0` and weighting each by its sign/permutation
//! orbit, which is exact and needs no number theory.

use crate::{Error, Result};
use rayon::prelude::*;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Compensated (Kahan) accumulator; shell sums mix magnitudes across many
/// orders.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }

    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut k = Self::new();
        for v in iter {
            k.add(v);
        }
        k.value()
    }
}

/// True iff `n` is a sum of three squares (Legendre: not of form 4^a(8b+7)).
pub fn is_sum_of_three_squares(mut n: u64) -> bool {
    if n == 0 {
        return true;
    }
    while n % 4 == 0 {
        n /= 4;
    }
    n % 8 != 7
}

/// Shell multiplicities `r3(n)` for `0 <= n <= max_n`, plus one lattice
/// representative per occupied shell.
#[derive(Debug, Clone)]
pub struct ShellTable {
    pub max_n: usize,
    pub multiplicities: Vec<u32>,
    representatives: Vec<[i16; 3]>,
}

impl ShellTable {
    pub fn r3(&self, n: usize) -> u32 {
        self.multiplicities[n]
    }

    /// `|p|` for shell `n` on the unit torus lattice.
    pub fn radius(&self, n: usize) -> f64 {
        TWO_PI * (n as f64).sqrt()
    }

    /// A lattice point with `|k|^2 = n`, if the shell is occupied.
    pub fn representative(&self, n: usize) -> Option<[i16; 3]> {
        let r = self.representatives[n];
        if n > 0 && r == [0, 0, 0] {
            None
        } else {
            Some(r)
        }
    }

    /// Number of integer points with `|k|^2 <= m` (ball count).
    pub fn points_in_ball(&self, m: usize) -> u64 {
        self.multiplicities[..=m.min(self.max_n)].iter().map(|&x| x as u64).sum()
    }
}

/// Exact multiplicities by ordered-triple orbit counting, `O(max_n^{3/2})`.
pub fn enumerate_shells(max_n: usize) -> ShellTable {
    let mut mult = vec![0u32; max_n + 1];
    let mut reps = vec![[0i16; 3]; max_n + 1];
    let k_max = (max_n as f64).sqrt() as i64 + 1;
    for k1 in 0..=k_max {
        let n1 = (k1 * k1) as usize;
        if n1 > max_n {
            break;
        }
        for k2 in 0..=k1 {
            let n2 = n1 + (k2 * k2) as usize;
            if n2 > max_n {
                break;
            }
            for k3 in 0..=k2 {
                let n = n2 + (k3 * k3) as usize;
                if n > max_n {
                    break;
                }
                // permutations of the multiset {k1, k2, k3}
                let perms = if k1 == k2 && k2 == k3 {
                    1
                } else if k1 == k2 || k2 == k3 {
                    3
                } else {
                    6
                };
                let signs = 1u32 << [k1, k2, k3].iter().filter(|&&k| k != 0).count();
                if mult[n] == 0 {
                    reps[n] = [k1 as i16, k2 as i16, k3 as i16];
                }
                mult[n] += perms * signs;
            }
        }
    }
    ShellTable { max_n, multiplicities: mult, representatives: reps }
}

/// Analytic tail attached to a truncated radial sum.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TailEstimate {
    pub cutoff_norm: f64,
    pub tail_bound: f64,
    pub decay_exponent_used: f64,
}

/// Decay model `|summand(p)| <= amplitude * |p|^{-exponent}` past the cutoff.
#[derive(Debug, Clone, Copy)]
pub struct TailModel {
    pub amplitude: f64,
    pub exponent: f64,
}

/// Tail-corrected radial sum `sum_{n <= max_n} r3(n) h(2 pi sqrt n)`.
///
/// The shell values are computed in parallel but reduced in shell order with
/// compensated summation, so the result is independent of the thread count.
/// The optional tail model produces the integral estimate
/// `c int_{|p| > P} |p|^{-s} d^3p / (2 pi)^3` with `P` at the truncation
/// midpoint `2 pi sqrt(max_n + 1/2)`.
pub fn radial_lattice_sum<F>(
    summand: F,
    shells: &ShellTable,
    tail: Option<TailModel>,
) -> Result<(f64, TailEstimate)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let terms: Vec<f64> = (0..=shells.max_n)
        .into_par_iter()
        .map(|n| {
            let m = shells.multiplicities[n];
            if m == 0 {
                0.0
            } else {
                m as f64 * summand(shells.radius(n))
            }
        })
        .collect();
    let sum = KahanSum::sum_iter(terms);

    let cutoff = TWO_PI * (shells.max_n as f64 + 0.5).sqrt();
    let est = match tail {
        None => TailEstimate { cutoff_norm: cutoff, tail_bound: 0.0, decay_exponent_used: 0.0 },
        Some(TailModel { amplitude, exponent }) => {
            if exponent <= 3.0 {
                return Err(Error::Divergence(format!(
                    "tail exponent {exponent} <= 3, lattice tail diverges"
                )));
            }
            let s = exponent;
            let tail_bound =
                amplitude.abs() / (2.0 * std::f64::consts::PI.powi(2) * (s - 3.0) * cutoff.powf(s - 3.0));
            TailEstimate { cutoff_norm: cutoff, tail_bound, decay_exponent_used: s }
        }
    };
    Ok((sum, est))
}

/// All lattice points with `|k|^2 <= n_ball` as flat arrays (point, shell).
/// Shared by the convolution engine; the lattice itself is N-independent.
#[derive(Debug, Clone)]
pub struct LatticeBall {
    pub n_ball: usize,
    pub pts: Vec<[i32; 3]>,
    pub shell: Vec<u32>,
}

pub fn enumerate_ball(n_ball: usize) -> LatticeBall {
    let k_max = (n_ball as f64).sqrt() as i32 + 1;
    let mut pts = Vec::new();
    let mut shell = Vec::new();
    for k1 in -k_max..=k_max {
        for k2 in -k_max..=k_max {
            let n12 = k1 * k1 + k2 * k2;
            if n12 as usize > n_ball {
                continue;
            }
            for k3 in -k_max..=k_max {
                let n = (n12 + k3 * k3) as usize;
                if n <= n_ball {
                    pts.push([k1, k2, k3]);
                    shell.push(n as u32);
                }
            }
        }
    }
    LatticeBall { n_ball, pts, shell }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_shells_by_hand() {
        let t = enumerate_shells(3);
        assert_eq!(t.r3(0), 1);
        assert_eq!(t.r3(1), 6);
        assert_eq!(t.r3(2), 12);
        assert_eq!(t.r3(3), 8);
    }

    #[test]
    fn shell_seven_is_empty() {
        let t = enumerate_shells(10);
        assert_eq!(t.r3(7), 0);
        assert!(!is_sum_of_three_squares(7));
    }

    /// Brute-force oracle: triple loop over |k_i| <= 20, trusted before the
    /// orbit-counting enumeration.
    #[test]
    fn multiplicities_match_brute_force_to_400() {
        let max_n = 400usize;
        let mut brute = vec![0u32; max_n + 1];
        for k1 in -20i64..=20 {
            for k2 in -20i64..=20 {
                for k3 in -20i64..=20 {
                    let n = (k1 * k1 + k2 * k2 + k3 * k3) as usize;
                    if n <= max_n {
                        brute[n] += 1;
                    }
                }
            }
        }
        let t = enumerate_shells(max_n);
        assert_eq!(t.multiplicities, brute);
        for n in 0..=max_n {
            assert_eq!(t.r3(n) == 0, !is_sum_of_three_squares(n as u64), "n = {n}");
            if t.r3(n) > 0 {
                let r = t.representative(n).unwrap();
                let m = r[0] as i64 * r[0] as i64
                    + r[1] as i64 * r[1] as i64
                    + r[2] as i64 * r[2] as i64;
                assert_eq!(m as usize, n);
            }
        }
    }

    #[test]
    fn ball_count_at_100_is_4169() {
        // brute-force triple loop over |k_i| <= 10 gives 4169
        let t = enumerate_shells(100);
        assert_eq!(t.points_in_ball(100), 4169);
    }

    #[test]
    fn indicator_sum_is_27() {
        let t = enumerate_shells(8);
        let (s, est) =
            radial_lattice_sum(|p| if p <= TWO_PI * 3.0f64.sqrt() + 1e-9 { 1.0 } else { 0.0 }, &t, None)
                .unwrap();
        assert_eq!(s, 27.0);
        assert_eq!(est.tail_bound, 0.0);
    }

    #[test]
    fn inverse_quartic_two_truncations_within_tail_bound() {
        let shells_lo = enumerate_shells(3600);
        let shells_hi = enumerate_shells(14400);
        let summand = |p: f64| if p > 0.0 { p.powi(-4) } else { 0.0 };
        let tail = TailModel { amplitude: 1.0, exponent: 4.0 };
        let (lo, est_lo) = radial_lattice_sum(summand, &shells_lo, Some(tail)).unwrap();
        let (hi, _) = radial_lattice_sum(summand, &shells_hi, Some(tail)).unwrap();
        assert!((hi - lo).abs() <= est_lo.tail_bound * 1.02, "{} vs {}", hi - lo, est_lo.tail_bound);
    }

    #[test]
    fn inverse_quartic_richardson_stability() {
        // sum + tail stable under doubling the truncation
        let summand = |p: f64| if p > 0.0 { p.powi(-4) } else { 0.0 };
        let value = |max_n: usize| {
            let t = enumerate_shells(max_n);
            let (s, est) =
                radial_lattice_sum(summand, &t, Some(TailModel { amplitude: 1.0, exponent: 4.0 }))
                    .unwrap();
            s + est.tail_bound
        };
        let a = value(40_000);
        let b = value(160_000);
        assert!((a - b).abs() / b.abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn shallow_tail_exponent_errors() {
        let t = enumerate_shells(16);
        let r = radial_lattice_sum(|_| 1.0, &t, Some(TailModel { amplitude: 1.0, exponent: 2.5 }));
        assert!(matches!(r, Err(Error::Divergence(_))));
    }

    #[test]
    fn kahan_absorbs_small_terms_into_large_totals() {
        // 1e8 + 1e8 * 1e-8: naive summation loses the small terms entirely
        let mut k = KahanSum::new();
        k.add(1e8);
        for _ in 0..100_000_000u32 {
            k.add(1e-8);
        }
        assert!((k.value() - (1e8 + 1.0)).abs() < 1e-6, "{}", k.value());
    }

    #[test]
    fn ball_enumeration_matches_shell_counts() {
        let ball = enumerate_ball(64);
        let t = enumerate_shells(64);
        let mut counts = vec![0u32; 65];
        for &s in &ball.shell {
            counts[s as usize] += 1;
        }
        assert_eq!(counts, t.multiplicities);
    }
}
