//! Zero-energy scattering for a radial, compactly supported, repulsive
//! potential.
//!
//! The radial substitution `u = r f` turns `-lap f + V f / 2 = 0` into
//! `u'' = (V/2) u` with `u(0) = 0`.  Outside the support `u` is exactly
//! linear, `u(r) = alpha (r - a)`, which is where the scattering length is
//! read off; the solution is normalized so that `f -> 1 - a/r` there.

use crate::fourier::{integrate_gl, radial_fourier, XiTable};
use crate::{Error, Result};
use serde::Serialize;

/// Radial interaction with compact support, `V >= 0`.
#[derive(Debug, Clone, Serialize)]
pub enum RadialPotential {
    /// `V(r) = v0` for `r <= radius`, zero beyond.
    SquareBarrier { v0: f64, radius: f64 },
    /// `V(r) = v0 exp(-r^2 / (2 width^2))` truncated at `radius`.
    GaussianTruncated { v0: f64, width: f64, radius: f64 },
    /// Piecewise-linear table `(r_i, v_i)`; first-order accurate.
    Tabulated { r: Vec<f64>, v: Vec<f64> },
    /// The free case, `V = 0` (scattering length 0, `f = 1`).
    Zero,
}

impl RadialPotential {
    pub fn support_radius(&self) -> f64 {
        match self {
            RadialPotential::SquareBarrier { radius, .. } => *radius,
            RadialPotential::GaussianTruncated { radius, .. } => *radius,
            RadialPotential::Tabulated { r, .. } => r.last().copied().unwrap_or(0.0),
            RadialPotential::Zero => 0.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialPotential::SquareBarrier { v0, radius } => {
                if r <= *radius {
                    *v0
                } else {
                    0.0
                }
            }
            RadialPotential::GaussianTruncated { v0, width, radius } => {
                if r <= *radius {
                    v0 * (-(r * r) / (2.0 * width * width)).exp()
                } else {
                    0.0
                }
            }
            RadialPotential::Tabulated { r: rs, v } => {
                if rs.is_empty() || r > *rs.last().unwrap() {
                    return 0.0;
                }
                match rs.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
                    Ok(i) => v[i],
                    Err(0) => v[0],
                    Err(i) => {
                        let t = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
                        v[i - 1] * (1.0 - t) + v[i] * t
                    }
                }
            }
            RadialPotential::Zero => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RadialPotential::Zero => true,
            RadialPotential::SquareBarrier { v0, .. } => *v0 == 0.0,
            RadialPotential::GaussianTruncated { v0, .. } => *v0 == 0.0,
            RadialPotential::Tabulated { v, .. } => v.iter().all(|&x| x == 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPotential(m));
        match self {
            RadialPotential::SquareBarrier { v0, radius }
            | RadialPotential::GaussianTruncated { v0, radius, .. } => {
                if *v0 < 0.0 {
                    return bad(format!("V0 = {v0} < 0 (potential must be repulsive)"));
                }
                if *radius <= 0.0 && *v0 != 0.0 {
                    return bad(format!("support radius {radius} <= 0"));
                }
            }
            RadialPotential::Tabulated { r, v } => {
                if r.len() != v.len() || r.len() < 2 {
                    return bad("tabulated potential needs >= 2 matching samples".into());
                }
                if r.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated radii must be strictly ascending".into());
                }
                if let Some(x) = v.iter().find(|&&x| x < 0.0) {
                    return bad(format!("negative potential sample {x}"));
                }
            }
            RadialPotential::Zero => {}
        }
        Ok(())
    }
}

/// Uniform radial grid for the solver.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub step: f64,
    pub extent: f64,
}

impl GridSpec {
    /// Extent twice the support; exterior handled analytically anyway.
    pub fn for_potential(pot: &RadialPotential) -> Self {
        let support = pot.support_radius().max(1.0);
        GridSpec { step: support / 8192.0, extent: 2.0 * support }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverMeta {
    pub step: f64,
    pub method: &'static str,
    pub matched_at: f64,
}

/// Radial profile `f`, `w = 1 - f`, and the scattering length.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringSolution {
    pub r_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    pub w_values: Vec<f64>,
    pub scattering_length: f64,
    pub meta: SolverMeta,
}

impl ScatteringSolution {
    /// `f(r)` by cubic interpolation on the uniform grid, `1 - a/r` beyond.
    pub fn f_at(&self, r: f64) -> f64 {
        let h = self.meta.step;
        let n = self.f_values.len();
        let t = r / h;
        let i = t as usize;
        if i + 2 >= n {
            return 1.0 - self.scattering_length / r.max(h);
        }
        let i0 = i.max(1) - 1;
        let s = t - i0 as f64;
        let v = &self.f_values[i0..i0 + 4];
        let c0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let c1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let c2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let c3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        c0 * v[0] + c1 * v[1] + c2 * v[2] + c3 * v[3]
    }
}

/// Numerov march for `u'' = g u`, `g = V/2`, normalized to the exterior
/// form `u = r - a`.
pub fn solve_zero_energy(pot: &RadialPotential, grid: GridSpec) -> Result<ScatteringSolution> {
    pot.validate()?;
    let support = pot.support_radius();
    if grid.extent <= support {
        return Err(Error::Solver(format!(
            "extent {} must exceed the support radius {}",
            grid.extent, support
        )));
    }
    if pot.is_zero() {
        // f = 1 identically, a = 0.
        let n = (grid.extent / grid.step).ceil() as usize;
        let r_grid: Vec<f64> = (0..=n).map(|i| i as f64 * grid.step).collect();
        let f_values = vec![1.0; n + 1];
        let w_values = vec![0.0; n + 1];
        return Ok(ScatteringSolution {
            r_grid,
            f_values,
            w_values,
            scattering_length: 0.0,
            meta: SolverMeta { step: grid.step, method: "numerov", matched_at: 0.0 },
        });
    }

    if !(grid.step > 0.0) || grid.step > support / 16.0 {
        return Err(Error::Solver(format!(
            "step {} too coarse for support {support}",
            grid.step
        )));
    }
    // Snap the grid so the support edge is a node: the interior march then
    // never straddles the boundary jump of V and keeps its O(h^4) accuracy.
    let n_in = (support / grid.step).round().max(32.0) as usize;
    let h = support / n_in as f64;
    let n_total = (grid.extent / h).ceil() as usize;

    let g = |r: f64| 0.5 * pot.eval(r);
    let h2 = h * h;
    let w_of = |r: f64| 1.0 - h2 / 12.0 * g(r);
    // Summed-form Numerov on y = (1 - h^2 g / 12) u with compensated
    // accumulators; the plain three-term recurrence loses ~n^2 eps of
    // relative accuracy to roundoff on fine grids.
    let mut u = Vec::with_capacity(n_in + 1);
    u.push(0.0);
    // series start u(h) = h (1 + g(0) h^2 / 6) keeps the launch error at O(h^5)
    u.push(h * (1.0 + g(0.0) * h2 / 6.0));
    let mut y = w_of(h) * u[1];
    let mut y_comp = 0.0;
    let mut slope = y; // y_1 - y_0
    let mut slope_comp = 0.0;
    for i in 1..n_in {
        let r_0 = i as f64 * h;
        let r_p = (i + 1) as f64 * h;
        // slope += h^2 g u   (Kahan)
        let dy = h2 * g(r_0) * u[i] - slope_comp;
        let t = slope + dy;
        slope_comp = (t - slope) - dy;
        slope = t;
        // y += slope         (Kahan)
        let dz = slope - y_comp;
        let t = y + dz;
        y_comp = (t - y) - dz;
        y = t;
        let next = y / w_of(r_p);
        if !next.is_finite() {
            return Err(Error::Solver(format!("Numerov blew up at r = {r_p}")));
        }
        u.push(next);
    }

    // u'(R) from the left by a one-sided 5-point stencil (all interior
    // nodes); outside, u = alpha (r - a) exactly.
    let m = n_in;
    let alpha = (25.0 * u[m] - 48.0 * u[m - 1] + 36.0 * u[m - 2] - 16.0 * u[m - 3]
        + 3.0 * u[m - 4])
        / (12.0 * h);
    if alpha <= 0.0 {
        return Err(Error::Solver(
            "exterior slope not positive; potential outside the repulsive regime".into(),
        ));
    }
    let a = support - u[m] / alpha;

    let mut r_grid = Vec::with_capacity(n_total + 1);
    let mut f_values = Vec::with_capacity(n_total + 1);
    for i in 0..=n_total {
        let r = i as f64 * h;
        r_grid.push(r);
        let f = if i == 0 {
            1.0 / alpha
        } else if i <= n_in {
            u[i] / (alpha * r)
        } else {
            1.0 - a / r
        };
        f_values.push(f);
    }
    let w_values: Vec<f64> = f_values.iter().map(|f| 1.0 - f).collect();

    let sol = ScatteringSolution {
        r_grid,
        f_values,
        w_values,
        scattering_length: a,
        meta: SolverMeta { step: h, method: "numerov", matched_at: support },
    };
    // paper hypothesis f: R^3 -> [0,1]
    let tol = 1e-9;
    if sol.f_values.iter().any(|&f| !(-tol..=1.0 + tol).contains(&f)) {
        return Err(Error::Solver("profile f left [0, 1]".into()));
    }
    Ok(sol)
}

/// Relative residual of `8 pi a = int V f` plus the strict inequality
/// `8 pi a < Vhat(0)` for nonzero potentials.
pub fn check_scattering_length(sol: &ScatteringSolution, pot: &RadialPotential) -> Result<f64> {
    if pot.is_zero() {
        return Ok(0.0);
    }
    let support = pot.support_radius();
    let eight_pi_a = 8.0 * std::f64::consts::PI * sol.scattering_length;
    let int_vf = 4.0
        * std::f64::consts::PI
        * integrate_gl(|r| r * r * pot.eval(r) * sol.f_at(r), 0.0, support, 512);
    let vhat0 = 4.0 * std::f64::consts::PI * integrate_gl(|r| r * r * pot.eval(r), 0.0, support, 512);
    let residual = (eight_pi_a - int_vf).abs() / eight_pi_a;
    if !(eight_pi_a < vhat0) {
        return Err(Error::Domain(format!(
            "8 pi a = {eight_pi_a} not strictly below Vhat(0) = {vhat0}"
        )));
    }
    Ok(residual)
}

/// Potential, scattering solution, and the dense transform tables for
/// `V`, `Vf` and `Vw = V - Vf` on a shared `xi` grid.
#[derive(Debug, Clone)]
pub struct ScatteringTables {
    pub potential: RadialPotential,
    pub solution: ScatteringSolution,
    pub vhat: XiTable,
    pub vfhat: XiTable,
    pub vwhat: XiTable,
}

impl ScatteringTables {
    pub fn build(pot: &RadialPotential, xi_max: f64) -> Result<Self> {
        let sol = solve_zero_energy(pot, GridSpec::for_potential(pot))?;
        Ok(Self::from_solution(pot.clone(), sol, xi_max))
    }

    pub fn from_solution(pot: RadialPotential, sol: ScatteringSolution, xi_max: f64) -> Self {
        let support = pot.support_radius();
        let step = 0.005;
        let vhat = XiTable::from_fn("V", |xi| radial_fourier(|r| pot.eval(r), support, xi), xi_max, step);
        let vfhat = XiTable::from_fn(
            "Vf",
            |xi| radial_fourier(|r| pot.eval(r) * sol.f_at(r), support, xi),
            xi_max,
            step,
        );
        let vwhat = vhat.nodewise_sub(&vfhat, "Vw");
        ScatteringTables { potential: pot, solution: sol, vhat, vfhat, vwhat }
    }

    /// Replace the `Vf` table by the constant `8 pi a` (and `Vw` by
    /// `V - 8 pi a`); degenerates the energy sum `S` into `S_a`.
    pub fn with_constant_vf(&self) -> Self {
        let mut out = self.clone();
        let c = self.eight_pi_a();
        out.vfhat = XiTable {
            id: "Vf=8pia".into(),
            step: self.vfhat.step,
            values: vec![c; self.vfhat.values.len()],
            value_at_zero: c,
        };
        out.vwhat = out.vhat.nodewise_sub(&out.vfhat, "Vw");
        out
    }

    pub fn scattering_length(&self) -> f64 {
        self.solution.scattering_length
    }

    pub fn eight_pi_a(&self) -> f64 {
        8.0 * std::f64::consts::PI * self.solution.scattering_length
    }

    /// Direct (untabulated) transform of `V f`, for accuracy spot checks.
    pub fn vfhat_direct(&self, xi: f64) -> f64 {
        let support = self.potential.support_radius();
        radial_fourier(|r| self.potential.eval(r) * self.solution.f_at(r), support, xi)
    }
}
