//! Radial 3D Fourier transforms and the quadrature helpers behind them.
//!
//! Every hat symbol in the kernel construction is the transform of a radial,
//! compactly supported function,
//!
//! ```text
//! ghat(xi) = 4*pi * int_0^R r^2 g(r) sin(xi r)/(xi r) dr,
//! ```
//!
//! continuous at `xi = 0` with limit `4*pi int r^2 g`.  Transforms are
//! evaluated with composite Gauss-Legendre panels sized to the oscillation,
//! and cached on a dense `xi` grid (`XiTable`) for the shell loops.

use std::sync::OnceLock;

const GL_N: usize = 16;

/// 16-point Gauss-Legendre rule on [0, 1], built once by Newton iteration
/// on the Legendre recurrence.
fn gl16() -> &'static ([f64; GL_N], [f64; GL_N]) {
    static RULE: OnceLock<([f64; GL_N], [f64; GL_N])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_N;
        let mut xs = [0.0; GL_N];
        let mut ws = [0.0; GL_N];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // P_n(x) and P_{n-1}(x) by recurrence
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            // map from [-1, 1] to [0, 1]
            xs[i] = 0.5 * (1.0 + x);
            ws[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        (xs, ws)
    })
}

/// Composite 16-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (xs, ws) = gl16();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 0..panels {
        let x0 = a + k as f64 * h;
        let mut acc = 0.0;
        for i in 0..GL_N {
            acc += ws[i] * f(x0 + xs[i] * h);
        }
        // Kahan step: panels can span 10+ orders of magnitude.
        let y = acc * h - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// sin(x)/x, continuous at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Panel count that resolves `xi`-oscillation over a support of length `r`.
fn panels_for(xi: f64, support: f64) -> usize {
    let per_wave = (xi.abs() * support / std::f64::consts::PI) as usize;
    (32 + 6 * per_wave).min(20_000)
}

/// Radial 3D Fourier transform of a compactly supported radial `g`.
pub fn radial_fourier<F: Fn(f64) -> f64>(g: F, support: f64, xi: f64) -> f64 {
    if support <= 0.0 {
        return 0.0;
    }
    let n = panels_for(xi, support);
    4.0 * std::f64::consts::PI
        * integrate_gl(|r| r * r * g(r) * sinc(xi * r), 0.0, support, n)
}

/// Dense table of a radial transform on a uniform `xi` grid with cubic
/// (4-point Lagrange) interpolation.  All shell loops evaluate hat functions
/// through this table; `eval` is exact at the nodes and linear in the stored
/// values, so nodewise identities like `Vw = V - Vf` survive interpolation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct XiTable {
    pub id: String,
    pub step: f64,
    pub values: Vec<f64>,
    pub value_at_zero: f64,
}

impl XiTable {
    pub fn from_fn<F: Fn(f64) -> f64 + Sync>(id: &str, f: F, xi_max: f64, step: f64) -> Self {
        use rayon::prelude::*;
        let n = (xi_max / step).ceil() as usize + 4;
        let values: Vec<f64> = (0..=n).into_par_iter().map(|i| f(i as f64 * step)).collect();
        XiTable { id: id.to_string(), step, value_at_zero: values[0], values }
    }

    /// Constant table (used to degenerate `Vf` into `8*pi*a`).
    pub fn constant(id: &str, c: f64, xi_max: f64) -> Self {
        let step = xi_max.max(1.0) / 16.0;
        XiTable { id: id.to_string(), step, values: vec![c; 21], value_at_zero: c }
    }

    pub fn xi_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Cubic interpolation; clamps to the last node beyond the table.
    pub fn eval(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        let t = xi / self.step;
        let n = self.values.len();
        let i = t as usize;
        if i + 2 >= n {
            return *self.values.last().unwrap();
        }
        let i0 = i.max(1) - 1;
        let s = t - i0 as f64;
        let v = &self.values[i0..i0 + 4];
        // 4-point Lagrange on equally spaced nodes 0,1,2,3.
        let c0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let c1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let c2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let c3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        c0 * v[0] + c1 * v[1] + c2 * v[2] + c3 * v[3]
    }

    /// Nodewise difference `self - other`; tables must share the grid.
    pub fn nodewise_sub(&self, other: &XiTable, id: &str) -> XiTable {
        assert_eq!(self.step, other.step);
        assert_eq!(self.values.len(), other.values.len());
        let values: Vec<f64> =
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        XiTable { id: id.to_string(), step: self.step, value_at_zero: values[0], values }
    }
}

/// Cumulative integral `Psi(y) = int_0^y t * f(t) dt` of a tabulated radial
/// transform, used for exact spherical means:
///
/// ```text
/// (1/4pi) avg over the q-sphere of F(|p - q|) = (Psi(p+q) - Psi(|p-q|)) / (2 p q)
/// ```
#[derive(Debug, Clone)]
pub struct CumTable {
    step: f64,
    cum: Vec<f64>,
    table: XiTable,
}

impl CumTable {
    pub fn new(table: &XiTable) -> Self {
        let n = table.values.len();
        let mut cum = Vec::with_capacity(n);
        cum.push(0.0);
        for i in 1..n {
            let a = (i - 1) as f64 * table.step;
            let b = i as f64 * table.step;
            let seg = integrate_gl(|t| t * table.eval(t), a, b, 1);
            cum.push(cum[i - 1] + seg);
        }
        CumTable { step: table.step, cum, table: table.clone() }
    }

    /// `Psi(y)`; clamps at the end of the table.
    pub fn eval(&self, y: f64) -> f64 {
        let y = y.abs();
        let i = ((y / self.step) as usize).min(self.cum.len() - 1);
        let a = i as f64 * self.step;
        if y <= a {
            return self.cum[i];
        }
        self.cum[i] + integrate_gl(|t| t * self.table.eval(t), a, y.min(self.table.xi_max()), 1)
    }
}
