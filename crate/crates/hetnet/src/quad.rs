//! Adaptive Gauss–Kronrod quadrature over finite and semi-infinite intervals.
//!
//! The integrators here follow the classic QUADPACK QAG scheme: a 7-point
//! Gauss / 15-point Kronrod rule per segment, with the segment of largest
//! estimated error bisected until the global error estimate meets the
//! requested tolerance. Improper integrals over `[a, inf)` are mapped onto
//! `[0, 1)` with the substitution `u = a + t/(1-t)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// 15-point Kronrod abscissae on [-1, 1], positive half, descending.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// 15-point Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Relative/absolute tolerance pair for an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    /// Scale both tolerances by a factor (used by `--tolerance`).
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            rel: self.rel * factor,
            abs: self.abs * factor,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs: 1e-12,
        }
    }
}

/// Result of an adaptive quadrature: value plus an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Error, Clone)]
pub enum QuadError {
    #[error(
        "quadrature failed to converge: value {value:.6e}, achieved error {achieved:.3e}, requested {requested:.3e}"
    )]
    NonConvergence {
        value: f64,
        achieved: f64,
        requested: f64,
    },
    #[error("integrand returned a non-finite value near {at}")]
    NonFinite { at: f64 },
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

/// QUADPACK-style error rescaling from the raw |K15 - G7| difference.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One G7K15 evaluation on [a, b].
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut res_kronrod = fc * WGK[7];
    let mut res_gauss = fc * WG[3];
    let mut res_abs = res_kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        let fsum = f1 + f2;
        res_kronrod += WGK[j] * fsum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * fsum;
        }
    }

    if !res_kronrod.is_finite() {
        return Err(QuadError::NonFinite { at: center });
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let value = res_kronrod * half;
    let err = rescale_error((res_kronrod - res_gauss) * half, res_abs * half.abs(), res_asc * half.abs());

    Ok(Segment {
        a,
        b,
        value,
        error: err,
    })
}

const MAX_SUBDIVISIONS: usize = 2048;

/// Adaptively integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Quad, QuadError> {
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }

    let first = qk15(&f, a, b)?;
    let mut total_value = first.value;
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1usize;

    loop {
        let target = tol.abs.max(tol.rel * total_value.abs());
        if total_error <= target {
            return Ok(Quad {
                value: total_value,
                error: total_error,
                subdivisions,
            });
        }
        if subdivisions >= MAX_SUBDIVISIONS {
            return Err(QuadError::NonConvergence {
                value: total_value,
                achieved: total_error,
                requested: target,
            });
        }

        let worst = heap.pop().expect("heap cannot be empty while error > 0");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating-point resolution; cannot refine further.
            return Err(QuadError::NonConvergence {
                value: total_value,
                achieved: total_error,
                requested: target,
            });
        }
        let left = qk15(&f, worst.a, mid)?;
        let right = qk15(&f, mid, worst.b)?;
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
}

/// Adaptively integrate `f` over `[a, inf)` via `u = a + t/(1-t)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Quad, QuadError> {
    integrate(
        |t| {
            // Subdivision endpoints can round to exactly 1; a convergent
            // integrand vanishes at infinity, so the mapped value is 0.
            if t >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - t;
            let jac = 1.0 / (om * om);
            let u = a + t / om;
            let v = f(u);
            // Underflowing tails: 0 * huge jacobian must stay 0.
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Adaptively integrate `f` over `[0, inf)`.
pub fn integrate_0_inf<F: Fn(f64) -> f64>(f: F, tol: Tolerance) -> Result<Quad, QuadError> {
    integrate_to_inf(f, 0.0, tol)
}
