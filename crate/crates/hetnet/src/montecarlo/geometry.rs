//! Points, disc sampling, and a minimal complex scalar for channel draws.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub fn dist2(&self, o: &Point) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, o: &Point) -> f64 {
        self.dist2(o).sqrt()
    }
}

/// Uniform point in the disc of given radius around the origin.
pub fn sample_disc<R: Rng>(rng: &mut R, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    Point {
        x: r * theta.cos(),
        y: r * theta.sin(),
    }
}

/// Poisson count with the given mean (0 mean allowed).
pub fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Complex scalar used for channel coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cplx {
    pub re: f64,
    pub im: f64,
}

impl Cplx {
    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// `conj(self) * other`.
    #[inline]
    pub fn conj_mul(self, other: Cplx) -> Cplx {
        Cplx {
            re: self.re * other.re + self.im * other.im,
            im: self.re * other.im - self.im * other.re,
        }
    }

    #[inline]
    pub fn add(self, other: Cplx) -> Cplx {
        Cplx {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    #[inline]
    pub fn sub(self, other: Cplx) -> Cplx {
        Cplx {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }

    #[inline]
    pub fn scale(self, s: f64) -> Cplx {
        Cplx {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

/// Circularly-symmetric complex Gaussian with per-element variance `var`
/// (i.e. `CN(0, var)`).
#[inline]
pub fn draw_cn<R: Rng>(rng: &mut R, var: f64) -> Cplx {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Cplx {
        re: re * s,
        im: im * s,
    }
}

/// Draw an i.i.d. `CN(0, var)` vector of length `m`.
pub fn draw_cn_vec<R: Rng>(rng: &mut R, var: f64, m: usize) -> Vec<Cplx> {
    (0..m).map(|_| draw_cn(rng, var)).collect()
}

/// `sum_i conj(a_i) b_i`.
pub fn dot(a: &[Cplx], b: &[Cplx]) -> Cplx {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Cplx::default();
    for (x, y) in a.iter().zip(b) {
        acc = acc.add(x.conj_mul(*y));
    }
    acc
}

pub fn norm_sq(a: &[Cplx]) -> f64 {
    a.iter().map(|c| c.norm_sq()).sum()
}
