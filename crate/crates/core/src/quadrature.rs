//! Adaptive Gauss–Legendre quadrature.
//!
//! Panels carry a 15-point rule. A panel's error estimate is the difference
//! between the rule on the whole panel and the sum over its two halves; the
//! panel with the largest estimate is bisected until the summed estimate
//! drops below the tolerance. Everything is deterministic for fixed inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_PANELS: usize = 400_000;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

/// Values that can be integrated: reals and complex numbers.
pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

fn rule<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> T {
    let (x, w) = gl15();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = T::zero();
    for (xi, wi) in x.iter().zip(w) {
        s = s + f(c + h * xi) * *wi;
    }
    s * h
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub panels: usize,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn make_panel<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Panel<T> {
    let whole = rule(f, a, b);
    let m = 0.5 * (a + b);
    let halves = rule(f, a, m) + rule(f, m, b);
    Panel {
        a,
        b,
        value: halves,
        error: (whole - halves).magnitude(),
    }
}

/// Adaptive integration of `f` over `[a, b]` starting from `initial_panels`
/// equal panels (use more for oscillatory integrands).
pub fn integrate_panels<T, F>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    initial_panels: usize,
    max_panels: usize,
) -> Result<QuadResult<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    if !(tol > 0.0) {
        return Err(crate::error::invalid("quadrature tolerance must be > 0"));
    }
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: 0.0,
            panels: 0,
        });
    }
    let n0 = initial_panels.max(1);
    let mut heap = BinaryHeap::with_capacity(n0 * 2);
    let h = (b - a) / n0 as f64;
    for i in 0..n0 {
        let lo = a + h * i as f64;
        let hi = if i + 1 == n0 { b } else { a + h * (i + 1) as f64 };
        heap.push(make_panel(&f, lo, hi));
    }
    let mut total_err: f64 = heap.iter().map(|p| p.error).sum();
    let mut iterations = 0usize;
    while total_err > tol {
        if heap.len() >= max_panels {
            let value = heap.iter().fold(T::zero(), |s, p| s + p.value);
            return Err(Error::QuadratureFailed {
                estimate: value.magnitude(),
                residual: total_err,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Panel cannot be split further in floating point.
            let value = heap.iter().fold(worst.value, |s, p| s + p.value);
            return Err(Error::QuadratureFailed {
                estimate: value.magnitude(),
                residual: total_err,
                panels: heap.len() + 1,
            });
        }
        let left = make_panel(&f, worst.a, m);
        let right = make_panel(&f, m, worst.b);
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        iterations += 1;
        if iterations % 256 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    // Sum in position order so the result does not depend on heap layout.
    let mut panels: Vec<Panel<T>> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().fold(T::zero(), |s, p| s + p.value);
    let error = panels.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error,
        panels: panels.len(),
    })
}

/// Relative-tolerance variant: the absolute tolerance is `rel_tol` times
/// ∫|f| estimated from a first pass of `initial_panels` fixed panels, with a
/// floor of `abs_floor`.
pub fn integrate_relative<T, F>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
    initial_panels: usize,
) -> Result<QuadResult<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    let tol = rel_tol * l1_estimate(&f, a, b, initial_panels.max(1));
    integrate_panels(f, a, b, tol.max(abs_floor).max(f64::MIN_POSITIVE), initial_panels, DEFAULT_MAX_PANELS)
}

fn l1_estimate<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gl15();
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = a + h * i as f64;
        let c = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(w) {
            s += f(c + 0.5 * h * xi).magnitude() * wi * 0.5 * h.abs();
        }
    }
    s
}

pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    integrate_panels(f, a, b, tol, 1, DEFAULT_MAX_PANELS)
}

/// Complex integrand over a finite interval, with enough initial panels to
/// resolve an oscillation of angular frequency `max_phase_rate`.
pub fn quadrature_oscillatory<F>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_phase_rate: f64,
) -> Result<QuadResult<Complex64>>
where
    F: Fn(f64) -> Complex64,
{
    let periods = (b - a).abs() * max_phase_rate.abs() / (2.0 * std::f64::consts::PI);
    let initial = (periods.ceil() as usize).clamp(1, 1_000_000);
    integrate_panels(f, a, b, tol, initial, DEFAULT_MAX_PANELS.max(4 * initial))
}

/// Integral over `[a, ∞)` through the substitution `x = a + scale·s/(1-s)`;
/// `scale` should be the width of the region carrying most of the weight.
pub fn integrate_to_infinity<T, F>(f: F, a: f64, scale: f64, tol: f64) -> Result<QuadResult<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    let g = |s: f64| {
        let d = 1.0 - s;
        f(a + scale * s / d) * (scale / (d * d))
    };
    integrate_panels(g, 0.0, 1.0, tol, 8, DEFAULT_MAX_PANELS)
}

/// [`integrate_to_infinity`] with a relative tolerance.
pub fn integrate_to_infinity_relative<T, F>(
    f: F,
    a: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<QuadResult<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    let g = |s: f64| {
        let d = 1.0 - s;
        f(a + scale * s / d) * (scale / (d * d))
    };
    integrate_relative(g, 0.0, 1.0, rel_tol, 0.0, 8)
}
