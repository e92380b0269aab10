//! Inner products of f with hat functions and with block sums of hats.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use super::FunctionSpec;
use crate::fem::LevelSpec;
use crate::{Error, Result};

pub(crate) fn rule(n: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"))
        .as_node_weight_pairs()
        .to_vec()
}

/// (Λ_v, f) for every interior node v of level l (first axis most significant).
/// Per-cell tensor Gauss–Legendre of order max(4, what f needs).
pub fn inner_products(f: &FunctionSpec, spec: &LevelSpec, l: usize) -> Result<Vec<f64>> {
    if l == 0 || l > spec.levels() {
        return Err(Error::InvalidArgument(format!("level {l} outside 1..={}", spec.levels())));
    }
    let d = spec.d();
    let per = 1usize << l;
    let nodes = per - 1;
    let h = spec.h(l);
    let q = rule(f.quad_points());
    let mut out = vec![0.0; nodes.pow(d as u32)];
    let npts = q.len().pow(d as u32);
    let mut x = vec![0.0; d];
    let mut loc = vec![0.0; d];
    for cell in 0..per.pow(d as u32) {
        let c: Vec<usize> = digits(cell, per, d);
        for p in 0..npts {
            let pi = digits(p, q.len(), d);
            let mut w = 1.0;
            for i in 0..d {
                let (t, wt) = q[pi[i]];
                loc[i] = 0.5 * (t + 1.0);
                x[i] = (c[i] as f64 + loc[i]) * h;
                w *= 0.5 * wt * h;
            }
            let fx = f.eval(&x) * w;
            for corner in 0..1usize << d {
                let mut idx = 0;
                let mut hat = fx;
                let mut inside = true;
                for i in 0..d {
                    let e = (corner >> (d - 1 - i)) & 1;
                    let n = c[i] + e;
                    if n == 0 || n == per {
                        inside = false;
                        break;
                    }
                    idx = idx * nodes + (n - 1);
                    hat *= if e == 1 { loc[i] } else { 1.0 - loc[i] };
                }
                if inside {
                    out[idx] += hat;
                }
            }
        }
    }
    Ok(out)
}

fn digits(mut v: usize, base: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; d];
    for i in (0..d).rev() {
        out[i] = v % base;
        v /= base;
    }
    out
}

/// Linear ramp on [a, b]: 0 at `zero`, 1 at the other end.
#[derive(Clone, Copy, Debug)]
struct Ramp {
    a: f64,
    b: f64,
    rising: bool,
}

impl Ramp {
    fn at(&self, t: f64) -> f64 {
        let s = (t - self.a) / (self.b - self.a);
        if self.rising {
            s
        } else {
            1.0 - s
        }
    }
}

/// Integral of g * ramp. Exact one-shot Gauss rule when g is polynomial,
/// otherwise composite over cells of width h.
fn ramp_integral(r: Ramp, g: &dyn Fn(f64) -> f64, n: usize, composite_h: Option<f64>) -> f64 {
    let q = rule(n);
    let pieces = composite_h.map_or(1, |h| (((r.b - r.a) / h).round() as usize).max(1));
    let w = (r.b - r.a) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let lo = r.a + p as f64 * w;
        for &(t, wt) in &q {
            let x = lo + 0.5 * (t + 1.0) * w;
            acc += 0.5 * wt * w * g(x) * r.at(x);
        }
    }
    acc
}

/// Interval of node positions covered by a k-bit prefix `x` of the l-bit
/// padded index on one axis, clipped to the existing nodes.
fn axis_block(l: usize, k: usize, x: usize) -> Option<(usize, usize)> {
    let lo = x << (l - k);
    let hi = ((x + 1) << (l - k)) - 1;
    let hi = hi.min((1 << l) - 2);
    (lo <= hi).then_some((lo, hi))
}

/// One-dimensional ∫ g Λ_block as a + b + c - d: rising half-hat into the
/// first node, wide falling and rising ramps across the block, minus the
/// rising half-hat into the right end.
fn trapezoid_integral(g: &dyn Fn(f64) -> f64, h: f64, lo: usize, hi: usize, n: usize, exact: bool) -> f64 {
    let first = (lo + 1) as f64 * h;
    let end = (hi + 2) as f64 * h;
    let comp = (!exact).then_some(h);
    let a = Ramp { a: first - h, b: first, rising: true };
    let b = Ramp { a: first, b: end, rising: false };
    let c = Ramp { a: first, b: end, rising: true };
    let d = Ramp { a: end - h, b: end, rising: true };
    ramp_integral(a, g, n, None) + ramp_integral(b, g, n, comp) + ramp_integral(c, g, n, comp)
        - ramp_integral(d, g, n, None)
}

/// (Λ_{k,x}, f): inner product with the sum of level-l hats whose padded
/// d*l-bit index starts with the k-bit prefix x (first axis most significant).
pub fn half_hat_sums(f: &FunctionSpec, spec: &LevelSpec, l: usize, k: usize, x: usize) -> Result<f64> {
    let d = spec.d();
    if l == 0 || l > spec.levels() || k == 0 || k > d * l || x >= 1 << k {
        return Err(Error::InvalidArgument(format!("bad block (l={l}, k={k}, x={x})")));
    }
    let h = spec.h(l);
    let mut blocks = Vec::with_capacity(d);
    for i in 0..d {
        let ki = k.saturating_sub(i * l).min(l);
        let xi = if ki == 0 { 0 } else { (x >> (k - i * l - ki)) & ((1 << ki) - 1) };
        match axis_block(l, ki, xi) {
            Some(b) => blocks.push(b),
            None => return Ok(0.0),
        }
    }
    let n = f.quad_points();
    if f.is_separable() {
        let mut acc = 1.0;
        for (i, &(lo, hi)) in blocks.iter().enumerate() {
            let g = |t: f64| f.axis_factor(i, t).unwrap();
            acc *= trapezoid_integral(&g, h, lo, hi, n, true);
        }
        return Ok(acc);
    }
    // non-separable: tensor quadrature over the block support
    let q = rule(n);
    let trap = |i: usize, t: f64| {
        let (lo, hi) = blocks[i];
        let first = (lo + 1) as f64 * h;
        let last = (hi + 1) as f64 * h;
        if t < first {
            (t - (first - h)) / h
        } else if t > last {
            (last + h - t) / h
        } else {
            1.0
        }
    };
    let cells: Vec<(usize, usize)> = blocks.iter().map(|&(lo, hi)| (lo, hi + 2)).collect();
    let total: usize = cells.iter().map(|(a, b)| b - a).product();
    let npts = q.len().pow(d as u32);
    let mut acc = 0.0;
    let mut xs = vec![0.0; d];
    for cell in 0..total {
        let mut rest = cell;
        let mut c = vec![0; d];
        for i in (0..d).rev() {
            let w = cells[i].1 - cells[i].0;
            c[i] = cells[i].0 + rest % w;
            rest /= w;
        }
        for p in 0..npts {
            let pi = digits(p, q.len(), d);
            let mut w = 1.0;
            for i in 0..d {
                let (t, wt) = q[pi[i]];
                xs[i] = (c[i] as f64 + 0.5 * (t + 1.0)) * h;
                w *= 0.5 * wt * h * trap(i, xs[i]);
            }
            acc += w * f.eval(&xs);
        }
    }
    Ok(acc)
}
