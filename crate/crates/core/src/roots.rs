//! Polynomial root finding by Aberth-Ehrlich simultaneous iteration.
//!
//! Roots at the origin are split off exactly. The remaining polynomial is rescaled
//! so the geometric mean of its root magnitudes is one, started from Newton-polygon
//! radii, and iterated in Gauss-Seidel order. Clusters that sit inside the rounding
//! floor of a multiple root are collapsed onto the root of the matching derivative.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

pub const MAX_ITERATIONS: usize = 500;

const STEP_TOL: f64 = 4.0 * f64::EPSILON;

pub(crate) fn find_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return Err(Error::invalid("the zero polynomial has no isolated roots"));
    }
    let zeros_at_origin = p.lowest_order();
    let q = p.shift_down(zeros_at_origin);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    roots.extend(nonzero_roots(q.coeffs())?);
    sort_roots(&mut roots);
    Ok(roots)
}

pub(crate) fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
    });
}

/// Roots of a polynomial whose constant term is nonzero.
fn nonzero_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let n = c.len() - 1;
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(-c[0] / c[1], 0.0)]),
        2 => return Ok(quadratic(c[0], c[1], c[2]).to_vec()),
        _ => {}
    }

    // s = rho * z balances |c0| against |cn|.
    let rho = (c[0].abs() / c[n].abs()).powf(1.0 / n as f64);
    let mut scaled: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, &ck)| ck * rho.powi(k as i32))
        .collect();
    let norm = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    scaled.iter_mut().for_each(|v| *v /= norm);
    let poly = Polynomial::new(scaled)?;

    let mut z = initial_guesses(poly.coeffs());
    aberth(&poly, &mut z)?;
    collapse_clusters(&poly, &mut z);
    symmetrize_conjugates(&mut z);
    Ok(z.into_iter().map(|r| r * rho).collect())
}

/// Cancellation-free quadratic roots.
fn quadratic(c: f64, b: f64, a: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        }
        [Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a.abs());
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Starting points on circles whose radii come from the upper convex hull of
/// `(k, log|c_k|)`.
fn initial_guesses(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| (k, v.abs().ln()))
        .collect();

    let mut hull: Vec<(usize, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (k1, y1) = hull[hull.len() - 2];
            let (k2, y2) = hull[hull.len() - 1];
            let cross = (k2 as f64 - k1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - k1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let mut guesses = Vec::with_capacity(n);
    for (seg, w) in hull.windows(2).enumerate() {
        let (k0, y0) = w[0];
        let (k1, y1) = w[1];
        let count = k1 - k0;
        let radius = ((y0 - y1) / count as f64).exp();
        for j in 0..count {
            let theta = 2.0 * PI * j as f64 / count as f64 + 2.0 * PI * seg as f64 / n as f64 + 0.4;
            guesses.push(Complex64::from_polar(radius, theta));
        }
    }
    guesses
}

fn aberth(poly: &Polynomial, z: &mut [Complex64]) -> Result<()> {
    let dpoly = poly.derivative();
    let n = z.len();
    let mut done = vec![false; n];
    for _ in 0..MAX_ITERATIONS {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = z[i];
            let p = poly.eval(zi);
            let floor = f64::EPSILON * poly.abs_eval(zi.norm());
            if p.norm() <= floor {
                done[i] = true;
                continue;
            }
            let dp = dpoly.eval(zi);
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = zi - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        1.0 / d
                    }
                })
                .sum();
            let mut step = ratio / (1.0 - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                // Stationary point of p; nudge off it deterministically.
                step = Complex64::new(1e-3, 1e-3) * zi.norm().max(1e-3);
            }
            z[i] = zi - step;
            if step.norm() <= STEP_TOL * z[i].norm() {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Ok(());
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: MAX_ITERATIONS,
    })
}

/// Groups roots that lie within the rounding floor of a multiple root and
/// replaces each group by the refined root of the `(m-1)`-th derivative.
fn collapse_clusters(poly: &Polynomial, z: &mut [Complex64]) {
    let n = z.len();
    let link = 1e-4;
    let mut group = (0..n).collect::<Vec<_>>();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = z[i].norm().max(z[j].norm());
            if (z[i] - z[j]).norm() <= link * scale {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                if a != b {
                    group[b] = a;
                }
            }
        }
    }

    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut group, i) == root).collect();
        let m = members.len();
        if m < 2 {
            continue;
        }
        let centre = members.iter().map(|&i| z[i]).sum::<Complex64>() / m as f64;
        let diameter = members
            .iter()
            .flat_map(|&i| members.iter().map(move |&j| (i, j)))
            .map(|(i, j)| (z[i] - z[j]).norm())
            .fold(0.0, f64::max);
        // Rounding spreads an m-fold root over roughly eps^(1/m).
        let floor = 50.0 * f64::EPSILON.powf(1.0 / m as f64) * centre.norm();
        if diameter > floor {
            continue;
        }

        let mut d = poly.clone();
        for _ in 0..(m - 1) {
            d = d.derivative();
        }
        let dd = d.derivative();
        let mut c = centre;
        for _ in 0..20 {
            let den = dd.eval(c);
            if den.norm() == 0.0 {
                break;
            }
            let step = d.eval(c) / den;
            c -= step;
            if step.norm() <= STEP_TOL * c.norm() {
                break;
            }
        }
        if (c - centre).norm() <= floor {
            for &i in &members {
                z[i] = c;
            }
        }
    }
}

/// Real polynomials have real or conjugate-paired roots; enforce that exactly.
fn symmetrize_conjugates(z: &mut [Complex64]) {
    for r in z.iter_mut() {
        if r.im.abs() <= 1e-10 * r.norm() {
            r.im = 0.0;
        }
    }
    let upper: Vec<usize> = (0..z.len()).filter(|&i| z[i].im > 0.0).collect();
    let mut lower: Vec<usize> = (0..z.len()).filter(|&i| z[i].im < 0.0).collect();
    if upper.len() != lower.len() {
        return;
    }
    for &i in &upper {
        let (pos, _) = lower
            .iter()
            .enumerate()
            .map(|(p, &j)| (p, (z[i] - z[j].conj()).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .expect("paired counts");
        let j = lower.swap_remove(pos);
        let avg = (z[i] + z[j].conj()) * 0.5;
        z[i] = avg;
        z[j] = avg.conj();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_complex_pair() {
        let p = Polynomial::new(vec![2.0, 2.0, 1.0]).unwrap();
        let r = p.roots().unwrap();
        assert_eq!(r, vec![c(-1.0, -1.0), c(-1.0, 1.0)]);
    }

    #[test]
    fn root_at_origin() {
        let r = Polynomial::s().roots().unwrap();
        assert_eq!(r, vec![c(0.0, 0.0)]);
    }

    #[test]
    fn triple_root_is_resolved() {
        let p = Polynomial::new(vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 3);
        for x in r {
            assert!((x + 1.0).norm() < 1e-6, "{x}");
        }
    }

    #[test]
    fn widely_spread_magnitudes() {
        let want = [c(-1e-2, 0.0), c(-3.0, 4.0), c(-3.0, -4.0), c(-2e5, 0.0), c(-7e3, 0.0)];
        let p = Polynomial::from_roots(&want).unwrap();
        let got = p.roots().unwrap();
        let mut want = want.to_vec();
        sort_roots(&mut want);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() <= 1e-9 * w.norm().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn deterministic() {
        let p = Polynomial::new(vec![3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0]).unwrap();
        assert_eq!(p.roots().unwrap(), p.roots().unwrap());
    }
}
