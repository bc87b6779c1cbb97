use num_complex::Complex64;

use super::{BranchCertificate, BranchCriterion, ResolventQuery};
use crate::error::{Error, Result};
use crate::poly::{complex_cubic_roots, complex_quadratic_roots};

/// `(c₃, c₂, c₁, c₀)` with `c₃G³ + c₂G² + c₁G + c₀ = 0`.
pub fn cubic_coefficients(q: &ResolventQuery) -> [Complex64; 4] {
    let (z, t, r, a2) = (q.z, q.tau, q.r, q.a * q.a);
    [
        z * (r * r * t * t),
        z * (-2.0 * r * t) + (r * t * t - r * r * t * t),
        z + (2.0 * r * t - t - a2),
        Complex64::new(-1.0, 0.0),
    ]
}

/// The cubic is linear in `z`; this is the `z` for which `g` is a root.
pub fn z_from_g(g: Complex64, tau: f64, r: f64, a: f64) -> Complex64 {
    let rt = r * tau;
    let num = 1.0 - g * g * (r * tau * tau - rt * rt) - g * (2.0 * rt - tau - a * a);
    let den = g * (g * rt - 1.0) * (g * rt - 1.0);
    num / den
}

/// Roots of the cubic at `z`. For `a = 0` the factor `G − 1/(rτ)` is divided
/// out first, leaving the two physical candidates.
fn roots_at(q: &ResolventQuery, z: Complex64) -> Vec<Complex64> {
    let qz = ResolventQuery { z, ..*q };
    let [c3, c2, c1, c0] = cubic_coefficients(&qz);
    if q.a == 0.0 {
        let g0 = 1.0 / (q.r * q.tau);
        let b1 = c2 + c3 * g0;
        let b0 = c1 + b1 * g0;
        complex_quadratic_roots(c3, b1, b0)
    } else {
        complex_cubic_roots(c3, c2, c1, c0)
    }
}

/// Index of the root nearest `target`, and whether it is separated from the
/// runner-up by a factor of two.
fn nearest(roots: &[Complex64], target: Complex64) -> (usize, Option<usize>, bool) {
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&i, &j| {
        (roots[i] - target)
            .norm()
            .total_cmp(&(roots[j] - target).norm())
    });
    let best = order[0];
    match order.get(1) {
        None => (best, None, true),
        Some(&second) => {
            let d1 = (roots[best] - target).norm();
            let d2 = (roots[second] - target).norm();
            (best, Some(second), d1 < 0.5 * d2)
        }
    }
}

const STEP_RATIO: f64 = 0.8;
const MAX_REFINEMENTS: usize = 40;

/// Physical root of the cubic at `q.z`.
///
/// Starting from `Re z + iR` with `R` far outside the spectrum, the root
/// nearest `1/z` is followed down the vertical line to `z` in geometric
/// steps, each time taking the root nearest a linear predictor. A step whose
/// choice is not clear-cut is shortened; if that does not help, the sign
/// condition `Im G ≤ 0` decides or the call fails.
pub fn solve_g(q: &ResolventQuery) -> Result<(Complex64, BranchCertificate)> {
    q.validate()?;
    let flip = q.z.im < 0.0;
    let z = if flip { q.z.conj() } else { q.z };
    let scale = 1.0 + z.norm() + q.a * q.a + q.tau;
    let anchor_height = 1e3 * scale;
    let floor = 1e-13 * scale;

    let finish = |g: Complex64, roots: Vec<Complex64>, idx: usize, crit, steps| {
        if z.im > 0.0 && g.im > 1e-12 * g.norm() {
            return Err(Error::BranchAmbiguity {
                z: q.z,
                reason: format!("selected root {g} has Im G > 0 in the upper half-plane"),
                certificate: Box::new(BranchCertificate {
                    all_roots: roots,
                    chosen_index: idx,
                    criterion: crit,
                    steps,
                }),
            });
        }
        let mut cert = BranchCertificate {
            all_roots: roots,
            chosen_index: idx,
            criterion: crit,
            steps,
        };
        if flip {
            for r in cert.all_roots.iter_mut() {
                *r = r.conj();
            }
            Ok((g.conj(), cert))
        } else {
            Ok((g, cert))
        }
    };

    if z.im >= anchor_height {
        let roots = roots_at(q, z);
        let (idx, _, clear) = nearest(&roots, 1.0 / z);
        if clear {
            let g = roots[idx];
            return finish(g, roots, idx, BranchCriterion::AsymptoticOneOverZ, 0);
        }
    }

    let anchor = Complex64::new(z.re, anchor_height.max(z.im));
    let roots = roots_at(q, anchor);
    let (idx, _, clear) = nearest(&roots, 1.0 / anchor);
    if !clear {
        return Err(Error::BranchAmbiguity {
            z: q.z,
            reason: "anchor does not isolate the 1/z root".to_string(),
            certificate: Box::new(BranchCertificate {
                all_roots: roots,
                chosen_index: idx,
                criterion: BranchCriterion::AsymptoticOneOverZ,
                steps: 0,
            }),
        });
    }
    let mut y = anchor.im;
    let mut g = roots[idx];
    let mut prev: Option<(f64, Complex64)> = None;
    let mut last_roots = roots;
    let mut last_idx = idx;
    let mut criterion = BranchCriterion::Continuity;
    let mut steps = 0usize;
    let target = z.im;

    while y > target {
        let mut factor = STEP_RATIO;
        let mut accepted = false;
        for attempt in 0..=MAX_REFINEMENTS {
            let mut y_next = (y * factor).max(target);
            if y_next < floor && target < floor {
                y_next = target;
            }
            let predicted = match prev {
                Some((yp, gp)) if y != yp => g + (g - gp) * ((y_next - y) / (y - yp)),
                _ => g,
            };
            let zn = Complex64::new(z.re, y_next);
            let roots = roots_at(q, zn);
            let (i1, i2, clear) = nearest(&roots, predicted);
            let choice = if clear {
                Some((i1, BranchCriterion::Continuity))
            } else if attempt == MAX_REFINEMENTS || y_next == target && y - y_next < floor {
                // Last resort: the sign condition, if exactly one candidate meets it.
                let ok = |i: usize| y_next <= 0.0 || roots[i].im <= 0.0;
                match i2 {
                    Some(j) if ok(i1) != ok(j) => Some((
                        if ok(i1) { i1 } else { j },
                        BranchCriterion::UpperHalfPlaneSign,
                    )),
                    _ => None,
                }
            } else {
                None
            };
            match choice {
                Some((i, crit)) => {
                    prev = Some((y, g));
                    g = roots[i];
                    y = y_next;
                    last_idx = i;
                    last_roots = roots;
                    if crit == BranchCriterion::UpperHalfPlaneSign {
                        criterion = crit;
                    }
                    steps += 1;
                    accepted = true;
                    break;
                }
                None if attempt == MAX_REFINEMENTS => {
                    return Err(Error::BranchAmbiguity {
                        z: q.z,
                        reason: format!(
                            "two roots within continuation tolerance at Im z = {y_next:e}"
                        ),
                        certificate: Box::new(BranchCertificate {
                            all_roots: roots,
                            chosen_index: i1,
                            criterion: BranchCriterion::Continuity,
                            steps,
                        }),
                    });
                }
                None => factor = factor.sqrt(),
            }
        }
        debug_assert!(accepted);
    }
    finish(g, last_roots, last_idx, criterion, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn query(z: Complex64, tau: f64, r: f64, a: f64) -> ResolventQuery {
        ResolventQuery::new(z, tau, r, a).unwrap()
    }

    #[test]
    fn coefficients_back_substitute() {
        for &(z, t, r, a) in &[
            (c(1.3, 0.4), 0.7, 0.6, 1.1),
            (c(-2.0, 0.1), 1.0, 1.0, 1.0),
            (c(5.0, -3.0), 2.5, 0.3, 0.2),
        ] {
            let q = query(z, t, r, a);
            let [c3, c2, c1, c0] = cubic_coefficients(&q);
            for g in complex_cubic_roots(c3, c2, c1, c0) {
                let back = z_from_g(g, t, r, a);
                assert!(
                    (back - z).norm() < 1e-9 * (1.0 + z.norm()),
                    "{g} {back} {z}"
                );
            }
        }
    }

    #[test]
    fn degenerate_a_zero_factorisation() {
        // a = 0, r = 1: (τzG² − zG + 1)(τG − 1)
        let (z, t) = (c(1.7, 0.2), 0.8);
        let [c3, c2, c1, c0] = cubic_coefficients(&query(z, t, 1.0, 0.0));
        let p = [c(-1.0, 0.0), z + t, -2.0 * z * t, z * t * t];
        for (got, want) in [c0, c1, c2, c3].iter().zip(p.iter()) {
            assert!((got - want).norm() < 1e-14);
        }
    }

    #[test]
    fn marchenko_pastur_closed_form() {
        let z = c(2.0, 1e-12);
        let (g, cert) = solve_g(&query(z, 1.0, 1.0, 0.0)).unwrap();
        let want = (z - (z * z - 4.0 * z).sqrt()) / (2.0 * z);
        let want = if want.im > 0.0 {
            (z + (z * z - 4.0 * z).sqrt()) / (2.0 * z)
        } else {
            want
        };
        assert!((g - want).norm() < 1e-9, "{g} vs {want}");
        assert!((-g.im / std::f64::consts::PI - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-9);
        assert_eq!(cert.all_roots.len(), 2);
    }

    #[test]
    fn conjugation_symmetry() {
        let z = c(1.0, 0.3);
        let (g, _) = solve_g(&query(z, 0.5, 1.0, 1.0)).unwrap();
        let (h, _) = solve_g(&query(z.conj(), 0.5, 1.0, 1.0)).unwrap();
        assert!((g.conj() - h).norm() < 1e-14);
    }

    #[test]
    fn small_tau_approaches_free_resolvent() {
        let z = c(0.4, 0.5);
        let (g, _) = solve_g(&query(z, 1e-9, 1.0, 1.0)).unwrap();
        assert!((g - 1.0 / (z - 1.0)).norm() < 1e-7);
    }

    #[test]
    fn large_z_ray() {
        for &m in &[100.0, 1e3, 1e5] {
            let z = c(m, 0.0) * Complex64::from_polar(1.0, 0.3);
            let (g, _) = solve_g(&query(z, 1.0, 1.0, 1.0)).unwrap();
            assert!((z * g - 1.0).norm() <= 10.0 / m);
        }
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(ResolventQuery::new(c(1.0, 1.0), 0.0, 1.0, 1.0).is_err());
        assert!(ResolventQuery::new(c(1.0, 1.0), 1.0, 1.5, 1.0).is_err());
        assert!(ResolventQuery::new(c(1.0, 1.0), 1.0, 1.0, -1.0).is_err());
    }
}
