use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlboost::geometry::{dist_to_simplex, norm_inf1, policy_difference, project_simplex};
use rlboost::smoothing::{envelope_value, extension_gradient, prox_step, LinearLoss, SmoothingParams};
use rlboost::TabularPolicy;

/// Compositions of `k` into `d` non-negative parts, scaled by `1/k`.
fn lattice(d: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(d: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if d == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(d - 1, left - c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, k, k, &mut Vec::new(), &mut out);
    out
}

/// Minimizes `f` over the simplex: lattice enumeration, then refinement by
/// mass transfers between coordinate pairs on a shrinking step.
fn simplex_search(d: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let k = if d <= 3 { 200 } else { 16 };
    let mut best = lattice(d, k)
        .into_iter()
        .min_by(|a, b| f(a).total_cmp(&f(b)))
        .unwrap();
    let mut fbest = f(&best);
    let mut h = 1.0 / k as f64;
    while h > 1e-7 {
        let mut improved = false;
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let step = h.min(best[j]);
                if step <= 0.0 {
                    continue;
                }
                let mut y = best.clone();
                y[i] += step;
                y[j] -= step;
                let fy = f(&y);
                if fy < fbest {
                    best = y;
                    fbest = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    best
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance to the simplex via bisection on the threshold `θ` with
/// `Σ max(y − θ, 0) = 1`.
fn dist_bisection(y: &[f64]) -> f64 {
    let (mut lo, mut hi) = (y.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0, y.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = y.iter().map(|v| (v - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    y.iter().map(|v| (v - (v - theta).max(0.0)).powi(2)).sum::<f64>().sqrt()
}

fn envelope_objective(c: &[f64], p: SmoothingParams, x: &[f64], y: &[f64]) -> f64 {
    let lin: f64 = c.iter().zip(y).map(|(a, b)| a * b).sum();
    lin + p.g_lip * dist_bisection(y) + sq(x, y) / (2.0 * p.beta)
}

/// Minimizes the prox objective over a box around `x` by a coarse grid and
/// pattern search along coordinate and pairwise diagonal directions.
fn envelope_search(c: &[f64], p: SmoothingParams, x: &[f64]) -> (f64, Vec<f64>) {
    let d = x.len();
    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = p.beta * (cn + p.g_lip) * 1.05 + 1e-9;
    let per_axis: usize = if d <= 2 { 200 } else { 24 };
    let mut best = x.to_vec();
    let mut fbest = envelope_objective(c, p, x, x);
    let total = per_axis.pow(d as u32);
    for idx in 0..total {
        let mut k = idx;
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let i = k % per_axis;
                k /= per_axis;
                xi - radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64
            })
            .collect();
        let fy = envelope_objective(c, p, x, &y);
        if fy < fbest {
            fbest = fy;
            best = y;
        }
    }
    let mut h = 2.0 * radius / per_axis as f64;
    while h > 1e-10 {
        let mut improved = false;
        for i in 0..d {
            for j in i..d {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut y = best.clone();
                    y[i] += si * h;
                    if j != i {
                        y[j] += sj * h;
                    }
                    let fy = envelope_objective(c, p, x, &y);
                    if fy < fbest {
                        fbest = fy;
                        best = y;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    (fbest, best)
}

fn random_instance(rng: &mut ChaCha8Rng, d: usize) -> (Vec<f64>, Vec<f64>, SmoothingParams) {
    let c = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = (0..d).map(|_| rng.random_range(-0.5..1.5)).collect();
    let p = SmoothingParams::new(rng.random_range(0.05..1.0), rng.random_range(0.5..3.0)).unwrap();
    (c, x, p)
}

#[test]
fn projection_fixed_examples() {
    assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
    assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    let oracle = simplex_search(3, |y| sq(y, &[0.9, 0.8, 0.5]));
    let got = project_simplex(&[0.9, 0.8, 0.5]);
    assert!(got.iter().zip(&oracle).all(|(a, b)| (a - b).abs() <= 2e-3), "{got:?} vs {oracle:?}");
}

#[test]
fn projection_matches_search_in_low_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let d = rng.random_range(2..=5);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..2.0)).collect();
        let oracle = simplex_search(d, |y| sq(y, &x));
        let got = project_simplex(&x);
        let err = sq(&got, &oracle).sqrt();
        assert!(err <= 2e-3, "{x:?}: {got:?} vs {oracle:?}");
        let dist = dist_to_simplex(&x);
        assert!((dist - sq(&x, &oracle).sqrt()).abs() <= 2e-3);
        assert!((dist - dist_bisection(&x)).abs() <= 1e-9);
    }
    assert_eq!(dist_to_simplex(&[0.3, 0.7]), 0.0);
    assert!((dist_to_simplex(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
}

#[test]
fn prox_and_envelope_match_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let d = rng.random_range(2..=3);
        let (c, x, p) = random_instance(&mut rng, d);
        let loss = LinearLoss::new(c.clone());
        let (f_oracle, y_oracle) = envelope_search(&c, p, &x);
        let f = envelope_value(&loss, p, &x);
        assert!((f - f_oracle).abs() <= 1e-3, "envelope {f} vs {f_oracle}");
        assert!(f <= f_oracle + 1e-9, "closed form must not lose to search");
        let y = prox_step(&loss, p, &x);
        assert!(envelope_objective(&c, p, &x, &y) <= envelope_objective(&c, p, &x, &y_oracle) + 1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences_of_searched_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let (c, x, p) = random_instance(&mut rng, 2);
        let g = extension_gradient(&LinearLoss::new(c.clone()), p, &x);
        let h = 1e-3;
        let fd: Vec<f64> = (0..2)
            .map(|i| {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += h;
                down[i] -= h;
                (envelope_search(&c, p, &up).0 - envelope_search(&c, p, &down).0) / (2.0 * h)
            })
            .collect();
        let err = sq(&g, &fd).sqrt();
        let scale = sq(&g, &[0.0, 0.0]).sqrt().max(1e-2);
        assert!(err / scale <= 1e-2, "{g:?} vs {fd:?}");
    }
}

#[test]
fn smoothing_closed_forms() {
    let p = SmoothingParams::new(0.1, 2.0).unwrap();
    let zero = LinearLoss::new(vec![0.0; 3]);
    let x = [0.2, 0.3, 0.5];
    assert_eq!(prox_step(&zero, p, &x), x.to_vec());
    assert!(extension_gradient(&zero, p, &x).iter().all(|v| v.abs() < 1e-15));
    assert!(envelope_value(&zero, p, &x).abs() < 1e-15);
    let c = LinearLoss::new(vec![1.0, -1.0, 0.0]);
    let g = extension_gradient(&c, SmoothingParams::new(0.01, 2.0).unwrap(), &x);
    assert!(g.iter().zip(&c.coeffs).all(|(a, b)| (a - b).abs() < 1e-9));
    // dist ≤ βG: envelope is the squared distance over 2β.
    let near = [0.7, 0.5, 0.0];
    let d = dist_to_simplex(&near);
    assert!(d <= p.beta * p.g_lip);
    assert!((envelope_value(&zero, p, &near) - d * d / (2.0 * p.beta)).abs() < 1e-12);
}

#[test]
fn policy_norm_examples() {
    let a = TabularPolicy::deterministic(&[0, 1], 3).unwrap();
    let b = TabularPolicy::deterministic(&[0, 2], 3).unwrap();
    assert_eq!(norm_inf1(&policy_difference(&a, &b, 2)), 2.0);
    assert_eq!(norm_inf1(&policy_difference(&a, &a, 2)), 0.0);
}

proptest! {
    #[test]
    fn policy_differences_have_norm_at_most_two(
        a in prop::collection::vec(0.01f64..1.0, 12),
        b in prop::collection::vec(0.01f64..1.0, 12),
    ) {
        let normalize = |v: Vec<f64>| {
            let rows: Vec<f64> = v.chunks(3).flat_map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(move |x| x / s).collect::<Vec<_>>()
            }).collect();
            TabularPolicy::new(4, 3, rows).unwrap()
        };
        let (pa, pb) = (normalize(a), normalize(b));
        prop_assert!(norm_inf1(&policy_difference(&pa, &pb, 4)) <= 2.0 + 1e-12);
    }

    #[test]
    fn prox_point_is_no_worse_than_its_neighbours(
        c in prop::collection::vec(-2.0f64..2.0, 3),
        x in prop::collection::vec(-1.0f64..2.0, 3),
        dy in prop::collection::vec(-0.01f64..0.01, 3),
        beta in 0.05f64..1.0,
    ) {
        let p = SmoothingParams::new(beta, 1.5).unwrap();
        let y = prox_step(&LinearLoss::new(c.clone()), p, &x);
        let moved: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + b).collect();
        prop_assert!(envelope_objective(&c, p, &x, &y) <= envelope_objective(&c, p, &x, &moved) + 1e-9);
    }
}
