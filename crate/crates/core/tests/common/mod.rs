#![allow(dead_code)]

use std::collections::HashMap;

use lanekeep::imaging::EdgeMap;
use lanekeep::lane_detect::{HoughParams, PolarLine};
use lanekeep::tracking::KalmanModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Sparse random edge map, sometimes with a straight line drawn through it.
pub fn random_edges<R: Rng>(rng: &mut R, width: usize, height: usize) -> EdgeMap {
    let mut map = EdgeMap::empty(width, height).unwrap();
    let density = rng.gen_range(0.02..0.12);
    for y in 0..height {
        for x in 0..width {
            if rng.gen_bool(density) {
                map.set(x, y, true);
            }
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        let (x0, y0) = (
            rng.gen_range(0.0..width as f64),
            rng.gen_range(0.0..height as f64),
        );
        let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        for t in -64..64 {
            let (x, y) = (x0 + t as f64 * a.cos() * 0.5, y0 + t as f64 * a.sin() * 0.5);
            if x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height {
                map.set(x as usize, y as usize, true);
            }
        }
    }
    map
}

/// Brute-force Hough: a sparse map of every (ρ-bin, θ-bin) cell voted for,
/// then a direct 8-neighbour scan of each cell.
pub fn hough_oracle(edges: &EdgeMap, params: &HoughParams) -> Vec<PolarLine> {
    let n_theta = (180.0 / params.theta_resolution).ceil() as i64;
    let mut votes: HashMap<(i64, i64), u32> = HashMap::new();
    for (x, y) in edges.points() {
        for k in 0..n_theta {
            let t = (k as f64 * params.theta_resolution).to_radians();
            let rho = x as f64 * t.cos() + y as f64 * t.sin();
            *votes
                .entry(((rho / params.rho_resolution).round() as i64, k))
                .or_default() += 1;
        }
    }
    let mut peaks: Vec<((i64, i64), u32)> = votes
        .iter()
        .filter(|(_, &v)| v >= params.vote_threshold)
        .filter(|(&(r, k), &v)| {
            (-1..=1).all(|dr| {
                (-1..=1).all(|dk| {
                    let n = (r + dr, k + dk);
                    if n == (r, k) || n.1 < 0 || n.1 >= n_theta {
                        return true;
                    }
                    let other = votes.get(&n).copied().unwrap_or(0);
                    other < v || (other == v && n > (r, k))
                })
            })
        })
        .map(|(&c, &v)| (c, v))
        .collect();
    peaks.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks
        .into_iter()
        .map(|((r, k), v)| {
            let rho = r as f64 * params.rho_resolution;
            let theta_n = k as f64 * params.theta_resolution;
            // fold the normal angle into the lane convention
            let (rho, theta) = if theta_n < 90.0 {
                (rho, -theta_n)
            } else {
                (-rho, 180.0 - theta_n)
            };
            PolarLine {
                rho,
                theta: if theta == 0.0 { 0.0 } else { theta },
                votes: v,
            }
        })
        .collect()
}

/// Filtered posterior of the final state given all measurements, computed by
/// conditioning the joint Gaussian of (x_n, z_1..z_n) in one batch.
pub fn batch_posterior(
    model: &KalmanModel,
    x0: &DVector<f64>,
    p0: &DMatrix<f64>,
    zs: &[DVector<f64>],
) -> (DVector<f64>, DMatrix<f64>) {
    let (f, h, q, r) = (&model.f, &model.h, &model.q, &model.r);
    let n = f.nrows();
    let m = h.nrows();
    let steps = zs.len();
    let fpow: Vec<DMatrix<f64>> = (0..=steps)
        .scan(DMatrix::identity(n, n), |acc, i| {
            let cur = acc.clone();
            if i < steps {
                *acc = f * &*acc;
            }
            Some(cur)
        })
        .collect();
    // Cov(x_i, x_j) for i, j ≥ 1
    let cov_x = |i: usize, j: usize| {
        let mut c = &fpow[i] * p0 * fpow[j].transpose();
        for l in 1..=i.min(j) {
            c += &fpow[i - l] * q * fpow[j - l].transpose();
        }
        c
    };
    let mut szz = DMatrix::zeros(m * steps, m * steps);
    let mut sxz = DMatrix::zeros(n, m * steps);
    let mut mz = DVector::zeros(m * steps);
    let mut z = DVector::zeros(m * steps);
    for i in 1..=steps {
        let mean_zi = h * &fpow[i] * x0;
        mz.rows_mut((i - 1) * m, m).copy_from(&mean_zi);
        z.rows_mut((i - 1) * m, m).copy_from(&zs[i - 1]);
        for j in 1..=steps {
            let mut block = h * cov_x(i, j) * h.transpose();
            if i == j {
                block += r;
            }
            szz.view_mut(((i - 1) * m, (j - 1) * m), (m, m))
                .copy_from(&block);
        }
        sxz.view_mut((0, (i - 1) * m), (n, m))
            .copy_from(&(cov_x(steps, i) * h.transpose()));
    }
    let mx = &fpow[steps] * x0;
    let szz_inv = szz.try_inverse().expect("joint covariance invertible");
    let mean = mx + &sxz * &szz_inv * (z - mz);
    let cov = cov_x(steps, steps) - &sxz * &szz_inv * sxz.transpose();
    (mean, cov)
}

/// Samples needed for `output` to come within `tol` of `target` and stay
/// there, counted from `start`.
pub fn settle_index(
    output: &[f64],
    target: impl Fn(usize) -> f64,
    start: usize,
    tol: f64,
) -> Option<usize> {
    let mut last_bad = None;
    for (i, &v) in output.iter().enumerate().skip(start) {
        if (v - target(i)).abs() > tol {
            last_bad = Some(i);
        }
    }
    match last_bad {
        None => Some(0),
        Some(i) if i + 1 < output.len() => Some(i + 1 - start),
        Some(_) => None,
    }
}

/// Mean lag, in samples, of `output` behind a ramp of the given slope over
/// the tail of the sequence.
pub fn ramp_lag(output: &[f64], input: &[f64], slope: f64, tail_from: usize) -> f64 {
    let diffs: Vec<f64> = output[tail_from..]
        .iter()
        .zip(&input[tail_from..])
        .map(|(o, i)| (i - o) / slope)
        .collect();
    diffs.iter().sum::<f64>() / diffs.len() as f64
}
