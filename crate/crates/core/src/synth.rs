//! Seeded generation of separated test instances.
//!
//! Locations are drawn in `t = arccos x` inside the window
//! `[2 pi / N, pi - 2 pi / N]` so that the separation condition is met by
//! construction: sorted uniform offsets plus a fixed gap per rank.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DiracMeasure, Spline};
use crate::spike::lp_grid;
use crate::spline_recovery::integrate_back;
use crate::{Error, Result};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one trial of a sweep; independent of scheduling order.
pub fn trial_seed(master: u64, step: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ step) ^ trial)
}

/// Window `[2 pi / N, pi - 2 pi / N]` in `t`.
pub fn t_window(n: usize) -> (f64, f64) {
    let h = 2.0 * PI / n as f64;
    (h, PI - h)
}

fn check_fit(m: usize, n: usize, factor: f64) -> Result<f64> {
    if n == 0 || !(factor > 0.0) {
        return Err(Error::InvalidInput("N and the separation factor must be positive".into()));
    }
    let sep = factor * PI / n as f64;
    let room = PI - 4.0 * PI / n as f64;
    if m as f64 * sep > room {
        return Err(Error::InvalidInput(format!(
            "infeasible: M * factor * pi / N = {} * {factor} * pi / {n} = {:.6} exceeds pi - 4 pi / N = {room:.6}",
            m,
            m as f64 * sep
        )));
    }
    Ok(sep)
}

/// `m` values of `t`, pairwise at least `factor * pi / N` apart, sorted.
pub fn separated_t(rng: &mut impl Rng, m: usize, n: usize, factor: f64) -> Result<Vec<f64>> {
    let sep = check_fit(m, n, factor)?;
    let (lo, hi) = t_window(n);
    let slack = (hi - lo - m.saturating_sub(1) as f64 * sep).max(0.0);
    let mut u: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * slack).collect();
    u.sort_by(f64::total_cmp);
    Ok(u.iter()
        .enumerate()
        .map(|(i, &v)| (lo + v + i as f64 * sep).min(hi))
        .collect())
}

/// Separated locations in `x`, sorted increasing.
pub fn separated_locations(rng: &mut impl Rng, m: usize, n: usize, factor: f64) -> Result<Vec<f64>> {
    let mut x: Vec<f64> = separated_t(rng, m, n, factor)?.iter().map(|t| t.cos()).collect();
    x.reverse();
    Ok(x)
}

/// Indices into a `grid_size` grid uniform in `t` on `[0, pi]`, inside the
/// window and at least `factor * pi / N` apart.
pub fn separated_grid_indices(
    rng: &mut impl Rng,
    m: usize,
    n: usize,
    factor: f64,
    grid_size: usize,
) -> Result<Vec<usize>> {
    let sep = check_fit(m, n, factor)?;
    if grid_size < 2 {
        return Err(Error::InvalidInput("grid needs at least two points".into()));
    }
    let h = PI / (grid_size - 1) as f64;
    let (lo, hi) = t_window(n);
    let first = (lo / h - 1e-9).ceil() as usize;
    let last = (hi / h + 1e-9).floor() as usize;
    let gap = ((sep / h) - 1e-9).ceil().max(1.0) as usize;
    let span = last.saturating_sub(first) + 1;
    let needed = m.saturating_sub(1) * gap;
    if m > 0 && needed >= span {
        return Err(Error::InvalidInput(format!(
            "grid of {grid_size} points cannot hold {m} atoms {gap} cells apart"
        )));
    }
    let free = span - needed;
    let mut picks = sample(rng, free, m).into_vec();
    picks.sort_unstable();
    Ok(picks.iter().enumerate().map(|(i, &p)| first + p + i * gap).collect())
}

pub fn unit_phase(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
}

/// Real weight with random sign and magnitude in `[0.5, 1.5)`.
pub fn signed_weight(rng: &mut impl Rng) -> f64 {
    let mag = rng.gen_range(0.5..1.5);
    if rng.gen::<bool>() {
        mag
    } else {
        -mag
    }
}

/// `m` separated atoms with unit-modulus complex weights.
pub fn complex_spikes(rng: &mut impl Rng, m: usize, n: usize, factor: f64) -> Result<DiracMeasure> {
    let x = separated_locations(rng, m, n, factor)?;
    DiracMeasure::new(x.into_iter().map(|x| (x, unit_phase(rng))).collect::<Vec<_>>())
}

/// `m` atoms on the LP grid with real weights, signed or positive.
pub fn grid_spikes(
    rng: &mut impl Rng,
    m: usize,
    n: usize,
    factor: f64,
    grid_size: usize,
    nonnegative: bool,
) -> Result<DiracMeasure> {
    let grid = lp_grid(grid_size);
    let idx = separated_grid_indices(rng, m, n, factor, grid_size)?;
    let atoms: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let w = signed_weight(rng);
            (grid[i].cos(), if nonnegative { w.abs() } else { w })
        })
        .collect();
    DiracMeasure::from_real(atoms)
}

/// Random degree-`r` spline with `m` separated knots: boundary values at
/// `-1` in `[-1, 1]` and jumps of the `r`-th derivative from [`signed_weight`].
pub fn random_spline(rng: &mut impl Rng, r: usize, m: usize, n: usize, factor: f64) -> Result<Spline> {
    let x = separated_locations(rng, m, n, factor)?;
    let jumps = DiracMeasure::from_real(x.into_iter().map(|x| (x, signed_weight(rng))).collect::<Vec<_>>())?;
    let left: Vec<Complex64> = (0..=r)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
        .collect();
    integrate_back(&jumps, &left, r)
}

/// `m` points in the square window, pairwise separated in the
/// componentwise-max `t` distance, by rejection.
pub fn separated_points_2d(rng: &mut impl Rng, m: usize, n: usize, factor: f64) -> Result<Vec<[f64; 2]>> {
    let sep = factor * PI / n as f64;
    let (lo, hi) = t_window(n);
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(m);
    let mut tries = 0;
    while pts.len() < m {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidInput(format!(
                "could not place {m} points {factor} pi / N apart for N = {n}"
            )));
        }
        let p = [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)];
        if pts
            .iter()
            .all(|q| (p[0] - q[0]).abs().max((p[1] - q[1]).abs()) >= sep)
        {
            pts.push(p);
        }
    }
    Ok(pts.into_iter().map(|[a, b]| [a.cos(), b.cos()]).collect())
}

/// Like [`separated_points_2d`] but on the tensor grid of `grid_size`
/// points per axis, uniform in `t` on `[0, pi]`.
pub fn separated_grid_points_2d(
    rng: &mut impl Rng,
    m: usize,
    n: usize,
    factor: f64,
    grid_size: usize,
) -> Result<Vec<[f64; 2]>> {
    if grid_size < 2 {
        return Err(Error::InvalidInput("grid needs at least two points".into()));
    }
    let sep = factor * PI / n as f64;
    let grid = lp_grid(grid_size);
    let (lo, hi) = t_window(n);
    let inside: Vec<usize> = (0..grid_size)
        .filter(|&i| grid[i] >= lo - 1e-12 && grid[i] <= hi + 1e-12)
        .collect();
    if inside.is_empty() {
        return Err(Error::InvalidInput(format!("no grid point of {grid_size} lies in the window")));
    }
    let mut picked: Vec<[usize; 2]> = Vec::with_capacity(m);
    let mut tries = 0;
    while picked.len() < m {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidInput(format!(
                "could not place {m} grid points {factor} pi / N apart for N = {n}"
            )));
        }
        let p = [inside[rng.gen_range(0..inside.len())], inside[rng.gen_range(0..inside.len())]];
        let far = |q: &[usize; 2]| {
            (grid[p[0]] - grid[q[0]]).abs().max((grid[p[1]] - grid[q[1]]).abs()) >= sep - 1e-12
        };
        if picked.iter().all(far) {
            picked.push(p);
        }
    }
    Ok(picked.into_iter().map(|[a, b]| [grid[a].cos(), grid[b].cos()]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_separation;

    #[test]
    fn separated_instances_pass_the_checker() {
        for seed in 0..20 {
            let mut r = rng(seed);
            let x = separated_locations(&mut r, 10, 128, 4.0).unwrap();
            assert!(check_separation(&x, 128).unwrap().satisfied);
        }
    }

    #[test]
    fn deterministic_and_infeasible() {
        let a = separated_locations(&mut rng(1), 10, 128, 4.0).unwrap();
        let b = separated_locations(&mut rng(1), 10, 128, 4.0).unwrap();
        assert_eq!(a, b);
        let err = separated_locations(&mut rng(1), 40, 128, 4.0).unwrap_err();
        assert!(err.to_string().contains("pi - 4 pi / N"));
    }

    #[test]
    fn grid_indices_are_spaced() {
        let mut r = rng(3);
        let idx = separated_grid_indices(&mut r, 20, 64, 0.5, 16 * 64 + 1).unwrap();
        assert_eq!(idx.len(), 20);
        assert!(idx.windows(2).all(|w| w[1] - w[0] >= 8));
    }

    #[test]
    fn grid_points_2d_are_separated_and_on_grid() {
        let n = 32;
        let g = 2 * n + 1;
        let pts = separated_grid_points_2d(&mut rng(4), 5, n, 5.76, g).unwrap();
        let rep = crate::bivariate::check_separation_2d(&pts, n, 5.76).unwrap();
        assert!(rep.satisfied, "{rep:?}");
        let h = PI / (g - 1) as f64;
        for p in pts {
            for v in p {
                let k = v.acos() / h;
                assert!((k - k.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 0, 1));
        assert_ne!(trial_seed(1, 0, 1), trial_seed(1, 1, 0));
    }
}
