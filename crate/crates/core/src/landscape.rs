//! Landscape-feature embedding of problem instances.
//!
//! A 32-factor vector computed from random-walk samples: dispersion of the
//! best points, least-squares meta-models, information content of the walk,
//! and nearest-better clustering. The factors identify problems for the
//! continual-design mode; they are not meant as a landscape analysis, so
//! the operationalizations below favour determinism and bounded cost.
//!
//! All "costs_runtime" entries are deterministic work surrogates (elementary
//! operations scaled by 1e-6), not wall-clock times: factor vectors must be
//! bit-reproducible across machines and runs.

use alloc::vec::Vec;

use rand::Rng;

use crate::fmath;
use crate::problems::{BitString, Objective};
use crate::seeds;

/// Points kept for pairwise statistics (dispersion, nearest-better).
const PAIRWISE_CAP: usize = 1000;
/// Rows kept for the regression designs.
const META_ROWS_CAP: usize = 2000;
/// Extra interaction columns kept in the *_w_interact designs.
const INTERACT_COLS_CAP: usize = 500;
/// Upper bound on ratio-type factors so degenerate fits stay bounded.
const RATIO_CAP: f64 = 1e3;

/// Factor names in fixed output order.
pub const FACTOR_NAMES: [&str; 32] = [
    "disp.ratio_mean_02",
    "disp.ratio_mean_05",
    "disp.ratio_mean_10",
    "disp.ratio_mean_25",
    "disp.ratio_median_02",
    "disp.ratio_median_05",
    "disp.ratio_median_10",
    "disp.ratio_median_25",
    "disp.diff_mean_02",
    "disp.diff_mean_05",
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_meta.quad_w_interact.adj_r2",
    "ela_meta.costs_runtime",
    "ic.h_max",
    "ic.eps_s",
    "ic.eps_max",
    "ic.eps_ratio",
    "ic.m0",
    "ic.costs_runtime",
    "nbc.nn_nb.sd_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.nn_nb.cor",
    "nbc.dist_ratio.coeff_var",
    "nbc.nb_fitness.cor",
    "nbc.costs_runtime",
];

/// The 32-factor problem embedding, names as in [`FACTOR_NAMES`].
#[derive(Clone, PartialEq, Debug)]
pub struct FactorVector {
    pub values: [f64; 32],
}

impl FactorVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FACTOR_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// A random walk over the solution space with cached fitness values.
#[derive(Clone, Debug)]
pub struct WalkSample {
    pub points: Vec<BitString>,
    pub fitnesses: Vec<f64>,
    pub seed: u64,
}

impl WalkSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map(|p| p.len()).unwrap_or(0)
    }
}

/// 100·d points from a 1-bit-flip random walk, all evaluated.
///
/// The walk is retained so initial populations can reuse its points
/// without spending extra function evaluations.
pub fn random_walk_sample(objective: &dyn Objective, seed: u64) -> WalkSample {
    let d = objective.dim();
    let count = 100 * d;
    let mut rng = seeds::rng(seed, &[seeds::tag::WALK]);
    let mut points = Vec::with_capacity(count);
    let mut fitnesses = Vec::with_capacity(count);
    let mut current = BitString::random(&mut rng, d);
    fitnesses.push(objective.evaluate(&current));
    points.push(current.clone());
    for _ in 1..count {
        current.flip(rng.random_range(0..d));
        fitnesses.push(objective.evaluate(&current));
        points.push(current.clone());
    }
    WalkSample {
        points,
        fitnesses,
        seed,
    }
}

/// Seeded subsample of at most `cap` point indices, in random order so that
/// fitness ties never fall back to walk order (walk-adjacent points are
/// close in Hamming distance, which would bias tie-broken "best" subsets).
fn subsample_indices(len: usize, cap: usize, seed: u64, salt: u64) -> Vec<usize> {
    let mut rng = seeds::rng(seed, &[seeds::tag::SUBSAMPLE, salt]);
    let mut idx: Vec<usize> = (0..len).collect();
    let keep = cap.min(len);
    for i in 0..keep {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(keep);
    idx
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    fmath::sqrt(var)
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let ma = mean(a);
    let mb = mean(b);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / fmath::sqrt(va * vb)
}

// ---------------------------------------------------------------------------
// Dispersion
// ---------------------------------------------------------------------------

/// Dispersion features: pairwise Hamming statistics of the best-q% points
/// against the whole (sub)sample, distances normalized by the dimension.
pub fn dispersion_features(sample: &WalkSample) -> [f64; 10] {
    let idx = subsample_indices(sample.len(), PAIRWISE_CAP, sample.seed, 1);
    let d = sample.dim() as f64;
    let n = idx.len();

    // order by fitness, ties kept in subsample order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sample.fitnesses[idx[b]]
            .partial_cmp(&sample.fitnesses[idx[a]])
            .unwrap()
            .then(a.cmp(&b))
    });

    let pair_dists = |members: &[usize]| -> Vec<f64> {
        let mut out = Vec::with_capacity(members.len() * (members.len().saturating_sub(1)) / 2);
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let dist = sample.points[idx[members[i]]].hamming(&sample.points[idx[members[j]]]);
                out.push(dist as f64 / d);
            }
        }
        out
    };

    let all: Vec<usize> = (0..n).collect();
    let mut all_d = pair_dists(&all);
    all_d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let all_mean = mean(&all_d);
    let all_median = median(&all_d);

    let mut out = [1.0f64; 10];
    let qs = [0.02, 0.05, 0.10, 0.25];
    for (qi, &q) in qs.iter().enumerate() {
        let m = (q * n as f64) as usize;
        if m < 2 {
            out[qi] = 1.0;
            out[4 + qi] = 1.0;
            continue;
        }
        let best: Vec<usize> = order[..m].to_vec();
        let mut bd = pair_dists(&best);
        bd.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let bm = mean(&bd);
        out[qi] = if all_mean > 0.0 { bm / all_mean } else { 1.0 };
        out[4 + qi] = if all_median > 0.0 {
            median(&bd) / all_median
        } else {
            1.0
        };
        if qi < 2 {
            out[8 + qi] = bm - all_mean;
        }
    }
    if ((0.02 * n as f64) as usize) < 2 {
        out[8] = 0.0;
    }
    if ((0.05 * n as f64) as usize) < 2 {
        out[9] = 0.0;
    }
    out
}

// ---------------------------------------------------------------------------
// Meta-models
// ---------------------------------------------------------------------------

struct Fit {
    coefficients: Vec<f64>,
    adj_r2: f64,
    ridged: bool,
}

/// Least squares via normal equations with a Cholesky solve; falls back to
/// a small ridge on rank deficiency.
fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Fit {
    let n = design.len();
    let p = design[0].len();
    // normal equations, symmetric build
    let mut xtx = alloc::vec![0.0f64; p * p];
    let mut xty = alloc::vec![0.0f64; p];
    for (row, &target) in design.iter().zip(y) {
        for i in 0..p {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            xty[i] += ri * target;
            for j in i..p {
                xtx[i * p + j] += ri * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[i * p + j] = xtx[j * p + i];
        }
    }

    let mean_diag = (0..p).map(|i| xtx[i * p + i]).sum::<f64>() / p as f64;
    let mut ridged = false;
    let beta = match cholesky_solve(&xtx, &xty, p) {
        Some(b) => b,
        None => {
            ridged = true;
            let mut damped = xtx.clone();
            let ridge = 1e-8 * (1.0 + mean_diag);
            for i in 0..p {
                damped[i * p + i] += ridge;
            }
            cholesky_solve(&damped, &xty, p).unwrap_or(alloc::vec![0.0; p])
        }
    };

    let y_mean = mean(y);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (row, &target) in design.iter().zip(y) {
        let pred: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        ss_res += (target - pred) * (target - pred);
        ss_tot += (target - y_mean) * (target - y_mean);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    let predictors = p - 1;
    let adj_r2 = if n > predictors + 1 {
        1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - predictors as f64 - 1.0)
    } else {
        r2
    };
    Fit {
        coefficients: beta,
        adj_r2,
        ridged,
    }
}

fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = alloc::vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * p + i] = fmath::sqrt(s);
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    // forward then back substitution
    let mut z = alloc::vec![0.0f64; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut x = alloc::vec![0.0f64; p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in (i + 1)..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

fn capped_ratio(max: f64, min: f64) -> f64 {
    (max / min.max(1e-12)).min(RATIO_CAP)
}

/// Seeded subset of interaction pairs `(i, j)`, `i < j`.
fn interaction_pairs(d: usize, cap: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = d * (d - 1) / 2;
    let mut all: Vec<(usize, usize)> = Vec::with_capacity(total);
    for i in 0..d {
        for j in (i + 1)..d {
            all.push((i, j));
        }
    }
    if total <= cap {
        return all;
    }
    let mut rng = seeds::rng(seed, &[seeds::tag::SUBSAMPLE, 2]);
    for i in 0..cap {
        let j = rng.random_range(i..total);
        all.swap(i, j);
    }
    all.truncate(cap);
    all
}

/// Regression meta-model features; `true` when any fit needed the ridge
/// fallback.
pub fn meta_model_features(sample: &WalkSample) -> ([f64; 10], bool) {
    let d = sample.dim();
    let rows = subsample_indices(sample.len(), META_ROWS_CAP, sample.seed, 3);
    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|&i| sample.fitnesses[i]).collect();
    let bit = |r: usize, c: usize| -> f64 {
        if sample.points[rows[r]].get(c) {
            1.0
        } else {
            0.0
        }
    };
    let pairs = interaction_pairs(d, INTERACT_COLS_CAP, sample.seed);
    let mut work: u64 = 0;
    let mut ridged = false;

    // linear
    let lin_design: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row = Vec::with_capacity(d + 1);
            row.push(1.0);
            for c in 0..d {
                row.push(bit(r, c));
            }
            row
        })
        .collect();
    work += (n * (d + 1) * (d + 1)) as u64;
    let lin = least_squares(&lin_design, &y);
    ridged |= lin.ridged;
    let abs_coefs: Vec<f64> = lin.coefficients[1..].iter().map(|c| c.abs()).collect();
    let coef_min = abs_coefs.iter().cloned().fold(f64::INFINITY, f64::min);
    let coef_max = abs_coefs.iter().cloned().fold(0.0f64, f64::max);

    // linear with interactions
    let li_design: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row = Vec::with_capacity(d + 1 + pairs.len());
            row.push(1.0);
            for c in 0..d {
                row.push(bit(r, c));
            }
            for &(i, j) in &pairs {
                row.push(bit(r, i) * bit(r, j));
            }
            row
        })
        .collect();
    let pli = d + 1 + pairs.len();
    work += (n * pli * pli) as u64;
    let lin_int = least_squares(&li_design, &y);
    ridged |= lin_int.ridged;

    // pure quadratic: squares of bits duplicate the bits themselves, so the
    // design is rank deficient by construction and the ridge decides the
    // split; the values stay finite and deterministic
    let q_design: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row = Vec::with_capacity(2 * d + 1);
            row.push(1.0);
            for c in 0..d {
                row.push(bit(r, c));
            }
            for c in 0..d {
                let b = bit(r, c);
                row.push(b * b);
            }
            row
        })
        .collect();
    let pq = 2 * d + 1;
    work += (n * pq * pq) as u64;
    let quad = least_squares(&q_design, &y);
    ridged |= quad.ridged;
    let qcoefs: Vec<f64> = quad.coefficients[d + 1..].iter().map(|c| c.abs()).collect();
    let qmin = qcoefs.iter().cloned().fold(f64::INFINITY, f64::min);
    let qmax = qcoefs.iter().cloned().fold(0.0f64, f64::max);

    // quadratic with interactions
    let qi_design: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row = Vec::with_capacity(2 * d + 1 + pairs.len());
            row.push(1.0);
            for c in 0..d {
                row.push(bit(r, c));
            }
            for c in 0..d {
                let b = bit(r, c);
                row.push(b * b);
            }
            for &(i, j) in &pairs {
                row.push(bit(r, i) * bit(r, j));
            }
            row
        })
        .collect();
    let pqi = 2 * d + 1 + pairs.len();
    work += (n * pqi * pqi) as u64;
    let quad_int = least_squares(&qi_design, &y);
    ridged |= quad_int.ridged;

    (
        [
            lin.adj_r2,
            lin.coefficients[0],
            coef_min,
            coef_max,
            capped_ratio(coef_max, coef_min),
            lin_int.adj_r2,
            quad.adj_r2,
            capped_ratio(qmax, qmin),
            quad_int.adj_r2,
            work as f64 * 1e-6,
        ],
        ridged,
    )
}

// ---------------------------------------------------------------------------
// Information content
// ---------------------------------------------------------------------------

/// Threshold grid: zero plus powers of ten.
fn epsilon_grid() -> Vec<f64> {
    let mut grid = alloc::vec![0.0];
    for k in -5..=6 {
        grid.push(fmath::powf(10.0, k as f64));
    }
    grid
}

fn symbols(diffs: &[f64], eps: f64) -> Vec<i8> {
    diffs
        .iter()
        .map(|&x| {
            if x > eps {
                1
            } else if x < -eps {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn entropy_of_pairs(sym: &[i8]) -> f64 {
    if sym.len() < 2 {
        return 0.0;
    }
    let mut counts = [[0usize; 3]; 3];
    for w in sym.windows(2) {
        counts[(w[0] + 1) as usize][(w[1] + 1) as usize] += 1;
    }
    let total = (sym.len() - 1) as f64;
    let mut h = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            if a == b {
                continue;
            }
            let p = counts[a][b] as f64 / total;
            if p > 0.0 {
                h -= p * fmath::ln(p) / fmath::ln(6.0);
            }
        }
    }
    h
}

/// Partial information content: alternation rate of the zero-filtered
/// symbol sequence.
fn partial_information(sym: &[i8]) -> f64 {
    let mut last: i8 = 0;
    let mut alternations = 0usize;
    for &s in sym {
        if s != 0 {
            if last != 0 && s != last {
                alternations += 1;
            } else if last == 0 {
                alternations += 1; // first non-zero symbol starts the slope sequence
            }
            last = s;
        }
    }
    if sym.is_empty() {
        0.0
    } else {
        alternations as f64 / sym.len() as f64
    }
}

/// Information-content features over the walk's fitness differences.
pub fn info_content_features(sample: &WalkSample) -> [f64; 6] {
    let diffs: Vec<f64> = sample
        .fitnesses
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();
    let grid = epsilon_grid();
    let mut h_values = Vec::with_capacity(grid.len());
    let mut m_values = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let sym = symbols(&diffs, eps);
        h_values.push(entropy_of_pairs(&sym));
        m_values.push(partial_information(&sym));
    }
    let mut h_max = 0.0;
    let mut eps_max = 0.0;
    for (i, &h) in h_values.iter().enumerate() {
        if h > h_max {
            h_max = h;
            eps_max = grid[i];
        }
    }
    let eps_s = grid
        .iter()
        .zip(&h_values)
        .find(|(_, &h)| h < 0.05)
        .map(|(&e, _)| e)
        .unwrap_or(*grid.last().unwrap());
    let m0 = m_values[0];
    let eps_ratio = if m0 > 0.0 {
        grid.iter()
            .zip(&m_values)
            .find(|(_, &m)| m < 0.5 * m0)
            .map(|(&e, _)| e)
            .unwrap_or(*grid.last().unwrap())
    } else {
        0.0
    };
    let work = (diffs.len() * grid.len()) as f64 * 1e-6;
    [h_max, eps_s, eps_max, eps_ratio, m0, work]
}

// ---------------------------------------------------------------------------
// Nearest-better clustering
// ---------------------------------------------------------------------------

/// Nearest-neighbour vs nearest-better statistics on a subsample.
pub fn nbc_features(sample: &WalkSample) -> [f64; 6] {
    let idx = subsample_indices(sample.len(), PAIRWISE_CAP, sample.seed, 4);
    let n = idx.len();
    let mut nn = alloc::vec![f64::INFINITY; n];
    let mut nb = alloc::vec![f64::INFINITY; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = sample.points[idx[i]].hamming(&sample.points[idx[j]]) as f64;
            if dist < nn[i] {
                nn[i] = dist;
            }
            if sample.fitnesses[idx[j]] > sample.fitnesses[idx[i]] && dist < nb[i] {
                nb[i] = dist;
            }
        }
    }
    let defined: Vec<usize> = (0..n).filter(|&i| nb[i].is_finite()).collect();
    let work = (n * n) as f64 * 1e-6;
    if defined.len() < 2 {
        // flat landscape: nobody has a better neighbour
        return [1.0, 1.0, 0.0, 0.0, 0.0, work];
    }
    let nn_all: Vec<f64> = (0..n).map(|i| nn[i]).collect();
    let nn_d: Vec<f64> = defined.iter().map(|&i| nn[i]).collect();
    let nb_d: Vec<f64> = defined.iter().map(|&i| nb[i]).collect();
    let f_d: Vec<f64> = defined.iter().map(|&i| sample.fitnesses[idx[i]]).collect();
    let ratios: Vec<f64> = defined.iter().map(|&i| nn[i] / nb[i]).collect();

    let sd_nb = std_dev(&nb_d);
    let sd_ratio = if sd_nb > 0.0 {
        (std_dev(&nn_all) / sd_nb).min(RATIO_CAP)
    } else {
        1.0
    };
    let mean_nb = mean(&nb_d);
    let mean_ratio = if mean_nb > 0.0 {
        (mean(&nn_all) / mean_nb).min(RATIO_CAP)
    } else {
        1.0
    };
    let ratio_mean = mean(&ratios);
    let coeff_var = if ratio_mean > 0.0 {
        std_dev(&ratios) / ratio_mean
    } else {
        0.0
    };
    [
        sd_ratio,
        mean_ratio,
        pearson(&nn_d, &nb_d),
        coeff_var,
        pearson(&nb_d, &f_d),
        work,
    ]
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

fn sanitize(v: f64) -> f64 {
    if !v.is_finite() {
        0.0
    } else {
        v.clamp(-1e6, 1e6)
    }
}

/// Per-trial factor computation from one walk sample.
pub fn factors_from_sample(sample: &WalkSample) -> FactorVector {
    let disp = dispersion_features(sample);
    let (meta, _ridged) = meta_model_features(sample);
    let ic = info_content_features(sample);
    let nbc = nbc_features(sample);
    let mut values = [0.0f64; 32];
    values[..10].copy_from_slice(&disp);
    values[10..20].copy_from_slice(&meta);
    values[20..26].copy_from_slice(&ic);
    values[26..32].copy_from_slice(&nbc);
    for v in &mut values {
        *v = sanitize(*v);
    }
    FactorVector { values }
}

/// The problem embedding: five trials of sampling and factor calculation,
/// averaged. Deterministic given the master seed.
pub fn compute_factors(objective: &dyn Objective, master_seed: u64) -> FactorVector {
    let mut acc = [0.0f64; 32];
    let trials = 5;
    for trial in 0..trials {
        let seed = seeds::derive(master_seed, &[seeds::tag::ELA_TRIAL, trial]);
        let sample = random_walk_sample(objective, seed);
        let fv = factors_from_sample(&sample);
        for (a, v) in acc.iter_mut().zip(&fv.values) {
            *a += v;
        }
    }
    let mut values = [0.0f64; 32];
    for (o, a) in values.iter_mut().zip(&acc) {
        *o = sanitize(a / trials as f64);
    }
    FactorVector { values }
}
