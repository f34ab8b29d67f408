//! Generators and independent oracles shared by the integration suites.
//! Nothing here calls into the estimation, strategy or backtest code it is
//! used to check.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use riskonly::estimation::CovarianceEstimate;
use riskonly::market_data::{ReturnPanel, YearMonth};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `A Aᵀ / k` scaled to monthly-return magnitudes, plus a small ridge so the
/// matrix is comfortably invertible.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let k = n + 2;
    let a = DMatrix::from_fn(n, k, |_, _| normal(rng));
    let scale: f64 = rng.gen_range(0.0005..0.005);
    let mut s = &a * a.transpose() * (scale / k as f64);
    for i in 0..n {
        s[(i, i)] += 1e-2 * scale;
    }
    s
}

pub fn estimate(m: DMatrix<f64>) -> CovarianceEstimate {
    CovarianceEstimate::from_matrix(m, 0, 0)
}

/// Uniform draw from the open simplex.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

pub fn quad(s: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let mut v = 0.0;
    for i in 0..n {
        for j in 0..n {
            v += w[i] * s[(i, j)] * w[j];
        }
    }
    v
}

/// Smallest `wᵀΣw` over the simplex grid with spacing `1/steps`, N = 2 or 3.
pub fn grid_min_variance(s: &DMatrix<f64>, steps: usize) -> (f64, Vec<f64>) {
    let h = 1.0 / steps as f64;
    let mut best = (f64::INFINITY, Vec::new());
    match s.nrows() {
        2 => {
            for i in 0..=steps {
                let w = [i as f64 * h, 1.0 - i as f64 * h];
                let v = quad(s, &w);
                if v < best.0 {
                    best = (v, w.to_vec());
                }
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 * h;
                    let b = j as f64 * h;
                    let w = [a, b, (1.0 - a - b).max(0.0)];
                    let v = quad(s, &w);
                    if v < best.0 {
                        best = (v, w.to_vec());
                    }
                }
            }
        }
        n => panic!("grid search supports 2 or 3 assets, got {n}"),
    }
    best
}

/// Textbook two-pass sample covariance with the `T − 1` divisor. `cols[j]` is
/// the series of asset `j`.
pub fn two_pass_covariance(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.len();
    let t = cols[0].len() as f64;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / t).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..cols[i].len() {
                acc += (cols[i][k] - means[i]) * (cols[j][k] - means[j]);
            }
            out[i][j] = acc / (t - 1.0);
        }
    }
    out
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Exact long-only minimum variance by enumerating every support set and
/// keeping the best feasible budget solution.
pub fn subset_min_variance(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| s[i][j]).collect()).collect();
        let x = gauss_solve(sub, vec![1.0; idx.len()]);
        let total: f64 = x.iter().sum();
        let x: Vec<f64> = x.iter().map(|v| v / total).collect();
        if x.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (&i, &v) in idx.iter().zip(&x) {
            w[i] = v;
        }
        let mut var = 0.0;
        for i in 0..n {
            for j in 0..n {
                var += w[i] * s[i][j] * w[j];
            }
        }
        if best.as_ref().map_or(true, |(b, _)| var < *b) {
            best = Some((var, w));
        }
    }
    best.expect("a single asset is always feasible").1
}

pub fn month_labels(n: usize) -> Vec<YearMonth> {
    let mut d = YearMonth::new(1988, 1).unwrap();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(d);
        d = d.succ();
    }
    out
}

pub fn panel_from_rows(assets: &[&str], rows: &[Vec<f64>]) -> ReturnPanel {
    let t = rows.len();
    let n = assets.len();
    ReturnPanel::new(
        month_labels(t),
        assets.iter().map(|a| a.to_string()).collect(),
        DMatrix::from_fn(t, n, |i, j| rows[i][j]),
    )
    .unwrap()
}

pub const ASSETS: [&str; 4] = ["equity", "commodity", "corp", "treasury"];

pub fn balanced_map() -> BTreeMap<String, f64> {
    [("equity", 0.6), ("commodity", 0.2), ("corp", 0.1), ("treasury", 0.1)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

pub const BALANCED: [f64; 4] = [0.6, 0.2, 0.1, 0.1];

/// Correlated Gaussian returns with the given monthly means, volatilities and
/// a common correlation structure.
pub fn gaussian_rows(
    rng: &mut ChaCha8Rng,
    months: usize,
    means: &[f64],
    vols: &[f64],
    corr: &DMatrix<f64>,
) -> Vec<Vec<f64>> {
    let l = corr.clone().cholesky().expect("correlation must be PD").l();
    let n = vols.len();
    (0..months)
        .map(|_| {
            let z: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
            (0..n)
                .map(|i| means[i] + vols[i] * (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Four assets: two high-volatility (equity, commodity), two low (corp,
/// treasury), mild cross correlation.
pub fn planted_panel(seed: u64, months: usize) -> ReturnPanel {
    let corr = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.3, 0.1, 0.05, //
            0.3, 1.0, 0.05, 0.0, //
            0.1, 0.05, 1.0, 0.5, //
            0.05, 0.0, 0.5, 1.0,
        ],
    );
    let rows = gaussian_rows(&mut rng(seed), months, &[0.008, 0.006, 0.005, 0.004], &[0.045, 0.06, 0.012, 0.016], &corr);
    panel_from_rows(&ASSETS, &rows)
}

/// Volatility regimes that switch every 12–30 months, so risk-based targets
/// move around while the fixed mix only drifts.
pub fn regime_panel(seed: u64, months: usize) -> ReturnPanel {
    let mut g = rng(seed);
    let corr = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.2, 0.1, 0.0, //
            0.2, 1.0, 0.0, 0.0, //
            0.1, 0.0, 1.0, 0.4, //
            0.0, 0.0, 0.4, 1.0,
        ],
    );
    let calm = [0.03, 0.04, 0.01, 0.012];
    let mut rows = Vec::with_capacity(months);
    let mut multipliers = [1.0; 4];
    let mut next_switch = 0;
    while rows.len() < months {
        if rows.len() == next_switch {
            for m in multipliers.iter_mut() {
                *m = if g.gen_bool(0.5) { 1.0 } else { 4.0 };
            }
            next_switch += g.gen_range(12..30);
        }
        let vols: Vec<f64> = calm.iter().zip(&multipliers).map(|(v, m)| v * m).collect();
        rows.extend(gaussian_rows(&mut g, 1, &[0.007, 0.005, 0.004, 0.004], &vols, &corr));
    }
    panel_from_rows(&ASSETS, &rows)
}

/// Output of [`reference_backtest`] for one strategy.
pub struct ReferenceRun {
    pub gross: Vec<f64>,
    /// `None` for the initial purchase.
    pub turnover: Vec<Option<f64>>,
    pub net: Vec<Vec<f64>>,
    pub cumulative: Vec<Vec<f64>>,
}

fn column_window(rows: &[Vec<f64>], start: usize, end: usize, j: usize) -> Vec<f64> {
    rows[start..end].iter().map(|r| r[j]).collect()
}

/// Straight-line backtest of one strategy: estimate from `[t − window, t)`,
/// hold through month `t`, drift, compare with the next target.
pub fn reference_backtest(rows: &[Vec<f64>], window: usize, strategy: &str, costs: &[f64]) -> ReferenceRun {
    let n = rows[0].len();
    let bench_series: Vec<f64> = rows.iter().map(|r| r.iter().zip(BALANCED).map(|(x, w)| x * w).sum()).collect();
    let mut out = ReferenceRun {
        gross: Vec::new(),
        turnover: Vec::new(),
        net: vec![Vec::new(); costs.len()],
        cumulative: vec![Vec::new(); costs.len()],
    };
    let mut wealth = vec![1.0; costs.len()];
    let mut held: Option<Vec<f64>> = None;
    for t in window..rows.len() {
        let cols: Vec<Vec<f64>> = (0..n).map(|j| column_window(rows, t - window, t, j)).collect();
        let cov = two_pass_covariance(&cols);
        let mut target: Vec<f64> = match strategy {
            "balanced" => BALANCED.to_vec(),
            "equal-weight" => vec![1.0; n],
            "min-variance" => subset_min_variance(&cov),
            "risk-parity" => (0..n).map(|i| 1.0 / cov[i][i].sqrt()).collect(),
            "low-beta" => {
                let mut cols_b = cols.clone();
                cols_b.push(bench_series[t - window..t].to_vec());
                let c = two_pass_covariance(&cols_b);
                (0..n).map(|i| 1.0 / (c[i][n] / c[n][n]).max(0.05)).collect()
            }
            other => panic!("unknown strategy {other}"),
        };
        let total: f64 = target.iter().sum();
        for w in target.iter_mut() {
            *w /= total;
        }

        let turnover = held.as_ref().map(|prev| {
            let r = &rows[t - 1];
            let growth: f64 = 1.0 + prev.iter().zip(r).map(|(w, x)| w * x).sum::<f64>();
            let drifted: Vec<f64> = prev.iter().zip(r).map(|(w, x)| w * (1.0 + x) / growth).collect();
            let bought: f64 = target.iter().zip(&drifted).map(|(a, b)| (a - b).max(0.0)).sum();
            let sold: f64 = target.iter().zip(&drifted).map(|(a, b)| (b - a).max(0.0)).sum();
            bought.min(sold)
        });
        let gross: f64 = target.iter().zip(&rows[t]).map(|(w, x)| w * x).sum();
        for (c, rate) in costs.iter().enumerate() {
            let net = gross - rate * turnover.unwrap_or(0.0);
            wealth[c] *= 1.0 + net;
            out.net[c].push(net);
            out.cumulative[c].push(wealth[c]);
        }
        out.gross.push(gross);
        out.turnover.push(turnover);
        held = Some(target);
    }
    out
}

/// Writes a panel CSV and a matching study configuration into `dir`.
pub fn write_study(dir: &std::path::Path, panel: &ReturnPanel, extra: &str) -> std::path::PathBuf {
    let mut csv = Vec::new();
    panel.write_csv(&mut csv).unwrap();
    std::fs::write(dir.join("panel.csv"), csv).unwrap();
    let config = format!(
        "panel = \"panel.csv\"\noutput_dir = \"reports\"\n{extra}\n[benchmark]\nequity = 0.6\ncommodity = 0.2\ncorp = 0.1\ntreasury = 0.1\n"
    );
    let path = dir.join("study.toml");
    std::fs::write(&path, config).unwrap();
    path
}
