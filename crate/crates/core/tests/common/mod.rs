#![allow(dead_code, clippy::needless_range_loop)]

use pdxpow_core::{read_pilot_csv, Dataset, PilotDataset, PowerRow, PowerTable, Record};

pub fn data_path(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn animals1() -> PilotDataset {
    read_pilot_csv(data_path("animals1.csv")).expect("animals1 fixture")
}

pub fn animals2() -> PilotDataset {
    read_pilot_csv(data_path("animals2.csv")).expect("animals2 fixture")
}

/// Reference power (%) for the animals1-based ANOVA run, n = 3..10 by m = 2..8.
pub const ANIMALS1_POWER: [[f64; 7]; 8] = [
    [49.6, 67.0, 77.4, 87.2, 94.2, 96.0, 98.2],
    [64.6, 79.6, 88.0, 96.0, 98.2, 99.4, 99.8],
    [72.6, 86.8, 94.8, 98.6, 99.2, 99.8, 100.0],
    [80.4, 92.8, 97.4, 99.8, 100.0, 100.0, 100.0],
    [85.6, 96.2, 99.4, 100.0, 100.0, 100.0, 100.0],
    [89.0, 98.4, 100.0, 100.0, 100.0, 100.0, 100.0],
    [92.2, 98.8, 99.8, 100.0, 100.0, 100.0, 100.0],
    [95.8, 99.4, 99.8, 100.0, 100.0, 100.0, 100.0],
];

pub fn animals1_power_table() -> PowerTable {
    let mut rows = Vec::new();
    for (i, powers) in ANIMALS1_POWER.iter().enumerate() {
        for (j, &p) in powers.iter().enumerate() {
            let (n, m) = (i + 3, j + 2);
            rows.push(PowerRow {
                n,
                m,
                total_animals: 2 * n * m,
                power_pct: p,
                convergence_pct: 100.0,
                censoring_pct: None,
            });
        }
    }
    PowerTable { rows }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// Restricted log-likelihood profile evaluated with explicit dense matrices:
/// `V = I + theta * Z Z'`, GLS by Gaussian elimination.
pub struct DenseOracle {
    y: Vec<f64>,
    x: Vec<[f64; 2]>,
    line: Vec<usize>,
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, f64) {
    // Returns A^-1 B and log|det A| via partial-pivot elimination.
    let n = a.len();
    let mut logdet = 0.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        let piv = a[c][c];
        logdet += piv.abs().ln();
        for r in 0..n {
            if r != c {
                let f = a[r][c] / piv;
                if f != 0.0 {
                    for k in 0..n {
                        a[r][k] -= f * a[c][k];
                    }
                    for k in 0..b[r].len() {
                        b[r][k] -= f * b[c][k];
                    }
                }
            }
        }
    }
    for r in 0..n {
        let piv = a[r][r];
        for v in b[r].iter_mut() {
            *v /= piv;
        }
    }
    (b, logdet)
}

impl DenseOracle {
    pub fn new(d: &Dataset) -> Self {
        DenseOracle {
            y: d.records.iter().map(|r| r.y.ln()).collect(),
            x: d.records
                .iter()
                .map(|r| [1.0, if r.treated { 1.0 } else { 0.0 }])
                .collect(),
            line: d.records.iter().map(|r| r.line).collect(),
        }
    }

    /// (beta, sigma2, restricted loglik)
    pub fn profile(&self, theta: f64) -> (f64, f64, f64) {
        let n = self.y.len();
        let v: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (i == j) as u8 as f64
                            + if self.line[i] == self.line[j] {
                                theta
                            } else {
                                0.0
                            }
                    })
                    .collect()
            })
            .collect();
        let rhs: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![self.x[i][0], self.x[i][1], self.y[i]])
            .collect();
        let (vinv_rhs, logdet_v) = solve(v, rhs);
        let mut xtx = vec![vec![0.0; 2]; 2];
        let mut xty = vec![vec![0.0]; 2];
        let mut yty = 0.0;
        for i in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    xtx[a][b] += self.x[i][a] * vinv_rhs[i][b];
                }
                xty[a][0] += self.x[i][a] * vinv_rhs[i][2];
            }
            yty += self.y[i] * vinv_rhs[i][2];
        }
        let (coef, logdet_xtx) = solve(xtx, xty.clone());
        let rss = yty - coef[0][0] * xty[0][0] - coef[1][0] * xty[1][0];
        let dof = (n - 2) as f64;
        let s2 = rss / dof;
        let ll =
            -0.5 * (dof * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0) + logdet_v + logdet_xtx);
        (coef[1][0], s2, ll)
    }
}

/// Marginal log-likelihood by a plain trapezoid rule over `a in [-8 tau, 8 tau]`,
/// multiplying the per-animal Weibull contributions directly.
pub fn trapezoid_loglik(lambda: f64, nu: f64, beta: f64, tau2: f64, data: &Dataset) -> f64 {
    const POINTS: usize = 200_001;
    let tau = tau2.sqrt();
    let (lo, hi) = (-8.0 * tau, 8.0 * tau);
    let h = (hi - lo) / (POINTS - 1) as f64;
    let mut total = 0.0;
    for line in 0..data.n_lines {
        let animals: Vec<&Record> = data.records.iter().filter(|r| r.line == line).collect();
        if animals.is_empty() {
            continue;
        }
        let mut integral = 0.0;
        for i in 0..POINTS {
            let a = lo + h * i as f64;
            let density = (-0.5 * a * a / tau2).exp() / (2.0 * std::f64::consts::PI * tau2).sqrt();
            let mut prod = density;
            for r in &animals {
                let eta = if r.treated { beta } else { 0.0 } + a;
                let cum = lambda * r.y.powf(nu) * eta.exp();
                let haz = if r.event {
                    lambda * nu * r.y.powf(nu - 1.0) * eta.exp()
                } else {
                    1.0
                };
                prod *= haz * (-cum).exp();
            }
            let weight = if i == 0 || i == POINTS - 1 { 0.5 } else { 1.0 };
            integral += weight * prod;
        }
        total += (integral * h).ln();
    }
    total
}
