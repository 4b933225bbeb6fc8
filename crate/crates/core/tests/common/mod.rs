//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use std::io::Write;

/// Symmetric positive-definite band matrix stored by rows of the lower
/// band: entry (i, j) with i - bw <= j <= i lives at `rows[i][j + bw - i]`.
pub struct Band {
    pub n: usize,
    pub bw: usize,
    rows: Vec<Vec<f64>>,
}

impl Band {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Band { n, bw, rows: vec![vec![0.0; bw + 1]; n] }
    }

    /// Adds `v` at (i, j); only the lower triangle is stored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry outside band");
        self.rows[i][j + self.bw - i] += v;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        if i < j || i - j > self.bw {
            0.0
        } else {
            self.rows[i][j + self.bw - i]
        }
    }

    /// Banded Cholesky factorization followed by two triangular solves.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut l = Band::zeros(n, bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.at(i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    assert!(s > 0.0, "matrix not positive definite at row {i}");
                    l.rows[i][bw] = s.sqrt();
                } else {
                    l.rows[i][j + bw - i] = s / l.at(j, j);
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in i.saturating_sub(bw)..i {
                y[i] -= l.at(i, k) * y[k];
            }
            y[i] /= l.at(i, i);
        }
        for i in (0..n).rev() {
            for k in i + 1..(i + bw + 1).min(n) {
                y[i] -= l.at(k, i) * y[k];
            }
            y[i] /= l.at(i, i);
        }
        y
    }
}

/// One line per criterion, written past the test harness's capture so it
/// always appears in the log.
pub fn report(label: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{status} {label}: {detail}");
}

#[test]
fn band_solver_matches_tridiagonal() {
    let n = 6;
    let mut a = Band::zeros(n, 1);
    for i in 0..n {
        a.add(i, i, 2.0);
        if i > 0 {
            a.add(i, i - 1, -1.0);
        }
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 - 1.0).collect();
    let b: Vec<f64> = (0..n)
        .map(|i| 2.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 })
        .collect();
    let y = a.solve(&b);
    for i in 0..n {
        assert!((x[i] - y[i]).abs() < 1e-13);
    }
}
