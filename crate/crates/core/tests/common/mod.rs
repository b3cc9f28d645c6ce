//! Exhaustive one-dimensional enumeration used as an oracle for the jet
//! suprema. It reads values from its own table and follows the documented
//! evaluation order, so remainders agree bit for bit.

#![allow(dead_code)]

use rand::Rng;
use ultradiff::jets::{Jet, MultiIndex};

pub struct OracleJet {
    pub points: Vec<f64>,
    pub pcap: u32,
    /// `values[point][k] = F^k(point)`.
    pub values: Vec<Vec<f64>>,
}

pub struct OracleSups {
    pub norm: f64,
    pub seminorm: f64,
    pub a: Vec<f64>,
    /// `b[0] = 0`, `b[p + 1]` is the unweighted remainder sup for order `p`.
    pub b: Vec<f64>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

impl OracleJet {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let n_points = rng.gen_range(1..=3);
        let pcap = rng.gen_range(0..=4);
        let mut points: Vec<f64> = Vec::new();
        while points.len() < n_points {
            let p: f64 = rng.gen_range(-2.0..2.0);
            if points.iter().all(|q| (q - p).abs() > 1e-3) {
                points.push(p);
            }
        }
        let values = (0..n_points).map(|_| (0..=pcap).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
        OracleJet { points, pcap, values }
    }

    pub fn to_jet(&self) -> Jet {
        let entries = self
            .values
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(k, v)| (i, MultiIndex(vec![k as u32]), *v)));
        Jet::from_entries(1, self.points.iter().map(|p| vec![*p]).collect(), self.pcap, entries).unwrap()
    }

    pub fn remainder(&self, x: usize, y: usize, a: u32, p: u32) -> f64 {
        let dx = self.points[y] - self.points[x];
        let mut sum = 0.0;
        for b in 0..=(p - a) {
            let num = self.values[x][(a + b) as usize] * dx.powi(b as i32);
            sum += num / factorial(b);
        }
        self.values[y][a as usize] - sum
    }

    /// Weighted suprema against `exp(-log_weights[k])`.
    pub fn sups(&self, log_weights: &[f64], p_max: u32) -> OracleSups {
        let n = self.points.len();
        let mut a = vec![0.0f64; p_max as usize + 1];
        let mut norm: f64 = 0.0;
        for k in 0..=p_max as usize {
            for row in &self.values {
                a[k] = a[k].max(row[k].abs());
                norm = norm.max(row[k].abs() * (-log_weights[k]).exp());
            }
        }
        let mut b = vec![0.0f64; p_max as usize + 2];
        let mut seminorm: f64 = 0.0;
        for p in 0..=p_max {
            for al in 0..=p {
                let e = p + 1 - al;
                for x in 0..n {
                    for y in 0..n {
                        if x == y {
                            continue;
                        }
                        let d = (self.points[x] - self.points[y]).abs();
                        let r = self.remainder(x, y, al, p).abs() * factorial(e) / d.powi(e as i32);
                        b[p as usize + 1] = b[p as usize + 1].max(r);
                        seminorm = seminorm.max(r * (-log_weights[p as usize + 1]).exp());
                    }
                }
            }
        }
        OracleSups { norm, seminorm, a, b }
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
