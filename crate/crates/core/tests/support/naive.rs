//! Loop-level reference implementation of the joint objective with the MRC
//! combiners frozen, plus a central-difference gradient over the real and
//! imaginary part of every phase entry. Shares no code with the library's
//! evaluation path.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use ris_occult::channel::ChannelSet;
use ris_occult::{CMatrix, CVector, Complex64};

pub struct NaiveObjective<'a> {
    pub set: &'a ChannelSet,
    pub rho: f64,
    pub epsilon: f64,
    pub wiretapper: Vec<Complex64>,
}

impl NaiveObjective<'_> {
    fn m(&self) -> usize {
        self.set.h.nrows()
    }

    fn n(&self) -> usize {
        self.set.h.ncols()
    }

    fn k(&self) -> usize {
        self.set.ues.len()
    }

    /// `v[k][m] = Σ_n H[m,n] φ_n g_k[n]`.
    pub fn user_channels(&self, phase: &[Complex64]) -> Vec<Vec<Complex64>> {
        (0..self.k())
            .map(|k| {
                (0..self.m())
                    .map(|m| (0..self.n()).map(|n| self.set.h[(m, n)] * phase[n] * self.set.g[k][n]).sum())
                    .collect()
            })
            .collect()
    }

    /// MRC combiners at `phase`.
    pub fn combiners(&self, phase: &[Complex64]) -> Vec<Vec<Complex64>> {
        self.user_channels(phase)
            .into_iter()
            .map(|v| {
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.into_iter().map(|z| z / norm).collect()
            })
            .collect()
    }

    fn effective(&self, phase: &[Complex64]) -> Vec<Vec<Complex64>> {
        // [m][k] of H·diag(phase)·A
        (0..self.m())
            .map(|m| {
                (0..self.k())
                    .map(|k| (0..self.n()).map(|n| self.set.h[(m, n)] * phase[n] * self.set.a[(n, k)]).sum())
                    .collect()
            })
            .collect()
    }

    pub fn projection(&self, phase: &[Complex64]) -> f64 {
        let gb = self.effective(phase);
        let gw = self.effective(&self.wiretapper);
        let mut acc = 0.0;
        for i in 0..self.k() {
            for j in 0..self.k() {
                let c: Complex64 = (0..self.m()).map(|m| gb[m][i].conj() * gw[m][j]).sum();
                acc += c.norm_sqr();
            }
        }
        acc
    }

    /// Objective with combiners held at `w`.
    pub fn value_fixed(&self, phase: &[Complex64], w: &[Vec<Complex64>]) -> f64 {
        let v = self.user_channels(phase);
        let noise = self.set.noise_power.max(1e-30);
        let ip = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
        let mut rate = 0.0;
        for k in 0..self.k() {
            let nu = self.set.ues[k].power * ip(&w[k], &v[k]).norm_sqr();
            let mut delta = noise * w[k].iter().map(|z| z.norm_sqr()).sum::<f64>();
            for j in (0..self.k()).filter(|&j| j != k) {
                delta += self.set.ues[j].power * ip(&w[k], &v[j]).norm_sqr();
            }
            rate += (1.0 + nu / delta).log2();
        }
        let gamma = (self.projection(phase) - self.epsilon).max(0.0);
        self.rho * rate - (1.0 - self.rho) * gamma
    }

    /// Objective with combiners recomputed at `phase`.
    pub fn value(&self, phase: &[Complex64]) -> f64 {
        let w = self.combiners(phase);
        self.value_fixed(phase, &w)
    }

    /// `∂f/∂Re φ_n + j ∂f/∂Im φ_n` by central differences; combiners frozen
    /// at `phase` when `freeze` is set.
    pub fn fd_gradient(&self, phase: &[Complex64], step: f64, freeze: bool) -> Vec<Complex64> {
        let w = self.combiners(phase);
        let eval = |p: &[Complex64]| {
            if freeze {
                self.value_fixed(p, &w)
            } else {
                self.value(p)
            }
        };
        (0..phase.len())
            .map(|n| {
                let mut diff = [0.0; 2];
                for (slot, dir) in [Complex64::new(step, 0.0), Complex64::new(0.0, step)].iter().enumerate() {
                    let mut plus = phase.to_vec();
                    let mut minus = phase.to_vec();
                    plus[n] += dir;
                    minus[n] -= dir;
                    diff[slot] = (eval(&plus) - eval(&minus)) / (2.0 * step);
                }
                Complex64::new(diff[0], diff[1])
            })
            .collect()
    }
}

/// `‖a − b‖ / ‖b‖`.
pub fn relative_error(a: &CVector, b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

pub fn to_vec(v: &CVector) -> Vec<Complex64> {
    v.iter().copied().collect()
}

pub fn column(m: &CMatrix, k: usize) -> Vec<Complex64> {
    m.column(k).iter().copied().collect()
}
