//! Adapters exposing rate-allocation objectives to the barrier solver.
//!
//! The free variables are a subset of the `(rank, subcarrier)` entries,
//! ordered subcarrier-major. Entries outside the subset are pinned to zero.

use nalgebra::DMatrix;

use super::barrier::SmoothObjective;
use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::objective::{ColumnTerms, SurrogateColumn, SurrogateParams};
use crate::transform::RateAllocation;

enum Kind<'a> {
    Surrogate(Vec<SurrogateColumn<'a>>),
    /// Transmission power plus decoding power with a fixed activity pattern,
    /// which makes the decoding term linear.
    FixedSupport {
        terms: Vec<ColumnTerms>,
        active: Vec<Vec<bool>>,
    },
}

pub(crate) struct RateProblem<'a> {
    num_ranks: usize,
    /// Per subcarrier: `(rank, variable index)` of the free entries.
    columns: Vec<Vec<(usize, usize)>>,
    dim: usize,
    kind: Kind<'a>,
}

impl<'a> RateProblem<'a> {
    /// Every entry free, majorizer objective.
    pub fn surrogate(ch: &ChannelSet, cfg: &SystemConfig, params: &'a SurrogateParams) -> Self {
        let (m, n) = (ch.num_users(), ch.num_subcarriers());
        let active = vec![vec![true; m]; n];
        let columns = Self::layout(&active);
        let cols = (0..n).map(|sc| SurrogateColumn::new(ch, cfg, params, sc)).collect();
        RateProblem {
            num_ranks: m,
            dim: m * n,
            columns,
            kind: Kind::Surrogate(cols),
        }
    }

    /// Free entries exactly where `active[n][rank]` holds, true power
    /// objective.
    pub fn fixed_support(ch: &ChannelSet, cfg: &SystemConfig, active: Vec<Vec<bool>>) -> Self {
        let n = ch.num_subcarriers();
        let columns = Self::layout(&active);
        let dim = columns.iter().map(Vec::len).sum();
        let terms = (0..n).map(|sc| ColumnTerms::new(ch, cfg, sc)).collect();
        RateProblem {
            num_ranks: ch.num_users(),
            dim,
            columns,
            kind: Kind::FixedSupport { terms, active },
        }
    }

    fn layout(active: &[Vec<bool>]) -> Vec<Vec<(usize, usize)>> {
        let mut next = 0;
        active
            .iter()
            .map(|col| {
                col.iter()
                    .enumerate()
                    .filter(|(_, &on)| on)
                    .map(|(j, _)| {
                        next += 1;
                        (j, next - 1)
                    })
                    .collect()
            })
            .collect()
    }

    /// Demand constraints: one row per user summing its free entries.
    pub fn constraints(&self, ch: &ChannelSet, cfg: &SystemConfig) -> (DMatrix<f64>, Vec<f64>) {
        let mut a = DMatrix::zeros(self.num_ranks, self.dim);
        for (sc, col) in self.columns.iter().enumerate() {
            for &(j, v) in col {
                a[(ch.user_at(j, sc), v)] = 1.0;
            }
        }
        (a, cfg.rate_demand_mbps.clone())
    }

    /// Users with no free entry anywhere.
    pub fn uncovered_users(&self, ch: &ChannelSet) -> Vec<usize> {
        let mut covered = vec![false; self.num_ranks];
        for (sc, col) in self.columns.iter().enumerate() {
            for &(j, _) in col {
                covered[ch.user_at(j, sc)] = true;
            }
        }
        (0..self.num_ranks).filter(|&u| !covered[u]).collect()
    }

    pub fn gather(&self, r: &RateAllocation) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (sc, col) in self.columns.iter().enumerate() {
            for &(j, v) in col {
                x[v] = r.get(j, sc);
            }
        }
        x
    }

    pub fn scatter(&self, x: &[f64]) -> RateAllocation {
        let mut out = DMatrix::zeros(self.num_ranks, self.columns.len());
        for (sc, col) in self.columns.iter().enumerate() {
            for &(j, v) in col {
                out[(j, sc)] = x[v].max(0.0);
            }
        }
        RateAllocation::from_matrix_unchecked(out)
    }

    fn column_values(&self, x: &[f64], sc: usize, buf: &mut [f64]) {
        buf.fill(0.0);
        for &(j, v) in &self.columns[sc] {
            buf[j] = x[v];
        }
    }
}

impl SmoothObjective for RateProblem<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.num_ranks];
        let mut total = 0.0;
        for sc in 0..self.columns.len() {
            self.column_values(x, sc, &mut buf);
            total += match &self.kind {
                Kind::Surrogate(cols) => cols[sc].value(&buf),
                Kind::FixedSupport { terms, active } => {
                    let t = &terms[sc];
                    let mut decoded = 0.0;
                    let mut decoding = 0.0;
                    for j in 0..buf.len() {
                        decoded += buf[j];
                        if active[sc][j] {
                            decoding += t.lambda[j] * decoded;
                        }
                    }
                    t.transmission(&buf) + decoding
                }
            };
        }
        total
    }

    fn derivs(&self, x: &[f64], g: &mut [f64], mut h: Option<&mut DMatrix<f64>>) {
        let m = self.num_ranks;
        let mut buf = vec![0.0; m];
        let mut gcol = vec![0.0; m];
        let mut hcol = DMatrix::zeros(m, m);
        g.fill(0.0);
        if let Some(h) = h.as_deref_mut() {
            h.fill(0.0);
        }
        for sc in 0..self.columns.len() {
            let vars = &self.columns[sc];
            if vars.is_empty() {
                continue;
            }
            self.column_values(x, sc, &mut buf);
            gcol.fill(0.0);
            hcol.fill(0.0);
            let want_h = h.is_some();
            match &self.kind {
                Kind::Surrogate(cols) => {
                    cols[sc].add_derivs(&buf, &mut gcol, want_h.then_some(&mut hcol));
                }
                Kind::FixedSupport { terms, active } => {
                    let t = &terms[sc];
                    t.add_transmission_derivs(&buf, &mut gcol, want_h.then_some(&mut hcol));
                    // d/dr_s of sum_{j active} lambda_j sum_{s <= j} r_s
                    let mut tail = 0.0;
                    for s in (0..m).rev() {
                        if active[sc][s] {
                            tail += t.lambda[s];
                        }
                        gcol[s] += tail;
                    }
                }
            }
            for &(j, v) in vars {
                g[v] = gcol[j];
            }
            if let Some(h) = h.as_deref_mut() {
                for &(a, va) in vars {
                    for &(b, vb) in vars {
                        h[(va, vb)] = hcol[(a, b)];
                    }
                }
            }
        }
    }
}
