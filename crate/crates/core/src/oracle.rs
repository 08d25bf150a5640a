//! Exhaustive global optimum for small instances, and the orthogonal
//! (one user per subcarrier) comparison point.
//!
//! With the clustering fixed the problem is convex, so enumerating every
//! clustering with at most `L` users per subcarrier and solving each one
//! exactly yields the global optimum. Clusterings smaller than `L` are
//! enumerated too, which makes the optimum monotone in `L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::objective::total_power;
use crate::transform::RateAllocation;
use crate::solver::{jpcuc, solve_fixed_support, SolveReport, SolverOptions};

/// Active users on every subcarrier.
///
/// Stored as user bitmasks; users rather than ranks so that whether a
/// pattern serves everybody does not depend on the channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupportPattern {
    masks: Vec<u64>,
}

impl SupportPattern {
    pub fn from_users(sets: &[Vec<usize>]) -> Self {
        SupportPattern {
            masks: sets
                .iter()
                .map(|s| s.iter().fold(0u64, |acc, &u| acc | (1 << u)))
                .collect(),
        }
    }

    pub fn num_subcarriers(&self) -> usize {
        self.masks.len()
    }

    pub fn users(&self, subcarrier: usize) -> Vec<usize> {
        let mask = self.masks[subcarrier];
        (0..64).filter(|&u| mask & (1 << u) != 0).collect()
    }

    pub fn user_sets(&self) -> Vec<Vec<usize>> {
        (0..self.masks.len()).map(|n| self.users(n)).collect()
    }

    pub fn max_cluster(&self) -> usize {
        self.masks
            .iter()
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn covers(&self, num_users: usize) -> bool {
        let all = self.masks.iter().fold(0u64, |acc, &m| acc | m);
        all == full_mask(num_users)
    }
}

fn full_mask(num_users: usize) -> u64 {
    if num_users == 64 {
        u64::MAX
    } else {
        (1u64 << num_users) - 1
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `(sum_{k <= L} C(M, k))^N`, the number of raw patterns before the
/// coverage filter.
pub fn raw_pattern_count(num_users: usize, num_subcarriers: usize, cap: usize) -> u128 {
    let per = (0..=cap as u64).map(|k| binomial(num_users as u64, k)).sum::<u128>();
    per.checked_pow(num_subcarriers as u32).unwrap_or(u128::MAX)
}

/// Streams every pattern whose clusters hold at most `cap` users and whose
/// union covers all users.
#[derive(Debug, Clone)]
pub struct SupportEnumerator {
    subsets: Vec<u64>,
    digits: Vec<usize>,
    num_users: usize,
    done: bool,
}

impl Iterator for SupportEnumerator {
    type Item = SupportPattern;

    fn next(&mut self) -> Option<SupportPattern> {
        while !self.done {
            let pattern = SupportPattern {
                masks: self.digits.iter().map(|&d| self.subsets[d]).collect(),
            };
            // odometer, last subcarrier fastest
            let mut pos = self.digits.len();
            loop {
                if pos == 0 {
                    self.done = true;
                    break;
                }
                pos -= 1;
                self.digits[pos] += 1;
                if self.digits[pos] < self.subsets.len() {
                    break;
                }
                self.digits[pos] = 0;
            }
            if pattern.covers(self.num_users) {
                return Some(pattern);
            }
        }
        None
    }
}

pub fn enumerate_supports(
    num_users: usize,
    num_subcarriers: usize,
    cap: usize,
    budget: u64,
) -> Result<SupportEnumerator> {
    if num_users == 0 || num_users > 64 || num_subcarriers == 0 {
        return Err(Error::InvalidConfig(
            "enumeration needs 1..=64 users and at least one subcarrier".into(),
        ));
    }
    let count = raw_pattern_count(num_users, num_subcarriers, cap);
    if count > budget as u128 {
        return Err(Error::EnumerationBudget {
            count,
            budget: budget as u128,
        });
    }
    // subsets ordered by size, then by mask value
    let mut subsets: Vec<u64> = (0..=full_mask(num_users))
        .filter(|m| m.count_ones() as usize <= cap)
        .collect();
    subsets.sort_by_key(|m| (m.count_ones(), *m));
    Ok(SupportEnumerator {
        subsets,
        digits: vec![0; num_subcarriers],
        num_users,
        done: false,
    })
}

/// Global optimum of total power under the cluster cap, by exhaustive
/// enumeration. Ties go to the earliest pattern in enumeration order.
pub fn oracle_optimum(cfg: &SystemConfig, ch: &ChannelSet, opts: &SolverOptions) -> Result<SolveReport> {
    cfg.check()?;
    opts.check()?;
    let patterns = enumerate_supports(
        cfg.num_users,
        cfg.num_subcarriers,
        cfg.cluster_cap,
        opts.enumeration_budget,
    )?;

    let best = patterns
        .enumerate()
        .par_bridge()
        .map(|(idx, pattern)| {
            let out = solve_fixed_support(&pattern.user_sets(), cfg, ch, opts)?;
            let value = total_power(&out.rates, ch, cfg).total;
            Ok::<_, Error>((value, idx, out))
        })
        .try_reduce_with(|a, b| {
            let a_first = a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
            Ok(if a_first { a } else { b })
        });

    match best {
        None => Err(Error::NoFeasiblePattern {
            cap: cfg.cluster_cap,
        }),
        Some(result) => {
            let (_, _, out) = result?;
            Ok(SolveReport::from_rates(out.rates, ch, cfg, 0, Vec::new(), out.converged))
        }
    }
}

/// Global optimum for every cap `1..=cfg.cluster_cap` from one enumeration.
///
/// Each pattern is solved once and credited to every cap it fits, which
/// costs the same as the single largest-cap run. Entry `l - 1` holds the
/// optimum under cap `l`; caps admitting no covering pattern hold
/// [`Error::NoFeasiblePattern`]. Ties go to the earliest pattern in the
/// largest-cap enumeration order, so a cap's entry can differ from
/// [`oracle_optimum`] only between patterns of exactly equal power.
pub fn oracle_cap_profile(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    opts: &SolverOptions,
) -> Result<Vec<Result<SolveReport>>> {
    cfg.check()?;
    opts.check()?;
    let max_cap = cfg.cluster_cap;
    let patterns = enumerate_supports(cfg.num_users, cfg.num_subcarriers, max_cap, opts.enumeration_budget)?;

    type Best = Vec<Option<(f64, usize, RateAllocation, bool)>>;
    let better = |a: &(f64, usize, RateAllocation, bool), b: &(f64, usize, RateAllocation, bool)| {
        a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
    };
    let merge = |mut a: Best, b: Best| {
        for (slot, other) in a.iter_mut().zip(b) {
            if let Some(o) = other {
                if slot.as_ref().is_none_or(|s| better(&o, s)) {
                    *slot = Some(o);
                }
            }
        }
        a
    };
    let best: Best = patterns
        .enumerate()
        .par_bridge()
        .map(|(idx, pattern)| {
            let out = solve_fixed_support(&pattern.user_sets(), cfg, ch, opts)?;
            let value = total_power(&out.rates, ch, cfg).total;
            let mut slots: Best = vec![None; max_cap];
            // credited to the smallest cap it fits; caps above inherit below
            slots[pattern.max_cluster() - 1] = Some((value, idx, out.rates, out.converged));
            Ok::<_, Error>(slots)
        })
        .try_reduce(|| vec![None; max_cap], |a, b| Ok(merge(a, b)))?;

    let mut running: Option<(f64, usize, RateAllocation, bool)> = None;
    let mut profile = Vec::with_capacity(max_cap);
    for (l, slot) in best.into_iter().enumerate() {
        if let Some(s) = slot {
            if running.as_ref().is_none_or(|r| better(&s, r)) {
                running = Some(s);
            }
        }
        let mut capped = cfg.clone();
        capped.cluster_cap = l + 1;
        profile.push(match &running {
            Some((_, _, rates, converged)) => Ok(SolveReport::from_rates(
                rates.clone(),
                ch,
                &capped,
                0,
                Vec::new(),
                *converged,
            )),
            None => Err(Error::NoFeasiblePattern { cap: l + 1 }),
        });
    }
    Ok(profile)
}

/// Orthogonal access: at most one user per subcarrier. Exact when the
/// instance fits the enumeration budget, otherwise the reweighting solver
/// with `L = 1`.
///
/// With more users than subcarriers no orthogonal assignment exists; the
/// reweighting solver's result is returned with `cap_satisfied = false`.
pub fn oma_baseline(cfg: &SystemConfig, ch: &ChannelSet, opts: &SolverOptions) -> Result<SolveReport> {
    let mut oma = cfg.clone();
    oma.cluster_cap = 1;
    let exact_fits =
        raw_pattern_count(oma.num_users, oma.num_subcarriers, 1) <= opts.enumeration_budget as u128;
    if exact_fits && oma.num_users <= oma.num_subcarriers {
        oracle_optimum(&oma, ch, opts)
    } else {
        jpcuc(&oma, ch, opts)
    }
}
