//! Exact laws and large-deviation bounds for the lane-contact process.
//!
//! Per-slot cartel contacts follow a hypergeometric law; cumulative contacts
//! over several slots are the convolution of independent draws. Linear masses
//! come from the successive-ratio recurrence and sum with compensated
//! (Neumaier) summation; logarithms come from a shared log-factorial table,
//! so tails too small for linear form stay available through [`DualProb`].

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_FACTORIAL_TABLE_LEN: usize = 1 << 17;

static LN_FACTORIAL: LazyLock<Vec<f64>> = LazyLock::new(|| {
    let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE_LEN);
    let mut acc = NeumaierSum::default();
    table.push(0.0);
    for i in 1..LN_FACTORIAL_TABLE_LEN {
        acc.add((i as f64).ln());
        table.push(acc.total());
    }
    table
});

/// `ln(k!)`.
pub fn ln_factorial(k: u64) -> f64 {
    match LN_FACTORIAL.get(k as usize) {
        Some(v) => *v,
        None => statrs::function::gamma::ln_gamma(k as f64 + 1.0),
    }
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().total()
}

/// `ln(sum(exp(x_i)))` without overflow or underflow.
fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + compensated_sum(values.iter().map(|v| (v - max).exp())).ln()
}

/// A probability carried both linearly and as a natural logarithm.
///
/// The linear value underflows to zero below ~1e-308; the log form does not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualProb {
    pub value: f64,
    pub ln: f64,
}

impl DualProb {
    pub fn from_ln(ln: f64) -> Self {
        DualProb {
            value: ln.exp(),
            ln,
        }
    }

    pub fn zero() -> Self {
        DualProb {
            value: 0.0,
            ln: f64::NEG_INFINITY,
        }
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }
}

/// Law of the number of cartel lanes among `draws` lanes sampled without
/// replacement from `population` lanes, `successes` of which are cartel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HypergeomLaw {
    population: u32,
    successes: u32,
    draws: u32,
}

impl HypergeomLaw {
    pub fn new(population: u32, successes: u32, draws: u32) -> Result<Self> {
        if population == 0 || successes > population || draws > population {
            return Err(Error::InvalidLaw {
                population,
                successes,
                draws,
            });
        }
        Ok(HypergeomLaw {
            population,
            successes,
            draws,
        })
    }

    pub fn population(&self) -> u32 {
        self.population
    }

    pub fn successes(&self) -> u32 {
        self.successes
    }

    pub fn draws(&self) -> u32 {
        self.draws
    }

    /// Inclusive support `[max(0, draws + successes - population), min(draws, successes)]`.
    pub fn support(&self) -> (u32, u32) {
        let lo = (self.draws + self.successes).saturating_sub(self.population);
        let hi = self.draws.min(self.successes);
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        self.draws as f64 * self.successes as f64 / self.population as f64
    }

    /// `ln P[A = k]`, `-inf` outside the support.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        let (lo, hi) = self.support();
        if k < lo as u64 || k > hi as u64 {
            return f64::NEG_INFINITY;
        }
        let (n, b, m) = (
            self.population as u64,
            self.successes as u64,
            self.draws as u64,
        );
        ln_choose(b, k) + ln_choose(n - b, m - k) - ln_choose(n, m)
    }

    /// `P[A = k]`. Linear masses come from the ratio recurrence, whose
    /// relative error stays near machine precision at any population size;
    /// the log-factorial route loses ~1e-12 once `ln n!` reaches the thousands.
    pub fn pmf(&self, k: u64) -> f64 {
        let (lo, hi) = self.support();
        if k < lo as u64 || k > hi as u64 {
            return 0.0;
        }
        self.linear_masses()[(k - lo as u64) as usize]
    }

    /// `ln P[A = 0]` as a sum of `ln(1 - b/(n-i))`, exact to a few ulps.
    pub fn ln_pmf_zero(&self) -> f64 {
        let (n, b) = (self.population as f64, self.successes as f64);
        if self.support().0 > 0 {
            return f64::NEG_INFINITY;
        }
        compensated_sum((0..self.draws).map(|i| (-b / (n - i as f64)).ln_1p()))
    }

    /// Masses on the support, built outward from the mode by the exact
    /// successive-ratio recurrence and normalised to total 1.
    fn linear_masses(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let (n, b, m) = (
            self.population as f64,
            self.successes as f64,
            self.draws as f64,
        );
        let mode = (((m + 1.0) * (b + 1.0) / (n + 2.0)).floor() as u32).clamp(lo, hi);
        let mut w = vec![0.0; (hi - lo + 1) as usize];
        w[(mode - lo) as usize] = 1.0;
        for k in mode..hi {
            let kf = k as f64;
            let i = (k - lo) as usize;
            w[i + 1] = w[i] * ((b - kf) * (m - kf)) / ((kf + 1.0) * (n - b - m + kf + 1.0));
        }
        for k in (lo + 1..=mode).rev() {
            let kf = k as f64;
            let i = (k - lo) as usize;
            w[i - 1] = w[i] * (kf * (n - b - m + kf)) / ((b - kf + 1.0) * (m - kf + 1.0));
        }
        let total = compensated_sum(w.iter().copied());
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    /// `P[A >= r]` by exact summation over the support.
    pub fn tail_ge(&self, r: i64) -> f64 {
        let (lo, hi) = self.support();
        if r <= lo as i64 {
            return 1.0;
        }
        if r > hi as i64 {
            return 0.0;
        }
        let masses = self.linear_masses();
        compensated_sum(masses[(r - lo as i64) as usize..].iter().copied()).min(1.0)
    }

    /// `P[A >= r]` with the logarithm kept alongside the linear value.
    pub fn tail_ge_dual(&self, r: i64) -> DualProb {
        let (lo, hi) = self.support();
        if r <= lo as i64 {
            return DualProb {
                value: 1.0,
                ln: 0.0,
            };
        }
        if r > hi as i64 {
            return DualProb::zero();
        }
        let terms: Vec<f64> = (r as u64..=hi as u64).map(|k| self.ln_pmf(k)).collect();
        let ln = log_sum_exp(&terms).min(0.0);
        DualProb {
            value: self.tail_ge(r),
            ln,
        }
    }

    /// `P[A > x]`.
    pub fn tail_gt(&self, x: i64) -> f64 {
        self.tail_ge(x + 1)
    }

    pub fn distribution(&self) -> DiscreteDistribution {
        let (lo, _) = self.support();
        DiscreteDistribution::from_parts(lo as i64, self.linear_masses())
    }
}

/// A finitely supported law on consecutive integers starting at `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    offset: i64,
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validating constructor: masses nonnegative, total within 1e-12 of 1.
    pub fn new(offset: i64, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::param("masses", "empty distribution"));
        }
        if let Some(bad) = masses.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::param("masses", format!("mass {bad} outside [0,1]")));
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "masses",
                format!("total mass {total} differs from 1"),
            ));
        }
        Ok(DiscreteDistribution { offset, masses })
    }

    pub(crate) fn from_parts(offset: i64, masses: Vec<f64>) -> Self {
        DiscreteDistribution { offset, masses }
    }

    pub fn point_mass(k: i64) -> Self {
        DiscreteDistribution {
            offset: k,
            masses: vec![1.0],
        }
    }

    /// `Bin(trials, p)`.
    pub fn binomial(trials: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("{p} outside [0,1]")));
        }
        let masses = (0..=trials as u64)
            .map(|k| binomial_ln_pmf(trials as u64, p, k).exp())
            .collect();
        Ok(DiscreteDistribution { offset: 0, masses })
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Inclusive support bounds.
    pub fn support(&self) -> (i64, i64) {
        (self.offset, self.offset + self.masses.len() as i64 - 1)
    }

    pub fn pmf(&self, k: i64) -> f64 {
        if k < self.offset {
            return 0.0;
        }
        self.masses
            .get((k - self.offset) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.masses.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(
            self.masses
                .iter()
                .enumerate()
                .map(|(i, p)| (self.offset + i as i64) as f64 * p),
        )
    }

    /// `P[X >= r]`.
    pub fn tail_ge(&self, r: i64) -> f64 {
        let (lo, hi) = self.support();
        if r > hi {
            return 0.0;
        }
        let start = (r.max(lo) - lo) as usize;
        compensated_sum(self.masses[start..].iter().copied()).min(1.0)
    }

    /// `P[X > x]`.
    pub fn tail_gt(&self, x: i64) -> f64 {
        self.tail_ge(x + 1)
    }

    /// `P[X <= x]`.
    pub fn cdf(&self, x: i64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo {
            return 0.0;
        }
        let end = ((x.min(hi) - lo) as usize) + 1;
        compensated_sum(self.masses[..end].iter().copied()).min(1.0)
    }

    /// Law of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &DiscreteDistribution) -> DiscreteDistribution {
        let len = self.masses.len() + other.masses.len() - 1;
        let mut acc = vec![NeumaierSum::default(); len];
        for (i, a) in self.masses.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.masses.iter().enumerate() {
                acc[i + j].add(a * b);
            }
        }
        DiscreteDistribution {
            offset: self.offset + other.offset,
            masses: acc.iter().map(NeumaierSum::total).collect(),
        }
    }
}

/// Exact law of `S_t`, the sum of `t` independent draws from `law`.
pub fn convolve_iid(law: &HypergeomLaw, t: u32) -> Result<DiscreteDistribution> {
    if t == 0 {
        return Err(Error::param("t", "convolution count must be at least 1"));
    }
    let single = law.distribution();
    // Binary powering keeps the number of convolutions logarithmic in t.
    let mut result: Option<DiscreteDistribution> = None;
    let mut base = single;
    let mut k = t;
    while k > 0 {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.convolve(&base),
            });
        }
        k >>= 1;
        if k > 0 {
            base = base.convolve(&base);
        }
    }
    Ok(result.expect("t >= 1"))
}

/// Binary KL divergence `D(theta || beta)` in nats.
pub fn kl_divergence(theta: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param("theta", format!("{theta} outside [0,1]")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param("beta", format!("{beta} outside (0,1)")));
    }
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    Ok((term(theta, beta) + term(1.0 - theta, 1.0 - beta)).max(0.0))
}

/// Which tail a Chernoff bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    /// `P[S_t / (t m) >= theta]`, requires `theta >= beta`.
    Upper,
    /// `P[S_t / (t m) <= theta]`, requires `theta <= beta`.
    Lower,
}

/// `exp{-t m D(theta || beta)}`.
pub fn chernoff_tail_bound(t: u32, m: u32, theta: f64, beta: f64, side: TailSide) -> Result<f64> {
    if t == 0 || m == 0 {
        return Err(Error::param("t, m", "must be positive"));
    }
    match side {
        TailSide::Upper if theta < beta => {
            return Err(Error::param(
                "theta",
                format!("upper-tail bound needs theta >= beta, got {theta} < {beta}"),
            ))
        }
        TailSide::Lower if theta > beta => {
            return Err(Error::param(
                "theta",
                format!("lower-tail bound needs theta <= beta, got {theta} > {beta}"),
            ))
        }
        _ => {}
    }
    let d = kl_divergence(theta, beta)?;
    Ok((-(t as f64) * m as f64 * d).exp())
}

fn binomial_ln_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

/// `P[Bin(n, p) >= r]` by exact summation.
pub fn binomial_tail_ge(n: u32, p: f64, r: i64) -> f64 {
    if r <= 0 {
        return 1.0;
    }
    if r > n as i64 {
        return 0.0;
    }
    let p = p.clamp(0.0, 1.0);
    compensated_sum((r as u64..=n as u64).map(|k| binomial_ln_pmf(n as u64, p, k).exp())).min(1.0)
}
