//! Finite-state Markov chain primitives: distributions, cost vectors,
//! stochastic matrices, divergences, ergodicity diagnostics, invariant
//! distributions and sampling.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// A finite state space of `n` states, optionally labelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    n: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        Ok(Self { n, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    reason: format!("duplicate label `{l}`"),
                });
            }
        }
        Ok(Self {
            n: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, x: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(x)).map(String::as_str)
    }
}

/// Real number extended with `+∞`, used for divergences and costs that may
/// be infinite. Sums and comparisons saturate at `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> ExtReal<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// Maps `Infinite` to the floating-point `+inf`.
    pub fn to_float(self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }
}

impl<T: Scalar> Add for ExtReal<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::Infinite,
        }
    }
}

impl<T: Scalar> PartialOrd for ExtReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Infinite, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl<T: Scalar> fmt::Display for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => write!(f, "+inf"),
        }
    }
}

fn check_probability_vector<T: Scalar>(w: &[T], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Empty);
    }
    let mut sum = T::zero();
    for (i, &p) in w.iter().enumerate() {
        if !p.is_finite() || p < T::zero() {
            return Err(Error::InvalidProbability(format!(
                "{what}: entry {i} is {p}, expected a finite nonnegative value"
            )));
        }
        sum = sum + p;
    }
    if (sum - T::one()).abs() > T::lit(T::ROW_SUM_TOL) {
        return Err(Error::InvalidProbability(format!(
            "{what}: mass sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// A probability distribution on a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T = f64> {
    weights: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        check_probability_vector(&weights, "distribution")?;
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        let w = T::one() / T::from_usize(n).unwrap();
        Ok(Self { weights: vec![w; n] })
    }

    pub fn point_mass(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, n });
        }
        let mut weights = vec![T::zero(); n];
        weights[x] = T::one();
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// One step of the chain: `μP`.
    pub fn propagate(&self, p: &StochasticMatrix<T>) -> Result<Self> {
        Ok(Self {
            weights: p.left_apply(&self.weights)?,
        })
    }

    /// `E_μ[g]`.
    pub fn expect(&self, g: &[T]) -> Result<T> {
        if g.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: g.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(g)
            .filter(|(w, _)| **w > T::zero())
            .map(|(&w, &v)| w * v)
            .sum())
    }
}

/// Nonnegative per-state cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> CostFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidCost(format!(
                    "entry {i} is {v}, expected a finite nonnegative value"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn constant(n: usize, c: T) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    pub fn span(&self) -> T {
        span_seminorm(&self.values).expect("cost functions are nonempty")
    }
}

/// Row-stochastic matrix stored densely in row-major order, with the
/// positive-entry support of each row cached for sparse traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix<T = f64> {
    n: usize,
    data: Vec<T>,
    support: Vec<Vec<usize>>,
}

impl<T: Scalar> StochasticMatrix<T> {
    /// Validates nonnegativity and unit row sums (within `T::ROW_SUM_TOL`).
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            check_probability_vector(row, &format!("row {x}"))?;
            data.extend_from_slice(row);
        }
        Ok(Self::from_raw(n, data))
    }

    /// Like [`StochasticMatrix::new`] but rescales each row to sum to one.
    /// Rows must be nonnegative with positive mass.
    pub fn new_renormalized(rows: Vec<Vec<T>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(x, row)| {
                let s: T = row.iter().copied().sum();
                if !(s > T::zero()) || !s.is_finite() {
                    return Err(Error::InvalidProbability(format!(
                        "row {x} has mass {s} and cannot be renormalized"
                    )));
                }
                Ok(row.into_iter().map(|v| v / s).collect())
            })
            .collect::<Result<Vec<Vec<T>>>>()?;
        Self::new(rows)
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut data = vec![T::zero(); n * n];
        for x in 0..n {
            data[x * n + x] = T::one();
        }
        Ok(Self::from_raw(n, data))
    }

    /// Every row equal to `mu`.
    pub fn rank_one(mu: &Distribution<T>) -> Self {
        let n = mu.len();
        let data = (0..n).flat_map(|_| mu.weights().iter().copied()).collect();
        Self::from_raw(n, data)
    }

    pub(crate) fn from_raw(n: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        let support = (0..n)
            .map(|x| (0..n).filter(|&y| data[x * n + y] > T::zero()).collect())
            .collect();
        Self { n, data, support }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.n)
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[x * self.n + y]
    }

    /// Indices `y` with `P(x, y) > 0`.
    pub fn support(&self, x: usize) -> &[usize] {
        &self.support[x]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    pub fn row_distribution(&self, x: usize) -> Distribution<T> {
        Distribution {
            weights: self.row(x).to_vec(),
        }
    }

    /// `Pg` for a column vector `g`.
    pub fn apply(&self, g: &[T]) -> Result<Vec<T>> {
        self.check_dim(g.len())?;
        Ok((0..self.n)
            .map(|x| self.support[x].iter().map(|&y| self.get(x, y) * g[y]).sum())
            .collect())
    }

    /// `μP` for a row vector `μ`.
    pub fn left_apply(&self, mu: &[T]) -> Result<Vec<T>> {
        self.check_dim(mu.len())?;
        let mut out = vec![T::zero(); self.n];
        for (x, &m) in mu.iter().enumerate() {
            if m == T::zero() {
                continue;
            }
            for &y in &self.support[x] {
                out[y] = out[y] + m * self.get(x, y);
            }
        }
        Ok(out)
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.n)?;
        Ok(Self::from_raw(
            self.n,
            linalg::matmul(&self.data, &other.data, self.n),
        ))
    }

    /// `P^k` by binary exponentiation (`P^0 = I`).
    pub fn power(&self, k: usize) -> Self {
        let data = linalg::matpow(&self.data, self.n, k);
        Self::from_raw(self.n, data)
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }
}

/// `Σ_x |μ(x) − ν(x)|`, in `[0, 2]`.
pub fn total_variation<T: Scalar>(mu: &Distribution<T>, nu: &Distribution<T>) -> Result<T> {
    l1_distance(mu.weights(), nu.weights())
}

pub(crate) fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(&p, &q)| (p - q).abs()).sum())
}

/// Relative entropy `D(μ‖ν)` in nats; `Infinite` when `μ` charges a state `ν` does not.
pub fn kl_divergence<T: Scalar>(mu: &Distribution<T>, nu: &Distribution<T>) -> Result<ExtReal<T>> {
    kl_slices(mu.weights(), nu.weights())
}

pub(crate) fn kl_slices<T: Scalar>(mu: &[T], nu: &[T]) -> Result<ExtReal<T>> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    let mut acc = T::zero();
    for (&p, &q) in mu.iter().zip(nu) {
        if p == T::zero() {
            continue;
        }
        if q == T::zero() {
            return Ok(ExtReal::Infinite);
        }
        acc = acc + p * (p / q).ln();
    }
    // Rounding can push a true zero slightly negative.
    Ok(ExtReal::Finite(acc.max(T::zero())))
}

/// Oscillation `max g − min g`.
pub fn span_seminorm<T: Scalar>(g: &[T]) -> Result<T> {
    let first = *g.first().ok_or(Error::Empty)?;
    let (lo, hi) = g
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

/// Dobrushin ergodicity coefficient `½ max_{x,x'} ‖P(x,·) − P(x',·)‖₁`,
/// evaluated as `1 − min_{x,x'} Σ_y min(P(x,y), P(x',y))`, which avoids
/// accumulating rounding over the disjoint parts of the rows.
pub fn dobrushin_coefficient<T: Scalar>(p: &StochasticMatrix<T>) -> T {
    let n = p.n();
    let mut overlap = T::one();
    for x in 0..n {
        for x2 in (x + 1)..n {
            let common: T = p
                .row(x)
                .iter()
                .zip(p.row(x2))
                .map(|(&a, &b)| a.min(b))
                .sum();
            overlap = overlap.min(common);
        }
    }
    (T::one() - overlap).max(T::zero()).min(T::one())
}

/// Outcome of the irreducibility / aperiodicity / primitivity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport<T = f64> {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub dobrushin: T,
    /// Smallest power with all entries positive.
    pub nbar: Option<usize>,
    /// Minimum entry of `P^nbar`.
    pub theta: Option<T>,
}

impl<T: Scalar> ErgodicityReport<T> {
    pub fn is_ergodic(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

/// Boolean digraph of the positive entries, one bitset row per state.
#[derive(Clone)]
struct Pattern {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Pattern {
    fn of<T: Scalar>(p: &StochasticMatrix<T>) -> Self {
        let n = p.n();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for x in 0..n {
            for &y in p.support(x) {
                bits[x * words + y / 64] |= 1 << (y % 64);
            }
        }
        Self { n, words, bits }
    }

    fn row(&self, x: usize) -> &[u64] {
        &self.bits[x * self.words..(x + 1) * self.words]
    }

    /// Pattern of the product `self · step`.
    fn times(&self, step: &Pattern) -> Self {
        let mut out = vec![0u64; self.bits.len()];
        for x in 0..self.n {
            let dst = &mut out[x * self.words..(x + 1) * self.words];
            for (w, &word) in self.row(x).iter().enumerate() {
                let mut word = word;
                while word != 0 {
                    let k = w * 64 + word.trailing_zeros() as usize;
                    word &= word - 1;
                    for (d, s) in dst.iter_mut().zip(step.row(k)) {
                        *d |= *s;
                    }
                }
            }
        }
        Self {
            n: self.n,
            words: self.words,
            bits: out,
        }
    }

    fn full(&self) -> bool {
        let tail = self.n % 64;
        (0..self.n).all(|x| {
            self.row(x).iter().enumerate().all(|(w, &word)| {
                if w + 1 == self.words && tail != 0 {
                    word == (1u64 << tail) - 1
                } else {
                    word == u64::MAX
                }
            })
        })
    }
}

/// Strongly connected components of the positive-entry digraph (Kosaraju).
/// Returns the component id per state and the number of components.
pub(crate) fn strong_components<T: Scalar>(p: &StochasticMatrix<T>) -> (Vec<usize>, usize) {
    let n = p.n();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        for &y in p.support(x) {
            reverse[y].push(x);
        }
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((x, i)) = stack.pop() {
            let succ = p.support(x);
            if i < succ.len() {
                stack.push((x, i + 1));
                let y = succ[i];
                if !visited[y] {
                    visited[y] = true;
                    stack.push((y, 0));
                }
            } else {
                order.push(x);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &y in &reverse[x] {
                if comp[y] == usize::MAX {
                    comp[y] = count;
                    stack.push(y);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// Number of closed (recurrent) communicating classes.
pub fn recurrent_class_count<T: Scalar>(p: &StochasticMatrix<T>) -> usize {
    let (comp, count) = strong_components(p);
    let mut closed = vec![true; count];
    for x in 0..p.n() {
        if p.support(x).iter().any(|&y| comp[y] != comp[x]) {
            closed[comp[x]] = false;
        }
    }
    closed.iter().filter(|&&c| c).count()
}

pub fn is_unichain<T: Scalar>(p: &StochasticMatrix<T>) -> bool {
    recurrent_class_count(p) == 1
}

pub fn is_irreducible<T: Scalar>(p: &StochasticMatrix<T>) -> bool {
    strong_components(p).1 == 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of every nontrivial strongly connected component: BFS levels
/// within the component, gcd of `level(u) + 1 − level(v)` over internal edges.
fn component_periods<T: Scalar>(p: &StochasticMatrix<T>) -> Vec<usize> {
    let n = p.n();
    let (comp, count) = strong_components(p);
    let mut level = vec![usize::MAX; n];
    let mut periods = Vec::new();
    for c in 0..count {
        let Some(root) = (0..n).find(|&x| comp[x] == c) else {
            continue;
        };
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        let mut g = 0usize;
        let mut has_edge = false;
        while let Some(u) = queue.pop_front() {
            for &v in p.support(u) {
                if comp[v] != c {
                    continue;
                }
                has_edge = true;
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
        if has_edge {
            periods.push(g);
        }
    }
    periods
}

/// Every nontrivial communicating class has period one.
pub fn is_aperiodic<T: Scalar>(p: &StochasticMatrix<T>) -> bool {
    component_periods(p).iter().all(|&d| d == 1)
}

/// Irreducibility, aperiodicity, Dobrushin coefficient and, for primitive
/// kernels, the primitivity index `nbar` with `theta = min P^nbar`.
pub fn ergodicity_report<T: Scalar>(p: &StochasticMatrix<T>) -> ErgodicityReport<T> {
    let irreducible = is_irreducible(p);
    let aperiodic = is_aperiodic(p);
    let dobrushin = dobrushin_coefficient(p);
    let mut report = ErgodicityReport {
        irreducible,
        aperiodic,
        dobrushin,
        nbar: None,
        theta: None,
    };
    if !(irreducible && aperiodic) {
        return report;
    }
    let n = p.n();
    // Wielandt: a primitive n×n matrix has P^k > 0 for k = n² − 2n + 2.
    let cap = n * n - 2 * n + 2;
    let step = Pattern::of(p);
    let mut pattern = step.clone();
    let mut k = 1;
    while !pattern.full() {
        if k >= cap {
            return report;
        }
        pattern = pattern.times(&step);
        k += 1;
    }
    report.nbar = Some(k);
    report.theta = Some(p.power(k).min_entry());
    report
}

/// Unique invariant distribution of a unichain kernel by a dense linear
/// solve of `π(P − I) = 0` with one equation replaced by `Σπ = 1`.
pub fn invariant_distribution<T: Scalar>(p: &StochasticMatrix<T>) -> Result<Distribution<T>> {
    let classes = recurrent_class_count(p);
    if classes != 1 {
        return Err(Error::NotUnichain(format!(
            "{classes} recurrent classes"
        )));
    }
    let n = p.n();
    // Row y of the system is column y of (P − I), i.e. Σ_x π(x)(P(x,y) − δ_xy) = 0.
    let mut a = vec![T::zero(); n * n];
    for y in 0..n {
        for x in 0..n {
            let delta = if x == y { T::one() } else { T::zero() };
            a[y * n + x] = p.get(x, y) - delta;
        }
    }
    let mut b = vec![T::zero(); n];
    for x in 0..n {
        a[(n - 1) * n + x] = T::one();
    }
    b[n - 1] = T::one();
    let mut pi = linalg::solve(a, b, n)
        .ok_or_else(|| Error::NotUnichain("stationarity system is singular".into()))?;

    let tol = T::lit(T::FIXED_POINT_TOL);
    for v in pi.iter_mut() {
        if *v < -tol {
            return Err(Error::NotUnichain(format!(
                "solution has negative mass {v}"
            )));
        }
        *v = v.max(T::zero());
    }
    let total: T = pi.iter().copied().sum();
    for v in pi.iter_mut() {
        *v = *v / total;
    }
    let moved = p.left_apply(&pi)?;
    let residual = l1_distance(&moved, &pi)?;
    if residual > tol {
        return Err(Error::NotUnichain(format!(
            "fixed-point residual {residual} exceeds {tol}"
        )));
    }
    Distribution::new(pi)
}

/// Draws the next state from row `x` by inverse-CDF sampling over its support.
pub fn sample_next<T: Scalar, R: Rng + ?Sized>(
    p: &StochasticMatrix<T>,
    x: usize,
    rng: &mut R,
) -> Result<usize> {
    if x >= p.n() {
        return Err(Error::IndexOutOfRange { index: x, n: p.n() });
    }
    let u = T::lit(rng.random::<f64>());
    let support = p.support(x);
    let mut acc = T::zero();
    for &y in support {
        acc = acc + p.get(x, y);
        if u < acc {
            return Ok(y);
        }
    }
    // Row mass may round to slightly below one.
    Ok(*support.last().expect("stochastic rows have nonempty support"))
}
