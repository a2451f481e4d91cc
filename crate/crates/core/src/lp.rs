//! Finite zero-sum matrix games solved by a dense tableau simplex.
//!
//! The row player picks a mixed strategy `p` to minimize `max_c (pᵀA)_c`.
//! After an affine rescaling of `A` into `[1, 2]` the game becomes the LP
//!
//! ```text
//! maximize 1ᵀz   subject to   Bᵀz ≤ 1,  z ≥ 0
//! ```
//!
//! whose slack basis is feasible, so no phase one is needed. The optimal
//! simplex multipliers give the column player's strategy.

/// Row-major dense matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `max_c Σ_r p_r a_rc`
    pub fn max_col_payoff(&self, p: &[f64]) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| p[r] * self.get(r, c)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_r Σ_c a_rc q_c`
    pub fn min_row_payoff(&self, q: &[f64]) -> f64 {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * q[c]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Optimal strategies of a min–max game together with their certificate bounds.
#[derive(Clone, Debug)]
pub struct GameOutcome {
    /// Minimizing row strategy.
    pub row_strategy: Vec<f64>,
    /// Maximizing column strategy.
    pub col_strategy: Vec<f64>,
    /// `max_c (pᵀA)_c`, an upper bound on the value.
    pub upper: f64,
    /// `min_r (Aq)_r`, a lower bound on the value.
    pub lower: f64,
    pub pivots: usize,
}

impl GameOutcome {
    pub fn gap(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-12;
/// Primal feasibility slack allowed by the two-pass ratio test.
const HARRIS_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;
/// Fresh refactorizations attempted when the certificates do not meet.
const MAX_REINVERSIONS: usize = 6;

struct Tableau {
    m: usize,
    width: usize,
    t: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let piv = self.t[r * w + e];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.t[i * w + e];
            if factor != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[e] = 0.0;
                if row[w - 1] < 0.0 {
                    row[w - 1] = 0.0;
                }
            }
        }
        let factor = self.cost[e];
        for (d, pv) in self.cost.iter_mut().zip(&pivot_row) {
            *d -= factor * pv;
        }
        self.cost[e] = 0.0;
        self.basis[r] = e;
    }

    /// Rebuilds the tableau for the current basis from the original data.
    fn reinvert(&mut self, original: &[f64], objective: &[f64]) -> bool {
        let (m, w) = (self.m, self.width);
        // solve B X = T0 with B the basic columns of T0
        let mut b: Vec<f64> = (0..m)
            .flat_map(|r| self.basis.iter().map(move |&j| original[r * w + j]))
            .collect();
        let mut x = original.to_vec();
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| b[p * m + col].abs().total_cmp(&b[q * m + col].abs()))
                .unwrap();
            if b[piv * m + col].abs() < 1e-13 {
                return false;
            }
            if piv != col {
                for c in 0..m {
                    b.swap(piv * m + c, col * m + c);
                }
                for c in 0..w {
                    x.swap(piv * w + c, col * w + c);
                }
            }
            let p = b[col * m + col];
            for c in 0..m {
                b[col * m + c] /= p;
            }
            for c in 0..w {
                x[col * w + c] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = b[r * m + col];
                if f != 0.0 {
                    for c in 0..m {
                        b[r * m + c] -= f * b[col * m + c];
                    }
                    for c in 0..w {
                        x[r * w + c] -= f * x[col * w + c];
                    }
                }
            }
        }
        for r in 0..m {
            if x[r * w + w - 1] < 0.0 {
                x[r * w + w - 1] = 0.0;
            }
        }
        let mut cost = objective.to_vec();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = objective[bj];
            if cb != 0.0 {
                for (j, c) in cost.iter_mut().enumerate() {
                    *c -= cb * x[i * w + j];
                }
            }
        }
        for &bj in &self.basis {
            cost[bj] = 0.0;
        }
        self.t = x;
        self.cost = cost;
        true
    }

    /// Pivots until no reduced cost is positive; returns the pivot count.
    fn run(&mut self) -> usize {
        let rhs = self.rhs();
        let nvars = self.width - 1;
        let mut pivots = 0usize;
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            let entering = if bland {
                (0..nvars).find(|&j| self.cost[j] > COST_EPS)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for (j, &d) in self.cost.iter().enumerate() {
                    if d > COST_EPS && best.is_none_or(|(_, b)| d > b) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(e) = entering else { return pivots };

            // two-pass ratio test: bound the step with a small feasibility
            // slack, then take the largest pivot among rows within that bound
            let mut bound = f64::INFINITY;
            for i in 0..self.m {
                let coef = self.at(i, e);
                if coef > PIVOT_EPS {
                    bound = bound.min((self.at(i, rhs) + HARRIS_TOL) / coef);
                }
            }
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let coef = self.at(i, e);
                if coef > PIVOT_EPS && self.at(i, rhs) / coef <= bound {
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            let lc = self.at(l, e);
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                coef > lc || (coef == lc && self.basis[i] < self.basis[l])
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                    }
                }
            }
            // the feasible region is bounded since B > 0, so a leaving row always exists
            let Some(r) = leave else { return pivots };
            if self.at(r, rhs) / self.at(r, e) <= 1e-15 {
                degenerate += 1;
                if degenerate >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, e);
            pivots += 1;
        }
    }
}

/// Solves `min_p max_c (pᵀA)_c` over mixed row strategies.
pub fn solve_min_max(a: &DenseMatrix) -> GameOutcome {
    assert!(a.rows > 0 && a.cols > 0, "empty game");
    let lo = a.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        let mut p = vec![0.0; a.rows];
        let mut q = vec![0.0; a.cols];
        p[0] = 1.0;
        q[0] = 1.0;
        return GameOutcome {
            row_strategy: p,
            col_strategy: q,
            upper: hi,
            lower: lo,
            pivots: 0,
        };
    }
    let scale = hi - lo;

    // constraint per column of A, variable per row of A
    let m = a.cols;
    let n = a.rows;
    let width = n + m + 1;
    let rhs = n + m;
    let mut original = vec![0.0; m * width];
    for i in 0..m {
        for j in 0..n {
            original[i * width + j] = (a.get(j, i) - lo) / scale + 1.0;
        }
        original[i * width + n + i] = 1.0;
        original[i * width + rhs] = 1.0;
    }
    // reduced costs of the maximization objective
    let mut objective = vec![0.0; n + m];
    objective[..n].fill(1.0);
    let mut tab = Tableau {
        m,
        width,
        t: original.clone(),
        cost: objective.clone(),
        basis: (n..n + m).collect(),
    };

    let extract = |tab: &Tableau| {
        let mut z = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                z[b] = tab.at(i, rhs).max(0.0);
            }
        }
        let y: Vec<f64> = (0..m).map(|i| (-tab.cost[n + i]).max(0.0)).collect();
        let p = normalize(z);
        let q = normalize(y);
        GameOutcome {
            upper: a.max_col_payoff(&p),
            lower: a.min_row_payoff(&q),
            row_strategy: p,
            col_strategy: q,
            pivots: 0,
        }
    };

    let mut pivots = tab.run();
    let mut out = extract(&tab);
    for _ in 0..MAX_REINVERSIONS {
        if out.gap() <= 1e-12 * scale {
            break;
        }
        // accumulated rounding: refactor from the original data and continue
        if !tab.reinvert(&original, &objective) {
            break;
        }
        pivots += tab.run();
        let next = extract(&tab);
        if next.gap() < out.gap() {
            out = next;
        }
    }
    out.pivots = pivots;
    out
}

/// Solves `max_p min_c (pᵀA)_c`; `row_strategy` is then the maximizer.
pub fn solve_max_min(a: &DenseMatrix) -> GameOutcome {
    let hi = a.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let flipped = DenseMatrix::from_fn(a.rows, a.cols, |r, c| hi - a.get(r, c));
    let out = solve_min_max(&flipped);
    GameOutcome {
        upper: a.max_row_payoff(&out.col_strategy),
        lower: a.min_col_payoff(&out.row_strategy),
        row_strategy: out.row_strategy,
        col_strategy: out.col_strategy,
        pivots: out.pivots,
    }
}

impl DenseMatrix {
    /// `max_r Σ_c a_rc q_c`
    pub fn max_row_payoff(&self, q: &[f64]) -> f64 {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * q[c]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_c Σ_r p_r a_rc`
    pub fn min_col_payoff(&self, p: &[f64]) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| p[r] * self.get(r, c)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in &mut v {
            *x /= total;
        }
    } else {
        v[0] = 1.0;
    }
    v
}

/// Approximate value bracket `(lower, upper)` of `min_p max_c (pᵀA)_c` by
/// multiplicative weights run against best responses.
///
/// Slow but independent of the simplex path; the bracket shrinks like `O(√(log n / T))`.
pub fn mwu_bracket(a: &DenseMatrix, iterations: usize) -> (f64, f64) {
    let lo = a.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let eta = (8.0 * (a.rows as f64).ln().max(1.0) / iterations.max(1) as f64).sqrt();
    let mut log_w = vec![0.0f64; a.rows];
    let mut p_avg = vec![0.0; a.rows];
    let mut q_avg = vec![0.0; a.cols];
    let mut p = vec![0.0; a.rows];
    for _ in 0..iterations {
        let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (pi, lw) in p.iter_mut().zip(&log_w) {
            *pi = (lw - m).exp();
            total += *pi;
        }
        for pi in &mut p {
            *pi /= total;
        }
        // column best response
        let mut best_c = 0;
        let mut best = f64::NEG_INFINITY;
        for c in 0..a.cols {
            let v: f64 = (0..a.rows).map(|r| p[r] * a.get(r, c)).sum();
            if v > best {
                best = v;
                best_c = c;
            }
        }
        for r in 0..a.rows {
            p_avg[r] += p[r];
            log_w[r] -= eta * (a.get(r, best_c) - lo) / span;
        }
        q_avg[best_c] += 1.0;
    }
    let p_avg = normalize(p_avg);
    let q_avg = normalize(q_avg);
    (a.min_row_payoff(&q_avg), a.max_col_payoff(&p_avg))
}
