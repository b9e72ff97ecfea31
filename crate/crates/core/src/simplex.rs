//! Bounded-variable primal simplex on a dense tableau, two-phase with a
//! slack crash basis and Bland's rule as an anti-cycling fallback.
//!
//! Dense is deliberate: the models this crate builds stay at desk scale
//! (a few thousand variables at most); a revised simplex with sparse
//! factorization is the documented optimization path, not required here.

use thiserror::Error;

/// Row comparison sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// One linear constraint row in sparse form.
#[derive(Clone, Debug)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A bounded-variable LP in minimization form.
///
/// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new(n_vars: usize) -> Self {
        LpProblem {
            n_vars,
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    /// Largest row residual of `x` over all rows (violation only, not slack).
    pub fn max_row_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn max_bound_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n_vars {
            worst = worst.max(self.lower[j] - x[j]);
            if self.upper[j].is_finite() {
                worst = worst.max(x[j] - self.upper[j]);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    /// Primal values for the problem's variables (meaningful when Optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    /// Absolute tolerance on feasibility and reduced costs.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            tol: 1e-6,
            max_iters: 50_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("numerical singularity: no usable pivot (magnitude < {0:.1e})")]
    Singular(f64),
    #[error("lower bound of variable {0} must be finite")]
    UnboundedBelow(usize),
    #[error("inconsistent bounds on variable {0}: lower > upper")]
    BadBounds(usize),
}

const PIVOT_EPS: f64 = 1e-9;
const DEGENERATE_STALL: usize = 100;

/// Solves the LP with a two-phase bounded-variable primal simplex.
///
/// Entering rule: most negative reduced cost (lowest index on ties),
/// switching to Bland's lowest-index rule after a run of degenerate pivots.
/// Leaving rule: minimum ratio, lowest basic-variable index on ties. Rows are
/// equilibrated by their largest coefficient magnitude before solving, which
/// keeps big-M rows well conditioned; the returned primal values are in the
/// original (unscaled) space. Deterministic for identical inputs.
pub fn solve_lp(p: &LpProblem, opts: &SimplexOptions) -> Result<LpResult, SimplexError> {
    for j in 0..p.n_vars {
        if !p.lower[j].is_finite() {
            return Err(SimplexError::UnboundedBelow(j));
        }
        if p.lower[j] > p.upper[j] {
            return Err(SimplexError::BadBounds(j));
        }
    }
    Tableau::build(p, opts).solve(p)
}

struct Tableau {
    m: usize,
    /// total columns: structural + slack + artificial
    n_total: usize,
    n_struct: usize,
    /// dense row-major tableau, m rows by n_total columns
    a: Vec<f64>,
    /// per-variable bounds in tableau space
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// current value of every variable
    x: Vec<f64>,
    /// basic variable per row
    basis: Vec<usize>,
    /// row of a basic variable, or usize::MAX when nonbasic
    in_row: Vec<usize>,
    /// nonbasic var rests at upper bound (else lower)
    at_upper: Vec<bool>,
    /// phase-1 and phase-2 reduced-cost rows
    d1: Vec<f64>,
    d2: Vec<f64>,
    first_artificial: usize,
    tol: f64,
    max_iters: usize,
    iterations: usize,
}

enum StepOutcome {
    Moved,
    OptimalForPhase,
    Unbounded,
}

impl Tableau {
    fn build(p: &LpProblem, opts: &SimplexOptions) -> Self {
        let m = p.rows.len();
        let n = p.n_vars;

        // Row equilibration factors.
        let scale: Vec<f64> = p
            .rows
            .iter()
            .map(|row| {
                let maxabs = row
                    .coeffs
                    .iter()
                    .map(|&(_, a)| a.abs())
                    .fold(0.0f64, f64::max);
                if maxabs > 1.0 {
                    1.0 / maxabs
                } else {
                    1.0
                }
            })
            .collect();

        // Layout: structural | one slack per row (fixed to 0 for Eq) | one
        // artificial per row (bounds widened only where the crash needs it).
        let n_slack = m;
        let n_total = n + n_slack + m;
        let first_slack = n;
        let first_artificial = n + n_slack;

        let mut a = vec![0.0f64; m * n_total];
        let mut lower = vec![0.0f64; n_total];
        let mut upper = vec![0.0f64; n_total];
        lower[..n].copy_from_slice(&p.lower);
        upper[..n].copy_from_slice(&p.upper);

        let mut x = vec![0.0f64; n_total];
        // Structural variables start nonbasic at their (finite) lower bound.
        x[..n].copy_from_slice(&p.lower);

        let mut basis = vec![0usize; m];
        let mut in_row = vec![usize::MAX; n_total];
        let at_upper = vec![false; n_total];
        let mut c1 = vec![0.0f64; n_total];

        for (r, row) in p.rows.iter().enumerate() {
            let s = scale[r];
            for &(j, coeff) in &row.coeffs {
                a[r * n_total + j] += coeff * s;
            }
            let rhs = row.rhs * s;
            let slack = first_slack + r;
            let art = first_artificial + r;

            let (slack_lo, slack_hi, sigma) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY, 1.0),
                Sense::Ge => (0.0, f64::INFINITY, -1.0),
                Sense::Eq => (0.0, 0.0, 1.0),
            };
            lower[slack] = slack_lo;
            upper[slack] = slack_hi;
            a[r * n_total + slack] = sigma;

            // Residual the basic variable must absorb at the crash point.
            let structural: f64 = row.coeffs.iter().map(|&(j, c)| c * s * x[j]).sum();
            let residual = rhs - structural;

            let slack_val = sigma * residual; // sigma is +-1
            let slack_ok = slack_val >= slack_lo && slack_val <= slack_hi;
            if slack_ok && row.sense != Sense::Eq {
                // Crash: slack absorbs the residual, no artificial needed.
                basis[r] = slack;
                in_row[slack] = r;
                x[slack] = slack_val;
                // Artificial stays pinned at zero.
                a[r * n_total + art] = 1.0;
            } else {
                let tau = if residual >= 0.0 { 1.0 } else { -1.0 };
                a[r * n_total + art] = tau;
                upper[art] = f64::INFINITY;
                basis[r] = art;
                in_row[art] = r;
                x[art] = residual.abs();
                c1[art] = 1.0;
            }
        }

        // Normalize rows so every basic column is a +1 unit vector.
        for r in 0..m {
            let b = basis[r];
            let v = a[r * n_total + b];
            if v != 1.0 {
                for j in 0..n_total {
                    a[r * n_total + j] /= v;
                }
            }
        }

        let mut c2 = vec![0.0f64; n_total];
        c2[..n].copy_from_slice(&p.objective);

        // Reduced costs d = c - c_B^T B^{-1} A; initial basics have c2 = 0,
        // artificial basics carry c1 = 1.
        let mut d1 = c1.clone();
        for r in 0..m {
            if c1[basis[r]] != 0.0 {
                let w = c1[basis[r]];
                for j in 0..n_total {
                    d1[j] -= w * a[r * n_total + j];
                }
            }
        }
        let d2 = c2;

        Tableau {
            m,
            n_total,
            n_struct: n,
            a,
            lower,
            upper,
            x,
            basis,
            in_row,
            at_upper,
            d1,
            d2,
            first_artificial,
            tol: opts.tol,
            max_iters: opts.max_iters,
            iterations: 0,
        }
    }

    fn solve(mut self, p: &LpProblem) -> Result<LpResult, SimplexError> {
        // Phase 1: drive artificial infeasibility to zero.
        let needs_phase1 = (self.first_artificial..self.n_total).any(|j| self.x[j] > 0.0);
        if needs_phase1 {
            match self.run_phase(true)? {
                StepOutcome::OptimalForPhase => {}
                StepOutcome::Unbounded => unreachable!("phase 1 is bounded below"),
                StepOutcome::Moved => {
                    return Ok(self.result(p, LpStatus::IterationLimit));
                }
            }
            let infeas: f64 = (self.first_artificial..self.n_total)
                .map(|j| self.x[j].max(0.0))
                .sum();
            if infeas > self.tol {
                return Ok(self.result(p, LpStatus::Infeasible));
            }
        }
        // Pin artificials for phase 2.
        for j in self.first_artificial..self.n_total {
            self.upper[j] = 0.0;
        }

        match self.run_phase(false)? {
            StepOutcome::OptimalForPhase => Ok(self.result(p, LpStatus::Optimal)),
            StepOutcome::Unbounded => Ok(self.result(p, LpStatus::Unbounded)),
            StepOutcome::Moved => Ok(self.result(p, LpStatus::IterationLimit)),
        }
    }

    fn result(&self, p: &LpProblem, status: LpStatus) -> LpResult {
        let x = self.x[..self.n_struct].to_vec();
        let objective = p
            .objective
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .sum::<f64>();
        LpResult {
            status,
            x,
            objective,
            iterations: self.iterations,
        }
    }

    /// Runs pivots until the phase's reduced costs are optimal. Returns
    /// `Moved` only when the iteration budget runs out.
    fn run_phase(&mut self, phase1: bool) -> Result<StepOutcome, SimplexError> {
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= self.max_iters {
                return Ok(StepOutcome::Moved);
            }
            let bland = degenerate_streak >= DEGENERATE_STALL;
            let Some(entering) = self.pick_entering(phase1, bland) else {
                return Ok(StepOutcome::OptimalForPhase);
            };
            self.iterations += 1;
            match self.pivot(entering)? {
                PivotOutcome::Unbounded => return Ok(StepOutcome::Unbounded),
                PivotOutcome::Step { degenerate } => {
                    if degenerate {
                        degenerate_streak += 1;
                    } else {
                        degenerate_streak = 0;
                    }
                }
            }
        }
    }

    /// Entering-variable score: reduced cost for at-lower variables, negated
    /// reduced cost for at-upper variables. Improving iff score < -tol.
    fn score(&self, phase1: bool, j: usize) -> f64 {
        let d = if phase1 { self.d1[j] } else { self.d2[j] };
        if self.at_upper[j] {
            -d
        } else {
            d
        }
    }

    fn pick_entering(&self, phase1: bool, bland: bool) -> Option<usize> {
        let limit = if phase1 {
            self.n_total
        } else {
            // Artificials are pinned in phase 2; skip them entirely.
            self.first_artificial
        };
        let mut best: Option<(f64, usize)> = None;
        for j in 0..limit {
            if self.in_row[j] != usize::MAX || self.lower[j] == self.upper[j] {
                continue;
            }
            let s = self.score(phase1, j);
            if s < -self.tol {
                if bland {
                    return Some(j);
                }
                match best {
                    Some((bs, _)) if bs <= s => {}
                    _ => best = Some((s, j)),
                }
            }
        }
        best.map(|(_, j)| j)
    }

    fn pivot(&mut self, q: usize) -> Result<PivotOutcome, SimplexError> {
        let nt = self.n_total;
        let m = self.m;
        // Direction: +1 when rising from lower, -1 when falling from upper.
        let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

        // Ratio test over the basic variables.
        const TIE_EPS: f64 = 1e-9;
        let mut best_t = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None; // (row, leaves_at_upper)
        for r in 0..m {
            let y = self.a[r * nt + q] * dir;
            let (ratio, hits_upper) = if y > PIVOT_EPS {
                let room = (self.x[self.basis[r]] - self.lower[self.basis[r]]).max(0.0);
                (room / y, false)
            } else if y < -PIVOT_EPS {
                let ub = self.upper[self.basis[r]];
                if !ub.is_finite() {
                    continue;
                }
                let room = (ub - self.x[self.basis[r]]).max(0.0);
                (room / (-y), true)
            } else {
                continue;
            };
            let take = match leave {
                None => true,
                Some((lr, _)) => {
                    ratio < best_t - TIE_EPS
                        || (ratio <= best_t + TIE_EPS && self.basis[r] < self.basis[lr])
                }
            };
            if take {
                best_t = best_t.min(ratio);
                leave = Some((r, hits_upper));
            }
        }

        // The entering variable's own span competes with the row ratios.
        let span = self.upper[q] - self.lower[q]; // may be inf
        if span < best_t {
            if span.is_infinite() {
                return Ok(PivotOutcome::Unbounded);
            }
            // Bound flip: cross to the opposite bound, no basis change.
            for r in 0..m {
                let y = self.a[r * nt + q];
                self.x[self.basis[r]] -= dir * span * y;
            }
            let to_upper = !self.at_upper[q];
            self.at_upper[q] = to_upper;
            self.x[q] = if to_upper {
                self.upper[q]
            } else {
                self.lower[q]
            };
            return Ok(PivotOutcome::Step { degenerate: false });
        }
        if best_t.is_infinite() {
            return Ok(PivotOutcome::Unbounded);
        }

        {
            let (r, leaves_at_upper) = leave.expect("finite ratio implies a leaving row");
            {
                let t = best_t.max(0.0);
                let pivot_val = self.a[r * nt + q];
                if pivot_val.abs() < PIVOT_EPS {
                    return Err(SimplexError::Singular(PIVOT_EPS));
                }

                // Update primal values along the direction.
                for row in 0..m {
                    let y = self.a[row * nt + q];
                    let b = self.basis[row];
                    self.x[b] -= dir * t * y;
                }
                let entering_val = self.x[q] + dir * t;

                let leaving = self.basis[r];
                // Snap the leaving variable exactly onto the bound it hit.
                self.x[leaving] = if leaves_at_upper {
                    self.upper[leaving]
                } else {
                    self.lower[leaving]
                };
                self.at_upper[leaving] = leaves_at_upper;
                self.in_row[leaving] = usize::MAX;

                self.basis[r] = q;
                self.in_row[q] = r;
                self.x[q] = entering_val;

                // Gauss-Jordan elimination of column q.
                let inv = 1.0 / pivot_val;
                let (pre, rest) = self.a.split_at_mut(r * nt);
                let (prow, post) = rest.split_at_mut(nt);
                for v in prow.iter_mut() {
                    *v *= inv;
                }
                for chunk in pre
                    .chunks_exact_mut(nt)
                    .chain(post.chunks_exact_mut(nt))
                {
                    let factor = chunk[q];
                    if factor != 0.0 {
                        for (cv, pv) in chunk.iter_mut().zip(prow.iter()) {
                            *cv -= factor * pv;
                        }
                    }
                }
                let f1 = self.d1[q];
                if f1 != 0.0 {
                    for (dv, pv) in self.d1.iter_mut().zip(prow.iter()) {
                        *dv -= f1 * pv;
                    }
                }
                let f2 = self.d2[q];
                if f2 != 0.0 {
                    for (dv, pv) in self.d2.iter_mut().zip(prow.iter()) {
                        *dv -= f2 * pv;
                    }
                }

                Ok(PivotOutcome::Step { degenerate: t <= 1e-12 })
            }
        }
    }
}

enum PivotOutcome {
    Step { degenerate: bool },
    Unbounded,
}
