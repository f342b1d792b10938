//! Bounded-variable primal revised simplex.
//!
//! The basis inverse is kept in product form (a file of eta columns) and is
//! rebuilt from scratch every `refactor_interval` pivots. Every row gets a
//! slack column; rows whose slack cannot absorb the initial residual get an
//! artificial column, which phase one drives to zero. Pricing is Dantzig's
//! rule with a Harris two-pass ratio test; after `degenerate_limit`
//! consecutive degenerate pivots the solver switches to Bland's rule until
//! the objective moves again.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation, SolverOptions, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

#[derive(Debug)]
struct Eta {
    row: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    val: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    etas: Vec<Eta>,
    updates: usize,
    iterations: usize,
    max_iterations: usize,
    first_artificial: usize,
    opts: SolverOptions,
}

fn resting_value(lo: f64, hi: f64) -> (f64, VarState) {
    if lo.is_finite() {
        (lo, VarState::Lower)
    } else if hi.is_finite() {
        (hi, VarState::Upper)
    } else {
        (0.0, VarState::Zero)
    }
}

impl Simplex {
    fn new(lp: &LinearProgram, opts: &SolverOptions) -> Self {
        let m = lp.rows.len();
        let n = lp.vars.len();

        let row_scale: Vec<f64> = lp
            .rows
            .iter()
            .map(|r| {
                let mx = r.coeffs.iter().fold(0.0f64, |a, (_, c)| a.max(c.abs()));
                if mx > 0.0 {
                    1.0 / mx
                } else {
                    1.0
                }
            })
            .collect();

        // Transpose rows into scaled columns, merging repeated entries.
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, r) in lp.rows.iter().enumerate() {
            for &(v, c) in &r.coeffs {
                if c == 0.0 {
                    continue;
                }
                let col = &mut per_col[v.0];
                match col.last_mut() {
                    Some(last) if last.0 == i => last.1 += c * row_scale[i],
                    _ => col.push((i, c * row_scale[i])),
                }
            }
        }
        let mut col_start = Vec::with_capacity(n + 2 * m + 1);
        let mut row_idx = Vec::new();
        let mut val = Vec::new();
        col_start.push(0);
        for col in &per_col {
            for &(i, c) in col {
                row_idx.push(i);
                val.push(c);
            }
            col_start.push(row_idx.len());
        }

        let mut lo: Vec<f64> = lp.vars.iter().map(|v| v.lower).collect();
        let mut hi: Vec<f64> = lp.vars.iter().map(|v| v.upper).collect();
        let b: Vec<f64> = lp.rows.iter().zip(&row_scale).map(|(r, s)| r.rhs * s).collect();

        let mut x = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for j in 0..n {
            let (v, s) = resting_value(lo[j], hi[j]);
            x.push(v);
            state.push(s);
        }

        // Residual each slack must absorb.
        let mut resid = b.clone();
        for (j, col) in per_col.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, c) in col {
                    resid[i] -= c * x[j];
                }
            }
        }

        // Slack columns n..n+m.
        let mut basis = vec![0; m];
        for (i, r) in lp.rows.iter().enumerate() {
            row_idx.push(i);
            val.push(1.0);
            col_start.push(row_idx.len());
            let (l, h) = match r.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
            x.push(resid[i]);
            state.push(VarState::Basic(i));
            basis[i] = n + i;
        }

        // Artificials for rows whose slack would violate its bounds.
        let first_artificial = n + m;
        for i in 0..m {
            let s = n + i;
            let r = resid[i];
            let target = if r < lo[s] {
                lo[s]
            } else if r > hi[s] {
                hi[s]
            } else {
                continue;
            };
            x[s] = target;
            state[s] = if target == lo[s] { VarState::Lower } else { VarState::Upper };
            let excess = r - target;
            row_idx.push(i);
            val.push(excess.signum());
            col_start.push(row_idx.len());
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(excess.abs());
            state.push(VarState::Basic(i));
            basis[i] = x.len() - 1;
        }

        let ncols = x.len();
        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + ncols) + 1000);
        Simplex {
            m,
            n_struct: n,
            col_start,
            row_idx,
            val,
            lo,
            hi,
            cost: vec![0.0; ncols],
            x,
            b,
            row_scale,
            state,
            basis,
            etas: Vec::new(),
            updates: 0,
            iterations: 0,
            max_iterations,
            first_artificial,
            opts: *opts,
        }
    }

    fn ncols(&self) -> usize {
        self.x.len()
    }

    fn has_artificials(&self) -> bool {
        self.ncols() > self.first_artificial
    }

    fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_start[j], self.col_start[j + 1]);
        (&self.row_idx[a..b], &self.val[a..b])
    }

    fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let vp = v[eta.row];
            if vp == 0.0 {
                continue;
            }
            let vp = vp / eta.pivot;
            v[eta.row] = vp;
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                v[i] -= a * vp;
            }
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.row];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                s -= a * v[i];
            }
            v[eta.row] = s / eta.pivot;
        }
    }

    fn push_eta(&mut self, col: &[f64], row: usize) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in col.iter().enumerate() {
            if i != row && a.abs() > 1e-14 {
                idx.push(i);
                val.push(a);
            }
        }
        self.etas.push(Eta { row, pivot: col[row], idx, val });
    }

    fn load_column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (rows, vals) = self.col(j);
        for (&i, &a) in rows.iter().zip(vals) {
            out[i] = a;
        }
    }

    /// Rebuilds the eta file for the current basic set and recomputes basic values.
    fn refactor(&mut self) {
        self.etas.clear();
        self.updates = 0;
        let m = self.m;
        let mut taken = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let mut structural = Vec::new();
        let mut dropped = Vec::new();

        for &v in &self.basis {
            let (rows, vals) = self.col(v);
            if v >= self.n_struct && rows.len() == 1 {
                let i = rows[0];
                if taken[i] {
                    dropped.push(v);
                    continue;
                }
                taken[i] = true;
                new_basis[i] = v;
                if vals[0] != 1.0 {
                    self.etas.push(Eta { row: i, pivot: vals[0], idx: Vec::new(), val: Vec::new() });
                }
            } else {
                structural.push(v);
            }
        }

        let order = self.triangular_order(&structural, &taken);
        let mut reserved = vec![false; m];
        for &(_, r) in &order {
            if let Some(r) = r {
                reserved[r] = true;
            }
        }

        let mut eta_at_row = vec![usize::MAX; m];
        for (k, e) in self.etas.iter().enumerate() {
            eta_at_row[e.row] = k;
        }
        let mut work = vec![0.0; m];
        let mut mark = vec![false; m];
        let mut touched = Vec::new();
        let mut heap = BinaryHeap::new();
        for (v, preferred) in order {
            if let Some(r) = preferred {
                reserved[r] = false;
            }
            let (rows, vals) = self.col(v);
            for (&i, &a) in rows.iter().zip(vals) {
                work[i] = a;
                mark[i] = true;
                touched.push(i);
                if eta_at_row[i] != usize::MAX {
                    heap.push(Reverse(eta_at_row[i]));
                }
            }
            // Sparse forward solve: etas fire in file order, only where the
            // running vector is nonzero.
            let mut last = usize::MAX;
            while let Some(Reverse(k)) = heap.pop() {
                if k == last {
                    continue;
                }
                last = k;
                let eta = &self.etas[k];
                let vp = work[eta.row];
                if vp == 0.0 {
                    continue;
                }
                let vp = vp / eta.pivot;
                work[eta.row] = vp;
                for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                    work[i] -= a * vp;
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                    }
                    let e = eta_at_row[i];
                    if e != usize::MAX && e > k {
                        heap.push(Reverse(e));
                    }
                }
            }
            let mut best = None;
            let mut best_abs = 0.0;
            if let Some(r) = preferred {
                let max = touched.iter().fold(0.0f64, |m, &i| m.max(work[i].abs()));
                if !taken[r] && work[r].abs() >= 0.1 * max {
                    best = Some(r);
                    best_abs = work[r].abs();
                }
            }
            if best.is_none() {
                for &i in &touched {
                    let a = work[i].abs();
                    if !taken[i] && !reserved[i] && (a > best_abs || (a == best_abs && best.is_some_and(|b| i < b))) {
                        best_abs = a;
                        best = Some(i);
                    }
                }
            }
            match best {
                Some(p) if best_abs > self.opts.pivot_tol => {
                    taken[p] = true;
                    new_basis[p] = v;
                    let mut idx = Vec::new();
                    let mut val = Vec::new();
                    touched.sort_unstable();
                    for &i in &touched {
                        if i != p && work[i].abs() > 1e-14 {
                            idx.push(i);
                            val.push(work[i]);
                        }
                    }
                    eta_at_row[p] = self.etas.len();
                    self.etas.push(Eta { row: p, pivot: work[p], idx, val });
                }
                _ => dropped.push(v),
            }
            for &i in &touched {
                work[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
        }

        // Singular basis: replace dropped columns by slacks of uncovered rows.
        for v in dropped {
            let (val, st) = resting_value(self.lo[v], self.hi[v]);
            self.x[v] = val;
            self.state[v] = st;
        }
        for i in 0..m {
            if !taken[i] {
                new_basis[i] = self.n_struct + i;
            }
        }
        for (p, &v) in new_basis.iter().enumerate() {
            self.state[v] = VarState::Basic(p);
        }
        self.basis = new_basis;
        self.recompute_basic_values();
    }

    /// Pivot order for the structural basic columns: row singletons first,
    /// column singletons last (each with the row it should pivot on), and the
    /// remaining bump in between, sparsest first.
    fn triangular_order(&self, cols: &[usize], taken: &[bool]) -> Vec<(usize, Option<usize>)> {
        let m = self.m;
        let n = cols.len();
        let mut col_rows: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, &v) in cols.iter().enumerate() {
            let (rows, vals) = self.col(v);
            let mut rs = Vec::new();
            for (&i, &a) in rows.iter().zip(vals) {
                if !taken[i] && a != 0.0 {
                    rs.push(i);
                    row_cols[i].push(k);
                }
            }
            col_rows.push(rs);
        }
        let mut row_count: Vec<usize> = row_cols.iter().map(Vec::len).collect();
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut row_live: Vec<bool> = taken.iter().map(|t| !t).collect();
        let mut col_live = vec![true; n];

        let mut front = Vec::new();
        let mut back = Vec::new();
        let mut row_stack: Vec<usize> = (0..m).rev().filter(|&i| row_live[i] && row_count[i] == 1).collect();
        let mut col_stack: Vec<usize> = (0..n).rev().filter(|&k| col_count[k] == 1).collect();
        loop {
            if let Some(i) = row_stack.pop() {
                if !row_live[i] || row_count[i] != 1 {
                    continue;
                }
                let k = *row_cols[i].iter().find(|&&k| col_live[k]).expect("live column in singleton row");
                if !self.stable_pivot(cols[k], i) {
                    continue;
                }
                front.push((cols[k], Some(i)));
                row_live[i] = false;
                col_live[k] = false;
                for &r in &col_rows[k] {
                    if row_live[r] {
                        row_count[r] -= 1;
                        if row_count[r] == 1 {
                            row_stack.push(r);
                        }
                    }
                }
                for &c in &row_cols[i] {
                    if col_live[c] {
                        col_count[c] -= 1;
                        if col_count[c] == 1 {
                            col_stack.push(c);
                        }
                    }
                }
            } else if let Some(k) = col_stack.pop() {
                if !col_live[k] || col_count[k] != 1 {
                    continue;
                }
                let i = *col_rows[k].iter().find(|&&i| row_live[i]).expect("live row in singleton column");
                if !self.stable_pivot(cols[k], i) {
                    continue;
                }
                back.push((cols[k], Some(i)));
                row_live[i] = false;
                col_live[k] = false;
                for &c in &row_cols[i] {
                    if col_live[c] {
                        col_count[c] -= 1;
                        if col_count[c] == 1 {
                            col_stack.push(c);
                        }
                    }
                }
                for &r in &col_rows[k] {
                    if row_live[r] {
                        row_count[r] -= 1;
                        if row_count[r] == 1 {
                            row_stack.push(r);
                        }
                    }
                }
            } else {
                break;
            }
        }

        let mut bump: Vec<usize> = (0..n).filter(|&k| col_live[k]).collect();
        bump.sort_by_key(|&k| (col_count[k], cols[k]));
        front.extend(bump.into_iter().map(|k| (cols[k], None)));
        front.extend(back.into_iter().rev());
        front
    }

    /// Whether `row` holds an entry of column `j` within a factor of ten of its largest.
    fn stable_pivot(&self, j: usize, row: usize) -> bool {
        let (rows, vals) = self.col(j);
        let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rows.iter().position(|&i| i == row).is_some_and(|p| vals[p].abs() >= 0.1 * max)
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.ncols() {
            if matches!(self.state[j], VarState::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            let (rows, vals) = self.col(j);
            for (&i, &a) in rows.iter().zip(vals) {
                rhs[i] -= a * xj;
            }
        }
        self.ftran(&mut rhs);
        for (p, &v) in self.basis.iter().enumerate() {
            self.x[v] = rhs[p];
        }
    }

    fn duals(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&v| self.cost[v]).collect();
        self.btran(&mut y);
        y
    }

    /// Unit penalties for basic variables that drifted outside their bounds,
    /// by basis position, or `None` when the basis is primal feasible.
    fn repair_costs(&self) -> Option<Vec<f64>> {
        let tol = 2.0 * self.opts.feasibility_tol;
        let mut any = false;
        let costs = self
            .basis
            .iter()
            .map(|&v| {
                if self.x[v] < self.lo[v] - tol {
                    any = true;
                    -1.0
                } else if self.x[v] > self.hi[v] + tol {
                    any = true;
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        any.then_some(costs)
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.reduced_cost_with(j, y, self.cost[j])
    }

    fn reduced_cost_with(&self, j: usize, y: &[f64], cj: f64) -> f64 {
        let (rows, vals) = self.col(j);
        let mut d = cj;
        for (&i, &a) in rows.iter().zip(vals) {
            d -= y[i] * a;
        }
        d
    }

    /// Entering variable and direction (+1 increase, -1 decrease). In repair
    /// mode nonbasic variables carry no cost.
    fn price(&self, y: &[f64], bland: bool, repair: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols() {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost_with(j, y, if repair { 0.0 } else { self.cost[j] });
            let dir = match st {
                VarState::Lower if d < -tol => 1.0,
                VarState::Upper if d > tol => -1.0,
                VarState::Zero if d < -tol => 1.0,
                VarState::Zero if d > tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        let m = self.m;
        let mut col = vec![0.0; m];
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut confirmed = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.updates >= self.opts.refactor_interval {
                self.refactor();
            }
            let repair = self.repair_costs();
            let y = match &repair {
                Some(c) => {
                    let mut y = c.clone();
                    self.btran(&mut y);
                    y
                }
                None => self.duals(),
            };
            let Some((q, dir)) = self.price(&y, bland, repair.is_some()) else {
                // Confirm on a fresh factorization.
                if !confirmed && self.updates > 0 {
                    self.refactor();
                    confirmed = true;
                    continue;
                }
                if repair.is_some() {
                    return Err(LpError::NumericBreakdown("basis lost primal feasibility".into()));
                }
                return Ok(Outcome::Optimal);
            };
            confirmed = false;

            self.load_column(q, &mut col);
            self.ftran(&mut col);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NumericBreakdown("non-finite entries in basis solve".into()));
            }

            let flip = self.hi[q] - self.lo[q];
            let (leave, theta) = self.ratio_test(&col, dir, bland, repair.is_some());
            if theta.is_nan() {
                return Err(LpError::NumericBreakdown("non-finite basic values in ratio test".into()));
            }
            let (leave, theta) = match leave {
                Some(l) if theta < flip => (Some(l), theta),
                _ if flip.is_finite() => (None, flip),
                _ if repair.is_some() => {
                    return Err(LpError::NumericBreakdown("unbounded direction while restoring feasibility".into()))
                }
                _ => return Ok(Outcome::Unbounded),
            };

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > self.opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            let step = dir * theta;
            self.x[q] += step;
            for p in 0..m {
                if col[p] != 0.0 {
                    let v = self.basis[p];
                    self.x[v] -= step * col[p];
                }
            }
            self.iterations += 1;

            match leave {
                None => {
                    // Bound flip.
                    self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((p, target)) => {
                    let out = self.basis[p];
                    self.x[out] = target;
                    self.state[out] = if target == self.lo[out] { VarState::Lower } else { VarState::Upper };
                    self.state[q] = VarState::Basic(p);
                    self.basis[p] = q;
                    self.push_eta(&col, p);
                    self.updates += 1;
                }
            }
        }
    }

    /// Bounds a basic variable must respect during the step. While repairing,
    /// a variable outside its bounds may move freely away from feasibility
    /// and stops at the first bound it reaches.
    fn step_bounds(&self, v: usize, repair: bool) -> (f64, f64) {
        let tol = 2.0 * self.opts.feasibility_tol;
        let (lo, hi, x) = (self.lo[v], self.hi[v], self.x[v]);
        if repair && x < lo - tol {
            (f64::NEG_INFINITY, lo)
        } else if repair && x > hi + tol {
            (hi, f64::INFINITY)
        } else {
            (lo, hi)
        }
    }

    /// Returns the leaving row with the bound it leaves at (None if no basic
    /// variable limits the step) and the step length.
    fn ratio_test(&self, col: &[f64], dir: f64, bland: bool, repair: bool) -> (Option<(usize, f64)>, f64) {
        let tol = self.opts.feasibility_tol;
        let ptol = self.opts.pivot_tol;
        // Row, exact limit, relaxed limit, bound reached.
        let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
        for (p, &a) in col.iter().enumerate() {
            if a.abs() <= ptol {
                continue;
            }
            let v = self.basis[p];
            let (l, h) = self.step_bounds(v, repair);
            let rate = -dir * a;
            let xv = self.x[v];
            if rate < 0.0 {
                if l.is_finite() {
                    cands.push((p, ((xv - l) / -rate).max(0.0), ((xv - l + tol) / -rate).max(0.0), l));
                }
            } else if h.is_finite() {
                cands.push((p, ((h - xv) / rate).max(0.0), ((h - xv + tol) / rate).max(0.0), h));
            }
        }
        if cands.is_empty() {
            return (None, f64::INFINITY);
        }
        if cands.iter().any(|c| c.1.is_nan() || c.2.is_nan()) {
            return (None, f64::NAN);
        }
        let pick = if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands.iter().filter(|c| c.1 <= min + 1e-12).min_by_key(|c| self.basis[c.0])
        } else {
            let bound = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= bound)
                .max_by(|a, b| col[a.0].abs().total_cmp(&col[b.0].abs()).then(b.0.cmp(&a.0)))
        };
        match pick {
            Some(&(p, theta, _, target)) => (Some((p, target)), theta),
            None => (None, f64::NAN),
        }
    }

    fn infeasibility(&self) -> f64 {
        (self.first_artificial..self.ncols()).map(|j| self.x[j].abs()).sum()
    }
}

/// Solves `lp` with explicit tolerances.
pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(lp, opts);
    if let Some(done) = first_stage(&mut s, lp, opts)? {
        return Ok(done);
    }
    let costs: Vec<f64> = lp.vars.iter().map(|v| v.cost).collect();
    finish(&mut s, lp, &costs, opts)
}

/// Lexicographic solve. After `lp` is optimal, `capped` gets the upper bound
/// `cap(value)` and the objective becomes `second`; the second stage
/// restarts from the first stage's basis. Returns both solutions. The
/// second is `None` when the first is not optimal.
pub fn solve_lp_two_stage(
    lp: &LinearProgram,
    capped: VarId,
    cap: impl FnOnce(f64) -> f64,
    second: &[(VarId, f64)],
    opts: &SolverOptions,
) -> Result<(LpSolution, Option<LpSolution>), LpError> {
    let mut s = Simplex::new(lp, opts);
    if let Some(done) = first_stage(&mut s, lp, opts)? {
        return Ok((done, None));
    }
    let costs: Vec<f64> = lp.vars.iter().map(|v| v.cost).collect();
    let first = finish(&mut s, lp, &costs, opts)?;

    let limit = cap(first.value(capped));
    let j = capped.0;
    if !(limit >= s.lo[j]) {
        return Err(LpError::NumericBreakdown(format!("second-stage cap {limit} below lower bound")));
    }
    s.hi[j] = s.hi[j].min(limit);
    if !matches!(s.state[j], VarState::Basic(_)) && s.x[j] > s.hi[j] {
        s.x[j] = s.hi[j];
        s.state[j] = VarState::Upper;
        s.recompute_basic_values();
    }
    let mut costs = vec![0.0; lp.vars.len()];
    for &(v, c) in second {
        costs[v.0] = c;
    }
    s.cost[..costs.len()].copy_from_slice(&costs);
    if let Outcome::Unbounded = s.run()? {
        return Ok((first, Some(empty(LpStatus::Unbounded, s.iterations))));
    }
    let second = finish(&mut s, lp, &costs, opts)?;
    Ok((first, Some(second)))
}

/// Phase one (if needed) and phase two. Returns a finished solution for
/// infeasible or unbounded programs, `None` when `s` sits at an optimum.
fn first_stage(s: &mut Simplex, lp: &LinearProgram, opts: &SolverOptions) -> Result<Option<LpSolution>, LpError> {
    s.refactor();

    let scale = 1.0 + s.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if s.has_artificials() {
        for j in s.first_artificial..s.ncols() {
            s.cost[j] = 1.0;
        }
        match s.run()? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(LpError::NumericBreakdown("phase one reported unbounded".into()));
            }
        }
        if s.infeasibility() > opts.feasibility_tol * scale {
            return Ok(Some(empty(LpStatus::Infeasible, s.iterations)));
        }
        for j in s.first_artificial..s.ncols() {
            s.cost[j] = 0.0;
            s.hi[j] = 0.0;
            if !matches!(s.state[j], VarState::Basic(_)) {
                s.x[j] = 0.0;
                s.state[j] = VarState::Lower;
            }
        }
    }
    for (j, v) in lp.vars.iter().enumerate() {
        s.cost[j] = v.cost;
    }
    if let Outcome::Unbounded = s.run()? {
        return Ok(Some(empty(LpStatus::Unbounded, s.iterations)));
    }
    Ok(None)
}

/// Reads the optimum off `s`, with `costs` as the structural objective.
fn finish(s: &mut Simplex, lp: &LinearProgram, costs: &[f64], opts: &SolverOptions) -> Result<LpSolution, LpError> {
    if s.updates > 0 {
        s.refactor();
    }

    let n = s.n_struct;
    let values: Vec<f64> = (0..n).map(|j| s.x[j].clamp(s.lo[j], s.hi[j])).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NumericBreakdown("non-finite primal values".into()));
    }
    let violation = lp.max_scaled_violation(&values);
    if violation > 10.0 * opts.feasibility_tol {
        return Err(LpError::NumericBreakdown(format!("final primal violation {violation:e}")));
    }

    let y = s.duals();
    let mut dual_objective: f64 = y.iter().zip(&s.b).map(|(a, b)| a * b).sum();
    let mut dual_infeasibility = 0.0f64;
    for j in 0..s.first_artificial {
        let d = s.reduced_cost(j, &y);
        if d > 0.0 {
            if s.lo[j].is_finite() {
                dual_objective += d * s.lo[j];
            } else {
                dual_infeasibility = dual_infeasibility.max(d);
            }
        } else if d < 0.0 {
            if s.hi[j].is_finite() {
                dual_objective += d * s.hi[j];
            } else {
                dual_infeasibility = dual_infeasibility.max(-d);
            }
        }
    }
    let objective: f64 = costs.iter().zip(&values).map(|(c, x)| c * x).sum();
    let duals = y.iter().zip(&s.row_scale).map(|(a, r)| a * r).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        values,
        duals,
        dual_objective,
        dual_infeasibility,
        iterations: s.iterations,
    })
}

fn empty(status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        objective: f64::NAN,
        values: Vec::new(),
        duals: Vec::new(),
        dual_objective: f64::NAN,
        dual_infeasibility: f64::NAN,
        iterations,
    }
}
