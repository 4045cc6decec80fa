//! Dense two-phase simplex for the small linear programs of the
//! certificate search. Bland's rule throughout, so no cycling.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Le, rhs }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Ge, rhs }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Eq, rhs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const TOL: f64 = 1e-10;

struct Tableau {
    // rows × (cols + 1); last column is the right-hand side
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.a[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (k, row) in self.a.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximise `cost · x` over columns `allowed`. Returns false when
    /// unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j] - self.basis.iter().enumerate().map(|(r, &b)| cost[b] * self.a[r][j]).sum::<f64>();
                reduced > TOL
            });
            let Some(c) = entering else { return true };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][c];
                if coef > TOL {
                    let ratio = self.rhs(r) / coef;
                    best = match best {
                        None => Some((ratio, r)),
                        Some((br, bro)) => {
                            if ratio < br - TOL || (ratio <= br + TOL && self.basis[r] < self.basis[bro]) {
                                Some((ratio, r))
                            } else {
                                Some((br, bro))
                            }
                        }
                    };
                }
            }
            let Some((_, r)) = best else { return false };
            self.pivot(r, c);
        }
    }
}

/// Maximise `objective · x` subject to `rows` and `x ≥ 0`.
pub fn maximize(objective: &[f64], rows: &[Row]) -> LpOutcome {
    let n = objective.len();
    let slack_count = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    // flip rows so every right-hand side is nonnegative
    let normalized: Vec<(Vec<f64>, Relation, f64)> = rows
        .iter()
        .map(|row| {
            assert_eq!(row.coeffs.len(), n, "row width differs from the objective");
            if row.rhs < 0.0 {
                let flipped = match row.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (row.coeffs.iter().map(|v| -v).collect(), flipped, -row.rhs)
            } else {
                (row.coeffs.clone(), row.relation, row.rhs)
            }
        })
        .collect();
    let art_count = normalized.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = n + slack_count;
    let cols = art_start + art_count;

    let mut a = Vec::with_capacity(rows.len());
    let mut basis = Vec::with_capacity(rows.len());
    let (mut slack, mut art) = (n, art_start);
    for (coeffs, rel, rhs) in &normalized {
        let mut line = vec![0.0; cols + 1];
        line[..n].copy_from_slice(coeffs);
        line[cols] = *rhs;
        match rel {
            Relation::Le => {
                line[slack] = 1.0;
                basis.push(slack);
                slack += 1;
            }
            Relation::Ge => {
                line[slack] = -1.0;
                slack += 1;
                line[art] = 1.0;
                basis.push(art);
                art += 1;
            }
            Relation::Eq => {
                line[art] = 1.0;
                basis.push(art);
                art += 1;
            }
        }
        a.push(line);
    }
    let mut tab = Tableau { a, basis, cols };

    if art_count > 0 {
        let mut phase1 = vec![0.0; cols];
        for v in &mut phase1[art_start..] {
            *v = -1.0;
        }
        tab.optimise(&phase1, cols);
        let infeasibility: f64 = (0..tab.a.len()).filter(|&r| tab.basis[r] >= art_start).map(|r| tab.rhs(r)).sum();
        if infeasibility > 1e-9 {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis or drop their rows
        let mut r = 0;
        while r < tab.a.len() {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.a[r][c].abs() > TOL) {
                    tab.pivot(r, c);
                } else {
                    tab.a.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(objective);
    if !tab.optimise(&cost, art_start) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(r);
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, value }
}
