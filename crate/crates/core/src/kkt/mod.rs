//! Linear solvers for systems `A x = f` restricted to `ker B`, where `B`
//! is block diagonal with one small block per node.
//!
//! The reduced system `CᵀAC x̂ = Cᵀf`, `x = C x̂`, is solved directly or by
//! PCG with the preconditioner `CᵀPC`; a saddle-point LU path serves as a
//! reference.

mod direct;
mod ichol;
mod nullspace;
mod pcg;

pub use direct::{lu_solve, SparseCholesky};
pub use ichol::IncompleteCholesky;
pub use nullspace::{kernel_basis, orthonormal_complement, ConstraintBlock, NodalConstraintSet, NullspaceMap};
pub use pcg::{pcg, PcgResult};

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Solution strategy for the constrained linear systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Sparse LU on the indefinite saddle-point matrix.
    SaddleDirect,
    /// Sparse Cholesky on the assembled `CᵀAC`.
    ReducedDirect,
    /// PCG on the reduced system with the diagonal of `CᵀAC`.
    PcgDiag,
    /// PCG on the reduced system with `Cᵀ(L Lᵀ)⁻¹C`, `A ≈ L Lᵀ` by IC(0)
    /// of the block of `A` on the free (non-fixed) DOFs.
    PcgIchol,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::SaddleDirect, Strategy::ReducedDirect, Strategy::PcgDiag, Strategy::PcgIchol];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SaddleDirect => "saddle_direct",
            Strategy::ReducedDirect => "reduced_direct",
            Strategy::PcgDiag => "pcg_diag",
            Strategy::PcgIchol => "pcg_ichol",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown solver strategy '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub strategy: Strategy,
    /// Relative residual tolerance for PCG.
    pub tol: f64,
    pub maxit: usize,
    /// Refactor IC(0) after this many matrix updates.
    pub ichol_refresh: usize,
    /// Number of extra Neumann-series terms in the preconditioner.
    pub neumann_order: usize,
    pub neumann_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::ReducedDirect,
            tol: 1e-8,
            maxit: 20_000,
            ichol_refresh: 50,
            neumann_order: 0,
            neumann_damping: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self { strategy, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// PCG iterations (0 for direct strategies).
    pub iterations: usize,
    pub converged: bool,
    pub rel_residual: f64,
}

/// Stateful solver: keeps factorizations and preconditioners across time steps.
pub struct ReducedSolver {
    opts: SolverOptions,
    a: Option<CsrMatrix>,
    updates_since_ichol: usize,
    ichol: Option<IncompleteCholesky>,
    ichol_failed: bool,
    /// Free DOFs the incomplete factor was computed on.
    ichol_free: Vec<usize>,
    chol: SparseCholesky,
}

impl ReducedSolver {
    pub fn new(opts: SolverOptions) -> Self {
        Self { opts, a: None, updates_since_ichol: 0, ichol: None, ichol_failed: false, ichol_free: Vec::new(), chol: SparseCholesky::new() }
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn matrix(&self) -> Option<&CsrMatrix> {
        self.a.as_ref()
    }

    /// Replaces the system matrix `A`.
    pub fn set_matrix(&mut self, a: CsrMatrix) {
        if let Some(old) = &self.a {
            if !old.same_pattern(&a) {
                self.ichol = None;
                self.ichol_failed = false;
            }
        }
        self.updates_since_ichol += 1;
        self.a = Some(a);
    }

    fn ensure_ichol(&mut self, fixed: &[bool]) {
        let refresh = self.updates_since_ichol > self.opts.ichol_refresh.max(1);
        let free: Vec<usize> = (0..fixed.len()).filter(|&i| !fixed[i]).collect();
        let moved = free != self.ichol_free;
        if (self.ichol.is_none() && !self.ichol_failed) || refresh || moved {
            let keep: Vec<bool> = fixed.iter().map(|f| !f).collect();
            let a = self.a.as_ref().unwrap().submatrix(&keep, &keep);
            self.ichol_free = free;
            match IncompleteCholesky::new(&a) {
                Ok(f) => {
                    self.ichol = Some(f);
                    self.ichol_failed = false;
                }
                Err(e) => {
                    log::warn!("{e}; falling back to diagonal preconditioning");
                    self.ichol = None;
                    self.ichol_failed = true;
                }
            }
            self.updates_since_ichol = 0;
        }
    }

    /// Solves `A x = f` on `ker B` with fixed DOFs set to zero.
    pub fn solve(&mut self, map: &NullspaceMap, f: &[f64]) -> Result<SolveOutcome> {
        let a = self.a.as_ref().ok_or_else(|| Error::invalid("solve called before set_matrix"))?;
        if a.nrows() != map.n_full() || f.len() != map.n_full() {
            return Err(Error::invalid(format!(
                "system size {} does not match map size {} / rhs {}",
                a.nrows(),
                map.n_full(),
                f.len()
            )));
        }
        match self.opts.strategy {
            Strategy::SaddleDirect => {
                let (x, _) = solve_saddle_direct(a, map.constraints(), map.fixed(), f)?;
                Ok(SolveOutcome { x, iterations: 0, converged: true, rel_residual: 0.0 })
            }
            Strategy::ReducedDirect => {
                let ar = a.congruence(&map.to_csr());
                let mut xr = vec![0.0; map.n_reduced()];
                map.apply_t(f, &mut xr);
                if map.n_reduced() > 0 {
                    self.chol.factor(&ar)?;
                    self.chol.solve_in_place(&mut xr)?;
                }
                let mut x = vec![0.0; map.n_full()];
                map.apply(&xr, &mut x);
                Ok(SolveOutcome { x, iterations: 0, converged: true, rel_residual: 0.0 })
            }
            Strategy::PcgDiag | Strategy::PcgIchol => {
                if self.opts.strategy == Strategy::PcgIchol {
                    self.ensure_ichol(map.fixed());
                }
                let a = self.a.as_ref().unwrap();
                let diag = if self.ichol.is_none() || self.opts.strategy == Strategy::PcgDiag {
                    Some(map.reduced_diagonal(a))
                } else {
                    None
                };
                if let Some(d) = &diag {
                    if d.iter().any(|v| !(*v > 0.0)) {
                        return Err(Error::Factorization("nonpositive diagonal in reduced matrix".into()));
                    }
                }
                let ichol = match (self.opts.strategy, &self.ichol) {
                    (Strategy::PcgIchol, Some(ic)) => Some((ic, self.ichol_free.as_slice())),
                    _ => None,
                };
                pcg_reduced(a, map, f, diag.as_deref(), ichol, &self.opts)
            }
        }
    }
}

fn pcg_reduced(
    a: &CsrMatrix,
    map: &NullspaceMap,
    f: &[f64],
    diag: Option<&[f64]>,
    ichol: Option<(&IncompleteCholesky, &[usize])>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let n = map.n_full();
    let nr = map.n_reduced();
    let mut fr = vec![0.0; nr];
    map.apply_t(f, &mut fr);
    let mut full_in = vec![0.0; n];
    let mut full_out = vec![0.0; n];
    let mut apply_a = |v: &[f64], out: &mut [f64]| {
        map.apply(v, &mut full_in);
        a.matvec_into(&full_in, &mut full_out);
        map.apply_t(&full_out, out);
    };
    let nf = ichol.map_or(0, |(_, free)| free.len());
    let (mut p_full, mut p_in, mut p_out) = (vec![0.0; n], vec![0.0; nf], vec![0.0; nf]);
    let mut base = |r: &[f64], z: &mut [f64]| match (ichol, diag) {
        (Some((ic, free)), _) => {
            map.apply(r, &mut p_full);
            for (v, &i) in p_in.iter_mut().zip(free) {
                *v = p_full[i];
            }
            ic.solve_into(&p_in, &mut p_out);
            for (v, &i) in p_out.iter().zip(free) {
                p_full[i] = *v;
            }
            map.apply_t(&p_full, z);
        }
        (None, Some(d)) => {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                *zi = ri / di;
            }
        }
        (None, None) => z.copy_from_slice(r),
    };
    let result = if opts.neumann_order == 0 {
        pcg(&mut apply_a, &mut base, &fr, None, opts.tol, opts.maxit)
    } else {
        // P_N = ϱ P̂ Σ_{j≤m} (I − ϱ Â P̂)^j, symmetric since it is a polynomial in P̂Â times P̂.
        let rho = opts.neumann_damping;
        let m = opts.neumann_order;
        let mut s = vec![0.0; nr];
        let mut acc = vec![0.0; nr];
        let mut t1 = vec![0.0; nr];
        let mut t2 = vec![0.0; nr];
        let apply_a2 = std::cell::RefCell::new(&mut apply_a);
        let mut neumann = |r: &[f64], z: &mut [f64]| {
            s.copy_from_slice(r);
            acc.copy_from_slice(r);
            for _ in 0..m {
                base(&s, &mut t1);
                (apply_a2.borrow_mut())(&t1, &mut t2);
                for i in 0..nr {
                    s[i] -= rho * t2[i];
                    acc[i] += s[i];
                }
            }
            base(&acc, z);
            z.iter_mut().for_each(|v| *v *= rho);
        };
        let mut op = |v: &[f64], out: &mut [f64]| (apply_a2.borrow_mut())(v, out);
        pcg(&mut op, &mut neumann, &fr, None, opts.tol, opts.maxit)
    };
    let mut x = vec![0.0; n];
    map.apply(&result.x, &mut x);
    if !result.converged {
        log::warn!(
            "PCG stopped after {} iterations at relative residual {:.3e}",
            result.iterations,
            result.rel_residual
        );
    }
    Ok(SolveOutcome { x, iterations: result.iterations, converged: result.converged, rel_residual: result.rel_residual })
}

/// One-shot reduced solve with a fresh solver.
pub fn solve_reduced(a: &CsrMatrix, map: &NullspaceMap, f: &[f64], opts: SolverOptions) -> Result<SolveOutcome> {
    let mut s = ReducedSolver::new(opts);
    s.set_matrix(a.clone());
    s.solve(map, f)
}

/// Direct solve of `[A_FF B_Fᵀ; B_F 0][x; λ] = [f_F; 0]` over the non-fixed
/// DOFs `F`. Returns the full-length `x` (zero on fixed DOFs) and `λ`.
pub fn solve_saddle_direct(a: &CsrMatrix, b: &NodalConstraintSet, fixed: &[bool], f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.nrows();
    if fixed.len() != n || f.len() != n || b.n_dofs() != n {
        return Err(Error::invalid("saddle system dimensions disagree"));
    }
    let free: Vec<bool> = fixed.iter().map(|x| !x).collect();
    let mut index = vec![usize::MAX; n];
    let mut nf = 0;
    for i in 0..n {
        if free[i] {
            index[i] = nf;
            nf += 1;
        }
    }
    let p = b.n_rows();
    let dim = nf + p;
    let aff = a.submatrix(&free, &free);
    let mut t = TripletBuilder::with_capacity(dim, dim, aff.nnz() + 2 * p * 6);
    for i in 0..nf {
        for (j, v) in aff.row(i) {
            t.push(i, j, v);
        }
    }
    let mut row = nf;
    for blk in b.blocks() {
        let l = blk.dofs.len();
        for r in 0..blk.rows {
            for (j, &d) in blk.dofs.iter().enumerate() {
                let v = blk.matrix[r * l + j];
                if index[d] == usize::MAX {
                    return Err(Error::invalid("constraint acts on a fixed DOF"));
                }
                if v != 0.0 {
                    t.push(row + r, index[d], v);
                    t.push(index[d], row + r, v);
                }
            }
        }
        row += blk.rows;
    }
    let k = t.build();
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        if free[i] {
            rhs[index[i]] = f[i];
        }
    }
    let sol = if dim == 0 { vec![] } else { lu_solve(&k, &rhs)? };
    let mut x = vec![0.0; n];
    for i in 0..n {
        if free[i] {
            x[i] = sol[index[i]];
        }
    }
    Ok((x, sol[nf..].to_vec()))
}
