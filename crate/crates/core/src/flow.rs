//! Generic constrained gradient descent loop and its trace.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Energy split into the components reported in traces. `other` collects
/// contributions without a dedicated column (loads, spontaneous curvature);
/// it enters `total` only.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energy {
    pub bend: f64,
    pub twist: f64,
    pub penalty: f64,
    pub tp: f64,
    pub membrane: f64,
    pub other: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.bend + self.twist + self.penalty + self.tp + self.membrane + self.other
    }
}

/// Lumped `L¹` and nodal maximum of the constraint residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Violation {
    pub l1: f64,
    pub linf: f64,
}

/// What a model reports about one accepted step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInfo {
    /// Step size used for this step.
    pub tau: f64,
    /// Proposed step size for the next step.
    pub next_tau: f64,
    /// Norm of the update in the flow metric (product norm for several variables).
    pub dt_norm: f64,
    /// Norm used by the stopping test when it differs from `dt_norm`.
    pub stop_norm: Option<f64>,
    pub solver_iters: usize,
}

/// A discrete gradient flow.
pub trait FlowModel {
    type State: Clone;

    fn energy(&self, state: &Self::State) -> Energy;

    fn violation(&self, state: &Self::State) -> Violation;

    /// Advances one step of size `tau` (adaptive models may shrink it).
    fn step(&mut self, state: &Self::State, tau: f64) -> Result<(Self::State, StepInfo)>;

    /// Whether the stopping tolerance scales with `min(1, τ)`.
    fn scaled_stopping(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct FlowParams {
    pub tau: f64,
    pub eps_stop: f64,
    pub max_steps: usize,
    /// Keep every `trace_every`-th row after the first `keep_first`.
    pub trace_every: usize,
    pub keep_first: usize,
}

impl FlowParams {
    pub fn new(tau: f64, eps_stop: f64) -> Self {
        Self { tau, eps_stop, max_steps: 1_000_000, trace_every: 1, keep_first: 100 }
    }

    pub fn max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("step size must be positive, got {}", self.tau)));
        }
        if !(self.eps_stop > 0.0) {
            return Err(Error::invalid(format!("stopping tolerance must be positive, got {}", self.eps_stop)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub tau: f64,
    pub energy: Energy,
    pub dt_norm: f64,
    pub violation: Violation,
    pub solver_iters: usize,
}

pub const CSV_HEADER: &str = "k,tau,E_total,E_bend,E_twist,E_penalty,E_tp,E_membrane,dt_norm,viol_l1,viol_linf,solver_iters";

/// Per-step record of a flow. Row 0 holds the initial state.
#[derive(Clone, Debug, Default)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    /// Number of steps taken.
    pub steps: usize,
    /// Whether the stopping criterion was met.
    pub converged: bool,
    /// `Σ τ_k ‖d_t‖²` over all steps.
    pub dissipation: f64,
    /// Maxima over all steps, including thinned-out ones.
    pub max_violation: Violation,
    pub total_solver_iters: usize,
    pub seed: Option<u64>,
}

impl FlowTrace {
    pub fn initial(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn average_solver_iters(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_solver_iters as f64 / self.steps as f64
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let e = &r.energy;
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.k,
                r.tau,
                e.total(),
                e.bend,
                e.twist,
                e.penalty,
                e.tp,
                e.membrane,
                r.dt_norm,
                r.violation.l1,
                r.violation.linf,
                r.solver_iters
            )?;
        }
        Ok(())
    }

    /// Parses a trace written by [`FlowTrace::write_csv`]. The `other`
    /// energy component is recovered as `E_total` minus the named columns.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, message: "empty trace".into() })??;
        if header.trim() != CSV_HEADER {
            return Err(Error::Parse { line: 1, message: format!("unexpected header '{}'", header.trim()) });
        }
        let mut trace = FlowTrace::default();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(Error::Parse { line: lno, message: format!("expected 12 columns, found {}", f.len()) });
            }
            let num = |j: usize| -> Result<f64> {
                f[j].trim().parse::<f64>().map_err(|e| Error::Parse { line: lno, message: format!("column {}: {e}", j + 1) })
            };
            let int = |j: usize| -> Result<usize> {
                f[j].trim().parse::<usize>().map_err(|e| Error::Parse { line: lno, message: format!("column {}: {e}", j + 1) })
            };
            let (bend, twist, penalty, tp, membrane) = (num(3)?, num(4)?, num(5)?, num(6)?, num(7)?);
            let energy = Energy { bend, twist, penalty, tp, membrane, other: num(2)? - (bend + twist + penalty + tp + membrane) };
            let row = TraceRow {
                k: int(0)?,
                tau: num(1)?,
                energy,
                dt_norm: num(8)?,
                violation: Violation { l1: num(9)?, linf: num(10)? },
                solver_iters: int(11)?,
            };
            if row.k > 0 {
                trace.dissipation += row.tau * row.dt_norm * row.dt_norm;
                trace.total_solver_iters += row.solver_iters;
            }
            trace.max_violation.l1 = trace.max_violation.l1.max(row.violation.l1);
            trace.max_violation.linf = trace.max_violation.linf.max(row.violation.linf);
            trace.steps = trace.steps.max(row.k);
            trace.rows.push(row);
        }
        if trace.rows.is_empty() {
            return Err(Error::Parse { line: 2, message: "trace has no rows".into() });
        }
        Ok(trace)
    }
}

/// Runs the flow until `‖d_t‖ ≤ ε_stop` (times `min(1,τ_k)` for adaptive
/// models) or `max_steps`. `observe` sees every accepted state.
pub fn run_flow<M, O>(model: &mut M, initial: M::State, params: &FlowParams, mut observe: O) -> Result<(M::State, FlowTrace)>
where
    M: FlowModel,
    O: FnMut(usize, &M::State, &TraceRow),
{
    params.validate()?;
    let mut state = initial;
    let mut trace = FlowTrace::default();
    let row0 = TraceRow { k: 0, tau: params.tau, energy: model.energy(&state), dt_norm: 0.0, violation: model.violation(&state), solver_iters: 0 };
    trace.max_violation = row0.violation;
    trace.rows.push(row0);
    observe(0, &state, &row0);
    let mut tau = params.tau;
    for k in 1..=params.max_steps {
        let (next, info) = model.step(&state, tau).map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        state = next;
        let row = TraceRow {
            k,
            tau: info.tau,
            energy: model.energy(&state),
            dt_norm: info.dt_norm,
            violation: model.violation(&state),
            solver_iters: info.solver_iters,
        };
        trace.steps = k;
        trace.dissipation += info.tau * info.dt_norm * info.dt_norm;
        trace.total_solver_iters += info.solver_iters;
        trace.max_violation.l1 = trace.max_violation.l1.max(row.violation.l1);
        trace.max_violation.linf = trace.max_violation.linf.max(row.violation.linf);
        let tol = if model.scaled_stopping() { params.eps_stop * info.tau.min(1.0) } else { params.eps_stop };
        let done = info.stop_norm.unwrap_or(info.dt_norm) <= tol;
        if k <= params.keep_first || k % params.trace_every.max(1) == 0 || done || k == params.max_steps {
            trace.rows.push(row);
        }
        observe(k, &state, &row);
        if !row.energy.total().is_finite() {
            return Err(Error::Step { step: k, source: Box::new(Error::invalid("energy is not finite")) });
        }
        tau = info.next_tau;
        if done {
            trace.converged = true;
            break;
        }
    }
    Ok((state, trace))
}

/// Outcome of one trace check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Energy monotonicity, the discrete dissipation inequality and the ratio of
/// the maximal violation to the step size.
pub fn check_trace(t: &FlowTrace) -> Vec<Check> {
    let mut worst = (0usize, f64::NEG_INFINITY);
    for w in t.rows.windows(2) {
        let (a, b) = (w[0].energy.total(), w[1].energy.total());
        let excess = b - a - 1e-10 * (1.0 + a.abs());
        if excess > worst.1 {
            worst = (w[1].k, excess);
        }
    }
    let monotone = Check {
        name: "energy_monotone",
        passed: !(worst.1 > 0.0),
        detail: if worst.1 > 0.0 { format!("energy increases at step {} by {:e}", worst.0, worst.1) } else { "nonincreasing".into() },
    };
    let e0 = t.rows.first().map_or(0.0, |r| r.energy.total());
    let el = t.rows.last().map_or(0.0, |r| r.energy.total());
    let gap = el + t.dissipation - e0;
    let dissipation = Check {
        name: "energy_law",
        passed: gap <= 1e-8,
        detail: format!("E[L] + sum tau |d_t|^2 - E[0] = {gap:e}"),
    };
    let tau_max = t.rows.iter().skip(1).fold(0.0f64, |m, r| m.max(r.tau));
    let ratio = t.max_violation.l1 / tau_max;
    let violation = Check {
        name: "violation_per_tau",
        passed: ratio.is_finite() || t.max_violation.l1 == 0.0,
        detail: format!("max L1 violation {:e} = {ratio:e} * tau", t.max_violation.l1),
    };
    vec![monotone, dissipation, violation]
}

/// Compares two traces run at `τ` and `τ/2`: the maximal `L¹` violation
/// should halve.
pub fn check_pair(coarse: &FlowTrace, fine: &FlowTrace) -> Check {
    let ratio = coarse.max_violation.l1 / fine.max_violation.l1;
    Check {
        name: "violation_halving",
        passed: (1.5..=3.0).contains(&ratio),
        detail: format!("max L1 violation ratio {ratio:.4} (accept 1.5 to 3)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar flow `x ↦ x − τ x_new`, i.e. implicit Euler on `x²/2`.
    struct Quadratic;

    impl FlowModel for Quadratic {
        type State = f64;
        fn energy(&self, x: &f64) -> Energy {
            Energy { bend: 0.5 * x * x, ..Default::default() }
        }
        fn violation(&self, _: &f64) -> Violation {
            Violation::default()
        }
        fn step(&mut self, x: &f64, tau: f64) -> Result<(f64, StepInfo)> {
            let xn = x / (1.0 + tau);
            Ok((xn, StepInfo { tau, next_tau: tau, dt_norm: ((xn - x) / tau).abs(), stop_norm: None, solver_iters: 0 }))
        }
    }

    #[test]
    fn stationary_start_stops_at_first_step() {
        let (_, t) = run_flow(&mut Quadratic, 0.0, &FlowParams::new(0.1, 1e-9), |_, _, _| {}).unwrap();
        assert_eq!(t.steps, 1);
        assert!(t.converged);
    }

    #[test]
    fn energy_law_and_csv_roundtrip() {
        let (_, t) = run_flow(&mut Quadratic, 1.0, &FlowParams::new(0.1, 1e-6), |_, _, _| {}).unwrap();
        let e0 = t.rows[0].energy.total();
        let el = t.last().unwrap().energy.total();
        assert!(el + t.dissipation <= e0 + 1e-12);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FlowTrace::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.rows.len(), t.rows.len());
        assert_eq!(back.steps, t.steps);
        assert!((back.rows[5].energy.total() - t.rows[5].energy.total()).abs() < 1e-15);
    }

    #[test]
    fn corrupted_energy_fails_monotonicity() {
        let (_, mut t) = run_flow(&mut Quadratic, 1.0, &FlowParams::new(0.1, 1e-6), |_, _, _| {}).unwrap();
        assert!(check_trace(&t).iter().all(|c| c.passed));
        t.rows[4].energy.bend += 1.0;
        let checks = check_trace(&t);
        assert!(!checks[0].passed);
        assert!(checks[0].detail.contains("step 4"));
    }

    #[test]
    fn malformed_csv_rejected() {
        let bad = format!("{CSV_HEADER}\n1,0.1,x,0,0,0,0,0,0,0,0,0\n");
        assert!(matches!(FlowTrace::read_csv(std::io::Cursor::new(bad)), Err(Error::Parse { line: 2, .. })));
    }
}
