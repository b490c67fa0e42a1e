//! Null controls of the conservative system by conjugate gradient on the
//! observation Gramian.
//!
//! Terminal data `b = (phi_T, phi_t(T))` is pushed backward through the same
//! stepper used for forward runs, so the discrete pairing
//! `omega(phi, y) = phi^T M y_t - phi_t^T M y` satisfies
//! `omega_T - omega_0 = sum_n dt (mean phi trace)^T B (mean control)`
//! to round-off, `B` holding the trace weights.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HumError, SimError};
use crate::grid::{DiscreteState, SemiDiscreteSystem, Variant};
use crate::integrate::ConservativeIntegrator;
use crate::linalg::dot;
use crate::model::Channel;
use crate::presets::{initial_state, InitialPreset};

/// Terminal data of the adjoint problem at `t = T`.
pub type AdjointTerminalData = DiscreteState;

/// Stagnation is declared after this many iterations without a drop of the CG functional.
pub const STAGNATION_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Relative CG residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Accepted terminal-to-initial norm ratio.
    pub verify_tol: f64,
    /// Off-theory `eps |b|^2` shift of the Gramian, zero by default.
    pub tikhonov: f64,
    /// Full residual re-orthogonalization inside CG.
    pub reorthogonalize: bool,
}

impl HumConfig {
    /// Horizon `8 L / c_min` with the given step, rounded to a whole number of steps.
    pub fn standard(sys: &SemiDiscreteSystem, dt: f64) -> Self {
        let t = 8.0 * sys.params.L / sys.params.c_min();
        let n = (t / dt).ceil();
        Self {
            dt,
            t_final: n * dt,
            tol: 1e-8,
            max_iter: 200,
            verify_tol: 1e-3,
            tikhonov: 0.0,
            reorthogonalize: true,
        }
    }

    fn steps(&self) -> Result<usize, SimError> {
        crate::integrate::SchemeConfig::new(self.dt, self.t_final).steps()
    }
}

/// Displacement traces `chi(L)`, `eta(L)`, `theta(L)` on the step grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationTriple {
    pub dt: f64,
    pub weights: [f64; 3],
    pub values: Vec<[f64; 3]>,
}

impl ObservationTriple {
    /// Weighted `L^2(0, T)` product with step-mean values, matching the stepper.
    pub fn inner(&self, other: &[[f64; 3]]) -> f64 {
        let mut s = 0.0;
        for n in 0..self.values.len().saturating_sub(1) {
            for k in 0..3 {
                let a = 0.5 * (self.values[n][k] + self.values[n + 1][k]);
                let b = 0.5 * (other[n][k] + other[n + 1][k]);
                s += self.dt * self.weights[k] * a * b;
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(&self.values)
    }
}

/// HUM choice: the control is the observation itself.
pub fn controls_from_observation(obs: &ObservationTriple) -> Vec<[f64; 3]> {
    obs.values.clone()
}

pub struct AdjointSolve {
    pub observation: ObservationTriple,
    /// Adjoint state at `t = 0`.
    pub initial: DiscreteState,
    /// Mechanical energy at `t_n`, increasing `n`.
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual norms, starting with 1.
    pub residuals: Vec<f64>,
    /// Quadratic functional `1/2 <Ax, x> - <b, x>` after each iteration.
    pub functional: Vec<f64>,
    /// Extremes of `<Ap, p> / <p, p>` over search directions.
    pub min_rayleigh: f64,
    pub max_rayleigh: f64,
}

/// Conjugate gradient for `A x = b` with `A` symmetric in `inner`.
pub fn cg_solve<A, I>(apply: A, b: &[f64], tol: f64, max_iter: usize, inner: I) -> Result<CgResult, HumError>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>, HumError>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    cg_solve_with(apply, b, tol, max_iter, inner, false)
}

/// As [`cg_solve`], optionally re-orthogonalizing each residual against the
/// earlier ones. Exact-arithmetic iterates are unchanged; in floating point
/// this keeps the short recurrence from losing conjugacy on stiff spectra.
pub fn cg_solve_with<A, I>(
    mut apply: A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    inner: I,
    reorthogonalize: bool,
) -> Result<CgResult, HumError>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>, HumError>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = inner(b, b).sqrt();
    let mut res = CgResult {
        x: x.clone(),
        iterations: 0,
        converged: true,
        residuals: vec![1.0],
        functional: vec![0.0],
        min_rayleigh: f64::INFINITY,
        max_rayleigh: 0.0,
    };
    if b_norm == 0.0 {
        return Ok(res);
    }
    if !b_norm.is_finite() {
        return Err(HumError::NonFinite { iteration: 0 });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = inner(&r, &r);
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut j = 0.0;
    let mut best = 0.0;
    let mut since_best = 0;
    res.converged = false;
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = inner(&p, &ap);
        let pp = inner(&p, &p);
        if !pap.is_finite() {
            return Err(HumError::NonFinite { iteration: it });
        }
        res.iterations = it;
        if pap <= 0.0 {
            // direction in the null space: nothing more to gain
            res.min_rayleigh = res.min_rayleigh.min(pap / pp);
            break;
        }
        res.min_rayleigh = res.min_rayleigh.min(pap / pp);
        res.max_rayleigh = res.max_rayleigh.max(pap / pp);
        let a = rr / pap;
        if reorthogonalize {
            kept.push((r.clone(), rr));
        }
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        j -= 0.5 * rr * rr / pap;
        if reorthogonalize {
            for (q, qq) in &kept {
                let c = inner(&r, q) / qq;
                for i in 0..n {
                    r[i] -= c * q[i];
                }
            }
        }
        let rr_new = inner(&r, &r);
        if !rr_new.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(HumError::NonFinite { iteration: it });
        }
        let rel = rr_new.sqrt() / b_norm;
        res.residuals.push(rel);
        res.functional.push(j);
        if rel <= tol {
            res.converged = true;
            break;
        }
        // the residual of CG is not monotone; the functional is
        if j < best * (1.0 + 1e-12) - 1e-300 {
            best = j;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STAGNATION_WINDOW {
                return Err(HumError::Stagnation {
                    iteration: it,
                    residual: rel,
                });
            }
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    res.x = x;
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumSolution {
    pub dt: f64,
    pub t_final: f64,
    /// `(f1, f2, f3)` at `t_n`.
    pub controls: Vec<[f64; 3]>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub functional: Vec<f64>,
    /// `|U(T)| / |U0|` after the verification solve.
    pub terminal_ratio: f64,
    /// `<Lambda e, e>`.
    pub cost: f64,
    pub min_rayleigh: f64,
    pub max_rayleigh: f64,
    pub terminal_data: AdjointTerminalData,
}

impl HumSolution {
    pub fn controls_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,f1,f2,f3\n");
        for (n, f) in self.controls.iter().enumerate() {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", n as f64 * self.dt, f[0], f[1], f[2]);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityEstimate {
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub samples: usize,
}

/// Gramian machinery for one system and horizon.
pub struct HumProblem<'a> {
    pub sys: &'a SemiDiscreteSystem,
    pub cfg: HumConfig,
    integ: ConservativeIntegrator<'a>,
    nsteps: usize,
    trace: [usize; 3],
    weights: [f64; 3],
    /// Stiffness plus a rank-one lift of the rigid `w` motion.
    k_lift: DMatrix<f64>,
    k_chol: Cholesky<f64, Dyn>,
}

impl<'a> HumProblem<'a> {
    pub fn new(sys: &'a SemiDiscreteSystem, cfg: HumConfig) -> Result<Self, HumError> {
        if sys.variant() != Variant::ControlledConservative {
            return Err(HumError::WrongVariant);
        }
        let nsteps = cfg.steps()?;
        let integ = ConservativeIntegrator::new(sys, cfg.dt)?;
        let n = sys.ndof();
        let dense = sys.stiffness.to_dense();
        let mut k_lift = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        // rigid w motion costs kappa * m_r, kappa = EI / L^3
        let mr: Vec<f64> = (0..n)
            .map(|i| if sys.field[i] == Channel::W { sys.mass[i] } else { 0.0 })
            .collect();
        let m_total: f64 = mr.iter().sum();
        let kappa = sys.params.EI / sys.params.L.powi(3);
        k_lift += DMatrix::from_fn(n, n, |i, j| kappa / m_total * mr[i] * mr[j]);
        let k_chol = Cholesky::new(k_lift.clone()).ok_or(HumError::Grid(crate::error::GridError::NotPositiveDefinite {
            row: 0,
            pivot: 0.0,
        }))?;
        let trace = integ.trace_dofs();
        Ok(Self {
            sys,
            weights: sys.params.trace_weights(),
            cfg,
            integ,
            nsteps,
            trace,
            k_lift,
            k_chol,
        })
    }

    pub fn nsteps(&self) -> usize {
        self.nsteps
    }

    fn ndof(&self) -> usize {
        self.sys.ndof()
    }

    /// `q^T K~ q' + p^T M p'`.
    pub fn inner(&self, a: &DiscreteState, b: &DiscreteState) -> f64 {
        self.inner_flat(&to_flat(a), &to_flat(b))
    }

    pub fn norm(&self, a: &DiscreteState) -> f64 {
        self.inner(a, a).sqrt()
    }

    fn inner_flat(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.ndof();
        let kb = &self.k_lift * nalgebra::DVector::from_column_slice(&b[..n]);
        let mut s = dot(&a[..n], kb.as_slice());
        for i in 0..n {
            s += a[n + i] * self.sys.mass[i] * b[n + i];
        }
        s
    }

    /// `phi^T M y_t - phi_t^T M y`.
    pub fn omega(&self, phi: &DiscreteState, y: &DiscreteState) -> f64 {
        (0..self.ndof())
            .map(|i| self.sys.mass[i] * (phi.q[i] * y.p[i] - phi.p[i] * y.q[i]))
            .sum()
    }

    /// Backward solve from `T` with no control.
    pub fn solve_adjoint(&self, wt: &AdjointTerminalData) -> Result<AdjointSolve, HumError> {
        self.sys.check_state(wt)?;
        let mut values = vec![[0.0; 3]; self.nsteps + 1];
        let mut energy = vec![0.0; self.nsteps + 1];
        let mut s = wt.clone();
        s.t = self.cfg.t_final;
        values[self.nsteps] = self.trace.map(|i| s.q[i]);
        energy[self.nsteps] = self.sys.mechanical_energy(&s);
        for n in (0..self.nsteps).rev() {
            s = self.integ.step_signed(&s, true, [0.0; 3]);
            s.t = n as f64 * self.cfg.dt;
            if s.q.iter().chain(&s.p).any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite { step: n }.into());
            }
            values[n] = self.trace.map(|i| s.q[i]);
            energy[n] = self.sys.mechanical_energy(&s);
        }
        Ok(AdjointSolve {
            observation: ObservationTriple {
                dt: self.cfg.dt,
                weights: self.weights,
                values,
            },
            initial: s,
            energy,
        })
    }

    /// Terminal state of the controlled forward run from `u0`.
    pub fn forward(&self, u0: &DiscreteState, controls: &[[f64; 3]]) -> Result<DiscreteState, HumError> {
        self.sys.check_state(u0)?;
        if controls.len() != self.nsteps + 1 {
            return Err(SimError::Config(format!(
                "control grid has {} nodes, expected {}",
                controls.len(),
                self.nsteps + 1
            ))
            .into());
        }
        let mut s = u0.clone();
        s.t = 0.0;
        for n in 0..self.nsteps {
            s = self.integ.step(&s, controls[n], controls[n + 1]);
            s.t = (n + 1) as f64 * self.cfg.dt;
        }
        if s.q.iter().chain(&s.p).any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { step: self.nsteps }.into());
        }
        Ok(s)
    }

    /// Riesz representative in the product of the pairing `b -> omega(b, y)`.
    fn represent(&self, y: &DiscreteState) -> DiscreteState {
        let n = self.ndof();
        let my: Vec<f64> = (0..n).map(|i| self.sys.mass[i] * y.p[i]).collect();
        let q = self.k_chol.solve(&nalgebra::DVector::from_vec(my));
        DiscreteState {
            q: q.as_slice().to_vec(),
            p: y.q.iter().map(|v| -v).collect(),
            t: self.cfg.t_final,
        }
    }

    /// `Lambda b`, symmetric in [`HumProblem::inner`].
    pub fn apply_gramian(&self, wt: &AdjointTerminalData) -> Result<AdjointTerminalData, HumError> {
        let adj = self.solve_adjoint(wt)?;
        let f = controls_from_observation(&adj.observation);
        let y = self.forward(&DiscreteState::zeros(self.ndof()), &f)?;
        let mut out = self.represent(&y);
        if self.cfg.tikhonov > 0.0 {
            for i in 0..self.ndof() {
                out.q[i] += self.cfg.tikhonov * wt.q[i];
                out.p[i] += self.cfg.tikhonov * wt.p[i];
            }
        }
        Ok(out)
    }

    /// Minus the representative of the free terminal state.
    pub fn rhs_from_initial_data(&self, u0: &DiscreteState) -> Result<AdjointTerminalData, HumError> {
        let y = self.forward(u0, &vec![[0.0; 3]; self.nsteps + 1])?;
        Ok(self.represent(&y).scaled(-1.0))
    }

    /// Both sides of the duality identity for a forward run from `u0` under
    /// `controls` and the adjoint run from `wt`.
    pub fn duality_sides(
        &self,
        u0: &DiscreteState,
        wt: &AdjointTerminalData,
        controls: &[[f64; 3]],
    ) -> Result<(f64, f64), HumError> {
        let adj = self.solve_adjoint(wt)?;
        let y_t = self.forward(u0, controls)?;
        let lhs = self.omega(wt, &y_t) - self.omega(&adj.initial, u0);
        Ok((lhs, adj.observation.inner(controls)))
    }

    pub fn compute_null_control(&self, u0: &DiscreteState) -> Result<HumSolution, HumError> {
        self.sys.check_state(u0)?;
        let n = self.ndof();
        let zero_controls = vec![[0.0; 3]; self.nsteps + 1];
        let u0_norm = self.norm(u0);
        if u0_norm == 0.0 {
            return Ok(HumSolution {
                dt: self.cfg.dt,
                t_final: self.cfg.t_final,
                controls: zero_controls,
                iterations: 0,
                residuals: vec![],
                functional: vec![],
                terminal_ratio: 0.0,
                cost: 0.0,
                min_rayleigh: f64::NAN,
                max_rayleigh: f64::NAN,
                terminal_data: DiscreteState::zeros(n),
            });
        }
        let b = to_flat(&self.rhs_from_initial_data(u0)?);
        let cg = cg_solve_with(
            |x| Ok(to_flat(&self.apply_gramian(&from_flat(x, self.cfg.t_final))?)),
            &b,
            self.cfg.tol,
            self.cfg.max_iter,
            |a, b| self.inner_flat(a, b),
            self.cfg.reorthogonalize,
        )?;
        if !cg.converged {
            return Err(HumError::NotConverged {
                iterations: cg.iterations,
                residual: *cg.residuals.last().unwrap_or(&f64::NAN),
            });
        }
        let e = from_flat(&cg.x, self.cfg.t_final);
        let adj = self.solve_adjoint(&e)?;
        let cost = adj.observation.norm_sq();
        let controls = controls_from_observation(&adj.observation);
        let y_t = self.forward(u0, &controls)?;
        let ratio = self.norm(&y_t) / u0_norm;
        if !(ratio <= self.cfg.verify_tol) {
            return Err(HumError::Verification {
                achieved: ratio,
                tol: self.cfg.verify_tol,
            });
        }
        Ok(HumSolution {
            dt: self.cfg.dt,
            t_final: self.cfg.t_final,
            controls,
            iterations: cg.iterations,
            residuals: cg.residuals,
            functional: cg.functional,
            terminal_ratio: ratio,
            cost,
            min_rayleigh: cg.min_rayleigh,
            max_rayleigh: cg.max_rayleigh,
            terminal_data: e,
        })
    }

    /// Random smooth terminal data of unit norm.
    pub fn unit_sample(&self, seed: u64, cutoff: usize) -> AdjointTerminalData {
        let s = initial_state(self.sys, &InitialPreset::RandomSmooth { seed, cutoff });
        let nrm = self.norm(&s);
        s.scaled(1.0 / nrm)
    }

    /// `|observation|^2 / |b|^2`.
    pub fn observability_quotient(&self, wt: &AdjointTerminalData) -> Result<f64, HumError> {
        let adj = self.solve_adjoint(wt)?;
        Ok(adj.observation.norm_sq() / self.inner(wt, wt))
    }

    pub fn estimate_observability(&self, n_samples: usize, seed: u64) -> Result<ObservabilityEstimate, HumError> {
        if n_samples < 10 {
            return Err(SimError::Config(format!("need at least 10 samples, got {n_samples}")).into());
        }
        let q: Vec<f64> = (0..n_samples as u64)
            .into_par_iter()
            .map(|k| self.observability_quotient(&self.unit_sample(seed.wrapping_add(k), 6)))
            .collect::<Result<_, _>>()?;
        Ok(ObservabilityEstimate {
            min_quotient: q.iter().cloned().fold(f64::INFINITY, f64::min),
            max_quotient: q.iter().cloned().fold(0.0, f64::max),
            samples: n_samples,
        })
    }

    /// Arbitrary terminal data with independent Gaussian entries, for symmetry probes.
    pub fn rough_sample(&self, seed: u64) -> AdjointTerminalData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let n = self.ndof();
        DiscreteState {
            q: (0..n).map(|_| draw()).collect(),
            p: (0..n).map(|_| draw()).collect(),
            t: self.cfg.t_final,
        }
    }
}

fn to_flat(s: &DiscreteState) -> Vec<f64> {
    s.q.iter().chain(&s.p).copied().collect()
}

fn from_flat(x: &[f64], t: f64) -> DiscreteState {
    let n = x.len() / 2;
    DiscreteState {
        q: x[..n].to_vec(),
        p: x[n..].to_vec(),
        t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_system, Grid1D};
    use crate::model::PhysicalParams;

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b)
    }

    #[test]
    fn cg_identity_one_step() {
        let b = vec![1.0, -2.0, 3.0];
        let r = cg_solve(|x| Ok(x.to_vec()), &b, 1e-12, 10, euclid).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, b);
    }

    #[test]
    fn cg_diagonal_finishes_in_n() {
        let d = [1.0, 2.0, 5.0, 9.0, 30.0];
        let b = vec![1.0; 5];
        let r = cg_solve(
            |x| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()),
            &b,
            1e-12,
            5,
            euclid,
        )
        .unwrap();
        assert!(r.converged);
        for i in 0..5 {
            assert!((r.x[i] - 1.0 / d[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_matches_dense_solve() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let a: DMatrix<f64> = &g * g.transpose() + DMatrix::identity(n, n) * n as f64;
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let r = cg_solve(
            |x| Ok((&a * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()),
            &b,
            1e-13,
            200,
            euclid,
        )
        .unwrap();
        let exact = a.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((r.x[i] - exact[i]).abs() < 1e-8 * exact.amax());
        }
        for w in r.functional.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    fn problem_sys(n: usize) -> SemiDiscreteSystem {
        build_system(Grid1D::new(n, 1.0).unwrap(), &PhysicalParams::unit(), Variant::ControlledConservative).unwrap()
    }

    fn short_cfg() -> HumConfig {
        HumConfig {
            dt: 0.02,
            t_final: 1.0,
            tol: 1e-8,
            max_iter: 200,
            verify_tol: 1e-3,
            tikhonov: 0.0,
            reorthogonalize: true,
        }
    }

    #[test]
    fn zero_terminal_data() {
        let sys = problem_sys(16);
        let p = HumProblem::new(&sys, short_cfg()).unwrap();
        let adj = p.solve_adjoint(&DiscreteState::zeros(sys.ndof())).unwrap();
        assert!(adj.observation.values.iter().all(|v| *v == [0.0; 3]));
        let g = p.apply_gramian(&DiscreteState::zeros(sys.ndof())).unwrap();
        assert!(g.q.iter().chain(&g.p).all(|v| *v == 0.0));
    }

    #[test]
    fn round_trip_recovers_terminal_data() {
        let sys = problem_sys(16);
        let p = HumProblem::new(&sys, short_cfg()).unwrap();
        let wt = p.unit_sample(1, 4);
        let adj = p.solve_adjoint(&wt).unwrap();
        let back = p.forward(&adj.initial, &vec![[0.0; 3]; p.nsteps() + 1]).unwrap();
        let diff = DiscreteState {
            q: back.q.iter().zip(&wt.q).map(|(a, b)| a - b).collect(),
            p: back.p.iter().zip(&wt.p).map(|(a, b)| a - b).collect(),
            t: 0.0,
        };
        assert!(p.norm(&diff) < 1e-8);
        let e0 = adj.energy[0];
        assert!(adj.energy.iter().all(|e| (e - e0).abs() < 1e-8 * e0));
    }

    #[test]
    fn null_control_of_zero_is_zero() {
        let sys = problem_sys(16);
        let p = HumProblem::new(&sys, short_cfg()).unwrap();
        let s = p.compute_null_control(&DiscreteState::zeros(sys.ndof())).unwrap();
        assert_eq!(s.terminal_ratio, 0.0);
        assert!(s.controls.iter().all(|f| *f == [0.0; 3]));
    }

    #[test]
    fn wrong_variant_rejected() {
        let sys = build_system(Grid1D::new(16, 1.0).unwrap(), &PhysicalParams::unit(), Variant::StabilizedDelayed).unwrap();
        assert!(matches!(HumProblem::new(&sys, short_cfg()), Err(HumError::WrongVariant)));
    }
}
