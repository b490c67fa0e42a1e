//! Energy-consistent finite-difference semi-discretization of both boundary
//! variants.
//!
//! The stiffness matrix is assembled as a sum of `weight * l l^T` over linear
//! functionals `l` (difference quotients at grid points), so `q^T K q` is by
//! construction the trapezoid/midpoint quadrature of the elastic energy and
//! `K` is exactly symmetric.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::delay::Histories;
use crate::error::GridError;
use crate::linalg::SymBand;
use crate::model::{Channel, DelaySpec, GainConfig, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Damped system with delayed boundary feedback.
    StabilizedDelayed,
    /// Undamped system with dynamic boundary traces and controls.
    ControlledConservative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub dx: f64,
    pub length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self, GridError> {
        if n < 8 {
            return Err(GridError::TooCoarse(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(GridError::BadLength(length));
        }
        Ok(Self {
            n,
            dx: length / n as f64,
            length,
        })
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n {
            self.length
        } else {
            j as f64 * self.dx
        }
    }

    /// Trapezoid weight of node `j` (without `dx`).
    pub fn trap(&self, j: usize) -> f64 {
        if j == 0 || j == self.n {
            0.5
        } else {
            1.0
        }
    }
}

/// Index of every free nodal unknown, interleaved node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    pub variant: Variant,
    pub n: usize,
    index: [Vec<Option<usize>>; 3],
    pub ndof: usize,
}

impl DofLayout {
    pub fn new(variant: Variant, n: usize) -> Self {
        let mut index = [vec![None; n + 1], vec![None; n + 1], vec![None; n + 1]];
        let mut next = 0;
        for j in 0..=n {
            for ch in Channel::ALL {
                let free = match (ch, variant) {
                    (Channel::U | Channel::V, _) => j > 0,
                    (Channel::W, Variant::StabilizedDelayed) => j > 0 && j < n,
                    (Channel::W, Variant::ControlledConservative) => true,
                };
                if free {
                    index[ch.index()][j] = Some(next);
                    next += 1;
                }
            }
        }
        Self {
            variant,
            n,
            index,
            ndof: next,
        }
    }

    pub fn dof(&self, field: Channel, j: usize) -> Option<usize> {
        self.index[field.index()][j]
    }

    /// Trace unknowns `Psi_4..Psi_6` of the controlled variant (boundary nodes).
    pub fn trace_dofs(&self) -> Option<[usize; 3]> {
        match self.variant {
            Variant::ControlledConservative => Some(Channel::ALL.map(|c| self.dof(c, self.n).unwrap())),
            Variant::StabilizedDelayed => None,
        }
    }

    pub fn field_dofs(&self, field: Channel) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.index[field.index()]
            .iter()
            .enumerate()
            .filter_map(|(j, d)| d.map(|d| (j, d)))
    }
}

/// Sparse linear functional on the DOF vector.
pub type Functional = Vec<(usize, f64)>;

fn functional(layout: &DofLayout, terms: &[(Channel, usize, f64)]) -> Functional {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for &(f, j, c) in terms {
        if let Some(d) = layout.dof(f, j) {
            *m.entry(d).or_insert(0.0) += c;
        }
    }
    m.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

pub fn apply_functional(l: &Functional, x: &[f64]) -> f64 {
    l.iter().map(|&(i, c)| c * x[i]).sum()
}

#[derive(Debug, Clone)]
pub struct SemiDiscreteSystem {
    pub grid: Grid1D,
    pub layout: DofLayout,
    pub params: PhysicalParams,
    /// Lumped diagonal mass.
    pub mass: Vec<f64>,
    pub stiffness: SymBand,
    /// Quadrature weight of each DOF in the `L^2` norm of its own field.
    pub l2_weight: Vec<f64>,
    /// Field owning each DOF.
    pub field: Vec<Channel>,
    /// Velocity trace functionals `u_t(L)`, `v_t(L)`, `w_tx(L)` of the delayed variant.
    pub feedback: [Functional; 3],
    /// Trace DOFs `u(L)`, `v(L)`, `w(L)` of the controlled variant.
    pub trace: Option<[usize; 3]>,
}

fn d2w(layout: &DofLayout, g: &Grid1D, j: usize) -> Option<Functional> {
    let h2 = g.dx * g.dx;
    let n = g.n;
    let w = Channel::W;
    if j == 0 {
        // even reflection through w_x(0) = 0
        Some(functional(layout, &[(w, 1, 2.0 / h2), (w, 0, -2.0 / h2)]))
    } else if j < n {
        Some(functional(
            layout,
            &[(w, j - 1, 1.0 / h2), (w, j, -2.0 / h2), (w, j + 1, 1.0 / h2)],
        ))
    } else {
        None
    }
}

fn shear(layout: &DofLayout, g: &Grid1D, alpha: f64, j: usize) -> Functional {
    let (u, v, w) = (Channel::U, Channel::V, Channel::W);
    let mut t = vec![(u, j, -1.0), (v, j, 1.0)];
    let n = g.n;
    if j > 0 && j < n {
        let c = alpha / (2.0 * g.dx);
        t.push((w, j + 1, c));
        t.push((w, j - 1, -c));
    } else if j == n {
        let c = alpha / g.dx;
        t.push((w, n, c));
        t.push((w, n - 1, -c));
    }
    functional(layout, &t)
}

pub fn build_system(grid: Grid1D, params: &PhysicalParams, variant: Variant) -> Result<SemiDiscreteSystem, GridError> {
    if grid.n < 8 {
        return Err(GridError::TooCoarse(grid.n));
    }
    if (grid.length - params.L).abs() > 1e-12 * params.L {
        return Err(GridError::BadLength(grid.length));
    }
    let layout = DofLayout::new(variant, grid.n);
    let n = grid.n;
    let dx = grid.dx;
    let (u, v, w) = (Channel::U, Channel::V, Channel::W);

    let mut terms: Vec<(Functional, f64)> = Vec::new();
    for j in 0..n {
        for (f, c) in [(u, params.E1h1), (v, params.E3h3)] {
            let l = functional(&layout, &[(f, j + 1, 1.0 / dx), (f, j, -1.0 / dx)]);
            terms.push((l, c * dx));
        }
    }
    for j in 0..=n {
        if let Some(l) = d2w(&layout, &grid, j) {
            terms.push((l, params.EI * grid.trap(j) * dx));
        }
        terms.push((shear(&layout, &grid, params.alpha, j), params.k * grid.trap(j) * dx));
    }
    let bw = terms
        .iter()
        .filter(|(l, _)| !l.is_empty())
        .map(|(l, _)| l.last().unwrap().0 - l[0].0)
        .max()
        .unwrap_or(0);
    let mut stiffness = SymBand::zeros(layout.ndof, bw);
    for (l, wgt) in &terms {
        stiffness.add_outer(l, *wgt);
    }

    let mut mass = vec![0.0; layout.ndof];
    let mut l2_weight = vec![0.0; layout.ndof];
    let mut field = vec![u; layout.ndof];
    for ch in Channel::ALL {
        for (j, d) in layout.field_dofs(ch) {
            l2_weight[d] = grid.trap(j) * dx;
            mass[d] = params.field_mass(ch) * l2_weight[d];
            field[d] = ch;
        }
    }
    let trace = layout.trace_dofs();
    if let Some(tr) = trace {
        for (k, wgt) in params.trace_weights().iter().enumerate() {
            mass[tr[k]] += wgt;
        }
    }
    let feedback = [
        functional(&layout, &[(u, n, 1.0)]),
        functional(&layout, &[(v, n, 1.0)]),
        functional(&layout, &[(w, n, 1.0 / dx), (w, n - 1, -1.0 / dx)]),
    ];
    Ok(SemiDiscreteSystem {
        grid,
        layout,
        params: params.clone(),
        mass,
        stiffness,
        l2_weight,
        field,
        feedback,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl DiscreteState {
    pub fn zeros(ndof: usize) -> Self {
        Self {
            q: vec![0.0; ndof],
            p: vec![0.0; ndof],
            t: 0.0,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            q: self.q.iter().map(|x| s * x).collect(),
            p: self.p.iter().map(|x| s * x).collect(),
            t: self.t,
        }
    }
}

impl SemiDiscreteSystem {
    pub fn ndof(&self) -> usize {
        self.layout.ndof
    }

    pub fn variant(&self) -> Variant {
        self.layout.variant
    }

    pub fn check_state(&self, s: &DiscreteState) -> Result<(), GridError> {
        for len in [s.q.len(), s.p.len()] {
            if len != self.ndof() {
                return Err(GridError::DimensionMismatch {
                    expected: self.ndof(),
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// `p^T M p + q^T K q`.
    pub fn norm_sq(&self, s: &DiscreteState) -> f64 {
        let kin: f64 = s.p.iter().zip(&self.mass).map(|(p, m)| m * p * p).sum();
        kin + self.stiffness.quad_form(&s.q)
    }

    pub fn mechanical_energy(&self, s: &DiscreteState) -> f64 {
        0.5 * self.norm_sq(s)
    }

    /// Squared `L^2` norm of one field of `x`.
    pub fn field_l2_sq(&self, x: &[f64], ch: Channel) -> f64 {
        self.layout
            .field_dofs(ch)
            .map(|(_, d)| self.l2_weight[d] * x[d] * x[d])
            .sum()
    }

    /// Samples smooth fields at the free nodes.
    pub fn interpolate(&self, f: [&dyn Fn(f64) -> f64; 3]) -> Vec<f64> {
        let mut x = vec![0.0; self.ndof()];
        for ch in Channel::ALL {
            for (j, d) in self.layout.field_dofs(ch) {
                x[d] = f[ch.index()](self.grid.x(j));
            }
        }
        x
    }

    /// Nodal values of one field, zeros at eliminated nodes.
    pub fn nodal(&self, x: &[f64], ch: Channel) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n + 1];
        for (j, d) in self.layout.field_dofs(ch) {
            out[j] = x[d];
        }
        out
    }

    pub fn mass_matrix_market(&self) -> String {
        let mut m = SymBand::zeros(self.ndof(), 0);
        m.add_diag(&self.mass, 1.0);
        m.to_matrix_market()
    }

    pub fn stiffness_matrix_market(&self) -> String {
        self.stiffness.to_matrix_market()
    }
}

/// Discrete energy; for the delayed variant this adds the exact delay
/// integrals of the stored trace interpolants.
pub fn discrete_energy(
    state: &DiscreteState,
    sys: &SemiDiscreteSystem,
    history: Option<&Histories>,
    delays: &DelaySpec,
    gains: &GainConfig,
) -> Result<f64, crate::error::SimError> {
    sys.check_state(state)?;
    let mut e = sys.mechanical_energy(state);
    if sys.variant() == Variant::StabilizedDelayed && gains.has_delay_feedback() {
        let h = history.ok_or(GridError::MissingHistory)?;
        for ch in Channel::ALL {
            e += h[ch.index()].delay_energy(state.t, delays.get(ch), gains.beta(ch))?;
        }
    }
    Ok(e)
}

pub fn hspace_norm(state: &DiscreteState, sys: &SemiDiscreteSystem) -> f64 {
    sys.norm_sq(state).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(n: usize, variant: Variant) -> SemiDiscreteSystem {
        let p = PhysicalParams::unit();
        build_system(Grid1D::new(n, 1.0).unwrap(), &p, variant).unwrap()
    }

    #[test]
    fn layout_counts() {
        assert_eq!(DofLayout::new(Variant::StabilizedDelayed, 16).ndof, 3 * 16 - 1);
        assert_eq!(DofLayout::new(Variant::ControlledConservative, 16).ndof, 3 * 16 + 1);
        assert!(Grid1D::new(7, 1.0).is_err());
    }

    #[test]
    fn stiffness_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for variant in [Variant::StabilizedDelayed, Variant::ControlledConservative] {
            let s = sys(20, variant);
            let dense = s.stiffness.to_dense();
            for i in 0..s.ndof() {
                for j in 0..s.ndof() {
                    assert_eq!(dense[i][j], dense[j][i]);
                }
            }
            for _ in 0..100 {
                let q: Vec<f64> = (0..s.ndof()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nq: f64 = q.iter().map(|x| x * x).sum();
                assert!(s.stiffness.quad_form(&q) >= -1e-12 * nq);
            }
        }
    }

    #[test]
    fn delayed_variant_stiffness_is_definite() {
        assert!(sys(16, Variant::StabilizedDelayed).stiffness.cholesky().is_ok());
    }

    #[test]
    fn controlled_variant_has_rigid_kernel() {
        let s = sys(16, Variant::ControlledConservative);
        let q = s.interpolate([&|_| 0.0, &|_| 0.0, &|_| 1.0]);
        assert!(s.stiffness.quad_form(&q).abs() < 1e-20);
    }

    #[test]
    fn linear_u_profile_energy() {
        // E1h1 |u_x|^2 = 1 and k |u|^2 = 1/3
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64] {
            let s = sys(n, Variant::ControlledConservative);
            let q = s.interpolate([&|x| x, &|_| 0.0, &|_| 0.0]);
            let err = (s.stiffness.quad_form(&q) - 4.0 / 3.0).abs();
            assert!(err < 1.0 / (n * n) as f64);
            assert!(err < prev / 3.5);
            prev = err;
        }
    }

    #[test]
    fn trace_perturbation_weight() {
        let s = sys(16, Variant::ControlledConservative);
        let tr = s.trace.unwrap();
        let mut st = DiscreteState::zeros(s.ndof());
        st.p[tr[0]] = 0.3;
        let n2 = hspace_norm(&st, &s).powi(2);
        assert!((n2 - (1.0 + s.grid.dx / 2.0) * 0.09).abs() < 1e-15);
    }

    #[test]
    fn zero_state_zero_energy() {
        let s = sys(16, Variant::ControlledConservative);
        let st = DiscreteState::zeros(s.ndof());
        assert_eq!(hspace_norm(&st, &s), 0.0);
        let g = GainConfig {
            alpha: [1.0; 3],
            beta: [0.0; 3],
        };
        let d = DelaySpec::uniform(crate::model::ChannelDelay::constant(1.0));
        assert_eq!(discrete_energy(&st, &s, None, &d, &g).unwrap(), 0.0);
    }

    #[test]
    fn missing_history_is_an_error() {
        let s = sys(16, Variant::StabilizedDelayed);
        let st = DiscreteState::zeros(s.ndof());
        let g = GainConfig {
            alpha: [1.0; 3],
            beta: [0.5; 3],
        };
        let d = DelaySpec::uniform(crate::model::ChannelDelay::constant(1.0));
        assert!(discrete_energy(&st, &s, None, &d, &g).is_err());
    }
}
