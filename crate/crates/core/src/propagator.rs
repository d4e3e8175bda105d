//! The hierarchy right-hand side and fixed-step RK4 integration.
//!
//! Each hierarchy member ψ_j is stored as one block of 2G reals: the G real
//! parts followed by the G imaginary parts. With ħ = 1 the equations are
//!
//! ψ̇_j = −iH_Sψ_j + Σ_k j_k C̄_kk ψ_j + Σ_{k≠k'} √(j_k(j_k'+1)) C̄_kk' ψ_{j−e_k+e_k'}
//!        − i h Σ_k √j_k v_k(0) ψ_{j−e_k} − i h Σ_k √(j_k+1) c̄_k ψ_{j+e_k},
//!
//! with members above N_max dropped.

use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::BathCoefficients;
use crate::error::{invalid, HeomError, Result};
use crate::hierarchy::{IndexSpace, ABSENT};
use crate::observables::{member_weights, observe, Trajectory};
use crate::system::SystemHamiltonian;

/// Entries of C̄ below this magnitude are skipped.
const NEGLIGIBLE: f64 = 1e-300;

/// RK4 is stable on the imaginary axis up to |zΔt| = 2√2.
const RK4_IMAGINARY_LIMIT: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone)]
pub struct HierarchyState {
    grid_len: usize,
    states: usize,
    /// Time in eV⁻¹.
    pub t: f64,
    data: Vec<f64>,
}

impl HierarchyState {
    pub fn zeros(states: usize, grid_len: usize) -> Self {
        Self {
            grid_len,
            states,
            t: 0.0,
            data: vec![0.0; states * 2 * grid_len],
        }
    }

    /// ψ_0 = φ, every other member zero.
    pub fn initial(space: &IndexSpace, phi: &[Complex64]) -> Self {
        let mut s = Self::zeros(space.total(), phi.len());
        s.set_member(0, phi);
        s
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// (Re ψ_s, Im ψ_s).
    pub fn member_parts(&self, s: usize) -> (&[f64], &[f64]) {
        let g = self.grid_len;
        let block = &self.data[2 * g * s..2 * g * (s + 1)];
        block.split_at(g)
    }

    pub fn member(&self, s: usize) -> Vec<Complex64> {
        let (re, im) = self.member_parts(s);
        re.iter()
            .zip(im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }

    pub fn set_member(&mut self, s: usize, psi: &[Complex64]) {
        let g = self.grid_len;
        let block = &mut self.data[2 * g * s..2 * g * (s + 1)];
        for (i, z) in psi.iter().enumerate() {
            block[i] = z.re;
            block[g + i] = z.im;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Coefficients of A = iψ̇-operator without H_S: i C̄ for the phonon terms,
/// v(0) for lowering and c̄ for raising.
#[derive(Debug, Clone)]
struct Couplings<T> {
    /// i C̄, row-major.
    moves: Vec<T>,
    lowering: Vec<T>,
    raising: Vec<T>,
}

/// Coefficient arithmetic on one member block of 2G reals in split layout.
trait Coefficient: Copy + Send + Sync + std::fmt::Debug {
    fn negligible(self) -> bool;
    fn scaled(self, w: f64) -> Self;
    /// y += c·x.
    fn axpy(self, x: &[f64], y: &mut [f64]);
    /// phi_a = Σ_b c_ab x_b over K blocks.
    fn rows_product(c: &[Self], x: &[f64], phi: &mut [f64], k: usize, g: usize);
}

impl Coefficient for f64 {
    fn negligible(self) -> bool {
        self.abs() < NEGLIGIBLE
    }

    fn scaled(self, w: f64) -> Self {
        self * w
    }

    #[inline(always)]
    fn axpy(self, x: &[f64], y: &mut [f64]) {
        let x = &x[..y.len()];
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self * xi;
        }
    }

    fn rows_product(c: &[Self], x: &[f64], phi: &mut [f64], k: usize, g: usize) {
        real_rows_product(c, x, phi, k, 2 * g);
    }
}

impl Coefficient for Complex64 {
    fn negligible(self) -> bool {
        self.re.abs() + self.im.abs() < NEGLIGIBLE
    }

    fn scaled(self, w: f64) -> Self {
        self * w
    }

    #[inline(always)]
    fn axpy(self, x: &[f64], y: &mut [f64]) {
        let g = y.len() / 2;
        let (xr, xi) = x.split_at(g);
        let (yr, yi) = y.split_at_mut(g);
        let (xi, yi) = (&xi[..g], &mut yi[..g]);
        for i in 0..g {
            yr[i] += self.re * xr[i] - self.im * xi[i];
            yi[i] += self.re * xi[i] + self.im * xr[i];
        }
    }

    fn rows_product(c: &[Self], x: &[f64], phi: &mut [f64], k: usize, g: usize) {
        for a in 0..k {
            let row = &mut phi[a * 2 * g..(a + 1) * 2 * g];
            row.iter_mut().for_each(|v| *v = 0.0);
            for b in 0..k {
                c[a * k + b].axpy(&x[b * 2 * g..(b + 1) * 2 * g], row);
            }
        }
    }
}

const LANES: usize = 4;

/// phi_a = Σ_b c_ab x_b for K real rows of length m.
fn real_rows_product(c: &[f64], x: &[f64], phi: &mut [f64], k: usize, m: usize) {
    let mut a0 = 0;
    while a0 < k {
        a0 += match k - a0 {
            1 => real_rows_block::<1>(c, x, phi, k, m, a0),
            2 | 3 => real_rows_block::<2>(c, x, phi, k, m, a0),
            _ => real_rows_block::<4>(c, x, phi, k, m, a0),
        };
    }
}

/// Rows a0..a0+R. Blocks of R outputs × LANES points stay in registers so
/// each loaded x value is reused R times.
#[inline(always)]
fn real_rows_block<const R: usize>(
    c: &[f64],
    x: &[f64],
    phi: &mut [f64],
    k: usize,
    m: usize,
    a0: usize,
) -> usize {
    let mut i = 0;
    while i + LANES <= m {
        let mut acc = [[0.0f64; LANES]; R];
        for b in 0..k {
            let xb: [f64; LANES] = x[b * m + i..b * m + i + LANES].try_into().unwrap();
            for r in 0..R {
                let cab = c[(a0 + r) * k + b];
                for l in 0..LANES {
                    acc[r][l] += cab * xb[l];
                }
            }
        }
        for r in 0..R {
            let base = (a0 + r) * m + i;
            phi[base..base + LANES].copy_from_slice(&acc[r]);
        }
        i += LANES;
    }
    for l in i..m {
        for r in 0..R {
            phi[(a0 + r) * m + l] = (0..k).map(|b| c[(a0 + r) * k + b] * x[b * m + l]).sum();
        }
    }
    R
}

#[derive(Debug, Clone)]
enum Arithmetic {
    /// Every coupling of A is real, so A acts on real and imaginary parts
    /// separately.
    Real(Couplings<f64>),
    Complex(Couplings<Complex64>),
}

/// The linear map ψ ↦ ψ̇ for a fixed hierarchy, bath and system.
///
/// Internally ψ̇ = −iAψ with A = H_S + iΣ C̄ terms + h(v(0), c̄) terms. When
/// all couplings of A are real (the Bessel basis in its natural phase
/// convention, or a discrete basis) the real kernel halves the work.
#[derive(Debug)]
pub struct HeomOperator<'a> {
    space: &'a IndexSpace,
    system: &'a SystemHamiltonian,
    arithmetic: Arithmetic,
    sqrt_int: Vec<f64>,
    /// Φ rows for the members below the top level.
    phi: Mutex<Vec<f64>>,
}

impl<'a> HeomOperator<'a> {
    pub fn new(
        space: &'a IndexSpace,
        coeffs: &BathCoefficients,
        system: &'a SystemHamiltonian,
    ) -> Result<Self> {
        let k = space.k();
        if coeffs.size() != k {
            return Err(HeomError::DimensionMismatch(format!(
                "bath has {} functions but the hierarchy has K = {k}",
                coeffs.size()
            )));
        }
        let i = Complex64::new(0.0, 1.0);
        let couplings = Couplings {
            moves: coeffs.c_bar.iter().map(|c| i * c).collect::<Vec<_>>(),
            lowering: coeffs.v0.clone(),
            raising: coeffs.c_bar_k.clone(),
        };
        let all_real = couplings
            .moves
            .iter()
            .chain(&couplings.lowering)
            .chain(&couplings.raising)
            .all(|z| z.im == 0.0);
        let arithmetic = if all_real {
            let re = |v: &[Complex64]| v.iter().map(|z| z.re).collect::<Vec<f64>>();
            Arithmetic::Real(Couplings {
                moves: re(&couplings.moves),
                lowering: re(&couplings.lowering),
                raising: re(&couplings.raising),
            })
        } else {
            Arithmetic::Complex(couplings)
        };
        Ok(Self {
            space,
            system,
            arithmetic,
            sqrt_int: (0..=space.n_max() + 1).map(|n| (n as f64).sqrt()).collect(),
            phi: Mutex::new(Vec::new()),
        })
    }

    pub fn space(&self) -> &IndexSpace {
        self.space
    }

    pub fn system(&self) -> &SystemHamiltonian {
        self.system
    }

    #[cfg(test)]
    fn force_complex(&mut self) {
        if let Arithmetic::Real(c) = &self.arithmetic {
            let z = |v: &[f64]| {
                v.iter()
                    .map(|&x| Complex64::new(x, 0.0))
                    .collect::<Vec<_>>()
            };
            self.arithmetic = Arithmetic::Complex(Couplings {
                moves: z(&c.moves),
                lowering: z(&c.lowering),
                raising: z(&c.raising),
            });
        }
    }

    /// True when the real-coefficient kernel is in use.
    pub fn uses_real_kernel(&self) -> bool {
        matches!(self.arithmetic, Arithmetic::Real(_))
    }

    /// Upper bound on |ψ̇|/|ψ| used for the step-size check.
    pub fn rate_bound(&self) -> f64 {
        let c_max = match &self.arithmetic {
            Arithmetic::Real(c) => c.moves.iter().map(|z| z.abs()).fold(0.0, f64::max),
            Arithmetic::Complex(c) => c.moves.iter().map(|z| z.norm()).fold(0.0, f64::max),
        };
        c_max * self.space.n_max() as f64 + self.system.spectral_bound()
    }

    /// out = ψ̇ for the state stored in `y`.
    ///
    /// The C̄ terms are evaluated in two passes. For every member d below the
    /// top level, Φ_{d,a} = Σ_b iC̄_ab √(d_b+1) ψ_{d+e_b} is formed from the
    /// gathered raised neighbours; member j then collects Σ_a √j_a Φ_{j−e_a,a},
    /// which covers both the diagonal and the phonon-moving terms.
    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        match &self.arithmetic {
            Arithmetic::Real(c) => self.apply_with(c, y, out),
            Arithmetic::Complex(c) => self.apply_with(c, y, out),
        }
    }

    fn apply_with<T: Coefficient>(&self, c: &Couplings<T>, y: &[f64], out: &mut [f64]) {
        let g = self.system.grid().len();
        let k = self.space.k();
        let total = self.space.total();
        assert_eq!(y.len(), total * 2 * g);
        assert_eq!(out.len(), y.len());
        let below_top = self.space.level(self.space.n_max()).start;
        let mut phi = self.phi.lock().unwrap_or_else(|e| e.into_inner());
        phi.resize(below_top * k * 2 * g, 0.0);

        // pass 1: Φ, and h Σ_k c̄_k √(j_k+1) ψ_{j+e_k} into out
        let (out_low, out_top) = out.split_at_mut(below_top * 2 * g);
        out_low
            .par_chunks_mut(2 * g)
            .zip(phi.par_chunks_mut(k * 2 * g))
            .enumerate()
            .for_each_init(
                || vec![0.0; (k + 1) * 2 * g],
                |scratch, (d, (out_d, phi_d))| self.raise_pass(c, d, y, out_d, phi_d, scratch),
            );
        out_top.iter_mut().for_each(|x| *x = 0.0);

        // pass 2: H_S, Φ collection and lowering couplings, then ψ̇ = −iAψ
        let phi = &*phi;
        out.par_chunks_mut(2 * g).enumerate().for_each_init(
            || vec![0.0; 2 * g],
            |scratch, (s, block)| self.member_pass(c, s, y, phi, block, scratch),
        );
    }

    fn raise_pass<T: Coefficient>(
        &self,
        c: &Couplings<T>,
        d: usize,
        y: &[f64],
        out: &mut [f64],
        phi: &mut [f64],
        scratch: &mut [f64],
    ) {
        let g = self.system.grid().len();
        let k = self.space.k();
        let occ = self.space.occupation(d);
        let raise = &self.space.raise_table()[d * k..(d + 1) * k];
        let (x, acc) = scratch.split_at_mut(k * 2 * g);
        for b in 0..k {
            let t = raise[b] as usize;
            let w = self.sqrt_int[occ[b] as usize + 1];
            for (dst, v) in x[b * 2 * g..(b + 1) * 2 * g]
                .iter_mut()
                .zip(&y[2 * g * t..2 * g * (t + 1)])
            {
                *dst = w * v;
            }
        }
        T::rows_product(&c.moves, x, phi, k, g);
        acc.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..k {
            if !c.raising[b].negligible() {
                c.raising[b].axpy(&x[b * 2 * g..(b + 1) * 2 * g], acc);
            }
        }
        let h = self.system.coupling();
        for i in 0..g {
            out[i] = h[i] * acc[i];
            out[g + i] = h[i] * acc[g + i];
        }
    }

    fn member_pass<T: Coefficient>(
        &self,
        c: &Couplings<T>,
        s: usize,
        y: &[f64],
        phi: &[f64],
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        let g = self.system.grid().len();
        let k = self.space.k();
        let j = self.space.occupation(s);
        let lower = &self.space.lower_table()[s * k..(s + 1) * k];
        let own = &y[2 * g * s..2 * g * (s + 1)];

        // H_S ψ_s
        {
            let (hr, hi) = scratch.split_at_mut(g);
            self.system.apply_real(&own[..g], hr);
            self.system.apply_real(&own[g..], hi);
            for (o, v) in out.iter_mut().zip(scratch.iter()) {
                *o += v;
            }
        }

        // Σ_a √j_a Φ_{j−e_a,a} and h Σ_a √j_a v_a(0) ψ_{j−e_a}
        scratch.iter_mut().for_each(|x| *x = 0.0);
        for a in 0..k {
            if lower[a] == ABSENT {
                continue;
            }
            let down = lower[a] as usize;
            let w = self.sqrt_int[j[a] as usize];
            let row = &phi[(down * k + a) * 2 * g..(down * k + a + 1) * 2 * g];
            w.axpy(row, out);
            let cv = c.lowering[a].scaled(w);
            if !cv.negligible() {
                cv.axpy(&y[2 * g * down..2 * g * (down + 1)], scratch);
            }
        }
        let h = self.system.coupling();
        for i in 0..g {
            out[i] += h[i] * scratch[i];
            out[g + i] += h[i] * scratch[g + i];
        }

        // ψ̇ = −i(a_re + i a_im) = a_im − i a_re
        let (re, im) = out.split_at_mut(g);
        for i in 0..g {
            let a_re = re[i];
            re[i] = im[i];
            im[i] = -a_re;
        }
    }
}

/// Work buffers for [`rk4_step`].
#[derive(Debug, Clone, Default)]
pub struct Rk4Scratch {
    acc: Vec<f64>,
    stage: Vec<f64>,
    slope: Vec<f64>,
}

/// One classical RK4 step of ẏ = f(y) for an autonomous f.
pub fn rk4_step<F>(y: &mut Vec<f64>, dt: f64, scratch: &mut Rk4Scratch, mut rhs: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let Rk4Scratch { acc, stage, slope } = scratch;
    for b in [&mut *acc, &mut *stage, &mut *slope] {
        b.resize(n, 0.0);
    }
    rhs(y, slope);
    for i in 0..n {
        acc[i] = y[i] + dt / 6.0 * slope[i];
        stage[i] = y[i] + 0.5 * dt * slope[i];
    }
    rhs(stage, slope);
    for i in 0..n {
        acc[i] += dt / 3.0 * slope[i];
        stage[i] = y[i] + 0.5 * dt * slope[i];
    }
    rhs(stage, slope);
    for i in 0..n {
        acc[i] += dt / 3.0 * slope[i];
        stage[i] = y[i] + dt * slope[i];
    }
    rhs(stage, slope);
    for i in 0..n {
        acc[i] += dt / 6.0 * slope[i];
    }
    std::mem::swap(y, acc);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    /// Δt in eV⁻¹.
    pub dt: f64,
    pub steps: usize,
    /// Record every `stride` steps (the initial state is always recorded).
    pub stride: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            dt: 3.125e-3,
            steps: 800,
            stride: 32,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("Δt must be > 0, got {}", self.dt)));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "output stride must be ≥ 1"));
        }
        Ok(())
    }

    /// Δt times the operator's rate bound; RK4 needs this below 2√2.
    pub fn stability_margin(&self, op: &HeomOperator) -> f64 {
        self.dt * op.rate_bound() / RK4_IMAGINARY_LIMIT
    }
}

/// Advances `state` by `config.steps` steps, calling `observe` on the
/// initial state and after every `config.stride` steps.
pub fn propagate_with<F>(
    config: &PropagationConfig,
    op: &HeomOperator,
    state: &mut HierarchyState,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &HierarchyState) -> Result<()>,
{
    config.validate()?;
    let margin = config.stability_margin(op);
    if margin > 1.0 {
        log::warn!(
            "Δt = {} exceeds the RK4 stability estimate by a factor {margin:.2}",
            config.dt
        );
    }
    let t0 = state.t;
    observe(0, state)?;
    let mut scratch = Rk4Scratch::default();
    for step in 1..=config.steps {
        rk4_step(&mut state.data, config.dt, &mut scratch, |y, out| {
            op.apply(y, out)
        });
        state.t = t0 + step as f64 * config.dt;
        if !state.is_finite() {
            return Err(HeomError::NonFinite {
                step,
                time: state.t,
            });
        }
        if step % config.stride == 0 {
            observe(step, state)?;
        }
    }
    Ok(())
}

/// Runs the hierarchy from ψ_0 = φ and records observables at the output stride.
pub fn propagate(
    config: &PropagationConfig,
    op: &HeomOperator,
    lambda: &[f64],
    phi: &[Complex64],
) -> Result<Trajectory> {
    let space = op.space();
    let grid = op.system().grid();
    if phi.len() != grid.len() {
        return Err(HeomError::DimensionMismatch(format!(
            "initial state has {} points, grid has {}",
            phi.len(),
            grid.len()
        )));
    }
    let weights = member_weights(space, lambda);
    let mut state = HierarchyState::initial(space, phi);
    let mut trajectory = Trajectory::default();
    propagate_with(config, op, &mut state, |_, s| {
        trajectory.points.push(observe(s, space, &weights, grid));
        Ok(())
    })?;
    Ok(trajectory)
}
