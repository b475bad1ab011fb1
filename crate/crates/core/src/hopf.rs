//! Boundary-point lemma toolkit for degenerate elliptic operators
//! `L = aⁱʲ∂ᵢⱼ + bⁱ∂ᵢ + c`.
//!
//! A boundary patch is the graph `xₙ = f(x')` with the interior on the side
//! `xₙ > f`. Flattening uses `y = (x' − P', xₙ − f(x'))`, so the base point
//! maps to the origin `O` and the interior to `yₙ > 0`. The barrier is
//! `h(y) = −Σ yᵢ² + μ·yₙ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::gasdyn::GasModel;
use crate::grid::ScalarField;
use crate::nozzle::NozzleProfile;
use crate::symmetric::{acceleration_at, speed_at};

type MatFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type VecFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Degenerate elliptic operator with pointwise coefficient evaluators.
#[derive(Clone)]
pub struct DegenOperator {
    dim: usize,
    a: MatFn,
    b: VecFn,
    c: ScalarFn,
}

impl std::fmt::Debug for DegenOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DegenOperator").field("dim", &self.dim).finish()
    }
}

impl DegenOperator {
    pub fn new<A, B, C>(dim: usize, a: A, b: B, c: C) -> Result<Self>
    where
        A: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        B: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        C: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        if dim < 2 {
            return Err(FlowError::InvalidArgument(format!("dimension {dim} < 2")));
        }
        Ok(Self {
            dim,
            a: Arc::new(a),
            b: Arc::new(b),
            c: Arc::new(c),
        })
    }

    /// Constant coefficients with `c = 0`.
    pub fn constant(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let dim = b.len();
        if a.nrows() != dim || a.ncols() != dim {
            return Err(FlowError::InvalidArgument("a and b dimensions differ".into()));
        }
        Self::new(dim, move |_| a.clone(), move |_| b.clone(), |_| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.a)(x)
    }

    pub fn b_at(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.b)(x)
    }

    pub fn c_at(&self, x: &DVector<f64>) -> f64 {
        (self.c)(x)
    }

    /// The same operator in coordinates `z = A·(x − x0)`:
    /// `a' = A a Aᵀ`, `b' = A b`, `c' = c`.
    pub fn reoriented(&self, transform: DMatrix<f64>, x0: DVector<f64>) -> Result<Self> {
        if transform.nrows() != self.dim || transform.ncols() != self.dim || x0.len() != self.dim {
            return Err(FlowError::InvalidArgument("transform dimensions".into()));
        }
        let inv = transform
            .clone()
            .try_inverse()
            .ok_or_else(|| FlowError::InvalidArgument("transform is singular".into()))?;
        let back = Arc::new(move |z: &DVector<f64>| &x0 + &inv * z);
        let (a, b, c) = (self.a.clone(), self.b.clone(), self.c.clone());
        let (ta, tb) = (transform.clone(), transform);
        let (ba, bb, bc) = (back.clone(), back.clone(), back);
        Self::new(
            self.dim,
            move |z| &ta * a(&ba(z)) * ta.transpose(),
            move |z| &tb * b(&bb(z)),
            move |z| c(&bc(z)),
        )
    }

    /// Same operator after the shift `z = x + s`.
    pub fn translated(&self, shift: &DVector<f64>) -> Result<Self> {
        self.reoriented(DMatrix::identity(self.dim, self.dim), -shift)
    }

    /// Smallest eigenvalue of `a` over the given points.
    pub fn min_eigenvalue(&self, points: &[DVector<f64>]) -> f64 {
        points
            .iter()
            .map(|x| {
                let a = self.a_at(x);
                let sym = (&a + a.transpose()) * 0.5;
                sym.symmetric_eigenvalues().min()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Boundary graph `xₙ = f(x')` through `P`, interior on `xₙ > f`.
#[derive(Clone)]
pub struct BoundaryPatch {
    base: DVector<f64>,
    f: ScalarFn,
    grad: VecFn,
    hess: MatFn,
}

impl std::fmt::Debug for BoundaryPatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryPatch").field("base", &self.base).finish()
    }
}

impl BoundaryPatch {
    pub fn new<F, G, H>(base: DVector<f64>, f: F, grad: G, hess: H) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        H: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let n = base.len();
        if n < 2 {
            return Err(FlowError::InvalidArgument("patch dimension < 2".into()));
        }
        let tangential = base.rows(0, n - 1).into_owned();
        let on_graph = f(&tangential);
        if (on_graph - base[n - 1]).abs() > 1e-12 {
            return Err(FlowError::InvalidArgument(format!(
                "base point off the graph: f(P') = {on_graph}, Pₙ = {}",
                base[n - 1]
            )));
        }
        Ok(Self {
            base,
            f: Arc::new(f),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
        })
    }

    /// Flat boundary `xₙ = Pₙ`.
    pub fn flat(base: DVector<f64>) -> Result<Self> {
        let n = base.len();
        let level = base[n.saturating_sub(1)];
        Self::new(
            base,
            move |_| level,
            move |_| DVector::zeros(n - 1),
            move |_| DMatrix::zeros(n - 1, n - 1),
        )
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    fn tangential(&self) -> DVector<f64> {
        self.base.rows(0, self.dim() - 1).into_owned()
    }

    /// Same graph after the shift `z = x + s`.
    pub fn translated(&self, shift: &DVector<f64>) -> Result<Self> {
        let n = self.dim();
        let st = shift.rows(0, n - 1).into_owned();
        let sn = shift[n - 1];
        let (f, g, h) = (self.f.clone(), self.grad.clone(), self.hess.clone());
        let (s1, s2, s3) = (st.clone(), st.clone(), st);
        Self::new(
            &self.base + shift,
            move |x| f(&(x - &s1)) + sn,
            move |x| g(&(x - &s2)),
            move |x| h(&(x - &s3)),
        )
    }

    /// Interior normal `(−∇f, 1)` at `P` (not normalized).
    pub fn interior_normal(&self) -> DVector<f64> {
        let n = self.dim();
        let g = (self.grad)(&self.tangential());
        let mut nu = DVector::zeros(n);
        for i in 0..n - 1 {
            nu[i] = -g[i];
        }
        nu[n - 1] = 1.0;
        nu
    }

    /// Original point with flattened coordinates `y`.
    pub fn point(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = DVector::zeros(n);
        for i in 0..n - 1 {
            x[i] = self.base[i] + y[i];
        }
        let xt = x.rows(0, n - 1).into_owned();
        x[n - 1] = y[n - 1] + (self.f)(&xt);
        x
    }
}

/// Transformed coefficients at a flattened point.
#[derive(Debug, Clone, PartialEq)]
pub struct Flattened {
    pub alpha: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub c: f64,
}

fn flatten_at_point(op: &DegenOperator, patch: &BoundaryPatch, x: &DVector<f64>) -> Flattened {
    let n = op.dim();
    let xt = x.rows(0, n - 1).into_owned();
    let g = (patch.grad)(&xt);
    let h = (patch.hess)(&xt);
    let mut jac = DMatrix::identity(n, n);
    for i in 0..n - 1 {
        jac[(n - 1, i)] = -g[i];
    }
    let a = op.a_at(x);
    let b = op.b_at(x);
    let alpha = &jac * &a * jac.transpose();
    let mut beta = &jac * &b;
    let mut curv = 0.0;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            curv += a[(i, j)] * h[(i, j)];
        }
    }
    beta[n - 1] -= curv;
    Flattened {
        alpha,
        beta,
        c: op.c_at(x),
    }
}

fn check_dims(op: &DegenOperator, patch: &BoundaryPatch) -> Result<()> {
    if op.dim() != patch.dim() {
        return Err(FlowError::InvalidArgument(format!(
            "operator dimension {} vs patch dimension {}",
            op.dim(),
            patch.dim()
        )));
    }
    Ok(())
}

/// `α` and `β` at the origin of the flattened coordinates.
pub fn flatten(op: &DegenOperator, patch: &BoundaryPatch) -> Result<Flattened> {
    check_dims(op, patch)?;
    Ok(flatten_at_point(op, patch, patch.base()))
}

/// `α`, `β` at the flattened point `y`.
pub fn flatten_at(op: &DegenOperator, patch: &BoundaryPatch, y: &DVector<f64>) -> Result<Flattened> {
    check_dims(op, patch)?;
    Ok(flatten_at_point(op, patch, &patch.point(y)))
}

/// Assumption on the zeroth-order term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CMode {
    /// `c(P) = 0` within 1e−12.
    Zero,
    /// `c(P) ≤ 0`, valid at a minimum with `u(P) ≤ 0`.
    NonPositive { u_at_p: f64 },
}

/// `−Σ bⁱ∂ᵢf + bⁿ − Σ aⁱʲ∂ᵢⱼf` at `P`.
pub fn hopf_condition(op: &DegenOperator, patch: &BoundaryPatch, mode: CMode) -> Result<f64> {
    check_dims(op, patch)?;
    let p = patch.base();
    let c = op.c_at(p);
    match mode {
        CMode::Zero if c.abs() > 1e-12 => return Err(FlowError::NonzeroC(c)),
        CMode::NonPositive { u_at_p } if c > 1e-12 || u_at_p > 0.0 => {
            return Err(FlowError::NonzeroC(c))
        }
        _ => {}
    }
    let n = op.dim();
    let xt = patch.tangential();
    let g = (patch.grad)(&xt);
    let h = (patch.hess)(&xt);
    let a = op.a_at(p);
    let b = op.b_at(p);
    let mut v = b[n - 1];
    for i in 0..n - 1 {
        v -= b[i] * g[i];
        for j in 0..n - 1 {
            v -= a[(i, j)] * h[(i, j)];
        }
    }
    Ok(v)
}

/// `μ = 2·(2·Σαⁱⁱ + 1)/βⁿ`, so that `−2Σαⁱⁱ + μβⁿ = 2Σαⁱⁱ + 2 ≥ 2`.
pub fn choose_mu(alpha: &DMatrix<f64>, beta: &DVector<f64>) -> Result<f64> {
    let bn = beta[beta.len() - 1];
    if !(bn > 0.0) {
        return Err(FlowError::ConditionFailed(bn));
    }
    Ok(2.0 * (2.0 * alpha.trace() + 1.0) / bn)
}

/// `L h` at the flattened point `y`.
pub fn barrier_value(op: &DegenOperator, patch: &BoundaryPatch, mu: f64, y: &DVector<f64>) -> Result<f64> {
    let fl = flatten_at(op, patch, y)?;
    let n = y.len();
    let mut grad = y * -2.0;
    grad[n - 1] += mu;
    let h = -y.norm_squared() + mu * y[n - 1];
    Ok(-2.0 * fl.alpha.trace() + fl.beta.dot(&grad) + fl.c * h)
}

/// Closed lattice of `density` points per axis on `∏[−dᵢ,dᵢ] × [0,dₙ]`.
pub fn sample_rectangle(half_widths: &[f64], density: usize) -> Vec<DVector<f64>> {
    let n = half_widths.len();
    let density = density.max(2);
    let total = density.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut y = DVector::zeros(n);
        for (axis, &d) in half_widths.iter().enumerate() {
            let t = (k % density) as f64 / (density - 1) as f64;
            k /= density;
            y[axis] = if axis + 1 == n { t * d } else { (2.0 * t - 1.0) * d };
        }
        out.push(y);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub ok: bool,
    pub worst: f64,
    pub half_widths: Vec<f64>,
}

/// Samples `L h` over the rectangle; passes iff every sample is positive.
pub fn verify_barrier(
    op: &DegenOperator,
    patch: &BoundaryPatch,
    mu: f64,
    half_widths: &[f64],
    density: usize,
) -> Result<BarrierCheck> {
    check_dims(op, patch)?;
    if half_widths.len() != op.dim() || half_widths.iter().any(|&d| !(d > 0.0)) {
        return Err(FlowError::InvalidArgument("half-widths must be positive, one per axis".into()));
    }
    let mut worst = f64::INFINITY;
    for y in sample_rectangle(half_widths, density) {
        worst = worst.min(barrier_value(op, patch, mu, &y)?);
    }
    Ok(BarrierCheck {
        ok: worst > 0.0,
        worst,
        half_widths: half_widths.to_vec(),
    })
}

pub const MAX_SHRINK_RETRIES: usize = 20;
pub const DEFAULT_DENSITY: usize = 9;

/// Halves the rectangle until the barrier check passes.
/// Returns the passing check and the number of halvings.
pub fn shrink_barrier(
    op: &DegenOperator,
    patch: &BoundaryPatch,
    mu: f64,
    initial: &[f64],
    density: usize,
) -> Result<(BarrierCheck, usize)> {
    let mut widths = initial.to_vec();
    for retry in 0..=MAX_SHRINK_RETRIES {
        let check = verify_barrier(op, patch, mu, &widths, density)?;
        if check.ok {
            return Ok((check, retry));
        }
        widths.iter_mut().for_each(|d| *d *= 0.5);
    }
    Err(FlowError::RectangleVanished(MAX_SHRINK_RETRIES))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub condition_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1_dims: Option<Vec<f64>>,
    pub alpha_trace: f64,
    pub beta_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_barrier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrink_retries: Option<usize>,
}

impl HopfReport {
    pub fn applicable(&self) -> bool {
        self.condition_value > 0.0
    }
}

/// Condition, `μ` and the shrink loop in one pass. A vanished rectangle
/// is reported as `barrier_ok = false` rather than an error.
pub fn analyze(
    op: &DegenOperator,
    patch: &BoundaryPatch,
    mode: CMode,
    initial: &[f64],
    density: usize,
) -> Result<HopfReport> {
    let condition_value = hopf_condition(op, patch, mode)?;
    let fl = flatten(op, patch)?;
    let mut report = HopfReport {
        condition_value,
        mu: None,
        barrier_ok: None,
        d1_dims: None,
        alpha_trace: fl.alpha.trace(),
        beta_n: fl.beta[fl.beta.len() - 1],
        worst_barrier: None,
        shrink_retries: None,
    };
    if condition_value <= 0.0 {
        return Ok(report);
    }
    let mu = choose_mu(&fl.alpha, &fl.beta)?;
    report.mu = Some(mu);
    match shrink_barrier(op, patch, mu, initial, density) {
        Ok((check, retries)) => {
            report.barrier_ok = Some(true);
            report.d1_dims = Some(check.half_widths);
            report.worst_barrier = Some(check.worst);
            report.shrink_retries = Some(retries);
        }
        Err(FlowError::RectangleVanished(n)) => {
            report.barrier_ok = Some(false);
            report.shrink_retries = Some(n);
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Linearized operator of the symmetric flow near the exit, in
/// coordinates `z = (y, 1 − x)`: `a = diag(a²², a¹¹)`, `b = (b², −b¹)`.
pub fn symmetric_exit_operator(gas: &GasModel, profile: &NozzleProfile) -> Result<DegenOperator> {
    let gas = *gas;
    let profile = *profile;
    let g = gas.gamma();
    let coeffs = move |z: &DVector<f64>| -> (f64, f64, f64) {
        let x = (1.0 - z[1]).clamp(0.0, 1.0);
        let u = speed_at(&gas, &profile, x).unwrap_or(f64::NAN);
        let du = acceleration_at(&gas, &profile, x).unwrap_or(f64::NAN);
        let n = profile.n(x);
        let dn = profile.dn(x);
        let cb2 = gas.c0() - 0.5 * (g - 1.0) * u * u;
        let a11 = n * n * (cb2 - u * u);
        let b1 = -(g + 1.0) * n * n * u * du + n * dn * (cb2 + (g - 1.0) * u * u);
        (a11, cb2, b1)
    };
    let ca = coeffs;
    DegenOperator::new(
        2,
        move |z| {
            let (a11, a22, _) = ca(z);
            DMatrix::from_row_slice(2, 2, &[a22, 0.0, 0.0, a11.max(0.0)])
        },
        move |z| {
            let (_, _, b1) = coeffs(z);
            DVector::from_vec(vec![0.0, -b1])
        },
        |_| 0.0,
    )
}

/// Extremum type at the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub rate: f64,
    pub sign: i8,
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn violates(kind: ExtremumKind, at_p: f64, v: f64) -> bool {
    let tol = 1e-12 * (1.0 + at_p.abs());
    match kind {
        ExtremumKind::Min => v < at_p - tol,
        ExtremumKind::Max => v > at_p + tol,
    }
}

/// Three-point one-sided rate of `u` along the interior normal at `P`.
/// Boundary points within `4·step` of `P` are sampled to confirm `P` is
/// the extremum.
pub fn boundary_derivative_check<U>(
    u: U,
    patch: &BoundaryPatch,
    kind: ExtremumKind,
    step: f64,
) -> Result<DerivativeCheck>
where
    U: Fn(&DVector<f64>) -> f64,
{
    if !(step > 0.0) {
        return Err(FlowError::InvalidArgument(format!("step {step} must be positive")));
    }
    let n = patch.dim();
    let p = patch.base().clone();
    let at_p = u(&p);
    for axis in 0..n - 1 {
        for k in 1..=4 {
            for s in [-1.0, 1.0] {
                let mut y = DVector::zeros(n);
                y[axis] = s * k as f64 * step;
                let v = u(&patch.point(&y));
                if violates(kind, at_p, v) {
                    return Err(FlowError::NotAnExtremum { at_p, found: v });
                }
            }
        }
    }
    let nu = patch.interior_normal();
    let u1 = u(&(&p + &nu * step));
    let u2 = u(&(&p + &nu * (2.0 * step)));
    let rate = (-3.0 * at_p + 4.0 * u1 - u2) / (2.0 * step);
    Ok(DerivativeCheck { rate, sign: sign_of(rate) })
}

/// Grid version on the exit column `x = 1`, interior normal `−∂ₓ`. The
/// whole exit column is the tangential sample.
pub fn exit_derivative_check(u: &ScalarField, j: usize, kind: ExtremumKind) -> Result<DerivativeCheck> {
    let grid = *u.grid();
    let last = grid.nx() - 1;
    let at_p = u.get(last, j)?;
    for k in 0..grid.ny() {
        let v = u.at(last, k as isize);
        if violates(kind, at_p, v) {
            return Err(FlowError::NotAnExtremum { at_p, found: v });
        }
    }
    let jj = j as isize;
    let rate = (-3.0 * at_p + 4.0 * u.at(last - 1, jj) - u.at(last - 2, jj)) / (2.0 * grid.hx());
    Ok(DerivativeCheck { rate, sign: sign_of(rate) })
}
