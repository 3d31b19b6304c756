//! The one-loop deformed c-map metric `g_{2k}` over `CH^n`, its Heisenberg
//! symmetries and lifted isometries.
//!
//! The chart on `N_{2k}` is `(X, r, w_0, …, w_n, t)` flattened to `4n + 4`
//! reals, matching the rigid chart of [`crate::twist`] with `θ` replaced by
//! `t`. The metric is available by three routes: the closed form, assembly
//! from the VPHS data, and the twist of the elementary deformation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    self, max_abs, values, vector_values, ChartMap, ChartPoint, FieldFn, JetMatrix, MapFn, MetricField, VectorFn,
};
use crate::jet::{ComplexJet, Jet};
use crate::psk::ComplexHyperbolic;
use crate::twist::{Deformation, ParallelSection, RigidChart, Twist, TwistData};
use crate::vphs::Vphs;

/// Which Hermitian form carries the fibre part of the assembled metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rearrangement {
    Griffiths,
    Weil,
}

#[derive(Debug, Clone)]
pub struct DeformedCmap {
    twist: Twist,
}

/// Radial coefficients of `g_{2k}` evaluated on jets or numbers.
struct Coefficients<T> {
    radial: T,
    base: T,
    fibre: T,
    line: T,
    vertical: T,
}

impl DeformedCmap {
    pub fn new(n: usize, k: u32) -> Result<Self> {
        let rigid = RigidChart::new(ComplexHyperbolic::new(n)?)?;
        if rigid.dim() > crate::jet::MAX_DIM {
            return Err(Error::Parameter(format!("n = {n} exceeds the chart dimension limit")));
        }
        Ok(DeformedCmap { twist: Twist::new(TwistData::new(rigid, Deformation(k))) })
    }

    pub fn twist(&self) -> &Twist {
        &self.twist
    }

    pub fn data(&self) -> &TwistData {
        self.twist.data()
    }

    pub fn chart(&self) -> &RigidChart {
        self.data().rigid()
    }

    pub fn model(&self) -> &ComplexHyperbolic {
        self.chart().model()
    }

    pub fn n(&self) -> usize {
        self.chart().n()
    }

    pub fn k(&self) -> Deformation {
        self.data().k()
    }

    pub fn dim(&self) -> usize {
        self.chart().dim()
    }

    pub fn t_index(&self) -> usize {
        self.chart().angle_index()
    }

    /// Validates a chart point: dimension, `|X| < 1` and `r² > 2k`.
    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        crate::error::check_len(self.dim(), p.dim())?;
        let rho: f64 = self.chart().base(p).iter().map(|x| x * x).sum();
        if rho >= 1.0 {
            return Err(Error::Domain(format!("|X|² = {rho} is not below 1")));
        }
        self.k().check_radius(p.0[self.chart().r_index()])?;
        Ok(())
    }

    fn coefficients(&self, r: &Jet) -> Result<Coefficients<Jet>> {
        let k = self.k().value();
        let r2 = r.square();
        let gap = &r2 - 2.0 * k;
        if gap.value() <= 1e-8 {
            return Err(Error::Domain(format!("r² − 2k = {} is not positive", gap.value())));
        }
        let inv = gap.recip()?;
        let inv2 = inv.square();
        let plus = &r2 + 2.0 * k;
        Ok(Coefficients {
            radial: &plus * &inv2,
            base: &r2 * &inv,
            fibre: inv.clone(),
            line: &(&r2 * &inv2) * 2.0,
            vertical: &(&(&r2 * &inv2) * &plus.recip()?) * 4.0,
        })
    }

    /// Closed-form `g_{2k}` as jets of the same order as `x`.
    pub fn metric_fs(&self, x: &[Jet]) -> Result<JetMatrix> {
        let chart = self.chart();
        let n = self.n();
        let d = self.dim();
        let zero = x[0].zero_like();
        let c = self.coefficients(&x[chart.r_index()])?;
        let mut g = vec![vec![zero.clone(); d]; d];
        g[chart.r_index()][chart.r_index()] = c.radial.clone();
        if n > 0 {
            let gm = self.model().base_metric(x)?;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    g[a][b] = &gm[a][b] * &c.base;
                }
            }
        }
        let w = |i: usize| (x[chart.w_index(i)].clone(), x[chart.w_index(i) + 1].clone());
        for i in 0..=n {
            let sign = if i == 0 { -1.0 } else { 1.0 };
            let idx = chart.w_index(i);
            for a in [idx, idx + 1] {
                g[a][a] += &c.fibre * sign;
            }
        }
        // |dw_0 − Σ X̄_j dw_j|² / (1 − |X|²)
        let mut line = vec![ComplexJet::constant_like(&zero, 0.0, 0.0); d];
        line[chart.w_index(0)] = ComplexJet::constant_like(&zero, 1.0, 0.0);
        line[chart.w_index(0) + 1] = ComplexJet::constant_like(&zero, 0.0, 1.0);
        for j in 1..=n {
            let xbar = ComplexJet::new(x[2 * j - 2].clone(), -&x[2 * j - 1]);
            line[chart.w_index(j)] = -&xbar;
            line[chart.w_index(j) + 1] = -&xbar.times_i();
        }
        let line_weight = &c.line * &self.model().ball_gap(x)?.recip()?;
        add_hermitian_square(&mut g, &line, &line_weight);
        // dt + kΠ − ½ Im(Σ_{i≥1} w̄_i dw_i − w̄_0 dw_0)
        let k = self.k().value();
        let mut vertical = vec![zero.clone(); d];
        vertical[self.t_index()] = x[0].lift(1.0);
        for (a, e) in self.model().potential_form(x)?.iter().enumerate() {
            vertical[a] = e * k;
        }
        for i in 0..=n {
            let sign = if i == 0 { -1.0 } else { 1.0 };
            let (u, v) = w(i);
            vertical[chart.w_index(i)] = &v * (0.5 * sign);
            vertical[chart.w_index(i) + 1] = &u * (-0.5 * sign);
        }
        add_real_square(&mut g, &vertical, &c.vertical);
        Ok(g)
    }

    pub fn metric_field(&self) -> impl MetricField + '_ {
        FieldFn::new(self.dim(), move |x: &[Jet]| self.metric_fs(x))
    }

    pub fn metric_fs_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        Ok(values(&self.metric_fs(&p.seed(1)?)?))
    }

    /// `g_{2k}` assembled from `g_M`, the Hermitian forms of the VPHS applied
    /// to `∇Φ`, `φ_k` and `Q(Φ, ∇Φ)`.
    pub fn metric_assembled(&self, p: &ChartPoint, how: Rearrangement) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let chart = self.chart();
        let vphs = chart.vphs();
        let base = chart.base(p);
        let x1 = p.seed(1)?;
        let c = self.coefficients(&x1[chart.r_index()])?;
        let d = self.dim();
        let mut g = DMatrix::zeros(d, d);
        g[(chart.r_index(), chart.r_index())] = c.radial.value();
        if self.n() > 0 {
            let gm = values(&self.model().base_metric(&Jet::seed(base, 1)?)?);
            for a in 0..base.len() {
                for b in 0..base.len() {
                    g[(a, b)] = c.base.value() * gm[(a, b)];
                }
            }
        }
        let q = vphs.pairing_at(base)?;
        let (op, line_coefficient) = match how {
            Rearrangement::Griffiths => (vphs.frame().griffiths_operator(), c.line.value()),
            Rearrangement::Weil => {
                let gap = self.k().check_radius(p.0[chart.r_index()])?;
                (vphs.frame().weil_operator(), 4.0 * self.k().value() / (gap * gap))
            }
        };
        g += chart.fibre_form(p, &Vphs::hermitian_form(&q, &op))? * c.fibre.value();
        g += chart.fibre_form(p, &vphs.line_form())? * line_coefficient;
        let phik = vector_values(&self.twist.twisted_connection(&x1)?);
        let beta = vector_values(&self.data().beta(&x1));
        let form = DVector::from_fn(d, |a, _| phik[a] + beta[a]);
        g += &form * form.transpose() * c.vertical.value();
        Ok(g)
    }

    /// Twist of the elementary deformation `g_H`, without any rescaling.
    pub fn metric_via_twist(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let gh = self.data().elementary_deformation(p)?;
        let split = self.twist.split_tensor(&gh, p)?;
        if split.vertical.abs() < 1e-14 {
            return Err(Error::Singular("elementary deformation along Z"));
        }
        self.twist.twist_tensor(&split, p)
    }

    /// Heisenberg field `w_s = v_s + ½ Q(s, Φ) Z_k`.
    pub fn heisenberg_field(&self, s: &ParallelSection) -> impl geometry::VectorField + '_ {
        let s = s.clone();
        VectorFn::new(self.dim(), move |x: &[Jet]| {
            let chart = self.chart();
            let mut v = vec![x[0].zero_like(); self.dim()];
            for (i, a) in s.0.iter().enumerate() {
                v[chart.w_index(i)] = x[0].lift(a.re);
                v[chart.w_index(i) + 1] = x[0].lift(a.im);
            }
            v[self.t_index()] = chart.pairing_with_tautological(x, &s.coefficients()) * -0.5;
            Ok(v)
        })
    }

    /// `Z_k = ∂_t`.
    pub fn translation_field(&self) -> impl geometry::VectorField + '_ {
        VectorFn::new(self.dim(), move |x: &[Jet]| {
            let mut v = vec![x[0].zero_like(); self.dim()];
            v[self.t_index()] = x[0].lift(1.0);
            Ok(v)
        })
    }

    /// `Q(s_1, s_2)` for parallel sections.
    pub fn section_pairing(&self, a: &ParallelSection, b: &ParallelSection) -> f64 {
        (a.coefficients().transpose() * self.chart().parallel_pairing() * b.coefficients())[(0, 0)].re
    }

    /// `ψ_s`: translate `w` by `s` and `t` by `½ Q(s, Φ)`.
    pub fn heisenberg_isometry(&self, s: &ParallelSection, p: &ChartPoint) -> Result<ChartPoint> {
        let chart = self.chart();
        let x = p.seed(1)?;
        let phase = -chart.pairing_with_tautological(&x, &s.coefficients()).value();
        let mut out = p.0.clone();
        for (i, a) in s.0.iter().enumerate() {
            out[chart.w_index(i)] += a.re;
            out[chart.w_index(i) + 1] += a.im;
        }
        out[self.t_index()] += 0.5 * phase;
        Ok(ChartPoint(out))
    }

    /// Complete lift to the rigid chart of the rotation `X ↦ e^{−is} X` of
    /// `CH^n`, induced by `diag(e^{is}, 1, …, 1)`.
    pub fn rotation_lift(&self) -> impl geometry::VectorField + '_ {
        VectorFn::new(self.dim(), move |x: &[Jet]| {
            let chart = self.chart();
            let mut v = vec![x[0].zero_like(); self.dim()];
            for j in 0..self.n() {
                v[2 * j] = x[2 * j + 1].clone();
                v[2 * j + 1] = -&x[2 * j];
            }
            v[chart.angle_index()] = x[0].lift(1.0);
            let w0 = chart.w_index(0);
            v[w0] = -&x[w0 + 1];
            v[w0 + 1] = x[w0].clone();
            Ok(v)
        })
    }

    /// The rotation lift pushed to `N`, where the `t` component is `−k` times
    /// the `θ` component.
    pub fn rotation_killing_field(&self) -> impl geometry::VectorField + '_ {
        let k = self.k().value();
        VectorFn::new(self.dim(), move |x: &[Jet]| {
            let mut v = self.rotation_lift_components(x);
            v[self.t_index()] = x[0].lift(-k);
            Ok(v)
        })
    }

    fn rotation_lift_components(&self, x: &[Jet]) -> Vec<Jet> {
        use geometry::VectorField;
        self.rotation_lift().components(x).unwrap_or_default()
    }

    /// `f^T = −(f_H + k) φ̃(X^T) − ½ Q(Φ, ∇_X Φ)` for the rotation lift.
    pub fn rotation_hamiltonian(&self, p: &ChartPoint) -> Result<f64> {
        let chart = self.chart();
        let x1 = p.seed(1)?;
        let y = vector_values(&self.rotation_lift_components(&x1));
        let phi = vector_values(&self.data().connection(&x1)?);
        let phi_tilde_y: f64 = -phi.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let w0 = Complex64::new(p.0[chart.w_index(0)], p.0[chart.w_index(0) + 1]);
        let mut a = vec![Complex64::new(0.0, 0.0); self.n() + 1];
        a[0] = Complex64::new(0.0, 1.0) * w0;
        let nabla = ParallelSection(a).coefficients();
        let q = chart.pairing_with_tautological(&x1, &nabla).value();
        let fh = self.data().hamiltonian(&x1).value();
        Ok(-(fh + self.k().value()) * phi_tilde_y - 0.5 * q)
    }

    /// The map `ψ^N` induced by a pseudo-unitary matrix.
    pub fn lift_isometry<'a>(&'a self, a: &'a PseudoUnitary) -> impl ChartMap + 'a {
        MapFn { source: self.dim(), target: self.dim(), f: move |x: &[Jet]| self.apply_lift(a, x) }
    }

    fn apply_lift(&self, a: &PseudoUnitary, x: &[Jet]) -> Result<Vec<Jet>> {
        let chart = self.chart();
        let n = self.n();
        let m = &a.0;
        let zero = x[0].zero_like();
        let cplx = |c: Complex64| ComplexJet::constant_like(&zero, c.re, c.im);
        let coords: Vec<ComplexJet> =
            std::iter::once(cplx(Complex64::new(1.0, 0.0))).chain(self.model().base_coords(x)).collect();
        let row = |i: usize| {
            let mut acc = cplx(m[(i, 0)]);
            for (j, xj) in coords.iter().enumerate().skip(1) {
                acc += &(xj * &cplx(m[(i, j)]));
            }
            acc
        };
        let cocycle = row(0);
        let inv = cocycle.recip()?;
        let mut out = Vec::with_capacity(self.dim());
        for i in 1..=n {
            let xi = &row(i) * &inv;
            out.push(xi.re);
            out.push(xi.im);
        }
        out.push(x[chart.r_index()].clone());
        let w: Vec<ComplexJet> =
            (0..=n).map(|i| ComplexJet::new(x[chart.w_index(i)].clone(), x[chart.w_index(i) + 1].clone())).collect();
        for i in 0..=n {
            let mut acc = cplx(Complex64::new(0.0, 0.0));
            for (j, wj) in w.iter().enumerate() {
                acc += &(wj * &cplx(m[(i, j)]));
            }
            out.push(acc.re);
            out.push(acc.im);
        }
        let angle = cocycle.im.atan2(&cocycle.re)?;
        out.push(&x[self.t_index()] - &(&angle * self.k().value()));
        Ok(out)
    }
}

fn add_real_square(g: &mut JetMatrix, form: &[Jet], weight: &Jet) {
    let nonzero: Vec<usize> = (0..form.len()).filter(|&a| form[a].coefficients().iter().any(|c| *c != 0.0)).collect();
    for &a in &nonzero {
        let wa = &form[a] * weight;
        for &b in &nonzero {
            g[a][b] += &(&wa * &form[b]);
        }
    }
}

fn add_hermitian_square(g: &mut JetMatrix, form: &[ComplexJet], weight: &Jet) {
    let nonzero: Vec<usize> = (0..form.len())
        .filter(|&a| form[a].re.coefficients().iter().chain(form[a].im.coefficients()).any(|c| *c != 0.0))
        .collect();
    for &a in &nonzero {
        for &b in &nonzero {
            let re = &(&form[a].re * &form[b].re) + &(&form[a].im * &form[b].im);
            g[a][b] += &(&re * weight);
        }
    }
}

/// A matrix preserving the Hermitian form `diag(1, −1, …, −1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoUnitary(pub DMatrix<Complex64>);

impl PseudoUnitary {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || dim == 0 {
            return Err(Error::Parameter("pseudo-unitary matrix must be square".into()));
        }
        let form = Self::form(dim);
        let defect = (m.adjoint() * &form * &m - &form).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        if defect > 1e-12 {
            return Err(Error::Parameter(format!("matrix does not preserve the (n,1) form (defect {defect:e})")));
        }
        Ok(PseudoUnitary(m))
    }

    fn form(dim: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(dim, dim, |a, b| match (a, b) {
            (0, 0) => Complex64::new(1.0, 0.0),
            _ if a == b => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 0.0),
        })
    }

    pub fn identity(n: usize) -> Self {
        PseudoUnitary(DMatrix::identity(n + 1, n + 1))
    }

    pub fn phases(angles: &[f64]) -> Self {
        let d = angles.len();
        PseudoUnitary(DMatrix::from_fn(d, d, |a, b| {
            if a == b {
                Complex64::from_polar(1.0, angles[a])
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Hyperbolic rotation mixing `z_0` and `z_j`.
    pub fn boost(n: usize, j: usize, rapidity: f64, phase: f64) -> Self {
        let mut m = DMatrix::identity(n + 1, n + 1);
        let (c, s) = (rapidity.cosh(), rapidity.sinh());
        m[(0, 0)] = Complex64::new(c, 0.0);
        m[(j, j)] = Complex64::new(c, 0.0);
        m[(0, j)] = Complex64::from_polar(s, phase);
        m[(j, 0)] = Complex64::from_polar(s, -phase);
        PseudoUnitary(m)
    }

    pub fn compose(&self, other: &PseudoUnitary) -> Self {
        PseudoUnitary(&self.0 * &other.0)
    }

    /// A random product of phases and boosts with moderate rapidities.
    pub fn random(rng: &mut impl Rng, n: usize) -> Self {
        let angles: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let mut m = Self::phases(&angles);
        for j in 1..=n {
            let b = Self::boost(n, j, rng.gen_range(-0.4..0.4), rng.gen_range(0.0..std::f64::consts::TAU));
            m = m.compose(&b);
        }
        m
    }
}

/// Least-squares Einstein constant at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EinsteinFit {
    pub lambda: f64,
    /// `‖Ric − λ g‖ / ‖g‖` in the Frobenius norm.
    pub residual: f64,
}

pub fn einstein_fit(cmap: &DeformedCmap, p: &ChartPoint) -> Result<EinsteinFit> {
    cmap.check_point(p)?;
    let field = cmap.metric_field();
    let g = geometry::metric_at(&field, p)?;
    let ric = geometry::ricci(&field, p)?;
    let lambda = ric.dot(&g) / g.dot(&g);
    let residual = (&ric - &g * lambda).norm() / g.norm();
    Ok(EinsteinFit { lambda, residual })
}

/// Fitted constant `c` with `c · tw(g_H) ≈ g_{2k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFit {
    pub scale: f64,
    /// Largest relative deviation of the per-point ratio from `scale`.
    pub spread: f64,
}

pub fn fit_twist_scale(cmap: &DeformedCmap, points: &[ChartPoint]) -> Result<ScaleFit> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ratios = Vec::with_capacity(points.len());
    for p in points {
        let tw = cmap.metric_via_twist(p)?;
        let fs = cmap.metric_fs_at(p)?;
        num += tw.dot(&fs);
        den += tw.dot(&tw);
        ratios.push(tw.dot(&fs) / tw.dot(&tw));
    }
    if den == 0.0 {
        return Err(Error::Singular("twisted metric"));
    }
    let scale = num / den;
    let spread = ratios.iter().fold(0.0f64, |m, r| m.max(((r - scale) / scale).abs()));
    Ok(ScaleFit { scale, spread })
}

/// Largest componentwise difference relative to the largest entry of `b`.
pub fn relative_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(f64::MIN_POSITIVE)
}

/// Residuals of the Heisenberg algebra at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergResiduals {
    /// `[w_{s_i}, w_{s_j}] − Q(s_i, s_j) Z_k`.
    pub bracket: f64,
    /// `[w_{s_i}, w_{s_j}] + Q(s_i, s_j) Z_k`.
    pub bracket_opposite_sign: f64,
    /// `[w_{s_i}, Z_k]`.
    pub central: f64,
    /// `L_V g_{2k}` over all `w_{s_i}` and `Z_k`.
    pub killing: f64,
}

pub fn heisenberg_residuals(cmap: &DeformedCmap, p: &ChartPoint) -> Result<HeisenbergResiduals> {
    let basis = ParallelSection::basis(cmap.n());
    let t = cmap.t_index();
    let z = cmap.translation_field();
    let metric = cmap.metric_field();
    let mut out = HeisenbergResiduals { bracket: 0.0, bracket_opposite_sign: 0.0, central: 0.0, killing: 0.0 };
    out.killing = max_abs(&geometry::lie_derivative_metric(&z, &metric, p)?);
    for (i, si) in basis.iter().enumerate() {
        let wi = cmap.heisenberg_field(si);
        out.central = out.central.max(geometry::max_abs_slice(&geometry::lie_bracket(&wi, &z, p)?));
        out.killing = out.killing.max(max_abs(&geometry::lie_derivative_metric(&wi, &metric, p)?));
        for sj in &basis[i..] {
            let wj = cmap.heisenberg_field(sj);
            let bracket = geometry::lie_bracket(&wi, &wj, p)?;
            let q = cmap.section_pairing(si, sj);
            for (c, v) in bracket.iter().enumerate() {
                let target = if c == t { q } else { 0.0 };
                out.bracket = out.bracket.max((v - target).abs());
                out.bracket_opposite_sign = out.bracket_opposite_sign.max((v + target).abs());
            }
        }
    }
    Ok(out)
}

/// `ψ_{s_1} ∘ ψ_{s_2}` against `ψ_{s_1 + s_2}` followed by the `t` shift `½ Q(s_1, s_2)`.
pub fn heisenberg_composition(
    cmap: &DeformedCmap,
    a: &ParallelSection,
    b: &ParallelSection,
    p: &ChartPoint,
) -> Result<f64> {
    let lhs = cmap.heisenberg_isometry(a, &cmap.heisenberg_isometry(b, p)?)?;
    let mut rhs = cmap.heisenberg_isometry(&a.plus(b), p)?;
    rhs.0[cmap.t_index()] += 0.5 * cmap.section_pairing(a, b);
    Ok(lhs.0.iter().zip(&rhs.0).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

/// `‖(ψ^N)^* g_{2k} − g_{2k}‖` at `p`.
pub fn isometry_residual(cmap: &DeformedCmap, a: &PseudoUnitary, p: &ChartPoint) -> Result<f64> {
    if a.0.nrows() != cmap.n() + 1 {
        return Err(Error::Dimension { expected: cmap.n() + 1, found: a.0.nrows() });
    }
    let map = cmap.lift_isometry(a);
    let image = ChartPoint(vector_values(&map.apply(&p.seed(1)?)?));
    cmap.check_point(&image)?;
    let pulled = geometry::pullback_metric(&map, &cmap.metric_field(), p)?;
    Ok(max_abs(&(pulled - cmap.metric_fs_at(p)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn point(rng: &mut impl Rng, n: usize, k: u32) -> ChartPoint {
        ChartPoint(sampling::fibre_point(rng, n, k))
    }

    #[test]
    fn universal_hypermultiplet_reduction() {
        // n = 0, k = 0: dr²/r² + |dw₀|²/r² + (4/r⁴)(dt + ½ Im(w̄₀ dw₀))²
        let cmap = DeformedCmap::new(0, 0).unwrap();
        let (r, u, v) = (1.7_f64, 0.3, -0.8);
        let g = cmap.metric_fs_at(&ChartPoint(vec![r, u, v, 0.4])).unwrap();
        let form = [0.0, -0.5 * v, 0.5 * u, 1.0];
        let mut expected = DMatrix::from_fn(4, 4, |a, b| 4.0 / r.powi(4) * form[a] * form[b]);
        for a in 0..3 {
            expected[(a, a)] += 1.0 / (r * r);
        }
        assert!(max_abs(&(g - expected)) < 1e-14);
    }

    #[test]
    fn unit_point_gives_diagonal() {
        let cmap = DeformedCmap::new(0, 0).unwrap();
        let g = cmap.metric_fs_at(&ChartPoint(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(g, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 4.0])));
    }

    #[test]
    fn routes_agree() {
        let mut rng = sampling::rng(41);
        for n in 0..3 {
            for k in 0..3 {
                let cmap = DeformedCmap::new(n, k).unwrap();
                for _ in 0..3 {
                    let p = point(&mut rng, n, k);
                    let fs = cmap.metric_fs_at(&p).unwrap();
                    let grif = cmap.metric_assembled(&p, Rearrangement::Griffiths).unwrap();
                    let weil = cmap.metric_assembled(&p, Rearrangement::Weil).unwrap();
                    let tw = cmap.metric_via_twist(&p).unwrap();
                    assert!(relative_difference(&grif, &fs) < 1e-12, "griffiths n={n} k={k}");
                    assert!(relative_difference(&weil, &grif) < 1e-12, "weil n={n} k={k}");
                    assert!(relative_difference(&tw, &fs) < 1e-12, "twist n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn positive_definite() {
        let mut rng = sampling::rng(42);
        let cmap = DeformedCmap::new(1, 1).unwrap();
        for _ in 0..50 {
            let g = cmap.metric_fs_at(&point(&mut rng, 1, 1)).unwrap();
            assert!(g.symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn domain_guard() {
        let cmap = DeformedCmap::new(0, 1).unwrap();
        assert!(matches!(cmap.metric_fs_at(&ChartPoint(vec![0.1, 0.0, 0.0, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn scale_fit_is_one() {
        let mut rng = sampling::rng(43);
        let cmap = DeformedCmap::new(1, 1).unwrap();
        let pts: Vec<ChartPoint> = (0..10).map(|_| point(&mut rng, 1, 1)).collect();
        let fit = fit_twist_scale(&cmap, &pts).unwrap();
        assert!((fit.scale - 1.0).abs() < 1e-12 && fit.spread < 1e-12);
    }

    #[test]
    fn heisenberg_structure() {
        let mut rng = sampling::rng(44);
        let cmap = DeformedCmap::new(1, 1).unwrap();
        let p = point(&mut rng, 1, 1);
        let res = heisenberg_residuals(&cmap, &p).unwrap();
        assert!(res.central < 1e-12 && res.killing < 1e-9, "{res:?}");
        // with [X, Y] = XY − YX the bracket closes onto −Q Z_k
        assert!(res.bracket_opposite_sign < 1e-12, "{res:?}");
        let basis = ParallelSection::basis(1);
        assert!(heisenberg_composition(&cmap, &basis[0], &basis[3], &p).unwrap() < 1e-12);
    }

    #[test]
    fn identity_lift_is_identity() {
        let cmap = DeformedCmap::new(1, 2).unwrap();
        let p = point(&mut sampling::rng(45), 1, 2);
        let a = PseudoUnitary::identity(1);
        let image = cmap.lift_isometry(&a).apply(&p.seed(1).unwrap()).unwrap();
        assert!(vector_values(&image).iter().zip(&p.0).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn lifted_isometries_preserve_metric() {
        let mut rng = sampling::rng(46);
        for k in 0..3 {
            let cmap = DeformedCmap::new(1, k).unwrap();
            for _ in 0..3 {
                let a = PseudoUnitary::random(&mut rng, 1);
                PseudoUnitary::new(a.0.clone()).unwrap();
                let p = point(&mut rng, 1, k);
                assert!(isometry_residual(&cmap, &a, &p).unwrap() < 1e-8);
            }
        }
        let bad = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(PseudoUnitary::new(bad).is_err());
    }

    #[test]
    fn rotation_is_hamiltonian_and_killing() {
        let mut rng = sampling::rng(47);
        let cmap = DeformedCmap::new(1, 1).unwrap();
        let p = point(&mut rng, 1, 1);
        let lift = cmap.rotation_lift();
        let tw = cmap.twist().symmetry_twist(&lift, &p).unwrap();
        assert!(tw.hamiltonian_residual < 1e-10);
        assert!((tw.hamiltonian - cmap.rotation_hamiltonian(&p).unwrap()).abs() < 1e-10);
        let killing =
            geometry::lie_derivative_metric(&cmap.rotation_killing_field(), &cmap.metric_field(), &p).unwrap();
        assert!(max_abs(&killing) < 1e-9);
    }

    #[test]
    fn einstein_universal_hypermultiplet() {
        let mut rng = sampling::rng(48);
        let cmap = DeformedCmap::new(0, 0).unwrap();
        let a = einstein_fit(&cmap, &point(&mut rng, 0, 0)).unwrap();
        let b = einstein_fit(&cmap, &point(&mut rng, 0, 0)).unwrap();
        assert!(a.lambda < 0.0 && a.residual < 1e-7 && (a.lambda - b.lambda).abs() < 1e-7, "{a:?} {b:?}");
    }
}
