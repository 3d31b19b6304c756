//! Rigid c-map data on `TM̃` and the twist that carries it to `N`.
//!
//! The rigid chart uses coordinates `(X, r, w_0, …, w_n, θ)`, flattened to
//! `4n + 4` reals with each `w_i` split into real and imaginary parts. The
//! `w_i` are coefficients in the parallel frame, so the tautological section
//! reads `Φ = Σ w_i s_i + c.c.` and `∇Φ = Σ dw_i ⊗ s_i + c.c.`. In the flat
//! coordinates `(z, w)` of `C^{n,1} ⊕ C^{n,1}` the hyperkähler structure is
//! constant, and the chart quantities are its pullbacks.
//!
//! The twisted chart on `N` has the same layout with `θ` replaced by `t`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    self, d_one_form_jets, d_two_form_jets, jacobian_jets, max_abs, values, vector_values, ChartPoint, FieldFn,
    JetMatrix, VectorField,
};
use crate::jet::{ComplexJet, Jet};
use crate::psk::{raise_order, ComplexHyperbolic};
use crate::vphs::Vphs;

/// Deformation parameter `k` of the one-loop c-map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Deformation(pub u32);

impl Deformation {
    pub fn value(self) -> f64 {
        f64::from(self.0)
    }

    /// Rejects radii with `r² ≤ 2k`.
    pub fn check_radius(self, r: f64) -> Result<f64> {
        let gap = r * r - 2.0 * self.value();
        if gap <= 1e-8 {
            return Err(Error::Domain(format!("r² − 2k = {gap} is not positive")));
        }
        Ok(gap)
    }
}

/// A parallel section `Σ a_i s_i + c.c.` of the flat real bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelSection(pub Vec<Complex64>);

impl ParallelSection {
    /// The `2n + 2` real basis sections `s_i + s̄_i` and `i s_i − i s̄_i`.
    pub fn basis(n: usize) -> Vec<ParallelSection> {
        let mut out = Vec::with_capacity(2 * n + 2);
        for i in 0..=n {
            for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut a = vec![Complex64::new(0.0, 0.0); n + 1];
                a[i] = unit;
                out.push(ParallelSection(a));
            }
        }
        out
    }

    /// Coefficients `(a, ā)` in the parallel frame.
    pub fn coefficients(&self) -> DVector<Complex64> {
        let m = self.0.len();
        DVector::from_fn(2 * m, |c, _| if c < m { self.0[c] } else { self.0[c - m].conj() })
    }

    pub fn plus(&self, other: &ParallelSection) -> ParallelSection {
        ParallelSection(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Chart on `TM̃` carrying the rigid c-map hyperkähler structure.
#[derive(Debug, Clone)]
pub struct RigidChart {
    model: ComplexHyperbolic,
    vphs: Vphs,
    parallel_pairing: DMatrix<Complex64>,
}

/// Values of the hyperkähler structure at one point.
#[derive(Debug, Clone)]
pub struct HyperKahler {
    pub metric: DMatrix<f64>,
    pub structures: [DMatrix<f64>; 3],
    pub forms: [DMatrix<f64>; 3],
}

fn congruence(jac: &JetMatrix, m: &DMatrix<f64>) -> JetMatrix {
    let rows = jac.len();
    let d = jac[0].len();
    let zero = jac[0][0].zero_like();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mut acc = zero.clone();
                    for a in 0..rows {
                        for b in 0..rows {
                            let c = m[(a, b)];
                            if c != 0.0 {
                                acc += &(&jac[a][i] * &jac[b][j]) * c;
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

impl RigidChart {
    pub fn new(model: ComplexHyperbolic) -> Result<Self> {
        let vphs = Vphs::new(model);
        let parallel_pairing = vphs.parallel_pairing(&vec![0.0; model.base_dim()])?;
        Ok(RigidChart { model, vphs, parallel_pairing })
    }

    pub fn model(&self) -> &ComplexHyperbolic {
        &self.model
    }

    pub fn vphs(&self) -> &Vphs {
        &self.vphs
    }

    /// `Q` in the parallel frame `(s_0..s_n, s̄_0..s̄_n)`.
    pub fn parallel_pairing(&self) -> &DMatrix<Complex64> {
        &self.parallel_pairing
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn dim(&self) -> usize {
        4 * self.n() + 4
    }

    pub fn r_index(&self) -> usize {
        2 * self.n()
    }

    /// Index of `Re w_i`; `Im w_i` follows it.
    pub fn w_index(&self, i: usize) -> usize {
        2 * self.n() + 1 + 2 * i
    }

    /// Index of the fibre angle `θ` (or `t` on the twisted chart).
    pub fn angle_index(&self) -> usize {
        4 * self.n() + 3
    }

    fn is_fibre(&self, c: usize) -> bool {
        c > self.r_index() && c < self.angle_index()
    }

    /// Rigid index of a cone-chart index.
    pub fn from_cone_index(&self, c: usize) -> usize {
        if c == self.model.angle_index() {
            self.angle_index()
        } else {
            c
        }
    }

    pub fn cone_point(&self, p: &ChartPoint) -> ChartPoint {
        let mut c = p.0[..=self.r_index()].to_vec();
        c.push(p.0[self.angle_index()]);
        ChartPoint(c)
    }

    pub fn base<'a>(&self, p: &'a ChartPoint) -> &'a [f64] {
        &p.0[..self.model.base_dim()]
    }

    /// Cone coordinates `(X, r, θ)` picked out of rigid-chart jets.
    fn cone_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let mut c = x[..=self.r_index()].to_vec();
        c.push(x[self.angle_index()].clone());
        c
    }

    fn fibre_jets(&self, x: &[Jet]) -> Vec<ComplexJet> {
        (0..=self.n()).map(|i| ComplexJet::new(x[self.w_index(i)].clone(), x[self.w_index(i) + 1].clone())).collect()
    }

    /// Flat coordinates `(Re z_0, Im z_0, …, Re w_0, Im w_0, …)`.
    pub fn flat_coords(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let mut f = self.model.embedding_real(&self.cone_jets(x))?;
        f.extend(x[self.r_index() + 1..self.angle_index()].iter().cloned());
        Ok(f)
    }

    pub fn flat_metric(&self) -> DMatrix<f64> {
        let half = self.model.ambient_signs();
        let m = half.len();
        DMatrix::from_fn(2 * m, 2 * m, |a, b| if a == b { half[a % m] } else { 0.0 })
    }

    /// `I_1 = (i, −i)`, `I_2 (z, w) = (−w, z)` and `I_3 = I_1 I_2` on flat coordinates.
    pub fn flat_structures(&self) -> [DMatrix<f64>; 3] {
        let m = 2 * self.n() + 2;
        let mut i1 = DMatrix::zeros(2 * m, 2 * m);
        for pair in 0..m {
            let (u, v) = (2 * pair, 2 * pair + 1);
            let s = if pair < m / 2 { 1.0 } else { -1.0 };
            i1[(v, u)] = s;
            i1[(u, v)] = -s;
        }
        let mut i2 = DMatrix::zeros(2 * m, 2 * m);
        for a in 0..m {
            i2[(a, m + a)] = -1.0;
            i2[(m + a, a)] = 1.0;
        }
        let i3 = &i1 * &i2;
        [i1, i2, i3]
    }

    pub fn jacobian(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        Ok(values(&jacobian_jets(&self.flat_coords(&p.seed(1)?)?)?))
    }

    /// `ĝ` as jets of the same order as `x`.
    pub fn metric(&self, x: &[Jet]) -> Result<JetMatrix> {
        let jac = jacobian_jets(&self.flat_coords(&raise_order(x)?)?)?;
        Ok(congruence(&jac, &self.flat_metric()))
    }

    pub fn metric_field(&self) -> impl geometry::MetricField + '_ {
        FieldFn::new(self.dim(), move |x: &[Jet]| self.metric(x))
    }

    /// `ω̂_j = ĝ(I_j ·, ·)` as jets, pulled back from the constant flat form.
    pub fn kahler_form(&self, j: usize, x: &[Jet]) -> Result<JetMatrix> {
        let flat = self.flat_structures()[j].transpose() * self.flat_metric();
        let jac = jacobian_jets(&self.flat_coords(&raise_order(x)?)?)?;
        Ok(congruence(&jac, &flat))
    }

    pub fn hyperkahler(&self, p: &ChartPoint) -> Result<HyperKahler> {
        let jac = self.jacobian(p)?;
        let jinv = geometry::invert(&jac)?;
        let flat_g = self.flat_metric();
        let metric = jac.transpose() * &flat_g * &jac;
        let structures = self.flat_structures().map(|i| &jinv * i * &jac);
        let forms = structures.clone().map(|i| i.transpose() * &metric);
        Ok(HyperKahler { metric, structures, forms })
    }

    /// Working-frame value of `∇Φ(∂_c)` for every chart direction.
    pub fn fibre_directions(&self, p: &ChartPoint) -> Result<Vec<DVector<Complex64>>> {
        let base = self.base(p);
        let rank = self.vphs.rank();
        (0..self.dim())
            .map(|c| {
                if !self.is_fibre(c) {
                    return Ok(DVector::zeros(rank));
                }
                let off = c - self.w_index(0);
                let mut a = vec![Complex64::new(0.0, 0.0); self.n() + 1];
                a[off / 2] = if off.is_multiple_of(2) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
                self.vphs.from_parallel(base, &a)
            })
            .collect()
    }

    /// Real symmetric or antisymmetric chart matrix `Re B(∇Φ(∂_a), ∇Φ(∂_b))`.
    pub fn fibre_form(&self, p: &ChartPoint, form: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
        let e = self.fibre_directions(p)?;
        let d = self.dim();
        Ok(DMatrix::from_fn(d, d, |a, b| (e[a].transpose() * form * &e[b])[(0, 0)].re))
    }

    /// `Q(∇Φ, ∇Φ)` as a constant 2-form.
    pub fn fibre_pairing(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.fibre_form(p, &self.vphs.pairing_at(self.base(p))?)
    }

    /// `Re Q(Φ, v)` for a parallel-frame coefficient vector `v`, as a jet.
    pub fn pairing_with_tautological(&self, x: &[Jet], v: &DVector<Complex64>) -> Jet {
        let w = self.fibre_jets(x);
        let m = w.len();
        let qv = &self.parallel_pairing * v;
        let mut acc = x[0].zero_like();
        for (i, wi) in w.iter().enumerate() {
            acc += &wi.mul_c(qv[i].re, qv[i].im).re;
            acc += &wi.conj().mul_c(qv[m + i].re, qv[m + i].im).re;
        }
        acc
    }

    /// Embeds a cone-chart matrix into the rigid chart.
    pub fn embed_cone_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                out[(self.from_cone_index(a), self.from_cone_index(b))] = m[(a, b)];
            }
        }
        out
    }

    pub fn cone_metric(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let c = self.cone_point(p);
        Ok(self.embed_cone_matrix(&values(&self.model.cone_metric(&c.seed(1)?)?)))
    }

    /// `ω̃ = g̃(I·, ·)` from the cone's complex structure and metric.
    pub fn cone_kahler_form(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let c = self.cone_point(p);
        let g = values(&self.model.cone_metric(&c.seed(1)?)?);
        let i = values(&self.model.cone_complex_structure(&c.seed(2)?)?);
        Ok(self.embed_cone_matrix(&(i.transpose() * g)))
    }
}

/// Twist data `(Z, ω_H, f_H)` with `ω_H = d((f_H + k)φ + β)`.
#[derive(Debug, Clone)]
pub struct TwistData {
    rigid: RigidChart,
    k: Deformation,
}

impl TwistData {
    pub fn new(rigid: RigidChart, k: Deformation) -> Self {
        TwistData { rigid, k }
    }

    pub fn rigid(&self) -> &RigidChart {
        &self.rigid
    }

    pub fn k(&self) -> Deformation {
        self.k
    }

    /// `Z = −∂_θ`.
    pub fn fundamental_field(&self, x: &[Jet]) -> Vec<Jet> {
        let mut v = vec![x[0].zero_like(); self.rigid.dim()];
        v[self.rigid.angle_index()] = x[0].lift(-1.0);
        v
    }

    /// `f_H = −(r² + 2k)/2`.
    pub fn hamiltonian(&self, x: &[Jet]) -> Jet {
        &x[self.rigid.r_index()].square() * -0.5 - self.k.value()
    }

    /// Connection form `φ = −φ̃`.
    pub fn connection(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let rigid = &self.rigid;
        let (_, im) = rigid.model.chi(&rigid.cone_jets(x))?;
        let mut phi = vec![x[0].zero_like(); rigid.dim()];
        for (c, e) in im.iter().enumerate() {
            phi[rigid.from_cone_index(c)] = -e;
        }
        Ok(phi)
    }

    /// `β = −½ Q(Φ, ∇Φ)`.
    pub fn beta(&self, x: &[Jet]) -> Vec<Jet> {
        let rigid = &self.rigid;
        let m = rigid.n() + 1;
        (0..rigid.dim())
            .map(|c| {
                if !rigid.is_fibre(c) {
                    return x[0].zero_like();
                }
                let off = c - rigid.w_index(0);
                let unit = if off.is_multiple_of(2) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
                let mut v = DVector::zeros(2 * m);
                v[off / 2] = unit;
                v[m + off / 2] = unit.conj();
                rigid.pairing_with_tautological(x, &v) * -0.5
            })
            .collect()
    }

    /// `(f_H + k)φ + β`, whose differential is `ω_H`.
    pub fn potential(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let scale = self.hamiltonian(x) + self.k.value();
        let phi = self.connection(x)?;
        Ok(phi.iter().zip(self.beta(x)).map(|(p, b)| &(p * &scale) + &b).collect())
    }

    /// `ω_H = −ω̃ − Q(∇Φ, ∇Φ)` as jets, with `ω̃` pulled back from the ambient
    /// Kähler form.
    pub fn omega(&self, x: &[Jet]) -> Result<JetMatrix> {
        let rigid = &self.rigid;
        let d = rigid.dim();
        let mut flat = DMatrix::zeros(d, d);
        let signs = rigid.model.ambient_signs();
        for pair in 0..signs.len() / 2 {
            flat[(2 * pair, 2 * pair + 1)] = -signs[2 * pair];
            flat[(2 * pair + 1, 2 * pair)] = signs[2 * pair];
        }
        let jac = jacobian_jets(&rigid.flat_coords(&raise_order(x)?)?)?;
        let mut omega = congruence(&jac, &flat);
        let p = ChartPoint(vector_values(x));
        let fibre = rigid.fibre_pairing(&p)?;
        for a in 0..d {
            for b in 0..d {
                let shift = omega[a][b].lift(fibre[(a, b)]);
                omega[a][b] -= shift;
            }
        }
        Ok(omega)
    }

    fn radial(&self, p: &ChartPoint) -> Result<(f64, f64)> {
        let r = p.0[self.rigid.r_index()];
        Ok((r, self.k.check_radius(r)?))
    }

    /// `g_HZ = −dr² − r² φ̃² − Re h_L(∇Φ, ∇Φ)`.
    pub fn vertical_metric(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let rigid = &self.rigid;
        let r = p.0[rigid.r_index()];
        let phi = vector_values(&self.connection(&p.seed(1)?)?);
        let d = rigid.dim();
        let mut g = DMatrix::from_fn(d, d, |a, b| -r * r * phi[a] * phi[b]);
        g[(rigid.r_index(), rigid.r_index())] -= 1.0;
        Ok(g - rigid.fibre_form(p, &rigid.vphs.line_form())?)
    }

    /// `g_⊥ = r² g_M + Re (h_L ⊗ h_M)(∇Φ, ∇Φ)`.
    pub fn horizontal_metric(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let rigid = &self.rigid;
        let r = p.0[rigid.r_index()];
        let base = rigid.base(p);
        let mut g = DMatrix::zeros(rigid.dim(), rigid.dim());
        if base.is_empty() {
            return Ok(g + rigid.fibre_form(p, &rigid.vphs.tangent_form(base)?)?);
        }
        let gm = values(&rigid.model.base_metric(&Jet::seed(base, 1)?)?);
        for a in 0..base.len() {
            for b in 0..base.len() {
                g[(a, b)] = r * r * gm[(a, b)];
            }
        }
        Ok(g + rigid.fibre_form(p, &rigid.vphs.tangent_form(base)?)?)
    }

    /// ĝ-orthogonal projector onto `span{Z, I_1 Z, I_2 Z, I_3 Z}`.
    pub fn quaternionic_projector(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let hk = self.rigid.hyperkahler(p)?;
        let z = DVector::from_vec(vector_values(&self.fundamental_field(&p.seed(1)?)));
        let d = self.rigid.dim();
        let mut proj = DMatrix::zeros(d, d);
        let frame: Vec<DVector<f64>> = std::iter::once(z.clone()).chain(hk.structures.iter().map(|i| i * &z)).collect();
        for e in &frame {
            let ge = &hk.metric * e;
            let norm = e.dot(&ge);
            if norm.abs() < 1e-14 {
                return Err(Error::Singular("quaternionic span of Z"));
            }
            proj += e * ge.transpose() / norm;
        }
        Ok(proj)
    }

    /// `g_H = (g_⊥ − (r² + 2k)/(r² − 2k) g_HZ)/(r² − 2k)`.
    pub fn elementary_deformation(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let (r, gap) = self.radial(p)?;
        let ratio = (r * r + 2.0 * self.k.value()) / gap;
        Ok((self.horizontal_metric(p)? - self.vertical_metric(p)? * ratio) / gap)
    }
}

/// Residuals of the hyperkähler structure and the twist data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidResiduals {
    pub quaternion_relations: f64,
    pub compatibility: f64,
    pub closure: f64,
    pub first_form_split: f64,
    pub metric_split: f64,
    pub hamiltonian: f64,
    pub twist_form_closed: f64,
    pub twist_form_exact: f64,
    pub vertical_projection: f64,
    pub horizontal_projection: f64,
    pub fibre_pairing_constant: f64,
    /// Signature of `ĝ` as (positive, negative) counts.
    pub signature: (usize, usize),
    /// Smallest eigenvalue of `g_H`.
    pub deformation_min_eigenvalue: f64,
}

impl RigidResiduals {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("quaternion-relations", self.quaternion_relations),
            ("hyperkahler-compatibility", self.compatibility),
            ("hyperkahler-forms-closed", self.closure),
            ("first-kahler-form-split", self.first_form_split),
            ("rigid-metric-split", self.metric_split),
            ("twist-data-hamiltonian", self.hamiltonian),
            ("twist-form-closed", self.twist_form_closed),
            ("twist-form-exact", self.twist_form_exact),
            ("quaternionic-span-metric", self.vertical_projection),
            ("orthogonal-complement-metric", self.horizontal_projection),
            ("fibre-pairing-constant", self.fibre_pairing_constant),
        ]
    }
}

pub fn verify_rigid(data: &TwistData, p: &ChartPoint) -> Result<RigidResiduals> {
    let rigid = data.rigid();
    let d = rigid.dim();
    let hk = rigid.hyperkahler(p)?;
    let id = DMatrix::<f64>::identity(d, d);
    let [i1, i2, i3] = &hk.structures;
    let mut quaternion_relations = max_abs(&(i1 * i2 - i3));
    let mut compatibility: f64 = 0.0;
    for i in &hk.structures {
        quaternion_relations = quaternion_relations.max(max_abs(&(i * i + &id)));
        compatibility = compatibility.max(max_abs(&(i.transpose() * &hk.metric * i - &hk.metric)));
    }
    let x2 = p.seed(2)?;
    let mut closure: f64 = 0.0;
    for j in 0..3 {
        closure = closure.max(geometry::max_abs_slice(&d_two_form_jets(&rigid.kahler_form(j, &p.seed(1)?)?)));
    }
    let omega_h = data.omega(&x2)?;
    let omega_h_v = values(&omega_h);
    let cone_omega = rigid.cone_kahler_form(p)?;
    let first_form_split = max_abs(&(&hk.forms[0] - (&cone_omega * 2.0 + &omega_h_v)));
    let griffiths = rigid.fibre_form(
        p,
        &Vphs::hermitian_form(&rigid.vphs.pairing_at(rigid.base(p))?, &rigid.vphs.frame().griffiths_operator()),
    )?;
    let metric_split = max_abs(&(&hk.metric - rigid.cone_metric(p)? - griffiths));

    let x1 = p.seed(1)?;
    let z = vector_values(&data.fundamental_field(&x1));
    let df = data.hamiltonian(&x1).gradient();
    let contraction = omega_h_v.transpose() * DVector::from_vec(z);
    let hamiltonian = (0..d).fold(0.0f64, |m, c| m.max((contraction[c] + df[c]).abs()));
    let twist_form_closed = geometry::max_abs_slice(&d_two_form_jets(&data.omega(&x1)?));
    let twist_form_exact = max_abs(&(d_one_form_jets(&data.potential(&x1)?) - &omega_h_v));

    let proj = data.quaternionic_projector(p)?;
    let comp = &id - &proj;
    let vertical_projection = max_abs(&(proj.transpose() * &hk.metric * &proj - data.vertical_metric(p)?));
    let horizontal_projection = max_abs(&(comp.transpose() * &hk.metric * &comp - data.horizontal_metric(p)?));
    let fibre_pairing_constant = max_abs(
        &(rigid.fibre_pairing(p)?
            - rigid.fibre_pairing(&ChartPoint(
                p.0.iter().enumerate().map(|(c, v)| if c < rigid.model.base_dim() { 0.0 } else { *v }).collect(),
            ))?),
    );
    let signature = geometry::signature(&hk.metric);
    let gh = data.elementary_deformation(p)?;
    let deformation_min_eigenvalue = gh.symmetric_eigen().eigenvalues.min();
    Ok(RigidResiduals {
        quaternion_relations,
        compatibility,
        closure,
        first_form_split,
        metric_split,
        hamiltonian,
        twist_form_closed,
        twist_form_exact,
        vertical_projection,
        horizontal_projection,
        fibre_pairing_constant,
        signature,
        deformation_min_eigenvalue,
    })
}

/// Hamiltonian data of the vertical translation `v_s` by a parallel section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionHamiltonian {
    /// `f_s = Q(s, Φ)` at the point.
    pub value: f64,
    /// `ι_{v_s} ω_H + d f_s`.
    pub residual: f64,
    /// `L_{v_s} ĝ`.
    pub killing: f64,
    /// Largest Lie derivative of `f_H`, `φ̃` and the `ω̂_j` along `v_s`.
    pub invariance: f64,
}

/// Rigid-chart components of `v_s`.
pub fn section_field(rigid: &RigidChart, s: &ParallelSection) -> Vec<f64> {
    let mut v = vec![0.0; rigid.dim()];
    for (i, a) in s.0.iter().enumerate() {
        v[rigid.w_index(i)] = a.re;
        v[rigid.w_index(i) + 1] = a.im;
    }
    v
}

pub fn hamiltonian_of_section(data: &TwistData, s: &ParallelSection, p: &ChartPoint) -> Result<SectionHamiltonian> {
    let rigid = data.rigid();
    let x1 = p.seed(1)?;
    let field: Vec<Jet> = section_field(rigid, s).iter().map(|c| x1[0].lift(*c)).collect();
    let fs = -rigid.pairing_with_tautological(&x1, &s.coefficients());
    let omega = values(&data.omega(&p.seed(2)?)?);
    let v = DVector::from_vec(vector_values(&field));
    let contraction = omega.transpose() * &v;
    let grad = fs.gradient();
    let residual = (0..rigid.dim()).fold(0.0f64, |m, c| m.max((contraction[c] + grad[c]).abs()));
    let killing = max_abs(&geometry::lie_derivative_tensor(&field, &rigid.metric(&x1)?)?);
    let mut invariance = data.hamiltonian(&x1).gradient().iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs();
    invariance =
        invariance.max(geometry::max_abs_slice(&geometry::lie_derivative_one_form(&field, &data.connection(&x1)?)));
    for j in 0..3 {
        invariance = invariance.max(max_abs(&geometry::lie_derivative_tensor(&field, &rigid.kahler_form(j, &x1)?)?));
    }
    Ok(SectionHamiltonian { value: fs.value(), residual, killing, invariance })
}

/// A symmetric 2-tensor on the rigid chart split along `Z` and `φ`:
/// `T = T_basic + φ ⊗ B + B ⊗ φ + C φ ⊗ φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTensor {
    pub basic: DMatrix<f64>,
    pub mixed: DVector<f64>,
    pub vertical: f64,
}

/// A vector split as `Y = Y_B^φ + φ(Y) Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector {
    pub basic: DVector<f64>,
    pub vertical: f64,
}

/// Contraction identities before and after the twist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionResiduals(pub [f64; 8]);

impl ContractionResiduals {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        const NAMES: [&str; 8] = [
            "basic-form-on-horizontal-lift",
            "basic-form-on-twisted-horizontal-lift",
            "connection-on-horizontal-lift",
            "twisted-connection-on-twisted-horizontal-lift",
            "basic-form-on-fundamental-field",
            "basic-form-on-twisted-fundamental-field",
            "connection-on-fundamental-field",
            "twisted-connection-on-twisted-fundamental-field",
        ];
        NAMES.iter().copied().zip(self.0).collect()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Result of twisting an invariant vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryTwist {
    /// `f_Y = ((f + k)φ + β)(Y)`.
    pub hamiltonian: f64,
    /// `tw(Y)` on the twisted chart.
    pub twisted: DVector<f64>,
    /// `ι_Y ω_H + d f_Y`.
    pub hamiltonian_residual: f64,
    /// `q_* Y − (tw(Y) + f_Y Z_k)`.
    pub quotient_residual: f64,
}

/// The twist correspondence from the rigid chart to `N` with
/// `φ_k = dt + k Im(Σ X̄_i dX_i)/(1 − |X|²)` and `Z_k = ∂_t`.
#[derive(Debug, Clone)]
pub struct Twist {
    data: TwistData,
}

impl Twist {
    pub fn new(data: TwistData) -> Self {
        Twist { data }
    }

    pub fn data(&self) -> &TwistData {
        &self.data
    }

    fn rigid(&self) -> &RigidChart {
        &self.data.rigid
    }

    /// `φ_k` as jets on the twisted chart.
    pub fn twisted_connection(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let rigid = self.rigid();
        let k = self.data.k.value();
        let pot = rigid.model.potential_form(x)?;
        let mut out = vec![x[0].zero_like(); rigid.dim()];
        for (c, e) in pot.iter().enumerate() {
            out[c] = e * k;
        }
        out[rigid.angle_index()] = x[0].lift(1.0);
        Ok(out)
    }

    fn hamiltonian_value(&self, p: &ChartPoint) -> Result<f64> {
        let f = self.data.hamiltonian(&p.seed(1)?).value();
        if f.abs() < 1e-12 {
            return Err(Error::Singular("twist hamiltonian"));
        }
        Ok(f)
    }

    /// `tw(φ) = −(φ_k + β)/f` at a twisted-chart point.
    pub fn twisted_form(&self, q: &ChartPoint) -> Result<DVector<f64>> {
        let x = q.seed(1)?;
        let f = self.hamiltonian_value(q)?;
        let phik = vector_values(&self.twisted_connection(&x)?);
        let beta = vector_values(&self.data.beta(&x));
        Ok(DVector::from_fn(self.rigid().dim(), |c, _| -(phik[c] + beta[c]) / f))
    }

    fn values_at(&self, p: &ChartPoint) -> Result<(DVector<f64>, DVector<f64>)> {
        let x = p.seed(1)?;
        let z = DVector::from_vec(vector_values(&self.data.fundamental_field(&x)));
        let phi = DVector::from_vec(vector_values(&self.data.connection(&x)?));
        Ok((z, phi))
    }

    /// Horizontal lift `∂_b − φ_b Z` of each basic coordinate direction.
    fn horizontal_lifts(&self, p: &ChartPoint) -> Result<Vec<DVector<f64>>> {
        let (z, phi) = self.values_at(p)?;
        let d = self.rigid().dim();
        Ok((0..d)
            .map(|b| {
                let mut e = DVector::zeros(d);
                if b != self.rigid().angle_index() {
                    e[b] = 1.0;
                    e -= &z * phi[b];
                }
                e
            })
            .collect())
    }

    pub fn split_tensor(&self, t: &DMatrix<f64>, p: &ChartPoint) -> Result<SplitTensor> {
        let (z, _) = self.values_at(p)?;
        let lifts = self.horizontal_lifts(p)?;
        let d = self.rigid().dim();
        let basic = DMatrix::from_fn(d, d, |a, b| (lifts[a].transpose() * t * &lifts[b])[(0, 0)]);
        let mixed = DVector::from_fn(d, |b, _| (z.transpose() * t * &lifts[b])[(0, 0)]);
        let vertical = (z.transpose() * t * &z)[(0, 0)];
        Ok(SplitTensor { basic, mixed, vertical })
    }

    /// `tw(T) = T_basic + tw(φ) ⊗ B + B ⊗ tw(φ) + C tw(φ)²` at a twisted-chart point.
    pub fn twist_tensor(&self, t: &SplitTensor, q: &ChartPoint) -> Result<DMatrix<f64>> {
        let tphi = self.twisted_form(q)?;
        Ok(&t.basic + &tphi * t.mixed.transpose() + &t.mixed * tphi.transpose() + &tphi * tphi.transpose() * t.vertical)
    }

    pub fn split_vector(&self, y: &[f64], p: &ChartPoint) -> Result<SplitVector> {
        let (z, phi) = self.values_at(p)?;
        let y = DVector::from_column_slice(y);
        let vertical = phi.dot(&y);
        let mut basic = y - z * vertical;
        basic[self.rigid().angle_index()] = 0.0;
        Ok(SplitVector { basic, vertical })
    }

    /// `tw(Y) = Y_B^{φ_k} − β(Y_B) Z_k − f φ(Y) Z_k`.
    pub fn twist_vector(&self, y: &SplitVector, q: &ChartPoint) -> Result<DVector<f64>> {
        let x = q.seed(1)?;
        let phik = DVector::from_vec(vector_values(&self.twisted_connection(&x)?));
        let beta = DVector::from_vec(vector_values(&self.data.beta(&x)));
        let f = self.hamiltonian_value(q)?;
        let mut out = y.basic.clone();
        out[self.rigid().angle_index()] = -phik.dot(&y.basic) - beta.dot(&y.basic) - f * y.vertical;
        Ok(out)
    }

    /// Checks that a basic 1-form `alpha` and a basic vector `x` have the same
    /// contractions with `φ`, `Z` and the horizontal lift before and after
    /// the twist.
    pub fn contraction_identities(&self, p: &ChartPoint, alpha: &[f64], x: &[f64]) -> Result<ContractionResiduals> {
        let d = self.rigid().dim();
        let angle = self.rigid().angle_index();
        let mut alpha = DVector::from_column_slice(alpha);
        alpha[angle] = 0.0;
        let mut xb = DVector::from_column_slice(x);
        xb[angle] = 0.0;
        let (z, phi) = self.values_at(p)?;
        let lifts = self.horizontal_lifts(p)?;
        let lift: DVector<f64> = (0..d).fold(DVector::zeros(d), |acc, b| acc + &lifts[b] * xb[b]);
        let tphi = self.twisted_form(p)?;
        let tw_lift = self.twist_vector(&self.split_vector(lift.as_slice(), p)?, p)?;
        let tw_z = self.twist_vector(&self.split_vector(z.as_slice(), p)?, p)?;
        let expected = alpha.dot(&xb);
        Ok(ContractionResiduals([
            (alpha.dot(&lift) - expected).abs(),
            (alpha.dot(&tw_lift) - expected).abs(),
            phi.dot(&lift).abs(),
            tphi.dot(&tw_lift).abs(),
            alpha.dot(&z).abs(),
            alpha.dot(&tw_z).abs(),
            (phi.dot(&z) - 1.0).abs(),
            (tphi.dot(&tw_z) - 1.0).abs(),
        ]))
    }

    /// Twists an invariant vector field after checking `L_Y f = L_Y φ = L_Y β = 0`.
    pub fn symmetry_twist(&self, y: &dyn VectorField, p: &ChartPoint) -> Result<SymmetryTwist> {
        let data = &self.data;
        let rigid = self.rigid();
        let x1 = p.seed(1)?;
        let yj = y.components(&x1)?;
        let yv = vector_values(&yj);
        let invariance = [
            data.hamiltonian(&x1).gradient().iter().zip(&yv).map(|(a, b)| a * b).sum::<f64>().abs(),
            geometry::max_abs_slice(&geometry::lie_derivative_one_form(&yj, &data.connection(&x1)?)),
            geometry::max_abs_slice(&geometry::lie_derivative_one_form(&yj, &data.beta(&x1))),
        ];
        let worst = invariance.iter().fold(0.0f64, |m, v| m.max(*v));
        if worst > 1e-8 {
            return Err(Error::Precondition(format!("field is not invariant (Lie derivative {worst:e})")));
        }
        let pot = data.potential(&x1)?;
        let mut fy = x1[0].zero_like();
        for (a, b) in pot.iter().zip(&yj) {
            fy += &(a * b);
        }
        let omega = values(&data.omega(&p.seed(2)?)?);
        let contraction = omega.transpose() * DVector::from_column_slice(&yv);
        let grad = fy.gradient();
        let hamiltonian_residual = (0..rigid.dim()).fold(0.0f64, |m, c| m.max((contraction[c] + grad[c]).abs()));
        let twisted = self.twist_vector(&self.split_vector(&yv, p)?, p)?;
        let angle = rigid.angle_index();
        let mut pushed = DVector::from_column_slice(&yv);
        pushed[angle] = -data.k.value() * yv[angle];
        let mut rhs = twisted.clone();
        rhs[angle] += fy.value();
        let quotient_residual = (pushed - rhs).amax();
        Ok(SymmetryTwist { hamiltonian: fy.value(), twisted, hamiltonian_residual, quotient_residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn data(n: usize, k: u32) -> TwistData {
        TwistData::new(RigidChart::new(ComplexHyperbolic::new(n).unwrap()).unwrap(), Deformation(k))
    }

    #[test]
    fn flat_structures_are_quaternionic() {
        let rigid = RigidChart::new(ComplexHyperbolic::new(1).unwrap()).unwrap();
        let [i1, i2, i3] = rigid.flat_structures();
        let id = DMatrix::<f64>::identity(8, 8);
        assert_eq!(&i1 * &i1, -&id);
        assert_eq!(&i2 * &i2, -&id);
        assert_eq!(&i3 * &i3, -&id);
        assert_eq!(&i2 * &i1, -&i3);
    }

    #[test]
    fn rigid_structure_at_random_points() {
        let mut rng = sampling::rng(31);
        for n in 0..3 {
            for k in 0..3 {
                let d = data(n, k);
                let p = ChartPoint(sampling::fibre_point(&mut rng, n, k));
                let res = verify_rigid(&d, &p).unwrap();
                for (name, v) in res.entries() {
                    assert!(v < 1e-9, "{name} = {v} (n={n}, k={k})");
                }
                assert_eq!(res.signature, (4 * n, 4));
                assert!(res.deformation_min_eigenvalue > 0.0);
            }
        }
    }

    #[test]
    fn deformation_at_k_zero_has_unit_ratio() {
        let d = data(1, 0);
        let p = ChartPoint(sampling::fibre_point(&mut sampling::rng(4), 1, 0));
        let r2 = p.0[2] * p.0[2];
        let expected = (d.horizontal_metric(&p).unwrap() - d.vertical_metric(&p).unwrap()) / r2;
        assert!(max_abs(&(d.elementary_deformation(&p).unwrap() - expected)) < 1e-14);
    }

    #[test]
    fn small_radius_is_rejected() {
        let d = data(0, 1);
        let p = ChartPoint(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(d.elementary_deformation(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn sections_are_hamiltonian_and_killing() {
        let mut rng = sampling::rng(32);
        let d = data(1, 1);
        for s in ParallelSection::basis(1) {
            let p = ChartPoint(sampling::fibre_point(&mut rng, 1, 1));
            let h = hamiltonian_of_section(&d, &s, &p).unwrap();
            assert!(h.residual < 1e-10 && h.killing < 1e-9 && h.invariance < 1e-9, "{h:?}");
        }
    }

    #[test]
    fn section_through_itself_has_zero_hamiltonian() {
        let d = data(1, 0);
        let rigid = d.rigid();
        let s = ParallelSection(vec![Complex64::new(0.4, -0.2), Complex64::new(0.1, 0.3)]);
        let mut p = sampling::fibre_point(&mut sampling::rng(5), 1, 0);
        for (i, a) in s.0.iter().enumerate() {
            p[rigid.w_index(i)] = a.re;
            p[rigid.w_index(i) + 1] = a.im;
        }
        let h = hamiltonian_of_section(&d, &s, &ChartPoint(p)).unwrap();
        assert!(h.value.abs() < 1e-15);
    }

    #[test]
    fn twist_rules() {
        let mut rng = sampling::rng(33);
        let tw = Twist::new(data(1, 2));
        let rigid = tw.data().rigid().clone();
        let p = ChartPoint(sampling::fibre_point(&mut rng, 1, 2));
        // dr is basic and survives unchanged
        let mut dr = DMatrix::zeros(8, 8);
        dr[(2, 2)] = 1.0;
        let t = tw.twist_tensor(&tw.split_tensor(&dr, &p).unwrap(), &p).unwrap();
        assert!(max_abs(&(t - &dr)) < 1e-15);
        // Z goes to −f Z_k
        let z = vector_values(&tw.data().fundamental_field(&p.seed(1).unwrap()));
        let twz = tw.twist_vector(&tw.split_vector(&z, &p).unwrap(), &p).unwrap();
        let f = tw.data().hamiltonian(&p.seed(1).unwrap()).value();
        let mut expected = DVector::zeros(8);
        expected[rigid.angle_index()] = -f;
        assert!((twz - expected).amax() < 1e-14);
        let alpha = sampling::direction(&mut rng, 8);
        let x = sampling::direction(&mut rng, 8);
        let c = tw.contraction_identities(&p, &alpha, &x).unwrap();
        assert!(c.max() < 1e-12, "{c:?}");
    }

    #[test]
    fn fundamental_field_twist_has_shifted_hamiltonian() {
        let tw = Twist::new(data(1, 1));
        let p = ChartPoint(sampling::fibre_point(&mut sampling::rng(34), 1, 1));
        let z = geometry::VectorFn::new(8, |x: &[Jet]| Ok(tw.data().fundamental_field(x)));
        let res = tw.symmetry_twist(&z, &p).unwrap();
        let f = tw.data().hamiltonian(&p.seed(1).unwrap()).value();
        assert!((res.hamiltonian - (f + 1.0)).abs() < 1e-12);
        assert!(res.hamiltonian_residual < 1e-10 && res.quotient_residual < 1e-12);
        assert!((res.twisted[7] + f).abs() < 1e-12);
    }

    #[test]
    fn non_invariant_field_is_rejected() {
        let tw = Twist::new(data(1, 1));
        let p = ChartPoint(sampling::fibre_point(&mut sampling::rng(35), 1, 1));
        let radial = geometry::VectorFn::new(8, |x: &[Jet]| {
            let mut v = vec![x[0].zero_like(); 8];
            v[2] = x[0].lift(1.0);
            Ok(v)
        });
        assert!(matches!(tw.symmetry_twist(&radial, &p), Err(Error::Precondition(_))));
    }
}
