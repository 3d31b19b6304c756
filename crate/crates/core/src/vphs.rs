//! Weight-3 variation of polarised Hodge structure over `CH^n`.
//!
//! Sections of `E_C = L ⊕ L⊗T^{1,0} ⊕ L̄⊗T^{0,1} ⊕ L̄` are coefficient vectors
//! in the working frame
//!
//! ```text
//! index 0        σ                 type (3,0)
//! 1 ..= n        σ ⊗ ∂_{X_j}        type (2,1)
//! n+1 ..= 2n     σ̄ ⊗ ∂_{X̄_j}        type (1,2)
//! 2n+1           σ̄                 type (0,3)
//! ```
//!
//! where `σ` is normalised by `h_L(σ̄, σ) = 1`. The Gauß–Manin connection
//! acts as `∇_{∂_c} e_a = Σ_b Γ_c[b][a] e_b` for each real base coordinate
//! `c`. Parallel sections `s_0, …, s_n, s̄_0, …, s̄_n` are the columns of the
//! frame matrix returned by [`Vphs::parallel_frame`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;
use crate::geometry::{vector_values, ChartPoint};
use crate::jet::{ComplexJet, Jet};
use crate::psk::ComplexHyperbolic;

pub type ComplexJetMatrix = Vec<Vec<ComplexJet>>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hodge type `(p, q)` of a working-frame index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HodgeType {
    pub p: u8,
    pub q: u8,
}

impl HodgeType {
    /// `i^{p−q}`.
    pub fn weil_factor(self) -> Complex64 {
        I.powi(self.p as i32 - self.q as i32)
    }

    /// `sign(p − q) i`.
    pub fn griffiths_factor(self) -> Complex64 {
        if self.p > self.q {
            I
        } else {
            -I
        }
    }
}

/// Layout of the working frame for a given `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HodgeFrame {
    n: usize,
}

impl HodgeFrame {
    pub fn new(n: usize) -> Self {
        HodgeFrame { n }
    }

    pub fn rank(&self) -> usize {
        2 * self.n + 2
    }

    pub fn hodge_type(&self, a: usize) -> HodgeType {
        let n = self.n;
        match a {
            0 => HodgeType { p: 3, q: 0 },
            _ if a <= n => HodgeType { p: 2, q: 1 },
            _ if a <= 2 * n => HodgeType { p: 1, q: 2 },
            _ => HodgeType { p: 0, q: 3 },
        }
    }

    /// Index of the conjugate frame vector.
    pub fn conjugate_index(&self, a: usize) -> usize {
        let n = self.n;
        match a {
            0 => 2 * n + 1,
            _ if a <= n => a + n,
            _ if a <= 2 * n => a - n,
            _ => 0,
        }
    }

    /// Coefficients of the conjugate section.
    pub fn conjugate(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_fn(self.rank(), |a, _| v[self.conjugate_index(a)].conj())
    }

    /// Projector onto the summand of type `(p, 3 − p)`.
    pub fn projector(&self, p: u8) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rank(), self.rank(), |a, b| {
            if a == b && self.hodge_type(a).p == p {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn griffiths_operator(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rank(), self.rank(), |a, b| {
            if a == b {
                self.hodge_type(a).griffiths_factor()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn weil_operator(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rank(), self.rank(), |a, b| {
            if a == b {
                self.hodge_type(a).weil_factor()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// The variation of Hodge structure attached to a `CH^n` model. Inputs `x`
/// are jets whose first `2n` entries are the base coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Vphs {
    model: ComplexHyperbolic,
    frame: HodgeFrame,
}

fn czero(shape: &Jet) -> ComplexJet {
    ComplexJet::constant_like(shape, 0.0, 0.0)
}

fn cvalue(m: &ComplexJetMatrix) -> DMatrix<Complex64> {
    let r = m.len();
    let c = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| m[i][j].value())
}

impl Vphs {
    pub fn new(model: ComplexHyperbolic) -> Self {
        Vphs { model, frame: HodgeFrame::new(model.n()) }
    }

    pub fn model(&self) -> &ComplexHyperbolic {
        &self.model
    }

    pub fn frame(&self) -> &HodgeFrame {
        &self.frame
    }

    pub fn rank(&self) -> usize {
        self.frame.rank()
    }

    /// Polarization `Q` in the working frame.
    pub fn pairing(&self, x: &[Jet]) -> Result<ComplexJetMatrix> {
        let n = self.model.n();
        let h = self.model.hermitian(x)?;
        let last = 2 * n + 1;
        let mut q = vec![vec![czero(&x[0]); self.rank()]; self.rank()];
        q[0][last] = ComplexJet::constant_like(&x[0], 0.0, -0.5);
        q[last][0] = ComplexJet::constant_like(&x[0], 0.0, 0.5);
        for j in 0..n {
            for k in 0..n {
                let half_ih = h[k][j].times_i().scale_f64(0.5);
                q[1 + n + k][1 + j] = -&half_ih;
                q[1 + j][1 + n + k] = half_ih;
            }
        }
        Ok(q)
    }

    pub fn pairing_at(&self, base: &[f64]) -> Result<DMatrix<Complex64>> {
        Ok(cvalue(&self.pairing(&seed_base(base)?)?))
    }

    /// Bilinear form `h(a, b) = Q(a, J b) + i Q(a, b)` for a diagonal operator `J`.
    pub fn hermitian_form(q: &DMatrix<Complex64>, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        q * op + q * I
    }

    /// Parallel frame: columns `s_0..s_n, s̄_0..s̄_n` in the working frame.
    pub fn parallel_frame(&self, x: &[Jet]) -> Result<ComplexJetMatrix> {
        let n = self.model.n();
        let rank = self.rank();
        let gap = self.model.ball_gap(x)?;
        let root = gap.sqrt()?;
        let inv_root = root.recip()?;
        let xs = self.model.base_coords(x);
        let mut cols: Vec<Vec<ComplexJet>> = Vec::with_capacity(rank);
        let mut s0 = vec![czero(&x[0]); rank];
        s0[0] = ComplexJet::real(inv_root.clone());
        for j in 0..n {
            s0[1 + j] = -&xs[j].scale(&root);
        }
        cols.push(s0);
        for i in 0..n {
            let mut si = vec![czero(&x[0]); rank];
            si[0] = -&xs[i].conj().scale(&inv_root);
            si[1 + i] = ComplexJet::real(root.clone());
            cols.push(si);
        }
        for c in 0..=n {
            let conj: Vec<ComplexJet> = (0..rank).map(|a| cols[c][self.frame.conjugate_index(a)].conj()).collect();
            cols.push(conj);
        }
        Ok((0..rank).map(|a| (0..rank).map(|c| cols[c][a].clone()).collect()).collect())
    }

    pub fn parallel_frame_at(&self, base: &[f64]) -> Result<DMatrix<Complex64>> {
        Ok(cvalue(&self.parallel_frame(&seed_base(base)?)?))
    }

    /// Gauß–Manin coefficients `Γ_c` for every real base direction `c`, as jets
    /// one order below `x`.
    pub fn gauss_manin(&self, x: &[Jet]) -> Result<Vec<ComplexJetMatrix>> {
        let n = self.model.n();
        let rank = self.rank();
        let h = self.model.hermitian(x)?;
        let gap = self.model.ball_gap(x)?;
        let xs = self.model.base_coords(x);
        let pot = self.model.potential_form(x)?;
        let lower = |j: &Jet| j.truncate(j.order() - 1);
        let low_c = |c: &ComplexJet| ComplexJet::new(lower(&c.re), lower(&c.im));
        let shape = lower(&x[0]);
        // inverse of H: (1 − |X|²)(δ − X X̄ᵀ)
        let hinv: ComplexJetMatrix = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let mut e = -&(&xs[k] * &xs[i].conj());
                        if k == i {
                            e.re += &x[0].lift(1.0);
                        }
                        low_c(&e.scale(&gap))
                    })
                    .collect()
            })
            .collect();
        // holomorphic derivatives ∂_{X_l} H_ij = ½(∂_x − i ∂_y) H_ij
        let mut dh: Vec<ComplexJetMatrix> = Vec::with_capacity(n);
        for l in 0..n {
            let mut m = Vec::with_capacity(n);
            for row in &h {
                let mut r = Vec::with_capacity(n);
                for e in row {
                    let dx = ComplexJet::new(e.re.partial(2 * l)?, e.im.partial(2 * l)?);
                    let dy = ComplexJet::new(e.re.partial(2 * l + 1)?, e.im.partial(2 * l + 1)?);
                    r.push((&dx - &dy.times_i()).scale_f64(0.5));
                }
                m.push(r);
            }
            dh.push(m);
        }
        // christoffel[l][k][j] = Γ^k_{lj}
        let christoffel: Vec<ComplexJetMatrix> = (0..n)
            .map(|l| {
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|j| {
                                let mut acc = czero(&shape);
                                for i in 0..n {
                                    acc += &(&hinv[k][i] * &dh[l][i][j]);
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(2 * n);
        for c in 0..2 * n {
            let l = c / 2;
            // Y^{1,0} component along X_l is 1 for ∂_x and i for ∂_y
            let y = if c % 2 == 0 { Complex64::new(1.0, 0.0) } else { I };
            let a = ComplexJet::new(shape.zero_like(), -lower(&pot[c]));
            let mut g = vec![vec![czero(&shape); rank]; rank];
            g[0][0] = a.clone();
            g[1 + l][0] = ComplexJet::constant_like(&shape, y.re, y.im);
            for j in 0..n {
                g[0][1 + j] = low_c(&h[l][j]).mul_c(y.re, -y.im);
                g[1 + j][1 + j] += &a;
                for k in 0..n {
                    g[1 + k][1 + j] += &christoffel[l][k][j].mul_c(y.re, y.im);
                }
            }
            // real structure: conjugate blocks mirror the holomorphic ones
            for b in 0..=n {
                for a_idx in 0..=n {
                    let (cb, ca) = (self.frame.conjugate_index(b), self.frame.conjugate_index(a_idx));
                    g[cb][ca] = g[b][a_idx].conj();
                }
            }
            out.push(g);
        }
        Ok(out)
    }

    pub fn gauss_manin_at(&self, base: &[f64]) -> Result<Vec<DMatrix<Complex64>>> {
        Ok(self.gauss_manin(&seed_base(base)?)?.iter().map(cvalue).collect())
    }

    /// `∇_Y v` for a base tangent vector `Y` and section components `v` with
    /// their first derivatives `dv[c]` along each base coordinate.
    pub fn covariant_derivative(
        &self,
        base: &[f64],
        y: &[f64],
        v: &DVector<Complex64>,
        dv: &[DVector<Complex64>],
    ) -> Result<DVector<Complex64>> {
        let gm = self.gauss_manin_at(base)?;
        let mut out = DVector::zeros(self.rank());
        for (c, yc) in y.iter().enumerate() {
            out += (&dv[c] + &gm[c] * v) * Complex64::new(*yc, 0.0);
        }
        Ok(out)
    }

    /// Coefficients of `φ(Y) = χ(Y)Φ_L + Φ_L⊗π_*Y^{1,0} + conjugates` for a
    /// tangent vector `Y` at a cone point, with `Φ_L = z_0 sqrt(1 − |X|²) σ`.
    pub fn tangent_to_bundle(&self, cone: &ChartPoint, y: &[f64]) -> Result<DVector<Complex64>> {
        let x = cone.seed(1)?;
        let n = self.model.n();
        let (re, im) = self.model.chi(&x)?;
        let chi_y = Complex64::new(
            re.iter().zip(y).map(|(f, c)| f.value() * c).sum(),
            im.iter().zip(y).map(|(f, c)| f.value() * c).sum(),
        );
        let z0 = self.model.embedding(&x)?[0].value();
        let scale = z0 * self.model.ball_gap(&x)?.value().sqrt();
        let mut v = DVector::zeros(self.rank());
        v[0] = chi_y * scale;
        for j in 0..n {
            v[1 + j] = Complex64::new(y[2 * j], y[2 * j + 1]) * scale;
        }
        Ok(self.realify(v))
    }

    /// Fills the conjugate half of a coefficient vector from its holomorphic half.
    fn realify(&self, mut v: DVector<Complex64>) -> DVector<Complex64> {
        for a in 0..=self.model.n() {
            v[self.frame.conjugate_index(a)] = v[a].conj();
        }
        v
    }

    /// Inverse of [`Vphs::tangent_to_bundle`]: `fΦ_L + Φ_L⊗Y' ↦ fζ + Y'^χ`
    /// plus conjugates, returned as a real cone-chart vector.
    pub fn bundle_to_tangent(&self, cone: &ChartPoint, v: &DVector<Complex64>) -> Result<Vec<f64>> {
        let x = cone.seed(1)?;
        let n = self.model.n();
        let z0 = self.model.embedding(&x)?[0].value();
        let scale = z0 * self.model.ball_gap(&x)?.value().sqrt();
        let f = v[0] / scale;
        let pot = vector_values(&self.model.potential_form(&x)?);
        let mut out = vec![0.0; self.model.cone_dim()];
        let mut horizontal_angle = 0.0;
        for j in 0..n {
            let yj = v[1 + j] / scale;
            out[2 * j] = yj.re;
            out[2 * j + 1] = yj.im;
            horizontal_angle += pot[2 * j] * yj.re + pot[2 * j + 1] * yj.im;
        }
        let r = cone.0[self.model.r_index()];
        out[self.model.r_index()] = f.re * r;
        out[self.model.angle_index()] = f.im + horizontal_angle;
        Ok(out)
    }

    /// Parallel-frame coefficients `dz_i(Y)` of a tangent vector at a cone point.
    pub fn ambient_components(&self, cone: &ChartPoint, y: &[f64]) -> Result<Vec<Complex64>> {
        let z = self.model.embedding(&cone.seed(1)?)?;
        Ok(z.iter()
            .map(|zi| {
                let re: f64 = (0..y.len()).map(|c| zi.re.derivative(&[c]).unwrap_or(0.0) * y[c]).sum();
                let im: f64 = (0..y.len()).map(|c| zi.im.derivative(&[c]).unwrap_or(0.0) * y[c]).sum();
                Complex64::new(re, im)
            })
            .collect())
    }

    /// Bilinear matrix of `h_L` on real sections: `h_L(e, e') = ē_σ e'_σ`.
    pub fn line_form(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.rank(), self.rank());
        m[(self.rank() - 1, 0)] = Complex64::new(1.0, 0.0);
        m
    }

    /// Bilinear matrix of `h_L ⊗ h_M` on real sections.
    pub fn tangent_form(&self, base: &[f64]) -> Result<DMatrix<Complex64>> {
        let n = self.model.n();
        let h = self.model.hermitian(&seed_base(base)?)?;
        let mut m = DMatrix::zeros(self.rank(), self.rank());
        for i in 0..n {
            for j in 0..n {
                m[(1 + n + i, 1 + j)] = h[i][j].value();
            }
        }
        Ok(m)
    }

    /// `Q` in the parallel frame `(s_0..s_n, s̄_0..s̄_n)`; constant over the base.
    pub fn parallel_pairing(&self, base: &[f64]) -> Result<DMatrix<Complex64>> {
        let p = self.parallel_frame_at(base)?;
        Ok(p.transpose() * self.pairing_at(base)? * p)
    }

    /// Working-frame coefficients of `Σ (a_i s_i + ā_i s̄_i)`.
    pub fn from_parallel(&self, base: &[f64], a: &[Complex64]) -> Result<DVector<Complex64>> {
        let p = self.parallel_frame_at(base)?;
        let n = self.model.n();
        let coeffs = DVector::from_fn(self.rank(), |c, _| if c <= n { a[c] } else { a[c - n - 1].conj() });
        Ok(p * coeffs)
    }
}

fn seed_base(base: &[f64]) -> Result<Vec<Jet>> {
    if base.is_empty() {
        // CH^0 is a point; a one-variable dummy jet keeps shapes uniform
        return Ok(Jet::seed(&[0.0], 1)?);
    }
    Ok(Jet::seed(base, 1)?)
}

/// Residuals of the VPHS structure at one base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VphsResiduals {
    pub parallel_sections: f64,
    pub connection_routes: f64,
    pub curvature: f64,
    pub pairing_parallel: f64,
    pub transversality: f64,
    pub parallel_pairing: f64,
    pub parallel_griffiths: f64,
    pub pairing_antisymmetry: f64,
    pub type_orthogonality: f64,
    pub reality: f64,
    pub polarization_margin: f64,
    pub shared_imaginary_part: f64,
    pub griffiths_decomposition: f64,
    pub weil_decomposition: f64,
    pub projectors: f64,
    pub line_shift: f64,
}

impl VphsResiduals {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("parallel-sections-covariantly-constant", self.parallel_sections),
            ("gauss-manin-formula-vs-parallel-transport", self.connection_routes),
            ("gauss-manin-curvature", self.curvature),
            ("polarization-parallel", self.pairing_parallel),
            ("griffiths-transversality", self.transversality),
            ("parallel-frame-pairing", self.parallel_pairing),
            ("parallel-frame-griffiths-form", self.parallel_griffiths),
            ("polarization-antisymmetric", self.pairing_antisymmetry),
            ("polarization-type-orthogonal", self.type_orthogonality),
            ("polarization-real", self.reality),
            ("griffiths-weil-share-imaginary-part", self.shared_imaginary_part),
            ("griffiths-form-decomposition", self.griffiths_decomposition),
            ("weil-form-decomposition", self.weil_decomposition),
            ("hodge-projectors", self.projectors),
            ("line-section-shift", self.line_shift),
        ]
    }
}

fn cmax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.norm()))
}

/// Runs the VPHS checks at `base` (a point of the `2n`-dimensional base).
pub fn verify_vphs(vphs: &Vphs, base: &[f64], probe: &[Complex64]) -> Result<VphsResiduals> {
    let model = vphs.model();
    let n = model.n();
    let rank = vphs.rank();
    let frame = vphs.frame();
    let x2 = if n == 0 { Jet::seed(&[0.0], 2)? } else { Jet::seed(base, 2)? };
    let gm = vphs.gauss_manin(&x2)?;
    let gm_v: Vec<DMatrix<Complex64>> = gm.iter().map(cvalue).collect();
    let pf = vphs.parallel_frame(&x2)?;
    let pf_v = cvalue(&pf);
    let q = vphs.pairing(&x2)?;
    let q_v = cvalue(&q);
    let dmat = |m: &ComplexJetMatrix, c: usize| -> Result<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(m.len(), m[0].len());
        for (i, row) in m.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[(i, j)] = Complex64::new(e.re.partial(c)?.value(), e.im.partial(c)?.value());
            }
        }
        Ok(out)
    };

    let mut parallel_sections: f64 = 0.0;
    let mut connection_routes: f64 = 0.0;
    let mut pairing_parallel: f64 = 0.0;
    let pinv = pf_v.clone().try_inverse().ok_or(crate::Error::Singular("parallel frame"))?;
    for c in 0..2 * n {
        let dp = dmat(&pf, c)?;
        parallel_sections = parallel_sections.max(cmax(&(&dp + &gm_v[c] * &pf_v)));
        connection_routes = connection_routes.max(cmax(&(-&dp * &pinv - &gm_v[c])));
        let dq = dmat(&q, c)?;
        pairing_parallel = pairing_parallel.max(cmax(&(dq - gm_v[c].transpose() * &q_v - &q_v * &gm_v[c])));
    }

    let mut curvature: f64 = 0.0;
    for c in 0..2 * n {
        for d in 0..2 * n {
            let f = dmat(&gm[d], c)? - dmat(&gm[c], d)? + &gm_v[c] * &gm_v[d] - &gm_v[d] * &gm_v[c];
            curvature = curvature.max(cmax(&f));
        }
    }

    let mut transversality: f64 = 0.0;
    for l in 0..n {
        let (gx, gy) = (&gm_v[2 * l], &gm_v[2 * l + 1]);
        let holo = (gx - gy * I) * Complex64::new(0.5, 0.0);
        let anti = (gx + gy * I) * Complex64::new(0.5, 0.0);
        for a in 0..rank {
            let ta = frame.hodge_type(a);
            for b in 0..rank {
                let tb = frame.hodge_type(b);
                let holo_ok = tb == ta || (tb.p + 1 == ta.p);
                let anti_ok = tb == ta || (tb.p == ta.p + 1);
                if !holo_ok {
                    transversality = transversality.max(holo[(b, a)].norm());
                }
                if !anti_ok {
                    transversality = transversality.max(anti[(b, a)].norm());
                }
            }
        }
    }

    let qpar = pf_v.transpose() * &q_v * &pf_v;
    let hg = Vphs::hermitian_form(&q_v, &frame.griffiths_operator());
    let hw = Vphs::hermitian_form(&q_v, &frame.weil_operator());
    let hgpar = pf_v.transpose() * &hg * &pf_v;
    let mut parallel_pairing: f64 = 0.0;
    let mut parallel_griffiths: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            let sign = if i == 0 { -1.0 } else { 1.0 };
            let delta = if i == j { 1.0 } else { 0.0 };
            let expected_q = Complex64::new(sign * delta, 0.0) / (I * 2.0);
            let expected_h = Complex64::new(sign * delta, 0.0);
            // s̄_i is column n+1+i
            parallel_pairing = parallel_pairing.max((qpar[(n + 1 + i, j)] - expected_q).norm());
            parallel_pairing = parallel_pairing.max(qpar[(i, j)].norm()).max(qpar[(n + 1 + i, n + 1 + j)].norm());
            parallel_griffiths = parallel_griffiths.max((hgpar[(n + 1 + i, j)] - expected_h).norm());
        }
    }

    let pairing_antisymmetry = cmax(&(&q_v + q_v.transpose()));
    let mut type_orthogonality: f64 = 0.0;
    let mut reality: f64 = 0.0;
    for a in 0..rank {
        for b in 0..rank {
            if frame.hodge_type(a).p != frame.hodge_type(b).q {
                type_orthogonality = type_orthogonality.max(q_v[(a, b)].norm());
            }
            let (ca, cb) = (frame.conjugate_index(a), frame.conjugate_index(b));
            reality = reality.max((q_v[(ca, cb)] - q_v[(a, b)].conj()).norm());
        }
    }

    // Q(e, I_W e) > 0 on real sections drawn from each summand
    let weil = frame.weil_operator();
    let mut polarization_margin = f64::INFINITY;
    for p in 2..=3u8 {
        let v = frame.projector(p) * DVector::from_fn(rank, |a, _| probe[a % probe.len()]);
        if v.norm() == 0.0 {
            continue;
        }
        let e = &v + frame.conjugate(&v);
        let value = (e.transpose() * &q_v * &weil * &e)[(0, 0)];
        polarization_margin = polarization_margin.min(value.re / e.norm_squared());
    }

    // real sections a + ā built from the probe
    let half = DVector::from_fn(rank, |a, _| if a <= n { probe[a % probe.len()] } else { Complex64::new(0.0, 0.0) });
    let u = vphs.realify(half.clone());
    let rot: Vec<Complex64> = probe.iter().map(|c| c * Complex64::new(0.3, -1.1)).collect();
    let w =
        vphs.realify(DVector::from_fn(rank, |a, _| if a <= n { rot[a % rot.len()] } else { Complex64::new(0.0, 0.0) }));
    let form = |m: &DMatrix<Complex64>, a: &DVector<Complex64>, b: &DVector<Complex64>| (a.transpose() * m * b)[(0, 0)];
    let qv = form(&q_v, &u, &w);
    let shared_imaginary_part =
        (form(&hg, &u, &w).im - qv.re).abs().max((form(&hw, &u, &w).im - qv.re).abs()).max(qv.im.abs());

    // h_G = −h_L + h_L⊗h_M and h_W = h̄_L + h_L⊗h_M as sesquilinear matrices
    let hl = vphs.line_form();
    let mut hl_bar = DMatrix::zeros(rank, rank);
    hl_bar[(0, 2 * n + 1)] = Complex64::new(1.0, 0.0);
    let hlm = vphs.tangent_form(base)?;
    let griffiths_decomposition = cmax(&(&hg - (-&hl + &hlm)));
    let weil_decomposition = cmax(&(&hw - (&hl_bar + &hlm)));

    let mut projectors: f64 = 0.0;
    let mut total = DMatrix::zeros(rank, rank);
    for p in 0..=3u8 {
        let pp = frame.projector(p);
        projectors = projectors.max(cmax(&(&pp * &pp - &pp)));
        for p2 in 0..=3u8 {
            if p2 != p {
                projectors = projectors.max(cmax(&(&pp * frame.projector(p2))));
            }
        }
        total += pp;
    }
    projectors = projectors.max(cmax(&(total - DMatrix::identity(rank, rank))));

    // the L⊗T^{1,0} component of ∇σ along ∂_c is σ⊗Y^{1,0}
    let mut line_shift: f64 = 0.0;
    for c in 0..2 * n {
        let y = if c % 2 == 0 { Complex64::new(1.0, 0.0) } else { I };
        for j in 0..n {
            let expected = if j == c / 2 { y } else { Complex64::new(0.0, 0.0) };
            line_shift = line_shift.max((gm_v[c][(1 + j, 0)] - expected).norm());
        }
    }

    Ok(VphsResiduals {
        parallel_sections,
        connection_routes,
        curvature,
        pairing_parallel,
        transversality,
        parallel_pairing,
        parallel_griffiths,
        pairing_antisymmetry,
        type_orthogonality,
        reality,
        polarization_margin,
        shared_imaginary_part,
        griffiths_decomposition,
        weil_decomposition,
        projectors,
        line_shift,
    })
}

/// Residuals of the identification `TM̃ ≅ E_π` at a cone point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsomorphismResiduals {
    pub round_trip: f64,
    pub parallel_coordinates: f64,
    pub pairing_pullback: f64,
    pub metric_pullback: f64,
    pub complex_linearity: f64,
}

impl IsomorphismResiduals {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("tangent-bundle-round-trip", self.round_trip),
            ("ambient-coordinates-are-parallel-coefficients", self.parallel_coordinates),
            ("polarization-pulls-back-to-kahler-form", self.pairing_pullback),
            ("griffiths-metric-pulls-back-to-cone-metric", self.metric_pullback),
            ("complex-structure-intertwined", self.complex_linearity),
        ]
    }
}

pub fn verify_isomorphism(vphs: &Vphs, cone: &ChartPoint, u: &[f64], v: &[f64]) -> Result<IsomorphismResiduals> {
    let model = vphs.model();
    let b = model.base_dim();
    let base = &cone.0[..b];
    let pu = vphs.tangent_to_bundle(cone, u)?;
    let pv = vphs.tangent_to_bundle(cone, v)?;
    let back = vphs.bundle_to_tangent(cone, &pu)?;
    let round_trip = back.iter().zip(u).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
    let ambient = vphs.ambient_components(cone, u)?;
    let parallel_coordinates = (vphs.from_parallel(base, &ambient)? - &pu).camax();

    let q = vphs.pairing_at(base)?;
    let x1 = cone.seed(1)?;
    let g = crate::geometry::values(&model.cone_metric(&x1)?);
    let icone = crate::geometry::values(&model.cone_complex_structure(&cone.seed(2)?)?);
    let omega = icone.transpose() * &g;
    let uv = DVector::from_column_slice(u);
    let vv = DVector::from_column_slice(v);
    let pair = (pu.transpose() * &q * &pv)[(0, 0)];
    let pairing_pullback = (pair.re - (uv.transpose() * &omega * &vv)[(0, 0)]).abs().max(pair.im.abs());
    let metric = (pu.transpose() * &q * vphs.frame().griffiths_operator() * &pv)[(0, 0)];
    let metric_pullback = (metric.re - (uv.transpose() * &g * &vv)[(0, 0)]).abs().max(metric.im.abs());
    let iu: Vec<f64> = (&icone * &uv).iter().copied().collect();
    let complex_linearity = (vphs.tangent_to_bundle(cone, &iu)? - vphs.frame().griffiths_operator() * &pu).camax();
    Ok(IsomorphismResiduals { round_trip, parallel_coordinates, pairing_pullback, metric_pullback, complex_linearity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn probe(rng: &mut impl rand::Rng, len: usize) -> Vec<Complex64> {
        (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn frame_at_origin_is_working_frame() {
        let v = Vphs::new(ComplexHyperbolic::new(2).unwrap());
        let p = v.parallel_frame_at(&[0.0; 4]).unwrap();
        assert!(
            cmax(
                &(p - DMatrix::from_fn(6, 6, |a, b| {
                    let target = if b <= 2 { b } else { v.frame().conjugate_index(b - 3) };
                    if a == target {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }))
            ) < 1e-15
        );
    }

    #[test]
    fn s0_is_parallel_at_origin() {
        let v = Vphs::new(ComplexHyperbolic::new(1).unwrap());
        let x = Jet::seed(&[0.0, 0.0], 2).unwrap();
        let pf = v.parallel_frame(&x).unwrap();
        let gm = v.gauss_manin_at(&[0.0, 0.0]).unwrap();
        let s0 = DVector::from_fn(4, |a, _| pf[a][0].value());
        let ds0 = DVector::from_fn(4, |a, _| {
            Complex64::new(pf[a][0].re.derivative(&[0]).unwrap(), pf[a][0].im.derivative(&[0]).unwrap())
        });
        let r = ds0 + &gm[0] * s0;
        assert!(r.camax() < 1e-12);
        let zero = v
            .covariant_derivative(
                &[0.0, 0.0],
                &[0.0, 0.0],
                &DVector::from_element(4, Complex64::new(1.0, 0.0)),
                &[DVector::zeros(4), DVector::zeros(4)],
            )
            .unwrap();
        assert_eq!(zero.camax(), 0.0);
    }

    #[test]
    fn polarization_and_connection_at_random_points() {
        let mut rng = sampling::rng(21);
        for n in 0..4 {
            let v = Vphs::new(ComplexHyperbolic::new(n).unwrap());
            for _ in 0..5 {
                let base = sampling::complex_ball(&mut rng, n, 0.8);
                let pr = probe(&mut rng, v.rank());
                let res = verify_vphs(&v, &base, &pr).unwrap();
                for (name, val) in res.entries() {
                    assert!(val < 1e-9, "{name} = {val} at n={n}");
                }
                assert!(res.polarization_margin > 0.0, "margin {} at n={n}", res.polarization_margin);
            }
        }
    }

    #[test]
    fn tangent_bundle_identification() {
        let mut rng = sampling::rng(22);
        for n in 0..3 {
            let v = Vphs::new(ComplexHyperbolic::new(n).unwrap());
            let cone = ChartPoint(sampling::cone_point(&mut rng, n));
            let u = sampling::direction(&mut rng, 2 * n + 2);
            let w = sampling::direction(&mut rng, 2 * n + 2);
            let res = verify_isomorphism(&v, &cone, &u, &w).unwrap();
            for (name, val) in res.entries() {
                assert!(val < 1e-10, "{name} = {val} at n={n}");
            }
        }
    }

    #[test]
    fn conjugation_swaps_types() {
        let f = HodgeFrame::new(3);
        for a in 0..f.rank() {
            let (t, c) = (f.hodge_type(a), f.hodge_type(f.conjugate_index(a)));
            assert_eq!((t.p, t.q), (c.q, c.p));
            assert_eq!(f.conjugate_index(f.conjugate_index(a)), a);
        }
    }
}
