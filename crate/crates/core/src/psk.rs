//! Complex hyperbolic space `CH^n` as a projective special Kähler manifold.
//!
//! The conical model is the open cone `{ Σ_{i≥1}|z_i|² < |z_0|² }` in
//! `C^{n+1}` with the flat metric `Σ_{i≥1}|dz_i|² − |dz_0|²`. It is charted by
//! `(X, r, θ)` through
//!
//! ```text
//! z_0 = r e^{iθ} / sqrt(1 − |X|²),   z_i = z_0 X_i,
//! ```
//!
//! so that `r² = |z_0|² − Σ|z_i|²` and `θ = arg z_0`. Complex coordinates are
//! stored as interleaved real pairs `(Re, Im)`; the cone chart appends `r` and
//! `θ` to the `2n` base coordinates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{
    self, covariant_derivative, curvature_from_connection, invert_jets, jacobian_jets, lie_derivative_one_form,
    lie_derivative_tensor, pullback_flat_connection, values, vector_values, ChartPoint, Christoffel, FieldFn,
    JetMatrix, Riemann,
};
use crate::jet::{ComplexJet, Jet, MAX_DIM};

/// The `CH^n` model with its conical lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexHyperbolic {
    n: usize,
}

impl ComplexHyperbolic {
    pub fn new(n: usize) -> Result<Self> {
        if 2 * n + 2 > MAX_DIM {
            return Err(Error::Parameter(format!("complex dimension {n} exceeds the jet capacity")));
        }
        Ok(ComplexHyperbolic { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base_dim(&self) -> usize {
        2 * self.n
    }

    pub fn cone_dim(&self) -> usize {
        2 * self.n + 2
    }

    pub fn r_index(&self) -> usize {
        2 * self.n
    }

    pub fn angle_index(&self) -> usize {
        2 * self.n + 1
    }

    /// Base coordinates `X_i` read from the first `2n` chart entries.
    pub fn base_coords(&self, x: &[Jet]) -> Vec<ComplexJet> {
        (0..self.n).map(|i| ComplexJet::new(x[2 * i].clone(), x[2 * i + 1].clone())).collect()
    }

    /// `1 − |X|²`, rejecting points outside the unit ball.
    pub fn ball_gap(&self, x: &[Jet]) -> Result<Jet> {
        let mut gap = x[0].lift(1.0);
        for c in &x[..2 * self.n] {
            gap -= c.square();
        }
        if gap.value() <= 0.0 {
            return Err(Error::Domain(format!("|X|² = {} is not below 1", 1.0 - gap.value())));
        }
        Ok(gap)
    }

    /// Hermitian matrix `H_{ij} = δ_{ij}/(1−|X|²) + X_i X̄_j/(1−|X|²)²` of `h_M`.
    pub fn hermitian(&self, x: &[Jet]) -> Result<Vec<Vec<ComplexJet>>> {
        let gap = self.ball_gap(x)?;
        let inv = gap.recip()?;
        let inv2 = inv.square();
        let xs = self.base_coords(x);
        Ok((0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let mut h = (&xs[i] * &xs[j].conj()).scale(&inv2);
                        if i == j {
                            h.re += &inv;
                        }
                        h
                    })
                    .collect()
            })
            .collect())
    }

    /// Real metric `Re h_M` on the base.
    pub fn base_metric(&self, x: &[Jet]) -> Result<JetMatrix> {
        Ok(hermitian_real_parts(&self.hermitian(x)?).0)
    }

    /// Kähler form `Im h_M = g_M(I·,·)` on the base.
    pub fn kahler_form(&self, x: &[Jet]) -> Result<JetMatrix> {
        Ok(hermitian_real_parts(&self.hermitian(x)?).1)
    }

    /// The 1-form `Im(Σ X̄_i dX_i)/(1 − |X|²)` on the base.
    pub fn potential_form(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let inv = self.ball_gap(x)?.recip()?;
        let mut out = Vec::with_capacity(2 * self.n);
        for i in 0..self.n {
            out.push(-(&x[2 * i + 1] * &inv));
            out.push(&x[2 * i] * &inv);
        }
        Ok(out)
    }

    /// Constant complex structure of the base, `I ∂_x = ∂_y`.
    pub fn base_complex_structure(&self) -> DMatrix<f64> {
        complex_structure_matrix(self.n)
    }

    /// Cone coordinates `(z_0, …, z_n)`.
    pub fn embedding(&self, x: &[Jet]) -> Result<Vec<ComplexJet>> {
        let gap = self.ball_gap(x)?;
        let modulus = &x[self.r_index()] * &gap.sqrt()?.recip()?;
        let theta = &x[self.angle_index()];
        let z0 = ComplexJet::new(&modulus * &theta.cos(), &modulus * &theta.sin());
        let mut z = vec![z0.clone()];
        z.extend(self.base_coords(x).iter().map(|xi| &z0 * xi));
        Ok(z)
    }

    /// Cone coordinates flattened to `(Re z_0, Im z_0, Re z_1, …)`.
    pub fn embedding_real(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        Ok(self.embedding(x)?.into_iter().flat_map(|z| [z.re, z.im]).collect())
    }

    /// Signs of the flat ambient metric in the flattened coordinates.
    pub fn ambient_signs(&self) -> Vec<f64> {
        (0..self.cone_dim()).map(|a| if a < 2 { -1.0 } else { 1.0 }).collect()
    }

    /// Real and imaginary parts of `χ` on the cone chart: `dr/r` and
    /// `dθ − Im(Σ X̄_i dX_i)/(1 − |X|²)`.
    pub fn chi(&self, x: &[Jet]) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let d = self.cone_dim();
        let zero = x[0].zero_like();
        let mut re = vec![zero.clone(); d];
        re[self.r_index()] = x[self.r_index()].recip()?;
        let mut im: Vec<Jet> = self.potential_form(x)?.iter().map(|c| -c).collect();
        im.push(zero);
        im.push(x[0].lift(1.0));
        Ok((re, im))
    }

    /// Cone metric in closed form `r² π*g_M − dr² − r² φ̃²` with `φ̃ = Im χ`.
    pub fn cone_metric(&self, x: &[Jet]) -> Result<JetMatrix> {
        let d = self.cone_dim();
        let gm = self.base_metric(x)?;
        let (_, phi) = self.chi(x)?;
        let r2 = x[self.r_index()].square();
        let mut g = vec![vec![x[0].zero_like(); d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut e = -(&(&phi[i] * &phi[j]) * &r2);
                if i < self.base_dim() && j < self.base_dim() {
                    e += &gm[i][j] * &r2;
                }
                g[i][j] = e;
            }
        }
        let ri = self.r_index();
        g[ri][ri] -= x[0].lift(1.0);
        Ok(g)
    }

    /// Cone metric obtained by pulling back the flat ambient metric.
    pub fn cone_metric_pullback(&self, x: &[Jet]) -> Result<JetMatrix> {
        let f = self.embedding_real(&raise_order(x)?)?;
        let jac = jacobian_jets(&f)?;
        let signs = self.ambient_signs();
        let d = self.cone_dim();
        Ok((0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let mut acc = x[0].zero_like();
                        for (a, s) in signs.iter().enumerate() {
                            acc += &(&jac[a][i] * &jac[a][j]) * *s;
                        }
                        acc
                    })
                    .collect()
            })
            .collect())
    }

    /// Complex structure on the cone chart, `J^{-1} i J` with `J` the Jacobian
    /// of the embedding. The result has one order less than `x`.
    pub fn cone_complex_structure(&self, x: &[Jet]) -> Result<JetMatrix> {
        let jac = jacobian_jets(&self.embedding_real(x)?)?;
        let jinv = invert_jets(&jac)?;
        let d = self.cone_dim();
        // i·J: (Re, Im) ↦ (−Im, Re) row-wise
        let ij: JetMatrix = (0..d)
            .map(|a| if a % 2 == 0 { jac[a + 1].iter().map(|e| -e).collect() } else { jac[a - 1].clone() })
            .collect();
        Ok(mat_mul(&jinv, &ij))
    }

    /// Euler field `ξ = r ∂_r`.
    pub fn euler_field(&self, x: &[Jet]) -> Vec<Jet> {
        let mut v = vec![x[0].zero_like(); self.cone_dim()];
        v[self.r_index()] = x[self.r_index()].clone();
        v
    }

    /// `Iξ = ∂_θ`.
    pub fn rotation_field(&self, x: &[Jet]) -> Vec<Jet> {
        let mut v = vec![x[0].zero_like(); self.cone_dim()];
        v[self.angle_index()] = x[0].lift(1.0);
        v
    }

    /// Flat special connection of the cone in chart coordinates.
    pub fn flat_connection(&self, p: &ChartPoint) -> Result<Christoffel<Jet>> {
        pullback_flat_connection(&self.embedding_real(&p.seed(3)?)?)
    }

    pub fn base_metric_field(&self) -> impl geometry::MetricField + '_ {
        FieldFn::new(self.base_dim(), move |x: &[Jet]| self.base_metric(x))
    }

    pub fn cone_metric_field(&self) -> impl geometry::MetricField + '_ {
        FieldFn::new(self.cone_dim(), move |x: &[Jet]| self.cone_metric(x))
    }
}

pub(crate) fn raise_order(x: &[Jet]) -> Result<Vec<Jet>> {
    let p: Vec<f64> = vector_values(x);
    Ok(Jet::seed(&p, x[0].order() + 1)?)
}

pub(crate) fn mat_mul(a: &JetMatrix, b: &JetMatrix) -> JetMatrix {
    let inner = b.len();
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| {
                    let mut acc = &row[0] * &b[0][j];
                    for k in 1..inner {
                        acc += &row[k] * &b[k][j];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// `(Re, Im)` real matrices of a Hermitian form `Σ H_{ij} dX̄_i ⊗ dX_j` in
/// interleaved real coordinates.
pub fn hermitian_real_parts(h: &[Vec<ComplexJet>]) -> (JetMatrix, JetMatrix) {
    let n = h.len();
    let Some(zero) = h.first().map(|r| r[0].re.zero_like()) else {
        return (Vec::new(), Vec::new());
    };
    let mut g = vec![vec![zero; 2 * n]; 2 * n];
    let mut w = g.clone();
    for i in 0..n {
        for j in 0..n {
            let (re, im) = (&h[i][j].re, &h[i][j].im);
            g[2 * i][2 * j] = re.clone();
            g[2 * i][2 * j + 1] = -im;
            g[2 * i + 1][2 * j] = im.clone();
            g[2 * i + 1][2 * j + 1] = re.clone();
            w[2 * i][2 * j] = im.clone();
            w[2 * i][2 * j + 1] = re.clone();
            w[2 * i + 1][2 * j] = -re;
            w[2 * i + 1][2 * j + 1] = im.clone();
        }
    }
    (g, w)
}

/// Multiplication by `i` on `C^n` in interleaved real coordinates, as the
/// matrix `I^a_b` whose columns are the images of the coordinate vectors.
pub fn complex_structure_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(2 * i + 1, 2 * i)] = 1.0;
        m[(2 * i, 2 * i + 1)] = -1.0;
    }
    m
}

/// Residuals of the conical special Kähler axioms at one cone point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicalResiduals {
    pub cone_metric_routes: f64,
    pub flat_curvature: f64,
    pub torsion: f64,
    pub levi_civita_is_flat_connection: f64,
    pub euler_identity: f64,
    pub flat_euler_identity: f64,
    pub rotation_derivative: f64,
    pub complex_structure_parallel: f64,
    pub symplectic_parallel: f64,
    pub special_condition: f64,
    pub complete_lift: f64,
}

impl ConicalResiduals {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("cone-metric-closed-form-vs-pullback", self.cone_metric_routes),
            ("flat-connection-curvature", self.flat_curvature),
            ("flat-connection-torsion", self.torsion),
            ("levi-civita-equals-flat-connection", self.levi_civita_is_flat_connection),
            ("euler-field-covariant-derivative", self.euler_identity),
            ("euler-field-flat-derivative", self.flat_euler_identity),
            ("rotation-field-covariant-derivative", self.rotation_derivative),
            ("complex-structure-parallel", self.complex_structure_parallel),
            ("symplectic-form-parallel", self.symplectic_parallel),
            ("special-condition", self.special_condition),
            ("euler-complete-lift-split", self.complete_lift),
        ]
    }
}

fn max_diff(a: &JetMatrix, b: &JetMatrix) -> f64 {
    geometry::max_abs(&(values(a) - values(b)))
}

/// `(∇_i T)^a_b` for a (1,1)-tensor given as order-1 jets.
fn covariant_endomorphism(t: &JetMatrix, gamma: &Christoffel<f64>) -> Vec<DMatrix<f64>> {
    let d = t.len();
    (0..d)
        .map(|i| {
            DMatrix::from_fn(d, d, |a, b| {
                let mut s = t[a][b].derivative(&[i]).unwrap_or(0.0);
                for c in 0..d {
                    s += gamma.get(a, i, c) * t[c][b].value() - gamma.get(c, i, b) * t[a][c].value();
                }
                s
            })
        })
        .collect()
}

/// `(∇_i ω)_{ab}` for a 2-tensor given as order-1 jets.
fn covariant_two_tensor(t: &JetMatrix, gamma: &Christoffel<f64>) -> Vec<DMatrix<f64>> {
    let d = t.len();
    (0..d)
        .map(|i| {
            DMatrix::from_fn(d, d, |a, b| {
                let mut s = t[a][b].derivative(&[i]).unwrap_or(0.0);
                for c in 0..d {
                    s -= gamma.get(c, i, a) * t[c][b].value() + gamma.get(c, i, b) * t[a][c].value();
                }
                s
            })
        })
        .collect()
}

/// `ω_{ij} = g(I∂_i, ∂_j)` from `I` and `g` as jets.
pub fn fundamental_form(i: &JetMatrix, g: &JetMatrix) -> JetMatrix {
    let d = g.len();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let mut acc = &i[0][a] * &g[0][b];
                    for c in 1..d {
                        acc += &i[c][a] * &g[c][b];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn verify_conical_axioms(model: &ComplexHyperbolic, p: &ChartPoint) -> Result<ConicalResiduals> {
    let d = model.cone_dim();
    let x1 = p.seed(1)?;
    let x2 = p.seed(2)?;
    let g = model.cone_metric(&x1)?;
    let cone_metric_routes = max_diff(&g, &model.cone_metric_pullback(&x1)?);
    let flat = model.flat_connection(p)?;
    let flat_curvature = curvature_from_connection(&flat)?.max_abs();
    let flat_v = flat.values();
    let mut torsion: f64 = 0.0;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                torsion = torsion.max((flat_v.get(k, i, j) - flat_v.get(k, j, i)).abs());
            }
        }
    }
    let lc = geometry::christoffel_jets(&g)?.values();
    let mut levi_civita_is_flat_connection: f64 = 0.0;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                levi_civita_is_flat_connection =
                    levi_civita_is_flat_connection.max((lc.get(k, i, j) - flat_v.get(k, i, j)).abs());
            }
        }
    }
    let id = DMatrix::<f64>::identity(d, d);
    let xi = model.euler_field(&x1);
    let euler_identity = geometry::max_abs(&(covariant_derivative(&xi, &lc) - &id));
    let flat_euler_identity = geometry::max_abs(&(covariant_derivative(&xi, &flat_v) - &id));
    let icone = model.cone_complex_structure(&x2)?;
    let rot = model.rotation_field(&x1);
    let rotation_derivative = geometry::max_abs(&(covariant_derivative(&rot, &lc) - values(&icone)));
    let nabla_i = covariant_endomorphism(&icone, &lc);
    let complex_structure_parallel = nabla_i.iter().map(geometry::max_abs).fold(0.0, f64::max);
    let omega = fundamental_form(&icone, &g);
    let symplectic_parallel = covariant_two_tensor(&omega, &flat_v).iter().map(geometry::max_abs).fold(0.0, f64::max);
    let flat_i = covariant_endomorphism(&icone, &flat_v);
    let mut special_condition: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for a in 0..d {
                special_condition = special_condition.max((flat_i[i][(a, j)] - flat_i[j][(a, i)]).abs());
            }
        }
    }
    let euler = geometry::VectorFn::new(d, move |x: &[Jet]| Ok(model.euler_field(x)));
    let v: Vec<f64> = (0..d).map(|i| 0.3 + 0.1 * i as f64).collect();
    let complete_lift = geometry::max_abs_slice(&geometry::complete_lift_residual(&euler, &flat_v, p, &v)?);
    Ok(ConicalResiduals {
        cone_metric_routes,
        flat_curvature,
        torsion,
        levi_civita_is_flat_connection,
        euler_identity,
        flat_euler_identity,
        rotation_derivative,
        complex_structure_parallel,
        symplectic_parallel,
        special_condition,
        complete_lift,
    })
}

/// Residuals of the structural identities relating `χ`, the cone metric and
/// the base Kähler data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionFormResiduals {
    pub kahler_compatibility: f64,
    pub kahler_closed: f64,
    pub kahler_potential: f64,
    pub hessian_of_chi: f64,
    pub chi_differential: f64,
    pub dilation_scales_metric: f64,
    pub rotation_preserves_metric: f64,
    pub contraction_closed: f64,
    pub contraction_differential: f64,
    pub chi_invariant: f64,
    pub line_bundle_curvature: f64,
    pub section_normalization: f64,
}

impl ConnectionFormResiduals {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("kahler-form-matches-complex-structure", self.kahler_compatibility),
            ("kahler-form-closed", self.kahler_closed),
            ("kahler-form-from-potential", self.kahler_potential),
            ("covariant-derivative-of-chi", self.hessian_of_chi),
            ("differential-of-chi", self.chi_differential),
            ("real-euler-part-scales-metric", self.dilation_scales_metric),
            ("imaginary-euler-part-preserves-metric", self.rotation_preserves_metric),
            ("euler-contraction-real-part-closed", self.contraction_closed),
            ("euler-contraction-differential", self.contraction_differential),
            ("chi-invariant-under-euler-flows", self.chi_invariant),
            ("line-bundle-curvature", self.line_bundle_curvature),
            ("working-section-normalization", self.section_normalization),
        ]
    }
}

fn pull_to_cone(model: &ComplexHyperbolic, base: &JetMatrix) -> DMatrix<f64> {
    let d = model.cone_dim();
    let b = model.base_dim();
    DMatrix::from_fn(d, d, |i, j| if i < b && j < b { base[i][j].value() } else { 0.0 })
}

pub fn verify_connection_form(model: &ComplexHyperbolic, p: &ChartPoint) -> Result<ConnectionFormResiduals> {
    let d = model.cone_dim();
    let b = model.base_dim();
    let x1 = p.seed(1)?;
    let x2 = p.seed(2)?;
    let gm = model.base_metric(&x1)?;
    let wm = model.kahler_form(&x1)?;
    let ibase = model.base_complex_structure();
    let kahler_compatibility =
        if b > 0 { geometry::max_abs(&(ibase.transpose() * values(&gm) - values(&wm))) } else { 0.0 };
    let kahler_closed = if b > 0 { geometry::max_abs_slice(&geometry::d_two_form_jets(&wm)) } else { 0.0 };
    let pot = model.potential_form(&x2)?;
    let kahler_potential = if b > 0 {
        let dpot = DMatrix::from_fn(b, b, |i, j| {
            pot[j].partial(i).map(|v| v.value()).unwrap_or(0.0) - pot[i].partial(j).map(|v| v.value()).unwrap_or(0.0)
        });
        geometry::max_abs(&(dpot * 0.5 - values(&wm)))
    } else {
        0.0
    };

    let g = model.cone_metric(&x1)?;
    let lc = geometry::christoffel_jets(&g)?.values();
    let (re, im) = model.chi(&x1)?;
    let (rev, imv) = (vector_values(&re), vector_values(&im));
    let gm_cone = pull_to_cone(model, &gm);
    let wm_cone = pull_to_cone(model, &wm);
    let nabla = |form: &[Jet]| {
        DMatrix::from_fn(d, d, |i, j| {
            form[j].derivative(&[i]).unwrap_or(0.0) - (0..d).map(|k| lc.get(k, i, j) * form[k].value()).sum::<f64>()
        })
    };
    let outer = |a: &[f64], c: &[f64]| DMatrix::from_fn(d, d, |i, j| a[i] * c[j]);
    let re_target = -(outer(&rev, &rev) - outer(&imv, &imv)) - &gm_cone;
    let im_target = -(outer(&rev, &imv) + outer(&imv, &rev)) - &wm_cone;
    let hessian_of_chi = geometry::max_abs(&(nabla(&re) - re_target)).max(geometry::max_abs(&(nabla(&im) - im_target)));
    let chi_differential = geometry::max_abs(&geometry::d_one_form_jets(&re))
        .max(geometry::max_abs(&(geometry::d_one_form_jets(&im) + &wm_cone * 2.0)));

    let xi = model.euler_field(&x1);
    let half = |v: Vec<Jet>, s: f64| v.iter().map(|c| c * s).collect::<Vec<_>>();
    let re_zeta = half(xi.clone(), 0.5);
    let im_zeta = half(model.rotation_field(&x1), -0.5);
    let gv = values(&g);
    let dilation_scales_metric = geometry::max_abs(&(lie_derivative_tensor(&re_zeta, &g)? - &gv));
    let rotation_preserves_metric = geometry::max_abs(&lie_derivative_tensor(&im_zeta, &g)?);
    // the contractions are differentiated, so build them one order higher
    let g2 = model.cone_metric(&x2)?;
    let xi2 = model.euler_field(&x2);
    let contract2 = |v: &[Jet]| -> Vec<Jet> {
        (0..d)
            .map(|j| {
                let mut acc = &v[0] * &g2[0][j];
                for i in 1..d {
                    acc += &v[i] * &g2[i][j];
                }
                acc
            })
            .collect()
    };
    let re_c: Vec<Jet> = contract2(&xi2).iter().map(|c| c.truncate(1) * 0.5).collect();
    let im_c: Vec<Jet> = contract2(&model.rotation_field(&x2)).iter().map(|c| c.truncate(1) * -0.5).collect();
    let icone = model.cone_complex_structure(&x2)?;
    let omega_cone = values(&fundamental_form(&icone, &g));
    let contraction_closed = geometry::max_abs(&geometry::d_one_form_jets(&re_c));
    let contraction_differential = geometry::max_abs(&(geometry::d_one_form_jets(&im_c) + &omega_cone));

    let rot = model.rotation_field(&x1);
    let chi_invariant = [&xi, &rot]
        .iter()
        .flat_map(|v| [lie_derivative_one_form(v, &re), lie_derivative_one_form(v, &im)])
        .map(|c| geometry::max_abs_slice(&c))
        .fold(0.0, f64::max);

    // connection form of the working section: χ + d log(z_0^{-1}(1 − |X|²)^{-1/2})
    let z0 = model.embedding(&x2)?.remove(0);
    let gap = model.ball_gap(&x2)?;
    let log_mod = &z0.norm_sqr().ln()? * 0.5;
    let arg = z0.im.atan2(&z0.re)?;
    let log_gap = &gap.ln()? * 0.5;
    let (re2, im2) = model.chi(&x2)?;
    let conn_re: Vec<Jet> =
        (0..d).map(|i| Ok(re2[i].truncate(1) - log_mod.partial(i)? - log_gap.partial(i)?)).collect::<Result<_>>()?;
    let conn_im: Vec<Jet> = (0..d).map(|i| Ok(im2[i].truncate(1) - arg.partial(i)?)).collect::<Result<_>>()?;
    let line_bundle_curvature = geometry::max_abs_slice(&vector_values(&conn_re))
        .max(geometry::max_abs(&geometry::d_one_form_jets(&conn_re)))
        .max(geometry::max_abs(&(geometry::d_one_form_jets(&conn_im) + &wm_cone * 2.0)));
    let r2 = -gv.dot(&DMatrix::from_fn(d, d, |i, j| xi[i].value() * xi[j].value()));
    let section_normalization = (r2 / (z0.norm_sqr().value() * gap.value()) - 1.0).abs();

    Ok(ConnectionFormResiduals {
        kahler_compatibility,
        kahler_closed,
        kahler_potential,
        hessian_of_chi,
        chi_differential,
        dilation_scales_metric,
        rotation_preserves_metric,
        contraction_closed,
        contraction_differential,
        chi_invariant,
        line_bundle_curvature,
        section_normalization,
    })
}

/// Difference between the projected cone Levi-Civita connection and the base
/// Levi-Civita connection, compared with its expression through `χ`, for
/// tangent vectors `u, v` at a cone point. Returns the residual vector on the
/// base.
pub fn levi_civita_difference(model: &ComplexHyperbolic, p: &ChartPoint, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let d = model.cone_dim();
    let b = model.base_dim();
    geometry_len(d, u.len())?;
    geometry_len(d, v.len())?;
    let x1 = p.seed(1)?;
    let cone_gamma = geometry::christoffel_jets(&model.cone_metric(&x1)?)?.values();
    let base_p = ChartPoint(p.0[..b].to_vec());
    let base_gamma = if b > 0 { Some(geometry::christoffel(&model.base_metric_field(), &base_p)?) } else { None };
    let icone = values(&model.cone_complex_structure(&p.seed(2)?)?);
    let (re, im) = model.chi(&x1)?;
    let eval = |form: &[Jet], w: &[f64]| form.iter().zip(w).map(|(f, c)| f.value() * c).sum::<f64>();
    let iu: Vec<f64> = (0..d).map(|a| (0..d).map(|c| icone[(a, c)] * u[c]).sum()).collect();
    let iv: Vec<f64> = (0..d).map(|a| (0..d).map(|c| icone[(a, c)] * v[c]).sum()).collect();
    let mut out = Vec::with_capacity(b);
    for a in 0..b {
        let mut lhs = 0.0;
        for j in 0..d {
            for k in 0..d {
                lhs += cone_gamma.get(a, j, k) * u[j] * v[k];
            }
        }
        if let Some(bg) = &base_gamma {
            for j in 0..b {
                for k in 0..b {
                    lhs -= bg.get(a, j, k) * u[j] * v[k];
                }
            }
        }
        let rhs = eval(&re, u) * v[a] + eval(&im, u) * iv[a] + eval(&re, v) * u[a] + eval(&im, v) * iu[a];
        out.push(lhs - rhs);
    }
    Ok(out)
}

fn geometry_len(expected: usize, found: usize) -> Result<()> {
    crate::error::check_len(expected, found)
}

/// Model curvature tensor of constant holomorphic sectional curvature,
/// `T(X,Y)Z = g(Y,Z)X − g(X,Z)Y + g(IY,Z)IX − g(IX,Z)IY + 2g(X,IY)IZ`, built
/// from the base metric at a point.
pub fn holomorphic_model_tensor(g: &DMatrix<f64>, i: &DMatrix<f64>) -> Riemann {
    let d = g.nrows();
    // w[j][k] = g(I∂_j, ∂_k)
    let w = i.transpose() * g;
    Riemann::from_fn(d, |l, k, a, b| {
        let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        g[(b, k)] * delta(l, a) - g[(a, k)] * delta(l, b) + w[(b, k)] * i[(l, a)] - w[(a, k)] * i[(l, b)]
            + 2.0 * w[(b, a)] * i[(l, k)]
    })
}

/// Scale `c` such that `c·T` is the curvature of complex projective space in
/// the normalization matching `g_M`, fitted on `CH^1` at the origin so that
/// `R^{g_M} + c·T = 0` there.
pub fn calibrate_projective_scale() -> Result<f64> {
    let model = ComplexHyperbolic::new(1)?;
    let p = ChartPoint(vec![0.0, 0.0]);
    let r = geometry::riemann(&model.base_metric_field(), &p)?;
    let g = geometry::metric_at(&model.base_metric_field(), &p)?;
    let t = holomorphic_model_tensor(&g, &model.base_complex_structure());
    let d = 2;
    let (mut num, mut den) = (0.0, 0.0);
    for l in 0..d {
        for k in 0..d {
            for a in 0..d {
                for b in 0..d {
                    num += r.get(l, k, a, b) * t.get(l, k, a, b);
                    den += t.get(l, k, a, b).powi(2);
                }
            }
        }
    }
    Ok(-num / den)
}

/// Largest component of `R^{g_M} + c·T` at a base point.
pub fn projective_curvature_residual(model: &ComplexHyperbolic, base: &ChartPoint, scale: f64) -> Result<f64> {
    let gfield = model.base_metric_field();
    let r = geometry::riemann(&gfield, base)?;
    let g = geometry::metric_at(&gfield, base)?;
    let t = holomorphic_model_tensor(&g, &model.base_complex_structure());
    let d = model.base_dim();
    let mut worst: f64 = 0.0;
    for l in 0..d {
        for k in 0..d {
            for a in 0..d {
                for b in 0..d {
                    worst = worst.max((r.get(l, k, a, b) + scale * t.get(l, k, a, b)).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    #[test]
    fn euler_norm_recovers_radius() {
        let m = ComplexHyperbolic::new(2).unwrap();
        let p = ChartPoint(vec![0.1, -0.2, 0.3, 0.05, 1.7, 0.4]);
        let z = m.embedding(&p.seed(1).unwrap()).unwrap();
        let r2 = z[0].norm_sqr().value() - z[1..].iter().map(|c| c.norm_sqr().value()).sum::<f64>();
        assert!((r2 - 1.7f64.powi(2)).abs() < 1e-13);
        assert!((z[0].value().arg() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn disc_metric_at_origin_and_boundary_rejection() {
        let m = ComplexHyperbolic::new(1).unwrap();
        let g = geometry::metric_at(&m.base_metric_field(), &ChartPoint(vec![0.0, 0.0])).unwrap();
        assert!(geometry::max_abs(&(g - DMatrix::identity(2, 2))) < 1e-15);
        let err = geometry::metric_at(&m.base_metric_field(), &ChartPoint(vec![0.9, 0.5])).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn disc_has_curvature_minus_four() {
        let m = ComplexHyperbolic::new(1).unwrap();
        let s = geometry::scalar_curvature(&m.base_metric_field(), &ChartPoint(vec![0.3, -0.2])).unwrap();
        assert!((s + 8.0).abs() < 1e-10);
    }

    #[test]
    fn cone_signature_is_split() {
        for n in 0..3 {
            let m = ComplexHyperbolic::new(n).unwrap();
            let p = sampling::cone_point(&mut sampling::rng(n as u64), n);
            let g = geometry::metric_at(&m.cone_metric_field(), &ChartPoint(p)).unwrap();
            assert_eq!(geometry::signature(&g), (2 * n, 2));
        }
    }

    #[test]
    fn conical_axioms_hold() {
        let mut rng = sampling::rng(11);
        for n in 0..3 {
            let m = ComplexHyperbolic::new(n).unwrap();
            for _ in 0..3 {
                let p = ChartPoint(sampling::cone_point(&mut rng, n));
                let res = verify_conical_axioms(&m, &p).unwrap();
                for (name, v) in res.entries() {
                    assert!(v < 1e-9, "{name}: {v} at n={n}");
                }
            }
        }
    }

    #[test]
    fn connection_form_identities_hold() {
        let mut rng = sampling::rng(12);
        for n in 0..4 {
            let m = ComplexHyperbolic::new(n).unwrap();
            for _ in 0..2 {
                let p = ChartPoint(sampling::cone_point(&mut rng, n));
                let res = verify_connection_form(&m, &p).unwrap();
                for (name, v) in res.entries() {
                    assert!(v < 1e-9, "{name}: {v} at n={n}");
                }
            }
        }
    }

    #[test]
    fn levi_civita_difference_vanishes() {
        let mut rng = sampling::rng(13);
        for n in 1..4 {
            let m = ComplexHyperbolic::new(n).unwrap();
            let p = ChartPoint(sampling::cone_point(&mut rng, n));
            let u = sampling::direction(&mut rng, m.cone_dim());
            let v = sampling::direction(&mut rng, m.cone_dim());
            let res = levi_civita_difference(&m, &p, &u, &v).unwrap();
            assert!(geometry::max_abs_slice(&res) < 1e-9, "{res:?}");
            let xi = vector_values(&m.euler_field(&p.seed(1).unwrap()));
            let res = levi_civita_difference(&m, &p, &u, &xi).unwrap();
            assert!(geometry::max_abs_slice(&res) < 1e-9);
        }
    }

    #[test]
    fn projective_curvature_cancels() {
        let scale = calibrate_projective_scale().unwrap();
        assert!((scale - 1.0).abs() < 1e-10, "{scale}");
        let mut rng = sampling::rng(14);
        for n in 2..4 {
            let m = ComplexHyperbolic::new(n).unwrap();
            let base = ChartPoint(sampling::complex_ball(&mut rng, n, 0.8));
            assert!(projective_curvature_residual(&m, &base, scale).unwrap() < 1e-8);
        }
    }
}
