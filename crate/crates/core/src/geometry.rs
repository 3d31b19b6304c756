//! Chart-level tensor calculus on top of Taylor jets.
//!
//! Fields are closures of the chart coordinates evaluated on seeded jets, so
//! every derivative a kernel needs is read off exactly from the expansion.
//! Index conventions:
//!
//! * `Christoffel::get(k, i, j)` is `Γ^k_{ij}`, with `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`.
//! * `Riemann::get(l, k, i, j)` is the `∂_l` component of `R(∂_i, ∂_j) ∂_k`
//!   where `R(X, Y) = ∇_X ∇_Y − ∇_Y ∇_X − ∇_{[X,Y]}`.
//! * `ricci(k, j) = Σ_i Riemann(i, k, i, j)`.
//! * Two-forms are antisymmetric matrices `β_{ij} = β(∂_i, ∂_j)`.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::jet::Jet;

pub type JetMatrix = Vec<Vec<Jet>>;

/// Coordinates of a point in a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint(pub Vec<f64>);

impl ChartPoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn seed(&self, order: usize) -> Result<Vec<Jet>> {
        Ok(Jet::seed(&self.0, order)?)
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(v: Vec<f64>) -> Self {
        ChartPoint(v)
    }
}

/// A symmetric 2-tensor field given by its chart components.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    fn components(&self, x: &[Jet]) -> Result<JetMatrix>;
}

/// A vector field given by its chart components.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn components(&self, x: &[Jet]) -> Result<Vec<Jet>>;
}

/// A 1-form given by its chart components.
pub trait OneForm: Sync {
    fn dim(&self) -> usize;
    fn components(&self, x: &[Jet]) -> Result<Vec<Jet>>;
}

/// A 2-form given by its antisymmetric component matrix.
pub trait TwoForm: Sync {
    fn dim(&self) -> usize;
    fn components(&self, x: &[Jet]) -> Result<JetMatrix>;
}

/// A smooth map between charts.
pub trait ChartMap: Sync {
    fn source_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn apply(&self, x: &[Jet]) -> Result<Vec<Jet>>;
}

/// Wraps a closure as a tensor field of the given chart dimension.
pub struct FieldFn<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> FieldFn<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FieldFn { dim, f }
    }
}

impl<F> MetricField for FieldFn<F>
where
    F: Fn(&[Jet]) -> Result<JetMatrix> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self, x: &[Jet]) -> Result<JetMatrix> {
        (self.f)(x)
    }
}

impl<F> TwoForm for FieldFn<F>
where
    F: Fn(&[Jet]) -> Result<JetMatrix> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self, x: &[Jet]) -> Result<JetMatrix> {
        (self.f)(x)
    }
}

/// Wraps a closure returning a component vector.
pub struct VectorFn<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> VectorFn<F> {
    pub fn new(dim: usize, f: F) -> Self {
        VectorFn { dim, f }
    }
}

impl<F> VectorField for VectorFn<F>
where
    F: Fn(&[Jet]) -> Result<Vec<Jet>> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        (self.f)(x)
    }
}

impl<F> OneForm for VectorFn<F>
where
    F: Fn(&[Jet]) -> Result<Vec<Jet>> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        (self.f)(x)
    }
}

/// Wraps a closure as a chart map.
pub struct MapFn<F> {
    pub source: usize,
    pub target: usize,
    pub f: F,
}

impl<F> ChartMap for MapFn<F>
where
    F: Fn(&[Jet]) -> Result<Vec<Jet>> + Sync,
{
    fn source_dim(&self) -> usize {
        self.source
    }
    fn target_dim(&self) -> usize {
        self.target
    }
    fn apply(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        (self.f)(x)
    }
}

/// `Γ^k_{ij}` stored densely.
#[derive(Debug, Clone)]
pub struct Christoffel<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T> Christoffel<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &T {
        &self.data[(k * self.dim + i) * self.dim + j]
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim * dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    data.push(f(k, i, j));
                }
            }
        }
        Christoffel { dim, data }
    }
}

impl Christoffel<Jet> {
    pub fn values(&self) -> Christoffel<f64> {
        Christoffel { dim: self.dim, data: self.data.iter().map(Jet::value).collect() }
    }
}

/// `R^l_{kij}` stored densely.
#[derive(Debug, Clone)]
pub struct Riemann {
    dim: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.data[((l * d + k) * d + i) * d + j]
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim.pow(4));
        for l in 0..dim {
            for k in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        data.push(f(l, k, i, j));
                    }
                }
            }
        }
        Riemann { dim, data }
    }

    pub fn ricci(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |k, j| (0..d).map(|i| self.get(i, k, i, j)).sum())
    }

    /// All-lower components `R_{lkij} = g_{lm} R^m_{kij}`.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Riemann {
        let d = self.dim;
        Riemann::from_fn(d, |l, k, i, j| (0..d).map(|m| g[(l, m)] * self.get(m, k, i, j)).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the algebraic Bianchi identity.
    pub fn bianchi_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for l in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        let s = self.get(l, k, i, j) + self.get(l, i, j, k) + self.get(l, j, k, i);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn values(m: &JetMatrix) -> DMatrix<f64> {
    let n = m.len();
    let c = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, c, |i, j| m[i][j].value())
}

pub fn vector_values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

fn check_square(m: &JetMatrix, dim: usize) -> Result<()> {
    check_len(dim, m.len())?;
    for row in m {
        check_len(dim, row.len())?;
    }
    Ok(())
}

/// Evaluates a metric on jets seeded at `p` and checks its shape.
pub fn metric_jets(g: &dyn MetricField, p: &ChartPoint, order: usize) -> Result<JetMatrix> {
    check_len(g.dim(), p.dim())?;
    let m = g.components(&p.seed(order)?)?;
    check_square(&m, g.dim())?;
    Ok(m)
}

pub fn metric_at(g: &dyn MetricField, p: &ChartPoint) -> Result<DMatrix<f64>> {
    Ok(values(&metric_jets(g, p, 1)?))
}

/// Inverse of a matrix of jets by Gauss-Jordan elimination with partial pivoting.
pub fn invert_jets(m: &JetMatrix) -> Result<JetMatrix> {
    let n = m.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, j| a.max(j.value().abs()));
    if n == 0 || scale == 0.0 {
        return Err(Error::Singular("matrix"));
    }
    let mut a: JetMatrix = m.to_vec();
    let mut inv: JetMatrix =
        (0..n).map(|i| (0..n).map(|j| m[0][0].lift(if i == j { 1.0 } else { 0.0 })).collect()).collect();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs())).unwrap_or(col);
        if a[pivot][col].value().abs() <= 1e-14 * scale {
            return Err(Error::Singular("matrix"));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].recip()?;
        for j in 0..n {
            a[col][j] = &a[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col].clone();
            if f.coefficients().iter().all(|c| *c == 0.0) {
                continue;
            }
            for j in 0..n {
                let da = &f * &a[col][j];
                a[r][j] -= &da;
                let di = &f * &inv[col][j];
                inv[r][j] -= &di;
            }
        }
    }
    Ok(inv)
}

pub fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().lu().try_inverse().ok_or(Error::Singular("matrix"))
}

/// Levi-Civita connection coefficients from metric jets of order `m ≥ 1`; the
/// result has order `m − 1`.
pub fn christoffel_jets(g: &JetMatrix) -> Result<Christoffel<Jet>> {
    let d = g.len();
    let ginv = invert_jets(g)?;
    let ginv: JetMatrix = ginv.iter().map(|r| r.iter().map(|j| j.truncate(j.order() - 1)).collect()).collect();
    // dg[l][i][j] = ∂_l g_ij
    let mut dg = Vec::with_capacity(d);
    for l in 0..d {
        let mut slice = Vec::with_capacity(d);
        for row in g {
            slice.push(row.iter().map(|e| e.partial(l)).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        dg.push(slice);
    }
    // first kind Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let first = Christoffel::from_fn(d, |l, i, j| (&(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j]) * 0.5);
    Ok(Christoffel::from_fn(d, |k, i, j| {
        let mut acc = first.get(0, i, j) * &ginv[k][0];
        for l in 1..d {
            acc += &ginv[k][l] * first.get(l, i, j);
        }
        acc
    }))
}

pub fn christoffel(g: &dyn MetricField, p: &ChartPoint) -> Result<Christoffel<f64>> {
    Ok(christoffel_jets(&metric_jets(g, p, 1)?)?.values())
}

/// Curvature of a connection whose coefficients are jets of order ≥ 1.
pub fn curvature_from_connection(gamma: &Christoffel<Jet>) -> Result<Riemann> {
    let d = gamma.dim();
    let vals = gamma.values();
    // dgam[m] = ∂_m Γ
    let mut dgam = Vec::with_capacity(d);
    for m in 0..d {
        let mut data = Vec::with_capacity(d * d * d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    data.push(gamma.get(k, i, j).partial(m)?.value());
                }
            }
        }
        dgam.push(Christoffel { dim: d, data });
    }
    Ok(Riemann::from_fn(d, |l, k, i, j| {
        let mut r = dgam[i].get(l, j, k) - dgam[j].get(l, i, k);
        for m in 0..d {
            r += vals.get(l, i, m) * vals.get(m, j, k) - vals.get(l, j, m) * vals.get(m, i, k);
        }
        r
    }))
}

pub fn riemann(g: &dyn MetricField, p: &ChartPoint) -> Result<Riemann> {
    curvature_from_connection(&christoffel_jets(&metric_jets(g, p, 2)?)?)
}

pub fn ricci(g: &dyn MetricField, p: &ChartPoint) -> Result<DMatrix<f64>> {
    Ok(riemann(g, p)?.ricci())
}

pub fn scalar_curvature(g: &dyn MetricField, p: &ChartPoint) -> Result<f64> {
    let gm = metric_jets(g, p, 2)?;
    let ginv = invert(&values(&gm))?;
    let ric = curvature_from_connection(&christoffel_jets(&gm)?)?.ricci();
    Ok(ginv.component_mul(&ric).sum())
}

/// Largest entry of `∇g` for the Levi-Civita connection.
pub fn metric_compatibility_residual(g: &dyn MetricField, p: &ChartPoint) -> Result<f64> {
    let gm = metric_jets(g, p, 1)?;
    let gamma = christoffel_jets(&gm)?.values();
    let gv = values(&gm);
    let d = gm.len();
    let mut worst: f64 = 0.0;
    for m in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut r = gm[i][j].derivative(&[m]).unwrap_or(0.0);
                for l in 0..d {
                    r -= gamma.get(l, m, i) * gv[(l, j)] + gamma.get(l, m, j) * gv[(i, l)];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

pub fn vector_jets(x: &dyn VectorField, p: &ChartPoint, order: usize) -> Result<Vec<Jet>> {
    check_len(x.dim(), p.dim())?;
    let v = x.components(&p.seed(order)?)?;
    check_len(x.dim(), v.len())?;
    Ok(v)
}

pub fn vector_at(x: &dyn VectorField, p: &ChartPoint) -> Result<Vec<f64>> {
    Ok(vector_values(&vector_jets(x, p, 1)?))
}

/// `(L_X g)_{ij} = X^k ∂_k g_{ij} + g_{kj} ∂_i X^k + g_{ik} ∂_j X^k`.
pub fn lie_derivative_metric(x: &dyn VectorField, g: &dyn MetricField, p: &ChartPoint) -> Result<DMatrix<f64>> {
    let gm = metric_jets(g, p, 1)?;
    let xv = vector_jets(x, p, 1)?;
    lie_derivative_tensor(&xv, &gm)
}

/// Lie derivative of a symmetric or antisymmetric 2-tensor given as order-1 jets.
pub fn lie_derivative_tensor(x: &[Jet], t: &JetMatrix) -> Result<DMatrix<f64>> {
    let d = x.len();
    check_square(t, d)?;
    let dx: Vec<Vec<f64>> = x.iter().map(Jet::gradient).collect();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            s += x[k].value() * t[i][j].derivative(&[k]).unwrap_or(0.0);
            s += t[k][j].value() * dx[k][i] + t[i][k].value() * dx[k][j];
        }
        s
    }))
}

/// Lie derivative of a 1-form: `(L_X α)_i = X^k ∂_k α_i + α_k ∂_i X^k`.
pub fn lie_derivative_one_form(x: &[Jet], alpha: &[Jet]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|k| {
                    x[k].value() * alpha[i].derivative(&[k]).unwrap_or(0.0)
                        + alpha[k].value() * x[k].derivative(&[i]).unwrap_or(0.0)
                })
                .sum()
        })
        .collect()
}

/// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket(x: &dyn VectorField, y: &dyn VectorField, p: &ChartPoint) -> Result<Vec<f64>> {
    check_len(x.dim(), y.dim())?;
    let xv = vector_jets(x, p, 1)?;
    let yv = vector_jets(y, p, 1)?;
    Ok(bracket_jets(&xv, &yv))
}

pub fn bracket_jets(x: &[Jet], y: &[Jet]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    x[j].value() * y[i].derivative(&[j]).unwrap_or(0.0)
                        - y[j].value() * x[i].derivative(&[j]).unwrap_or(0.0)
                })
                .sum()
        })
        .collect()
}

/// `(dα)_{ij} = ∂_i α_j − ∂_j α_i`.
pub fn exterior_derivative_one_form(alpha: &dyn OneForm, p: &ChartPoint) -> Result<DMatrix<f64>> {
    check_len(alpha.dim(), p.dim())?;
    let a = alpha.components(&p.seed(1)?)?;
    check_len(alpha.dim(), a.len())?;
    Ok(d_one_form_jets(&a))
}

pub fn d_one_form_jets(a: &[Jet]) -> DMatrix<f64> {
    let d = a.len();
    DMatrix::from_fn(d, d, |i, j| a[j].derivative(&[i]).unwrap_or(0.0) - a[i].derivative(&[j]).unwrap_or(0.0))
}

/// Components `(dβ)_{ijk} = ∂_i β_{jk} + ∂_j β_{ki} + ∂_k β_{ij}`, flattened row-major.
pub fn exterior_derivative_two_form(beta: &dyn TwoForm, p: &ChartPoint) -> Result<Vec<f64>> {
    check_len(beta.dim(), p.dim())?;
    let b = beta.components(&p.seed(1)?)?;
    check_square(&b, beta.dim())?;
    Ok(d_two_form_jets(&b))
}

pub fn d_two_form_jets(b: &JetMatrix) -> Vec<f64> {
    let d = b.len();
    let db = |m: usize, i: usize, j: usize| b[i][j].derivative(&[m]).unwrap_or(0.0);
    let mut out = Vec::with_capacity(d * d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                out.push(db(i, j, k) + db(j, k, i) + db(k, i, j));
            }
        }
    }
    out
}

/// Jacobian `∂F^a/∂x^i` as jets one order lower than `f`.
pub fn jacobian_jets(f: &[Jet]) -> Result<JetMatrix> {
    let d = f.first().map_or(0, Jet::dim);
    f.iter().map(|fa| (0..d).map(|i| Ok(fa.partial(i)?)).collect()).collect()
}

/// `(F*g)_{ij} = ∂_i F^a ∂_j F^b g_{ab}(F(p))`.
pub fn pullback_metric(f: &dyn ChartMap, g: &dyn MetricField, p: &ChartPoint) -> Result<DMatrix<f64>> {
    check_len(f.source_dim(), p.dim())?;
    check_len(f.target_dim(), g.dim())?;
    let image = f.apply(&p.seed(1)?)?;
    check_len(f.target_dim(), image.len())?;
    let jac = DMatrix::from_fn(image.len(), p.dim(), |a, i| image[a].derivative(&[i]).unwrap_or(0.0));
    let q = ChartPoint(vector_values(&image));
    let gq = metric_at(g, &q)?;
    Ok(jac.transpose() * gq * jac)
}

/// Connection coefficients obtained by pulling back the flat connection of the
/// target through a local diffeomorphism `F` given as jets of order `m ≥ 2`:
/// `Γ^k_{ij} = (J^{-1})^k_a ∂_i ∂_j F^a`.
pub fn pullback_flat_connection(f: &[Jet]) -> Result<Christoffel<Jet>> {
    let jac = jacobian_jets(f)?;
    let jinv = invert_jets(&jac)?;
    let d = f.len();
    let mut hess = Vec::with_capacity(d);
    for row in &jac {
        hess.push(
            row.iter()
                .map(|e| (0..d).map(|j| e.partial(j)).collect::<std::result::Result<Vec<_>, _>>())
                .collect::<std::result::Result<Vec<_>, _>>()?,
        );
    }
    // hess[a][i][j] = ∂_j ∂_i F^a, one order below jac
    let jinv: JetMatrix = jinv.iter().map(|r| r.iter().map(|j| j.truncate(j.order() - 1)).collect()).collect();
    Ok(Christoffel::from_fn(d, |k, i, j| {
        let mut acc = &jinv[k][0] * &hess[0][i][j];
        for a in 1..d {
            acc += &jinv[k][a] * &hess[a][i][j];
        }
        acc
    }))
}

/// `(∇X)^k_j = ∂_j X^k + Γ^k_{jm} X^m` at the expansion point.
pub fn covariant_derivative(x: &[Jet], gamma: &Christoffel<f64>) -> DMatrix<f64> {
    let d = x.len();
    DMatrix::from_fn(d, d, |k, j| {
        x[k].derivative(&[j]).unwrap_or(0.0) + (0..d).map(|m| gamma.get(k, j, m) * x[m].value()).sum::<f64>()
    })
}

/// Compares the complete lift `X^T` on the tangent bundle with
/// `X^∇ + vert((∇X)(v))` at the point `(p, v)` in induced coordinates and
/// returns the residual vector of length `2·dim`.
pub fn complete_lift_residual(
    x: &dyn VectorField,
    gamma: &Christoffel<f64>,
    p: &ChartPoint,
    v: &[f64],
) -> Result<Vec<f64>> {
    let d = x.dim();
    check_len(d, v.len())?;
    check_len(d, gamma.dim())?;
    let xj = vector_jets(x, p, 1)?;
    let xv = vector_values(&xj);
    // complete lift: flow-derived components (X^i, v^j ∂_j X^i)
    let mut complete = xv.clone();
    for i in 0..d {
        complete.push((0..d).map(|j| v[j] * xj[i].derivative(&[j]).unwrap_or(0.0)).sum());
    }
    // horizontal lift plus vertical covariant derivative
    let nabla = covariant_derivative(&xj, gamma);
    let mut split = xv.clone();
    for k in 0..d {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s -= gamma.get(k, i, j) * xv[i] * v[j];
            }
            s += nabla[(k, i)] * v[i];
        }
        split.push(s);
    }
    Ok(complete.iter().zip(&split).map(|(a, b)| a - b).collect())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Counts of positive and negative eigenvalues of a symmetric matrix.
pub fn signature(m: &DMatrix<f64>) -> (usize, usize) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = max_abs(m).max(1.0);
    let pos = eig.eigenvalues.iter().filter(|&&e| e > 1e-12 * scale).count();
    let neg = eig.eigenvalues.iter().filter(|&&e| e < -1e-12 * scale).count();
    (pos, neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_sphere() -> impl MetricField {
        FieldFn::new(2, |x: &[Jet]| {
            let s = x[0].sin();
            Ok(vec![vec![x[0].lift(1.0), x[0].zero_like()], vec![x[0].zero_like(), &s * &s]])
        })
    }

    fn hyperbolic_plane() -> impl MetricField {
        FieldFn::new(2, |x: &[Jet]| {
            let inv = x[1].square().recip()?;
            Ok(vec![vec![inv.clone(), x[0].zero_like()], vec![x[0].zero_like(), inv]])
        })
    }

    #[test]
    fn sphere_christoffel_and_ricci() {
        let g = round_sphere();
        let p = ChartPoint(vec![0.7, 0.2]);
        let gamma = christoffel(&g, &p).unwrap();
        let (s, c) = 0.7f64.sin_cos();
        assert!((gamma.get(0, 1, 1) + s * c).abs() < 1e-14);
        assert!((gamma.get(1, 0, 1) - c / s).abs() < 1e-14);
        let ric = ricci(&g, &p).unwrap();
        let gv = metric_at(&g, &p).unwrap();
        assert!(max_abs(&(ric - gv)) < 1e-12);
        assert!((scalar_curvature(&g, &p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_plane_curvature_is_negative() {
        let g = hyperbolic_plane();
        let p = ChartPoint(vec![0.3, 1.7]);
        assert!((scalar_curvature(&g, &p).unwrap() + 2.0).abs() < 1e-12);
        let r = riemann(&g, &p).unwrap();
        assert!(r.bianchi_residual() < 1e-13);
        let low = r.lowered(&metric_at(&g, &p).unwrap());
        for (l, k, i, j) in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0)] {
            assert!((low.get(l, k, i, j) + low.get(k, l, i, j)).abs() < 1e-12);
            assert!((low.get(l, k, i, j) + low.get(l, k, j, i)).abs() < 1e-12);
        }
        assert!(metric_compatibility_residual(&g, &p).unwrap() < 1e-13);
    }

    #[test]
    fn bracket_of_coordinate_fields() {
        let x = VectorFn::new(2, |x: &[Jet]| Ok(vec![x[0].lift(1.0), x[0].zero_like()]));
        let y = VectorFn::new(2, |x: &[Jet]| Ok(vec![x[0].zero_like(), x[0].clone()]));
        let b = lie_bracket(&x, &y, &ChartPoint(vec![0.4, -1.0])).unwrap();
        assert_eq!(b, vec![0.0, 1.0]);
    }

    #[test]
    fn rotation_is_killing_for_euclidean_plane() {
        let g = FieldFn::new(2, |x: &[Jet]| {
            Ok(vec![vec![x[0].lift(1.0), x[0].zero_like()], vec![x[0].zero_like(), x[0].lift(1.0)]])
        });
        let rot = VectorFn::new(2, |x: &[Jet]| Ok(vec![-&x[1], x[0].clone()]));
        let l = lie_derivative_metric(&rot, &g, &ChartPoint(vec![0.3, 2.0])).unwrap();
        assert!(max_abs(&l) < 1e-15);
        let scale = VectorFn::new(2, |x: &[Jet]| Ok(vec![x[0].clone(), x[1].clone()]));
        let l = lie_derivative_metric(&scale, &g, &ChartPoint(vec![0.3, 2.0])).unwrap();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-15 && (l[(1, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exterior_derivative_squares_to_zero() {
        let form = |x: &[Jet]| vec![&x[1] * &x[2].sin(), (&x[0] * &x[2]).exp(), &x[0] * &x[1].square()];
        let p = ChartPoint(vec![0.2, -0.4, 0.9]);
        let a = form(&p.seed(2).unwrap());
        let da: JetMatrix =
            (0..3).map(|i| (0..3).map(|j| a[j].partial(i).unwrap() - a[i].partial(j).unwrap()).collect()).collect();
        assert!(max_abs_slice(&d_two_form_jets(&da)) < 1e-13);
        let alpha = VectorFn::new(3, move |x: &[Jet]| Ok(form(x)));
        let da = exterior_derivative_one_form(&alpha, &p).unwrap();
        assert!(max_abs(&(&da + da.transpose())) < 1e-15);
        assert!((da[(0, 1)] - (x_exp(0.2, 0.9) * 0.9 - 0.9f64.sin())).abs() < 1e-14);
    }

    fn x_exp(x: f64, z: f64) -> f64 {
        (x * z).exp()
    }

    #[test]
    fn pullback_of_polar_coordinates() {
        let polar = MapFn { source: 2, target: 2, f: |x: &[Jet]| Ok(vec![&x[0] * &x[1].cos(), &x[0] * &x[1].sin()]) };
        let flat = FieldFn::new(2, |x: &[Jet]| {
            Ok(vec![vec![x[0].lift(1.0), x[0].zero_like()], vec![x[0].zero_like(), x[0].lift(1.0)]])
        });
        let g = pullback_metric(&polar, &flat, &ChartPoint(vec![1.5, 0.3])).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((g[(1, 1)] - 2.25).abs() < 1e-14);
        assert!(g[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn flat_connection_in_polar_chart() {
        let p = Jet::seed(&[1.5, 0.3], 3).unwrap();
        let f = vec![&p[0] * &p[1].cos(), &p[0] * &p[1].sin()];
        let gamma = pullback_flat_connection(&f).unwrap();
        let v = gamma.values();
        assert!((v.get(0, 1, 1) + 1.5).abs() < 1e-14);
        assert!((v.get(1, 0, 1) - 1.0 / 1.5).abs() < 1e-14);
        let r = curvature_from_connection(&gamma).unwrap();
        assert!(r.max_abs() < 1e-13);
    }

    #[test]
    fn complete_lift_vanishes_for_torsion_free_connection() {
        let p = ChartPoint(vec![1.2, 0.4]);
        let seed = p.seed(3).unwrap();
        let f = vec![&seed[0] * &seed[1].cos(), &seed[0] * &seed[1].sin()];
        let gamma = pullback_flat_connection(&f).unwrap().values();
        let x = VectorFn::new(2, |x: &[Jet]| Ok(vec![&x[0] * &x[1].sin(), x[0].square()]));
        let res = complete_lift_residual(&x, &gamma, &p, &[0.3, -0.8]).unwrap();
        assert!(max_abs_slice(&res) < 1e-14);
    }

    #[test]
    fn singular_metric_is_rejected() {
        let g = FieldFn::new(2, |x: &[Jet]| Ok(vec![vec![x[0].lift(1.0); 2], vec![x[0].lift(1.0); 2]]));
        assert!(matches!(christoffel(&g, &ChartPoint(vec![0.0, 0.0])), Err(Error::Singular(_))));
    }
}
