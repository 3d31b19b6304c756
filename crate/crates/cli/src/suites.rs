//! Verification suites. Each samples seeded points, evaluates every check at
//! every point in parallel, and aggregates in point order so reports do not
//! depend on scheduling.

use cmap_core::cmap::{self, DeformedCmap, PseudoUnitary, Rearrangement};
use cmap_core::geometry::{self, max_abs, max_abs_slice, vector_values, ChartPoint, VectorField, VectorFn};
use cmap_core::jet::Jet;
use cmap_core::psk::{self, ComplexHyperbolic};
use cmap_core::sampling;
use cmap_core::twist::{hamiltonian_of_section, verify_rigid, ParallelSection};
use cmap_core::vphs::{verify_isomorphism, verify_vphs, Vphs};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{RunConfig, Suite};
use crate::report::{Bound, Check, Derived, SuiteReport};

/// Where a check takes its tolerance from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Structural,
    FiniteDifference,
    /// Identities that involve second derivatives of the metric or a fit;
    /// these carry more rounding than first-order structure.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
struct CheckDef {
    key: &'static str,
    statement: &'static str,
    bound: Bound,
    tolerance: Tolerance,
    gating: bool,
}

const fn residual(key: &'static str, statement: &'static str) -> CheckDef {
    CheckDef { key, statement, bound: Bound::Residual, tolerance: Tolerance::Structural, gating: true }
}

impl CheckDef {
    const fn tol(mut self, t: Tolerance) -> Self {
        self.tolerance = t;
        self
    }

    const fn bound(mut self, b: Bound) -> Self {
        self.bound = b;
        self
    }

    const fn informational(mut self) -> Self {
        self.gating = false;
        self
    }
}

type Row = Vec<(CheckDef, f64)>;

fn entry_rows(entries: Vec<(&'static str, f64)>, statement: &'static str, tol: impl Fn(&str) -> Tolerance) -> Row {
    entries.into_iter().map(|(key, v)| (residual(key, statement).tol(tol(key)), v)).collect()
}

fn structural(_: &str) -> Tolerance {
    Tolerance::Structural
}

struct Sampler<'a> {
    cfg: &'a RunConfig,
    seed: u64,
}

impl Sampler<'_> {
    fn resolve(&self, t: Tolerance) -> f64 {
        match t {
            Tolerance::Structural => self.cfg.tol_structural,
            Tolerance::FiniteDifference => self.cfg.tol_fd,
            Tolerance::Fixed(v) => v,
        }
    }

    /// Evaluates `f` on each input in parallel, then aggregates per check.
    fn run<I: Sync>(
        &self,
        inputs: &[I],
        f: impl Fn(&I) -> cmap_core::Result<Row> + Sync,
    ) -> Result<Vec<Check>, String> {
        let rows: Vec<Row> = inputs.par_iter().map(&f).collect::<cmap_core::Result<_>>().map_err(|e| e.to_string())?;
        let Some(first) = rows.first() else { return Ok(Vec::new()) };
        let mut checks = Vec::with_capacity(first.len());
        for (i, (def, _)) in first.iter().enumerate() {
            let samples: Vec<f64> =
                rows.iter().map(|r| r.get(i).filter(|(s, _)| s.key == def.key).map_or(f64::NAN, |(_, v)| *v)).collect();
            checks.push(self.check(*def, samples));
        }
        Ok(checks)
    }

    fn check(&self, def: CheckDef, samples: Vec<f64>) -> Check {
        let value = def.bound.aggregate(&samples);
        let tolerance = match def.bound {
            Bound::Residual => self.resolve(def.tolerance),
            Bound::Positive | Bound::Negative => 0.0,
        };
        Check {
            key: def.key,
            statement: def.statement,
            bound: def.bound,
            value,
            tolerance,
            pass: def.bound.passes(value, tolerance),
            gating: def.gating,
            points: samples.len(),
            samples,
        }
    }
}

/// Seed for one suite, so suites can be run separately and still agree.
pub fn suite_seed(seed: u64, suite: Suite) -> u64 {
    let index = Suite::ALL.iter().position(|s| *s == suite).unwrap_or(0) as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index + 1)
}

/// Runs one suite; derived constants it measures are written into `derived`.
pub fn run_suite(cfg: &RunConfig, suite: Suite, derived: &mut Derived) -> SuiteReport {
    let seed = suite_seed(cfg.seed, suite);
    let sampler = Sampler { cfg, seed };
    let result = match suite {
        Suite::Psk => psk_suite(&sampler),
        Suite::Vphs => vphs_suite(&sampler),
        Suite::Rigid => rigid_suite(&sampler),
        Suite::Twist => twist_suite(&sampler),
        Suite::Cmap => cmap_suite(&sampler, derived),
        Suite::Einstein => einstein_suite(&sampler, derived),
        Suite::Heisenberg => heisenberg_suite(&sampler),
        Suite::Isometry => isometry_suite(&sampler),
    };
    match result {
        Ok(checks) => SuiteReport::new(suite, seed, cfg.points, checks),
        Err(e) => SuiteReport::failed(suite, seed, cfg.points, e),
    }
}

fn fibre_points(s: &Sampler) -> Vec<ChartPoint> {
    let mut rng = sampling::rng(s.seed);
    (0..s.cfg.points).map(|_| ChartPoint(sampling::fibre_point(&mut rng, s.cfg.n, s.cfg.k))).collect()
}

fn model(s: &Sampler) -> Result<DeformedCmap, String> {
    DeformedCmap::new(s.cfg.n, s.cfg.k).map_err(|e| e.to_string())
}

const CONE_STATEMENT: &str = "conical special Kähler axioms of the cone over CH^n";
const CHI_STATEMENT: &str = "connection form identities on the cone";

fn psk_suite(s: &Sampler) -> Result<Vec<Check>, String> {
    let n = s.cfg.n;
    let model = ComplexHyperbolic::new(n).map_err(|e| e.to_string())?;
    let scale = psk::calibrate_projective_scale().map_err(|e| e.to_string())?;
    let mut rng = sampling::rng(s.seed);
    let d = model.cone_dim();
    let inputs: Vec<_> = (0..s.cfg.points)
        .map(|_| {
            let p = ChartPoint(sampling::cone_point(&mut rng, n));
            (p, sampling::direction(&mut rng, d), sampling::direction(&mut rng, d))
        })
        .collect();
    let curvature = if n == 1 {
        residual(
            "projective-curvature-calibration",
            "base curvature cancels the projective model tensor (calibration dimension)",
        )
        .informational()
    } else {
        residual("projective-curvature", "base curvature cancels the calibrated projective model tensor")
            .tol(Tolerance::Fixed(1e-8))
    };
    s.run(&inputs, |(p, u, v)| {
        let mut row = entry_rows(psk::verify_conical_axioms(&model, p)?.entries(), CONE_STATEMENT, structural);
        row.extend(entry_rows(psk::verify_connection_form(&model, p)?.entries(), CHI_STATEMENT, structural));
        let xi = vector_values(&model.euler_field(&p.seed(1)?));
        let mut diff: f64 = 0.0;
        for w in [v, &xi] {
            diff = diff.max(max_abs_slice(&psk::levi_civita_difference(&model, p, u, w)?));
        }
        row.push((
            residual("levi-civita-difference", "cone and base Levi-Civita connections differ by the chi terms"),
            diff,
        ));
        let (pos, neg) = geometry::signature(&geometry::values(&model.cone_metric(&p.seed(1)?)?));
        let mismatch = (pos as f64 - 2.0 * n as f64).abs() + (neg as f64 - 2.0).abs();
        row.push((residual("cone-metric-signature", "cone metric has signature (2n, 2)"), mismatch));
        if n > 0 {
            let base = ChartPoint(p.0[..2 * n].to_vec());
            row.push((curvature, psk::projective_curvature_residual(&model, &base, scale)?));
        }
        Ok(row)
    })
}

fn vphs_suite(s: &Sampler) -> Result<Vec<Check>, String> {
    let n = s.cfg.n;
    let v = Vphs::new(ComplexHyperbolic::new(n).map_err(|e| e.to_string())?);
    let rank = v.rank();
    let d = v.model().cone_dim();
    let mut rng = sampling::rng(s.seed);
    let inputs: Vec<_> = (0..s.cfg.points)
        .map(|_| {
            let base = sampling::complex_ball(&mut rng, n, sampling::BALL_RADIUS);
            let raw = sampling::direction(&mut rng, 2 * rank);
            let probe: Vec<Complex64> = raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let cone = ChartPoint(sampling::cone_point(&mut rng, n));
            (base, probe, cone, sampling::direction(&mut rng, d), sampling::direction(&mut rng, d))
        })
        .collect();
    let tol = |key: &str| if key == "gauss-manin-curvature" { Tolerance::Fixed(1e-8) } else { Tolerance::Structural };
    s.run(&inputs, |(base, probe, cone, x, y)| {
        let res = verify_vphs(&v, base, probe)?;
        let mut row = entry_rows(res.entries(), "polarized variation of Hodge structure over CH^n", tol);
        row.push((
            residual("polarization-positive", "Weil form is positive on every real Hodge summand")
                .bound(Bound::Positive),
            res.polarization_margin,
        ));
        let iso = verify_isomorphism(&v, cone, x, y)?;
        row.extend(entry_rows(
            iso.entries(),
            "cone tangent bundle is identified with the line-bundle summands",
            structural,
        ));
        Ok(row)
    })
}

fn rigid_suite(s: &Sampler) -> Result<Vec<Check>, String> {
    let cmap = model(s)?;
    let data = cmap.data();
    let n = s.cfg.n;
    let basis = ParallelSection::basis(n);
    let tol =
        |key: &str| if key == "hyperkahler-forms-closed" { Tolerance::Fixed(1e-8) } else { Tolerance::Structural };
    s.run(&fibre_points(s), |p| {
        let res = verify_rigid(data, p)?;
        let mut row = entry_rows(res.entries(), "rigid c-map hyperkähler structure and its twist data", tol);
        let (pos, neg) = res.signature;
        let mismatch = (pos as f64 - 4.0 * n as f64).abs() + (neg as f64 - 4.0).abs();
        row.push((residual("flat-metric-signature", "rigid metric has signature (4n, 4)"), mismatch));
        row.push((
            residual("elementary-deformation-positive", "elementary deformation is positive definite")
                .bound(Bound::Positive),
            res.deformation_min_eigenvalue,
        ));
        let (mut ham, mut killing, mut invariance) = (0f64, 0f64, 0f64);
        for sec in &basis {
            let h = hamiltonian_of_section(data, sec, p)?;
            ham = ham.max(h.residual);
            killing = killing.max(h.killing);
            invariance = invariance.max(h.invariance);
        }
        row.push((
            residual("section-field-hamiltonian", "parallel sections act by twist-form Hamiltonian fields"),
            ham,
        ));
        row.push((
            residual("section-field-killing", "parallel section fields are Killing for the rigid metric"),
            killing,
        ));
        row.push((
            residual("section-field-invariance", "section fields preserve f, the connection and the Kähler forms"),
            invariance,
        ));
        Ok(row)
    })
}

fn twist_suite(s: &Sampler) -> Result<Vec<Check>, String> {
    let cmap = model(s)?;
    let tw = cmap.twist();
    let dim = cmap.dim();
    let mut rng = sampling::rng(s.seed);
    let inputs: Vec<_> = (0..s.cfg.points)
        .map(|_| {
            let p = ChartPoint(sampling::fibre_point(&mut rng, s.cfg.n, s.cfg.k));
            (p, sampling::direction(&mut rng, dim), sampling::direction(&mut rng, dim))
        })
        .collect();
    let z = VectorFn::new(dim, |x: &[Jet]| Ok(tw.data().fundamental_field(x)));
    let lift = cmap.rotation_lift();
    s.run(&inputs, |(p, alpha, x)| {
        let mut row =
            entry_rows(tw.contraction_identities(p, alpha, x)?.entries(), "twist preserves contractions", structural);
        let (mut ham, mut quotient) = (0f64, 0f64);
        for field in [&z as &dyn VectorField, &lift] {
            let res = tw.symmetry_twist(field, p)?;
            ham = ham.max(res.hamiltonian_residual);
            quotient = quotient.max(res.quotient_residual);
        }
        row.push((
            residual("symmetry-twist-hamiltonian", "twisted symmetries are Hamiltonian for the twist form"),
            ham,
        ));
        row.push((residual("symmetry-twist-quotient", "twisted symmetries descend to the quotient"), quotient));
        Ok(row)
    })
}

fn cmap_suite(s: &Sampler, derived: &mut Derived) -> Result<Vec<Check>, String> {
    let cmap = model(s)?;
    let points = fibre_points(s);
    let fit = cmap::fit_twist_scale(&cmap, &points).map_err(|e| e.to_string())?;
    derived.twist_scale = Some(fit.scale);
    let h = 1e-6;
    let mut checks = s.run(&points, |p| {
        let fs = cmap.metric_fs_at(p)?;
        let mut row = Vec::new();
        for (def, how) in [
            (
                residual(
                    "assembled-griffiths-vs-closed-form",
                    "metric assembled from the Griffiths form equals the closed form",
                ),
                Rearrangement::Griffiths,
            ),
            (
                residual("assembled-weil-vs-closed-form", "metric assembled from the Weil form equals the closed form"),
                Rearrangement::Weil,
            ),
        ] {
            row.push((def, cmap::relative_difference(&cmap.metric_assembled(p, how)?, &fs)));
        }
        let tw = cmap.metric_via_twist(p)? * fit.scale;
        row.push((
            residual("twist-vs-closed-form", "scaled twist of the elementary deformation equals the closed form"),
            cmap::relative_difference(&tw, &fs),
        ));
        // first derivatives of the closed form against central differences
        let jets = cmap.metric_fs(&p.seed(1)?)?;
        let mut worst: f64 = 0.0;
        for c in 0..p.dim() {
            let shifted = |sign: f64| {
                let mut q = p.clone();
                q.0[c] += sign * h;
                cmap.metric_fs_at(&q)
            };
            let fd = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h);
            for (a, row_j) in jets.iter().enumerate() {
                for (b, entry) in row_j.iter().enumerate() {
                    let ad = entry.gradient()[c];
                    worst = worst.max((ad - fd[(a, b)]).abs() / ad.abs().max(1.0));
                }
            }
        }
        row.push((
            residual(
                "metric-derivative-vs-finite-difference",
                "jet derivatives of the metric match central differences",
            )
            .tol(Tolerance::FiniteDifference),
            worst,
        ));
        let eig = fs.symmetric_eigen().eigenvalues.min();
        row.push((
            residual("metric-positive-definite", "closed-form metric is positive definite").bound(Bound::Positive),
            eig,
        ));
        Ok(row)
    })?;
    checks.push(
        s.check(residual("twist-scale-constant", "twist-route scale c is the same at every point"), vec![fit.spread]),
    );
    Ok(checks)
}

fn einstein_suite(s: &Sampler, derived: &mut Derived) -> Result<Vec<Check>, String> {
    let cmap = model(s)?;
    let points = fibre_points(s);
    let fits: Vec<_> = points
        .par_iter()
        .map(|p| cmap::einstein_fit(&cmap, p))
        .collect::<cmap_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    let lambdas: Vec<f64> = fits.iter().map(|f| f.lambda).collect();
    let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    derived.einstein_constant = Some(mean);
    let spread = lambdas.iter().fold(0.0f64, |m, l| m.max((l - mean).abs()));
    Ok(vec![
        s.check(
            residual("einstein-residual", "Ric = λ g, relative Frobenius residual").tol(Tolerance::Fixed(1e-7)),
            fits.iter().map(|f| f.residual).collect(),
        ),
        s.check(
            residual("einstein-constant-negative", "Einstein constant is negative").bound(Bound::Negative),
            lambdas,
        ),
        s.check(
            residual("einstein-constant-uniform", "Einstein constant does not depend on the point")
                .tol(Tolerance::Fixed(1e-7)),
            vec![spread],
        ),
    ])
}

fn heisenberg_suite(s: &Sampler) -> Result<Vec<Check>, String> {
    let cmap = model(s)?;
    let basis = ParallelSection::basis(s.cfg.n);
    s.run(&fibre_points(s), |p| {
        let res = cmap::heisenberg_residuals(&cmap, p)?;
        let mut composition: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for b in &basis[i + 1..] {
                composition = composition.max(cmap::heisenberg_composition(&cmap, a, b, p)?);
            }
        }
        Ok(vec![
            (residual("heisenberg-bracket", "[w_s1, w_s2] = Q(s1, s2) Z_k as printed"), res.bracket),
            (
                residual("heisenberg-bracket-opposite-sign", "[w_s1, w_s2] = -Q(s1, s2) Z_k with [X, Y] = XY - YX")
                    .informational(),
                res.bracket_opposite_sign,
            ),
            (residual("heisenberg-central", "[w_s, Z_k] = 0"), res.central),
            (residual("heisenberg-killing", "w_s and Z_k are Killing"), res.killing),
            (residual("heisenberg-composition", "flows compose up to the t-shift Q(s1, s2)/2"), composition),
        ])
    })
}

const MATRICES: usize = 5;

fn isometry_suite(s: &Sampler) -> Result<Vec<Check>, String> {
    let cmap = model(s)?;
    let mut rng = sampling::rng(s.seed ^ 0x5EED);
    let matrices: Vec<PseudoUnitary> = (0..MATRICES).map(|_| PseudoUnitary::random(&mut rng, s.cfg.n)).collect();
    let inputs: Vec<_> = fibre_points(s).into_iter().enumerate().collect();
    let lift = cmap.rotation_lift();
    let killing = cmap.rotation_killing_field();
    let metric = cmap.metric_field();
    s.run(&inputs, |(i, p)| {
        let pullback = cmap::isometry_residual(&cmap, &matrices[i % MATRICES], p)?;
        let tw = cmap.twist().symmetry_twist(&lift, p)?;
        let closed_form = cmap.rotation_hamiltonian(p)?;
        let lie = max_abs(&geometry::lie_derivative_metric(&killing, &metric, p)?);
        Ok(vec![
            (
                residual("lifted-isometry-pullback", "lifted pseudo-unitary maps preserve the metric")
                    .tol(Tolerance::Fixed(1e-8)),
                pullback,
            ),
            (
                residual("rotation-hamiltonian-identity", "rotation lift is Hamiltonian for the twist form"),
                tw.hamiltonian_residual,
            ),
            (
                residual("rotation-hamiltonian-closed-form", "rotation Hamiltonian equals its closed form"),
                (tw.hamiltonian - closed_form).abs(),
            ),
            (residual("rotation-killing", "twisted rotation is Killing"), lie),
        ])
    })
}

/// Runs the configured suites in order.
pub fn run_all(cfg: &RunConfig, timing: bool) -> (Vec<SuiteReport>, Derived) {
    let mut derived = Derived::default();
    let reports = cfg
        .suites
        .iter()
        .map(|suite| {
            let start = std::time::Instant::now();
            let mut r = run_suite(cfg, *suite, &mut derived);
            if timing {
                r.wall_time_seconds = Some(start.elapsed().as_secs_f64());
            }
            r
        })
        .collect();
    (reports, derived)
}
