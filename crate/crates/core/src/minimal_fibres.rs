//! The case `ρ̄` constant, where the fibres are minimal: the reduced system, its complex form on an
//! isothermal chart, the closed-form solutions generated by a non-vanishing holomorphic `v`, the
//! Nil construction, and the two-dimensional gradient soliton equation left over when `C = 0`.

use crate::ansatz::{build_and_verify, BuildOptions, Built, SurfaceData};
use crate::cjet::CJet;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{Chart, DiffMode, Field, MetricField};
use crate::jet::Jet;
use crate::soliton_check::{g_norm, HorizontalDatum};
use crate::tensor_lab::{mat_values, LocalGeometry};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type CFn = Arc<dyn Fn(&CJet) -> Result<CJet> + Send + Sync>;

const GL_PANELS: usize = 16;
const GL4: [(f64, f64); 4] = [
    (-0.8611363115940526, 0.3478548451374538),
    (-0.3399810435848563, 0.6521451548625461),
    (0.3399810435848563, 0.6521451548625461),
    (0.8611363115940526, 0.3478548451374538),
];

/// Tolerance for the holomorphy and primitive checks.
const HOLO_TOL: f64 = 1e-8;

/// `(v, u, B, C, z₀)` on a rectangle of the `z = x + iy` plane.
#[derive(Clone)]
pub struct HolomorphicDatum {
    v: CFn,
    u: Option<CFn>,
    pub b: f64,
    pub c: f64,
    pub z0: [f64; 2],
    pub chart: Chart,
    label: String,
}

impl fmt::Debug for HolomorphicDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HolomorphicDatum({}, B = {}, C = {}, z0 = {:?})", self.label, self.b, self.c, self.z0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HolomorphicDoc {
    #[serde(default)]
    pub name: String,
    /// `v` as an expression in `z`.
    pub v: String,
    /// A primitive of `v`; computed by quadrature when absent.
    #[serde(default)]
    pub u: Option<String>,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub z0: [f64; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

/// Holomorphy and primitive defects measured on a grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolomorphicChecks {
    pub cauchy_riemann: f64,
    pub primitive: f64,
    pub min_abs_v: f64,
}

fn cabs(z: &CJet) -> f64 {
    let (a, b) = z.value();
    a.hypot(b)
}

fn creal(v: f64) -> CJet {
    CJet::cst(v, 0.0)
}

impl HolomorphicDatum {
    pub fn new(
        v: impl Fn(&CJet) -> Result<CJet> + Send + Sync + 'static,
        u: Option<CFn>,
        b: f64,
        c: f64,
        z0: [f64; 2],
        chart: Chart,
    ) -> Result<HolomorphicDatum> {
        if chart.dim() != 2 {
            return Err(Error::Invalid("a holomorphic datum lives on a 2-dimensional chart".into()));
        }
        if !(b > 0.0) || !(c >= 0.0) {
            return Err(Error::Invalid(format!("need B > 0 and C ≥ 0, got B = {b}, C = {c}")));
        }
        let d = HolomorphicDatum { v: Arc::new(v), u, b, c, z0, chart, label: "closure".into() };
        let checks = d.checks(9)?;
        if checks.min_abs_v <= 0.0 {
            return Err(Error::Invalid("v vanishes on the chart".into()));
        }
        if checks.cauchy_riemann > HOLO_TOL {
            return Err(Error::Invalid(format!("v is not holomorphic (defect {:e})", checks.cauchy_riemann)));
        }
        if checks.primitive > HOLO_TOL {
            return Err(Error::Invalid(format!("u′ differs from v by {:e}", checks.primitive)));
        }
        Ok(d)
    }

    pub fn from_doc(doc: &HolomorphicDoc) -> Result<HolomorphicDatum> {
        let ve = Expr::parse_complex(&doc.v, &["z"])?;
        let u: Option<CFn> = match &doc.u {
            Some(s) => {
                let ue = Expr::parse_complex(s, &["z"])?;
                Some(Arc::new(move |z: &CJet| ue.eval(std::slice::from_ref(z))))
            }
            None => None,
        };
        let chart = Chart::new(&["x", "y"], &doc.lo, &doc.hi)?;
        let mut d = HolomorphicDatum::new(move |z| ve.eval(std::slice::from_ref(z)), u, doc.b, doc.c, doc.z0, chart)?;
        d.label = format!("v = {}", doc.v);
        Ok(d)
    }

    pub fn from_json(src: &str) -> Result<HolomorphicDatum> {
        let doc: HolomorphicDoc = serde_json::from_str(src).map_err(|e| Error::Parse(e.to_string()))?;
        HolomorphicDatum::from_doc(&doc)
    }

    pub fn v(&self, z: &CJet) -> Result<CJet> {
        (self.v)(z)
    }

    fn z0(&self) -> CJet {
        CJet::cst(self.z0[0], self.z0[1])
    }

    /// `u(z) − u(z₀)`: from the supplied primitive, or by Gauss quadrature along the segment.
    pub fn primitive(&self, z: &CJet) -> Result<CJet> {
        if let Some(u) = &self.u {
            return Ok(u(z)? - u(&self.z0())?);
        }
        self.primitive_by_quadrature(z)
    }

    pub fn primitive_by_quadrature(&self, z: &CJet) -> Result<CJet> {
        let dz = *z - self.z0();
        let width = 1.0 / GL_PANELS as f64;
        let mut acc = CJet::cst(0.0, 0.0);
        for panel in 0..GL_PANELS {
            let mid = (panel as f64 + 0.5) * width;
            for (x, w) in GL4 {
                let s = mid + 0.5 * width * x;
                acc = acc + self.v(&(self.z0() + dz.scale(s)))?.scale(0.5 * width * w);
            }
        }
        Ok(acc * dz)
    }

    /// `λ̄ = B/|v|`.
    pub fn lambda_jet(&self, z: &CJet) -> Result<Jet> {
        Ok(self.v(z)?.norm_sq().sqrt().recip() * self.b)
    }

    /// `γ_z = −C v conj(u − u(z₀))/B²`.
    pub fn gamma_z(&self, z: &CJet) -> Result<CJet> {
        Ok((self.v(z)? * self.primitive(z)?.conj()).scale(-self.c / (self.b * self.b)))
    }

    /// `(λ̄, γ_z)` at a point.
    pub fn at(&self, z: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let zj = CJet::z(z[0], z[1], 0);
        let g = self.gamma_z(&zj)?.value();
        Ok((self.lambda_jet(&zj)?.value(), [g.0, g.1]))
    }

    pub fn checks(&self, n: usize) -> Result<HolomorphicChecks> {
        let mut out = HolomorphicChecks { cauchy_riemann: 0.0, primitive: 0.0, min_abs_v: f64::INFINITY };
        for p in self.chart.grid(&[n, n])? {
            let z = CJet::z(p[0], p[1], 1);
            let v = self.v(&z)?;
            out.min_abs_v = out.min_abs_v.min(cabs(&v));
            out.cauchy_riemann = out.cauchy_riemann.max(cabs(&v.dzbar()));
            if let Some(u) = &self.u {
                out.primitive = out.primitive.max(cabs(&(u(&z)?.dz() - v)));
            }
        }
        Ok(out)
    }

    /// `v ≡ 1, B = 1, C = ½`: the datum whose construction is Nil in standard form.
    pub fn is_standard_nil(&self) -> bool {
        let one = self.chart.grid(&[3, 3]).map(|pts| {
            pts.iter()
                .all(|p| self.v(&CJet::z(p[0], p[1], 0)).map(|v| cabs(&(v - creal(1.0))) < 1e-14).unwrap_or(false))
        });
        matches!(one, Ok(true)) && self.b == 1.0 && self.c == 0.5
    }

    /// Surface data with `h` flat, `ρ̄ ≡ 1`, `ψ̄ = C`, `A = 3C` and `Ȳ = grad γ`; only `dγ` is known
    /// in closed form, so the vector variant of the horizontal datum is used.
    pub fn surface_data(&self, name: &str) -> Result<SurfaceData> {
        let h = MetricField::from_exprs(self.chart.clone(), &["1", "0", "1"])?;
        let me = self.clone();
        let lambda = Field::from_jet_fn(2, 1, move |x| Ok(vec![me.lambda_jet(&CJet::new(x[0], x[1]))?]));
        let me = self.clone();
        let y = Field::from_jet_fn(2, 2, move |x| {
            let g = me.gamma_z(&CJet::new(x[0], x[1]))?;
            Ok(vec![g.re * 2.0, -(g.im * 2.0)])
        });
        SurfaceData::new(
            name,
            h,
            lambda,
            Field::constant(2, vec![1.0]),
            HorizontalDatum::Vector(y),
            Field::constant(2, vec![self.c]),
            3.0 * self.c,
        )
    }
}

/// Left sides of the reduced system `(i)`, `(ii)` and the trace-free umbilicity norm.
pub fn minbis_residuals(h: &MetricField, lambda: &Field, nu: &Field, c: f64, a: f64, p: &[f64]) -> Result<[f64; 3]> {
    let data = SurfaceData::new(
        "minimal",
        h.clone(),
        lambda.clone(),
        Field::constant(2, vec![1.0]),
        HorizontalDatum::Potential(nu.clone()),
        Field::constant(2, vec![c]),
        a,
    )?;
    let r = data.system_residuals(p)?;
    Ok([r.r_i, r.r_iia, r.r_u])
}

/// How `γ` enters the complex system.
#[derive(Clone)]
pub enum GammaInput {
    Potential(Field),
    /// `γ_z` as a function of `z`, not necessarily holomorphic.
    Derivative(CFn),
}

/// Moduli of the three complex residuals.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ComplexResiduals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl ComplexResiduals {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3)
    }
}

/// `r1 = 4β_zz̄ − ((3C−A)/2)e^{−2β}`, `r2 = 4∂_z̄γ_z + (C+A)e^{−2β}`, `r3 = ∂_zγ_z + 2γ_zβ_z`.
pub fn complex_residuals(beta: &Field, gamma: &GammaInput, c: f64, a: f64, z: [f64; 2]) -> Result<ComplexResiduals> {
    let step = crate::field::DEFAULT_FD_STEP;
    let b = CJet::real(beta.expand(&z, 2, DiffMode::Analytic, step)?[0]);
    let gz = match gamma {
        GammaInput::Potential(g) => CJet::real(g.expand(&z, 2, DiffMode::Analytic, step)?[0]).dz(),
        GammaInput::Derivative(f) => f(&CJet::z(z[0], z[1], 2))?,
    };
    let bz = b.dz();
    let e = (-2.0 * b.re.value()).exp();
    let r1 = bz.dzbar().scale(4.0) - creal(0.5 * (3.0 * c - a) * e);
    let r2 = gz.dzbar().scale(4.0) + creal((c + a) * e);
    let r3 = gz.dz() + (gz * bz).scale(2.0);
    Ok(ComplexResiduals { r1: cabs(&r1), r2: cabs(&r2), r3: cabs(&r3) })
}

/// `|K h + ∇d ln ν̄ + A h|_h`.
pub fn twod_soliton_residual(h: &MetricField, nu: &Field, a: f64, p: &[f64]) -> Result<f64> {
    let geo = LocalGeometry::at(h, p, 2)?;
    let k = geo.trace(&geo.ricci()).value() / 2.0;
    let c = &h.chart;
    let n = nu.expand(p, 2, c.mode, c.fd_step)?[0];
    if n.value() <= 0.0 {
        return Err(Error::Invalid(format!("ν̄ must be positive, fails at {p:?}")));
    }
    let hm = mat_values(&geo.g);
    let t = &hm * (k + a) + mat_values(&geo.hessian(&n.ln()));
    Ok(g_norm(&mat_values(&geo.ginv), &t))
}

#[derive(Serialize)]
pub struct MinimalReport {
    pub checks: HolomorphicChecks,
    /// Largest `|g_built − φ*g_Nil|` over the grid, for the standard datum only.
    pub isometry_witness: Option<f64>,
    /// Largest two-dimensional soliton residual, on the `C = 0` branch.
    pub twod_residual: Option<f64>,
    pub pass: bool,
}

pub struct MinimalBuild {
    pub built: Option<Built>,
    pub report: MinimalReport,
}

/// `g_Nil = dy₁² + dy₂² + (y₁dy₂ + dy₃)²` pulled back by `y₃ = t − y₁y₂/2`.
fn nil_pullback(p: &[f64]) -> Result<DMatrix<f64>> {
    let x = Jet::seed(p, 1);
    let y = [x[0], x[1], x[2] - x[0] * x[1] * 0.5];
    let g = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.0, 0.0, 0.0, 1.0 + y[0].value().powi(2), y[0].value(), 0.0, y[0].value(), 1.0],
    );
    let j = DMatrix::from_fn(3, 3, |a, i| y[a].d1(i));
    Ok(j.transpose() * g * j)
}

/// Builds the soliton of a holomorphic datum. For `v ≡ 1` the result is compared with the standard
/// Nil metric; for `C = 0` the two-dimensional reduction is checked instead of building.
pub fn nil_build(d: &HolomorphicDatum, opts: &BuildOptions) -> Result<MinimalBuild> {
    let checks = d.checks(9)?;
    if d.c == 0.0 {
        // after h → h/λ̄², the flat metric |v|²|dz|²/B² with ν̄ ≡ 1 and A = 3C = 0
        let me = d.clone();
        let h = MetricField::from_fn(d.chart.clone(), move |x| {
            let l = me.lambda_jet(&CJet::new(x[0], x[1]))?;
            let w = (l * l).recip();
            Ok(vec![vec![w, Jet::cst(0.0)], vec![Jet::cst(0.0), w]])
        })?;
        let one = Field::constant(2, vec![1.0]);
        let mut worst = 0.0f64;
        for p in d.chart.grid(&[opts.counts[0], opts.counts[1]])? {
            worst = worst.max(twod_soliton_residual(&h, &one, 0.0, &p)?);
        }
        return Ok(MinimalBuild {
            built: None,
            report: MinimalReport {
                checks,
                isometry_witness: None,
                twod_residual: Some(worst),
                pass: worst < opts.tol,
            },
        });
    }
    let data = Arc::new(d.surface_data("minimal")?);
    let built = build_and_verify(&data, opts)?;
    let isometry_witness = if d.is_standard_nil() {
        let g = &built.fibration.setup.g;
        let mut worst = 0.0f64;
        for p in g.chart.grid(&opts.counts)? {
            worst = worst.max((g.matrix(&p)? - nil_pullback(&p)?).amax());
        }
        Some(worst)
    } else {
        None
    };
    let pass = built.report.pass && isometry_witness.is_none_or(|w| w < 1e-8);
    Ok(MinimalBuild {
        built: Some(built),
        report: MinimalReport { checks, isometry_witness, twod_residual: None, pass },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton_check::{soliton_residual, SolitonCandidate};

    fn square() -> Chart {
        Chart::new(&["x", "y"], &[-1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    fn doc(v: &str, u: Option<&str>, b: f64, c: f64) -> HolomorphicDoc {
        HolomorphicDoc {
            name: String::new(),
            v: v.into(),
            u: u.map(String::from),
            b,
            c,
            z0: [0.0, 0.0],
            lo: [-1.0, -1.0],
            hi: [1.0, 1.0],
        }
    }

    fn datum(v: &str, u: Option<&str>, b: f64, c: f64) -> HolomorphicDatum {
        HolomorphicDatum::from_doc(&doc(v, u, b, c)).unwrap()
    }

    #[test]
    fn minbis_examples() {
        let flat = MetricField::from_exprs(square(), &["1", "0", "1"]).unwrap();
        let one = Field::constant(2, vec![1.0]);
        let nu = Field::from_exprs(&["x", "y"], &["exp(-(x^2+y^2)/2)"]).unwrap();
        let r = minbis_residuals(&flat, &one, &nu, 0.5, 1.5, &[0.3, -0.2]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");

        let cigar = MetricField::from_exprs(square(), &["1/(1+x^2+y^2)", "0", "1/(1+x^2+y^2)"]).unwrap();
        let nu = Field::from_exprs(&["x", "y"], &["1/(1+x^2+y^2)"]).unwrap();
        let r = minbis_residuals(&cigar, &one, &nu, 0.0, 0.0, &[0.4, 0.7]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");

        // constant curvature branch C + A = 0 needs a base of curvature 2
        let round = MetricField::from_exprs(square(), &["2/(1+x^2+y^2)^2", "0", "2/(1+x^2+y^2)^2"]).unwrap();
        let r = minbis_residuals(&round, &one, &one, 1.0, -1.0, &[0.1, 0.5]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn complex_residuals_examples() {
        let zero = Field::constant(2, vec![0.0]);
        let nil_gamma = Field::from_exprs(&["x", "y"], &["-(x^2+y^2)/2"]).unwrap();
        let r = complex_residuals(&zero, &GammaInput::Potential(nil_gamma), 0.5, 1.5, [0.3, 0.6]).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");

        let k = GammaInput::Potential(Field::constant(2, vec![3.0]));
        let r = complex_residuals(&zero, &k, 1.0, -1.0, [0.2, 0.1]).unwrap();
        assert!(r.r2 < 1e-14 && r.r3 < 1e-14);

        let harmonic = Field::from_exprs(&["x", "y"], &["x^2-y^2"]).unwrap();
        let r = complex_residuals(&harmonic, &k, 1.0, 1.0, [0.2, 0.1]).unwrap();
        assert!(r.r1 > 0.1, "{r:?}");
    }

    #[test]
    fn exponential_datum_solves_complex_system() {
        let d = datum("exp(z)", None, 1.0, 0.5);
        let me = d.clone();
        let beta = Field::from_jet_fn(2, 1, move |x| Ok(vec![me.lambda_jet(&CJet::new(x[0], x[1]))?.ln()]));
        let me = d.clone();
        let gz = GammaInput::Derivative(Arc::new(move |z: &CJet| me.gamma_z(z)));
        for z in [[0.3, 0.2], [-0.7, 0.9], [0.9, -0.4]] {
            let r = complex_residuals(&beta, &gz, 0.5, 1.5, z).unwrap();
            assert!(r.max() < 1e-6, "{z:?}: {r:?}");
            let (l, _) = d.at(z).unwrap();
            assert!((l - (-z[0]).exp()).abs() < 1e-14);
            // away from A = 3C the system fails
            let r = complex_residuals(&beta, &gz, 0.5, 1.0, z).unwrap();
            assert!(r.max() > 1e-2);
        }
    }

    #[test]
    fn from_holomorphic_examples() {
        let d = datum("1", None, 1.0, 0.5);
        let (l, g) = d.at([0.4, -0.3]).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        assert!((g[0] + 0.2).abs() < 1e-14 && (g[1] + 0.15).abs() < 1e-14, "{g:?}");

        let d1 = datum("exp(z)", Some("exp(z)"), 1.0, 0.5);
        let d2 = datum("exp(z)", Some("exp(z)"), 2.0, 0.5);
        let z = [0.5, 0.25];
        let ((l1, g1), (l2, g2)) = (d1.at(z).unwrap(), d2.at(z).unwrap());
        assert!((l2 - 2.0 * l1).abs() < 1e-14);
        assert!((g2[0] - g1[0] / 4.0).abs() < 1e-14 && (g2[1] - g1[1] / 4.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_primitive_is_path_independent() {
        let d = datum("exp(z)", Some("exp(z)"), 1.0, 0.5);
        for p in [[0.9, 0.8], [-0.6, 0.3], [0.0, -1.0]] {
            let z = CJet::z(p[0], p[1], 2);
            let (a, b) = (d.primitive(&z).unwrap(), d.primitive_by_quadrature(&z).unwrap());
            let diff = a - b;
            assert!(cabs(&diff) < 1e-13 && cabs(&diff.dz()) < 1e-13 && cabs(&diff.dzbar()) < 1e-13);
        }
    }

    #[test]
    fn invalid_data_rejected() {
        assert!(HolomorphicDatum::from_doc(&doc("z", None, 1.0, 0.5)).is_err());
        let anti = HolomorphicDatum::new(|z: &CJet| Ok(z.conj() + creal(2.0)), None, 1.0, 0.5, [0.0, 0.0], square());
        assert!(matches!(anti, Err(Error::Invalid(m)) if m.contains("holomorphic")));
        assert!(HolomorphicDatum::from_doc(&doc("exp(z)", Some("exp(2*z)"), 1.0, 0.5)).is_err());
        assert!(HolomorphicDatum::from_doc(&doc("1", None, 0.0, 0.5)).is_err());
        assert!(matches!(HolomorphicDatum::from_json("[]"), Err(Error::Parse(_))));
    }

    #[test]
    fn nil_from_standard_datum() {
        let d = datum("1", None, 1.0, 0.5);
        assert!(d.is_standard_nil());
        let out = nil_build(&d, &BuildOptions { counts: [5, 5, 3], ..BuildOptions::default() }).unwrap();
        assert!(out.report.isometry_witness.unwrap() < 1e-8);
        assert!(out.report.pass, "{:#?}", out.built.unwrap().report);
        // ψ̄ is constant, so the (ii)(b) value has no spread
        assert!(out.built.unwrap().report.system.iib_std < 1e-10);
    }

    #[test]
    fn perturbed_datum_is_a_soliton() {
        let d = datum("1+0.1*z", None, 1.0, 0.5);
        assert!(!d.is_standard_nil());
        let out = nil_build(&d, &BuildOptions { counts: [5, 5, 3], tol: 1e-4, ..BuildOptions::default() }).unwrap();
        assert!(out.report.isometry_witness.is_none());
        let b = out.built.unwrap();
        assert!(b.report.soliton.max < 1e-4, "{}", b.report.soliton.max);
        assert!(b.report.pass, "{:#?}", b.report);
    }

    #[test]
    fn degenerate_datum_reduces_to_surface_soliton() {
        let d = datum("exp(z)", None, 1.0, 0.0);
        let out = nil_build(&d, &BuildOptions::default()).unwrap();
        assert!(out.built.is_none());
        assert!(out.report.twod_residual.unwrap() < 1e-10);
    }

    #[test]
    fn cigar_twod_against_product_soliton() {
        let cigar = MetricField::from_exprs(square(), &["1/(1+x^2+y^2)", "0", "1/(1+x^2+y^2)"]).unwrap();
        let nu = Field::from_exprs(&["x", "y"], &["1/(1+x^2+y^2)"]).unwrap();
        let c3 = Chart::new(&["x", "y", "t"], &[-1.0; 3], &[1.0; 3]).unwrap();
        let g = MetricField::from_exprs(c3, &["1/(1+x^2+y^2)", "0", "0", "1/(1+x^2+y^2)", "0", "1"]).unwrap();
        let e = Field::from_exprs(&["x", "y", "t"], &["-2*x", "-2*y", "0"]).unwrap();
        let cand = SolitonCandidate::new(g, e, 0.0).unwrap();
        for p in [[0.1, 0.2], [-0.8, 0.5], [0.9, 0.9]] {
            assert!(twod_soliton_residual(&cigar, &nu, 0.0, &p).unwrap() < 1e-12);
            assert!(soliton_residual(&cand, &[p[0], p[1], 0.3]).unwrap().norm() < 1e-12);
        }
        let flat = MetricField::from_exprs(square(), &["1", "0", "1"]).unwrap();
        let one = Field::constant(2, vec![1.0]);
        assert!(twod_soliton_residual(&flat, &one, 0.0, &[0.2, 0.2]).unwrap() < 1e-15);
        let sphere = MetricField::from_exprs(square(), &["4/(1+x^2+y^2)^2", "0", "4/(1+x^2+y^2)^2"]).unwrap();
        assert!(twod_soliton_residual(&sphere, &one, -1.0, &[0.3, -0.6]).unwrap() < 1e-12);
    }
}
