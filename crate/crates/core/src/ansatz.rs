//! Surface data `(h, λ̄, ρ̄, ν̄, ψ̄, A)` on a surface `N`, the system of equations it must satisfy,
//! and the assembly of a 3-dimensional soliton fibring over `N`.
//!
//! The construction sets `Ω̄ = σ̄ vol_h` with `σ̄ = √(2ψ̄)/λ̄²`, finds `ᾱ` with `dᾱ = ρ̄Ω̄` by the radial
//! homotopy from the chart centre, and puts `θ = (ᾱ + R dt)/ρ̄` and `g = h/λ̄² + θ²` on `N × (−δ, δ)`.

use crate::error::{Error, Result};
use crate::field::{Chart, Field, MetricField};
use crate::jet::Jet;
use crate::semiconformal::SubmersionSetup;
use crate::soliton_check::{
    g_norm, residual_report, HorizontalDatum, ResidualReport, SolitonCandidate, VerticalProblem,
};
use crate::tensor_lab::{curvature, d0, d1, d2, mat_values, norm_sq_1, vec_values, wedge, LocalGeometry, Mat};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Below this `ψ̄` is treated as zero.
pub const PSI_ZERO: f64 = 1e-12;

const GL_PANELS: usize = 16;
const GL4: [(f64, f64); 4] = [
    (-0.8611363115940526, 0.3478548451374538),
    (-0.3399810435848563, 0.6521451548625461),
    (0.3399810435848563, 0.6521451548625461),
    (0.8611363115940526, 0.3478548451374538),
];

/// Nodes per axis used to validate positivity when data is loaded.
const PROBE: usize = 9;

fn one() -> f64 {
    1.0
}

/// Surface data as a JSON document with expression strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SurfaceDoc {
    #[serde(default)]
    pub name: String,
    pub coords: [String; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// `h11, h12, h22`.
    pub h: [String; 3],
    #[serde(default = "one")]
    pub orientation: f64,
    pub lambda: String,
    pub rho: String,
    #[serde(default)]
    pub nu: Option<String>,
    /// Components of `Ȳ`, used instead of `nu`.
    #[serde(default, rename = "Y")]
    pub y: Option<[String; 2]>,
    pub psi: String,
    #[serde(rename = "A")]
    pub a: f64,
}

impl SurfaceDoc {
    #[allow(clippy::too_many_arguments)]
    fn simple(
        name: &str,
        coords: [&str; 2],
        lo: [f64; 2],
        hi: [f64; 2],
        h: [&str; 3],
        fields: [&str; 4],
        a: f64,
    ) -> Self {
        SurfaceDoc {
            name: name.into(),
            coords: coords.map(String::from),
            lo,
            hi,
            h: h.map(String::from),
            orientation: 1.0,
            lambda: fields[0].into(),
            rho: fields[1].into(),
            nu: Some(fields[2].into()),
            y: None,
            psi: fields[3].into(),
            a,
        }
    }
}

/// Built-in data sets: `nil`, `sol`, `helix`, `s3-hopf`, `h3`.
pub fn example(name: &str) -> Result<SurfaceDoc> {
    let sq = [-1.0, -1.0];
    let one_ = [1.0, 1.0];
    let flat = ["1", "0", "1"];
    Ok(match name {
        "nil" => SurfaceDoc::simple("nil", ["y1", "y2"], sq, one_, flat, ["1", "1", "exp(-(y1^2+y2^2)/2)", "0.5"], 1.5),
        "sol" => SurfaceDoc::simple(
            "sol",
            ["x1", "x2"],
            sq,
            one_,
            ["1", "0", "exp(2*x1)"],
            ["1", "exp(x1)", "exp(-x1)", "0"],
            2.0,
        ),
        "helix" => SurfaceDoc::simple(
            "helix",
            ["r", "v"],
            [0.5, -1.0],
            [2.0, 1.0],
            ["(1+r^2)/r^2", "0", "1"],
            ["sqrt(1+r^2)/r", "1/sqrt(1+r^2)", "1/sqrt(1+r^2)", "2/(1+r^2)^2"],
            0.0,
        ),
        "s3-hopf" => SurfaceDoc::simple(
            "s3-hopf",
            ["y1", "y2"],
            sq,
            one_,
            ["2/(1+y1^2+y2^2)^2", "0", "2/(1+y1^2+y2^2)^2"],
            ["1", "1", "1", "1"],
            -1.0,
        ),
        "h3" => SurfaceDoc::simple("h3", ["x", "z"], [-1.0, 0.5], [1.0, 2.0], flat, ["z", "z", "z", "0"], 2.0),
        other => return Err(Error::UnknownCase(other.to_string())),
    })
}

pub const EXAMPLES: [&str; 5] = ["nil", "sol", "helix", "s3-hopf", "h3"];

#[derive(Clone, Debug)]
pub struct SurfaceData {
    pub name: String,
    pub h: MetricField,
    pub lambda: Field,
    pub rho: Field,
    pub datum: HorizontalDatum,
    pub psi: Field,
    pub a: f64,
    integrable: bool,
}

/// Residuals of the surface system at one point.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct SystemResiduals {
    pub r_i: f64,
    pub r_iia: f64,
    /// A value that must be constant; its spread is the defect.
    pub r_iib_value: f64,
    pub r_u: f64,
    /// Half the trace of the umbilicity tensor.
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemReport {
    pub case: String,
    pub grid: Vec<usize>,
    pub max_r_i: f64,
    pub max_r_iia: f64,
    pub iib_mean: f64,
    pub iib_std: f64,
    /// `iib_mean − A`.
    pub iib_constant: f64,
    pub max_r_u: f64,
    pub alpha_mean: f64,
    pub alpha_std: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Second-order jets of the data around a point of `N`.
struct BaseJets {
    geo: LocalGeometry,
    hinv: DMatrix<f64>,
    k: f64,
    lam: f64,
    rho: Jet,
    psi: Jet,
    ln_lam: Jet,
    ln_rho: Jet,
    /// `d ln ν̄` or `Ȳ♭`.
    xb: Vec<f64>,
    /// Symmetrised covariant derivative of `xb`.
    nabla_x: DMatrix<f64>,
}

impl BaseJets {
    fn ip(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..2).map(|i| (0..2).map(|j| self.hinv[(i, j)] * a[i] * b[j]).sum::<f64>()).sum()
    }

    fn lap(&self, f: &Jet) -> f64 {
        self.geo.laplacian(f).value()
    }

    fn hess(&self, f: &Jet) -> DMatrix<f64> {
        mat_values(&self.geo.hessian(f))
    }

    fn h(&self) -> DMatrix<f64> {
        mat_values(&self.geo.g)
    }

    fn div_x(&self) -> f64 {
        self.hinv.component_mul(&self.nabla_x).sum()
    }
}

fn dv(f: &Jet) -> Vec<f64> {
    vec_values(&d0(f, 2))
}

fn outer2(a: &[f64], b: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| a[i] * b[j])
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

impl SurfaceData {
    pub fn new(
        name: &str,
        h: MetricField,
        lambda: Field,
        rho: Field,
        datum: HorizontalDatum,
        psi: Field,
        a: f64,
    ) -> Result<SurfaceData> {
        if h.dim() != 2 {
            return Err(Error::Invalid("surface data lives on a 2-dimensional chart".into()));
        }
        if [&lambda, &rho, &psi].iter().any(|f| f.dim_in != 2 || f.dim_out != 1) {
            return Err(Error::Invalid("λ̄, ρ̄ and ψ̄ must be scalar fields on the surface".into()));
        }
        datum.check()?;
        if !a.is_finite() {
            return Err(Error::Invalid("A must be finite".into()));
        }
        let mut psi_max = 0.0f64;
        for y in h.chart.grid(&[PROBE, PROBE])? {
            let v = |f: &Field| -> Result<f64> { Ok(f.eval(&y)?[0]) };
            if v(&lambda)? <= 0.0 || v(&rho)? <= 0.0 {
                return Err(Error::Invalid(format!("λ̄ and ρ̄ must be positive, fails at {y:?}")));
            }
            if let HorizontalDatum::Potential(nu) = &datum {
                if v(nu)? <= 0.0 {
                    return Err(Error::Invalid(format!("ν̄ must be positive, fails at {y:?}")));
                }
            }
            let p = v(&psi)?;
            if p < -PSI_ZERO {
                return Err(Error::Invalid(format!("ψ̄ is negative at {y:?}")));
            }
            psi_max = psi_max.max(p);
        }
        Ok(SurfaceData { name: name.to_string(), h, lambda, rho, datum, psi, a, integrable: psi_max < PSI_ZERO })
    }

    pub fn from_doc(doc: &SurfaceDoc) -> Result<SurfaceData> {
        let names: Vec<&str> = doc.coords.iter().map(String::as_str).collect();
        let chart = Chart::new(&names, &doc.lo, &doc.hi)?;
        let h = MetricField::from_exprs(chart, &[&doc.h[0], &doc.h[1], &doc.h[2]])?.with_orientation(doc.orientation);
        let scalar = |s: &str| Field::from_exprs(&names, &[s]);
        let datum = match (&doc.nu, &doc.y) {
            (Some(nu), None) => HorizontalDatum::Potential(scalar(nu)?),
            (None, Some(y)) => HorizontalDatum::Vector(Field::from_exprs(&names, &[&y[0], &y[1]])?),
            _ => return Err(Error::Invalid("exactly one of \"nu\" and \"Y\" must be given".into())),
        };
        SurfaceData::new(&doc.name, h, scalar(&doc.lambda)?, scalar(&doc.rho)?, datum, scalar(&doc.psi)?, doc.a)
    }

    pub fn from_json(src: &str) -> Result<SurfaceData> {
        let doc: SurfaceDoc = serde_json::from_str(src).map_err(|e| Error::Parse(e.to_string()))?;
        SurfaceData::from_doc(&doc)
    }

    pub fn chart(&self) -> &Chart {
        &self.h.chart
    }

    /// `ψ̄` vanishes on the whole chart, so the horizontal distribution is integrable.
    pub fn is_integrable(&self) -> bool {
        self.integrable
    }

    fn compose1(&self, f: &Field, y: &[Jet]) -> Result<Jet> {
        let c = self.chart();
        Ok(f.compose(y, c.mode, c.fd_step)?[0])
    }

    fn base(&self, y: &[f64]) -> Result<BaseJets> {
        let c = self.chart();
        let geo = LocalGeometry::at(&self.h, y, 2)?;
        let k = geo.trace(&geo.ricci()).value() / 2.0;
        let ex = |f: &Field| f.expand(y, 2, c.mode, c.fd_step);
        let (lam, rho, psi) = (ex(&self.lambda)?[0], ex(&self.rho)?[0], ex(&self.psi)?[0]);
        if lam.value() <= 0.0 || rho.value() <= 0.0 {
            return Err(Error::Invalid(format!("λ̄ and ρ̄ must be positive, fails at {y:?}")));
        }
        let (xb, nab): (Vec<Jet>, Mat) = match &self.datum {
            HorizontalDatum::Potential(nu) => {
                let nu = ex(nu)?[0];
                if nu.value() <= 0.0 {
                    return Err(Error::Invalid(format!("ν̄ must be positive, fails at {y:?}")));
                }
                let ln = nu.ln();
                (d0(&ln, 2), geo.hessian(&ln))
            }
            HorizontalDatum::Vector(yf) => {
                let flat = geo.lower(&ex(yf)?);
                let n = geo.nabla_form(&flat);
                (flat, n)
            }
        };
        let n = mat_values(&nab);
        let nabla_x = (&n + n.transpose()) * 0.5;
        let hinv = mat_values(&geo.ginv);
        Ok(BaseJets {
            hinv,
            k,
            lam: lam.value(),
            ln_lam: lam.ln(),
            ln_rho: rho.ln(),
            rho,
            psi,
            xb: vec_values(&xb),
            nabla_x,
            geo,
        })
    }

    /// The surface system at `y`.
    pub fn system_residuals(&self, y: &[f64]) -> Result<SystemResiduals> {
        let b = self.base(y)?;
        let (dl, dr) = (dv(&b.ln_lam), dv(&b.ln_rho));
        let (psi, l2, a) = (b.psi.value(), b.lam * b.lam, self.a);
        let div_x = b.div_x();
        let r_i = b.k + 0.5 * (2.0 * b.lap(&b.ln_lam) + div_x - b.ip(&dr, &dr)) + (a - psi) / l2;
        let r_iia = if psi < PSI_ZERO {
            0.0
        } else {
            let lp = b.psi.ln();
            let dp = dv(&lp);
            2.0 * b.lap(&b.ln_rho) + div_x - 0.5 * b.lap(&lp) + b.ip(&dr, &dr) - 0.25 * b.ip(&dp, &dp)
                + 0.5 * b.ip(&dp, &b.xb)
                + (psi + a) / l2
        };
        let r_iib_value = l2 * (b.lap(&b.ln_rho) - b.ip(&dr, &b.xb)) + psi + a;
        let t = &b.nabla_x + outer2(&dl, &b.xb) + outer2(&b.xb, &dl) - outer2(&dr, &dr);
        let alpha = 0.5 * b.hinv.component_mul(&t).sum();
        let r_u = g_norm(&b.hinv, &(t - b.h() * alpha));
        Ok(SystemResiduals { r_i, r_iia, r_iib_value, r_u, alpha })
    }

    pub fn system_report(&self, counts: [usize; 2], tolerance: f64) -> Result<SystemReport> {
        let pts = self.chart().grid(&counts)?;
        let rows = pts.par_iter().map(|y| self.system_residuals(y)).collect::<Result<Vec<_>>>()?;
        let fold = |f: fn(&SystemResiduals) -> f64| rows.iter().map(f).fold(0.0f64, |m, v| m.max(v.abs()));
        let (iib_mean, iib_std) = mean_std(&rows.iter().map(|r| r.r_iib_value).collect::<Vec<_>>());
        let (alpha_mean, alpha_std) = mean_std(&rows.iter().map(|r| r.alpha).collect::<Vec<_>>());
        let (max_r_i, max_r_iia, max_r_u) = (fold(|r| r.r_i), fold(|r| r.r_iia), fold(|r| r.r_u));
        Ok(SystemReport {
            case: self.name.clone(),
            grid: counts.to_vec(),
            max_r_i,
            max_r_iia,
            iib_mean,
            iib_std,
            iib_constant: iib_mean - self.a,
            max_r_u,
            alpha_mean,
            alpha_std,
            tolerance,
            pass: [max_r_i, max_r_iia, iib_std, max_r_u].iter().all(|v| *v < tolerance),
        })
    }

    /// The data after `h → e^{2u}h`, `λ̄ → e^u λ̄`.
    pub fn conformal_change(&self, u: &Field) -> Result<SurfaceData> {
        if u.dim_in != 2 || u.dim_out != 1 {
            return Err(Error::Invalid("the conformal factor must be a scalar on the surface".into()));
        }
        let c = self.chart().clone();
        let (mode, step) = (c.mode, c.fd_step);
        let (h, u1) = (self.h.clone(), u.clone());
        let hm = MetricField::from_fn(c, move |y| {
            let e = (u1.compose(y, mode, step)?[0] * 2.0).exp();
            Ok(h.compose(y)?.into_iter().map(|row| row.into_iter().map(|v| v * e).collect()).collect())
        })?
        .with_orientation(self.h.orientation);
        let (l, u2) = (self.lambda.clone(), u.clone());
        let lam = Field::from_jet_fn(2, 1, move |y| {
            Ok(vec![l.compose(y, mode, step)?[0] * u2.compose(y, mode, step)?[0].exp()])
        });
        SurfaceData::new(&self.name, hm, lam, self.rho.clone(), self.datum.clone(), self.psi.clone(), self.a)
    }

    /// `σ̄ = √(2ψ̄)/λ̄²`.
    pub fn sigma(&self, y: &[f64]) -> Result<f64> {
        let (psi, lam) = (self.psi.eval(y)?[0], self.lambda.eval(y)?[0]);
        Ok((2.0 * psi.max(0.0)).sqrt() / (lam * lam))
    }

    /// Density of `Ω̄` (or of `ρ̄Ω̄` when `weighted`) against `dy₁∧dy₂`.
    pub fn omega_density(&self, y: &[Jet], weighted: bool) -> Result<Jet> {
        if self.integrable {
            return Ok(Jet::cst(0.0));
        }
        let hm = self.h.compose(y)?;
        let det = hm[0][0] * hm[1][1] - hm[0][1] * hm[1][0];
        let lam = self.compose1(&self.lambda, y)?;
        let psi = self.compose1(&self.psi, y)?;
        if psi.value() <= 0.0 {
            let at: Vec<f64> = y.iter().map(Jet::value).collect();
            return Err(Error::Invalid(format!("ψ̄ vanishes at {at:?} without vanishing identically")));
        }
        let b = (psi * 2.0).sqrt() / (lam * lam) * det.sqrt() * self.h.orientation;
        if weighted {
            Ok(b * self.compose1(&self.rho, y)?)
        } else {
            Ok(b)
        }
    }

    /// A 1-form `ᾱ` with `dᾱ = ρ̄Ω̄` (or `Ω̄`), from the radial homotopy based at the chart centre:
    /// `ᾱ = k(−w₂dy₁ + w₁dy₂)` with `w = y − c` and `k = ∫₀¹ s b(c + sw) ds`.
    pub fn potential(&self, y: &[Jet], weighted: bool) -> Result<[Jet; 2]> {
        if self.integrable {
            return Ok([Jet::cst(0.0), Jet::cst(0.0)]);
        }
        let c = self.chart().center();
        let w: Vec<Jet> = (0..2).map(|i| y[i] - c[i]).collect();
        let mut k = Jet::cst(0.0);
        let width = 1.0 / GL_PANELS as f64;
        for panel in 0..GL_PANELS {
            let mid = (panel as f64 + 0.5) * width;
            for (x, wt) in GL4 {
                let s = mid + 0.5 * width * x;
                let q: Vec<Jet> = (0..2).map(|i| w[i] * s + c[i]).collect();
                k += self.omega_density(&q, weighted)? * (0.5 * width * wt * s);
            }
        }
        Ok([-(k * w[1]), k * w[0]])
    }

    /// `(cond_i, cond_ii)`: both vanish exactly when the built soliton has constant curvature.
    pub fn constant_curvature_defect(&self, y: &[f64]) -> Result<(f64, f64)> {
        let b = self.base(y)?;
        let psi = b.psi.value();
        let cond_i = if psi < PSI_ZERO {
            psi.max(0.0)
        } else {
            let q = b.rho * b.rho * b.psi.sqrt();
            let dq = dv(&q);
            psi.min(b.ip(&dq, &dq).sqrt())
        };
        let (dl, dr) = (dv(&b.ln_lam), dv(&b.ln_rho));
        let l2 = b.lam * b.lam;
        let s = b.k + b.lap(&(b.ln_lam - b.ln_rho)) + b.ip(&dr, &dr) - b.ip(&dl, &dr) - 2.0 * psi / l2;
        let t = b.h() * s + b.hess(&b.ln_rho) + outer2(&dl, &dr) + outer2(&dr, &dl) - outer2(&dr, &dr);
        Ok((cond_i, g_norm(&b.hinv, &t)))
    }
}

/// Largest discrepancy between the residuals of `data` and of its conformal change by `u`, after
/// rescaling by the weights under which the system transforms.
pub fn conformal_change_covariance(data: &SurfaceData, u: &Field, y: &[f64]) -> Result<f64> {
    let r = data.system_residuals(y)?;
    let rp = data.conformal_change(u)?.system_residuals(y)?;
    let w = (-2.0 * u.eval(y)?[0]).exp();
    Ok([rp.r_i - w * r.r_i, rp.r_iia - w * r.r_iia, rp.r_iib_value - r.r_iib_value, rp.r_u - w * r.r_u]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `θ`, `g = h/λ̄² + θ²` and the projection on `N × (−δ, δ)`.
#[derive(Clone, Debug)]
pub struct BuiltFibration {
    pub setup: Arc<SubmersionSetup>,
    pub theta: Field,
    pub r: f64,
    pub delta: f64,
    /// Whether `ρ̄` enters `θ`; without it the fibres are minimal.
    pub weighted: bool,
}

fn theta_jets(d: &SurfaceData, x: &[Jet], r: f64, weighted: bool) -> Result<Vec<Jet>> {
    let y = &x[..2];
    let a = d.potential(y, weighted)?;
    let rho = if weighted { d.compose1(&d.rho, y)? } else { Jet::cst(1.0) };
    Ok(vec![a[0] / rho, a[1] / rho, Jet::cst(r) / rho])
}

/// The fibration with `θ = (ᾱ + R dt)/ρ̄`, `dᾱ = ρ̄Ω̄`.
pub fn solve_theta(data: &Arc<SurfaceData>, r: f64, delta: f64) -> Result<BuiltFibration> {
    build_fibration(data, r, delta, true)
}

/// The same construction with `ρ̄` replaced by 1, so that `dθ̃ = Ω̃`.
pub fn solve_theta_minimal(data: &Arc<SurfaceData>, r: f64, delta: f64) -> Result<BuiltFibration> {
    build_fibration(data, r, delta, false)
}

fn build_fibration(data: &Arc<SurfaceData>, r: f64, delta: f64, weighted: bool) -> Result<BuiltFibration> {
    if !r.is_finite() || r == 0.0 {
        return Err(Error::Invalid("the vertical gauge constant R must be non-zero".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Invalid("δ must be positive".into()));
    }
    let c = data.chart();
    let names = c.names();
    let tname = if names.contains(&"t") { "s" } else { "t" };
    let chart = Chart::new(&[names[0], names[1], tname], &[c.lo[0], c.lo[1], -delta], &[c.hi[0], c.hi[1], delta])?
        .with_mode(c.mode)
        .with_fd_step(c.fd_step)?;
    let d = Arc::clone(data);
    let theta = Field::from_jet_fn(3, 3, move |x| theta_jets(&d, x, r, weighted)).with_label("θ");
    let d = Arc::clone(data);
    let g = MetricField::from_fn(chart, move |x| {
        let y = &x[..2];
        let hm = d.h.compose(y)?;
        let lam = d.compose1(&d.lambda, y)?;
        let th = theta_jets(&d, x, r, weighted)?;
        let il2 = (lam * lam).recip();
        Ok((0..3)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        let tt = th[i] * th[j];
                        if i < 2 && j < 2 {
                            hm[i][j] * il2 + tt
                        } else {
                            tt
                        }
                    })
                    .collect()
            })
            .collect())
    })?;
    let proj = Field::from_jet_fn(3, 2, |x| Ok(vec![x[0], x[1]])).with_label("(y1, y2, t) ↦ (y1, y2)");
    let setup = SubmersionSetup::new(g, data.h.clone(), proj)?;
    Ok(BuiltFibration { setup: Arc::new(setup), theta, r, delta, weighted })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildOptions {
    pub r: f64,
    pub delta: f64,
    pub counts: [usize; 3],
    pub tol: f64,
    pub f0: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { r: 1.0, delta: 1.0, counts: [9, 9, 11], tol: 1e-5, f0: 0.0 }
    }
}

/// Grid maxima of every check run on a built fibration.
#[derive(Clone, Debug, Serialize)]
pub struct BuildReport {
    pub system: SystemReport,
    pub soliton: ResidualReport,
    /// `|dθ + d ln ρ∧θ − Ω̃|`.
    pub theta_equation: f64,
    /// `|μ♭ − d ln ρ|`.
    pub mean_curvature: f64,
    /// `|μ̃|` for the unweighted construction.
    pub minimal_fibres: f64,
    /// `|ψ − ψ̄∘φ|`.
    pub psi_transport: f64,
    /// `|d(ρΩ̃)|` with `Ω̃` measured from `g`.
    pub closure: f64,
    /// `|d*(μ♭∧θ) + λ²(Δ ln ρ̄)θ|`.
    pub wedge_identity: f64,
    pub integrability: f64,
    /// Decomposed Ricci tensor against the direct one.
    pub oracle_equivalence: f64,
    /// Largest `|Riem|`; informational.
    pub riemann_norm: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub struct Built {
    pub fibration: BuiltFibration,
    pub problem: Arc<VerticalProblem>,
    pub flow: Field,
    pub candidate: SolitonCandidate,
    pub report: BuildReport,
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn max_abs(t: &[Mat]) -> f64 {
    t.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.value().abs()))
}

/// Assembles `g`, reconstructs `E = −μ + X + fU` with `f` from the vertical equation, and checks the
/// soliton equation together with the structural identities on a grid.
pub fn build_and_verify(data: &Arc<SurfaceData>, opts: &BuildOptions) -> Result<Built> {
    let tol = opts.tol;
    let system = data.system_report([opts.counts[0], opts.counts[1]], tol)?;
    let fib = solve_theta(data, opts.r, opts.delta)?;
    let tilde = solve_theta_minimal(data, opts.r, opts.delta)?;
    let chart = fib.setup.chart_m().clone();
    let points = chart.grid(&opts.counts)?;
    let axes = [0, 1, 2].map(|i| axis(chart.lo[i], chart.hi[i], opts.counts[i]));
    let base = chart.center();
    let problem = Arc::new(
        VerticalProblem::with_datum(Arc::clone(&fib.setup), data.datum.clone(), data.a)?.with_invariant_axis(2),
    );
    let grid = Arc::new(problem.solve_f_grid(&axes, &base, opts.f0)?);
    let flow = problem.flow_field(grid, base, opts.f0);
    let candidate = SolitonCandidate::new(fib.setup.g.clone(), flow.clone(), data.a)?;
    let soliton = residual_report(&data.name, &candidate, &points, &opts.counts, tol)?;

    let rows = points.par_iter().map(|p| point_checks(data, &fib, &tilde, &problem, p)).collect::<Result<Vec<_>>>()?;
    let col = |k: usize| rows.iter().fold(0.0f64, |m, r| m.max(r[k]));
    let report = BuildReport {
        theta_equation: col(0),
        mean_curvature: col(1),
        minimal_fibres: col(2),
        psi_transport: col(3),
        closure: col(4),
        wedge_identity: col(5),
        integrability: col(6),
        oracle_equivalence: col(7),
        riemann_norm: col(8),
        pass: system.pass && soliton.pass && (0..8).filter(|&k| k != 5).all(|k| col(k) < tol),
        system,
        soliton,
        tolerance: tol,
    };
    Ok(Built { fibration: fib, problem, flow, candidate, report })
}

fn point_checks(
    data: &SurfaceData,
    fib: &BuiltFibration,
    tilde: &BuiltFibration,
    problem: &VerticalProblem,
    p: &[f64],
) -> Result<[f64; 9]> {
    let setup = &fib.setup;
    let c = setup.chart_m();
    let fj = setup.jets(p, 2)?;
    let ginv = mat_values(&fj.geo.ginv);
    let norm1 = |v: &[Jet]| norm_sq_1(&ginv, &vec_values(v)).max(0.0).sqrt();

    let rho = data.compose1(&data.rho, &fj.phi)?;
    let dlr = d0(&rho.ln(), 3);
    let th = fib.theta.expand(p, 2, c.mode, c.fd_step)?;
    let b = data.omega_density(&fj.phi, false)?;
    let om_t: Mat = wedge(&fj.jac[0], &fj.jac[1]).into_iter().map(|r| r.into_iter().map(|v| v * b).collect()).collect();
    let dth = d1(&th);
    let lhs = DMatrix::from_fn(3, 3, |i, j| (dth[i][j] + dlr[i] * th[j] - dlr[j] * th[i] - om_t[i][j]).value());
    let theta_eq = g_norm(&ginv, &lhs);

    let mc: Vec<Jet> = (0..3).map(|i| fj.mu_flat[i] - dlr[i]).collect();
    let mean_curvature = norm1(&mc);
    let minimal = {
        let f = tilde.setup.frame(p)?;
        let gi = tilde.setup.g.matrix(p)?.try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
        norm_sq_1(&gi, &f.mu_flat).max(0.0).sqrt()
    };
    let psi_bar = data.psi.eval(&vec_values(&fj.phi))?[0];
    let psi_transport = (fj.psi.value() - psi_bar).abs();
    let rho_om: Mat = fj.omega_t.iter().map(|r| r.iter().map(|v| *v * rho).collect()).collect();
    let closure = max_abs(&d2(&rho_om));

    let y0 = vec_values(&fj.phi);
    let ng = LocalGeometry::at(&data.h, &y0, 2)?;
    let cn = data.chart();
    let lap_ln_rho = ng.laplacian(&data.rho.expand(&y0, 2, cn.mode, cn.fd_step)?[0].ln()).value();
    let ds = fj.geo.codiff2(&wedge(&fj.mu_flat, &fj.theta));
    let wd: Vec<Jet> = (0..3).map(|i| ds[i] + fj.theta[i] * (fj.lam2.value() * lap_ln_rho)).collect();
    let wedge_identity = norm1(&wd);

    // the difference stencil is wider than the chart slack, so faces are probed just inside
    let hs = c.fd_step * crate::field::THIRD_ORDER_SCALE;
    let inner: Vec<f64> = (0..3).map(|i| p[i].clamp(c.lo[i] + hs, c.hi[i] - hs)).collect();
    let integrability = problem.integrability_defect(&inner)?;
    let oracle = setup.ricci_decomposed(p)?.oracle_defect();
    let gm = setup.g.matrix(p)?;
    let riemann = curvature(&setup.g, p)?.riemann_norm_sq(&gm)?.max(0.0).sqrt();
    Ok([theta_eq, mean_curvature, minimal, psi_transport, closure, wedge_identity, integrability, oracle, riemann])
}
