//! Explicit geometries with their soliton flows, Killing fields and the extra scalar functions the
//! fitter uses for each.

use crate::error::{Error, Result};
use crate::field::{Chart, DiffMode, Field, MetricField};
use crate::semiconformal::SubmersionSetup;
use crate::soliton_check::{
    gradient_type_defect, residual_report, soliton_residual, two_form_norm, Decomposition, ResidualReport,
    SolitonCandidate,
};
use crate::tensor_lab::lie_derivative_metric;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Seed for random sample points drawn from catalog charts.
pub const SAMPLE_SEED: u64 = 0x1CC1;

pub const IDS: [&str; 11] =
    ["nil", "sol", "sl2", "s2xr", "h2xr", "s3", "h3", "r3_gaussian", "helix", "wp_exceptional", "cigar"];

#[derive(Clone, Debug)]
pub struct Fibration {
    pub h: MetricField,
    pub projection: Field,
}

#[derive(Clone, Debug)]
pub struct CatalogCase {
    pub id: String,
    pub description: String,
    pub g: MetricField,
    pub fibration: Option<Fibration>,
    pub flow: Option<Field>,
    pub a: Option<f64>,
    pub decomposition: Option<Decomposition>,
    pub killing: Vec<Field>,
    /// Expressions in the chart coordinates.
    pub extra_scalars: Vec<String>,
    /// Whether the stored flow is locally a gradient.
    pub gradient: Option<bool>,
    pub expected: BTreeMap<String, f64>,
}

impl CatalogCase {
    pub fn chart(&self) -> &Chart {
        &self.g.chart
    }

    pub fn candidate(&self) -> Result<Option<SolitonCandidate>> {
        match (&self.flow, self.a) {
            (Some(e), Some(a)) => {
                let c = SolitonCandidate::new(self.g.clone(), e.clone(), a)?;
                Ok(Some(match &self.decomposition {
                    Some(d) => c.with_decomposition(d.clone()),
                    None => c,
                }))
            }
            _ => Ok(None),
        }
    }

    pub fn setup(&self) -> Result<Option<SubmersionSetup>> {
        self.fibration
            .as_ref()
            .map(|f| SubmersionSetup::new(self.g.clone(), f.h.clone(), f.projection.clone()))
            .transpose()
    }

    /// Largest `|L_K g|` over the stored Killing fields at `p`.
    pub fn killing_defect(&self, p: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in &self.killing {
            worst = worst.max(lie_derivative_metric(&self.g, k, p)?.max_abs());
        }
        Ok(worst)
    }
}

struct Builder {
    names: [&'static str; 3],
    chart: Chart,
}

impl Builder {
    fn new(names: [&'static str; 3], lo: [f64; 3], hi: [f64; 3]) -> Result<Builder> {
        Ok(Builder { names, chart: Chart::new(&names, &lo, &hi)? })
    }

    fn metric(&self, upper: [&str; 6]) -> Result<MetricField> {
        MetricField::from_exprs(self.chart.clone(), &upper)
    }

    fn vector(&self, c: [&str; 3]) -> Result<Field> {
        Field::from_exprs(&self.names, &c)
    }

    fn scalar(&self, s: &str) -> Result<Field> {
        Field::from_exprs(&self.names, &[s])
    }

    fn vectors(&self, list: &[[&str; 3]]) -> Result<Vec<Field>> {
        list.iter().map(|c| self.vector(*c)).collect()
    }

    fn fibration(&self, h_chart: ([&str; 2], [f64; 2], [f64; 2]), h: [&str; 3], proj: [&str; 2]) -> Result<Fibration> {
        let (names, lo, hi) = h_chart;
        let hc = Chart::new(&names, &lo, &hi)?;
        Ok(Fibration { h: MetricField::from_exprs(hc, &h)?, projection: Field::from_exprs(&self.names, &proj)? })
    }

    #[allow(clippy::too_many_arguments)]
    fn case(
        &self,
        id: &str,
        description: &str,
        g: MetricField,
        flow: Option<Field>,
        a: Option<f64>,
        killing: Vec<Field>,
        extras: &[&str],
        gradient: Option<bool>,
    ) -> CatalogCase {
        CatalogCase {
            id: id.into(),
            description: description.into(),
            g,
            fibration: None,
            flow,
            a,
            decomposition: None,
            killing,
            extra_scalars: extras.iter().map(|s| s.to_string()).collect(),
            gradient,
            expected: BTreeMap::new(),
        }
    }
}

fn expect(mut c: CatalogCase, items: &[(&str, f64)]) -> CatalogCase {
    for (k, v) in items {
        c.expected.insert(k.to_string(), *v);
    }
    c
}

pub fn get(id: &str) -> Result<CatalogCase> {
    match id {
        "nil" => nil(),
        "sol" => sol(),
        "sl2" => sl2(),
        "s2xr" => s2xr(),
        "h2xr" => h2xr(),
        "s3" => s3(),
        "h3" => h3(),
        "r3_gaussian" => gaussian(1.0),
        "helix" => helix(),
        "wp_exceptional" => wp_exceptional(),
        "cigar" => cigar(),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

fn nil() -> Result<CatalogCase> {
    let b = Builder::new(["y1", "y2", "y3"], [-1.0; 3], [1.0; 3])?;
    let g = b.metric(["1", "0", "0", "1+y1^2", "y1", "1"])?;
    let mut c = b.case(
        "nil",
        "Heisenberg geometry over the flat plane, expanding soliton",
        g,
        Some(b.vector(["-y1", "-y2", "-2*y3"])?),
        Some(1.5),
        b.vectors(&[["0", "1", "0"], ["0", "0", "1"], ["1", "0", "-y2"], ["-y2", "y1", "(y2^2-y1^2)/2"]])?,
        &["y1*y2", "y3"],
        Some(false),
    );
    c.fibration = Some(b.fibration((["y1", "y2"], [-1.0; 2], [1.0; 2]), ["1", "0", "1"], ["y1", "y2"])?);
    c.decomposition = Some(Decomposition { x: b.vector(["-y1", "-y2", "y1*y2"])?, f: b.scalar("-y1*y2-2*y3")? });
    Ok(expect(c, &[("A", 1.5), ("psi", 0.5)]))
}

fn sol() -> Result<CatalogCase> {
    let b = Builder::new(["x1", "x2", "x3"], [-1.0; 3], [1.0; 3])?;
    let g = b.metric(["1", "0", "0", "exp(2*x1)", "0", "exp(-2*x1)"])?;
    let mut c = b.case(
        "sol",
        "Sol geometry over the hyperbolic plane, expanding soliton",
        g,
        Some(b.vector(["-2", "0", "-4*x3"])?),
        Some(2.0),
        b.vectors(&[["0", "1", "0"], ["0", "0", "1"], ["1", "-x2", "x3"]])?,
        &["exp(x1)", "exp(-x1)", "x3*exp(-x1)"],
        Some(false),
    );
    c.fibration = Some(b.fibration((["x1", "x2"], [-1.0; 2], [1.0; 2]), ["1", "0", "exp(2*x1)"], ["x1", "x2"])?);
    c.decomposition = Some(Decomposition { x: b.vector(["-1", "0", "0"])?, f: b.scalar("-4*x3*exp(-x1)")? });
    Ok(expect(c, &[("A", 2.0), ("psi", 0.0)]))
}

fn sl2() -> Result<CatalogCase> {
    let b = Builder::new(["x1", "x2", "x3"], [-1.0, 0.2, -1.0], [1.0, 2.0, 1.0])?;
    let g = b.metric(["2/x2^2", "0", "1/x2", "1/x2^2", "0", "1"])?;
    let mut c = b.case(
        "sl2",
        "universal cover of SL(2,R) over the hyperbolic plane; carries no soliton flow",
        g,
        None,
        None,
        b.vectors(&[["1", "0", "0"], ["0", "0", "1"], ["x1", "x2", "0"], ["(x1^2-x2^2)/2", "x1*x2", "x2"]])?,
        &["log(x2)", "1/x2", "x2", "x2*log(x2)", "x3^2", "x3/x2"],
        None,
    );
    c.fibration =
        Some(b.fibration((["x1", "x2"], [-1.0, 0.2], [1.0, 2.0]), ["1/x2^2", "0", "1/x2^2"], ["x1", "x2"])?);
    Ok(expect(c, &[("psi", 0.5)]))
}

const SPHERE: &str = "4/(1+x^2+y^2)^2";

fn s2xr() -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "t"], [-1.0; 3], [1.0; 3])?;
    let g = b.metric([SPHERE, "0", "0", SPHERE, "0", "1"])?;
    let mut c = b.case(
        "s2xr",
        "round sphere times a line, shrinking soliton",
        g,
        Some(b.vector(["0", "0", "t"])?),
        Some(-1.0),
        b.vectors(&[["-y", "x", "0"], ["1+x^2-y^2", "2*x*y", "0"], ["2*x*y", "1-x^2+y^2", "0"], ["0", "0", "1"]])?,
        &[],
        Some(true),
    );
    c.fibration = Some(b.fibration((["x", "y"], [-1.0; 2], [1.0; 2]), [SPHERE, "0", SPHERE], ["x", "y"])?);
    Ok(expect(c, &[("A", -1.0)]))
}

fn h2xr() -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "t"], [-1.0, 0.5, -1.0], [1.0, 2.0, 1.0])?;
    let g = b.metric(["1/y^2", "0", "0", "1/y^2", "0", "1"])?;
    let mut c = b.case(
        "h2xr",
        "hyperbolic plane times a line, expanding soliton",
        g,
        Some(b.vector(["0", "0", "-t"])?),
        Some(1.0),
        b.vectors(&[["1", "0", "0"], ["x", "y", "0"], ["x^2-y^2", "2*x*y", "0"], ["0", "0", "1"]])?,
        &[],
        Some(true),
    );
    c.fibration = Some(b.fibration((["x", "y"], [-1.0, 0.5], [1.0, 2.0]), ["1/y^2", "0", "1/y^2"], ["x", "y"])?);
    Ok(expect(c, &[("A", 1.0)]))
}

fn s3() -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "z"], [-1.0; 3], [1.0; 3])?;
    let w = "4/(1+x^2+y^2+z^2)^2";
    let g = b.metric([w, "0", "0", w, "0", w])?;
    let c = b.case(
        "s3",
        "round 3-sphere in stereographic coordinates; only Killing flows",
        g,
        Some(b.vector(["0", "0", "0"])?),
        Some(-2.0),
        b.vectors(&[
            ["-y", "x", "0"],
            ["-z", "0", "x"],
            ["0", "-z", "y"],
            ["(1-x^2-y^2-z^2)/2+x^2", "x*y", "x*z"],
            ["x*y", "(1-x^2-y^2-z^2)/2+y^2", "y*z"],
            ["x*z", "y*z", "(1-x^2-y^2-z^2)/2+z^2"],
        ])?,
        &[],
        Some(true),
    );
    Ok(expect(c, &[("A", -2.0)]))
}

fn h3() -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "z"], [-1.0, -1.0, 0.5], [1.0, 1.0, 2.0])?;
    let w = "1/z^2";
    let g = b.metric([w, "0", "0", w, "0", w])?;
    let c = b.case(
        "h3",
        "hyperbolic 3-space in the upper half-space; only Killing flows",
        g,
        Some(b.vector(["0", "0", "0"])?),
        Some(2.0),
        b.vectors(&[
            ["1", "0", "0"],
            ["0", "1", "0"],
            ["-y", "x", "0"],
            ["x", "y", "z"],
            ["x^2-y^2-z^2", "2*x*y", "2*x*z"],
            ["2*x*y", "y^2-x^2-z^2", "2*y*z"],
        ])?,
        &[],
        Some(true),
    );
    Ok(expect(c, &[("A", 2.0)]))
}

/// Euclidean space with the Gaussian soliton `E = −A x`.
pub fn gaussian(a: f64) -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "z"], [-1.0; 3], [1.0; 3])?;
    let g = b.metric(["1", "0", "0", "1", "0", "1"])?;
    let e = Field::from_jet_fn(3, 3, move |x| Ok(x.iter().map(|v| *v * -a).collect()))
        .with_label(format!("{}*x, {}*y, {}*z", -a, -a, -a));
    let c = b.case(
        "r3_gaussian",
        "Euclidean space with a Gaussian soliton",
        g,
        Some(e),
        Some(a),
        b.vectors(&[
            ["1", "0", "0"],
            ["0", "1", "0"],
            ["0", "0", "1"],
            ["-y", "x", "0"],
            ["-z", "0", "x"],
            ["0", "-z", "y"],
        ])?,
        &[],
        Some(true),
    );
    Ok(expect(c, &[("A", a)]))
}

fn helix() -> Result<CatalogCase> {
    let b = Builder::new(["r", "a", "z"], [0.5, -1.0, -1.0], [2.0, 1.0, 1.0])?;
    let g = b.metric(["1", "0", "0", "r^2", "0", "1"])?;
    let mut c = b.case(
        "helix",
        "Euclidean space in cylindrical coordinates, fibred by helices",
        g,
        Some(b.vector(["0", "0", "0"])?),
        Some(0.0),
        b.vectors(&[
            ["0", "1", "0"],
            ["0", "0", "1"],
            ["cos(a)", "-sin(a)/r", "0"],
            ["sin(a)", "cos(a)/r", "0"],
            ["-z*sin(a)", "-z*cos(a)/r", "r*sin(a)"],
            ["z*cos(a)", "-z*sin(a)/r", "-r*cos(a)"],
        ])?,
        &[],
        Some(true),
    );
    c.fibration = Some(b.fibration((["r", "v"], [0.5, -3.0], [2.0, 3.0]), ["(1+r^2)/r^2", "0", "1"], ["r", "z-a"])?);
    Ok(expect(c, &[("A", 0.0), ("riemann", 0.0)]))
}

fn wp_exceptional() -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "t"], [-1.0, -1.0, 1.0], [1.0, 1.0, 2.0])?;
    let w = "t^sqrt(2)";
    let g = b.metric([w, "0", "0", w, "0", "1"])?;
    let c = b.case(
        "wp_exceptional",
        "warped product with a power-law profile of non-constant curvature, steady soliton",
        g,
        Some(b.vector(["0", "0", "(sqrt(2)-1)/t"])?),
        Some(0.0),
        b.vectors(&[["1", "0", "0"], ["0", "1", "0"], ["-y", "x", "0"]])?,
        &[],
        Some(true),
    );
    Ok(expect(c, &[("A", 0.0)]))
}

fn cigar() -> Result<CatalogCase> {
    let b = Builder::new(["x", "y", "t"], [-1.0; 3], [1.0; 3])?;
    let w = "1/(1+x^2+y^2)";
    let g = b.metric([w, "0", "0", w, "0", "1"])?;
    let mut c = b.case(
        "cigar",
        "cigar surface times a line, steady gradient soliton",
        g,
        Some(b.vector(["-2*x", "-2*y", "0"])?),
        Some(0.0),
        b.vectors(&[["-y", "x", "0"], ["0", "0", "1"]])?,
        &[],
        Some(true),
    );
    c.fibration = Some(b.fibration((["x", "y"], [-1.0; 2], [1.0; 2]), [w, "0", w], ["x", "y"])?);
    Ok(expect(c, &[("A", 0.0)]))
}

/// Equations (i)–(vi) for a flow `X = αY₁ + βY₂ + fU` on the SL(2,R) chart, with `a = A + ½`.
pub fn sl2_system_residual(alpha: &Field, beta: &Field, f: &Field, a: f64, p: &[f64]) -> Result<[f64; 6]> {
    if p.len() != 3 || p[1] <= 0.0 {
        return Err(Error::Domain { point: p.to_vec() });
    }
    let step = crate::field::DEFAULT_FD_STEP;
    let ex = |g: &Field| -> Result<crate::jet::Jet> { Ok(g.expand(p, 1, DiffMode::Analytic, step)?[0]) };
    let (al, be, ff) = (ex(alpha)?, ex(beta)?, ex(f)?);
    let d = |j: &crate::jet::Jet, i: usize| j.d1(i);
    let x2 = p[1];
    let big_a = a - 0.5;
    Ok([
        2.0 * big_a - 1.0 - 2.0 * be.value() + x2 * d(&al, 0) + x2 * d(&ff, 0),
        big_a - 1.5 + x2 * d(&be, 1),
        big_a + 0.5 + d(&ff, 2),
        2.0 * al.value() / x2 + d(&al, 1) + d(&be, 0) + d(&ff, 1),
        2.0 * (big_a + 0.5) - be.value() + d(&al, 2) + d(&ff, 2) + x2 * d(&ff, 0),
        al.value() + d(&be, 2) + x2 * d(&ff, 1),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub case: String,
    pub residual: Option<ResidualReport>,
    pub killing_max: f64,
    pub oracle_equivalence: Option<f64>,
    pub decomposition_defect: Option<f64>,
    /// Largest `|dE♭|` over the grid.
    pub gradient_defect: Option<f64>,
    pub expected_gradient: Option<bool>,
    /// For cases without a flow: the smallest residual over Killing flows with `A = 0`.
    pub killing_residual_min: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest `|Ric_decomposed − Ric|_g` over `points`, for fibred cases.
pub fn oracle_equivalence(case: &CatalogCase, points: &[Vec<f64>]) -> Result<Option<f64>> {
    let Some(s) = case.setup()? else { return Ok(None) };
    let v = points.par_iter().map(|p| Ok(s.ricci_decomposed(p)?.oracle_defect())).collect::<Result<Vec<f64>>>()?;
    Ok(Some(v.into_iter().fold(0.0, f64::max)))
}

/// Human- and machine-readable description of a case.
#[derive(Clone, Debug, Serialize)]
pub struct CaseSummary {
    pub id: String,
    pub description: String,
    pub coords: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Upper-triangular metric components.
    pub g: String,
    pub h: Option<String>,
    pub projection: Option<String>,
    pub flow: Option<String>,
    pub a: Option<f64>,
    pub decomposition: Option<[String; 2]>,
    pub killing: Vec<String>,
    pub extra_scalars: Vec<String>,
    pub gradient: Option<bool>,
    pub expected: BTreeMap<String, f64>,
}

impl CatalogCase {
    pub fn summary(&self) -> CaseSummary {
        let ch = self.chart();
        CaseSummary {
            id: self.id.clone(),
            description: self.description.clone(),
            coords: ch.coord_names.clone(),
            lo: ch.lo.clone(),
            hi: ch.hi.clone(),
            g: self.g.components().label().to_string(),
            h: self.fibration.as_ref().map(|f| f.h.components().label().to_string()),
            projection: self.fibration.as_ref().map(|f| f.projection.label().to_string()),
            flow: self.flow.as_ref().map(|e| e.label().to_string()),
            a: self.a,
            decomposition: self.decomposition.as_ref().map(|d| [d.x.label().to_string(), d.f.label().to_string()]),
            killing: self.killing.iter().map(|k| k.label().to_string()).collect(),
            extra_scalars: self.extra_scalars.clone(),
            gradient: self.gradient,
            expected: self.expected.clone(),
        }
    }
}

/// Gradient-type verdict thresholds.
const GRADIENT_TOL: f64 = 1e-6;
const NON_GRADIENT_MIN: f64 = 0.1;

/// Soliton residual, decomposition oracle, Killing fields and gradient type on a grid.
/// For a case without a flow the check is that no stored Killing flow is a steady soliton.
pub fn verify(case: &CatalogCase, counts: &[usize], tol: f64) -> Result<VerifyReport> {
    let pts = case.chart().grid(counts)?;
    let killing_max =
        pts.par_iter().map(|p| case.killing_defect(p)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let setup = case.setup()?;
    let oracle_equivalence = oracle_equivalence(case, &pts)?;
    let killing_ok = killing_max < 1e-8;
    let oracle_ok = oracle_equivalence.is_none_or(|v| v < tol);
    let Some(cand) = case.candidate()? else {
        let mut min = f64::INFINITY;
        for k in &case.killing {
            let c = SolitonCandidate::new(case.g.clone(), k.clone(), 0.0)?;
            for p in &pts {
                min = min.min(soliton_residual(&c, p)?.norm());
            }
        }
        return Ok(VerifyReport {
            case: case.id.clone(),
            residual: None,
            killing_max,
            oracle_equivalence,
            decomposition_defect: None,
            gradient_defect: None,
            expected_gradient: None,
            killing_residual_min: Some(min),
            tolerance: tol,
            pass: killing_ok && oracle_ok && min > 0.5,
        });
    };
    let residual = residual_report(&case.id, &cand, &pts, counts, tol)?;
    let gradient_defect = pts
        .par_iter()
        .map(|p| two_form_norm(&case.g, &gradient_type_defect(&case.g, &cand.e, p)?, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let decomposition_defect = match (&setup, &cand.decomposition) {
        (Some(s), Some(_)) => Some(
            pts.iter()
                .map(|p| crate::soliton_check::decomposition_defect(s, &cand, p))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let gradient_ok = match case.gradient {
        Some(true) => gradient_defect < GRADIENT_TOL,
        Some(false) => gradient_defect > NON_GRADIENT_MIN,
        None => true,
    };
    Ok(VerifyReport {
        case: case.id.clone(),
        pass: residual.pass && killing_ok && oracle_ok && gradient_ok && decomposition_defect.is_none_or(|v| v < tol),
        residual: Some(residual),
        killing_max,
        oracle_equivalence,
        decomposition_defect,
        gradient_defect: Some(gradient_defect),
        expected_gradient: case.gradient,
        killing_residual_min: None,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_verifies() {
        for id in IDS {
            let case = get(id).unwrap();
            let rep = verify(&case, &[5, 5, 5], 1e-5).unwrap();
            assert!(rep.pass, "{id}: {rep:#?}");
        }
    }

    #[test]
    fn killing_fields_are_killing() {
        for id in IDS {
            let case = get(id).unwrap();
            for p in case.chart().sample(6, SAMPLE_SEED, 0.05) {
                assert!(case.killing_defect(&p).unwrap() < 1e-10, "{id} at {p:?}");
            }
        }
    }

    #[test]
    fn gaussian_for_any_a() {
        for a in [-2.0, 0.5, 3.0] {
            let case = gaussian(a).unwrap();
            let c = case.candidate().unwrap().unwrap();
            assert!(soliton_residual(&c, &[0.3, -0.2, 0.9]).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn expected_values() {
        assert_eq!(get("nil").unwrap().expected["A"], 1.5);
        let sol = get("sol").unwrap();
        assert_eq!(sol.a, Some(2.0));
        let f = &sol.decomposition.as_ref().unwrap().f;
        assert!((f.eval(&[0.5, 0.0, 0.3]).unwrap()[0] + 1.2 * (-0.5f64).exp()).abs() < 1e-15);
        let sl2 = get("sl2").unwrap();
        assert!(sl2.flow.is_none());
        let s = sl2.setup().unwrap().unwrap();
        assert!((s.frame(&[0.1, 0.7, 0.2]).unwrap().psi - 0.5).abs() < 1e-12);
        assert!(matches!(get("e8"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn helix_projection_is_semiconformal() {
        let case = get("helix").unwrap();
        let s = case.setup().unwrap().unwrap();
        for p in [[0.7, 0.1, 0.2], [1.5, -0.5, 0.8]] {
            let (_, d) = s.semiconformality_defect(&p).unwrap();
            assert!(d < 1e-12);
            let lam = s.frame(&p).unwrap().lambda;
            assert!((lam * lam - (1.0 + p[0] * p[0]) / (p[0] * p[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn sl2_system_examples() {
        let zero = Field::constant(3, vec![0.0]);
        let r = sl2_system_residual(&zero, &zero, &zero, 0.5, &[0.1, 0.8, 0.3]).unwrap();
        let want = [-1.0, -1.5, 0.5, 0.0, 1.0, 0.0];
        for (x, w) in r.iter().zip(want) {
            assert!((x - w).abs() < 1e-14, "{r:?}");
        }
        for a in [0.5, 3.0, 4.0] {
            let beta = Field::from_exprs(&["x1", "x2", "x3"], &[&format!("-({a}-2)*log(x2)")]).unwrap();
            let f = Field::from_exprs(&["x1", "x2", "x3"], &[&format!("-{a}*x3")]).unwrap();
            let r = sl2_system_residual(&zero, &beta, &f, a, &[0.4, 1.3, -0.6]).unwrap();
            assert!(r[1].abs() < 1e-13 && r[2].abs() < 1e-13, "{r:?}");
        }
        assert!(sl2_system_residual(&zero, &zero, &zero, 0.5, &[0.0, -1.0, 0.0]).is_err());
    }
}
