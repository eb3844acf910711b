//! Linear least-squares search for soliton flows.
//!
//! For a fixed metric the soliton residual `−2Ric − L_E g − 2Ag` is affine in `(E, A)`, so a flow
//! expanded in a finite basis is found by one least-squares solve. Rows are the six
//! g-orthonormal components of the residual at each sample point, with off-diagonal entries
//! weighted by √2 so that the row block norm equals the tensor norm.

use crate::catalog::{self, CatalogCase};
use crate::error::{Error, Result};
use crate::field::{DiffMode, Field, MetricField, DEFAULT_FD_STEP};
use crate::jet::Jet;
use crate::tensor_lab::{lie_derivative_metric, mat_values, LocalGeometry};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Relative singular value cut-off.
pub const RANK_TOL: f64 = 1e-10;
/// Polynomial degree of the default scalar basis.
pub const DEFAULT_DEGREE: usize = 2;
/// Grid used to sample each catalog chart.
pub const DEFAULT_COUNTS: [usize; 3] = [5, 5, 5];
/// Regression floor for the SL(2,R) minimum rms under the default basis budget. The measured value
/// on the default grid is 0.4747.
pub const SL2_FLOOR: f64 = 0.4;

#[derive(Clone, Debug)]
enum Column {
    Coordinate { scalar: Field, axis: usize },
    Vector(Field),
}

/// Vector fields spanning the flow search space.
#[derive(Clone, Debug)]
pub struct FlowBasis {
    columns: Vec<Column>,
    labels: Vec<String>,
    pub include_a: bool,
}

fn monomials(vars: &[&str], degree: usize) -> Vec<String> {
    let mut out = vec!["1".to_string()];
    let mut layer: Vec<(usize, Vec<usize>)> = vec![(0, vec![0; vars.len()])];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (start, pows) in &layer {
            for v in *start..vars.len() {
                let mut p = pows.clone();
                p[v] += 1;
                next.push((v, p));
            }
        }
        for (_, p) in &next {
            let parts: Vec<String> = p
                .iter()
                .zip(vars)
                .filter(|(e, _)| **e > 0)
                .map(|(e, v)| if *e == 1 { v.to_string() } else { format!("{v}^{e}") })
                .collect();
            out.push(parts.join("*"));
        }
        layer = next;
    }
    out
}

impl FlowBasis {
    /// Scalars (monomials up to `degree`, then `extras` not already present) times each
    /// coordinate field.
    pub fn polynomial(vars: &[&str], degree: usize, extras: &[String], include_a: bool) -> Result<FlowBasis> {
        let mut scalars = monomials(vars, degree);
        for e in extras {
            let e = e.replace(' ', "");
            if !scalars.contains(&e) {
                scalars.push(e);
            }
        }
        let mut b = FlowBasis { columns: Vec::new(), labels: Vec::new(), include_a };
        for s in &scalars {
            let f = Field::from_exprs(vars, &[s])?;
            for (axis, v) in vars.iter().enumerate() {
                b.columns.push(Column::Coordinate { scalar: f.clone(), axis });
                b.labels.push(format!("({s})∂{v}"));
            }
        }
        Ok(b)
    }

    pub fn for_case(case: &CatalogCase, degree: usize, include_a: bool) -> Result<FlowBasis> {
        FlowBasis::polynomial(&case.chart().names(), degree, &case.extra_scalars, include_a)
    }

    pub fn from_fields(fields: &[Field], include_a: bool) -> FlowBasis {
        FlowBasis {
            columns: fields.iter().cloned().map(Column::Vector).collect(),
            labels: fields.iter().map(|f| f.label().to_string()).collect(),
            include_a,
        }
    }

    /// Appends a column, even if it duplicates an existing one.
    pub fn push(&mut self, field: Field) {
        self.labels.push(field.label().to_string());
        self.columns.push(Column::Vector(field));
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn column_jets(&self, c: usize, x: &[Jet]) -> Result<Vec<Jet>> {
        match &self.columns[c] {
            Column::Coordinate { scalar, axis } => {
                let s = scalar.compose(x, DiffMode::Analytic, DEFAULT_FD_STEP)?[0];
                let mut v = vec![Jet::cst(0.0); x.len()];
                v[*axis] = s;
                Ok(v)
            }
            Column::Vector(f) => f.compose(x, DiffMode::Analytic, DEFAULT_FD_STEP),
        }
    }

    /// The flow `Σ c_j B_j` as a field.
    pub fn flow(&self, coefficients: &[f64]) -> Result<Field> {
        if coefficients.len() != self.len() {
            return Err(Error::Invalid(format!("{} coefficients for {} basis fields", coefficients.len(), self.len())));
        }
        let basis = self.clone();
        let coeffs = coefficients.to_vec();
        Ok(Field::from_jet_fn(3, 3, move |x| {
            let mut out = vec![Jet::cst(0.0); x.len()];
            for (j, c) in coeffs.iter().enumerate() {
                if *c != 0.0 {
                    for (o, v) in out.iter_mut().zip(basis.column_jets(j, x)?) {
                        *o += v * *c;
                    }
                }
            }
            Ok(out)
        })
        .with_label("fitted flow"))
    }
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub points: usize,
    pub flow_columns: usize,
    pub include_a: bool,
    /// Rank of the basis fields' values on the sample points.
    pub basis_rank: usize,
}

impl LinearSystem {
    pub fn basis_independent(&self) -> bool {
        self.basis_rank == self.flow_columns
    }
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// `L⁻¹ T L⁻ᵀ` flattened to six weighted components, where `g = L Lᵀ`.
fn frame_components(linv: &DMatrix<f64>, t: &DMatrix<f64>) -> [f64; 6] {
    let m = linv * t * linv.transpose();
    PAIRS.map(|(a, b)| if a == b { m[(a, a)] } else { std::f64::consts::SQRT_2 * m[(a, b)] })
}

pub fn assemble(g: &MetricField, basis: &FlowBasis, points: &[Vec<f64>]) -> Result<LinearSystem> {
    if g.dim() != 3 {
        return Err(Error::Invalid("the fitter works on 3-dimensional metrics".into()));
    }
    let ncols = basis.len() + usize::from(basis.include_a);
    if ncols == 0 {
        return Err(Error::Invalid("empty basis".into()));
    }
    type Block = (Vec<[f64; 6]>, [f64; 6], Vec<[f64; 3]>);
    let blocks: Vec<Block> = points
        .par_iter()
        .map(|p| -> Result<Block> {
            let geo = LocalGeometry::at(g, p, 2)?;
            let gm = mat_values(&geo.g);
            let l = gm.clone().cholesky().ok_or_else(|| Error::Singular(format!("metric at {p:?}")))?;
            let linv = l.l().try_inverse().ok_or_else(|| Error::Singular(format!("frame at {p:?}")))?;
            let rhs = frame_components(&linv, &(mat_values(&geo.ricci()) * -2.0));
            let x = Jet::seed(p, 1);
            let mut cols = Vec::with_capacity(ncols);
            let mut values = Vec::with_capacity(basis.len());
            for j in 0..basis.len() {
                let v = basis.column_jets(j, &x)?;
                values.push([v[0].value(), v[1].value(), v[2].value()]);
                cols.push(frame_components(&linv, &mat_values(&geo.lie_derivative(&v))));
            }
            if basis.include_a {
                cols.push(frame_components(&linv, &(gm * 2.0)));
            }
            Ok((cols, rhs, values))
        })
        .collect::<Result<_>>()?;
    let n = points.len();
    let mut matrix = DMatrix::zeros(6 * n, ncols);
    let mut rhs = DVector::zeros(6 * n);
    let mut values = DMatrix::zeros(3 * n, basis.len());
    for (i, (cols, r, vals)) in blocks.iter().enumerate() {
        for c in 0..6 {
            rhs[6 * i + c] = r[c];
            for (j, col) in cols.iter().enumerate() {
                matrix[(6 * i + c, j)] = col[c];
            }
        }
        for (j, v) in vals.iter().enumerate() {
            for k in 0..3 {
                values[(3 * i + k, j)] = v[k];
            }
        }
    }
    let basis_rank = if basis.is_empty() {
        0
    } else {
        let sv = values.svd(false, false).singular_values;
        let eps = RANK_TOL * sv.max();
        sv.iter().filter(|s| **s > eps).count()
    };
    Ok(LinearSystem { matrix, rhs, points: n, flow_columns: basis.len(), include_a: basis.include_a, basis_rank })
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub a: Option<f64>,
    /// Root mean square over points of the g-norm of the soliton residual.
    pub min_rms_residual: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Coefficient vectors of flows with `L_K g = 0` on the samples.
    pub null_space: Vec<Vec<f64>>,
    /// False when some basis flow is a homothety, so that `A` is not fixed by the data.
    pub a_identifiable: Option<bool>,
    pub basis_independent: bool,
}

/// Singular values at or below this are treated as zero. Entries are frame components of O(1)
/// tensors, so `√rows` sets the scale even when every column is numerically zero.
fn cutoff(m: &DMatrix<f64>, smax: f64) -> f64 {
    RANK_TOL * smax.max((m.nrows() as f64).sqrt())
}

fn svd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, usize, Vec<f64>)> {
    let svd = m.clone().svd(true, true);
    let eps = cutoff(m, svd.singular_values.max());
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let x = svd.solve(b, eps).map_err(|e| Error::Singular(e.to_string()))?;
    Ok((x, rank, svd.singular_values.iter().copied().collect()))
}

fn null_space(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    // Zero rows make the factorisation square, so that V spans the whole column space.
    let padded = if m.nrows() < m.ncols() { m.clone().resize_vertically(m.ncols(), 0.0) } else { m.clone() };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let eps = cutoff(m, svd.singular_values.max());
    (0..v_t.nrows()).filter(|&i| svd.singular_values[i] <= eps).map(|i| v_t.row(i).iter().copied().collect()).collect()
}

fn rms(m: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>, points: usize) -> f64 {
    ((m * x - b).norm_squared() / points.max(1) as f64).sqrt()
}

/// Minimum-norm least-squares solution.
pub fn solve(sys: &LinearSystem) -> Result<FitResult> {
    let (x, rank, singular_values) = svd_solve(&sys.matrix, &sys.rhs)?;
    let flow = sys.matrix.columns(0, sys.flow_columns).into_owned();
    let null_space = null_space(&flow);
    let flow_rank = sys.flow_columns - null_space.len();
    Ok(FitResult {
        coefficients: x.rows(0, sys.flow_columns).iter().copied().collect(),
        a: sys.include_a.then(|| x[sys.flow_columns]),
        min_rms_residual: rms(&sys.matrix, &x, &sys.rhs, sys.points),
        rank,
        singular_values,
        null_space,
        a_identifiable: sys.include_a.then_some(rank > flow_rank),
        basis_independent: sys.basis_independent(),
    })
}

/// Solves with `A` held fixed.
pub fn solve_fixed_a(sys: &LinearSystem, a: f64) -> Result<FitResult> {
    let flow = sys.matrix.columns(0, sys.flow_columns).into_owned();
    let rhs = if sys.include_a {
        &sys.rhs - sys.matrix.column(sys.flow_columns) * a
    } else {
        return Err(Error::Invalid("system has no A column".into()));
    };
    if sys.flow_columns == 0 {
        let x = DVector::zeros(0);
        return Ok(FitResult {
            coefficients: Vec::new(),
            a: Some(a),
            min_rms_residual: rms(&flow, &x, &rhs, sys.points),
            rank: 0,
            singular_values: Vec::new(),
            null_space: Vec::new(),
            a_identifiable: None,
            basis_independent: true,
        });
    }
    let (x, rank, singular_values) = svd_solve(&flow, &rhs)?;
    Ok(FitResult {
        coefficients: x.iter().copied().collect(),
        a: Some(a),
        min_rms_residual: rms(&flow, &x, &rhs, sys.points),
        rank,
        singular_values,
        null_space: null_space(&flow),
        a_identifiable: None,
        basis_independent: sys.basis_independent(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AMode {
    /// `A` is one more unknown of the linear solve.
    Joint,
    /// `A` scanned over a grid, keeping the best fit.
    Grid,
}

/// Scan range and resolution for [`AMode::Grid`].
pub const A_SCAN: (f64, f64, usize) = (-5.0, 5.0, 101);

fn scan(sys: &LinearSystem) -> Result<FitResult> {
    let (lo, hi, n) = A_SCAN;
    let mut best: Option<FitResult> = None;
    for i in 0..n {
        let a = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let r = solve_fixed_a(sys, a)?;
        if best.as_ref().is_none_or(|b| r.min_rms_residual < b.min_rms_residual) {
            best = Some(r);
        }
    }
    Ok(best.expect("non-empty scan"))
}

pub fn fit_with(sys: &LinearSystem, mode: AMode) -> Result<FitResult> {
    match mode {
        AMode::Joint => solve(sys),
        AMode::Grid => scan(sys),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KillingComponent {
    /// Coefficients against the catalog Killing basis.
    pub coefficients: Vec<f64>,
    /// Largest `|L_D g|` over the samples, where `D` is the fitted flow minus the reference flow.
    pub lie_defect: f64,
    /// Rms of the part of `D` outside the Killing span.
    pub remainder: f64,
}

/// Splits the fitted flow minus the reference flow (zero when the case stores none) against the
/// case's Killing basis.
pub fn killing_component(case: &CatalogCase, flow: &Field, points: &[Vec<f64>]) -> Result<KillingComponent> {
    let reference = case.flow.clone().unwrap_or_else(|| Field::constant(3, vec![0.0; 3]));
    let diff_at = |p: &Vec<f64>| -> Result<Vec<f64>> {
        let a = flow.eval(p)?;
        let b = reference.eval(p)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    };
    let n = points.len();
    let k = case.killing.len();
    let mut m = DMatrix::zeros(3 * n, k);
    let mut d = DVector::zeros(3 * n);
    let mut lie_defect = 0.0f64;
    let diff = {
        let f = flow.clone();
        let r = reference.clone();
        Field::from_jet_fn(3, 3, move |x| {
            let a = f.compose(x, DiffMode::Analytic, DEFAULT_FD_STEP)?;
            let b = r.compose(x, DiffMode::Analytic, DEFAULT_FD_STEP)?;
            Ok(a.into_iter().zip(b).map(|(u, v)| u - v).collect())
        })
    };
    for (i, p) in points.iter().enumerate() {
        let dv = diff_at(p)?;
        for c in 0..3 {
            d[3 * i + c] = dv[c];
        }
        for (j, kf) in case.killing.iter().enumerate() {
            let kv = kf.eval(p)?;
            for c in 0..3 {
                m[(3 * i + c, j)] = kv[c];
            }
        }
        lie_defect =
            lie_defect.max(crate::tensor_lab::norm_sq(&case.g, &lie_derivative_metric(&case.g, &diff, p)?, p)?.sqrt());
    }
    let (coefficients, remainder) = if k == 0 {
        (Vec::new(), (d.norm_squared() / n.max(1) as f64).sqrt())
    } else {
        let (x, _, _) = svd_solve(&m, &d)?;
        let r = ((&m * &x - &d).norm_squared() / n.max(1) as f64).sqrt();
        (x.iter().copied().collect(), r)
    };
    Ok(KillingComponent { coefficients, lie_defect, remainder })
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseFit {
    pub case: String,
    pub degree: usize,
    pub basis_size: usize,
    pub grid: Vec<usize>,
    pub mode: AMode,
    pub fit: FitResult,
    pub expected_a: Option<f64>,
    pub killing: KillingComponent,
}

impl CaseFit {
    pub fn a_error(&self) -> Option<f64> {
        Some((self.fit.a? - self.expected_a?).abs())
    }
}

/// Fits a catalog case with the polynomial basis plus the case's extra scalars.
pub fn fit_case(case: &CatalogCase, degree: usize, counts: &[usize], mode: AMode) -> Result<CaseFit> {
    let basis = FlowBasis::for_case(case, degree, true)?;
    let points = case.chart().grid(counts)?;
    let sys = assemble(&case.g, &basis, &points)?;
    let fit = fit_with(&sys, mode)?;
    let flow = basis.flow(&fit.coefficients)?;
    let killing = killing_component(case, &flow, &points)?;
    Ok(CaseFit {
        case: case.id.clone(),
        degree,
        basis_size: basis.len(),
        grid: counts.to_vec(),
        mode,
        fit,
        expected_a: case.a,
        killing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Falsification {
    pub case: String,
    pub degree: usize,
    pub basis_size: usize,
    pub mode: AMode,
    pub min_rms_residual: f64,
    pub best_a: Option<f64>,
    /// Minimum rms over `A` in the scan range with the flow restricted to Killing fields.
    pub killing_scan_min: f64,
    pub calibration: Vec<(String, f64)>,
    pub floor: f64,
    /// The search covers a finite basis; a large residual corroborates non-existence without
    /// proving it.
    pub evidence_not_proof: bool,
    pub pass: bool,
}

/// Calibration cases that must fit under the same basis budget.
pub const CALIBRATION: [&str; 2] = ["nil", "sol"];
pub const CALIBRATION_TOL: f64 = 1e-6;
pub const KILLING_SCAN_MIN: f64 = 0.3;

pub fn falsify(case_id: &str, degree: usize, mode: AMode) -> Result<Falsification> {
    let case = catalog::get(case_id)?;
    let counts = DEFAULT_COUNTS;
    let main = fit_case(&case, degree, &counts, mode)?;
    let calibration = CALIBRATION
        .iter()
        .map(|id| Ok((id.to_string(), fit_case(&catalog::get(id)?, degree, &counts, mode)?.fit.min_rms_residual)))
        .collect::<Result<Vec<_>>>()?;
    let points = case.chart().grid(&counts)?;
    let ksys = assemble(&case.g, &FlowBasis::from_fields(&case.killing, true), &points)?;
    let killing_scan_min = scan(&ksys)?.min_rms_residual;
    let pass = calibration.iter().all(|(_, r)| *r < CALIBRATION_TOL)
        && main.fit.min_rms_residual > SL2_FLOOR
        && killing_scan_min > KILLING_SCAN_MIN;
    Ok(Falsification {
        case: case.id,
        degree,
        basis_size: main.basis_size,
        mode,
        min_rms_residual: main.fit.min_rms_residual,
        best_a: main.fit.a,
        killing_scan_min,
        calibration,
        floor: SL2_FLOOR,
        evidence_not_proof: true,
        pass,
    })
}
