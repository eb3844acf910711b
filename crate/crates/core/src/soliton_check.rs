//! The soliton equation `−2Ric = L_E g + 2Ag`: pointwise residuals, grid
//! reports, the decomposed form for `E = −μ + X + fU`, integration of the
//! vertical potential `f`, and the gradient-type test `dE♭ = 0`.

use crate::error::{Error, Result};
use crate::field::{Field, MetricField};
use crate::jet::Jet;
use crate::semiconformal::{dot, FrameJets, SubmersionSetup};
use crate::tensor_lab::{
    contract_first, d0, d1, mat_add, mat_scale, mat_sub, mat_values, norm_sq_1, norm_sq_2, outer, vec_values,
    LocalGeometry, TensorAtPoint, TensorKind,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Trapezoid segments per unit length along integration paths.
pub const SEGMENTS_PER_UNIT: usize = 512;

#[derive(Clone, Debug)]
pub struct Decomposition {
    /// Horizontal part of the flow.
    pub x: Field,
    /// Vertical potential, `E = −μ + X + fU`.
    pub f: Field,
}

#[derive(Clone, Debug)]
pub struct SolitonCandidate {
    pub g: MetricField,
    pub e: Field,
    pub a: f64,
    pub decomposition: Option<Decomposition>,
}

impl SolitonCandidate {
    pub fn new(g: MetricField, e: Field, a: f64) -> Result<Self> {
        if e.dim_in != g.dim() || e.dim_out != g.dim() {
            return Err(Error::Invalid("flow and metric live on charts of different dimension".into()));
        }
        Ok(SolitonCandidate { g, e, a, decomposition: None })
    }

    pub fn with_decomposition(mut self, d: Decomposition) -> Self {
        self.decomposition = Some(d);
        self
    }

    pub fn with_flow(&self, e: Field, a: f64) -> Self {
        SolitonCandidate { g: self.g.clone(), e, a, decomposition: None }
    }
}

/// The three terms of the residual and their sum at a point.
#[derive(Clone, Debug)]
pub struct ResidualBreakdown {
    pub ricci_term: DMatrix<f64>,
    pub lie_term: DMatrix<f64>,
    pub a_term: DMatrix<f64>,
    pub total: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
}

impl ResidualBreakdown {
    pub fn norm(&self) -> f64 {
        g_norm(&self.ginv, &self.total)
    }
}

pub fn g_norm(ginv: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    norm_sq_2(ginv, t).max(0.0).sqrt()
}

/// `−2Ric(g) − L_E g − 2A g` at `p`, with the Ricci tensor from the coordinate oracle.
pub fn soliton_residual(cand: &SolitonCandidate, p: &[f64]) -> Result<ResidualBreakdown> {
    let geo = LocalGeometry::at(&cand.g, p, 2)?;
    let c = &cand.g.chart;
    let e = cand.e.expand(p, 1, c.mode, c.fd_step)?;
    let ricci_term = mat_values(&geo.ricci()) * -2.0;
    let lie_term = -mat_values(&geo.lie_derivative(&e));
    let gm = mat_values(&geo.g);
    let a_term = &gm * (-2.0 * cand.a);
    let total = &ricci_term + &lie_term + &a_term;
    Ok(ResidualBreakdown { ricci_term, lie_term, a_term, total, ginv: mat_values(&geo.ginv) })
}

/// Grid statistics of the soliton defect.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResidualReport {
    pub case: String,
    pub grid: Vec<usize>,
    pub per_point: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub max_ricci_term: f64,
    pub max_lie_term: f64,
    pub max_a_term: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluates the residual at every point; points are processed in parallel but reduced in order.
pub fn residual_report(
    case: &str,
    cand: &SolitonCandidate,
    points: &[Vec<f64>],
    grid: &[usize],
    tolerance: f64,
) -> Result<ResidualReport> {
    let rows: Vec<Result<(f64, f64, f64, f64)>> = points
        .par_iter()
        .map(|p| {
            let r = soliton_residual(cand, p)?;
            Ok((r.norm(), g_norm(&r.ginv, &r.ricci_term), g_norm(&r.ginv, &r.lie_term), g_norm(&r.ginv, &r.a_term)))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let per_point: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let max = per_point.iter().fold(0.0f64, |m, v| m.max(*v));
    let mean = if per_point.is_empty() { 0.0 } else { per_point.iter().sum::<f64>() / per_point.len() as f64 };
    let fold = |k: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(k).fold(0.0f64, f64::max);
    Ok(ResidualReport {
        case: case.to_string(),
        grid: grid.to_vec(),
        max_ricci_term: fold(|r| r.1),
        max_lie_term: fold(|r| r.2),
        max_a_term: fold(|r| r.3),
        per_point,
        max,
        mean,
        tolerance,
        pass: max < tolerance,
    })
}

/// Residual of the decomposed soliton equation for `E = −μ + X + fU`, scaled by −2 so it is
/// directly comparable with [`soliton_residual`]. The Lie derivative of `fU` is taken from its
/// closed form on a conformal foliation rather than differentiated.
pub fn residual_decomposed(setup: &SubmersionSetup, x: &Field, f: &Field, a: f64, p: &[f64]) -> Result<DMatrix<f64>> {
    let fj = setup.jets(p, 2)?;
    let c = setup.chart_m();
    let xj = x.expand(p, 1, c.mode, c.fd_step)?;
    let fv = f.expand(p, 1, c.mode, c.fd_step)?[0];
    let geo = &fj.geo;
    let kn = setup.base_gauss(&fj.y0)?;
    let dl = d0(&fj.ln_lam, 3);
    let u_ll = dot(&fj.u, &dl);
    let mu_ll = dot(&fj.mu, &dl);
    let s = fj.lam2 * kn + geo.laplacian(&fj.ln_lam) + mu_ll - fv * u_ll;
    let tt = outer(&fj.theta, &fj.theta);
    let am: Vec<Jet> = fj.mu_flat.iter().zip(&fj.theta).map(|(m, t)| *m + u_ll * *t).collect();
    let b: Vec<Jet> = fj.theta.iter().map(|t| u_ll * *t).collect();
    let d_ull = d0(&u_ll, 3);
    let ds_om = geo.codiff2(&fj.omega);
    let df = d0(&fv, 3);
    let bracket: Vec<Jet> = (0..3).map(|i| df[i] + fv * fj.mu_flat[i] + d_ull[i] * 2.0 + ds_om[i]).collect();

    let mut rhs = mat_scale(&mat_sub(&geo.g, &tt), s);
    rhs = mat_sub(&rhs, &mat_scale(&geo.g, fj.psi));
    rhs = mat_add(&rhs, &mat_scale(&geo.lie_derivative(&xj), Jet::cst(0.5)));
    rhs = mat_add(&rhs, &mat_scale(&geo.g, Jet::cst(a)));
    rhs = mat_sub(&rhs, &outer(&am, &am));
    rhs = mat_sub(&rhs, &outer(&b, &b));
    rhs = mat_add(&rhs, &mat_scale(&mat_add(&outer(&bracket, &fj.theta), &outer(&fj.theta, &bracket)), Jet::cst(0.5)));
    Ok(mat_values(&rhs) * -2.0)
}

/// `‖E − (−μ + X + fU)‖_g` at `p`.
pub fn decomposition_defect(setup: &SubmersionSetup, cand: &SolitonCandidate, p: &[f64]) -> Result<f64> {
    let d = cand.decomposition.as_ref().ok_or_else(|| Error::Invalid("candidate has no decomposition".into()))?;
    let fr = setup.frame(p)?;
    let e = cand.e.eval(p)?;
    let x = d.x.eval(p)?;
    let f = d.f.eval(p)?[0];
    let diff: Vec<f64> = (0..3).map(|i| e[i] - (-fr.mu[i] + x[i] + f * fr.u[i])).collect();
    Ok(norm_sq_1(&setup.g.matrix(p)?, &diff).sqrt())
}

/// `dE♭` at `p`; it vanishes exactly when the flow is locally a gradient.
pub fn gradient_type_defect(g: &MetricField, e: &Field, p: &[f64]) -> Result<TensorAtPoint> {
    let geo = LocalGeometry::at(g, p, 1)?;
    let c = &g.chart;
    let ej = e.expand(p, 1, c.mode, c.fd_step)?;
    Ok(TensorAtPoint::from_mat(TensorKind::TwoForm, &d1(&geo.lower(&ej))))
}

/// g-norm of a 2-form at `p`.
pub fn two_form_norm(g: &MetricField, t: &TensorAtPoint, p: &[f64]) -> Result<f64> {
    let ginv = g.matrix(p)?.try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
    Ok(g_norm(&ginv, &t.matrix()))
}

/// The 1-forms driving the vertical potential at a point: `df + fμ♭ = w`.
#[derive(Clone, Debug)]
pub struct VerticalForms {
    pub mu_flat: Vec<f64>,
    pub w: Vec<f64>,
}

/// The horizontal part `X` of a flow, given on the base.
#[derive(Clone, Debug)]
pub enum HorizontalDatum {
    /// `X = grad ln ν` with `ν = ν̄∘φ`.
    Potential(Field),
    /// `X` the horizontal lift of `λ̄²Ȳ`; reduces to the potential case when `Ȳ = grad ln ν̄`.
    Vector(Field),
}

impl HorizontalDatum {
    pub(crate) fn check(&self) -> Result<()> {
        let ok = match self {
            HorizontalDatum::Potential(f) => f.dim_in == 2 && f.dim_out == 1,
            HorizontalDatum::Vector(f) => f.dim_in == 2 && f.dim_out == 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("ν̄ must be a scalar and Ȳ a vector field on the base".into()))
        }
    }

    /// `X` as a vector on `M`, one order below the frame jets.
    pub(crate) fn lift(&self, setup: &SubmersionSetup, fj: &FrameJets) -> Result<Vec<Jet>> {
        let nc = setup.chart_n();
        match self {
            HorizontalDatum::Potential(nu_bar) => {
                let nu = nu_bar.compose(&fj.phi, nc.mode, nc.fd_step)?[0];
                if nu.value() <= 0.0 {
                    return Err(Error::Invalid(format!("ν̄ is not positive at {:?}", fj.y0)));
                }
                Ok(fj.geo.raise(&d0(&nu.ln(), 3)))
            }
            HorizontalDatum::Vector(y) => {
                let yv = y.compose(&fj.phi, nc.mode, nc.fd_step)?;
                // X = g⁻¹ Jᵀ h Ȳ
                let hy: Vec<Jet> = (0..2).map(|a| (0..2).map(|b| fj.hphi[a][b] * yv[b]).sum()).collect();
                let form: Vec<Jet> = (0..3).map(|i| (0..2).map(|a| fj.jac[a][i] * hy[a]).sum()).collect();
                Ok(fj.geo.raise(&form))
            }
        }
    }
}

/// Data that fixes `f` through `df + fμ♭ = −Ω⌋X − d*Ω + (ψ − A)θ`, normally with `X = grad ln ν`.
#[derive(Clone, Debug)]
pub struct VerticalProblem {
    pub setup: Arc<SubmersionSetup>,
    pub datum: HorizontalDatum,
    pub a: f64,
    /// A coordinate on which the metric and the data do not depend; sweeps along it reuse one
    /// evaluation of the forms.
    pub invariant_axis: Option<usize>,
}

impl VerticalProblem {
    /// Potential case with `ν̄` on the base surface.
    pub fn new(setup: Arc<SubmersionSetup>, nu_bar: Field, a: f64) -> Result<Self> {
        Self::with_datum(setup, HorizontalDatum::Potential(nu_bar), a)
    }

    pub fn with_datum(setup: Arc<SubmersionSetup>, datum: HorizontalDatum, a: f64) -> Result<Self> {
        datum.check()?;
        Ok(VerticalProblem { setup, datum, a, invariant_axis: None })
    }

    pub fn with_invariant_axis(mut self, axis: usize) -> Self {
        self.invariant_axis = Some(axis);
        self
    }

    fn forms_jets(&self, fj: &FrameJets) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let grad = self.datum.lift(&self.setup, fj)?;
        let contr = contract_first(&fj.omega, &grad);
        let ds = fj.geo.codiff2(&fj.omega);
        let w: Vec<Jet> = (0..3).map(|i| -contr[i] - ds[i] + (fj.psi - self.a) * fj.theta[i]).collect();
        Ok((grad, w))
    }

    pub fn forms(&self, p: &[f64]) -> Result<VerticalForms> {
        let fj = self.setup.jets(p, 2)?;
        let (_, w) = self.forms_jets(&fj)?;
        Ok(VerticalForms { mu_flat: vec_values(&fj.mu_flat), w: vec_values(&w) })
    }

    /// Integrability of `ρw`: the g-norm of `μ♭∧w + dw`, with `dw` by central differences.
    pub fn integrability_defect(&self, p: &[f64]) -> Result<f64> {
        let c = self.setup.chart_m();
        let h = c.fd_step * crate::field::THIRD_ORDER_SCALE;
        let base = self.forms(p)?;
        let mut dw = [[0.0; 3]; 3];
        let mut grad = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[k] += h;
            pm[k] -= h;
            let (a, b) = (self.forms(&pp)?, self.forms(&pm)?);
            for j in 0..3 {
                grad[k][j] = (a.w[j] - b.w[j]) / (2.0 * h);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                dw[i][j] = grad[i][j] - grad[j][i] + base.mu_flat[i] * base.w[j] - base.mu_flat[j] * base.w[i];
            }
        }
        let ginv = self.setup.g.matrix(p)?.try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
        let m = DMatrix::from_fn(3, 3, |i, j| dw[i][j]);
        Ok(g_norm(&ginv, &m))
    }

    /// Integrates `(ln ρ, fρ)` along a polyline, returning `f` at every vertex.
    pub fn solve_f(&self, path: &[Vec<f64>], f0: f64) -> Result<FPath> {
        if path.is_empty() {
            return Err(Error::Invalid("empty integration path".into()));
        }
        let mut state = PathState { ln_rho: 0.0, f_rho: f0 };
        let mut f = vec![f0];
        let mut ln_rho = vec![0.0];
        let mut prev = self.forms(&path[0])?;
        for win in path.windows(2) {
            let (a, b) = (&win[0], &win[1]);
            let len = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let n = ((len * SEGMENTS_PER_UNIT as f64).ceil() as usize).max(1);
            for s in 1..=n {
                let t = s as f64 / n as f64;
                let q: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
                let step: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / n as f64).collect();
                let next = self.forms(&q)?;
                state = state.advance(&prev, &next, &step);
                prev = next;
            }
            f.push(state.f());
            ln_rho.push(state.ln_rho);
        }
        Ok(FPath { f, ln_rho })
    }

    /// `f` on a tensor grid by sweeping axis-parallel paths from `base`: first along the first
    /// coordinate, then the second, then the third, sharing the common legs.
    pub fn solve_f_grid(&self, axes: &[Vec<f64>; 3], base: &[f64], f0: f64) -> Result<FGrid> {
        let start = PathState { ln_rho: 0.0, f_rho: f0 };
        let leg1 = self.sweep(base, 0, &axes[0], start)?;
        let mut values = vec![0.0; axes[0].len() * axes[1].len() * axes[2].len()];
        let rows: Vec<Result<Vec<f64>>> = axes[0]
            .par_iter()
            .zip(leg1.par_iter())
            .map(|(&x0, s1)| {
                let p1 = [x0, base[1], base[2]];
                let leg2 = self.sweep(&p1, 1, &axes[1], *s1)?;
                let mut out = Vec::with_capacity(axes[1].len() * axes[2].len());
                for (&x1, s2) in axes[1].iter().zip(&leg2) {
                    let p2 = [x0, x1, base[2]];
                    out.extend(self.sweep(&p2, 2, &axes[2], *s2)?.iter().map(PathState::f));
                }
                Ok(out)
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            let n = row.len();
            values[i * n..(i + 1) * n].copy_from_slice(&row);
        }
        Ok(FGrid { axes: axes.clone(), values })
    }

    /// Integrates from `from` along coordinate `axis` to each target value.
    fn sweep(&self, from: &[f64], axis: usize, targets: &[f64], start: PathState) -> Result<Vec<PathState>> {
        let mut out = vec![start; targets.len()];
        let x0 = from[axis];
        for dir in [1.0, -1.0] {
            let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| (targets[i] - x0) * dir > 0.0).collect();
            idx.sort_by(|&a, &b| ((targets[a] - x0) * dir).total_cmp(&((targets[b] - x0) * dir)));
            let mut state = start;
            let mut pos = x0;
            let mut q = from.to_vec();
            let mut prev = self.forms(&q)?;
            for i in idx {
                let goal = targets[i];
                let n = (((goal - pos).abs() * SEGMENTS_PER_UNIT as f64).ceil() as usize).max(1);
                let h = (goal - pos) / n as f64;
                let mut step = vec![0.0; 3];
                step[axis] = h;
                let invariant = self.invariant_axis == Some(axis);
                for s in 1..=n {
                    q[axis] = pos + h * s as f64;
                    let next = if invariant { prev.clone() } else { self.forms(&q)? };
                    state = state.advance(&prev, &next, &step);
                    prev = next;
                }
                pos = goal;
                q[axis] = goal;
                out[i] = state;
            }
        }
        Ok(out)
    }

    /// The flow `E = −μ + grad ln ν + fU` as a field valid to first order, with `f` read from a grid
    /// (or integrated along an axis path when the point is not a grid node).
    pub fn flow_field(self: &Arc<Self>, grid: Arc<FGrid>, base: Vec<f64>, f0: f64) -> Field {
        let me = Arc::clone(self);
        Field::from_local_fn(3, 3, move |p, order| {
            let f = match grid.lookup(p) {
                Some(v) => v,
                None => {
                    let path = axis_path(&base, p);
                    *me.solve_f(&path, f0)?.f.last().expect("non-empty path")
                }
            };
            me.flow_jets(p, f, order)
        })
        .with_label("−μ + X + fU")
    }

    fn flow_jets(&self, p: &[f64], f: f64, order: usize) -> Result<Vec<Jet>> {
        let fj = self.setup.jets(p, 2)?;
        let (grad, w) = self.forms_jets(&fj)?;
        let df: Vec<f64> = (0..3).map(|i| w[i].value() - f * fj.mu_flat[i].value()).collect();
        let mut fjet = Jet::cst(f).truncate(order.min(1));
        if order >= 1 {
            for (i, d) in df.iter().enumerate() {
                fjet += Jet::var(0.0, i, 1) * *d;
            }
        }
        Ok((0..3).map(|i| (-fj.mu[i] + grad[i] + fjet * fj.u[i]).truncate(order.min(1))).collect())
    }
}

#[derive(Clone, Copy, Debug)]
struct PathState {
    ln_rho: f64,
    f_rho: f64,
}

impl PathState {
    fn f(&self) -> f64 {
        self.f_rho / self.ln_rho.exp()
    }

    /// One trapezoid step of `d ln ρ = μ♭`, `d(fρ) = ρw`.
    fn advance(self, a: &VerticalForms, b: &VerticalForms, step: &[f64]) -> PathState {
        let pair = |v: &[f64]| v.iter().zip(step).map(|(x, s)| x * s).sum::<f64>();
        let ln_rho = self.ln_rho + 0.5 * (pair(&a.mu_flat) + pair(&b.mu_flat));
        let f_rho = self.f_rho + 0.5 * (self.ln_rho.exp() * pair(&a.w) + ln_rho.exp() * pair(&b.w));
        PathState { ln_rho, f_rho }
    }
}

/// `f` and `ln ρ` at the vertices of an integration path.
#[derive(Clone, Debug)]
pub struct FPath {
    pub f: Vec<f64>,
    pub ln_rho: Vec<f64>,
}

/// `f` on a tensor grid, stored with the last axis fastest.
#[derive(Clone, Debug)]
pub struct FGrid {
    pub axes: [Vec<f64>; 3],
    pub values: Vec<f64>,
}

impl FGrid {
    pub fn lookup(&self, p: &[f64]) -> Option<f64> {
        let find = |ax: &Vec<f64>, v: f64| ax.iter().position(|a| (a - v).abs() <= 1e-12 * (1.0 + v.abs()));
        let (i, j, k) = (find(&self.axes[0], p[0])?, find(&self.axes[1], p[1])?, find(&self.axes[2], p[2])?);
        Some(self.values[(i * self.axes[1].len() + j) * self.axes[2].len() + k])
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.values.len());
        for &a in &self.axes[0] {
            for &b in &self.axes[1] {
                for &c in &self.axes[2] {
                    out.push(vec![a, b, c]);
                }
            }
        }
        out
    }
}

/// Polyline from `a` to `b` moving one coordinate at a time.
pub fn axis_path(a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![a.to_vec()];
    let mut cur = a.to_vec();
    for k in 0..a.len() {
        if cur[k] != b[k] {
            cur[k] = b[k];
            out.push(cur.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Chart;

    fn chart3(lo: f64, hi: f64) -> Chart {
        Chart::new(&["x1", "x2", "x3"], &[lo; 3], &[hi; 3]).unwrap()
    }

    fn sol_setup() -> SubmersionSetup {
        let g = MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "exp(2*x1)", "0", "exp(-2*x1)"]).unwrap();
        let hc = Chart::new(&["x1", "x2"], &[-3.0; 2], &[3.0; 2]).unwrap();
        let h = MetricField::from_exprs(hc, &["1", "0", "exp(2*x1)"]).unwrap();
        let phi = Field::from_exprs(&["x1", "x2", "x3"], &["x1", "x2"]).unwrap();
        SubmersionSetup::new(g, h, phi).unwrap()
    }

    fn nil_setup() -> SubmersionSetup {
        let g = MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "1 + x1^2", "x1", "1"]).unwrap();
        let hc = Chart::new(&["x1", "x2"], &[-3.0; 2], &[3.0; 2]).unwrap();
        let h = MetricField::from_exprs(hc, &["1", "0", "1"]).unwrap();
        let phi = Field::from_exprs(&["x1", "x2", "x3"], &["x1", "x2"]).unwrap();
        SubmersionSetup::new(g, h, phi).unwrap()
    }

    #[test]
    fn sol_flow_is_soliton_and_not_gradient() {
        let s = sol_setup();
        let e = Field::from_exprs(&["x1", "x2", "x3"], &["-2", "0", "-4*x3"]).unwrap();
        let cand = SolitonCandidate::new(s.g.clone(), e.clone(), 2.0).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.5, -0.3, 0.7]] {
            assert!(soliton_residual(&cand, &p).unwrap().norm() < 1e-12);
        }
        let d = gradient_type_defect(&s.g, &e, &[0.0, 0.0, 1.0]).unwrap();
        assert!((d.get(&[0, 2]) - 8.0).abs() < 1e-12, "{:?}", d.data);
    }

    #[test]
    fn sol_vertical_potential() {
        let s = Arc::new(sol_setup());
        let nu = Field::from_exprs(&["x1", "x2"], &["exp(-x1)"]).unwrap();
        let vp = VerticalProblem::new(s, nu, 2.0).unwrap();
        let p = [0.4, 0.2, 0.5];
        let path = axis_path(&[0.0, 0.0, 0.0], &p);
        let sol = vp.solve_f(&path, 0.0).unwrap();
        let expect = -4.0 * 0.5 * (-0.4f64).exp();
        assert!((sol.f.last().unwrap() - expect).abs() < 1e-6, "{}", sol.f.last().unwrap());
        assert!(vp.integrability_defect(&p).unwrap() < 1e-5);
    }

    #[test]
    fn nil_decomposed_matches_direct() {
        let s = Arc::new(nil_setup());
        let e = Field::from_exprs(&["x1", "x2", "x3"], &["-x1", "-x2", "-2*x3"]).unwrap();
        let cand = SolitonCandidate::new(s.g.clone(), e, 1.5).unwrap();
        let x = Field::from_exprs(&["x1", "x2", "x3"], &["-x1", "-x2", "x1 * x2"]).unwrap();
        let f = Field::from_exprs(&["x1", "x2", "x3"], &["-x1*x2 - 2*x3"]).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.3, -0.5, 0.2]] {
            let direct = soliton_residual(&cand, &p).unwrap();
            assert!(direct.norm() < 1e-12);
            let dec = residual_decomposed(&s, &x, &f, 1.5, &p).unwrap();
            assert!((dec - &direct.total).amax() < 1e-10);
        }
        let cand = cand.with_decomposition(Decomposition { x, f });
        assert!(decomposition_defect(&s, &cand, &[0.3, -0.5, 0.2]).unwrap() < 1e-12);
        let nu = Field::from_exprs(&["x1", "x2"], &["exp(-(x1^2 + x2^2)/2)"]).unwrap();
        let vp = VerticalProblem::new(s, nu, 1.5).unwrap();
        let p = [0.6, -0.4, 0.3];
        let f = vp.solve_f(&axis_path(&[0.0; 3], &p), 0.0).unwrap();
        assert!((f.f.last().unwrap() - (0.24 - 0.6)).abs() < 1e-6);
    }

    #[test]
    fn grid_sweep_matches_single_paths() {
        let s = Arc::new(sol_setup());
        let nu = Field::from_exprs(&["x1", "x2"], &["exp(-x1)"]).unwrap();
        let vp = Arc::new(VerticalProblem::new(s.clone(), nu, 2.0).unwrap());
        let ax = vec![-0.5, 0.0, 0.5];
        let grid = vp.solve_f_grid(&[ax.clone(), ax.clone(), ax.clone()], &[0.0; 3], 0.0).unwrap();
        for p in grid.points() {
            let f = grid.lookup(&p).unwrap();
            assert!((f + 4.0 * p[2] * (-p[0]).exp()).abs() < 1e-6);
        }
        let e = vp.flow_field(Arc::new(grid.clone()), vec![0.0; 3], 0.0);
        let cand = SolitonCandidate::new(s.g.clone(), e, 2.0).unwrap();
        let rep = residual_report("sol", &cand, &grid.points(), &[3, 3, 3], 1e-5).unwrap();
        assert!(rep.pass, "{}", rep.max);
        assert!(rep.max >= rep.mean);
    }

    #[test]
    fn gaussian_solitons() {
        let g = MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "1", "0", "1"]).unwrap();
        for a in [-1.0, 0.0, 1.0] {
            let e = Field::from_jet_fn(3, 3, move |x| Ok(x.iter().map(|c| *c * -a).collect()));
            let cand = SolitonCandidate::new(g.clone(), e.clone(), a).unwrap();
            assert!(soliton_residual(&cand, &[0.3, 0.2, -0.1]).unwrap().norm() < 1e-14);
            assert!(gradient_type_defect(&g, &e, &[0.3, 0.2, -0.1]).unwrap().max_abs() < 1e-14);
        }
    }
}
