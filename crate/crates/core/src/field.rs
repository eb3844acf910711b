//! Coordinate charts and smooth fields on them.
//!
//! Every field can produce its Taylor [`Jet`] at a point. Fields built from
//! closed forms do so exactly (analytic mode); otherwise, or when finite
//! differences are requested, the jet is estimated from central-difference
//! stencils of plain evaluations.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, MAX_ORDER, NVARS};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

/// How input fields are differentiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffMode {
    /// Exact Taylor coefficients from jet evaluation where the field supports it.
    #[default]
    Analytic,
    /// Central differences on plain point evaluations.
    Fd,
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Third derivatives nest a Hessian stencil at offsets this many steps away.
pub const THIRD_ORDER_SCALE: f64 = 10.0;

type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A coordinate box (optionally cut down by a predicate) with a differentiation policy.
#[derive(Clone)]
pub struct Chart {
    pub coord_names: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    predicate: Option<Predicate>,
    pub fd_step: f64,
    pub mode: DiffMode,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("coords", &self.coord_names)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("fd_step", &self.fd_step)
            .field("mode", &self.mode)
            .finish()
    }
}

impl Chart {
    pub fn new(names: &[&str], lo: &[f64], hi: &[f64]) -> Result<Chart> {
        let dim = names.len();
        if !(2..=NVARS).contains(&dim) || lo.len() != dim || hi.len() != dim {
            return Err(Error::Invalid(format!("chart must have dimension 2 or 3 with matching bounds, got {dim}")));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Invalid("chart box has empty extent".into()));
        }
        Ok(Chart {
            coord_names: names.iter().map(|s| s.to_string()).collect(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            predicate: None,
            fd_step: DEFAULT_FD_STEP,
            mode: DiffMode::Analytic,
        })
    }

    pub fn with_predicate(mut self, p: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.predicate = Some(Arc::new(p));
        self
    }

    pub fn with_mode(mut self, mode: DiffMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Invalid(format!("fd_step must be positive, got {h}")));
        }
        self.fd_step = h;
        Ok(self)
    }

    pub fn with_box(mut self, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != self.dim() || hi.len() != self.dim() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Invalid("box does not match chart dimension or is empty".into()));
        }
        self.lo = lo.to_vec();
        self.hi = hi.to_vec();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.coord_names.iter().map(String::as_str).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Membership in the (slightly enlarged) box and the predicate.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| {
                let slack = 1e-9 * (1.0 + b - a);
                *x >= a - slack && *x <= b + slack
            })
            && self.predicate.as_ref().is_none_or(|f| f(p))
    }

    /// Finite-difference safety: the stencil cube of half-width `2·fd_step` lies in the domain.
    pub fn check_fd_safe(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain { point: p.to_vec() });
        }
        let m = 2.0 * self.fd_step;
        let inside = |q: &[f64]| {
            q.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= a - m && *x <= b + m)
                && self.predicate.as_ref().is_none_or(|f| f(q))
        };
        if !inside(p) {
            return Err(Error::Domain { point: p.to_vec() });
        }
        if self.predicate.is_some() {
            for k in 0..self.dim() {
                for s in [-m, m] {
                    let mut q = p.to_vec();
                    q[k] += s;
                    if !inside(&q) {
                        return Err(Error::Domain { point: p.to_vec() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Regular grid with `counts[i]` nodes per axis (endpoints included), filtered by the predicate.
    pub fn grid(&self, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
        if counts.len() != self.dim() || counts.iter().any(|&c| c < 2) {
            return Err(Error::Invalid(format!("grid needs {} counts of at least 2", self.dim())));
        }
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| {
                (0..counts[i])
                    .map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (counts[i] - 1) as f64)
                    .collect()
            })
            .collect();
        let mut out = vec![vec![]];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for &v in axis {
                    let mut q = prefix.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            out = next;
        }
        out.retain(|q| self.predicate.as_ref().is_none_or(|f| f(q)));
        Ok(out)
    }

    /// `n` pseudo-random points, kept a relative `margin` away from the box faces.
    pub fn sample(&self, n: usize, seed: u64, margin: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n && attempts < 1000 * n.max(1) {
            attempts += 1;
            let q: Vec<f64> = (0..self.dim())
                .map(|i| {
                    let w = self.hi[i] - self.lo[i];
                    self.lo[i] + w * margin + w * (1.0 - 2.0 * margin) * rng.random::<f64>()
                })
                .collect();
            if self.predicate.as_ref().is_none_or(|f| f(&q)) {
                out.push(q);
            }
        }
        out
    }
}

type JetFn = Arc<dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync>;
type PlainFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
type LocalFn = Arc<dyn Fn(&[f64], usize) -> Result<Vec<Jet>> + Send + Sync>;

#[derive(Clone)]
enum Imp {
    /// Closed form evaluable on jets.
    Jet(JetFn),
    /// Point values only; always differentiated by finite differences.
    Plain(PlainFn),
    /// Produces its own Taylor expansion around a point up to a requested order.
    Local(LocalFn),
}

/// A smooth map from a chart (dimension `dim_in`) to `R^dim_out`.
#[derive(Clone)]
pub struct Field {
    pub dim_in: usize,
    pub dim_out: usize,
    imp: Imp,
    label: String,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({} -> {}: {})", self.dim_in, self.dim_out, self.label)
    }
}

impl Field {
    pub fn from_jet_fn(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> Field {
        Field { dim_in, dim_out, imp: Imp::Jet(Arc::new(f)), label: "closure".into() }
    }

    pub fn from_plain_fn(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Field {
        Field { dim_in, dim_out, imp: Imp::Plain(Arc::new(f)), label: "plain closure".into() }
    }

    /// A field that supplies its Taylor expansion around any point directly.
    pub fn from_local_fn(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[f64], usize) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> Field {
        Field { dim_in, dim_out, imp: Imp::Local(Arc::new(f)), label: "local expansion".into() }
    }

    /// Components given as expressions in the chart coordinates.
    pub fn from_exprs(vars: &[&str], exprs: &[&str]) -> Result<Field> {
        let parsed = exprs.iter().map(|s| Expr::parse(s, vars)).collect::<Result<Vec<_>>>()?;
        let label = exprs.join(", ");
        let n = parsed.len();
        let mut f = Field::from_jet_fn(vars.len(), n, move |x| parsed.iter().map(|e| e.eval(x)).collect());
        f.label = label;
        Ok(f)
    }

    pub fn constant(dim_in: usize, values: Vec<f64>) -> Field {
        let n = values.len();
        let label = format!("{values:?}");
        let mut f = Field::from_jet_fn(dim_in, n, move |_| Ok(values.iter().map(|&v| Jet::cst(v)).collect()));
        f.label = label;
        f
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self.imp, Imp::Jet(_))
    }

    /// Plain evaluation.
    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        let out = match &self.imp {
            Imp::Jet(f) => f(&p.iter().map(|&v| Jet::cst(v)).collect::<Vec<_>>())?.iter().map(Jet::value).collect(),
            Imp::Plain(f) => f(p)?,
            Imp::Local(f) => f(p, 0)?.iter().map(Jet::value).collect(),
        };
        self.check_out(&out)?;
        Ok(out)
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim_in {
            return Err(Error::Invalid(format!("{:?} evaluated at a point of dimension {}", self, p.len())));
        }
        Ok(())
    }

    fn check_out<T>(&self, out: &[T]) -> Result<()> {
        if out.len() != self.dim_out {
            return Err(Error::Invalid(format!("{:?} returned {} components", self, out.len())));
        }
        Ok(())
    }

    /// Taylor expansion of every component around `p`, valid to `order`.
    pub fn expand(&self, p: &[f64], order: usize, mode: DiffMode, h: f64) -> Result<Vec<Jet>> {
        self.check_dim(p)?;
        let out = match (&self.imp, mode) {
            (Imp::Jet(f), DiffMode::Analytic) => f(&Jet::seed(p, order))?,
            (Imp::Local(f), DiffMode::Analytic) => f(p, order)?.into_iter().map(|j| j.truncate(order)).collect(),
            _ => self.fd_expand(p, order, h)?,
        };
        self.check_out(&out)?;
        if let Some(bad) = out.iter().find(|j| !j.is_finite()) {
            let _ = bad;
            return Err(Error::NonFinite(format!("{self:?} at {p:?}")));
        }
        Ok(out.into_iter().map(|j| j.truncate(order)).collect())
    }

    /// Evaluates on jet arguments (chain rule through the field).
    pub fn compose(&self, x: &[Jet], mode: DiffMode, h: f64) -> Result<Vec<Jet>> {
        if x.len() != self.dim_in {
            return Err(Error::Invalid(format!("{self:?} composed with {} arguments", x.len())));
        }
        if let (Imp::Jet(f), DiffMode::Analytic) = (&self.imp, mode) {
            let out = f(x)?;
            self.check_out(&out)?;
            return Ok(out);
        }
        let order = x.iter().map(Jet::order).min().unwrap_or(MAX_ORDER);
        let base: Vec<f64> = x.iter().map(Jet::value).collect();
        let local = self.expand(&base, order, mode, h)?;
        let deltas: Vec<Jet> = x.iter().map(|j| *j - j.value()).collect();
        Ok(local.iter().map(|j| j.compose(&deltas)).collect())
    }

    fn fd_expand(&self, p: &[f64], order: usize, h: f64) -> Result<Vec<Jet>> {
        let n = self.dim_in;
        let f = |q: &[f64]| self.eval(q);
        let f0 = f(p)?;
        let m = self.dim_out;
        let shifted = |q: &[f64], k: usize, s: f64| {
            let mut r = q.to_vec();
            r[k] += s;
            r
        };
        let grad_at = |q: &[f64]| -> Result<Vec<Vec<f64>>> {
            let mut g = vec![vec![0.0; n]; m];
            for k in 0..n {
                let (a, b) = (f(&shifted(q, k, h))?, f(&shifted(q, k, -h))?);
                for c in 0..m {
                    g[c][k] = (a[c] - b[c]) / (2.0 * h);
                }
            }
            Ok(g)
        };
        let hess_at = |q: &[f64], fq: &[f64]| -> Result<Vec<Vec<Vec<f64>>>> {
            let mut hs = vec![vec![vec![0.0; n]; n]; m];
            for i in 0..n {
                let (a, b) = (f(&shifted(q, i, h))?, f(&shifted(q, i, -h))?);
                for c in 0..m {
                    hs[c][i][i] = (a[c] - 2.0 * fq[c] + b[c]) / (h * h);
                }
                for j in (i + 1)..n {
                    let pp = f(&shifted(&shifted(q, i, h), j, h))?;
                    let pm = f(&shifted(&shifted(q, i, h), j, -h))?;
                    let mp = f(&shifted(&shifted(q, i, -h), j, h))?;
                    let mm = f(&shifted(&shifted(q, i, -h), j, -h))?;
                    for c in 0..m {
                        let v = (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h * h);
                        hs[c][i][j] = v;
                        hs[c][j][i] = v;
                    }
                }
            }
            Ok(hs)
        };
        let grad = if order >= 1 { grad_at(p)? } else { vec![vec![0.0; n]; m] };
        let hess = if order >= 2 { hess_at(p, &f0)? } else { vec![vec![vec![0.0; n]; n]; m] };
        // third[c][k] = ∂_k Hess at p, from Hessians at p ± H e_k
        let mut third = vec![vec![vec![vec![0.0; n]; n]; n]; m];
        if order >= 3 {
            let big = THIRD_ORDER_SCALE * h;
            for k in 0..n {
                let (qp, qm) = (shifted(p, k, big), shifted(p, k, -big));
                let (hp, hm) = (hess_at(&qp, &f(&qp)?)?, hess_at(&qm, &f(&qm)?)?);
                for c in 0..m {
                    for i in 0..n {
                        for j in 0..n {
                            third[c][k][i][j] = (hp[c][i][j] - hm[c][i][j]) / (2.0 * big);
                        }
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(m);
        for c in 0..m {
            out.push(Jet::from_partials(order, |e| {
                let idx: Vec<usize> = (0..NVARS).flat_map(|v| std::iter::repeat_n(v, e[v])).collect();
                if idx.iter().any(|&v| v >= n) {
                    return 0.0;
                }
                match idx.len() {
                    0 => f0[c],
                    1 => grad[c][idx[0]],
                    2 => hess[c][idx[0]][idx[1]],
                    _ => {
                        // average over which index is differentiated last for symmetry
                        (third[c][idx[0]][idx[1]][idx[2]]
                            + third[c][idx[1]][idx[0]][idx[2]]
                            + third[c][idx[2]][idx[0]][idx[1]])
                            / 3.0
                    }
                }
            }));
        }
        Ok(out)
    }
}

/// Field with a single component.
pub type ScalarField = Field;
/// Field whose components are the contravariant components of a vector.
pub type VectorField = Field;

/// A differential form with components in a chart.
///
/// Degree 0 has one component, degree 1 has `n`, degree 2 stores the full
/// antisymmetric `n×n` matrix row-major.
#[derive(Clone, Debug)]
pub struct FormField {
    pub degree: usize,
    pub field: Field,
}

impl FormField {
    pub fn new(degree: usize, field: Field) -> Result<FormField> {
        let n = field.dim_in;
        let expected = match degree {
            0 => 1,
            1 => n,
            2 => n * n,
            _ => return Err(Error::Invalid(format!("forms of degree {degree} are not supported"))),
        };
        if field.dim_out != expected {
            return Err(Error::Invalid(format!("degree-{degree} form needs {expected} components")));
        }
        Ok(FormField { degree, field })
    }

    /// A 2-form from its independent components `ω_ij`, `i < j`, in lexicographic order.
    pub fn two_form_from_exprs(vars: &[&str], upper: &[&str]) -> Result<FormField> {
        let n = vars.len();
        if upper.len() != n * (n - 1) / 2 {
            return Err(Error::Invalid("wrong number of 2-form components".into()));
        }
        let parsed = upper.iter().map(|s| Expr::parse(s, vars)).collect::<Result<Vec<_>>>()?;
        let field = Field::from_jet_fn(n, n * n, move |x| {
            let mut out = vec![Jet::cst(0.0); n * n];
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = parsed[k].eval(x)?;
                    out[i * n + j] = v;
                    out[j * n + i] = -v;
                    k += 1;
                }
            }
            Ok(out)
        });
        FormField::new(2, field)
    }
}

/// A Riemannian metric on a chart.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub chart: Chart,
    components: Field,
    pub orientation: f64,
}

/// Relative symmetry tolerance for metric components.
const SYMMETRY_TOL: f64 = 1e-12;
/// Points whose metric condition number exceeds this are reported as singular.
pub const CONDITION_CAP: f64 = 1e10;

impl MetricField {
    /// `components` must return the full `n×n` matrix row-major.
    pub fn new(chart: Chart, components: Field) -> Result<MetricField> {
        let n = chart.dim();
        if components.dim_in != n || components.dim_out != n * n {
            return Err(Error::Invalid(format!("metric on a {n}-chart needs {n}x{n} components")));
        }
        Ok(MetricField { chart, components, orientation: 1.0 })
    }

    /// Metric from the upper-triangular entries `g_ij`, `i <= j`, row by row.
    pub fn from_exprs(chart: Chart, upper: &[&str]) -> Result<MetricField> {
        let n = chart.dim();
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::Invalid(format!("metric on a {n}-chart needs {} expressions", n * (n + 1) / 2)));
        }
        let names = chart.names();
        let parsed = upper.iter().map(|s| Expr::parse(s, &names)).collect::<Result<Vec<_>>>()?;
        let label = upper.join(", ");
        let field = Field::from_jet_fn(n, n * n, move |x| {
            let mut out = vec![Jet::cst(0.0); n * n];
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    let v = parsed[k].eval(x)?;
                    out[i * n + j] = v;
                    out[j * n + i] = v;
                    k += 1;
                }
            }
            Ok(out)
        })
        .with_label(label);
        MetricField::new(chart, field)
    }

    /// Metric from a jet closure returning the full matrix.
    pub fn from_fn(
        chart: Chart,
        f: impl Fn(&[Jet]) -> Result<Vec<Vec<Jet>>> + Send + Sync + 'static,
    ) -> Result<MetricField> {
        let n = chart.dim();
        let field = Field::from_jet_fn(n, n * n, move |x| Ok(f(x)?.into_iter().flatten().collect()));
        MetricField::new(chart, field)
    }

    pub fn with_orientation(mut self, o: f64) -> Self {
        self.orientation = if o < 0.0 { -1.0 } else { 1.0 };
        self
    }

    pub fn with_chart(mut self, chart: Chart) -> Result<Self> {
        if chart.dim() != self.chart.dim() {
            return Err(Error::Invalid("replacement chart has a different dimension".into()));
        }
        self.chart = chart;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn components(&self) -> &Field {
        &self.components
    }

    /// Jets of `g_ij` around `p` (domain-checked), using the chart's mode and step.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Vec<Jet>>> {
        self.chart.check_fd_safe(p)?;
        let flat = self.components.expand(p, order, self.chart.mode, self.chart.fd_step)?;
        Ok(self.reshape(flat))
    }

    /// Metric components along jet arguments (used to pull the metric through a map).
    pub fn compose(&self, x: &[Jet]) -> Result<Vec<Vec<Jet>>> {
        let flat = self.components.compose(x, self.chart.mode, self.chart.fd_step)?;
        Ok(self.reshape(flat))
    }

    fn reshape(&self, flat: Vec<Jet>) -> Vec<Vec<Jet>> {
        let n = self.dim();
        (0..n).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect()
    }

    /// Metric matrix at `p` after symmetry and positivity checks.
    pub fn matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let v = self.components.eval(p)?;
        let m = DMatrix::from_row_slice(n, n, &v);
        validate_metric_matrix(&m, p)?;
        Ok(m)
    }
}

/// Symmetry, positivity and conditioning checks shared by every metric evaluation.
pub fn validate_metric_matrix(m: &DMatrix<f64>, p: &[f64]) -> Result<()> {
    let scale = m.amax().max(1e-300);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::Invalid(format!("metric not symmetric at {p:?}")));
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite { point: p.to_vec(), min_eig: lo });
    }
    if hi / lo > CONDITION_CAP {
        return Err(Error::Singular(format!("metric condition number {:.3e} at {p:?}", hi / lo)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_expansion_matches_analytic() {
        let f = Field::from_exprs(&["x", "y", "z"], &["exp(x) * sin(y) + z^3 * x"]).unwrap();
        let p = [0.3, 0.7, -0.4];
        let a = f.expand(&p, 3, DiffMode::Analytic, 1e-4).unwrap()[0];
        let d = f.expand(&p, 3, DiffMode::Fd, 1e-4).unwrap()[0];
        for e in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            assert!((a.partial(e) - d.partial(e)).abs() < 1e-7, "{e:?}");
        }
        for e in [[2, 0, 0], [1, 1, 0], [0, 1, 1], [1, 0, 1]] {
            assert!((a.partial(e) - d.partial(e)).abs() < 1e-6, "{e:?}");
        }
        for e in [[3, 0, 0], [2, 1, 0], [1, 0, 2], [0, 0, 3]] {
            assert!((a.partial(e) - d.partial(e)).abs() < 1e-4, "{e:?}");
        }
    }

    #[test]
    fn plain_fields_are_differentiated_numerically() {
        let f = Field::from_plain_fn(2, 1, |p| Ok(vec![p[0] * p[0] * p[1]]));
        let j = f.expand(&[1.0, 2.0], 2, DiffMode::Analytic, 1e-4).unwrap()[0];
        assert!((j.d1(0) - 4.0).abs() < 1e-7);
        assert!((j.d2(0, 1) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn composition_agrees_across_modes() {
        let f = Field::from_exprs(&["u", "v"], &["u * exp(v)"]).unwrap();
        let x = Jet::seed(&[0.2, 0.1, 0.5], 2);
        let args = [x[0] * x[1], x[2] - x[0]];
        let a = f.compose(&args, DiffMode::Analytic, 1e-4).unwrap()[0];
        let d = f.compose(&args, DiffMode::Fd, 1e-4).unwrap()[0];
        assert!((a.d1(2) - d.d1(2)).abs() < 1e-7);
        assert!((a.d2(0, 1) - d.d2(0, 1)).abs() < 1e-6);
    }

    #[test]
    fn grid_and_sampling() {
        let c = Chart::new(&["x", "y"], &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        let g = c.grid(&[3, 5]).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(g[14], vec![1.0, 2.0]);
        let s1 = c.sample(10, 7, 0.1);
        let s2 = c.sample(10, 7, 0.1);
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|q| q[0] >= 0.1 && q[0] <= 0.9 && q[1] >= 0.2 && q[1] <= 1.8));
        let disc = c.clone().with_predicate(|q| q[0] * q[0] + q[1] * q[1] < 1.0);
        assert!(disc.grid(&[3, 5]).unwrap().len() < 15);
        assert!(disc.check_fd_safe(&[0.9, 0.9]).is_err());
        assert!(c.check_fd_safe(&[0.5, 3.0]).is_err());
    }

    #[test]
    fn metric_validation() {
        let c = Chart::new(&["x", "y"], &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let g = MetricField::from_exprs(c.clone(), &["1", "x", "1"]).unwrap();
        assert!(g.matrix(&[0.5, 0.0]).is_ok());
        assert!(matches!(g.matrix(&[1.0, 0.0]), Err(Error::NotPositiveDefinite { .. })));
        let s = MetricField::from_exprs(c, &["1", "0", "1e-12"]).unwrap();
        assert!(matches!(s.matrix(&[0.0, 0.0]), Err(Error::Singular(_))));
    }
}
