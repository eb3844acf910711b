//! Coordinate tensor calculus: Christoffel symbols, curvature, Lie derivatives,
//! Hessians, exterior derivative and codifferential.
//!
//! The `*_jets` functions act on Taylor jets of components around a point and
//! are exact jet algebra; each derivative lowers the jet order by one. The
//! point-level functions take fields, expand them with the chart's
//! differentiation policy, and return plain numbers.
//!
//! Conventions: `R_ij = ∂_kΓ^k_ij − ∂_iΓ^k_kj + Γ^k_klΓ^l_ij − Γ^k_ilΓ^l_kj`
//! (the round sphere has `Ric = +g`), `Δf = g^ij ∇_i∂_j f`,
//! `(dω)_ij = ∂_iω_j − ∂_jω_i`, `(d*ω) = −g^ij ∇_iω_j` and
//! `(d*Ω)_j = −g^ik ∇_iΩ_kj`.

use crate::error::{Error, Result};
use crate::field::{validate_metric_matrix, Chart, Field, FormField, MetricField};
use crate::jet::Jet;
use nalgebra::DMatrix;

pub type Mat = Vec<Vec<Jet>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![Jet::cst(0.0); n]; n]
}

pub fn det(m: &Mat) -> Jet {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        n => panic!("determinant of a {n}x{n} jet matrix is not supported"),
    }
}

/// Inverse by cofactors; fails when the determinant vanishes at the base point.
pub fn inverse(m: &Mat) -> Result<Mat> {
    let n = m.len();
    let d = det(m);
    let scale = m.iter().flatten().map(|x| x.value().abs()).fold(0.0, f64::max).max(1e-300);
    if d.value().abs() <= 1e-14 * scale.powi(n as i32) {
        return Err(Error::Singular(format!("matrix with determinant {:e}", d.value())));
    }
    let r = d.recip();
    let mut inv = zeros(n);
    match n {
        1 => inv[0][0] = r,
        2 => {
            inv[0][0] = m[1][1] * r;
            inv[0][1] = -m[0][1] * r;
            inv[1][0] = -m[1][0] * r;
            inv[1][1] = m[0][0] * r;
        }
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                    let (c, e) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) * r;
                }
            }
        }
        _ => return Err(Error::Invalid(format!("inverse of {n}x{n} not supported"))),
    }
    Ok(inv)
}

pub fn mat_values(m: &Mat) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, m[0].len(), |i, j| m[i][j].value())
}

pub fn vec_values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

/// Gradient (the components of `df`).
pub fn d0(f: &Jet, n: usize) -> Vec<Jet> {
    (0..n).map(|i| f.d(i)).collect()
}

/// `(dω)_ij = ∂_iω_j − ∂_jω_i`.
pub fn d1(w: &[Jet]) -> Mat {
    let n = w.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[i][j] = w[j].d(i) - w[i].d(j);
            }
        }
    }
    out
}

/// `(dΩ)_ijk = ∂_iΩ_jk + ∂_jΩ_ki + ∂_kΩ_ij`.
pub fn d2(om: &Mat) -> Vec<Mat> {
    let n = om.len();
    let mut out = vec![zeros(n); n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    out[i][j][k] = om[j][k].d(i) + om[k][i].d(j) + om[i][j].d(k);
                }
            }
        }
    }
    out
}

/// Christoffel symbols `Γ[k][i][j] = Γ^k_ij` from metric jets and their inverse.
pub fn christoffel_jets(g: &Mat, ginv: &Mat) -> Vec<Mat> {
    let n = g.len();
    let dg: Vec<Mat> = (0..n).map(|l| (0..n).map(|i| (0..n).map(|j| g[i][j].d(l)).collect()).collect()).collect();
    let mut gam = vec![zeros(n); n];
    for i in 0..n {
        for j in i..n {
            // first kind: [ij, l] = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
            let first: Vec<Jet> = (0..n).map(|l| (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]) * 0.5).collect();
            for k in 0..n {
                let v: Jet = (0..n).map(|l| ginv[k][l] * first[l]).sum();
                gam[k][i][j] = v;
                gam[k][j][i] = v;
            }
        }
    }
    gam
}

/// Geometry of a metric at a point, kept as jets for further differentiation.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub g: Mat,
    pub ginv: Mat,
    pub gamma: Vec<Mat>,
}

impl LocalGeometry {
    pub fn new(g: Mat) -> Result<LocalGeometry> {
        let ginv = inverse(&g)?;
        let gamma = christoffel_jets(&g, &ginv);
        Ok(LocalGeometry { g, ginv, gamma })
    }

    /// Expands `metric` at `p` to `order` (at least 2 for curvature).
    pub fn at(metric: &MetricField, p: &[f64], order: usize) -> Result<LocalGeometry> {
        let g = metric.jets(p, order)?;
        validate_metric_matrix(&mat_values(&g), p)?;
        LocalGeometry::new(g)
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Riemann tensor `R[a][b][c][d] = R^a_bcd` with `Ric_bd = R^a_bad`.
    pub fn riemann(&self) -> Vec<Vec<Mat>> {
        let n = self.dim();
        let gam = &self.gamma;
        let mut r = vec![vec![zeros(n); n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        if c == d {
                            continue;
                        }
                        let mut v = gam[a][d][b].d(c) - gam[a][c][b].d(d);
                        for e in 0..n {
                            v += gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b];
                        }
                        r[a][b][c][d] = v;
                    }
                }
            }
        }
        r
    }

    pub fn ricci(&self) -> Mat {
        let n = self.dim();
        let gam = &self.gamma;
        let mut ric = zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut v = Jet::cst(0.0);
                for k in 0..n {
                    v += gam[k][i][j].d(k) - gam[k][k][j].d(i);
                    for l in 0..n {
                        v += gam[k][k][l] * gam[l][i][j] - gam[k][i][l] * gam[l][k][j];
                    }
                }
                ric[i][j] = v;
                ric[j][i] = v;
            }
        }
        ric
    }

    pub fn trace(&self, t: &Mat) -> Jet {
        let n = self.dim();
        let mut s = Jet::cst(0.0);
        for i in 0..n {
            for j in 0..n {
                s += self.ginv[i][j] * t[i][j];
            }
        }
        s
    }

    /// `(L_E g)_ij = E^k ∂_k g_ij + g_kj ∂_i E^k + g_ik ∂_j E^k`.
    pub fn lie_derivative(&self, e: &[Jet]) -> Mat {
        let n = self.dim();
        let de: Vec<Vec<Jet>> = (0..n).map(|k| (0..n).map(|i| e[k].d(i)).collect()).collect();
        let mut out = zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut v = Jet::cst(0.0);
                for k in 0..n {
                    v += e[k] * self.g[i][j].d(k) + self.g[k][j] * de[k][i] + self.g[i][k] * de[k][j];
                }
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }

    /// `∇_i ∂_j F`.
    pub fn hessian(&self, f: &Jet) -> Mat {
        let n = self.dim();
        let df = d0(f, n);
        let mut out = zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut v = df[j].d(i);
                for k in 0..n {
                    v -= self.gamma[k][i][j] * df[k];
                }
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }

    pub fn laplacian(&self, f: &Jet) -> Jet {
        self.trace(&self.hessian(f))
    }

    /// Covariant derivative of a 1-form: `(∇ω)[i][j] = ∇_i ω_j`.
    pub fn nabla_form(&self, w: &[Jet]) -> Mat {
        let n = self.dim();
        let mut out = zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut v = w[j].d(i);
                for k in 0..n {
                    v -= self.gamma[k][i][j] * w[k];
                }
                out[i][j] = v;
            }
        }
        out
    }

    /// Covariant derivative of a vector: `(∇X)[i][j] = ∇_i X^j`.
    pub fn nabla_vector(&self, x: &[Jet]) -> Mat {
        let n = self.dim();
        let mut out = zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut v = x[j].d(i);
                for k in 0..n {
                    v += self.gamma[j][i][k] * x[k];
                }
                out[i][j] = v;
            }
        }
        out
    }

    pub fn divergence(&self, x: &[Jet]) -> Jet {
        let nx = self.nabla_vector(x);
        (0..self.dim()).map(|i| nx[i][i]).sum()
    }

    pub fn codiff1(&self, w: &[Jet]) -> Jet {
        -self.trace(&self.nabla_form(w))
    }

    /// `(d*Ω)_j = −g^ik (∂_iΩ_kj − Γ^l_ik Ω_lj − Γ^l_ij Ω_kl)`.
    pub fn codiff2(&self, om: &Mat) -> Vec<Jet> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut s = Jet::cst(0.0);
                for i in 0..n {
                    for k in 0..n {
                        let mut nab = om[k][j].d(i);
                        for l in 0..n {
                            nab -= self.gamma[l][i][k] * om[l][j] + self.gamma[l][i][j] * om[k][l];
                        }
                        s -= self.ginv[i][k] * nab;
                    }
                }
                s
            })
            .collect()
    }

    pub fn lower(&self, x: &[Jet]) -> Vec<Jet> {
        mat_vec(&self.g, x)
    }

    pub fn raise(&self, w: &[Jet]) -> Vec<Jet> {
        mat_vec(&self.ginv, w)
    }
}

pub fn mat_vec(m: &Mat, v: &[Jet]) -> Vec<Jet> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| *a * *b).sum()).collect()
}

/// `(α∧β)_ij = α_iβ_j − α_jβ_i`.
pub fn wedge(a: &[Jet], b: &[Jet]) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i] * b[j] - a[j] * b[i];
        }
    }
    out
}

/// Symmetric product with the convention `a⊙b = ½(a⊗b + b⊗a)`.
pub fn sym_product(a: &[Jet], b: &[Jet]) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (a[i] * b[j] + a[j] * b[i]) * 0.5;
        }
    }
    out
}

pub fn outer(a: &[Jet], b: &[Jet]) -> Mat {
    a.iter().map(|x| b.iter().map(|y| *x * *y).collect()).collect()
}

pub fn mat_add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| *x + *y).collect()).collect()
}

pub fn mat_sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| *x - *y).collect()).collect()
}

pub fn mat_scale(a: &Mat, s: Jet) -> Mat {
    a.iter().map(|r| r.iter().map(|x| *x * s).collect()).collect()
}

/// Contraction `(T⌋X)_j = X^i T_ij`.
pub fn contract_first(t: &Mat, x: &[Jet]) -> Vec<Jet> {
    let n = x.len();
    (0..n).map(|j| (0..n).map(|i| x[i] * t[i][j]).sum()).collect()
}

/// `T(X, Y)`.
pub fn bilinear(t: &Mat, x: &[Jet], y: &[Jet]) -> Jet {
    let n = x.len();
    let mut s = Jet::cst(0.0);
    for i in 0..n {
        for j in 0..n {
            s += t[i][j] * x[i] * y[j];
        }
    }
    s
}

/// Norm squared of a covariant 2-tensor, all slots raised: `T_ij T_kl g^ik g^jl`.
pub fn norm_sq_2(ginv: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let r = ginv * t * ginv;
    r.component_mul(t).sum()
}

pub fn norm_sq_1(ginv: &DMatrix<f64>, w: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(w);
    (v.transpose() * ginv * &v)[0]
}

/// Kind of a tensor evaluated at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Scalar,
    Vector,
    OneForm,
    TwoForm,
    ThreeForm,
    SymTensor,
    Christoffel,
    Riemann,
}

/// Components of a tensor at a point, row-major over its indices.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TensorAtPoint {
    pub kind: TensorKind,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl TensorAtPoint {
    pub fn rank(&self) -> usize {
        match self.kind {
            TensorKind::Scalar => 0,
            TensorKind::Vector | TensorKind::OneForm => 1,
            TensorKind::TwoForm | TensorKind::SymTensor => 2,
            TensorKind::ThreeForm | TensorKind::Christoffel => 3,
            TensorKind::Riemann => 4,
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.rank());
        self.data[idx.iter().fold(0, |acc, &i| acc * self.dim + i)]
    }

    pub fn scalar(v: f64) -> Self {
        TensorAtPoint { kind: TensorKind::Scalar, dim: 1, data: vec![v] }
    }

    pub fn from_vec(kind: TensorKind, v: &[Jet]) -> Self {
        TensorAtPoint { kind, dim: v.len(), data: vec_values(v) }
    }

    pub fn from_mat(kind: TensorKind, m: &Mat) -> Self {
        TensorAtPoint { kind, dim: m.len(), data: m.iter().flatten().map(Jet::value).collect() }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2);
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the symmetry the kind promises.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        match self.kind {
            TensorKind::SymTensor | TensorKind::TwoForm => {
                let sign = if self.kind == TensorKind::SymTensor { -1.0 } else { 1.0 };
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((self.get(&[i, j]) + sign * self.get(&[j, i])).abs());
                    }
                }
            }
            TensorKind::Christoffel => {
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            worst = worst.max((self.get(&[k, i, j]) - self.get(&[k, j, i])).abs());
                        }
                    }
                }
            }
            _ => {}
        }
        worst
    }
}

pub fn christoffel(g: &MetricField, p: &[f64]) -> Result<TensorAtPoint> {
    let geo = LocalGeometry::at(g, p, 1)?;
    let n = geo.dim();
    Ok(TensorAtPoint {
        kind: TensorKind::Christoffel,
        dim: n,
        data: geo.gamma.iter().flatten().flatten().map(Jet::value).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct Curvature {
    pub riemann: TensorAtPoint,
    pub ricci: TensorAtPoint,
    pub scalar: f64,
    /// Gaussian curvature, for surfaces.
    pub gauss: Option<f64>,
}

impl Curvature {
    /// Full contraction `R_abcd R^abcd`.
    pub fn riemann_norm_sq(&self, g: &DMatrix<f64>) -> Result<f64> {
        let n = self.ricci.dim;
        let ginv = g.clone().try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
        let r = |a: usize, b: usize, c: usize, d: usize| self.riemann.get(&[a, b, c, d]);
        // lower the first index
        let mut low = vec![0.0; n * n * n * n];
        let at = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        low[at(a, b, c, d)] = (0..n).map(|e| g[(a, e)] * r(e, b, c, d)).sum();
                    }
                }
            }
        }
        // raise all four and contract
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut up = 0.0;
                        for a2 in 0..n {
                            for b2 in 0..n {
                                for c2 in 0..n {
                                    for d2 in 0..n {
                                        up += ginv[(a, a2)]
                                            * ginv[(b, b2)]
                                            * ginv[(c, c2)]
                                            * ginv[(d, d2)]
                                            * low[at(a2, b2, c2, d2)];
                                    }
                                }
                            }
                        }
                        s += low[at(a, b, c, d)] * up;
                    }
                }
            }
        }
        Ok(s)
    }
}

pub fn curvature(g: &MetricField, p: &[f64]) -> Result<Curvature> {
    let geo = LocalGeometry::at(g, p, 2)?;
    let n = geo.dim();
    let ric = geo.ricci();
    let scalar = geo.trace(&ric).value();
    let riem = geo.riemann();
    Ok(Curvature {
        riemann: TensorAtPoint {
            kind: TensorKind::Riemann,
            dim: n,
            data: riem.iter().flatten().flatten().flatten().map(Jet::value).collect(),
        },
        ricci: TensorAtPoint::from_mat(TensorKind::SymTensor, &ric),
        scalar,
        gauss: (n == 2).then_some(scalar / 2.0),
    })
}

fn expand_on(chart: &Chart, f: &Field, p: &[f64], order: usize) -> Result<Vec<Jet>> {
    chart.check_fd_safe(p)?;
    f.expand(p, order, chart.mode, chart.fd_step)
}

pub fn lie_derivative_metric(g: &MetricField, e: &Field, p: &[f64]) -> Result<TensorAtPoint> {
    let geo = LocalGeometry::at(g, p, 1)?;
    let ej = expand_on(&g.chart, e, p, 1)?;
    Ok(TensorAtPoint::from_mat(TensorKind::SymTensor, &geo.lie_derivative(&ej)))
}

pub fn covariant_hessian(g: &MetricField, f: &Field, p: &[f64]) -> Result<TensorAtPoint> {
    let geo = LocalGeometry::at(g, p, 1)?;
    let fj = expand_on(&g.chart, f, p, 2)?;
    Ok(TensorAtPoint::from_mat(TensorKind::SymTensor, &geo.hessian(&fj[0])))
}

pub fn laplacian(g: &MetricField, f: &Field, p: &[f64]) -> Result<f64> {
    let geo = LocalGeometry::at(g, p, 1)?;
    let fj = expand_on(&g.chart, f, p, 2)?;
    Ok(geo.laplacian(&fj[0]).value())
}

fn form_jets(form: &FormField, chart: &Chart, p: &[f64], order: usize) -> Result<(usize, Vec<Jet>)> {
    let n = chart.dim();
    if form.field.dim_in != n {
        return Err(Error::Invalid("form lives on a chart of a different dimension".into()));
    }
    Ok((n, expand_on(chart, &form.field, p, order)?))
}

fn as_mat(n: usize, flat: &[Jet]) -> Mat {
    (0..n).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect()
}

/// `dω` at `p` for a 0-, 1- or 2-form; a top-degree input is rejected since its derivative vanishes.
pub fn exterior_derivative(form: &FormField, chart: &Chart, p: &[f64]) -> Result<TensorAtPoint> {
    let (n, w) = form_jets(form, chart, p, 1)?;
    match form.degree {
        0 => Ok(TensorAtPoint::from_vec(TensorKind::OneForm, &d0(&w[0], n))),
        1 => Ok(TensorAtPoint::from_mat(TensorKind::TwoForm, &d1(&w))),
        2 if n == 3 => {
            let d = d2(&as_mat(n, &w));
            Ok(TensorAtPoint {
                kind: TensorKind::ThreeForm,
                dim: n,
                data: d.iter().flatten().flatten().map(Jet::value).collect(),
            })
        }
        k => Err(Error::Invalid(format!(
            "exterior derivative of a degree-{k} form in dimension {n} is identically zero"
        ))),
    }
}

/// `d(dω)` at `p`, used to check finite-difference consistency.
pub fn exterior_derivative_twice(form: &FormField, chart: &Chart, p: &[f64]) -> Result<f64> {
    let (n, w) = form_jets(form, chart, p, 2)?;
    match form.degree {
        0 => Ok(d1(&d0(&w[0], n)).iter().flatten().fold(0.0, |m, x| m.max(x.value().abs()))),
        1 if n == 3 => Ok(d2(&d1(&w)).iter().flatten().flatten().fold(0.0, |m, x| m.max(x.value().abs()))),
        _ => Ok(0.0),
    }
}

pub fn codifferential(g: &MetricField, form: &FormField, p: &[f64]) -> Result<TensorAtPoint> {
    let geo = LocalGeometry::at(g, p, 1)?;
    let (n, w) = form_jets(form, &g.chart, p, 1)?;
    match form.degree {
        1 => Ok(TensorAtPoint::scalar(geo.codiff1(&w).value())),
        2 => Ok(TensorAtPoint::from_vec(TensorKind::OneForm, &geo.codiff2(&as_mat(n, &w)))),
        k => Err(Error::Invalid(format!("codifferential of degree-{k} forms is not supported"))),
    }
}

/// `X♭ = g(X, ·)`.
pub fn flat(g: &MetricField, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let m = g.matrix(p)?;
    Ok((m * nalgebra::DVector::from_column_slice(x)).iter().copied().collect())
}

/// `ω♯ = g^{-1} ω`.
pub fn sharp(g: &MetricField, w: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let m = g.matrix(p)?.try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
    Ok((m * nalgebra::DVector::from_column_slice(w)).iter().copied().collect())
}

/// Invariant squared norm, with every slot contracted through `g` (orthonormal-frame sum over ordered index tuples).
pub fn norm_sq(g: &MetricField, t: &TensorAtPoint, p: &[f64]) -> Result<f64> {
    let m = g.matrix(p)?;
    let ginv = m.clone().try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
    match t.kind {
        TensorKind::Scalar => Ok(t.data[0] * t.data[0]),
        TensorKind::Vector => Ok(norm_sq_1(&m, &t.data)),
        TensorKind::OneForm => Ok(norm_sq_1(&ginv, &t.data)),
        TensorKind::TwoForm | TensorKind::SymTensor => Ok(norm_sq_2(&ginv, &t.matrix())),
        k => Err(Error::Invalid(format!("norm of {k:?} not supported"))),
    }
}

/// Riemannian volume form `±√det g dx¹∧…∧dxⁿ` (orientation from the metric).
pub fn volume_form(g: &MetricField, p: &[f64]) -> Result<TensorAtPoint> {
    let m = g.matrix(p)?;
    let n = m.nrows();
    let s = g.orientation * m.determinant().sqrt();
    let mut data = vec![0.0; n.pow(n as u32)];
    let perms: Vec<(Vec<usize>, f64)> = if n == 2 {
        vec![(vec![0, 1], 1.0), (vec![1, 0], -1.0)]
    } else {
        vec![
            (vec![0, 1, 2], 1.0),
            (vec![1, 2, 0], 1.0),
            (vec![2, 0, 1], 1.0),
            (vec![0, 2, 1], -1.0),
            (vec![2, 1, 0], -1.0),
            (vec![1, 0, 2], -1.0),
        ]
    };
    for (perm, sign) in perms {
        let idx = perm.iter().fold(0, |acc, &i| acc * n + i);
        data[idx] = sign * s;
    }
    Ok(TensorAtPoint { kind: if n == 2 { TensorKind::TwoForm } else { TensorKind::ThreeForm }, dim: n, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DiffMode;

    fn chart3(lo: f64, hi: f64) -> Chart {
        Chart::new(&["x", "y", "z"], &[lo; 3], &[hi; 3]).unwrap()
    }

    fn sol() -> MetricField {
        MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "exp(2*x)", "0", "exp(-2*x)"]).unwrap()
    }

    fn nil() -> MetricField {
        MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "1 + x^2", "x", "1"]).unwrap()
    }

    #[test]
    fn hyperbolic_plane_christoffels() {
        let c = Chart::new(&["x", "y"], &[-1.0, 0.5], &[1.0, 2.0]).unwrap();
        let h = MetricField::from_exprs(c, &["1/y^2", "0", "1/y^2"]).unwrap();
        let g = christoffel(&h, &[0.0, 1.0]).unwrap();
        assert!((g.get(&[0, 0, 1]) + 1.0).abs() < 1e-14);
        assert!((g.get(&[1, 0, 0]) - 1.0).abs() < 1e-14);
        assert!((g.get(&[1, 1, 1]) + 1.0).abs() < 1e-14);
        assert!(g.get(&[0, 0, 0]).abs() < 1e-14);
    }

    #[test]
    fn sol_christoffels_and_ricci() {
        let g = sol();
        let gam = christoffel(&g, &[0.0, 0.0, 0.0]).unwrap();
        let expect = [([0, 1, 1], -1.0), ([0, 2, 2], 1.0), ([1, 0, 1], 1.0), ([2, 0, 2], -1.0)];
        for (idx, v) in expect {
            assert!((gam.get(&idx) - v).abs() < 1e-14, "{idx:?}");
        }
        let nonzero: usize = gam.data.iter().filter(|v| v.abs() > 1e-14).count();
        assert_eq!(nonzero, 6); // the four above plus symmetric partners of Γ^2_12, Γ^3_13
        let c = curvature(&g, &[0.3, -0.2, 0.5]).unwrap();
        let ric = c.ricci.matrix();
        let expect = DMatrix::from_row_slice(3, 3, &[-2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((ric - expect).amax() < 1e-12);
    }

    #[test]
    fn nil_ricci() {
        let c = curvature(&nil(), &[0.0, 0.0, 0.0]).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-0.5, -0.5, 0.5]));
        assert!((c.ricci.matrix() - expect).amax() < 1e-13);
    }

    #[test]
    fn round_sphere_convention() {
        let c = Chart::new(&["th", "ph"], &[0.3, -1.0], &[2.8, 1.0]).unwrap();
        let h = MetricField::from_exprs(c, &["1", "0", "sin(th)^2"]).unwrap();
        let p = [1.1, 0.2];
        let k = curvature(&h, &p).unwrap();
        assert!((k.gauss.unwrap() - 1.0).abs() < 1e-12);
        let diff = k.ricci.matrix() - h.matrix(&p).unwrap();
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn sol_lie_derivative() {
        let g = sol();
        let e = Field::from_exprs(&["x", "y", "z"], &["-2", "0", "-4*z"]).unwrap();
        let p = [0.4, 0.1, -0.3];
        let l = lie_derivative_metric(&g, &e, &p).unwrap().matrix();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            0.0,
            -4.0 * (0.8f64).exp(),
            -4.0 * (-0.8f64).exp(),
        ]));
        assert!((l - expect).amax() < 1e-12);
    }

    #[test]
    fn flat_hessian_and_laplacian() {
        let g = MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "1", "0", "1"]).unwrap();
        let f = Field::from_exprs(&["x", "y", "z"], &["(x^2 + y^2)/2"]).unwrap();
        let p = [0.2, 0.3, 0.4];
        let hs = covariant_hessian(&g, &f, &p).unwrap().matrix();
        assert!((hs - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0]))).amax() < 1e-14);
        assert!((laplacian(&g, &f, &p).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn nil_theta_differential() {
        let c = chart3(-1.0, 1.0);
        let theta = FormField::new(1, Field::from_exprs(&["x", "y", "z"], &["0", "x", "1"]).unwrap()).unwrap();
        let d = exterior_derivative(&theta, &c, &[0.3, 0.2, 0.1]).unwrap();
        assert!((d.get(&[0, 1]) - 1.0).abs() < 1e-14);
        assert!((d.get(&[1, 0]) + 1.0).abs() < 1e-14);
        assert!(d.get(&[0, 2]).abs() < 1e-14);
    }

    #[test]
    fn codifferential_of_exact_form_is_minus_laplacian() {
        let g = MetricField::from_exprs(chart3(-1.0, 1.0), &["1", "0", "0", "1", "0", "1"]).unwrap();
        let df = FormField::new(1, Field::from_exprs(&["x", "y", "z"], &["2*x", "6*y", "0"]).unwrap()).unwrap();
        // f = x^2 + 3 y^2, Δf = 8
        let v = codifferential(&g, &df, &[0.1, 0.2, 0.3]).unwrap();
        assert!((v.data[0] + 8.0).abs() < 1e-13);
    }

    #[test]
    fn fd_mode_matches_analytic_curvature() {
        let g = nil();
        let fd =
            MetricField::from_exprs(chart3(-1.0, 1.0).with_mode(DiffMode::Fd), &["1", "0", "0", "1 + x^2", "x", "1"])
                .unwrap();
        let p = [0.3, -0.4, 0.2];
        let a = curvature(&g, &p).unwrap().ricci.matrix();
        let b = curvature(&fd, &p).unwrap().ricci.matrix();
        assert!((a - b).amax() < 1e-6);
    }

    #[test]
    fn volume_and_norms() {
        let g = nil();
        let p = [0.0, 0.0, 0.0];
        let theta = TensorAtPoint { kind: TensorKind::OneForm, dim: 3, data: vec![0.0, 0.0, 1.0] };
        assert!((norm_sq(&g, &theta, &p).unwrap() - 1.0).abs() < 1e-14);
        let om = TensorAtPoint {
            kind: TensorKind::TwoForm,
            dim: 3,
            data: vec![0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        };
        assert!((norm_sq(&g, &om, &p).unwrap() - 2.0).abs() < 1e-14);
        let vol = volume_form(&g, &[0.5, 0.0, 0.0]).unwrap();
        assert!((vol.get(&[0, 1, 2]) - 1.0).abs() < 1e-14);
        assert!((vol.get(&[1, 0, 2]) + 1.0).abs() < 1e-14);
        let x = flat(&g, &[0.0, 0.0, 1.0], &[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(x, vec![0.0, 0.5, 1.0]);
        let back = sharp(&g, &x, &[0.5, 0.0, 0.0]).unwrap();
        assert!((back[2] - 1.0).abs() < 1e-14 && back[1].abs() < 1e-14);
    }
}
