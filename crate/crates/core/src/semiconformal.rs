//! Semi-conformal submersions `φ: (M³, g) → (N², h)`: dilation, unit vertical
//! field, integrability forms, fibre mean curvature, the decomposed Ricci
//! tensor and the identities relating basic data on `M` to data on `N`.
//!
//! Everything is computed from Taylor jets at a single point. With the
//! projection known to third order and `g` to second order, `θ` is known to
//! second order and `Ω = dθ` to first, which is exactly what the Ricci
//! decomposition consumes.

use crate::error::{Error, Result};
use crate::field::{Chart, Field, MetricField};
use crate::jet::Jet;
use crate::tensor_lab::{
    bilinear, contract_first, d0, d1, d2, mat_add, mat_scale, mat_sub, mat_values, mat_vec, norm_sq_1, norm_sq_2,
    outer, vec_values, wedge, zeros, LocalGeometry, Mat,
};
use nalgebra::{DMatrix, DVector};

/// Relative tolerance used to decide that the projection is rank-deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SubmersionSetup {
    pub g: MetricField,
    pub h: MetricField,
    pub projection: Field,
    sign: f64,
}

impl SubmersionSetup {
    /// Fixes the orientation of `U` so that `θ(∂_last) > 0` at the centre of the `M` chart.
    pub fn new(g: MetricField, h: MetricField, projection: Field) -> Result<SubmersionSetup> {
        if g.dim() != 3 || h.dim() != 2 || projection.dim_in != 3 || projection.dim_out != 2 {
            return Err(Error::Invalid("a submersion setup maps a 3-chart onto a 2-chart".into()));
        }
        let mut s = SubmersionSetup { g, h, projection, sign: 1.0 };
        let c = s.g.chart.center();
        let theta = s.jets(&c, 1)?.theta;
        let t3 = theta[2].value();
        let scale = theta.iter().fold(0.0f64, |m, t| m.max(t.value().abs()));
        if t3.abs() <= 1e-12 * scale.max(1.0) {
            return Err(Error::Singular("θ(∂_last) vanishes at the chart centre, orientation ambiguous".into()));
        }
        s.sign = t3.signum();
        Ok(s)
    }

    pub fn chart_m(&self) -> &Chart {
        &self.g.chart
    }

    pub fn chart_n(&self) -> &Chart {
        &self.h.chart
    }

    fn proj_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let c = &self.g.chart;
        c.check_fd_safe(p)?;
        self.projection.expand(p, order, c.mode, c.fd_step)
    }

    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.projection.eval(p)
    }

    /// Returns `(λ², defect)` where `λ²` is the least-squares fit of
    /// `g^{ij}φ^α_iφ^β_j = λ²h^{αβ}` and the defect is the relative residual.
    pub fn semiconformality_defect(&self, p: &[f64]) -> Result<(f64, f64)> {
        let phi = self.proj_jets(p, 1)?;
        let jac: Vec<Vec<f64>> = phi.iter().map(|f| (0..3).map(|i| f.d1(i)).collect()).collect();
        let j = DMatrix::from_fn(2, 3, |a, i| jac[a][i]);
        check_rank(&j, p)?;
        let ginv = self.g.matrix(p)?.try_inverse().ok_or_else(|| Error::Singular("metric".into()))?;
        let y: Vec<f64> = vec_values(&phi);
        let hm = self.h.matrix(&y)?;
        let pm = &j * ginv * j.transpose();
        let hp = hm * pm;
        let lam2 = hp.trace() / 2.0;
        if lam2 <= 0.0 {
            return Err(Error::RankDeficient { point: p.to_vec() });
        }
        let defect = (hp - DMatrix::identity(2, 2) * lam2).norm() / lam2;
        Ok((lam2, defect))
    }

    /// Jets of every structural quantity at `p`, in analytic or finite-difference mode per the chart.
    /// `order` is the order of `θ`; `Ω` and `μ♭` come out one lower.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<FrameJets> {
        let phi = self.proj_jets(p, order + 1)?;
        let gj = self.g.jets(p, order)?;
        crate::field::validate_metric_matrix(&mat_values(&gj), p)?;
        let geo = LocalGeometry::new(gj)?;
        let jac: Mat = phi.iter().map(|f| d0(f, 3)).collect();
        check_rank(&DMatrix::from_fn(2, 3, |a, i| jac[a][i].value()), p)?;
        let y0 = vec_values(&phi);
        let hphi = self.h.compose(&phi)?;
        // P = J g^{-1} J^T, λ² = tr(hP)/2
        let gij_jt: Vec<Vec<Jet>> =
            (0..3).map(|i| (0..2).map(|b| (0..3).map(|k| geo.ginv[i][k] * jac[b][k]).sum()).collect()).collect();
        let pmat: Mat =
            (0..2).map(|a| (0..2).map(|b| (0..3).map(|i| jac[a][i] * gij_jt[i][b]).sum()).collect()).collect();
        let lam2: Jet = (0..2).map(|a| (0..2).map(|b| hphi[a][b] * pmat[b][a]).sum::<Jet>()).sum::<Jet>() * 0.5;
        if lam2.value() <= 0.0 {
            return Err(Error::RankDeficient { point: p.to_vec() });
        }
        let (j1, j2) = (&jac[0], &jac[1]);
        let v = [j1[1] * j2[2] - j1[2] * j2[1], j1[2] * j2[0] - j1[0] * j2[2], j1[0] * j2[1] - j1[1] * j2[0]];
        let vflat = mat_vec(&geo.g, &v);
        let vnorm = v.iter().zip(&vflat).map(|(a, b)| *a * *b).sum::<Jet>().sqrt();
        let u: Vec<Jet> = v.iter().map(|c| *c * self.sign / vnorm).collect();
        let theta = geo.lower(&u);
        let omega = d1(&theta);
        let mu_flat: Vec<Jet> = (0..3).map(|i| -(0..3).map(|j| omega[i][j] * u[j]).sum::<Jet>()).collect();
        let mu = geo.raise(&mu_flat);
        let omega_t = mat_add(&omega, &wedge(&mu_flat, &theta));
        let psi = quarter_norm(&geo.ginv, &omega_t);
        let ln_lam = lam2.ln() * 0.5;
        Ok(FrameJets {
            p: p.to_vec(),
            y0,
            geo,
            phi,
            jac,
            hphi,
            lam2,
            ln_lam,
            u,
            theta,
            omega,
            mu_flat,
            mu,
            omega_t,
            psi,
        })
    }

    /// Point values of the fibration frame.
    pub fn frame(&self, p: &[f64]) -> Result<FibrationFrame> {
        let fj = self.jets(p, 2)?;
        Ok(FibrationFrame {
            lambda: fj.lam2.value().sqrt(),
            u: vec_values(&fj.u),
            theta: vec_values(&fj.theta),
            mu: vec_values(&fj.mu),
            mu_flat: vec_values(&fj.mu_flat),
            omega: mat_values(&fj.omega),
            omega_tilde: mat_values(&fj.omega_t),
            psi: fj.psi.value(),
        })
    }

    /// Geometry of `h` around `φ(p)`, as jets in the offsets `w = y − φ(p)`.
    fn base_geometry(&self, y0: &[f64], order: usize) -> Result<LocalGeometry> {
        LocalGeometry::at(&self.h, y0, order)
    }

    /// Gaussian curvature of `h` at `φ(p)`.
    pub fn base_gauss(&self, y0: &[f64]) -> Result<f64> {
        let hg = self.base_geometry(y0, 2)?;
        Ok(hg.trace(&hg.ricci()).value() / 2.0)
    }

    /// Prop-2.1-style decomposition of `Ric(g)` together with the direct oracle.
    pub fn ricci_decomposed(&self, p: &[f64]) -> Result<RicciDecomposition> {
        let fj = self.jets(p, 2)?;
        let geo = &fj.geo;
        let kn = self.base_gauss(&fj.y0)?;
        let dl = d0(&fj.ln_lam, 3);
        let u_ll: Jet = dot(&fj.u, &dl);
        let mu_ll: Jet = dot(&fj.mu, &dl);
        let lap_ll = geo.laplacian(&fj.ln_lam);
        let s = fj.lam2 * kn + lap_ll + mu_ll;
        let tt = outer(&fj.theta, &fj.theta);
        let lmu = geo.lie_derivative(&fj.mu);
        let a: Vec<Jet> = fj.mu_flat.iter().zip(&fj.theta).map(|(m, t)| *m + u_ll * *t).collect();
        let b: Vec<Jet> = fj.theta.iter().map(|t| u_ll * *t).collect();
        let d_ull = d0(&u_ll, 3);
        let ds_om = geo.codiff2(&fj.omega);

        let mut full = mat_scale(&mat_sub(&geo.g, &tt), s);
        full = mat_sub(&full, &mat_scale(&geo.g, fj.psi));
        full = mat_add(&full, &mat_scale(&lmu, Jet::cst(0.5)));
        full = mat_sub(&full, &outer(&a, &a));
        full = mat_sub(&full, &outer(&b, &b));
        full = mat_add(&full, &mat_add(&outer(&d_ull, &fj.theta), &outer(&fj.theta, &d_ull)));
        full =
            mat_add(&full, &mat_scale(&mat_add(&outer(&ds_om, &fj.theta), &outer(&fj.theta, &ds_om)), Jet::cst(0.5)));

        // blocks
        let uu_ll = dot(&fj.u, &d_ull);
        let vv = uu_ll * 2.0 - u_ll * u_ll * 2.0 - fj.psi + bilinear(&lmu, &fj.u, &fj.u) * 0.5 + dot(&ds_om, &fj.u);
        let lmu_u = contract_first(&lmu, &fj.u);
        let w: Vec<Jet> = (0..3).map(|i| d_ull[i] + ds_om[i] * 0.5 - u_ll * fj.mu_flat[i] + lmu_u[i] * 0.5).collect();
        let wu = dot(&w, &fj.u);
        let hv: Vec<Jet> = (0..3).map(|i| w[i] - wu * fj.theta[i]).collect();
        let inner = mat_sub(
            &mat_add(&mat_scale(&geo.g, s - fj.psi), &mat_scale(&lmu, Jet::cst(0.5))),
            &outer(&fj.mu_flat, &fj.mu_flat),
        );
        let hh = horizontal_part(&inner, &fj.u, &fj.theta);
        let mut re = mat_add(&hh, &mat_add(&outer(&hv, &fj.theta), &outer(&fj.theta, &hv)));
        re = mat_add(&re, &mat_scale(&tt, vv));

        Ok(RicciDecomposition {
            full: mat_values(&full),
            vv: vv.value(),
            hv: vec_values(&hv),
            hh: mat_values(&hh),
            reassembled: mat_values(&re),
            oracle: mat_values(&geo.ricci()),
            ginv: mat_values(&geo.ginv),
        })
    }

    /// Lift of a constant base vector `X̄` to the horizontal distribution, `λ^{-2} g^{-1} Jᵀ h X̄`.
    fn lift(fj: &FrameJets, xbar: &[f64]) -> Vec<Jet> {
        let hx: Vec<Jet> = (0..2).map(|a| (0..2).map(|b| fj.hphi[a][b] * xbar[b]).sum()).collect();
        let jt_hx: Vec<Jet> = (0..3).map(|i| (0..2).map(|a| fj.jac[a][i] * hx[a]).sum()).collect();
        let inv = fj.lam2.recip();
        fj.geo.raise(&jt_hx).into_iter().map(|c| c * inv).collect()
    }

    /// Largest g-norm of `H[U, X_a]` over lifts of the base coordinate fields.
    pub fn bracket_defect(&self, p: &[f64]) -> Result<f64> {
        let fj = self.jets(p, 2)?;
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            let mut xb = [0.0; 2];
            xb[a] = 1.0;
            let x = Self::lift(&fj, &xb);
            let br: Vec<Jet> =
                (0..3).map(|j| (0..3).map(|i| fj.u[i] * x[j].d(i) - x[i] * fj.u[j].d(i)).sum()).collect();
            let bt = dot(&br, &fj.theta);
            let hpart: Vec<f64> = (0..3).map(|j| (br[j] - bt * fj.u[j]).value()).collect();
            worst = worst.max(norm_sq_1(&mat_values(&fj.geo.g), &hpart).sqrt());
        }
        Ok(worst)
    }

    /// `|div U + 2U(ln λ)|`; the horizontal trace of `∇U` equals `−2U(ln λ)`.
    pub fn divergence_defect(&self, p: &[f64]) -> Result<f64> {
        let fj = self.jets(p, 2)?;
        let div = fj.geo.divergence(&fj.u);
        let u_ll = dot(&fj.u, &d0(&fj.ln_lam, 3));
        Ok((div.value() + 2.0 * u_ll.value()).abs())
    }

    /// g-norm of the horizontal part of `L_U g + 2U(ln λ)g`.
    pub fn conformal_foliation_defect(&self, p: &[f64]) -> Result<f64> {
        let fj = self.jets(p, 2)?;
        let u_ll = dot(&fj.u, &d0(&fj.ln_lam, 3));
        let t = mat_add(&fj.geo.lie_derivative(&fj.u), &mat_scale(&fj.geo.g, u_ll * 2.0));
        let th = horizontal_part(&t, &fj.u, &fj.theta);
        Ok(norm_sq_2(&mat_values(&fj.geo.ginv), &mat_values(&th)).sqrt())
    }

    /// Compares `dΩ̃(U, X, Y)` with `dμ♭(X, Y)` on horizontal lifts of the base frame.
    /// The identity always holds; `dμ♭` vanishing on `H` is the test for `Ω̃` being basic.
    pub fn integrability_basic_check(&self, p: &[f64]) -> Result<BasicCheck> {
        let fj = self.jets(p, 2)?;
        let x = vec_values(&Self::lift(&fj, &[1.0, 0.0]));
        let y = vec_values(&Self::lift(&fj, &[0.0, 1.0]));
        let u = vec_values(&fj.u);
        let dom = d2(&fj.omega_t);
        let dmu = d1(&fj.mu_flat);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                rhs += dmu[i][j].value() * x[i] * y[j];
                for k in 0..3 {
                    lhs += dom[i][j][k].value() * u[i] * x[j] * y[k];
                }
            }
        }
        // normalise by the area the lifts span so the number is a g-invariant density
        let gm = mat_values(&fj.geo.g);
        let (xv, yv) = (DVector::from_vec(x), DVector::from_vec(y));
        let area = ((xv.dot(&(&gm * &xv))) * (yv.dot(&(&gm * &yv))) - (xv.dot(&(&gm * &yv))).powi(2)).sqrt();
        Ok(BasicCheck { identity_defect: (lhs - rhs).abs() / area, horizontal_dmu: rhs.abs() / area })
    }

    /// `|U(F)|` at `p`.
    pub fn basicness_defect(&self, f: &Field, p: &[f64]) -> Result<f64> {
        let fj = self.jets(p, 1)?;
        let c = &self.g.chart;
        let fv = f.expand(p, 1, c.mode, c.fd_step)?;
        Ok(dot(&fj.u, &d0(&fv[0], 3)).value().abs())
    }

    /// Local section `s(w)` of `φ` through `p` and the quantities it pulls down to `N`.
    fn descent(&self, fj: &FrameJets) -> Result<Descent> {
        let order = fj.phi.iter().map(Jet::order).min().unwrap_or(0);
        let jv = DMatrix::from_fn(2, 3, |a, i| fj.jac[a][i].value());
        let b = jv.transpose()
            * (&jv * jv.transpose()).try_inverse().ok_or(Error::RankDeficient { point: fj.p.clone() })?;
        let w: Vec<Jet> = (0..2).map(|a| Jet::var(0.0, a, order)).collect();
        let mut c = vec![Jet::cst(0.0).truncate(order); 2];
        for _ in 0..=order {
            let delta: Vec<Jet> = (0..3).map(|i| (0..2).map(|a| c[a] * b[(i, a)]).sum()).collect();
            let img: Vec<Jet> = fj.phi.iter().map(|f| f.compose(&delta) - f.value()).collect();
            c = (0..2).map(|a| c[a] - (img[a] - w[a])).collect();
        }
        let delta: Vec<Jet> = (0..3).map(|i| (0..2).map(|a| c[a] * b[(i, a)]).sum()).collect();
        let dx: Vec<Vec<Jet>> = delta.iter().map(|d| (0..2).map(|a| d.d(a)).collect()).collect();
        Ok(Descent { delta, dx })
    }

    /// Evaluates both sides of the pulled-back Hessian formula for a base function `F̄`.
    pub fn pullback_hessian(&self, fbar: &Field, p: &[f64]) -> Result<HessianComparison> {
        let fj = self.jets(p, 2)?;
        let hn = self.base_geometry(&fj.y0, 1)?;
        let nc = &self.h.chart;
        let fb = fbar.expand(&fj.y0, 2, nc.mode, nc.fd_step)?[0];
        let f_m = fbar.compose(&fj.phi, nc.mode, nc.fd_step)?[0];
        let oracle = fj.geo.hessian(&f_m);
        let ds = self.descent(&fj)?;
        let lam2_bar = fj.lam2.compose(&ds.delta);
        let dll = d0(&(lam2_bar.ln() * 0.5), 2);
        let df = d0(&fb, 2);
        let grad_ll = hn.raise(&dll);
        let cross = dot(&grad_ll, &df);
        let base = mat_sub(
            &mat_add(&hn.hessian(&fb), &mat_add(&outer(&dll, &df), &outer(&df, &dll))),
            &mat_scale(&hn.g, cross),
        );
        let basev = mat_values(&base);
        let jv = DMatrix::from_fn(2, 3, |a, i| fj.jac[a][i].value());
        let mut formula = jv.transpose() * basev * &jv;
        let gradf_m = vec_values(&fj.geo.raise(&d0(&f_m, 3)));
        let om = mat_values(&fj.omega);
        let th = vec_values(&fj.theta);
        let contr: Vec<f64> = (0..3).map(|j| (0..3).map(|i| gradf_m[i] * om[(i, j)]).sum()).collect();
        for i in 0..3 {
            for j in 0..3 {
                formula[(i, j)] += 0.5 * (contr[i] * th[j] + contr[j] * th[i]);
            }
        }
        let oracle = mat_values(&oracle);
        let ginv = mat_values(&fj.geo.ginv);
        let defect = norm_sq_2(&ginv, &(&formula - &oracle)).sqrt();
        Ok(HessianComparison { formula, oracle, defect })
    }

    /// `|Δ^M F + μ(F) − λ²(Δ^N F̄)∘φ|` with `F = F̄∘φ`.
    pub fn laplacian_relation_defect(&self, fbar: &Field, p: &[f64]) -> Result<f64> {
        let fj = self.jets(p, 2)?;
        let hn = self.base_geometry(&fj.y0, 1)?;
        let nc = &self.h.chart;
        let fb = fbar.expand(&fj.y0, 2, nc.mode, nc.fd_step)?[0];
        let f_m = fbar.compose(&fj.phi, nc.mode, nc.fd_step)?[0];
        let lhs = fj.geo.laplacian(&f_m) + dot(&fj.mu, &d0(&f_m, 3));
        let rhs = fj.lam2.value() * hn.laplacian(&fb).value();
        Ok((lhs.value() - rhs).abs())
    }

    /// g-norm of `d*Ω̃ − λ²φ*{d*Ω̄ + Ω̄⌋grad ln(ρ̄λ̄⁻²)} − 2ψθ`, where `Ω̄`, `d ln ρ̄`
    /// and `λ̄` are read off along a local section.
    pub fn dstar_tilde_omega_defect(&self, p: &[f64]) -> Result<f64> {
        let fj = self.jets(p, 2)?;
        let lhs = vec_values(&fj.geo.codiff2(&fj.omega_t));
        let hn = self.base_geometry(&fj.y0, 1)?;
        let ds = self.descent(&fj)?;
        let om_bar = ds.pull_form2(&fj.omega_t);
        let dln_rho = ds.pull_form1(&fj.mu_flat);
        let lam2_bar = fj.lam2.compose(&ds.delta);
        let dll = d0(&(lam2_bar.ln() * 0.5), 2);
        let one: Vec<Jet> = (0..2).map(|a| dln_rho[a] - dll[a] * 2.0).collect();
        let grad = hn.raise(&one);
        let ds_bar = hn.codiff2(&om_bar);
        let contr = contract_first(&om_bar, &grad);
        let bar: Vec<f64> = (0..2).map(|a| (ds_bar[a] + contr[a]).value()).collect();
        let lam2 = fj.lam2.value();
        let psi = fj.psi.value();
        let diff: Vec<f64> = (0..3)
            .map(|i| {
                let pulled: f64 = (0..2).map(|a| fj.jac[a][i].value() * bar[a]).sum();
                lhs[i] - lam2 * pulled - 2.0 * psi * fj.theta[i].value()
            })
            .collect();
        Ok(norm_sq_1(&mat_values(&fj.geo.ginv), &diff).sqrt())
    }

    /// Basic data read off at `p`: `λ̄`, `d ln ρ̄` (from `μ♭`), `Ω̄` and `ψ`.
    pub fn descended(&self, p: &[f64]) -> Result<Descended> {
        let fj = self.jets(p, 2)?;
        let ds = self.descent(&fj)?;
        let om_bar = ds.pull_form2(&fj.omega_t);
        let dln_rho = ds.pull_form1(&fj.mu_flat);
        Ok(Descended {
            y: fj.y0.clone(),
            lambda: fj.lam2.value().sqrt(),
            dln_rho: vec_values(&dln_rho),
            omega_bar: om_bar[0][1].value(),
            psi: fj.psi.value(),
        })
    }
}

fn check_rank(j: &DMatrix<f64>, p: &[f64]) -> Result<()> {
    let sv = j.clone().svd(false, false).singular_values;
    if sv.min() <= RANK_TOL * sv.max().max(1e-300) {
        return Err(Error::RankDeficient { point: p.to_vec() });
    }
    Ok(())
}

pub(crate) fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn quarter_norm(ginv: &Mat, t: &Mat) -> Jet {
    let n = t.len();
    let mut s = Jet::cst(0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += t[i][j] * t[k][l] * ginv[i][k] * ginv[j][l];
                }
            }
        }
    }
    s * 0.25
}

/// `T(X − θ(X)U, Y − θ(Y)U)`.
pub(crate) fn horizontal_part(t: &Mat, u: &[Jet], theta: &[Jet]) -> Mat {
    let n = u.len();
    let q: Mat = (0..n)
        .map(|i| (0..n).map(|a| if i == a { Jet::cst(1.0) - u[i] * theta[a] } else { -(u[i] * theta[a]) }).collect())
        .collect();
    let mut out = zeros(n);
    for a in 0..n {
        for b in 0..n {
            let mut s = Jet::cst(0.0);
            for i in 0..n {
                for j in 0..n {
                    s += q[i][a] * t[i][j] * q[j][b];
                }
            }
            out[a][b] = s;
        }
    }
    out
}

/// Structural jets at a point.
#[derive(Clone, Debug)]
pub struct FrameJets {
    pub p: Vec<f64>,
    pub y0: Vec<f64>,
    pub geo: LocalGeometry,
    pub phi: Vec<Jet>,
    /// `jac[α][i] = ∂_i φ^α`.
    pub jac: Mat,
    /// `h` along `φ`.
    pub hphi: Mat,
    pub lam2: Jet,
    pub ln_lam: Jet,
    pub u: Vec<Jet>,
    pub theta: Vec<Jet>,
    pub omega: Mat,
    pub mu_flat: Vec<Jet>,
    pub mu: Vec<Jet>,
    pub omega_t: Mat,
    pub psi: Jet,
}

struct Descent {
    /// `x(w) − p` along the section.
    delta: Vec<Jet>,
    /// `∂x^i/∂w^α`.
    dx: Vec<Vec<Jet>>,
}

impl Descent {
    fn pull_form1(&self, w: &[Jet]) -> Vec<Jet> {
        let wc: Vec<Jet> = w.iter().map(|c| c.compose(&self.delta)).collect();
        (0..2).map(|a| (0..3).map(|i| wc[i] * self.dx[i][a]).sum()).collect()
    }

    fn pull_form2(&self, om: &Mat) -> Mat {
        let oc: Mat = om.iter().map(|r| r.iter().map(|c| c.compose(&self.delta)).collect()).collect();
        let mut out = zeros(2);
        for a in 0..2 {
            for b in 0..2 {
                let mut s = Jet::cst(0.0);
                for i in 0..3 {
                    for j in 0..3 {
                        s += oc[i][j] * self.dx[i][a] * self.dx[j][b];
                    }
                }
                out[a][b] = s;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct FibrationFrame {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_flat: Vec<f64>,
    pub omega: DMatrix<f64>,
    pub omega_tilde: DMatrix<f64>,
    pub psi: f64,
}

#[derive(Clone, Debug)]
pub struct RicciDecomposition {
    pub full: DMatrix<f64>,
    pub vv: f64,
    pub hv: Vec<f64>,
    pub hh: DMatrix<f64>,
    pub reassembled: DMatrix<f64>,
    pub oracle: DMatrix<f64>,
    ginv: DMatrix<f64>,
}

impl RicciDecomposition {
    /// g-norm of `full − oracle`.
    pub fn oracle_defect(&self) -> f64 {
        norm_sq_2(&self.ginv, &(&self.full - &self.oracle)).sqrt()
    }

    /// g-norm of `full − reassembled blocks`.
    pub fn block_defect(&self) -> f64 {
        norm_sq_2(&self.ginv, &(&self.full - &self.reassembled)).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct HessianComparison {
    pub formula: DMatrix<f64>,
    pub oracle: DMatrix<f64>,
    pub defect: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct BasicCheck {
    pub identity_defect: f64,
    pub horizontal_dmu: f64,
}

#[derive(Clone, Debug)]
pub struct Descended {
    pub y: Vec<f64>,
    pub lambda: f64,
    pub dln_rho: Vec<f64>,
    /// The single component `Ω̄_12`.
    pub omega_bar: f64,
    pub psi: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DiffMode;

    fn flat2(lo: f64, hi: f64) -> MetricField {
        let c = Chart::new(&["y1", "y2"], &[lo; 2], &[hi; 2]).unwrap();
        MetricField::from_exprs(c, &["1", "0", "1"]).unwrap()
    }

    fn nil(mode: DiffMode) -> SubmersionSetup {
        let c = Chart::new(&["y1", "y2", "y3"], &[-1.0; 3], &[1.0; 3]).unwrap().with_mode(mode);
        let g = MetricField::from_exprs(c, &["1", "0", "0", "1 + y1^2", "y1", "1"]).unwrap();
        let phi = Field::from_exprs(&["y1", "y2", "y3"], &["y1", "y2"]).unwrap();
        SubmersionSetup::new(g, flat2(-3.0, 3.0), phi).unwrap()
    }

    fn sol() -> SubmersionSetup {
        let c = Chart::new(&["x1", "x2", "x3"], &[-1.0; 3], &[1.0; 3]).unwrap();
        let g = MetricField::from_exprs(c, &["1", "0", "0", "exp(2*x1)", "0", "exp(-2*x1)"]).unwrap();
        let hc = Chart::new(&["x1", "x2"], &[-3.0; 2], &[3.0; 2]).unwrap();
        let h = MetricField::from_exprs(hc, &["1", "0", "exp(2*x1)"]).unwrap();
        let phi = Field::from_exprs(&["x1", "x2", "x3"], &["x1", "x2"]).unwrap();
        SubmersionSetup::new(g, h, phi).unwrap()
    }

    #[test]
    fn nil_frame() {
        let s = nil(DiffMode::Analytic);
        let (l2, def) = s.semiconformality_defect(&[0.3, 0.1, -0.2]).unwrap();
        assert!((l2 - 1.0).abs() < 1e-12 && def < 1e-10);
        let f = s.frame(&[0.0, 0.0, 0.0]).unwrap();
        assert!((f.psi - 0.5).abs() < 1e-12);
        assert!(f.mu.iter().all(|m| m.abs() < 1e-12));
        assert!((f.theta[2] - 1.0).abs() < 1e-12);
        let f = s.frame(&[0.5, 0.0, 0.0]).unwrap();
        assert!((f.theta[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nil_ricci_matches_oracle() {
        let s = nil(DiffMode::Analytic);
        let r = s.ricci_decomposed(&[0.0, 0.0, 0.0]).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.5, -0.5, 0.5]));
        assert!((&r.full - expect).amax() < 1e-12);
        for p in [[0.4, -0.3, 0.2], [-0.7, 0.6, 0.1]] {
            let r = s.ricci_decomposed(&p).unwrap();
            assert!(r.oracle_defect() < 1e-10, "{}", r.oracle_defect());
            assert!(r.block_defect() < 1e-10);
        }
    }

    #[test]
    fn nil_fd_mode_matches_oracle() {
        let s = nil(DiffMode::Fd);
        let r = s.ricci_decomposed(&[0.4, -0.3, 0.2]).unwrap();
        assert!(r.oracle_defect() < 1e-4, "{}", r.oracle_defect());
    }

    #[test]
    fn sol_frame_and_ricci() {
        let s = sol();
        let f = s.frame(&[0.3, 0.0, 0.0]).unwrap();
        assert!(f.psi.abs() < 1e-12);
        // μ♭ = d ln ρ with ρ = e^{x1}
        assert!((f.mu_flat[0] - 1.0).abs() < 1e-12);
        let r = s.ricci_decomposed(&[0.0, 0.0, 0.0]).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.0, 0.0]));
        assert!((&r.full - expect).amax() < 1e-12);
        assert!(r.block_defect() < 1e-12);
        let rho = Field::from_exprs(&["x1", "x2", "x3"], &["exp(x1)"]).unwrap();
        assert!(s.basicness_defect(&rho, &[0.2, 0.1, 0.3]).unwrap() < 1e-10);
        let x3 = Field::from_exprs(&["x1", "x2", "x3"], &["x3"]).unwrap();
        assert!(s.basicness_defect(&x3, &[0.2, 0.1, 0.3]).unwrap() > 0.1);
    }

    #[test]
    fn lemmas_on_nil_and_sol() {
        for s in [nil(DiffMode::Analytic), sol()] {
            for p in [[0.2, -0.4, 0.3], [-0.5, 0.1, -0.6]] {
                assert!(s.bracket_defect(&p).unwrap() < 1e-10);
                assert!(s.divergence_defect(&p).unwrap() < 1e-10);
                assert!(s.conformal_foliation_defect(&p).unwrap() < 1e-10);
                assert!(s.dstar_tilde_omega_defect(&p).unwrap() < 1e-10, "{}", s.dstar_tilde_omega_defect(&p).unwrap());
                let b = s.integrability_basic_check(&p).unwrap();
                assert!(b.identity_defect < 1e-10 && b.horizontal_dmu < 1e-10);
            }
        }
    }

    #[test]
    fn pullback_hessian_and_laplacian() {
        let s = nil(DiffMode::Analytic);
        let fbar = Field::from_exprs(&["y1", "y2"], &["(y1^2 + y2^2)/2"]).unwrap();
        let c = s.pullback_hessian(&fbar, &[0.3, -0.2, 0.4]).unwrap();
        assert!(c.defect < 1e-10, "{}", c.defect);
        let s = sol();
        let fbar = Field::from_exprs(&["x1", "x2"], &["x1 * sin(x2) + x1^2"]).unwrap();
        let c = s.pullback_hessian(&fbar, &[0.3, -0.2, 0.4]).unwrap();
        assert!(c.defect < 1e-10, "{}", c.defect);
        assert!(s.laplacian_relation_defect(&fbar, &[0.3, -0.2, 0.4]).unwrap() < 1e-10);
    }

    /// `g = φ*h/λ² + θ²` with a curved base, non-basic dilation and a twisted `θ`.
    fn generic(mode: DiffMode) -> SubmersionSetup {
        let c = Chart::new(&["x", "y", "z"], &[-0.8; 3], &[0.8; 3]).unwrap().with_mode(mode);
        let g = MetricField::from_fn(c, |x| {
            let (a, b, z) = (x[0], x[1], x[2]);
            let conf = (a * a + b * b + 1.0).powi(-2) * 4.0;
            let lam = (a * 0.3 + z * 0.2 + a * b * 0.1).exp();
            let s = conf / (lam * lam);
            let th = [b * 0.2, a + z * 0.1, a * a * 0.1 + 1.0];
            Ok((0..3)
                .map(|i| (0..3).map(|j| th[i] * th[j] + if i == j && i < 2 { s } else { Jet::cst(0.0) }).collect())
                .collect())
        })
        .unwrap();
        let hc = Chart::new(&["x", "y"], &[-2.0; 2], &[2.0; 2]).unwrap().with_mode(mode);
        let h = MetricField::from_exprs(hc, &["4/(1 + x^2 + y^2)^2", "0", "4/(1 + x^2 + y^2)^2"]).unwrap();
        let phi = Field::from_exprs(&["x", "y", "z"], &["x", "y"]).unwrap();
        SubmersionSetup::new(g, h, phi).unwrap()
    }

    #[test]
    fn generic_submersion_identities() {
        let s = generic(DiffMode::Analytic);
        for p in [[0.2, -0.4, 0.3], [-0.5, 0.1, -0.6], [0.0, 0.0, 0.0]] {
            let (_, def) = s.semiconformality_defect(&p).unwrap();
            assert!(def < 1e-12);
            let r = s.ricci_decomposed(&p).unwrap();
            assert!(r.oracle_defect() < 1e-9, "{}", r.oracle_defect());
            assert!(r.block_defect() < 1e-9);
            assert!(s.bracket_defect(&p).unwrap() < 1e-10);
            assert!(s.divergence_defect(&p).unwrap() < 1e-10);
            assert!(s.conformal_foliation_defect(&p).unwrap() < 1e-10);
            assert!(s.integrability_basic_check(&p).unwrap().identity_defect < 1e-9);
        }
        let fd = generic(DiffMode::Fd);
        let r = fd.ricci_decomposed(&[0.2, -0.4, 0.3]).unwrap();
        assert!(r.oracle_defect() < 1e-4, "{}", r.oracle_defect());
    }

    #[test]
    fn squeezed_base_is_not_conformal() {
        let c = Chart::new(&["y1", "y2", "y3"], &[-1.0; 3], &[1.0; 3]).unwrap();
        let g = MetricField::from_exprs(c, &["1", "0", "0", "1", "0", "1"]).unwrap();
        let hc = Chart::new(&["y1", "y2"], &[-3.0; 2], &[3.0; 2]).unwrap();
        let h = MetricField::from_exprs(hc, &["1", "0", "4"]).unwrap();
        let phi = Field::from_exprs(&["y1", "y2", "y3"], &["y1", "y2"]).unwrap();
        let s = SubmersionSetup::new(g, h, phi).unwrap();
        assert!(s.semiconformality_defect(&[0.0, 0.0, 0.0]).unwrap().1 > 0.1);
    }

    #[test]
    fn rank_deficient_projection_is_reported() {
        let c = Chart::new(&["y1", "y2", "y3"], &[-1.0; 3], &[1.0; 3]).unwrap();
        let g = MetricField::from_exprs(c, &["1", "0", "0", "1", "0", "1"]).unwrap();
        let phi = Field::from_exprs(&["y1", "y2", "y3"], &["y1", "2*y1"]).unwrap();
        assert!(SubmersionSetup::new(g, flat2(-3.0, 3.0), phi).is_err());
    }
}
