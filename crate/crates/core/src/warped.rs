//! Warped products `g = h/λ(t)² + dt²` over a surface of constant curvature `K`,
//! with flow `E = f(t)∂_t`: the ODE pair, the elimination of `f`, the
//! third-order equation for `λ`, its fixed-step integration, and the elliptic
//! reduction `(λ′)² = 2F(λ)`.

use crate::error::{Error, Result};
use crate::field::{Chart, DiffMode, Field, MetricField};
use crate::jet::Jet;
use crate::soliton_check::SolitonCandidate;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// Fixed integration step.
pub const RK_STEP: f64 = 1e-3;
/// `|λ′|` below this is treated as the singular locus of the third-order equation.
const LAMBDA_PRIME_EPS: f64 = 1e-12;

/// A profile `λ(t)` (and optionally `f(t)`) as one-variable fields.
#[derive(Clone, Debug)]
pub struct WarpedProfile {
    pub lambda: Field,
    pub f: Option<Field>,
    pub kn: f64,
    pub a: f64,
    pub mode: DiffMode,
    pub fd_step: f64,
}

impl WarpedProfile {
    pub fn new(lambda: Field, kn: f64, a: f64) -> Result<Self> {
        if lambda.dim_in != 1 || lambda.dim_out != 1 {
            return Err(Error::Invalid("λ must be a scalar function of t".into()));
        }
        Ok(WarpedProfile { lambda, f: None, kn, a, mode: DiffMode::Analytic, fd_step: crate::field::DEFAULT_FD_STEP })
    }

    /// Profile from expressions in `t`.
    pub fn from_exprs(lambda: &str, f: Option<&str>, kn: f64, a: f64) -> Result<Self> {
        let mut p = WarpedProfile::new(Field::from_exprs(&["t"], &[lambda])?, kn, a)?;
        if let Some(f) = f {
            p.f = Some(Field::from_exprs(&["t"], &[f])?);
        }
        Ok(p)
    }

    pub fn with_f(mut self, f: Field) -> Self {
        self.f = Some(f);
        self
    }

    pub fn with_mode(mut self, mode: DiffMode) -> Self {
        self.mode = mode;
        self
    }

    fn lam(&self, t: f64) -> Result<Jet> {
        let l = self.lambda.expand(&[t], 3, self.mode, self.fd_step)?[0];
        if l.value() <= 0.0 {
            return Err(Error::Invalid(format!("λ({t}) = {} is not positive", l.value())));
        }
        Ok(l)
    }

    /// `(λ, λ′, λ″, λ‴)` at `t`.
    pub fn derivatives(&self, t: f64) -> Result<[f64; 4]> {
        let l = self.lam(t)?;
        Ok([l.value(), l.d1(0), l.partial([2, 0, 0]), l.partial([3, 0, 0])])
    }

    /// The ODE pair `(r1, r2)`; requires `f`.
    pub fn residuals(&self, t: f64) -> Result<(f64, f64)> {
        let f = self.f.as_ref().ok_or_else(|| Error::Invalid("profile has no f".into()))?;
        let fj = f.expand(&[t], 1, self.mode, self.fd_step)?[0];
        Ok(ode_pair(&self.lam(t)?, fj.value(), fj.d1(0), self.kn, self.a))
    }

    /// `f` eliminated from the ODE pair.
    pub fn f_from_lambda(&self, t: f64) -> Result<f64> {
        let [l, l1, l2, _] = self.derivatives(t)?;
        f_formula(l, l1, l2, self.kn, self.a)
    }

    pub fn third_order_residual(&self, t: f64) -> Result<f64> {
        let [l, l1, l2, l3] = self.derivatives(t)?;
        Ok(third_order(l, l1, l2, l3, self.kn, self.a))
    }

    /// `|(ln λ)″ − λ²K|`, which vanishes exactly on constant-curvature solutions.
    pub fn constant_curvature_defect(&self, t: f64) -> Result<f64> {
        let l = self.lam(t)?;
        let ll = l.ln();
        Ok((ll.partial([2, 0, 0]) - l.value().powi(2) * self.kn).abs())
    }
}

/// `r1 = λ²K + (ln λ)″ − 2(ln λ)′² − f(ln λ)′ + A`, `r2 = f′ + 2(ln λ)″ − 2(ln λ)′² + A`.
fn ode_pair(l: &Jet, f: f64, df: f64, kn: f64, a: f64) -> (f64, f64) {
    let ll = l.ln();
    let (d1, d2) = (ll.d1(0), ll.partial([2, 0, 0]));
    let lam = l.value();
    let r1 = lam * lam * kn + d2 - 2.0 * d1 * d1 - f * d1 + a;
    let r2 = df + 2.0 * d2 - 2.0 * d1 * d1 + a;
    (r1, r2)
}

fn f_formula(l: f64, l1: f64, l2: f64, kn: f64, a: f64) -> Result<f64> {
    if l1.abs() < LAMBDA_PRIME_EPS {
        return Err(Error::Singular("λ′ = 0, f is not determined".into()));
    }
    Ok((l2 + a * l + kn * l.powi(3)) / l1 - 3.0 * l1 / l)
}

fn third_order(l: f64, l1: f64, l2: f64, l3: f64, kn: f64, a: f64) -> f64 {
    l3 * l1 * l * l - l * l2 * (l1 * l1 + l * l2)
        + a * l * l * (2.0 * l1 * l1 - l * l2)
        + kn * l.powi(4) * (3.0 * l1 * l1 - l * l2)
        - l1.powi(4)
}

/// `λ‴` solved from the third-order equation.
fn third_derivative(l: f64, l1: f64, l2: f64, kn: f64, a: f64) -> f64 {
    (l * l2 * (l1 * l1 + l * l2) - a * l * l * (2.0 * l1 * l1 - l * l2) - kn * l.powi(4) * (3.0 * l1 * l1 - l * l2)
        + l1.powi(4))
        / (l1 * l * l)
}

/// Left side of the reduced equation for `(λ′)² = 2F(λ)`; `F` is a field in the variable `λ`.
pub fn elliptic_residual(f: &Field, kn: f64, a: f64, lam: f64) -> Result<f64> {
    let fj = f.expand(&[lam], 2, DiffMode::Analytic, crate::field::DEFAULT_FD_STEP)?[0];
    let (ff, f1, f2) = (fj.value(), fj.d1(0), fj.partial([2, 0, 0]));
    let l = lam;
    Ok(2.0 * l * l * ff * f2 - l * f1 * (2.0 * ff + l * f1)
        + a * l * l * (4.0 * ff - l * f1)
        + kn * l.powi(4) * (6.0 * ff - l * f1)
        - 4.0 * ff * ff)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct TrajectoryNode {
    pub t: f64,
    pub lambda: f64,
    pub dlambda: f64,
    pub ddlambda: f64,
    pub f: f64,
    pub third_order: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub kn: f64,
    pub a: f64,
    pub step: f64,
    pub nodes: Vec<TrajectoryNode>,
    /// Why integration stopped before the end of the range, if it did.
    pub truncated: Option<String>,
}

type State = [f64; 3];

fn rhs(s: &State, kn: f64, a: f64) -> State {
    [s[1], s[2], third_derivative(s[0], s[1], s[2], kn, a)]
}

fn rk4(s: &State, h: f64, kn: f64, a: f64) -> State {
    let add = |x: &State, k: &State, c: f64| [x[0] + c * k[0], x[1] + c * k[1], x[2] + c * k[2]];
    let k1 = rhs(s, kn, a);
    let k2 = rhs(&add(s, &k1, h / 2.0), kn, a);
    let k3 = rhs(&add(s, &k2, h / 2.0), kn, a);
    let k4 = rhs(&add(s, &k3, h), kn, a);
    [0, 1, 2].map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn node(t: f64, s: &State, kn: f64, a: f64) -> Result<TrajectoryNode> {
    let l3 = third_derivative(s[0], s[1], s[2], kn, a);
    let lam = Jet::from_partials(3, |e| match e[0] {
        0 => s[0],
        1 => s[1],
        2 => s[2],
        _ => l3,
    });
    // f as a jet so that f′ is exact given λ‴
    let l = lam;
    let l1 = lam.d(0);
    let l2 = l1.d(0);
    let fj = (l2 + l * a + l.powi(3) * kn) / l1 - l1 * 3.0 / l;
    let (r1, r2) = ode_pair(&lam, fj.value(), fj.d1(0), kn, a);
    Ok(TrajectoryNode {
        t,
        lambda: s[0],
        dlambda: s[1],
        ddlambda: s[2],
        f: fj.value(),
        third_order: third_order(s[0], s[1], s[2], l3, kn, a),
        r1,
        r2,
    })
}

fn violation(s: &State) -> Option<String> {
    if !(s[0] > 0.0) {
        Some(format!("λ = {} is not positive", s[0]))
    } else if s[1].abs() < LAMBDA_PRIME_EPS {
        Some("λ′ reached zero".to_string())
    } else if !s.iter().all(|v| v.is_finite()) {
        Some("non-finite state".to_string())
    } else {
        None
    }
}

/// Fixed-step fourth-order Runge–Kutta integration of the third-order equation from
/// `(λ, λ′, λ″)` at `t0` to `t1` (either direction).
pub fn integrate(ics: [f64; 3], t0: f64, t1: f64, kn: f64, a: f64, step: f64) -> Result<Trajectory> {
    if let Some(why) = violation(&ics) {
        return Err(Error::Singular(format!("initial conditions: {why}")));
    }
    if !(step > 0.0) {
        return Err(Error::Invalid("integration step must be positive".into()));
    }
    let n = ((t1 - t0).abs() / step).round().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut s = ics;
    let mut nodes = vec![node(t0, &s, kn, a)?];
    let mut truncated = None;
    for i in 1..=n {
        let next = rk4(&s, h, kn, a);
        if let Some(why) = violation(&next) {
            truncated = Some(format!("{why} near t = {}", t0 + h * i as f64));
            break;
        }
        s = next;
        nodes.push(node(t0 + h * i as f64, &s, kn, a)?);
    }
    Ok(Trajectory { kn, a, step: h.abs(), nodes, truncated })
}

impl Trajectory {
    pub fn max_third_order(&self) -> f64 {
        self.nodes.iter().fold(0.0f64, |m, n| m.max(n.third_order.abs()))
    }

    pub fn max_pair(&self) -> f64 {
        self.nodes.iter().fold(0.0f64, |m, n| m.max(n.r1.abs()).max(n.r2.abs()))
    }

    /// `λ` near `t` as a third-order jet: one Runge–Kutta step from the nearest node.
    pub fn lambda_jet(&self, t: f64) -> Result<Jet> {
        let first = self.nodes.first().ok_or_else(|| Error::Invalid("empty trajectory".into()))?;
        let last = self.nodes.last().expect("non-empty");
        let (lo, hi) = if first.t <= last.t { (first.t, last.t) } else { (last.t, first.t) };
        if t < lo - self.step || t > hi + self.step {
            return Err(Error::Domain { point: vec![t] });
        }
        let i = (((t - first.t) / (last.t - first.t).max(f64::MIN_POSITIVE) * (self.nodes.len() - 1) as f64).round()
            as usize)
            .min(self.nodes.len() - 1);
        let nd = &self.nodes[i];
        let s = if t == nd.t {
            [nd.lambda, nd.dlambda, nd.ddlambda]
        } else {
            rk4(&[nd.lambda, nd.dlambda, nd.ddlambda], t - nd.t, self.kn, self.a)
        };
        let l3 = third_derivative(s[0], s[1], s[2], self.kn, self.a);
        Ok(Jet::from_partials(3, |e| match e[0] {
            0 => s[0],
            1 => s[1],
            2 => s[2],
            _ => l3,
        }))
    }

    /// The trajectory as a profile whose `λ` is evaluated by [`Trajectory::lambda_jet`].
    pub fn as_profile(self: &Arc<Self>) -> Result<WarpedProfile> {
        let me = Arc::clone(self);
        let lam = Field::from_local_fn(1, 1, move |p, order| Ok(vec![me.lambda_jet(p[0])?.truncate(order)]))
            .with_label("integrated λ");
        WarpedProfile::new(lam, self.kn, self.a)
    }

    /// CSV with columns `t, lambda, dlambda, ddlambda, f, third_order, r1, r2`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for n in &self.nodes {
            w.serialize(n).map_err(|e| Error::Invalid(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The soliton candidate `g = h/λ(t)² + dt²`, `E = f(t)∂_t` on `chart_n × [t0, t1]`,
/// with `f` from the profile if present and from the elimination formula otherwise.
pub fn warped_candidate(profile: &WarpedProfile, h: &MetricField, t_range: (f64, f64)) -> Result<SolitonCandidate> {
    let hc = &h.chart;
    let names = hc.names();
    let chart =
        Chart::new(&[names[0], names[1], "t"], &[hc.lo[0], hc.lo[1], t_range.0], &[hc.hi[0], hc.hi[1], t_range.1])?
            .with_mode(hc.mode)
            .with_fd_step(hc.fd_step)?;
    let (lam, hcomp) = (profile.lambda.clone(), h.components().clone());
    let (mode, step) = (profile.mode, profile.fd_step);
    let g = MetricField::new(
        chart,
        Field::from_jet_fn(3, 9, move |x| {
            let l = lam.compose(&x[2..3], mode, step)?[0];
            let hv = hcomp.compose(&x[0..2], mode, step)?;
            let inv2 = (l * l).recip();
            let mut out = vec![Jet::cst(0.0); 9];
            for i in 0..2 {
                for j in 0..2 {
                    out[i * 3 + j] = hv[i * 2 + j] * inv2;
                }
            }
            out[8] = Jet::cst(1.0);
            Ok(out)
        }),
    )?;
    let f = match &profile.f {
        Some(f) => {
            let f = f.clone();
            Field::from_jet_fn(3, 3, move |x| {
                let v = f.compose(&x[2..3], mode, step)?[0];
                Ok(vec![Jet::cst(0.0), Jet::cst(0.0), v])
            })
        }
        None => {
            let (lam, kn, a) = (profile.lambda.clone(), profile.kn, profile.a);
            Field::from_jet_fn(3, 3, move |x| {
                // f needs λ″, so expand λ to third order in t before composing with the argument
                let t = x[2].value();
                let l = lam.expand(&[t], 3, mode, step)?[0];
                let l1 = l.d(0);
                let l2 = l1.d(0);
                let f = (l2 + l * a + l.powi(3) * kn) / l1 - l1 * 3.0 / l;
                Ok(vec![Jet::cst(0.0), Jet::cst(0.0), f.compose(&[x[2] - t])])
            })
        }
    };
    SolitonCandidate::new(g, f, profile.a)
}
