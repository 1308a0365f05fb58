//! Homogeneous examples realized as circle bundles over Kähler–Einstein
//! bases: reduced (u, f) initial data plus closed-form total-space metrics.

pub mod model;

use std::f64::consts::PI;

use nalgebra::DMatrix;

pub use model::{BundleModel, GroupChart, OracleComparison};

use crate::error::{Error, Result};
use crate::ke_ode::{KEParams, KEState};
use crate::tensor_lab::field::CoordinateMetric;

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    /// Constructor arguments in order, for labels and legends.
    pub args: Vec<(&'static str, f64)>,
    pub ke_params: KEParams,
    pub ke_state0: KEState,
    /// Value of Ψ at t = 0 from the closed expression, when it is real.
    pub implicit_constant: Option<f64>,
    /// Value of the cleared invariant at t = 0 from the closed expression.
    pub invariant_value: Option<f64>,
    pub total_metric: Option<CoordinateMetric>,
    pub bundle: Option<BundleModel>,
    /// Base point where the oracle comparison is sampled.
    pub sample_point: Option<Vec<f64>>,
    /// Base metric stored as printed when it does not feed any check.
    pub recorded_base_metric: Option<CoordinateMetric>,
    pub notes: Vec<String>,
}

impl CatalogEntry {
    pub fn label(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|(_, v)| format!("{v}")).collect();
        format!("{}({})", self.name, args.join(","))
    }

    pub fn arg(&self, key: &str) -> Option<f64> {
        self.args.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Left-invariant metric diag(λ1², λ2², λ2²) on SU(2), fibered over the
/// round sphere by exp(tI). Euler-angle chart (θ, φ, ψ) with
/// g = (λ2²/4)(dθ² + sin²θ dφ²) + λ1²(dψ + ½cos θ dφ)².
pub fn berger(lambda1: f64, lambda2: f64) -> Result<CatalogEntry> {
    positive("lambda1", lambda1)?;
    positive("lambda2", lambda2)?;
    let (l1s, l2s) = (lambda1 * lambda1, lambda2 * lambda2);
    let model = BundleModel::new(
        "berger",
        2,
        GroupChart::Abelian(1),
        move |x| DMatrix::from_row_slice(2, 2, &[l2s / 4.0, 0.0, 0.0, l2s / 4.0 * x[0].sin().powi(2)]),
        move |_| DMatrix::from_element(1, 1, l1s),
        |x| DMatrix::from_row_slice(1, 2, &[0.0, 0.5 * x[0].cos()]),
    );
    let mut notes = Vec::new();
    let implicit_constant = if lambda2 > lambda1 {
        Some((l2s - l1s).sqrt() / (l1s * lambda2))
    } else {
        if lambda1 > lambda2 {
            notes.push("lambda1 > lambda2: Psi is not real, only the cleared invariant is tracked".into());
        }
        None
    };
    Ok(CatalogEntry {
        name: "berger",
        args: vec![("lambda1", lambda1), ("lambda2", lambda2)],
        ke_params: KEParams::new(1, 2.0)?,
        ke_state0: KEState::new(l2s / 2.0, -lambda1.ln())?,
        implicit_constant,
        invariant_value: Some((l2s - l1s) / (l1s * l1s * l2s)),
        total_metric: Some(model.total_metric()),
        bundle: Some(model),
        // away from the chart degeneracies at θ = 0, π
        sample_point: Some(vec![1.0, 0.3]),
        recorded_base_metric: None,
        notes,
    })
}

pub fn sl2r(lambda1: f64, lambda2: f64) -> Result<CatalogEntry> {
    positive("lambda1", lambda1)?;
    positive("lambda2", lambda2)?;
    let (l1s, l2s) = (lambda1 * lambda1, lambda2 * lambda2);
    let printed = CoordinateMetric::new(2, |p| {
        let y = p[1];
        DMatrix::from_row_slice(2, 2, &[1.0 / (4.0 * y.powi(3)), 0.0, 0.0, 1.0 / (y * y)])
    });
    Ok(CatalogEntry {
        name: "sl2r",
        args: vec![("lambda1", lambda1), ("lambda2", lambda2)],
        ke_params: KEParams::new(1, -4.0)?,
        ke_state0: KEState::new(l2s, -lambda1.ln())?,
        implicit_constant: Some((l1s + 4.0 * l2s).sqrt() / (2.0 * l1s * lambda2)),
        invariant_value: Some((l1s + 4.0 * l2s) / (4.0 * l1s * l1s * l2s)),
        total_metric: None,
        bundle: None,
        sample_point: None,
        recorded_base_metric: Some(printed),
        notes: vec![
            "base metric recorded as printed (y^-3 entry disagrees with the induced y^-4 metric); \
             no total-space oracle, the flow is checked through its invariant"
                .into(),
        ],
    })
}

/// c(t) = c/√(1 + (n+2)c²t), the fiber scale of the evolving metric.
pub fn heisenberg_scale(n: u32, c: f64, t: f64) -> f64 {
    c / (1.0 + (n as f64 + 2.0) * c * c * t).sqrt()
}

/// The same scale read off a reduced state: 1/√(u² e^{2f}).
pub fn heisenberg_scale_from_state(s: &KEState) -> f64 {
    1.0 / (s.u * s.u * (2.0 * s.f).exp()).sqrt()
}

/// Coordinates (x_1..x_n, y_1..y_n, z); entries as displayed for the
/// left-invariant metric with Q(Z, Z) = c².
fn heisenberg_display(n: usize, c: f64) -> CoordinateMetric {
    CoordinateMetric::new(2 * n + 1, move |p| {
        let dim = 2 * n + 1;
        let z = 2 * n;
        let c2 = c * c;
        let mut g = DMatrix::identity(dim, dim);
        for i in 0..n {
            for j in 0..n {
                g[(n + i, n + j)] += p[i] * p[j] * c2;
            }
            g[(n + i, z)] = -c2 * p[i];
            g[(z, n + i)] = -c2 * p[i];
        }
        g[(z, z)] = c2;
        g
    })
}

pub fn heisenberg(n: u32, c: f64) -> Result<CatalogEntry> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    positive("c", c)?;
    let nu = n as usize;
    let model = BundleModel::new(
        "heisenberg",
        2 * nu,
        GroupChart::Abelian(1),
        move |_| DMatrix::identity(2 * nu, 2 * nu),
        move |_| DMatrix::from_element(1, 1, c * c),
        move |x| DMatrix::from_fn(1, 2 * nu, |_, b| if b >= nu { -x[b - nu] } else { 0.0 }),
    );
    let sample: Vec<f64> = (0..2 * nu).map(|i| 0.3 - 0.2 * i as f64).collect();
    Ok(CatalogEntry {
        name: "heisenberg",
        args: vec![("n", n as f64), ("c", c)],
        ke_params: KEParams::new(n, 0.0)?,
        ke_state0: KEState::new(1.0, -c.ln())?,
        implicit_constant: None,
        invariant_value: None,
        total_metric: Some(heisenberg_display(nu, c)),
        bundle: Some(model),
        sample_point: Some(sample),
        recorded_base_metric: None,
        notes: Vec::new(),
    })
}

/// Which primitive of the curvature a·ω_Hyp the Sol III connection uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sol3Gauge {
    /// α = a dy/x, the form read off the displayed metric.
    Standard,
    /// α = a y/x² dx, differing from the standard one by d(a y/x).
    Shifted,
}

/// Coordinates (x, y, z), x > 0, as displayed.
fn sol3_display(a: f64, c: f64) -> CoordinateMetric {
    CoordinateMetric::new(3, move |p| {
        let x = p[0];
        DMatrix::from_row_slice(
            3,
            3,
            &[c / (x * x), 0.0, 0.0, 0.0, (c + a * a) / (x * x), a / x, 0.0, a / x, 1.0],
        )
    })
}

pub fn sol3_model(a: f64, c: f64, gauge: Sol3Gauge) -> BundleModel {
    let base = move |x: &[f64]| DMatrix::identity(2, 2) * (c / (x[0] * x[0]));
    let fiber = |_: &[f64]| DMatrix::identity(1, 1);
    match gauge {
        Sol3Gauge::Standard => BundleModel::new("sol3", 2, GroupChart::Abelian(1), base, fiber, move |x| {
            DMatrix::from_row_slice(1, 2, &[0.0, a / x[0]])
        }),
        Sol3Gauge::Shifted => BundleModel::new("sol3", 2, GroupChart::Abelian(1), base, fiber, move |x| {
            DMatrix::from_row_slice(1, 2, &[a * x[1] / (x[0] * x[0]), 0.0])
        }),
    }
}

pub fn sol3(a: f64, c: f64) -> Result<CatalogEntry> {
    if a == 0.0 {
        return Err(Error::domain(
            "a = 0 is the direct product of the hyperbolic plane and a line; use the flat-connection flow",
        ));
    }
    positive("a", a)?;
    positive("c", c)?;
    Ok(CatalogEntry {
        name: "sol3",
        args: vec![("a", a), ("c", c)],
        ke_params: KEParams::new(1, -1.0 / a)?,
        ke_state0: KEState::new(c / a, 0.0)?,
        implicit_constant: Some((1.0 + a * a / c).sqrt()),
        invariant_value: Some(1.0 + a * a / c),
        total_metric: Some(sol3_display(a, c)),
        bundle: Some(sol3_model(a, c, Sol3Gauge::Standard)),
        sample_point: Some(vec![1.3, 0.4]),
        recorded_base_metric: None,
        notes: Vec::new(),
    })
}

/// Product M × SU(2) over a curved plane with a varying fiber metric and a
/// non-abelian connection. Exercises every structure-constant term.
pub fn su2_product(scale: f64) -> BundleModel {
    BundleModel::new(
        "su2-product",
        2,
        GroupChart::Su2 { scale },
        |x| {
            DMatrix::from_row_slice(
                2,
                2,
                &[1.0 + 0.3 * x[0] * x[0], 0.1 * x[0] * x[1], 0.1 * x[0] * x[1], 1.0 + 0.2 * (x[1]).sin().powi(2)],
            )
        },
        |x| {
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    1.5 + 0.2 * x[0],
                    0.1 * x[1],
                    0.05,
                    0.1 * x[1],
                    1.0 + 0.1 * x[0] * x[1],
                    -0.1 * x[0],
                    0.05,
                    -0.1 * x[0],
                    0.8 + 0.1 * x[1] * x[1],
                ],
            )
        },
        |x| DMatrix::from_row_slice(3, 2, &[0.3 * x[1], -0.2 * x[0], 0.1 * x[0] * x[1], 0.25, -0.15 * x[1], 0.2 * x[0]]),
    )
}

/// Bundle with the non-unimodular type III group as fiber.
pub fn type_iii_product() -> BundleModel {
    BundleModel::new(
        "type-iii-product",
        2,
        GroupChart::TypeIII,
        |x| DMatrix::from_row_slice(2, 2, &[1.0 + 0.2 * x[1] * x[1], 0.05 * x[0], 0.05 * x[0], 1.2 + 0.1 * x[0]]),
        |x| {
            DMatrix::from_row_slice(
                3,
                3,
                &[1.0 + 0.1 * x[0], 0.2, 0.0, 0.2, 1.3 + 0.1 * x[1], 0.3 * x[0], 0.0, 0.3 * x[0], 0.9],
            )
        },
        |x| DMatrix::from_row_slice(3, 2, &[0.2 * x[1], 0.1, -0.3 * x[0], 0.15 * x[0] * x[1], 0.1 * x[1], -0.2]),
    )
}

/// Oracle points on the Berger chart keep θ at least this far from 0 and π.
pub const EULER_MARGIN: f64 = 0.1;

pub fn euler_point_ok(theta: f64) -> bool {
    (EULER_MARGIN..=PI - EULER_MARGIN).contains(&theta)
}
