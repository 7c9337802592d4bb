//! Observable vectors: pointwise flux density and bore-circle Fourier
//! coefficients of the radial field.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldPoint, Region};
use crate::geometry::HalbachArray;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
            Component::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        ["Bx", "By", "Bz"][self.index()]
    }
}

/// Which trigonometric function `B_k` multiplies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourierConvention {
    /// `B_k` ↔ cos(kθ), `A_k` ↔ sin(kθ).
    #[default]
    CosB,
    /// `B_k` ↔ sin(kθ), `A_k` ↔ cos(kθ).
    SinB,
}

/// What was measured and where.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObservableSpec {
    /// Flux density components at discrete points, laid out component-major:
    /// all points' first component, then all points' second component, ...
    PointField {
        points: Vec<FieldPoint>,
        components: Vec<Component>,
    },
    /// Fourier coefficients `(A_1..A_K, B_1..B_K)` of `B_r` on a centred circle,
    /// one block per axial position.
    FourierCircle {
        r0: f64,
        harmonics: usize,
        n_theta: usize,
        z_positions: Vec<f64>,
        #[serde(default)]
        convention: FourierConvention,
    },
}

impl ObservableSpec {
    /// Equally spaced points on circles of radius `r0` at each `z`.
    pub fn circle_points(r0: f64, n_theta: usize, z_positions: &[f64], components: Vec<Component>) -> Self {
        let mut points = Vec::with_capacity(n_theta * z_positions.len());
        for &z in z_positions {
            for m in 0..n_theta {
                let t = 2.0 * PI * m as f64 / n_theta as f64;
                points.push(FieldPoint::air(r0 * t.cos(), r0 * t.sin(), z));
            }
        }
        ObservableSpec::PointField { points, components }
    }

    pub fn fourier(r0: f64, harmonics: usize, n_theta: usize, z_positions: Vec<f64>) -> Self {
        ObservableSpec::FourierCircle {
            r0,
            harmonics,
            n_theta,
            z_positions,
            convention: FourierConvention::CosB,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ObservableSpec::PointField { points, components } => points.len() * components.len(),
            ObservableSpec::FourierCircle {
                harmonics,
                z_positions,
                ..
            } => 2 * harmonics * z_positions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the spec only needs transverse fields in one cross-section.
    pub fn is_2d_compatible(&self) -> bool {
        match self {
            ObservableSpec::PointField { components, .. } => !components.contains(&Component::Z),
            ObservableSpec::FourierCircle { z_positions, .. } => z_positions.len() == 1,
        }
    }

    /// Checks the structural invariants and, when an array is given, that all
    /// evaluation points are in the air region.
    pub fn validate(&self, array: Option<&HalbachArray>) -> Result<()> {
        match self {
            ObservableSpec::PointField { points, components } => {
                if components.is_empty() {
                    return Err(Error::Observable("no field components selected".into()));
                }
                for (k, p) in points.iter().enumerate() {
                    if p.region != Region::Air {
                        return Err(Error::Observable(format!("point {k} is tagged {}", p.region)));
                    }
                    if p.position.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Observable(format!("point {k} is not finite")));
                    }
                    if let Some(a) = array {
                        if a.in_magnet(p.xy(), 0.0) && p.position[2].abs() < a.half_length() {
                            return Err(p.region_error(format!("observation point {k} lies inside a magnet block")));
                        }
                    }
                }
                Ok(())
            }
            ObservableSpec::FourierCircle {
                r0,
                harmonics,
                n_theta,
                z_positions,
                ..
            } => {
                if *harmonics == 0 {
                    return Err(Error::Observable("at least one harmonic is required".into()));
                }
                if *n_theta <= 2 * harmonics {
                    return Err(Error::Observable(format!(
                        "n_theta = {n_theta} must exceed 2K = {}",
                        2 * harmonics
                    )));
                }
                if !(*r0 > 0.0) {
                    return Err(Error::Observable("r0 must be positive".into()));
                }
                if z_positions.is_empty() || z_positions.iter().any(|z| !z.is_finite()) {
                    return Err(Error::Observable("z positions must be finite and non-empty".into()));
                }
                if let Some(a) = array {
                    // The circle's chords stay inside the bore polygon only if r0 < r_i cos(π/16).
                    if *r0 >= a.inner_radius {
                        return Err(Error::Observable(format!(
                            "r0 = {r0} must lie inside the bore (r_i = {})",
                            a.inner_radius
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// One label per observable row.
    pub fn row_labels(&self) -> Vec<String> {
        match self {
            ObservableSpec::PointField { points, components } => components
                .iter()
                .flat_map(|c| (0..points.len()).map(move |k| format!("{}[{k}]", c.name())))
                .collect(),
            ObservableSpec::FourierCircle {
                harmonics,
                z_positions,
                ..
            } => z_positions
                .iter()
                .enumerate()
                .flat_map(|(iz, _)| {
                    let a = (1..=*harmonics).map(move |k| format!("A{k}[z{iz}]"));
                    let b = (1..=*harmonics).map(move |k| format!("B{k}[z{iz}]"));
                    a.chain(b)
                })
                .collect(),
        }
    }

    /// Per-row `(kind, z, index)` triples used in observation files.
    pub fn row_keys(&self) -> Vec<(String, f64, usize)> {
        match self {
            ObservableSpec::PointField { points, components } => components
                .iter()
                .flat_map(|c| {
                    points
                        .iter()
                        .enumerate()
                        .map(move |(k, p)| (c.name().to_string(), p.position[2], k))
                })
                .collect(),
            ObservableSpec::FourierCircle {
                harmonics,
                z_positions,
                ..
            } => z_positions
                .iter()
                .flat_map(|&z| {
                    let a = (1..=*harmonics).map(move |k| ("A".to_string(), z, k));
                    let b = (1..=*harmonics).map(move |k| ("B".to_string(), z, k));
                    a.chain(b)
                })
                .collect(),
        }
    }
}

/// Anything that can report the flux density at a point.
pub trait FieldEvaluator {
    fn flux_density(&self, point: &FieldPoint) -> Result<Vector3<f64>>;
}

impl<F> FieldEvaluator for F
where
    F: Fn(&FieldPoint) -> Result<Vector3<f64>>,
{
    fn flux_density(&self, point: &FieldPoint) -> Result<Vector3<f64>> {
        self(point)
    }
}

/// Point-field observable vector, component-major.
pub fn sample_point_field<E: FieldEvaluator + ?Sized>(
    evaluator: &E,
    points: &[FieldPoint],
    components: &[Component],
) -> Result<DVector<f64>> {
    let fields = points
        .iter()
        .map(|p| evaluator.flux_density(p))
        .collect::<Result<Vec<_>>>()?;
    let n = points.len();
    let mut q = DVector::zeros(n * components.len());
    for (ci, c) in components.iter().enumerate() {
        for (k, b) in fields.iter().enumerate() {
            q[ci * n + k] = b[c.index()];
        }
    }
    Ok(q)
}

/// Radial flux density at `θ_m = 2πm/n_theta` on the circle of radius `r0` at `z`.
pub fn sample_br_on_circle<E: FieldEvaluator + ?Sized>(evaluator: &E, r0: f64, n_theta: usize, z: f64) -> Result<Vec<f64>> {
    (0..n_theta)
        .map(|m| {
            let t = 2.0 * PI * m as f64 / n_theta as f64;
            let (s, c) = t.sin_cos();
            let b = evaluator.flux_density(&FieldPoint::air(r0 * c, r0 * s, z))?;
            Ok(b.x * c + b.y * s)
        })
        .collect()
}

/// Discrete Fourier coefficients `(A_1..A_K, B_1..B_K)` of equally spaced samples.
pub fn fourier_coefficients(samples: &[f64], harmonics: usize, convention: FourierConvention) -> Result<Vec<f64>> {
    let n = samples.len();
    if harmonics == 0 || n <= 2 * harmonics {
        return Err(Error::Observable(format!(
            "{harmonics} harmonics need more than {} samples, got {n}",
            2 * harmonics
        )));
    }
    let mut out = vec![0.0; 2 * harmonics];
    let scale = 2.0 / n as f64;
    for k in 1..=harmonics {
        let (mut sin_sum, mut cos_sum) = (0.0, 0.0);
        for (m, s) in samples.iter().enumerate() {
            // Reduce k·m modulo n before the angle to keep the phase exact.
            let t = 2.0 * PI * ((k * m) % n) as f64 / n as f64;
            let (sn, cs) = t.sin_cos();
            sin_sum += s * sn;
            cos_sum += s * cs;
        }
        let (a, b) = match convention {
            FourierConvention::CosB => (sin_sum, cos_sum),
            FourierConvention::SinB => (cos_sum, sin_sum),
        };
        out[k - 1] = scale * a;
        out[harmonics + k - 1] = scale * b;
    }
    Ok(out)
}

/// Fourier observable vector, concatenated over the spec's z positions.
pub fn observe_fourier<E: FieldEvaluator + ?Sized>(
    evaluator: &E,
    r0: f64,
    harmonics: usize,
    n_theta: usize,
    z_positions: &[f64],
    convention: FourierConvention,
) -> Result<DVector<f64>> {
    let mut q = Vec::with_capacity(2 * harmonics * z_positions.len());
    for &z in z_positions {
        let s = sample_br_on_circle(evaluator, r0, n_theta, z)?;
        q.extend(fourier_coefficients(&s, harmonics, convention)?);
    }
    Ok(DVector::from_vec(q))
}

/// Observable vector for any spec.
pub fn observe<E: FieldEvaluator + ?Sized>(evaluator: &E, spec: &ObservableSpec) -> Result<DVector<f64>> {
    match spec {
        ObservableSpec::PointField { points, components } => sample_point_field(evaluator, points, components),
        ObservableSpec::FourierCircle {
            r0,
            harmonics,
            n_theta,
            z_positions,
            convention,
        } => observe_fourier(evaluator, *r0, *harmonics, *n_theta, z_positions, *convention),
    }
}

/// Observed values with a diagonal noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
    pub spec: ObservableSpec,
    /// Per-entry noise standard deviation σ (T); Σ = diag(σ²).
    pub sigma: Vec<f64>,
}

impl Observation {
    pub fn new(values: Vec<f64>, spec: ObservableSpec, sigma: Vec<f64>) -> Result<Self> {
        let n = spec.len();
        if values.len() != n {
            return Err(Error::Dimension {
                context: "observation values",
                expected: n,
                got: values.len(),
            });
        }
        if sigma.len() != n {
            return Err(Error::Dimension {
                context: "observation sigma",
                expected: n,
                got: sigma.len(),
            });
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Observable("noise standard deviations must be positive".into()));
        }
        Ok(Observation { values, spec, sigma })
    }

    pub fn values_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn sigma_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::field_2d_block;
    use crate::geometry::{build_default_array, GeometryConfig};
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn uniform(b: Vector3<f64>) -> impl Fn(&FieldPoint) -> Result<Vector3<f64>> {
        move |_| Ok(b)
    }

    #[test]
    fn zero_field_gives_zero_observables() {
        let spec = ObservableSpec::circle_points(0.075, 12, &[0.0], vec![Component::X, Component::Y]);
        let q = observe(&uniform(Vector3::zeros()), &spec).unwrap();
        assert_eq!(q.len(), 24);
        assert!(q.iter().all(|v| *v == 0.0));
        let f = fourier_coefficients(&vec![0.0; 60], 8, FourierConvention::CosB).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn point_field_passes_through_block_field() {
        let array = build_default_array(&GeometryConfig::default()).unwrap();
        let block = array.blocks[3].clone();
        let m = Vector2::new(3e5, 1e5);
        let eval = |p: &FieldPoint| field_2d_block(&block, m, p).map(|b| Vector3::new(b.x, b.y, 0.0));
        let pt = FieldPoint::air(0.03, -0.02, 0.0);
        let q = sample_point_field(&eval, &[pt], &[Component::X, Component::Y]).unwrap();
        let direct = field_2d_block(&array.blocks[3], m, &pt).unwrap();
        assert_eq!(q[0], direct.x);
        assert_eq!(q[1], direct.y);
    }

    #[test]
    fn permuting_points_permutes_output() {
        let eval = |p: &FieldPoint| Ok(Vector3::new(p.position[0] * 2.0, p.position[1] - 1.0, p.position[0] * p.position[1]));
        let pts = vec![
            FieldPoint::air(0.01, 0.02, 0.0),
            FieldPoint::air(-0.03, 0.04, 0.0),
            FieldPoint::air(0.05, -0.06, 0.0),
        ];
        let comps = [Component::X, Component::Y, Component::Z];
        let q = sample_point_field(&eval, &pts, &comps).unwrap();
        let perm = [2, 0, 1];
        let pts2: Vec<_> = perm.iter().map(|&k| pts[k]).collect();
        let q2 = sample_point_field(&eval, &pts2, &comps).unwrap();
        for c in 0..3 {
            for (k, &src) in perm.iter().enumerate() {
                assert_eq!(q2[c * 3 + k], q[c * 3 + src]);
            }
        }
    }

    #[test]
    fn uniform_field_projects_on_circle() {
        let b0 = 0.4;
        let n = 60;
        let sx = sample_br_on_circle(&uniform(Vector3::new(b0, 0.0, 0.0)), 0.075, n, 0.0).unwrap();
        let sy = sample_br_on_circle(&uniform(Vector3::new(0.0, b0, 0.0)), 0.075, n, 0.0).unwrap();
        for m in 0..n {
            let t = 2.0 * PI * m as f64 / n as f64;
            assert!((sx[m] - b0 * t.cos()).abs() < 1e-15);
            assert!((sy[m] - b0 * t.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn cosine_lands_in_b1() {
        let n = 60;
        let s: Vec<f64> = (0..n).map(|m| (2.0 * PI * m as f64 / n as f64).cos()).collect();
        let f = fourier_coefficients(&s, 8, FourierConvention::CosB).unwrap();
        for (k, v) in f.iter().enumerate() {
            let expected = if k == 8 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "coefficient {k} = {v}");
        }
        let g = fourier_coefficients(&s, 8, FourierConvention::SinB).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_harmonics_rejected() {
        assert!(fourier_coefficients(&vec![1.0; 16], 8, FourierConvention::CosB).is_err());
        let spec = ObservableSpec::fourier(0.075, 8, 16, vec![0.0]);
        assert!(spec.validate(None).is_err());
        assert!(ObservableSpec::fourier(0.075, 8, 17, vec![0.0]).validate(None).is_ok());
    }

    #[test]
    fn trigonometric_polynomials_recovered() {
        // Oracle: construct samples from known coefficients, then recover them.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: Vec<f64> = (0..60)
                .map(|m| {
                    let t = 2.0 * PI * m as f64 / 60.0;
                    (1..=8)
                        .map(|k| a[k - 1] * (k as f64 * t).sin() + b[k - 1] * (k as f64 * t).cos())
                        .sum()
                })
                .collect();
            let f = fourier_coefficients(&s, 8, FourierConvention::CosB).unwrap();
            for k in 0..8 {
                assert!((f[k] - a[k]).abs() < 1e-12);
                assert!((f[8 + k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
            let f = fourier_coefficients(&s, 8, FourierConvention::CosB).unwrap();
            let lhs: f64 = f.iter().map(|v| v * v).sum();
            let rhs: f64 = 2.0 / 60.0 * s.iter().map(|v| v * v).sum::<f64>();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn dipole_has_only_first_harmonic() {
        let spec = ObservableSpec::fourier(0.075, 8, 60, vec![0.0, 0.3]);
        let q = observe(&uniform(Vector3::new(-0.47, 0.05, 0.0)), &spec).unwrap();
        assert_eq!(q.len(), 32);
        for block in q.as_slice().chunks(16) {
            let b1 = block[8].abs();
            for (k, v) in block.iter().enumerate() {
                if k != 0 && k != 8 {
                    assert!(v.abs() < 1e-12 * b1);
                }
            }
        }
        let long = ObservableSpec::fourier(0.075, 8, 60, vec![0.0; 156]);
        assert_eq!(long.len(), 2496);
    }

    #[test]
    fn linear_in_the_field() {
        let spec = ObservableSpec::fourier(0.075, 8, 60, vec![0.0]);
        let f = |p: &FieldPoint| Ok(Vector3::new(p.position[0] * 3.0, p.position[1].powi(2), 0.0));
        let g = |p: &FieldPoint| Ok(Vector3::new(p.position[1], -p.position[0] * p.position[1], 0.0));
        let (alpha, beta) = (1.7, -0.4);
        let h = |p: &FieldPoint| Ok(f(p)? * alpha + g(p)? * beta);
        let qf = observe(&f, &spec).unwrap();
        let qg = observe(&g, &spec).unwrap();
        let qh = observe(&h, &spec).unwrap();
        assert!((qh - (qf * alpha + qg * beta)).amax() < 1e-12);
    }

    #[test]
    fn observation_invariants() {
        let spec = ObservableSpec::fourier(0.075, 2, 8, vec![0.0]);
        assert!(Observation::new(vec![0.0; 4], spec.clone(), vec![1e-6; 4]).is_ok());
        assert!(Observation::new(vec![0.0; 3], spec.clone(), vec![1e-6; 4]).is_err());
        assert!(Observation::new(vec![0.0; 4], spec, vec![0.0; 4]).is_err());
    }

    #[test]
    fn bore_points_validate_against_array() {
        let array = build_default_array(&GeometryConfig::default()).unwrap();
        let good = ObservableSpec::circle_points(0.075, 60, &[0.0], vec![Component::X, Component::Y]);
        assert!(good.validate(Some(&array)).is_ok());
        let bad = ObservableSpec::circle_points(0.15, 60, &[0.0], vec![Component::X]);
        assert!(bad.validate(Some(&array)).is_err());
        assert!(ObservableSpec::fourier(0.12, 8, 60, vec![0.0]).validate(Some(&array)).is_err());
    }
}
