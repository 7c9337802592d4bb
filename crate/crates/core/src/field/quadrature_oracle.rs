//! Test-only quadrature rules used as independent oracles.

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Integrates `f` over the triangle (a, b, c) with a collapsed (Duffy)
/// Gauss–Legendre product rule on `levels` of uniform 4-way subdivision.
pub fn triangle_quadrature<F>(a: [f64; 3], b: [f64; 3], c: [f64; 3], order: usize, levels: u32, f: &F) -> [f64; 3]
where
    F: Fn([f64; 3]) -> [f64; 3],
{
    if levels > 0 {
        let mid = |p: [f64; 3], q: [f64; 3]| [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0];
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        let mut acc = [0.0; 3];
        for (p, q, r) in [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)] {
            let v = triangle_quadrature(p, q, r, order, levels - 1, f);
            for k in 0..3 {
                acc[k] += v[k];
            }
        }
        return acc;
    }
    let (x, w) = gauss_legendre(order);
    let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cr = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    let jac = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
    let mut acc = [0.0; 3];
    for i in 0..order {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..order {
            let v = 0.5 * (x[j] + 1.0);
            // (u, v) in the unit square -> (s, t) in the reference triangle.
            let s = u * (1.0 - v);
            let t = u * v;
            let p = [
                a[0] + s * e1[0] + t * e2[0],
                a[1] + s * e1[1] + t * e2[1],
                a[2] + s * e1[2] + t * e2[2],
            ];
            let wt = 0.25 * w[i] * w[j] * u * jac;
            let val = f(p);
            for k in 0..3 {
                acc[k] += wt * val[k];
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
        let area = triangle_quadrature([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], 6, 1, &|_| [1.0, 0.0, 0.0]);
        assert!((area[0] - 1.0).abs() < 1e-14);
    }
}
