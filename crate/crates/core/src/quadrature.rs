//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `[a, b]` with the given rule.
pub fn integrate(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        // degree 15 is exact for 8 points
        let v = integrate(&rule, -1.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4));
        let exact = (2f64.powi(16) - 1.0) / 16.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs());
        assert!((rule.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrand() {
        let rule = gauss_legendre(20);
        let v = integrate(&rule, 0.0, PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
