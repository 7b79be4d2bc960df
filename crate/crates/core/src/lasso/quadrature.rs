//! Gauss–Legendre rules and composite integration on finite intervals.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on [-1, 1], exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Splits `[a, b]` into `panels` equal pieces and applies the rule on each.
    pub fn composite(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(&f, lo, lo + h)
            })
            .sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_small_rules() {
        let r = GaussLegendre::new(2);
        let expected = 1.0 / 3.0_f64.sqrt();
        assert_relative_eq!(r.nodes[1], expected, epsilon = 1e-15);
        assert_relative_eq!(r.weights[0], 1.0, epsilon = 1e-15);

        let r = GaussLegendre::new(3);
        assert_relative_eq!(r.nodes[2], 0.6_f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(r.nodes[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r.weights[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let r = GaussLegendre::new(20);
        let total: f64 = r.weights.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-13);
        // int_0^2 x^39 dx = 2^40 / 40
        let value = r.integrate(|x| x.powi(39), 0.0, 2.0);
        assert_relative_eq!(value, 2f64.powi(40) / 40.0, max_relative = 1e-12);
    }

    #[test]
    fn composite_handles_oscillation() {
        let r = GaussLegendre::new(10);
        let value = r.composite(|x| (10.0 * x).sin(), 0.0, PI, 20);
        assert_relative_eq!(value, (1.0 - (10.0 * PI).cos()) / 10.0, epsilon = 1e-12);
    }
}
