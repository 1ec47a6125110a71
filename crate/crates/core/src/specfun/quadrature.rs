//! Product quadrature on the unit sphere: Gauss-Legendre in cos(theta)
//! crossed with a uniform rule in phi.

/// Quadrature rule on the unit sphere. Weights sum to 4 pi and the rule is
/// exact for spherical harmonics up to the declared degree.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    /// (theta, phi) node angles.
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cartesian unit vector of node `i`.
    pub fn unit_vector(&self, i: usize) -> [f64; 3] {
        let (theta, phi) = self.nodes[i];
        [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ]
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Product rule exact for harmonics up to `exactness_degree`.
pub fn sphere_quadrature(exactness_degree: usize) -> SphereQuadrature {
    let p = exactness_degree.max(1);
    let n_theta = p / 2 + 1;
    let n_phi = p + 1;
    let (xs, ws) = gauss_legendre(n_theta);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (x, w) in xs.iter().zip(&ws) {
        let theta = x.acos();
        for j in 0..n_phi {
            nodes.push((theta, j as f64 * dphi));
            weights.push(w * dphi);
        }
    }
    SphereQuadrature {
        nodes,
        weights,
        exactness: p,
    }
}
