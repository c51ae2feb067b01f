//! Gauss–Legendre rules and one-dimensional Lagrange bases on `[0, 1]`.

/// Three-point Gauss rule on `[0, 1]` (exact for degree 5).
pub const GAUSS3_POINTS: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7,
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
pub const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Two-point Gauss rule on `[0, 1]` (exact for degree 3).
pub const GAUSS2_POINTS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9,
    0.5 + 0.288_675_134_594_812_9,
];
pub const GAUSS2_WEIGHTS: [f64; 2] = [0.5, 0.5];

/// Tensor-product 3×3 Gauss points on the unit square with weights.
pub fn gauss3x3() -> impl Iterator<Item = ([f64; 2], f64)> {
    (0..9).map(|q| {
        let (i, j) = (q % 3, q / 3);
        (
            [GAUSS3_POINTS[i], GAUSS3_POINTS[j]],
            GAUSS3_WEIGHTS[i] * GAUSS3_WEIGHTS[j],
        )
    })
}

/// Quadratic Lagrange basis on nodes `0, ½, 1`: values, first and second derivatives.
#[inline]
pub fn lagrange2(t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    (
        [
            2.0 * (t - 0.5) * (t - 1.0),
            -4.0 * t * (t - 1.0),
            2.0 * t * (t - 0.5),
        ],
        [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
        [4.0, -8.0, 4.0],
    )
}

/// Lagrange basis of degree `nodes.len() - 1`: values and first derivatives.
pub fn lagrange_general(nodes: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut val = vec![0.0; n];
    let mut der = vec![0.0; n];
    for i in 0..n {
        let mut denom = 1.0;
        for j in 0..n {
            if j != i {
                denom *= nodes[i] - nodes[j];
            }
        }
        let mut prod = 1.0;
        for j in 0..n {
            if j != i {
                prod *= t - nodes[j];
            }
        }
        val[i] = prod / denom;
        let mut d = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut p = 1.0;
            for j in 0..n {
                if j != i && j != k {
                    p *= t - nodes[j];
                }
            }
            d += p;
        }
        der[i] = d / denom;
    }
    (val, der)
}
