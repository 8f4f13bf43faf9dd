//! Small quadrature toolkit: trapezoid sums for rapidly decaying integrands
//! and composite Gauss-Legendre for smooth integrands on finite intervals.

/// Composite trapezoid of `f` on the symmetric interval `[-half_width, half_width]`
/// with `n` panels. For integrands analytic in a strip and decaying at the
/// endpoints this converges geometrically.
pub fn trapezoid_symmetric<F: Fn(f64) -> f64>(f: F, half_width: f64, n: usize) -> f64 {
    let h = 2.0 * half_width / n as f64;
    let mut sum = 0.5 * (f(-half_width) + f(half_width));
    for i in 1..n {
        sum += f(-half_width + i as f64 * h);
    }
    sum * h
}

/// Plain trapezoid sum over uniformly spaced samples, `h * sum(samples)`
/// (the periodic rule; endpoints are assumed to be negligible or identified).
pub fn periodic_sum(samples: &[f64], h: f64) -> f64 {
    samples.iter().sum::<f64>() * h
}

// 10-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// 10-point Gauss-Legendre on a single interval.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        sum += w * (f(mid - half * x) + f(mid + half * x));
    }
    sum * half
}

/// Composite Gauss-Legendre with `panels` equal sub-intervals.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            gauss_legendre(&f, lo, lo + h)
        })
        .sum()
}

/// Cumulative integral `F(x_i) = int_{x_0}^{x_i} f` on a uniform grid, each cell
/// integrated with 10-point Gauss-Legendre (exact to machine precision for the
/// smooth profiles used here).
pub fn cumulative_gauss<F: Fn(f64) -> f64>(f: F, x0: f64, h: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..n {
        let lo = x0 + (i - 1) as f64 * h;
        acc += gauss_legendre(&f, lo, lo + h);
        out.push(acc);
    }
    out
}

/// Eight-point Lagrange interpolation of samples on `y_i = y0 + i h`. The caller
/// handles points outside the sampled range.
pub fn lagrange8(values: &[f64], y0: f64, h: f64, y: f64) -> f64 {
    let n = values.len();
    let s = (y - y0) / h;
    let i0 = (s.floor() as isize - 3).clamp(0, n as isize - 8) as usize;
    let mut acc = 0.0;
    for a in 0..8 {
        let mut w = 1.0;
        for b in 0..8 {
            if a != b {
                w *= (s - (i0 + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * values[i0 + a];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        // degree 19 is the exactness limit of the 10-point rule
        let v = gauss_legendre(&|x: f64| x.powi(18), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_gaussian() {
        let v = trapezoid_symmetric(|x| (-x * x).exp(), 10.0, 400);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let h = 0.1;
        let cum = cumulative_gauss(f64::cos, 0.0, h, 101);
        for (i, v) in cum.iter().enumerate() {
            assert!((v - (i as f64 * h).sin()).abs() < 1e-13);
        }
    }
}
