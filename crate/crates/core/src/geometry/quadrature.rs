//! Reference quadrature rules in barycentric coordinates. Weights are
//! normalized to sum to one, so physical weights are `w · measure`.

/// Six-point degree-4 rule on triangles (Dunavant).
pub fn triangle_degree4() -> &'static [([f64; 3], f64)] {
    const A1: f64 = 0.445_948_490_915_965;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.091_576_213_509_771;
    const W2: f64 = 0.109_951_743_655_322;
    const B1: f64 = 1.0 - 2.0 * A1;
    const B2: f64 = 1.0 - 2.0 * A2;
    static RULE: [([f64; 3], f64); 6] = [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ];
    &RULE
}

fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let (nodes, weights): (Vec<f64>, Vec<f64>) = match n {
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = (6.0f64 / 5.0).sqrt();
            let a = (3.0 / 7.0 - 2.0 / 7.0 * r).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * r).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => unreachable!("unsupported Gauss-Legendre order {n}"),
    };
    nodes
        .into_iter()
        .zip(weights)
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// 48-point conical-product rule on tetrahedra, exact through degree 5.
pub fn tet_degree5() -> &'static [([f64; 4], f64)] {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<([f64; 4], f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let gu = gauss_legendre_unit(4);
        let gv = gauss_legendre_unit(4);
        let gw = gauss_legendre_unit(3);
        let mut out = Vec::with_capacity(48);
        for &(u, wu) in &gu {
            for &(v, wv) in &gv {
                for &(w, ww) in &gw {
                    let x = u;
                    let y = v * (1.0 - u);
                    let z = w * (1.0 - u) * (1.0 - v);
                    // reference volume is 1/6
                    let weight = 6.0 * wu * wv * ww * (1.0 - u).powi(2) * (1.0 - v);
                    out.push(([1.0 - x - y - z, x, y, z], weight));
                }
            }
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rule_exact_through_degree_4() {
        // ∫_T λ1^a λ2^b dA / |T| = 2 a! b! / (a+b+2)!
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q: f64 = triangle_degree4()
                    .iter()
                    .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                    .sum();
                let exact = 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn tet_rule_exact_through_degree_5() {
        // ∫_T x^a y^b z^c dV / |T| = 6 a! b! c! / (a+b+c+3)!
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                for c in 0..=(5 - a - b) {
                    let q: f64 = tet_degree5()
                        .iter()
                        .map(|(l, w)| {
                            w * l[1].powi(a as i32) * l[2].powi(b as i32) * l[3].powi(c as i32)
                        })
                        .sum();
                    let exact =
                        6.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                    assert!((q - exact).abs() < 1e-14, "a={a} b={b} c={c}");
                }
            }
        }
        assert!(tet_degree5().iter().all(|(_, w)| *w > 0.0));
    }
}
