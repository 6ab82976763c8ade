use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracestokes::exact::ManufacturedSolution;
use tracestokes::mesh::Point;

type M3 = [[f64; 3]; 3];

pub fn projector(x: &Point) -> M3 {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    std::array::from_fn(|i| {
        std::array::from_fn(|j| f64::from(u8::from(i == j)) - x[i] * x[j] / (r * r))
    })
}

/// `u = P(x) (−z², y, x)` extended off the sphere by the radial projector.
pub fn velocity(x: &Point) -> [f64; 3] {
    let t = [-x[2] * x[2], x[1], x[0]];
    let p = projector(x);
    std::array::from_fn(|i| (0..3).map(|j| p[i][j] * t[j]).sum())
}

pub fn pressure(x: &Point) -> f64 {
    x[0] * x[1] * x[1] + x[2]
}

/// Fourth-order central difference of a vector-valued map along `e_k`.
pub fn diff<const N: usize>(
    f: impl Fn(&Point) -> [f64; N],
    x: &Point,
    k: usize,
    h: f64,
) -> [f64; N] {
    let at = |s: f64| {
        let mut y = *x;
        y[k] += s * h;
        f(&y)
    };
    let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
    std::array::from_fn(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h))
}

/// `E_s(u) = ½(P∇uP + (P∇uP)ᵀ)` with a finite-difference Jacobian, flattened.
pub fn strain(x: &Point) -> [f64; 9] {
    let cols: [[f64; 3]; 3] = std::array::from_fn(|k| diff(velocity, x, k, 1e-3));
    let j: M3 = std::array::from_fn(|i| std::array::from_fn(|k| cols[k][i]));
    let p = projector(x);
    let pj: M3 =
        std::array::from_fn(|i| std::array::from_fn(|k| (0..3).map(|a| p[i][a] * j[a][k]).sum()));
    let pjp: M3 =
        std::array::from_fn(|i| std::array::from_fn(|k| (0..3).map(|a| pj[i][a] * p[a][k]).sum()));
    std::array::from_fn(|m| {
        let (i, k) = (m / 3, m % 3);
        0.5 * (pjp[i][k] + pjp[k][i])
    })
}

/// Strong surface Stokes operator `−2P div_Γ E_s(u) + u + ∇_Γ p` and
/// `div_Γ u`, by nested finite differences.
pub fn strong_operator(y: &Point) -> ([f64; 3], f64) {
    let p = projector(y);
    let de: [[f64; 9]; 3] = std::array::from_fn(|k| diff(strain, y, k, 5e-3));
    let div: [f64; 3] = std::array::from_fn(|i| {
        (0..3)
            .flat_map(|j| (0..3).map(move |k| (j, k)))
            .map(|(j, k)| de[k][i * 3 + j] * p[k][j])
            .sum()
    });
    let u = velocity(y);
    let gp: [f64; 3] = std::array::from_fn(|k| diff(|x| [pressure(x)], y, k, 1e-3)[0]);
    let f = std::array::from_fn(|i| {
        (0..3)
            .map(|j| p[i][j] * (-2.0 * div[j] + gp[j]))
            .sum::<f64>()
            + u[i]
    });
    let du: [[f64; 3]; 3] = std::array::from_fn(|k| diff(velocity, y, k, 1e-3));
    let g = (0..3)
        .map(|i| (0..3).map(|k| p[i][k] * du[k][i]).sum::<f64>())
        .sum();
    (f, g)
}

/// Largest relative deviation of the closed-form forcing `(f, g)` from the
/// finite-difference strong operator at `count` random sphere points.
pub fn forcing_deviation(count: usize) -> f64 {
    let exact = ManufacturedSolution::sphere();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let y: Point = loop {
            let v: Point = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r > 0.1 && r <= 1.0 {
                break v.map(|c| c / r);
            }
        };
        let (f, g) = exact.eval_forcing(&y).unwrap();
        let (f_fd, g_fd) = strong_operator(&y);
        let norm = (f_fd[0] * f_fd[0] + f_fd[1] * f_fd[1] + f_fd[2] * f_fd[2]).sqrt();
        let err = ((0..3).map(|i| (f[i] - f_fd[i]).powi(2)).sum::<f64>()).sqrt();
        worst = worst
            .max(err / norm)
            .max((g - g_fd).abs() / g_fd.abs().max(1.0));
    }
    worst
}
