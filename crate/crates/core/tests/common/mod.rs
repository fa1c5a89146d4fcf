#![allow(dead_code)]

//! Test-only helpers: a dense-inverse reference GP that shares no code with
//! the library's Cholesky path, plus seeded fixture generators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use ugc_core::data::{
    Direction, FamilyKind, JointDataset, JointFamily, MeasurementSample, Provenance,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn se(a: &[f64], b: &[f64], sf2: f64, ls: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for j in 0..a.len() {
        r2 += ((a[j] - b[j]) / ls[j]).powi(2);
    }
    sf2 * (-0.5 * r2).exp()
}

pub fn quad_basis(x: &[f64]) -> Vec<f64> {
    let mut h = vec![1.0];
    for v in x {
        h.push(*v);
    }
    for v in x {
        h.push(v * v);
    }
    h
}

pub struct OracleGp {
    pub beta: DVector<f64>,
    pub alpha: DVector<f64>,
    pub a_inv: DMatrix<f64>,
    pub x: Vec<Vec<f64>>,
    pub sf2: f64,
    pub ls: Vec<f64>,
}

/// Reference fit via explicit `(K + σ²I)⁻¹`. `beta = None` means GLS.
pub fn oracle_fit(
    x: &[Vec<f64>],
    y: &[f64],
    sf2: f64,
    ls: &[f64],
    noise: f64,
    beta: Option<&[f64]>,
) -> OracleGp {
    let n = x.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        se(&x[i], &x[j], sf2, ls) + if i == j { noise } else { 0.0 }
    });
    let a_inv = a.try_inverse().expect("oracle matrix invertible");
    let p = quad_basis(&x[0]).len();
    let h = DMatrix::from_fn(n, p, |i, j| quad_basis(&x[i])[j]);
    let yv = DVector::from_column_slice(y);
    let beta = match beta {
        Some(b) => DVector::from_column_slice(b),
        None => {
            let m = h.transpose() * &a_inv * &h;
            m.try_inverse().expect("oracle GLS matrix invertible") * h.transpose() * &a_inv * &yv
        }
    };
    let alpha = &a_inv * (&yv - &h * &beta);
    OracleGp {
        beta,
        alpha,
        a_inv,
        x: x.to_vec(),
        sf2,
        ls: ls.to_vec(),
    }
}

impl OracleGp {
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let k = DVector::from_fn(n, |i, _| se(&self.x[i], q, self.sf2, &self.ls));
        let hq = DVector::from_vec(quad_basis(q));
        let mean = hq.dot(&self.beta) + k.dot(&self.alpha);
        let var = self.sf2 - (k.transpose() * &self.a_inv * &k)[(0, 0)];
        (mean, var)
    }
}

/// Naive `−½ rᵀA⁻¹r − ½ log det A − (n/2) log 2π` with LU determinant.
pub fn oracle_lml(
    x: &[Vec<f64>],
    y: &[f64],
    sf2: f64,
    ls: &[f64],
    noise: f64,
    beta: &[f64],
) -> f64 {
    let n = x.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        se(&x[i], &x[j], sf2, ls) + if i == j { noise } else { 0.0 }
    });
    let det = a.clone().determinant();
    let a_inv = a.try_inverse().unwrap();
    let r = DVector::from_fn(n, |i, _| {
        y[i] - quad_basis(&x[i])
            .iter()
            .zip(beta)
            .map(|(h, b)| h * b)
            .sum::<f64>()
    });
    -0.5 * (r.transpose() * a_inv * &r)[(0, 0)]
        - 0.5 * det.ln()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

pub fn to_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    let d = x[0].len();
    DMatrix::from_fn(x.len(), d, |i, j| x[i][j])
}

/// A random instance: `n` points in `[0, 5]^d`, y from a smooth function
/// plus noise, and hyperparameters in moderate ranges.
pub struct Instance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub sf2: f64,
    pub ls: Vec<f64>,
    pub noise: f64,
}

pub fn random_instance(r: &mut ChaCha8Rng, d: usize, n: usize) -> Instance {
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(0.0..5.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|p| p.iter().map(|v| v.sin()).sum::<f64>() + 0.3 * p[0] + r.random_range(-0.2..0.2))
        .collect();
    Instance {
        x,
        y,
        sf2: r.random_range(0.5..2.0),
        ls: (0..d).map(|_| r.random_range(0.5..2.0)).collect(),
        noise: r.random_range(0.01..0.5),
    }
}

/// Well-separated points (jittered grid) for noise-free interpolation.
pub fn separated_instance(r: &mut ChaCha8Rng, d: usize) -> Instance {
    let per_axis = if d == 1 {
        r.random_range(5..=20)
    } else {
        r.random_range(3..=5)
    };
    let spacing = 1.0;
    let mut x = Vec::new();
    if d == 1 {
        for i in 0..per_axis {
            x.push(vec![i as f64 * spacing + r.random_range(-0.2..0.2)]);
        }
    } else {
        for i in 0..per_axis {
            for j in 0..per_axis {
                x.push(vec![
                    i as f64 * spacing + r.random_range(-0.2..0.2),
                    j as f64 * spacing + r.random_range(-0.2..0.2),
                ]);
            }
        }
    }
    let y = x
        .iter()
        .map(|p| p.iter().map(|v| (1.3 * v).cos()).sum::<f64>() + r.random_range(-0.5..0.5))
        .collect();
    Instance {
        x,
        y,
        sf2: r.random_range(0.5..2.0),
        ls: (0..d).map(|_| r.random_range(0.4..0.9)).collect(),
        noise: 0.0,
    }
}

pub fn sample(
    family: JointFamily,
    theta: f64,
    dir: Direction,
    f: f64,
    ret: f64,
    run: usize,
) -> MeasurementSample {
    MeasurementSample {
        family,
        deformation_angle_deg: theta,
        direction: dir,
        force_n: f.max(0.0),
        return_angle_deg: ret.clamp(0.0, 180.0),
        run_id: format!("r{run}"),
    }
}

/// Square-wave generator: near-linear force, return angle flat to 70° then
/// decaying quadratically.
pub fn square_force(theta: f64) -> f64 {
    0.35 + 0.021 * theta
}

pub fn square_return(theta: f64) -> f64 {
    if theta <= 70.0 {
        180.0
    } else {
        180.0 - 0.004 * (theta - 70.0).powi(2)
    }
}

/// Three runs per angle, 0..=170° in 10° steps, forward direction.
pub fn square_dataset(seed: u64) -> JointDataset {
    let mut r = rng(seed);
    let fam = JointFamily::plain(FamilyKind::SquareWaveSymmetric).unwrap();
    let fnoise = Normal::new(0.0, 0.03).unwrap();
    let rnoise = Normal::new(0.0, 0.4).unwrap();
    let mut samples = Vec::new();
    for run in 1..=3 {
        for k in 0..=17 {
            let t = 10.0 * k as f64;
            samples.push(sample(
                fam,
                t,
                Direction::Forward,
                square_force(t) + fnoise.sample(&mut r),
                square_return(t) + rnoise.sample(&mut r),
                run,
            ));
        }
    }
    JointDataset {
        samples,
        provenance: Provenance::default(),
    }
}

/// Curve-family generator: force grows with angle and thickness.
pub fn curve_force(theta: f64, t: f64) -> f64 {
    (0.4 + 2.6 * t) * (theta / 100.0) + 0.3 * t * (theta / 100.0).powi(2)
}

pub fn curve_return(theta: f64, t: f64) -> f64 {
    let onset = 90.0 + 40.0 * (t - 0.4) / 1.2;
    if theta <= onset {
        180.0
    } else {
        180.0 - 0.3 * (theta - onset)
    }
}

pub fn curve_dataset(seed: u64) -> JointDataset {
    let mut r = rng(seed);
    let fnoise = Normal::new(0.0, 0.05).unwrap();
    let rnoise = Normal::new(0.0, 0.5).unwrap();
    let mut samples = Vec::new();
    for t in [0.4, 0.8, 1.2, 1.6] {
        let fam = JointFamily::curve(t).unwrap();
        for run in 1..=3 {
            for k in 0..=12 {
                let th = 30.0 + 10.0 * k as f64;
                samples.push(sample(
                    fam,
                    th,
                    Direction::Forward,
                    curve_force(th, t) + fnoise.sample(&mut r),
                    curve_return(th, t) + rnoise.sample(&mut r),
                    run,
                ));
            }
        }
    }
    JointDataset {
        samples,
        provenance: Provenance::default(),
    }
}

/// Runge-style bump sampled on an even 20-point grid with N(0, 0.1²) noise.
pub fn runge(theta: f64) -> f64 {
    let u = (theta - 90.0) / 90.0;
    1.0 + 3.0 / (1.0 + 25.0 * u * u)
}

pub fn oscillation_fixture(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let theta: Vec<f64> = (0..20).map(|i| 180.0 * i as f64 / 19.0).collect();
    let y = theta
        .iter()
        .map(|t| runge(*t) + noise.sample(&mut r))
        .collect();
    (theta, y)
}
