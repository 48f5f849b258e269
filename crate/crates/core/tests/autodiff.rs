use nalgebra::DMatrix;
use palqo_core::pinn::jet::{energy_hessian_vector, energy_input_hessian, input_jacobian};
use palqo_core::pinn::loss::{finite_difference_gradient, loss_weight_gradient, window_time, Sample, TrainingSet};
use palqo_core::pinn::{MlpParams, PinnConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 50;
const SHAPES: [(usize, usize); 6] = [(1, 4), (1, 16), (2, 4), (2, 16), (4, 4), (4, 16)];

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn draws() -> impl Iterator<Item = (usize, MlpParams, ChaCha8Rng)> {
    (0..DRAWS).map(|k| {
        let (p, width) = SHAPES[k % SHAPES.len()];
        let w = MlpParams::uniform(&MlpParams::pinn_sizes(p + 1, width, 2), 1000 + k as u64).unwrap();
        (p, w, ChaCha8Rng::seed_from_u64(k as u64))
    })
}

fn fd_jacobian(w: &MlpParams, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let mut j = DMatrix::zeros(w.output_dim(), d);
    for c in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let (yp, ym) = (w.forward(&xp).unwrap(), w.forward(&xm).unwrap());
        for r in 0..w.output_dim() {
            j[(r, c)] = (yp[r] - ym[r]) / (2.0 * h);
        }
    }
    j
}

#[test]
fn input_jacobian_matches_finite_differences() {
    for (p, w, mut rng) in draws() {
        let x = point(&mut rng, p + 1);
        let j = input_jacobian(&w, &x).unwrap();
        let fd = fd_jacobian(&w, &x, 1e-6);
        assert!(rel_err(j.as_slice(), fd.as_slice()) < 1e-4);
    }
}

#[test]
fn input_hessian_symmetric_and_matches_finite_differences() {
    for (p, w, mut rng) in draws() {
        let x = point(&mut rng, p + 1);
        let h = energy_input_hessian(&w, &x).unwrap();
        assert!((&h - h.transpose()).abs().max() <= 1e-14);
        let step = 1e-5;
        let mut fd = DMatrix::zeros(p, p);
        for k in 0..p {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k + 1] += step;
            xm[k + 1] -= step;
            let (gp, gm) = (input_jacobian(&w, &xp).unwrap(), input_jacobian(&w, &xm).unwrap());
            for j in 0..p {
                fd[(j, k)] = (gp[(0, j + 1)] - gm[(0, j + 1)]) / (2.0 * step);
            }
        }
        assert!(rel_err(h.as_slice(), fd.as_slice()) < 1e-4, "p={p}");
    }
}

#[test]
fn hessian_vector_matches_full_hessian() {
    for (p, w, mut rng) in draws() {
        let x = point(&mut rng, p + 1);
        let v = point(&mut rng, p);
        let hv = energy_hessian_vector(&w, &x, &v).unwrap();
        let full = energy_input_hessian(&w, &x).unwrap() * nalgebra::DVector::from_vec(v);
        for (a, b) in hv.iter().zip(full.iter()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

fn random_set(rng: &mut ChaCha8Rng, p: usize, tau: usize) -> TrainingSet {
    let samples = (0..tau)
        .map(|j| Sample {
            t_hat: window_time(j),
            theta: point(rng, p),
            energy: rng.random_range(-2.0..0.0),
            theta_next: point(rng, p),
        })
        .collect();
    TrainingSet::new(samples).unwrap()
}

#[test]
fn loss_gradient_matches_finite_differences_for_all_weightings() {
    let weightings = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1e-4, 1.0, 1.0)];
    for (p, w, mut rng) in draws() {
        let set = random_set(&mut rng, p, 3);
        for (k, &(ld, l1, l2)) in weightings.iter().enumerate() {
            let cfg = PinnConfig {
                lambda_d: ld,
                lambda_p1: l1,
                lambda_p2: l2,
                eta_vqe: 0.05,
                p1_per_component: k % 2 == 1,
                ..PinnConfig::default()
            };
            let g = loss_weight_gradient(&w, &set, &cfg).unwrap().flat();
            let fd = finite_difference_gradient(&w, &set, &cfg, 1e-6).unwrap().flat();
            let e = rel_err(&g, &fd);
            assert!(e < 1e-4, "p={p} weighting {k}: rel err {e}");
        }
    }
}
