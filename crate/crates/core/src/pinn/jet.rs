//! Batched second-order forward jets through the MLP and their reverse pass.
//!
//! A jet block for one input point has `1 + k + pairs.len()` columns: the
//! value, `k` first-order directional derivatives, and one second-order
//! mixed derivative per `(u, v)` direction pair. Several blocks sit side by
//! side in one matrix so each layer is a single matrix product.

use nalgebra::{DMatrix, DVector};

use super::mlp::MlpParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct JetLayout {
    pub directions: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl JetLayout {
    pub fn first_order(directions: usize) -> Self {
        JetLayout {
            directions,
            pairs: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        1 + self.directions + self.pairs.len()
    }

    pub fn dir_col(&self, k: usize) -> usize {
        1 + k
    }

    pub fn pair_col(&self, i: usize) -> usize {
        1 + self.directions + i
    }
}

/// Saved activations from [`forward`], consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    layout: JetLayout,
    blocks: usize,
    /// Input jet of each affine layer.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activation jet of each hidden layer.
    pre: Vec<DMatrix<f64>>,
}

impl Tape {
    pub fn blocks(&self) -> usize {
        self.blocks
    }
}

/// Builds an input jet: one block per point, with the given direction
/// vectors and zero second-order columns.
pub fn seed_jet(points: &[&[f64]], directions: &[Vec<Vec<f64>>], layout: &JetLayout) -> DMatrix<f64> {
    let d = points[0].len();
    let c = layout.width();
    let mut x = DMatrix::zeros(d, c * points.len());
    for (b, (pt, dirs)) in points.iter().zip(directions).enumerate() {
        x.column_mut(b * c).copy_from_slice(pt);
        for (k, v) in dirs.iter().enumerate() {
            x.column_mut(b * c + layout.dir_col(k)).copy_from_slice(v);
        }
    }
    x
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>, c: usize) {
    for col in (0..z.ncols()).step_by(c) {
        let mut zc = z.column_mut(col);
        zc += b;
    }
}

fn tanh_forward(z: &DMatrix<f64>, layout: &JetLayout) -> DMatrix<f64> {
    let c = layout.width();
    let mut a = DMatrix::zeros(z.nrows(), z.ncols());
    for base in (0..z.ncols()).step_by(c) {
        for r in 0..z.nrows() {
            let s = z[(r, base)].tanh();
            let d1 = 1.0 - s * s;
            let d2 = -2.0 * s * d1;
            a[(r, base)] = s;
            for k in 0..layout.directions {
                let col = base + layout.dir_col(k);
                a[(r, col)] = d1 * z[(r, col)];
            }
            for (i, &(u, v)) in layout.pairs.iter().enumerate() {
                let col = base + layout.pair_col(i);
                let zu = z[(r, base + layout.dir_col(u))];
                let zv = z[(r, base + layout.dir_col(v))];
                a[(r, col)] = d1 * z[(r, col)] + d2 * zu * zv;
            }
        }
    }
    a
}

fn tanh_backward(abar: &DMatrix<f64>, z: &DMatrix<f64>, layout: &JetLayout) -> DMatrix<f64> {
    let c = layout.width();
    let mut zbar = DMatrix::zeros(z.nrows(), z.ncols());
    for base in (0..z.ncols()).step_by(c) {
        for r in 0..z.nrows() {
            let s = z[(r, base)].tanh();
            let d1 = 1.0 - s * s;
            let d2 = -2.0 * s * d1;
            let d3 = -2.0 * d1 * d1 - 2.0 * s * d2;
            let mut z0 = abar[(r, base)] * d1;
            for k in 0..layout.directions {
                let col = base + layout.dir_col(k);
                z0 += abar[(r, col)] * d2 * z[(r, col)];
                zbar[(r, col)] = abar[(r, col)] * d1;
            }
            for (i, &(u, v)) in layout.pairs.iter().enumerate() {
                let col = base + layout.pair_col(i);
                let cu = base + layout.dir_col(u);
                let cv = base + layout.dir_col(v);
                let ap = abar[(r, col)];
                let (zu, zv) = (z[(r, cu)], z[(r, cv)]);
                z0 += ap * (d2 * z[(r, col)] + d3 * zu * zv);
                zbar[(r, cu)] += ap * d2 * zv;
                zbar[(r, cv)] += ap * d2 * zu;
                zbar[(r, col)] = ap * d1;
            }
            zbar[(r, base)] = z0;
        }
    }
    zbar
}

/// Propagates an input jet through the network.
pub fn forward(w: &MlpParams, x: DMatrix<f64>, layout: &JetLayout) -> Result<(DMatrix<f64>, Tape)> {
    let c = layout.width();
    if x.nrows() != w.input_dim() || x.ncols() % c != 0 {
        return Err(Error::DimensionMismatch {
            expected: w.input_dim(),
            found: x.nrows(),
        });
    }
    let blocks = x.ncols() / c;
    let last = w.num_layers() - 1;
    let mut inputs = Vec::with_capacity(w.num_layers());
    let mut pre = Vec::with_capacity(last);
    let mut a = x;
    for (l, (wl, bl)) in w.weights.iter().zip(&w.biases).enumerate() {
        let mut z = wl * &a;
        add_bias(&mut z, bl, c);
        inputs.push(a);
        if l < last {
            a = tanh_forward(&z, layout);
            pre.push(z);
        } else {
            a = z;
        }
    }
    Ok((
        a,
        Tape {
            layout: layout.clone(),
            blocks,
            inputs,
            pre,
        },
    ))
}

/// Reverse pass: accumulates weight gradients into `grad` and returns the
/// cotangent of the input jet.
pub fn backward(w: &MlpParams, tape: &Tape, ybar: DMatrix<f64>, grad: &mut MlpParams) -> DMatrix<f64> {
    let c = tape.layout.width();
    let mut zbar = ybar;
    for l in (0..w.num_layers()).rev() {
        if l < w.num_layers() - 1 {
            zbar = tanh_backward(&zbar, &tape.pre[l], &tape.layout);
        }
        grad.weights[l].gemm(1.0, &zbar, &tape.inputs[l].transpose(), 1.0);
        for col in (0..zbar.ncols()).step_by(c) {
            grad.biases[l] += zbar.column(col);
        }
        zbar = w.weights[l].tr_mul(&zbar);
    }
    zbar
}

fn check_input(w: &MlpParams, x: &[f64]) -> Result<()> {
    if x.len() != w.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: w.input_dim(),
            found: x.len(),
        });
    }
    Ok(())
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// `J[i][j] = d output_i / d input_j`.
pub fn input_jacobian(w: &MlpParams, x: &[f64]) -> Result<DMatrix<f64>> {
    check_input(w, x)?;
    let d = x.len();
    let layout = JetLayout::first_order(d);
    let dirs: Vec<Vec<f64>> = (0..d).map(|i| unit(d, i)).collect();
    let (y, _) = forward(w, seed_jet(&[x], &[dirs], &layout), &layout)?;
    Ok(y.columns(1, d).into_owned())
}

/// Hessian of output 0 with respect to inputs `1..d`, from one mixed
/// second-order column per pair `j <= k`.
pub fn energy_input_hessian(w: &MlpParams, x: &[f64]) -> Result<DMatrix<f64>> {
    check_input(w, x)?;
    let d = x.len();
    let p = d - 1;
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| (j..p).map(move |k| (j, k))).collect();
    let layout = JetLayout {
        directions: p,
        pairs: pairs.clone(),
    };
    let dirs: Vec<Vec<f64>> = (0..p).map(|i| unit(d, i + 1)).collect();
    let (y, _) = forward(w, seed_jet(&[x], &[dirs], &layout), &layout)?;
    let mut h = DMatrix::zeros(p, p);
    for (i, &(j, k)) in pairs.iter().enumerate() {
        let v = y[(0, layout.pair_col(i))];
        h[(j, k)] = v;
        h[(k, j)] = v;
    }
    Ok(h)
}

/// `H v` for the energy Hessian over inputs `1..d`, via mixed columns
/// `(e_j, v)`.
pub fn energy_hessian_vector(w: &MlpParams, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_input(w, x)?;
    let d = x.len();
    let p = d - 1;
    if v.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: v.len(),
        });
    }
    let layout = JetLayout {
        directions: p + 1,
        pairs: (0..p).map(|j| (j, p)).collect(),
    };
    let mut dirs: Vec<Vec<f64>> = (0..p).map(|i| unit(d, i + 1)).collect();
    let mut vfull = vec![0.0];
    vfull.extend_from_slice(v);
    dirs.push(vfull);
    let (y, _) = forward(w, seed_jet(&[x], &[dirs], &layout), &layout)?;
    Ok((0..p).map(|j| y[(0, layout.pair_col(j))]).collect())
}

/// Value, first and second directional derivatives of every output along `dir`.
pub fn directional_derivatives(w: &MlpParams, x: &[f64], dir: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_input(w, x)?;
    check_input(w, dir)?;
    let layout = JetLayout {
        directions: 1,
        pairs: vec![(0, 0)],
    };
    let (y, _) = forward(w, seed_jet(&[x], &[vec![dir.to_vec()]], &layout), &layout)?;
    let col = |c: usize| y.column(c).iter().copied().collect::<Vec<f64>>();
    Ok((col(0), col(1), col(2)))
}
