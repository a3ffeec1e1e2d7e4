//! Fully-connected networks with tanh hidden layers and a linear output,
//! stored as one flat parameter vector so optimizers, checkpoints, and
//! finite-difference checks all see the same memory.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector, DVectorView};
use rand::Rng;
use rand_distr::StandardNormal;

/// Layer sizes, input first. Weights are column-major `out x in`, followed
/// by the bias, layer by layer, inside the flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    sizes: Vec<usize>,
    offsets: Vec<(usize, usize)>,
    param_count: usize,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut at = 0;
        for l in 0..sizes.len() - 1 {
            let w = sizes[l + 1] * sizes[l];
            offsets.push((at, at + w));
            at += w + sizes[l + 1];
        }
        Self { sizes, offsets, param_count: at }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }
}

/// Random matrix with orthonormal rows or columns (whichever fit), scaled
/// by `gain`: QR of a Gaussian draw with the sign of R's diagonal folded
/// into Q so the distribution is uniform over orthogonal matrices.
fn orthogonal_matrix(rng: &mut impl Rng, rows: usize, cols: usize, gain: f64) -> DMatrix<f64> {
    let (r, c) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let rr = qr.r();
    let mut q = qr.q();
    for j in 0..c {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let m = if rows >= cols { q } else { q.transpose() };
    m * gain
}

/// A multilayer perceptron: tanh on every layer except the last, which is
/// linear. Parameters live in `theta`.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub theta: DVector<f64>,
}

/// Post-activation values of every layer (input first, output last), kept
/// for the backward pass.
pub struct MlpCache {
    acts: Vec<DMatrix<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.acts.last().expect("cache holds the forward pass")
    }
}

impl Mlp {
    /// Orthogonal initialization: `hidden_gain` on every layer except the
    /// last, `out_gain` on the last; biases zero.
    pub fn orthogonal(spec: MlpSpec, hidden_gain: f64, out_gain: f64, rng: &mut impl Rng) -> Self {
        let mut theta = DVector::zeros(spec.param_count());
        for l in 0..spec.num_layers() {
            let gain = if l + 1 == spec.num_layers() { out_gain } else { hidden_gain };
            let w = orthogonal_matrix(rng, spec.sizes[l + 1], spec.sizes[l], gain);
            let (w_off, b_off) = spec.offsets[l];
            theta.as_mut_slice()[w_off..b_off].copy_from_slice(w.as_slice());
        }
        Self { spec, theta }
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let theta = DVector::zeros(spec.param_count());
        Self { spec, theta }
    }

    fn w(&self, l: usize) -> DMatrixView<'_, f64> {
        let (w_off, b_off) = self.spec.offsets[l];
        DMatrixView::from_slice(
            &self.theta.as_slice()[w_off..b_off],
            self.spec.sizes[l + 1],
            self.spec.sizes[l],
        )
    }

    fn b(&self, l: usize) -> DVectorView<'_, f64> {
        let (_, b_off) = self.spec.offsets[l];
        DVectorView::from_slice(
            &self.theta.as_slice()[b_off..b_off + self.spec.sizes[l + 1]],
            self.spec.sizes[l + 1],
        )
    }

    /// Batched forward pass; columns are samples.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.spec.input_dim());
        let mut a = x.clone();
        for l in 0..self.spec.num_layers() {
            a = self.layer_out(l, &a);
        }
        a
    }

    /// Forward pass keeping every activation for `backward`.
    pub fn forward_cached(&self, x: &DMatrix<f64>) -> MlpCache {
        assert_eq!(x.nrows(), self.spec.input_dim());
        let mut acts = Vec::with_capacity(self.spec.num_layers() + 1);
        acts.push(x.clone());
        for l in 0..self.spec.num_layers() {
            let a = self.layer_out(l, acts.last().expect("seeded with input"));
            acts.push(a);
        }
        MlpCache { acts }
    }

    fn layer_out(&self, l: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = self.w(l) * a;
        let b = self.b(l);
        for mut col in z.column_iter_mut() {
            col += b;
        }
        if l + 1 == self.spec.num_layers() {
            z
        } else {
            z.map(f64::tanh)
        }
    }

    /// Backpropagates `dl_dout` (same shape as the output; the loss is
    /// treated as a sum over the batch) into a flat parameter gradient.
    pub fn backward(&self, cache: &MlpCache, dl_dout: &DMatrix<f64>) -> DVector<f64> {
        let layers = self.spec.num_layers();
        assert_eq!(cache.acts.len(), layers + 1);
        assert_eq!(dl_dout.shape(), cache.output().shape());

        let mut grads = DVector::zeros(self.spec.param_count());
        let mut g = dl_dout.clone();
        for l in (0..layers).rev() {
            // Grad w.r.t. the pre-activation: the last layer is linear,
            // hidden layers fold in tanh' = 1 - tanh^2.
            let gz = if l + 1 == layers {
                g
            } else {
                let a = &cache.acts[l + 1];
                g.zip_map(a, |gi, ai| gi * (1.0 - ai * ai))
            };

            let (w_off, b_off) = self.spec.offsets[l];
            let (rows, cols) = (self.spec.sizes[l + 1], self.spec.sizes[l]);
            let mut dw = DMatrixViewMut::from_slice(
                &mut grads.as_mut_slice()[w_off..b_off],
                rows,
                cols,
            );
            dw.gemm(1.0, &gz, &cache.acts[l].transpose(), 0.0);
            let db = &mut grads.as_mut_slice()[b_off..b_off + rows];
            for col in gz.column_iter() {
                for (dbi, gi) in db.iter_mut().zip(col.iter()) {
                    *dbi += gi;
                }
            }

            g = if l == 0 { DMatrix::zeros(0, 0) } else { self.w(l).transpose() * &gz };
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn squared_loss(mlp: &Mlp, x: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
        let out = mlp.forward(x);
        0.5 * (out - target).map(|e| e * e).sum()
    }

    fn check_gradients(mlp: &mut Mlp, x: &DMatrix<f64>, target: &DMatrix<f64>, idxs: &[usize]) {
        let cache = mlp.forward_cached(x);
        let dl_dout = cache.output() - target;
        let analytic = mlp.backward(&cache, &dl_dout);

        let h = 1e-5;
        for &i in idxs {
            let saved = mlp.theta[i];
            mlp.theta[i] = saved + h;
            let lp = squared_loss(mlp, x, target);
            mlp.theta[i] = saved - h;
            let lm = squared_loss(mlp, x, target);
            mlp.theta[i] = saved;
            let numeric = (lp - lm) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1.0);
            assert!(
                (analytic[i] - numeric).abs() / denom < 1e-4,
                "param {i}: analytic {} vs numeric {}",
                analytic[i],
                numeric
            );
        }
    }

    #[test]
    fn param_layout_counts_weights_then_biases_per_layer() {
        let spec = MlpSpec::new(vec![3, 5, 2]);
        assert_eq!(spec.param_count(), 3 * 5 + 5 + 5 * 2 + 2);
        assert_eq!(spec.input_dim(), 3);
        assert_eq!(spec.output_dim(), 2);
        assert_eq!(spec.num_layers(), 2);
    }

    #[test]
    fn forward_matches_a_hand_computed_two_layer_net() {
        let spec = MlpSpec::new(vec![2, 2, 1]);
        let mut mlp = Mlp::zeros(spec);
        // W0 = [[0.5, -1], [1, 0.25]] (column-major), b0 = [0.1, -0.2],
        // W1 = [[2, -3]], b1 = [0.05].
        mlp.theta.as_mut_slice().copy_from_slice(&[
            0.5, 1.0, -1.0, 0.25, 0.1, -0.2, 2.0, -3.0, 0.05,
        ]);
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let h0 = (0.5 * 1.0 - 1.0 * 2.0 + 0.1f64).tanh();
        let h1 = (1.0 * 1.0 + 0.25 * 2.0 - 0.2f64).tanh();
        let expect = 2.0 * h0 - 3.0 * h1 + 0.05;
        let out = mlp.forward(&x);
        assert_abs_diff_eq!(out[(0, 0)], expect, epsilon = 1e-12);
    }

    #[test]
    fn batched_forward_equals_per_sample_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = MlpSpec::new(vec![4, 6, 3]);
        let mlp = Mlp::orthogonal(spec, 2f64.sqrt(), 1.0, &mut rng);
        let x = DMatrix::from_fn(4, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let batched = mlp.forward(&x);
        for j in 0..5 {
            let single = mlp.forward(&DMatrix::from_column_slice(4, 1, x.column(j).as_slice()));
            assert_abs_diff_eq!(
                (batched.column(j) - single.column(0)).norm(),
                0.0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn gradient_check_passes_on_random_small_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let depth = rng.gen_range(1..=2);
            let mut sizes = vec![rng.gen_range(1..=5)];
            for _ in 0..depth {
                sizes.push(rng.gen_range(1..=7));
            }
            sizes.push(rng.gen_range(1..=4));
            let batch = rng.gen_range(1..=6);
            let spec = MlpSpec::new(sizes);
            let (ind, outd, n) = (spec.input_dim(), spec.output_dim(), spec.param_count());
            let mut mlp = Mlp::zeros(spec);
            for v in mlp.theta.iter_mut() {
                *v = 0.7 * rng.sample::<f64, _>(StandardNormal);
            }
            let x = DMatrix::from_fn(ind, batch, |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = DMatrix::from_fn(outd, batch, |_, _| rng.sample::<f64, _>(StandardNormal));
            let idxs: Vec<usize> = (0..n).collect();
            check_gradients(&mut mlp, &x, &t, &idxs);
        }
    }

    #[test]
    fn gradient_check_passes_on_the_policy_sized_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = MlpSpec::new(vec![102, 256, 128, 27]);
        let n = spec.param_count();
        let mut mlp = Mlp::orthogonal(spec, 2f64.sqrt(), 0.01, &mut rng);
        let x = DMatrix::from_fn(102, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = DMatrix::from_fn(27, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let idxs: Vec<usize> = (0..200).map(|_| rng.gen_range(0..n)).collect();
        check_gradients(&mut mlp, &x, &t, &idxs);
    }

    #[test]
    fn orthogonal_init_gives_gain_scaled_orthonormal_maps_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gain = 2f64.sqrt();

        // Tall: orthonormal columns.
        let tall = orthogonal_matrix(&mut rng, 256, 102, gain);
        let gram = tall.transpose() * &tall;
        for i in 0..102 {
            for j in 0..102 {
                let expect = if i == j { gain * gain } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)], expect, epsilon = 1e-10);
            }
        }

        // Wide: orthonormal rows.
        let wide = orthogonal_matrix(&mut rng, 27, 128, 0.01);
        let gram = &wide * wide.transpose();
        for i in 0..27 {
            for j in 0..27 {
                let expect = if i == j { 1e-4 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)], expect, epsilon = 1e-12);
            }
        }

        let spec = MlpSpec::new(vec![3, 4, 2]);
        let mlp = Mlp::orthogonal(spec.clone(), gain, 0.01, &mut rng);
        let (_, b_off) = spec.offsets[0];
        for i in b_off..b_off + 4 {
            assert_eq!(mlp.theta[i], 0.0);
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let spec = MlpSpec::new(vec![8, 16, 4]);
        let a = Mlp::orthogonal(spec.clone(), 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let b = Mlp::orthogonal(spec, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.theta, b.theta);
    }
}
