//! A small reverse-mode gradient engine scoped to the fixed architecture:
//! one graph-convolution layer with a skip projection, neighborhood sum
//! pooling, three dense layers, and either a per-node head (actor) or a
//! globally pooled head (critic). Finite-difference tests keep it honest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        let data = rows.into_iter().flatten().collect::<Vec<_>>();
        assert_eq!(data.len(), r * c);
        Mat { rows: r, cols: c, data }
    }

    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut S {
        &mut self.data[r * self.cols + c]
    }

    /// self (r x k) * other (k x c).
    pub fn matmul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == S::zero() {
                    continue;
                }
                let orow = k * other.cols;
                let drow = i * other.cols;
                for j in 0..other.cols {
                    out.data[drow + j] += a * other.data[orow + j];
                }
            }
        }
        out
    }

    /// self' (k x r)' * other (k x c) -> (r x c); self is k x r.
    pub fn t_matmul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.rows, other.rows);
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.at(k, i);
                if a == S::zero() {
                    continue;
                }
                let orow = k * other.cols;
                let drow = i * other.cols;
                for j in 0..other.cols {
                    out.data[drow + j] += a * other.data[orow + j];
                }
            }
        }
        out
    }

    /// self (r x k) * other' (c x k)' -> (r x c).
    pub fn matmul_t(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.cols);
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut acc = S::zero();
                let arow = i * self.cols;
                let brow = j * other.cols;
                for k in 0..self.cols {
                    acc += self.data[arow + k] * other.data[brow + k];
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat<S>) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn relu(&self) -> Mat<S> {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            if *v < S::zero() {
                *v = S::zero();
            }
        }
        out
    }

    /// Gradient mask for relu: d * (pre > 0).
    pub fn relu_backward(&self, pre: &Mat<S>) -> Mat<S> {
        let mut out = self.clone();
        for (v, &p) in out.data.iter_mut().zip(&pre.data) {
            if p <= S::zero() {
                *v = S::zero();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<S> {
    pub w: Mat<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    fn new(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        // Glorot-uniform style initialization.
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = Mat::zeros(fan_in, fan_out);
        for v in w.data.iter_mut() {
            *v = S::cast_f64(rng.random_range(-bound..bound));
        }
        Dense { w, b: vec![S::zero(); fan_out] }
    }

    fn forward(&self, x: &Mat<S>) -> Mat<S> {
        let mut out = x.matmul(&self.w);
        for r in 0..out.rows {
            for c in 0..out.cols {
                let b = self.b[c];
                out.data[r * out.cols + c] += b;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputMode {
    /// One output per node (Dirichlet concentrations).
    PerNode,
    /// Globally sum-pooled scalar (critic value).
    Pooled,
}

/// Precomputed propagation matrices for a graph: the degree-normalized
/// adjacency with self-loops for convolution, and the raw adjacency with
/// self-loops for neighborhood sum pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices<S> {
    pub a_hat: Mat<S>,
    pub a_pool: Mat<S>,
}

impl<S: Scalar> GraphMatrices<S> {
    pub fn new(node_count: usize, adjacency: &[bool]) -> Self {
        let n = node_count;
        assert_eq!(adjacency.len(), n * n);
        let mut a_pool = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if adjacency[i * n + j] || i == j {
                    *a_pool.at_mut(i, j) = S::one();
                }
            }
        }
        let degree: Vec<S> = (0..n)
            .map(|i| (0..n).map(|j| a_pool.at(i, j)).sum::<S>())
            .collect();
        let mut a_hat = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if a_pool.at(i, j) != S::zero() {
                    let norm = (degree[i] * degree[j]).sqrt();
                    *a_hat.at_mut(i, j) = S::one() / norm;
                }
            }
        }
        GraphMatrices { a_hat, a_pool }
    }
}

pub const MLP_WIDTH: usize = 32;
pub const GCN_WIDTH: usize = 32;
/// Concentration floor keeping the Dirichlet parameters strictly positive.
pub const ALPHA_FLOOR: f64 = 1e-3;

/// Encoder plus MLP: `relu(A_hat X W) + X W_skip`, neighborhood sum pooling,
/// three dense relu layers, and a linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNet<S> {
    pub input_dim: usize,
    pub mode: OutputMode,
    pub w_gcn: Mat<S>,
    pub w_skip: Mat<S>,
    pub layers: Vec<Dense<S>>,
    pub head: Dense<S>,
}

pub struct ForwardCache<S> {
    x: Mat<S>,
    ax: Mat<S>,
    gcn_pre: Mat<S>,
    pooled_h: Mat<S>,
    z_pre: Vec<Mat<S>>,
    z: Vec<Mat<S>>,
    pooled_out: Option<Mat<S>>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct GraphNetGrads<S> {
    pub w_gcn: Mat<S>,
    pub w_skip: Mat<S>,
    pub layers: Vec<(Mat<S>, Vec<S>)>,
    pub head: (Mat<S>, Vec<S>),
}

impl<S: Scalar> GraphNet<S> {
    pub fn new(input_dim: usize, mode: OutputMode, rng: &mut impl Rng) -> Self {
        let mut make = |fan_in: usize, fan_out: usize| Dense::new(fan_in, fan_out, rng);
        let gcn = make(input_dim, GCN_WIDTH).w;
        let skip = make(input_dim, GCN_WIDTH).w;
        let layers = vec![make(GCN_WIDTH, MLP_WIDTH), make(MLP_WIDTH, MLP_WIDTH), make(MLP_WIDTH, MLP_WIDTH)];
        let head = make(MLP_WIDTH, 1);
        GraphNet { input_dim, mode, w_gcn: gcn, w_skip: skip, layers, head }
    }

    /// Node embeddings before pooling: relu(A_hat X W) + X W_skip.
    pub fn encode(&self, x: &Mat<S>, graph: &GraphMatrices<S>) -> Mat<S> {
        let ax = graph.a_hat.matmul(x);
        let mut h = ax.matmul(&self.w_gcn).relu();
        h.add_assign(&x.matmul(&self.w_skip));
        h
    }

    /// Returns per-node outputs (PerNode) or a single pooled value (Pooled),
    /// along with the cache needed for the backward pass.
    pub fn forward(&self, x: &Mat<S>, graph: &GraphMatrices<S>) -> (Vec<S>, ForwardCache<S>) {
        assert_eq!(x.cols, self.input_dim, "feature width mismatch");
        let ax = graph.a_hat.matmul(x);
        let gcn_pre = ax.matmul(&self.w_gcn);
        let mut h = gcn_pre.relu();
        h.add_assign(&x.matmul(&self.w_skip));
        let pooled_h = graph.a_pool.matmul(&h);

        let mut z_pre = Vec::with_capacity(3);
        let mut z = Vec::with_capacity(3);
        let mut cur = pooled_h.clone();
        for layer in &self.layers {
            let pre = layer.forward(&cur);
            cur = pre.relu();
            z_pre.push(pre);
            z.push(cur.clone());
        }

        let (out, pooled_out) = match self.mode {
            OutputMode::PerNode => {
                let raw = self.head.forward(&cur);
                (raw.data.clone(), None)
            }
            OutputMode::Pooled => {
                let mut pooled = Mat::zeros(1, cur.cols);
                for r in 0..cur.rows {
                    for c in 0..cur.cols {
                        pooled.data[c] += cur.at(r, c);
                    }
                }
                let raw = self.head.forward(&pooled);
                (raw.data.clone(), Some(pooled))
            }
        };
        let cache = ForwardCache { x: x.clone(), ax, gcn_pre, pooled_h, z_pre, z, pooled_out };
        (out, cache)
    }

    /// Backpropagates `d_out` (per node, or length 1 when pooled) into
    /// parameter gradients.
    pub fn backward(&self, cache: &ForwardCache<S>, d_out: &[S], graph: &GraphMatrices<S>) -> GraphNetGrads<S> {
        let nodes = cache.x.rows;
        let (mut d_cur, head_grads) = match self.mode {
            OutputMode::PerNode => {
                assert_eq!(d_out.len(), nodes);
                let d_raw = Mat { rows: nodes, cols: 1, data: d_out.to_vec() };
                let dw = cache.z[2].t_matmul(&d_raw);
                let db = vec![d_out.iter().copied().sum::<S>()];
                (d_raw.matmul_t(&self.head.w), (dw, db))
            }
            OutputMode::Pooled => {
                assert_eq!(d_out.len(), 1);
                let d_raw = Mat { rows: 1, cols: 1, data: d_out.to_vec() };
                let pooled = cache.pooled_out.as_ref().expect("pooled cache");
                let dw = pooled.t_matmul(&d_raw);
                let db = vec![d_out[0]];
                let d_pooled = d_raw.matmul_t(&self.head.w); // 1 x width
                // Sum pooling broadcasts the gradient to every node.
                let mut d = Mat::zeros(nodes, d_pooled.cols);
                for r in 0..nodes {
                    for c in 0..d_pooled.cols {
                        *d.at_mut(r, c) = d_pooled.at(0, c);
                    }
                }
                (d, (dw, db))
            }
        };

        let mut layer_grads: Vec<(Mat<S>, Vec<S>)> = vec![];
        for idx in (0..3).rev() {
            let d_pre = d_cur.relu_backward(&cache.z_pre[idx]);
            let input = if idx == 0 { &cache.pooled_h } else { &cache.z[idx - 1] };
            let dw = input.t_matmul(&d_pre);
            let mut db = vec![S::zero(); d_pre.cols];
            for r in 0..d_pre.rows {
                for c in 0..d_pre.cols {
                    db[c] += d_pre.at(r, c);
                }
            }
            layer_grads.push((dw, db));
            d_cur = d_pre.matmul_t(&self.layers[idx].w);
        }
        layer_grads.reverse();

        // Through pooling: d_h = A_pool' d_pooled_h.
        let d_h = graph.a_pool.t_matmul(&d_cur);
        // Skip projection branch.
        let d_wskip = cache.x.t_matmul(&d_h);
        // GCN branch through the relu.
        let d_gcn_pre = d_h.relu_backward(&cache.gcn_pre);
        let d_wgcn = cache.ax.t_matmul(&d_gcn_pre);

        GraphNetGrads { w_gcn: d_wgcn, w_skip: d_wskip, layers: layer_grads, head: head_grads }
    }

    /// Parameter values flattened in the canonical order.
    pub fn flat_params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.w_gcn.data);
        out.extend_from_slice(&self.w_skip.data);
        for layer in &self.layers {
            out.extend_from_slice(&layer.w.data);
            out.extend_from_slice(&layer.b);
        }
        out.extend_from_slice(&self.head.w.data);
        out.extend_from_slice(&self.head.b);
        out
    }

    pub fn param_count(&self) -> usize {
        let mats = self.w_gcn.data.len()
            + self.w_skip.data.len()
            + self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum::<usize>()
            + self.head.w.data.len()
            + self.head.b.len();
        mats
    }
}

/// Adam state and update for one network.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: usize,
    pub lr: S,
}

impl<S: Scalar> Adam<S> {
    pub fn new(param_count: usize, lr: S) -> Self {
        Adam { m: vec![S::zero(); param_count], v: vec![S::zero(); param_count], t: 0, lr }
    }

    /// One minimization step over a flattened (param, grad) stream.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut S>, grads: impl Iterator<Item = S>)
    where
        S: 'a,
    {
        self.t += 1;
        let b1 = S::cast_f64(0.9);
        let b2 = S::cast_f64(0.999);
        let eps = S::cast_f64(1e-8);
        let t = self.t as i32;
        let corr1 = S::one() - b1.powi(t);
        let corr2 = S::one() - b2.powi(t);
        for (slot, (p, g)) in params.zip(grads).enumerate() {
            let m = &mut self.m[slot];
            *m = b1 * *m + (S::one() - b1) * g;
            let v = &mut self.v[slot];
            *v = b2 * *v + (S::one() - b2) * g * g;
            let mhat = *m / corr1;
            let vhat = *v / corr2;
            *p -= self.lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Flattens a network's parameters in a fixed order.
pub fn flat_params_mut<S: Scalar>(net: &mut GraphNet<S>) -> Vec<*mut S> {
    let mut out: Vec<*mut S> = Vec::with_capacity(net.param_count());
    let push_mat = |m: &mut Mat<S>, out: &mut Vec<*mut S>| {
        for v in m.data.iter_mut() {
            out.push(v as *mut S);
        }
    };
    push_mat(&mut net.w_gcn, &mut out);
    push_mat(&mut net.w_skip, &mut out);
    for layer in net.layers.iter_mut() {
        push_mat(&mut layer.w, &mut out);
        for v in layer.b.iter_mut() {
            out.push(v as *mut S);
        }
    }
    push_mat(&mut net.head.w, &mut out);
    for v in net.head.b.iter_mut() {
        out.push(v as *mut S);
    }
    out
}

/// Flattens gradients in the same order as [`flat_params_mut`].
pub fn flat_grads<S: Scalar>(grads: &GraphNetGrads<S>) -> Vec<S> {
    let mut out = Vec::new();
    out.extend_from_slice(&grads.w_gcn.data);
    out.extend_from_slice(&grads.w_skip.data);
    for (w, b) in &grads.layers {
        out.extend_from_slice(&w.data);
        out.extend_from_slice(b);
    }
    out.extend_from_slice(&grads.head.0.data);
    out.extend_from_slice(&grads.head.1);
    out
}

/// Applies an Adam minimization step to a network from accumulated grads.
pub fn adam_step<S: Scalar>(net: &mut GraphNet<S>, grads: &GraphNetGrads<S>, opt: &mut Adam<S>) {
    let ptrs = flat_params_mut(net);
    let flat = flat_grads(grads);
    assert_eq!(ptrs.len(), flat.len());
    // Pointers originate from disjoint fields of one &mut borrow.
    let iter = ptrs.into_iter().map(|p| unsafe { &mut *p });
    opt.step(iter, flat.into_iter());
}

/// theta' <- tau * theta + (1 - tau) * theta'.
pub fn soft_update<S: Scalar>(target: &mut GraphNet<S>, source: &GraphNet<S>, tau: S) {
    let one_minus = S::one() - tau;
    let src = source.flat_params();
    let tgt = flat_params_mut(target);
    for (t, s) in tgt.into_iter().zip(src) {
        unsafe {
            *t = one_minus * *t + tau * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_graph() -> GraphMatrices<f64> {
        // Two nodes, one directed edge 0 -> 1.
        GraphMatrices::new(2, &[false, true, false, false])
    }

    #[test]
    fn normalization_matches_hand_calculation() {
        let g = tiny_graph();
        // A + I = [[1,1],[0,1]]; degrees (2, 1).
        // a_hat[0][0] = 1/sqrt(2*2) = 0.5, a_hat[0][1] = 1/sqrt(2*1),
        // a_hat[1][1] = 1/sqrt(1*1) = 1.
        assert!((g.a_hat.at(0, 0) - 0.5).abs() < 1e-12);
        assert!((g.a_hat.at(0, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(g.a_hat.at(1, 0), 0.0);
        assert!((g.a_hat.at(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gcn_weights_reduce_to_skip_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net: GraphNet<f64> = GraphNet::new(3, OutputMode::PerNode, &mut rng);
        for v in net.w_gcn.data.iter_mut() {
            *v = 0.0;
        }
        let g = tiny_graph();
        let x = Mat::from_rows(vec![vec![1.0, 2.0, -1.0], vec![0.0, 1.0, 3.0]]);
        let h = net.encode(&x, &g);
        let skip = x.matmul(&net.w_skip);
        for (a, b) in h.data.iter().zip(&skip.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_matches_hand_computed_two_node_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net: GraphNet<f64> = GraphNet::new(1, OutputMode::PerNode, &mut rng);
        let g = tiny_graph();
        let x = Mat::from_rows(vec![vec![2.0], vec![-1.0]]);
        let h = net.encode(&x, &g);
        let w = net.w_gcn.at(0, 0);
        let s = net.w_skip.at(0, 0);
        let ax0 = 0.5 * 2.0 + (1.0 / 2f64.sqrt()) * -1.0;
        let ax1 = -1.0;
        let expect0 = (ax0 * w).max(0.0) + 2.0 * s;
        let expect1 = (ax1 * w).max(0.0) + (-1.0) * s;
        assert!((h.at(0, 0) - expect0).abs() < 1e-12);
        assert!((h.at(1, 0) - expect1).abs() < 1e-12);
    }

    #[test]
    fn permutation_equivariance_of_per_node_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: GraphNet<f64> = GraphNet::new(4, OutputMode::PerNode, &mut rng);
        let n = 5;
        let mut adj = vec![false; n * n];
        adj[0 * n + 1] = true;
        adj[1 * n + 2] = true;
        adj[2 * n + 0] = true;
        adj[3 * n + 4] = true;
        let g = GraphMatrices::new(n, &adj);
        let x = Mat::from_rows(
            (0..n).map(|i| (0..4).map(|j| (i * 4 + j) as f64 * 0.1 - 0.8).collect()).collect(),
        );
        let (out, _) = net.forward(&x, &g);

        // Permute nodes by a fixed permutation.
        let perm = [2usize, 0, 4, 1, 3]; // new index -> old index
        let mut adj_p = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                adj_p[i * n + j] = adj[perm[i] * n + perm[j]];
            }
        }
        let gp = GraphMatrices::new(n, &adj_p);
        let xp = Mat::from_rows((0..n).map(|i| (0..4).map(|j| x.at(perm[i], j)).collect()).collect());
        let (out_p, _) = net.forward(&xp, &gp);
        for i in 0..n {
            assert!((out_p[i] - out[perm[i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_invariance_of_pooled_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net: GraphNet<f64> = GraphNet::new(3, OutputMode::Pooled, &mut rng);
        let n = 4;
        let mut adj = vec![false; n * n];
        adj[0 * n + 1] = true;
        adj[2 * n + 3] = true;
        adj[3 * n + 0] = true;
        let g = GraphMatrices::new(n, &adj);
        let x = Mat::from_rows((0..n).map(|i| vec![i as f64, 1.0 - i as f64, 0.3]).collect());
        let (out, _) = net.forward(&x, &g);

        let perm = [3usize, 1, 0, 2];
        let mut adj_p = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                adj_p[i * n + j] = adj[perm[i] * n + perm[j]];
            }
        }
        let gp = GraphMatrices::new(n, &adj_p);
        let xp = Mat::from_rows((0..n).map(|i| (0..3).map(|j| x.at(perm[i], j)).collect()).collect());
        let (out_p, _) = net.forward(&xp, &gp);
        assert!((out[0] - out_p[0]).abs() < 1e-9);
    }

    /// Central finite differences over every parameter of the net against
    /// the analytic backward pass, for both output modes.
    fn check_gradients(mode: OutputMode) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net: GraphNet<f64> = GraphNet::new(3, mode, &mut rng);
        let n = 3;
        let mut adj = vec![false; n * n];
        adj[0 * n + 1] = true;
        adj[1 * n + 2] = true;
        adj[2 * n + 0] = true;
        let g = GraphMatrices::new(n, &adj);
        let x = Mat::from_rows(vec![
            vec![0.4, -0.2, 0.9],
            vec![1.1, 0.3, -0.5],
            vec![-0.7, 0.8, 0.2],
        ]);
        // Scalar objective: weighted sum of outputs.
        let weights: Vec<f64> = match mode {
            OutputMode::PerNode => vec![0.7, -1.3, 0.4],
            OutputMode::Pooled => vec![1.0],
        };
        let (out, cache) = net.forward(&x, &g);
        assert_eq!(out.len(), weights.len());
        let grads = net.backward(&cache, &weights, &g);
        let analytic = flat_grads(&grads);

        let h = 1e-5;
        let ptrs = flat_params_mut(&mut net);
        for (slot, p) in ptrs.iter().enumerate() {
            let orig = unsafe { **p };
            unsafe { **p = orig + h };
            let (out_p, _) = net_forward_copy(&net, &x, &g);
            unsafe { **p = orig - h };
            let (out_m, _) = net_forward_copy(&net, &x, &g);
            unsafe { **p = orig };
            let f_p: f64 = out_p.iter().zip(&weights).map(|(o, w)| o * w).sum();
            let f_m: f64 = out_m.iter().zip(&weights).map(|(o, w)| o * w).sum();
            let fd = (f_p - f_m) / (2.0 * h);
            let a = analytic[slot];
            let denom = a.abs().max(fd.abs()).max(1e-6);
            assert!(
                ((a - fd) / denom).abs() < 1e-4,
                "param {slot}: analytic {a} vs fd {fd}"
            );
        }
    }

    fn net_forward_copy(net: &GraphNet<f64>, x: &Mat<f64>, g: &GraphMatrices<f64>) -> (Vec<f64>, ()) {
        let (out, _) = net.forward(x, g);
        (out, ())
    }

    #[test]
    fn per_node_gradients_match_finite_differences() {
        check_gradients(OutputMode::PerNode);
    }

    #[test]
    fn pooled_gradients_match_finite_differences() {
        check_gradients(OutputMode::Pooled);
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net: GraphNet<f64> = GraphNet::new(2, OutputMode::Pooled, &mut rng);
        let mut opt = Adam::new(net.param_count(), 1e-2);
        let g = GraphMatrices::new(2, &[false, true, true, false]);
        let x = Mat::from_rows(vec![vec![1.0, 0.5], vec![-0.5, 2.0]]);
        let target = 3.0;
        let mut first_loss = None;
        let mut last_loss = 0.0;
        for _ in 0..200 {
            let (out, cache) = net.forward(&x, &g);
            let err = out[0] - target;
            last_loss = err * err;
            first_loss.get_or_insert(last_loss);
            let grads = net.backward(&cache, &[2.0 * err], &g);
            adam_step(&mut net, &grads, &mut opt);
        }
        assert!(last_loss < first_loss.unwrap() * 1e-4, "loss {last_loss}");
    }
}
