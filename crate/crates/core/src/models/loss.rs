//! Inner-product decoder and the two terms of the training objective.

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Logistic function, evaluated without overflow for either sign.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `Â[i][j] = sigmoid(z_i · z_j)`. Dense `n × n`; meant for small graphs and
/// inspection, training never materializes it.
pub fn decode_inner_product(z: &DenseMatrix) -> DenseMatrix {
    let n = z.n_rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let p = sigmoid(dot(z.row(i), z.row(j)));
            out.set(i, j, p);
            out.set(j, i, p);
        }
    }
    out
}

/// Positive/negative pair weights of the reconstruction loss.
///
/// The target is `A_train + I`. With `nnz` positives among `n²` pairs the
/// loss is `norm/n² · Σ w_ij · bce_ij`, `w = pos_weight` on positives,
/// `pos_weight = (n² − nnz)/nnz` and `norm = n²/(2(n² − nnz))`. Folding the
/// constants gives per-pair coefficients `1/(2·nnz)` for positives and
/// `1/(2·(n² − nnz))` for negatives, which stays finite when there are no
/// negatives at all (the negative sum is then empty).
#[derive(Clone, Debug)]
pub struct ReconstructionTarget<'a> {
    adjacency: &'a SparseMatrix,
    pub pos_coeff: f64,
    pub neg_coeff: f64,
}

impl<'a> ReconstructionTarget<'a> {
    pub fn new(a_train: &'a SparseMatrix) -> Result<Self> {
        if !a_train.is_square() {
            return Err(Error::shape("reconstruction target", "adjacency not square"));
        }
        let n = a_train.n_rows();
        if (0..n).any(|i| a_train.get(i, i) != 0.0) {
            return Err(Error::ContractViolation(
                "training adjacency must not store self-loops".into(),
            ));
        }
        let pairs = (n * n) as f64;
        let nnz = (a_train.nnz() + n) as f64;
        if nnz == 0.0 {
            return Err(Error::DegenerateGraph(
                "reconstruction target has no positive entries".into(),
            ));
        }
        let negatives = pairs - nnz;
        Ok(Self {
            adjacency: a_train,
            pos_coeff: 1.0 / (2.0 * nnz),
            neg_coeff: if negatives > 0.0 { 1.0 / (2.0 * negatives) } else { 0.0 },
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.n_rows()
    }

    /// `pos_weight` and `norm` in their textbook form, for reporting.
    pub fn pos_weight_and_norm(&self) -> (f64, f64) {
        let n = self.num_nodes() as f64;
        let nnz = (self.adjacency.nnz() + self.num_nodes()) as f64;
        let neg = n * n - nnz;
        (neg / nnz, n * n / (2.0 * neg))
    }
}

/// Stable `-[t·log σ(x) + (1−t)·log(1−σ(x))]`, i.e.
/// `max(x,0) − x·t + log(1 + exp(−|x|))`, together with `σ(x)`.
#[inline]
fn bce_with_logits(x: f64, positive: bool) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let softplus_tail = e.ln_1p();
    let t = if positive { 1.0 } else { 0.0 };
    let loss = x.max(0.0) - x * t + softplus_tail;
    let s = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (loss, s)
}

const NEG_TAIL_BATCH: usize = 32;

fn check_rows(z: &DenseMatrix, target: &ReconstructionTarget<'_>) -> Result<()> {
    if z.n_rows() != target.num_nodes() {
        return Err(Error::shape(
            "reconstruction_loss",
            format!(
                "z has {} rows, adjacency is {}x{}",
                z.n_rows(),
                target.num_nodes(),
                target.num_nodes()
            ),
        ));
    }
    Ok(())
}

#[inline]
fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Weighted cross-entropy of `sigmoid(z_i · z_j)` against `A_train + I` over all `n²` pairs.
pub fn reconstruction_loss(z: &DenseMatrix, a_train: &SparseMatrix) -> Result<f64> {
    let target = ReconstructionTarget::new(a_train)?;
    Ok(reconstruction_loss_and_grad(z, &target, false)?.0)
}

/// Loss and, when `with_grad` is set, `∂loss/∂z`.
///
/// Logits are symmetric, so each unordered pair is evaluated once: an
/// off-diagonal pair contributes twice to the loss and `2·g·z_j` / `2·g·z_i`
/// to the gradients of its two endpoints. Work is done a row at a time over
/// contiguous slices of `z`.
pub fn reconstruction_loss_and_grad(
    z: &DenseMatrix,
    target: &ReconstructionTarget<'_>,
    with_grad: bool,
) -> Result<(f64, Option<DenseMatrix>)> {
    check_rows(z, target)?;
    let (n, d) = z.shape();
    let zs = z.as_slice();
    let mut grad = with_grad.then(|| vec![0.0; n * d]);
    let mut coeff = vec![0.0; n];
    let (mut pos_sum, mut neg_sum) = (0.0, 0.0);
    for i in 0..n {
        let zi = &zs[i * d..(i + 1) * d];
        // diagonal pair, always positive
        let x = dot(zi, zi);
        let (l, sig) = bce_with_logits(x, true);
        pos_sum += l;
        let g_diag = 2.0 * target.pos_coeff * (sig - 1.0);

        let neighbours = target.adjacency.row_indices(i);
        let mut next = neighbours.partition_point(|&c| c <= i);
        let (mut row_pos, mut row_neg) = (0.0, 0.0);
        // Negative tails log(1 + e) are summed as the log of a running
        // product, one `ln` per NEG_TAIL_BATCH factors in (1, 2].
        let (mut tail_prod, mut tail_count) = (1.0f64, 0);
        for j in i + 1..n {
            let x = dot(zi, &zs[j * d..(j + 1) * d]);
            let positive = next < neighbours.len() && neighbours[next] == j;
            if positive {
                next += 1;
                let (l, sig) = bce_with_logits(x, true);
                row_pos += l;
                coeff[j] = 2.0 * target.pos_coeff * (sig - 1.0);
            } else {
                let e = (-x.abs()).exp();
                row_neg += x.max(0.0);
                tail_prod *= 1.0 + e;
                tail_count += 1;
                if tail_count == NEG_TAIL_BATCH {
                    row_neg += tail_prod.ln();
                    tail_prod = 1.0;
                    tail_count = 0;
                }
                let sig = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                coeff[j] = 2.0 * target.neg_coeff * sig;
            }
        }
        row_neg += tail_prod.ln();
        pos_sum += 2.0 * row_pos;
        neg_sum += 2.0 * row_neg;

        if let Some(g) = grad.as_mut() {
            let (head, tail) = g.split_at_mut((i + 1) * d);
            let gi = &mut head[i * d..];
            axpy(gi, g_diag, zi);
            for (j, gj) in (i + 1..n).zip(tail.chunks_exact_mut(d)) {
                let c = coeff[j];
                axpy(gi, c, &zs[j * d..(j + 1) * d]);
                axpy(gj, c, zi);
            }
        }
    }
    let loss = target.pos_coeff * pos_sum + target.neg_coeff * neg_sum;
    if !loss.is_finite() {
        return Err(Error::NumericFailure("reconstruction loss is not finite".into()));
    }
    let grad = grad.map(|g| DenseMatrix::from_vec(n, d, g)).transpose()?;
    Ok((loss, grad))
}

fn check_same_shape(mu: &DenseMatrix, log_sigma: &DenseMatrix) -> Result<()> {
    if mu.shape() != log_sigma.shape() {
        return Err(Error::shape(
            "kl_divergence",
            format!("{:?} vs {:?}", mu.shape(), log_sigma.shape()),
        ));
    }
    Ok(())
}

/// `−1/(2n) · Σ (1 + 2·log_sigma − mu² − exp(2·log_sigma))` with `n` the node count.
pub fn kl_divergence(mu: &DenseMatrix, log_sigma: &DenseMatrix) -> Result<f64> {
    check_same_shape(mu, log_sigma)?;
    let n = mu.n_rows() as f64;
    let sum: f64 = mu
        .as_slice()
        .iter()
        .zip(log_sigma.as_slice())
        .map(|(m, ls)| 1.0 + 2.0 * ls - m * m - (2.0 * ls).exp())
        .sum();
    Ok(-sum / (2.0 * n))
}

/// `(∂KL/∂mu, ∂KL/∂log_sigma) = (mu/n, (exp(2·log_sigma) − 1)/n)`.
pub fn kl_grad(mu: &DenseMatrix, log_sigma: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    check_same_shape(mu, log_sigma)?;
    let n = mu.n_rows() as f64;
    Ok((
        mu.map(|m| m / n),
        log_sigma.map(|ls| ((2.0 * ls).exp() - 1.0) / n),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{adjacency_from_edges, GraphDataset};
    use std::f64::consts::LN_2;

    fn adjacency(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        adjacency_from_edges(&GraphDataset::new("t", n, edges.iter().copied(), None).unwrap())
            .unwrap()
    }

    #[test]
    fn decoder_examples() {
        let a = decode_inner_product(&DenseMatrix::zeros(3, 2));
        assert!(a.as_slice().iter().all(|&p| p == 0.5));

        let z = DenseMatrix::identity(3);
        let a = decode_inner_product(&z);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { sigmoid(1.0) } else { 0.5 };
                assert_eq!(a.get(i, j), want);
            }
        }
        assert!((sigmoid(1.0) - 0.731).abs() < 1e-3);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) > -1e-300 && sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(4.0) - 0.9820).abs() < 1e-4);
    }

    #[test]
    fn zero_latents_hit_closed_form() {
        let a = adjacency(5, &[(0, 1), (1, 2), (3, 4)]);
        let n2 = 25.0;
        let nnz = (a.nnz() + 5) as f64;
        let pos_weight = (n2 - nnz) / nnz;
        let norm = n2 / (2.0 * (n2 - nnz));
        let want = norm * (pos_weight * nnz + (n2 - nnz)) * LN_2 / n2;
        let got = reconstruction_loss(&DenseMatrix::zeros(5, 3), &a).unwrap();
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        assert!((got - LN_2).abs() < 1e-15);
    }

    #[test]
    fn textbook_weights_fold_to_coefficients() {
        let a = adjacency(6, &[(0, 1), (2, 5)]);
        let t = ReconstructionTarget::new(&a).unwrap();
        let (pw, norm) = t.pos_weight_and_norm();
        assert!((norm * pw / 36.0 - t.pos_coeff).abs() < 1e-16);
        assert!((norm / 36.0 - t.neg_coeff).abs() < 1e-16);
    }

    #[test]
    fn two_node_toy_by_enumeration() {
        // A + I is all ones: 4 positive pairs, no negatives.
        let a = adjacency(2, &[(0, 1)]);
        let z = DenseMatrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap();
        let logit = |i: usize, j: usize| dot(z.row(i), z.row(j));
        let mut want = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                want += -sigmoid(logit(i, j)).ln() / (2.0 * 4.0);
            }
        }
        let got = reconstruction_loss(&z, &a).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        // z = 0 on the toy: ln2 / 2
        let zero = reconstruction_loss(&DenseMatrix::zeros(2, 2), &a).unwrap();
        assert!((zero - LN_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_logits_give_tiny_loss() {
        // two components; same-component logits are +72, cross-component -72
        let a = adjacency(4, &[(0, 1), (2, 3)]);
        let z = DenseMatrix::from_rows(&[
            vec![6.0, 6.0],
            vec![6.0, 6.0],
            vec![-6.0, -6.0],
            vec![-6.0, -6.0],
        ])
        .unwrap();
        let loss = reconstruction_loss(&z, &a).unwrap();
        assert!(loss < 1e-3, "{loss}");
    }

    #[test]
    fn loss_is_finite_for_extreme_logits() {
        let a = adjacency(3, &[(0, 1)]);
        let z = DenseMatrix::from_rows(&[vec![1e3], vec![-1e3], vec![1e3]]).unwrap();
        let (loss, grad) =
            reconstruction_loss_and_grad(&z, &ReconstructionTarget::new(&a).unwrap(), true).unwrap();
        assert!(loss.is_finite() && loss >= 0.0);
        assert!(grad.unwrap().is_finite());
    }

    #[test]
    fn shape_and_degenerate_errors() {
        let a = adjacency(3, &[(0, 1)]);
        assert!(reconstruction_loss(&DenseMatrix::zeros(2, 2), &a).is_err());
        let empty = SparseMatrix::from_triplets(0, 0, &[]).unwrap();
        assert!(matches!(
            reconstruction_loss(&DenseMatrix::zeros(0, 2), &empty),
            Err(Error::DegenerateGraph(_))
        ));
    }

    #[test]
    fn kl_examples() {
        let z = DenseMatrix::zeros(4, 3);
        assert_eq!(kl_divergence(&z, &z).unwrap(), 0.0);
        let one = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let zero = DenseMatrix::zeros(1, 1);
        assert_eq!(kl_divergence(&one, &zero).unwrap(), 0.5);
        assert!(kl_divergence(&one, &z).is_err());
    }

    #[test]
    fn kl_matches_scalar_oracle() {
        let mu = DenseMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.13 - 0.6);
        let ls = DenseMatrix::from_fn(5, 3, |i, j| ((i * 5 + j * 2) % 7) as f64 * 0.09 - 0.3);
        let mut oracle = 0.0;
        for i in 0..5 {
            for j in 0..3 {
                let (m, s) = (mu.get(i, j), ls.get(i, j).exp());
                // KL(N(m, s²) || N(0, 1)) per coordinate, averaged over nodes
                oracle += (s * s + m * m - 1.0 - (s * s).ln()) / 2.0;
            }
        }
        oracle /= 5.0;
        assert!((kl_divergence(&mu, &ls).unwrap() - oracle).abs() < 1e-12);
    }
}
