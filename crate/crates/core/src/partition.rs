//! Layer cells, lexicographic cell labels and co-supervised samples.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gmm::{fit_gmm, Gmm, GmmError, GmmOptions};
use crate::linalg::column_means;
use crate::mlp::{MlpError, MlpModel, OutputLink};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("layer {layer}: {source}")]
    Gmm { layer: usize, source: GmmError },
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error("layer {layer}: K must lie in 1..={n}, got {k}")]
    BadK { layer: usize, k: usize, n: usize },
    #[error("{got} cluster counts given for a network with {expected} hidden layers")]
    LayerCountMismatch { expected: usize, got: usize },
    #[error("layer {layer} clustering has dimension {got}, hidden width is {expected}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("cell {0} has no members")]
    EmptyCell(usize),
    #[error("epsilon must be finite and non-negative, got {0}")]
    BadEpsilon(f64),
}

pub type Result<T> = std::result::Result<T, PartitionError>;

/// One fitted mixture per hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LayerClusterings<T> {
    pub per_layer: Vec<Gmm<T>>,
    pub k_per_layer: Vec<usize>,
}

impl<T: Scalar> LayerClusterings<T> {
    /// Number of possible label sequences, `Π K_l`.
    pub fn n_sequences(&self) -> usize {
        self.k_per_layer.iter().product()
    }

    /// Per-layer MAP labels for every row of `x`.
    pub fn label_sequences(
        &self,
        model: &MlpModel<T>,
        x: ArrayView2<T>,
    ) -> Result<Vec<Vec<usize>>> {
        let hidden = model.hidden_outputs_batch(x)?;
        if hidden.len() != self.per_layer.len() {
            return Err(PartitionError::LayerCountMismatch {
                expected: hidden.len(),
                got: self.per_layer.len(),
            });
        }
        let mut seqs = vec![Vec::with_capacity(hidden.len()); x.nrows()];
        for (l, (z, gmm)) in hidden.iter().zip(&self.per_layer).enumerate() {
            if gmm.dim() != z.ncols() {
                return Err(PartitionError::DimensionMismatch {
                    layer: l,
                    expected: z.ncols(),
                    got: gmm.dim(),
                });
            }
            for (i, row) in z.rows().into_iter().enumerate() {
                let k = gmm
                    .map_assign(row)
                    .map_err(|source| PartitionError::Gmm { layer: l, source })?;
                seqs[i].push(k);
            }
        }
        Ok(seqs)
    }
}

/// Clusters each hidden layer's activations over the training inputs.
/// Layer `l` is fitted with seed `base.seed + l`.
pub fn layer_cells<T: Scalar>(
    model: &MlpModel<T>,
    x: ArrayView2<T>,
    k_per_layer: &[usize],
    base: &GmmOptions,
) -> Result<LayerClusterings<T>> {
    let n = x.nrows();
    if k_per_layer.len() != model.n_hidden() {
        return Err(PartitionError::LayerCountMismatch {
            expected: model.n_hidden(),
            got: k_per_layer.len(),
        });
    }
    for (layer, &k) in k_per_layer.iter().enumerate() {
        if k == 0 || k > n {
            return Err(PartitionError::BadK { layer, k, n });
        }
    }
    let hidden = model.hidden_outputs_batch(x)?;
    let mut per_layer = Vec::with_capacity(hidden.len());
    for (l, z) in hidden.iter().enumerate() {
        let opts = GmmOptions {
            k: k_per_layer[l],
            seed: base.seed.wrapping_add(l as u64),
            ..base.clone()
        };
        let gmm =
            fit_gmm(z.view(), &opts).map_err(|source| PartitionError::Gmm { layer: l, source })?;
        log::debug!(
            "layer {l}: {} components, {} EM iterations, converged {}",
            gmm.k(),
            gmm.diagnostics.n_iter,
            gmm.diagnostics.converged
        );
        per_layer.push(gmm);
    }
    Ok(LayerClusterings {
        per_layer,
        k_per_layer: k_per_layer.to_vec(),
    })
}

/// Occupied cells; compact ids are 0-based and follow the lexicographic
/// order of the label sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellPartition {
    pub cell_of_sample: Vec<usize>,
    pub sequence_of_cell: Vec<Vec<usize>>,
    /// `Π K_l`
    pub n_possible: usize,
}

impl CellPartition {
    pub fn from_sequences(seqs: &[Vec<usize>], n_possible: usize) -> Self {
        let mut distinct: Vec<Vec<usize>> = seqs.to_vec();
        distinct.sort();
        distinct.dedup();
        let cell_of_sample = seqs
            .iter()
            .map(|s| distinct.binary_search(s).expect("sequence present"))
            .collect();
        CellPartition {
            cell_of_sample,
            sequence_of_cell: distinct,
            n_possible,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.sequence_of_cell.len()
    }

    pub fn n_samples(&self) -> usize {
        self.cell_of_sample.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_cells()];
        for &c in &self.cell_of_sample {
            s[c] += 1;
        }
        s
    }

    /// Row indices of each cell, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_cells()];
        for (i, &c) in self.cell_of_sample.iter().enumerate() {
            m[c].push(i);
        }
        m
    }

    /// Compact id of a label sequence, if that cell is occupied.
    pub fn cell_of_sequence(&self, seq: &[usize]) -> Option<usize> {
        self.sequence_of_cell
            .binary_search_by(|s| s.as_slice().cmp(seq))
            .ok()
    }

    /// 1-based rank of a sequence among all `Π K_l` sequences.
    pub fn lexicographic_rank(seq: &[usize], k_per_layer: &[usize]) -> usize {
        seq.iter()
            .zip(k_per_layer)
            .fold(0, |acc, (&s, &k)| acc * k + s)
            + 1
    }
}

pub fn assign_cells<T: Scalar>(
    layers: &LayerClusterings<T>,
    model: &MlpModel<T>,
    x: ArrayView2<T>,
) -> Result<CellPartition> {
    let seqs = layers.label_sequences(model, x)?;
    Ok(CellPartition::from_sequences(&seqs, layers.n_sequences()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoSupervision {
    /// Simulated points per cell.
    pub m: usize,
    /// Noise variance of each coordinate.
    pub epsilon: f64,
    pub seed: u64,
}

/// Original members of a cell plus network-labelled perturbed copies of
/// the cell mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CoSupervisedSet<T> {
    pub cell: usize,
    pub originals_x: Array2<T>,
    pub originals_y: Array1<T>,
    pub simulated_x: Array2<T>,
    pub simulated_y: Array1<T>,
}

impl<T: Scalar> CoSupervisedSet<T> {
    pub fn len(&self) -> usize {
        self.originals_x.nrows() + self.simulated_x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Originals first, then simulated points.
    pub fn combined(&self) -> (Array2<T>, Array1<T>) {
        let x = ndarray::concatenate(Axis(0), &[self.originals_x.view(), self.simulated_x.view()])
            .expect("matching widths");
        let y = ndarray::concatenate(Axis(0), &[self.originals_y.view(), self.simulated_y.view()])
            .expect("vectors");
        (x, y)
    }
}

/// Draws `m` points from `N(x̄, εI)` around the cell mean and labels them
/// with the network. Coordinates flagged in `frozen` stay at the mean.
/// The generator is seeded from `(params.seed, cell)`.
pub fn cosupervise<T: Scalar>(
    cell: usize,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    model: &MlpModel<T>,
    params: &CoSupervision,
    frozen: &[bool],
) -> Result<CoSupervisedSet<T>> {
    if x.nrows() == 0 {
        return Err(PartitionError::EmptyCell(cell));
    }
    if !(params.epsilon >= 0.0) || !params.epsilon.is_finite() {
        return Err(PartitionError::BadEpsilon(params.epsilon));
    }
    let p = x.ncols();
    let mean = column_means(x);
    let sd = T::lit(params.epsilon.sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(cell as u64);
    let mut sim = Array2::<T>::zeros((params.m, p));
    for mut row in sim.rows_mut() {
        for j in 0..p {
            let noise = if frozen.get(j).copied().unwrap_or(false) {
                T::zero()
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * T::lit(z)
            };
            row[j] = mean[j] + noise;
        }
    }
    let raw = if params.m > 0 {
        model.predict_batch(sim.view())?
    } else {
        Array1::zeros(0)
    };
    let labels = match model.output_link {
        OutputLink::Linear => raw,
        OutputLink::Sigmoid => raw.mapv(|p| {
            if p >= T::lit(0.5) {
                T::one()
            } else {
                T::zero()
            }
        }),
    };
    Ok(CoSupervisedSet {
        cell,
        originals_x: x.to_owned(),
        originals_y: y.to_owned(),
        simulated_x: sim,
        simulated_y: labels,
    })
}

/// Co-supervised sets for every occupied cell, in compact-id order.
pub fn cosupervise_all<T: Scalar>(
    partition: &CellPartition,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    model: &MlpModel<T>,
    params: &CoSupervision,
    frozen: &[bool],
) -> Result<Vec<CoSupervisedSet<T>>> {
    partition
        .members()
        .iter()
        .enumerate()
        .map(|(c, rows)| {
            let xs = x.select(Axis(0), rows);
            let ys = y.select(Axis(0), rows);
            cosupervise(c, xs.view(), ys.view(), model, params, frozen)
        })
        .collect()
}
