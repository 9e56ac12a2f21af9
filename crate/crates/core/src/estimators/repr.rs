use super::config::EstimatorConfig;
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const INIT_RANGE: f64 = 0.05;
const NORMALIZED_INIT_SCALE: f64 = 10.0;
const MIN_SCALE: f64 = 1e-3;

/// Index space of critic anchors: plain (s, a) pairs or goal-conditioned
/// (s, a, g) triples, flattened row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorSpace {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_goals: Option<usize>,
}

impl AnchorSpace {
    pub fn plain(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            num_goals: None,
        }
    }

    pub fn goal_conditioned(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            num_goals: Some(num_states),
        }
    }

    pub fn num_anchors(&self) -> usize {
        self.num_states * self.num_actions * self.num_goals.unwrap_or(1)
    }

    pub fn anchor(&self, s: usize, a: usize) -> usize {
        debug_assert!(self.num_goals.is_none());
        s * self.num_actions + a
    }

    pub fn goal_anchor(&self, s: usize, a: usize, g: usize) -> usize {
        let goals = self.num_goals.expect("goal-conditioned space");
        (s * self.num_actions + a) * goals + g
    }
}

/// Lookup tables of contrastive representations: `phi` rows index
/// anchors, `psi` rows index future states. The critic value is
/// `scale * <phi[anchor], psi[future]>`; in normalized mode rows are
/// kept at unit L2 norm and `scale` is a learnable inverse temperature.
#[derive(Debug, Clone)]
pub struct RepresentationPair {
    pub space: AnchorSpace,
    pub phi: Array2<f64>,
    pub psi: Array2<f64>,
    pub normalized: bool,
    pub scale: f64,
}

/// Fresh online and target representations, with the target an exact
/// copy of the online table. Future rows start i.i.d. uniform in
/// [-0.05, 0.05]. Anchor rows start at zero in unnormalized mode, so an
/// anchor that never appears in a batch keeps critic value exactly zero
/// instead of a frozen random projection of the learned future rows; in
/// normalized mode rows live on the unit sphere, so anchors start at
/// random unit vectors instead.
pub fn init_representations(
    config: &EstimatorConfig,
    space: AnchorSpace,
    seed: u64,
) -> Result<(RepresentationPair, RepresentationPair)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.repr_dim;
    let mut phi = Array2::<f64>::zeros((space.num_anchors(), d));
    let mut psi = Array2::<f64>::zeros((space.num_states, d));
    if config.normalized {
        for v in phi.iter_mut() {
            *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
        }
    }
    for v in psi.iter_mut() {
        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
    }
    let mut online = RepresentationPair {
        space,
        phi,
        psi,
        normalized: config.normalized,
        scale: if config.normalized {
            NORMALIZED_INIT_SCALE
        } else {
            1.0
        },
    };
    if config.normalized {
        online.renormalize_all();
    }
    let target = online.clone();
    Ok((online, target))
}

/// `F[i][j] = scale * <phi_rows[i], psi_rows[j]>`.
pub fn critic_matrix(
    phi_rows: ArrayView2<f64>,
    psi_rows: ArrayView2<f64>,
    scale: f64,
) -> Result<Array2<f64>> {
    if phi_rows.ncols() != psi_rows.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "phi dim {} vs psi dim {}",
            phi_rows.ncols(),
            psi_rows.ncols()
        )));
    }
    let mut f = phi_rows.dot(&psi_rows.t());
    if scale != 1.0 {
        f *= scale;
    }
    Ok(f)
}

impl RepresentationPair {
    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    /// Stacked phi rows for a slice of anchor indices.
    pub fn gather_phi(&self, anchors: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((anchors.len(), self.dim()));
        for (r, &i) in anchors.iter().enumerate() {
            out.row_mut(r).assign(&self.phi.row(i));
        }
        out
    }

    /// Stacked psi rows for a slice of future-state indices.
    pub fn gather_psi(&self, states: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((states.len(), self.dim()));
        for (r, &i) in states.iter().enumerate() {
            out.row_mut(r).assign(&self.psi.row(i));
        }
        out
    }

    /// Batch critic matrix between anchor indices and future states.
    pub fn critic(&self, anchors: &[usize], futures: &[usize]) -> Array2<f64> {
        critic_matrix(
            self.gather_phi(anchors).view(),
            self.gather_psi(futures).view(),
            self.scale,
        )
        .expect("dimensions agree by construction")
    }

    pub fn critic_value(&self, anchor: usize, future: usize) -> f64 {
        self.scale * self.phi.row(anchor).dot(&self.psi.row(future))
    }

    /// Dense critic values `f[s][a][s_future]` for a plain anchor space.
    pub fn critic_table(&self) -> Array3<f64> {
        assert!(self.space.num_goals.is_none(), "plain anchors expected");
        let (ns, na) = (self.space.num_states, self.space.num_actions);
        let flat = critic_matrix(self.phi.view(), self.psi.view(), self.scale)
            .expect("dimensions agree");
        flat.into_shape_with_order((ns, na, ns))
            .expect("anchor count is ns * na")
    }

    /// Dense critic values `f[s][a][s_future]` for one goal slice of a
    /// goal-conditioned anchor space.
    pub fn critic_table_for_goal(&self, g: usize) -> Array3<f64> {
        let goals = self.space.num_goals.expect("goal-conditioned space");
        assert!(g < goals);
        let (ns, na) = (self.space.num_states, self.space.num_actions);
        let mut out = Array3::zeros((ns, na, ns));
        for s in 0..ns {
            for a in 0..na {
                let anchor = self.space.goal_anchor(s, a, g);
                for f in 0..ns {
                    out[[s, a, f]] = self.critic_value(anchor, f);
                }
            }
        }
        out
    }

    fn renormalize_row(mut row: ndarray::ArrayViewMut1<f64>) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            // A zero row cannot be normalized; reset to a fixed unit vector.
            row.fill(0.0);
            row[0] = 1.0;
        }
    }

    pub fn renormalize_all(&mut self) {
        for row in self.phi.rows_mut() {
            Self::renormalize_row(row);
        }
        for row in self.psi.rows_mut() {
            Self::renormalize_row(row);
        }
    }

    /// One SGD step. In normalized mode the touched rows are projected
    /// back to the unit sphere and the scale parameter is updated.
    pub fn apply_gradient(&mut self, grad: &ReprGradient, learning_rate: f64) {
        for (idx, g) in &grad.phi {
            let mut row = self.phi.row_mut(*idx);
            row.scaled_add(-learning_rate, &g.view());
            if self.normalized {
                Self::renormalize_row(row);
            }
        }
        for (idx, g) in &grad.psi {
            let mut row = self.psi.row_mut(*idx);
            row.scaled_add(-learning_rate, &g.view());
            if self.normalized {
                Self::renormalize_row(row);
            }
        }
        if self.normalized {
            self.scale = (self.scale - learning_rate * grad.scale).max(MIN_SCALE);
        }
    }
}

/// Sparse gradient over representation rows, sorted by row index.
#[derive(Debug, Clone, Default)]
pub struct ReprGradient {
    pub phi: Vec<(usize, Array1<f64>)>,
    pub psi: Vec<(usize, Array1<f64>)>,
    pub scale: f64,
}

impl ReprGradient {
    pub fn phi_row(&self, idx: usize) -> Option<ArrayView1<'_, f64>> {
        self.phi
            .binary_search_by_key(&idx, |(i, _)| *i)
            .ok()
            .map(|p| self.phi[p].1.view())
    }

    pub fn psi_row(&self, idx: usize) -> Option<ArrayView1<'_, f64>> {
        self.psi
            .binary_search_by_key(&idx, |(i, _)| *i)
            .ok()
            .map(|p| self.psi[p].1.view())
    }
}

/// Accumulates batch gradients keyed by row index; deterministic order
/// comes from the ordered map.
#[derive(Debug, Default)]
pub struct GradAccumulator {
    phi: BTreeMap<usize, Array1<f64>>,
    psi: BTreeMap<usize, Array1<f64>>,
    scale: f64,
    dim: usize,
}

impl GradAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            phi: BTreeMap::new(),
            psi: BTreeMap::new(),
            scale: 0.0,
            dim,
        }
    }

    pub fn add_phi(&mut self, idx: usize, contribution: ArrayView1<f64>, coeff: f64) {
        let row = self
            .phi
            .entry(idx)
            .or_insert_with(|| Array1::zeros(self.dim));
        row.scaled_add(coeff, &contribution);
    }

    pub fn add_psi(&mut self, idx: usize, contribution: ArrayView1<f64>, coeff: f64) {
        let row = self
            .psi
            .entry(idx)
            .or_insert_with(|| Array1::zeros(self.dim));
        row.scaled_add(coeff, &contribution);
    }

    pub fn add_scale(&mut self, v: f64) {
        self.scale += v;
    }

    /// Accumulate the chain rule for a batch critic matrix
    /// `F = scale * Phi Psi^T` given `dL/dF`:
    /// phi row gains `scale * sum_j dF[i,j] psi_j`, psi row gains
    /// `scale * sum_i dF[i,j] phi_i`, and scale gains `sum dF . (Phi Psi^T)`.
    pub fn add_critic_grad(
        &mut self,
        reps: &RepresentationPair,
        anchors: &[usize],
        futures: &[usize],
        dloss_df: ArrayView2<f64>,
    ) {
        let scale = reps.scale;
        for (i, &anchor) in anchors.iter().enumerate() {
            for (j, &future) in futures.iter().enumerate() {
                let df = dloss_df[[i, j]];
                if df == 0.0 {
                    continue;
                }
                self.add_phi(anchor, reps.psi.row(future), scale * df);
                self.add_psi(future, reps.phi.row(anchor), scale * df);
                if reps.normalized {
                    self.scale += df * reps.phi.row(anchor).dot(&reps.psi.row(future));
                }
            }
        }
    }

    pub fn finish(self) -> ReprGradient {
        ReprGradient {
            phi: self.phi.into_iter().collect(),
            psi: self.psi.into_iter().collect(),
            scale: self.scale,
        }
    }
}

/// Move `target` toward `online`: `target <- (1 - tau) target + tau online`,
/// re-normalizing rows in normalized mode.
pub fn ema_update(
    target: &mut RepresentationPair,
    online: &RepresentationPair,
    tau: f64,
) -> Result<()> {
    if target.phi.dim() != online.phi.dim() || target.psi.dim() != online.psi.dim() {
        return Err(Error::ShapeMismatch(format!(
            "target {:?}/{:?} vs online {:?}/{:?}",
            target.phi.dim(),
            target.psi.dim(),
            online.phi.dim(),
            online.psi.dim()
        )));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ema tau must lie in (0, 1], got {tau}"
        )));
    }
    target.phi.zip_mut_with(&online.phi, |t, &o| {
        *t = (1.0 - tau) * *t + tau * o;
    });
    target.psi.zip_mut_with(&online.psi, |t, &o| {
        *t = (1.0 - tau) * *t + tau * o;
    });
    target.scale = (1.0 - tau) * target.scale + tau * online.scale;
    if target.normalized {
        target.renormalize_all();
    }
    Ok(())
}

/// Unit-norm check used by tests and debug assertions.
pub fn max_row_norm_error(reps: &RepresentationPair) -> f64 {
    let mut worst: f64 = 0.0;
    for row in reps.phi.axis_iter(Axis(0)).chain(reps.psi.axis_iter(Axis(0))) {
        worst = worst.max((row.dot(&row).sqrt() - 1.0).abs());
    }
    worst
}
