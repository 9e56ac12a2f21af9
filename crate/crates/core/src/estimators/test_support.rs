use super::batch::{McBatch, TdBatch};
use super::repr::{ReprGradient, RepresentationPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central finite differences over every row the analytic gradient
/// touches, plus the scale parameter in normalized mode.
pub fn check_gradients(
    base: &RepresentationPair,
    grad: &ReprGradient,
    h: f64,
    tol: f64,
    loss_fn: impl Fn(&RepresentationPair) -> f64,
) {
    let mut checked = 0usize;
    let compare = |analytic: f64, fd: f64, what: &str| {
        let denom = analytic.abs().max(fd.abs()).max(1e-3);
        assert!(
            (analytic - fd).abs() <= tol * denom,
            "{what}: analytic {analytic} vs finite difference {fd}"
        );
    };
    for (idx, row) in &grad.phi {
        for k in 0..row.len() {
            let mut plus = base.clone();
            plus.phi[[*idx, k]] += h;
            let mut minus = base.clone();
            minus.phi[[*idx, k]] -= h;
            let fd = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
            compare(row[k], fd, &format!("phi[{idx}][{k}]"));
            checked += 1;
        }
    }
    for (idx, row) in &grad.psi {
        for k in 0..row.len() {
            let mut plus = base.clone();
            plus.psi[[*idx, k]] += h;
            let mut minus = base.clone();
            minus.psi[[*idx, k]] -= h;
            let fd = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
            compare(row[k], fd, &format!("psi[{idx}][{k}]"));
            checked += 1;
        }
    }
    if base.normalized {
        let mut plus = base.clone();
        plus.scale += h;
        let mut minus = base.clone();
        minus.scale -= h;
        let fd = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
        compare(grad.scale, fd, "scale");
        checked += 1;
    }
    assert!(checked > 0, "gradient was empty");
}

/// Index-valid batch with arbitrary contents; dynamics consistency is
/// irrelevant for derivative checks.
pub fn random_td_batch(num_states: usize, num_actions: usize, n: usize, seed: u64) -> TdBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TdBatch {
        s: (0..n).map(|_| rng.gen_range(0..num_states)).collect(),
        a: (0..n).map(|_| rng.gen_range(0..num_actions)).collect(),
        s_next: (0..n).map(|_| rng.gen_range(0..num_states)).collect(),
        a_next: (0..n).map(|_| rng.gen_range(0..num_actions)).collect(),
        s_future: (0..n).map(|_| rng.gen_range(0..num_states)).collect(),
    }
}

pub fn random_mc_batch(num_states: usize, num_actions: usize, n: usize, seed: u64) -> McBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    McBatch {
        s: (0..n).map(|_| rng.gen_range(0..num_states)).collect(),
        a: (0..n).map(|_| rng.gen_range(0..num_actions)).collect(),
        s_future: (0..n).map(|_| rng.gen_range(0..num_states)).collect(),
    }
}

/// Copy of `reps` with all entries set to zero.
pub fn zeroed(reps: &RepresentationPair) -> RepresentationPair {
    let mut out = reps.clone();
    out.phi.fill(0.0);
    out.psi.fill(0.0);
    out
}

/// Copy of `reps` with every entry redrawn uniformly from
/// [-0.5, 0.5], so derivative checks run at a general position rather
/// than at the zero-anchor initialization.
pub fn randomized(reps: &RepresentationPair, seed: u64) -> RepresentationPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = reps.clone();
    for v in out.phi.iter_mut().chain(out.psi.iter_mut()) {
        *v = rng.gen_range(-0.5..0.5);
    }
    if out.normalized {
        out.renormalize_all();
    }
    out
}
