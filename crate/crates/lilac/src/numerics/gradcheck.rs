//! Central finite-difference verification of analytic gradients.
//!
//! Only meaningful in f64; f32 FD quotients drown in rounding error.

use crate::error::{Error, Result};
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::{ParamRef, ParamStore};

/// Outcome of one gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// max over parameters of |analytic - fd| / max(|analytic|, |fd|, 1e-8)
    pub max_rel_err: f64,
    /// Where the maximum occurred: (parameter name, flat element index).
    pub worst: Option<(String, usize)>,
}

/// Core harness: `store_of` exposes the parameter store being checked inside
/// an arbitrary context (a bare store, a model holding one, ...), and `eval`
/// rebuilds the scalar loss from the current parameter values.
///
/// The function must be deterministic; it is evaluated twice up front and a
/// mismatch is a contract error (an FD check of a noisy function is
/// unusable).
pub fn grad_check_with<Ctx, S, F>(
    ctx: &mut Ctx,
    store_of: S,
    mut eval: F,
    eps: f64,
) -> Result<GradCheckReport>
where
    S: Fn(&mut Ctx) -> &mut ParamStore<f64>,
    F: FnMut(&Ctx, &mut Tape<f64>) -> Result<Var>,
{
    let run = |ctx: &Ctx, eval: &mut F| -> Result<(f64, Tape<f64>, Var)> {
        let mut tape = Tape::new();
        let loss = eval(ctx, &mut tape)?;
        if tape.value(loss).len() != 1 {
            return Err(Error::Contract("grad check needs a scalar loss".into()));
        }
        Ok((tape.value(loss)[0], tape, loss))
    };

    let (l1, _, _) = run(ctx, &mut eval)?;
    let (l2, _, _) = run(ctx, &mut eval)?;
    if l1 != l2 {
        return Err(Error::Contract(format!(
            "grad_check: function is not deterministic ({l1} vs {l2})"
        )));
    }

    // Analytic pass with the store marked trainable.
    let tag = store_of(ctx).tag();
    let grads = {
        let mut tape = Tape::new();
        tape.mark_trainable(tag);
        let loss = eval(ctx, &mut tape)?;
        tape.backward(loss)?
    };

    let n_entries = store_of(ctx).len();
    let mut max_rel = 0.0f64;
    let mut worst = None;
    for idx in 0..n_entries {
        let n = store_of(ctx).tensor_at(idx).numel();
        let r = ParamRef { tag, index: idx };
        for i in 0..n {
            let orig = store_of(ctx).tensor_at(idx).data()[i];
            store_of(ctx).tensor_at_mut(idx).data_mut()[i] = orig + eps;
            let (lp, _, _) = run(ctx, &mut eval)?;
            store_of(ctx).tensor_at_mut(idx).data_mut()[i] = orig - eps;
            let (lm, _, _) = run(ctx, &mut eval)?;
            store_of(ctx).tensor_at_mut(idx).data_mut()[i] = orig;

            let fd = (lp - lm) / (2.0 * eps);
            let analytic = grads.get(r).map(|g| g[i]).unwrap_or(0.0);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
                let name = store_of(ctx).name(idx).to_string();
                worst = Some((name, i));
            }
        }
    }
    Ok(GradCheckReport { max_rel_err: max_rel, worst })
}

/// Convenience form over a bare parameter store.
pub fn grad_check<F>(store: &mut ParamStore<f64>, eps: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore<f64>, &mut Tape<f64>) -> Result<Var>,
{
    grad_check_with(store, |s| s, move |s, tape| f(s, tape), eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor;

    #[test]
    fn quadratic_is_exact_to_fd_order() {
        // f(w) = sum(w^2) at w = [1, 2]; FD of a quadratic is exact up to O(eps^2).
        let mut ps = ParamStore::new();
        let w = ps.register("w", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap()).unwrap();
        let report = grad_check(&mut ps, 1e-5, |store, tape| {
            let wv = tape.param(store, w);
            let sq = tape.mul(wv, wv)?;
            Ok(tape.sum_all(sq))
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-8, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn rejects_nondeterministic_function() {
        let mut ps = ParamStore::new();
        let w = ps.register("w", Tensor::from_vec(&[1], vec![1.0]).unwrap()).unwrap();
        let mut calls = 0usize;
        let err = grad_check(&mut ps, 1e-5, move |store, tape| {
            calls += 1;
            let wv = tape.param(store, w);
            let noise = tape.constant(&Tensor::scalar(calls as f64));
            let jittered = tape.mul(wv, noise)?;
            Ok(tape.sum_all(jittered))
        });
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn conv_silu_sum_composite_matches_fd() {
        use crate::numerics::rng::RngKey;
        let mut stream = RngKey::root(99).stream();
        let mut ps = ParamStore::new();
        let x = ps.register("x", Tensor::randn(&[3, 8], 1.0, &mut stream)).unwrap();
        let w = ps.register("w", Tensor::randn(&[2, 3, 3], 0.5, &mut stream)).unwrap();
        let b = ps.register("b", Tensor::randn(&[2], 0.5, &mut stream)).unwrap();
        let report = grad_check(&mut ps, 1e-5, |store, tape| {
            let xv = tape.param(store, x);
            let wv = tape.param(store, w);
            let bv = tape.param(store, b);
            let y = tape.conv1d(xv, wv, bv, 1)?;
            let a = tape.silu(y);
            Ok(tape.sum_all(a))
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-4, "rel err {} at {:?}", report.max_rel_err, report.worst);
    }
}
