use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::system::PolySystem;
use crate::tensor::{norm_inf, Tensor};

/// Moves the equilibrium `a` of `x+ = Σ A_m x^{m-1} + b` to the origin.
///
/// Returns a system without constant term such that
/// `evaluate(shifted, y) = evaluate(sys, y + a) - a`. Each `A_m (y + a)^{m-1}`
/// is expanded slot by slot: every subset `S` of head slots keeps `y` in the
/// slots of `S` and contracts `a` into the others, contributing to the tensor
/// of order `|S| + 1`. The `|S| = 0` terms together with `b - a` sum to the
/// fixed-point residual and are dropped.
pub fn shift_equilibrium(sys: &PolySystem, a: &[f64], tol: f64) -> Result<PolySystem> {
    let n = sys.dim();
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    let image = sys.evaluate(a)?;
    let residual = norm_inf(&image.iter().zip(a).map(|(f, x)| f - x).collect::<Vec<_>>());
    if !(residual < tol) {
        return Err(Error::NotEquilibrium { residual, tol });
    }

    let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for t in sys.tensors() {
        let order = t.order();
        acc.entry(order).or_insert_with(|| vec![0.0; t.len()]);
        let heads = order - 1;
        for (flat, &v) in t.data().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let idx = t.multi_index(flat);
            for mask in 1u32..(1 << heads) {
                let mut weight = v;
                let mut target = idx[0];
                for slot in 0..heads {
                    if mask & (1 << slot) != 0 {
                        target = target * n + idx[slot + 1];
                    } else {
                        weight *= a[idx[slot + 1]];
                    }
                }
                if weight == 0.0 {
                    continue;
                }
                let kept = mask.count_ones() as usize;
                let len = n.pow(kept as u32 + 1);
                acc.entry(kept + 1).or_insert_with(|| vec![0.0; len])[target] += weight;
            }
        }
    }

    let tensors = acc
        .into_iter()
        .map(|(order, data)| Tensor::new(order, n, data))
        .collect::<Result<Vec<_>>>()?;
    PolySystem::new(n, tensors, None)
}
