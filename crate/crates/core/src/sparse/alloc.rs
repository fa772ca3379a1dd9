use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerAllocation {
    pub sparsity: f64,
    pub connections: usize,
}

/// Uniform sparsity over every layer except (optionally) the output layer,
/// chosen so the whole network keeps `floor((1 - target) * total)` weights.
///
/// Shapes are `[out x in]` weight matrices, input layer first. Per-layer
/// connection counts are rounded by largest remainder so they sum exactly
/// to the budget.
pub fn uniform_allocation(
    target: f64,
    shapes: &[(usize, usize)],
    dense_output: bool,
) -> Result<Vec<LayerAllocation>> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::config(format!(
            "global sparsity must be in [0, 1), got {target}"
        )));
    }
    if shapes.is_empty() {
        return Err(Error::config("network has no layers"));
    }
    let sizes: Vec<usize> = shapes.iter().map(|&(o, i)| o * i).collect();
    let total: usize = sizes.iter().sum();
    // The epsilon absorbs representation error such as (1 - 0.9) * 1000 = 99.999...
    let budget = ((1.0 - target) * total as f64 + 1e-6).floor() as usize;

    let n_sparse = if dense_output { sizes.len() - 1 } else { sizes.len() };
    let dense_weights: usize = sizes[n_sparse..].iter().sum();
    if dense_weights > budget {
        return Err(Error::config(format!(
            "global sparsity {target} is infeasible: the dense output layer alone has \
             {dense_weights} weights but the budget is {budget}"
        )));
    }
    let sparse_total: usize = sizes[..n_sparse].iter().sum();
    let sparse_budget = budget - dense_weights;

    let mut counts = vec![0usize; sizes.len()];
    counts[n_sparse..].copy_from_slice(&sizes[n_sparse..]);
    if sparse_total > 0 {
        let density = sparse_budget as f64 / sparse_total as f64;
        let mut remainders = Vec::with_capacity(n_sparse);
        for (i, &size) in sizes[..n_sparse].iter().enumerate() {
            let exact = density * size as f64;
            let base = (exact.floor() as usize).min(size);
            counts[i] = base;
            remainders.push((exact - base as f64, i));
        }
        let mut left = sparse_budget - counts[..n_sparse].iter().sum::<usize>();
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in remainders.iter().cycle() {
            if left == 0 {
                break;
            }
            if counts[i] < sizes[i] {
                counts[i] += 1;
                left -= 1;
            }
        }
    }

    Ok(counts
        .iter()
        .zip(&sizes)
        .map(|(&c, &s)| LayerAllocation {
            sparsity: if s == 0 { 0.0 } else { 1.0 - c as f64 / s as f64 },
            connections: c,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn actor_shapes(d_in: usize, hidden: usize, out: usize) -> Vec<(usize, usize)> {
        vec![(hidden, d_in), (hidden, hidden), (out, hidden)]
    }

    #[test]
    fn zero_target_is_dense() {
        let alloc = uniform_allocation(0.0, &actor_shapes(170, 256, 6), true).unwrap();
        assert!(alloc.iter().all(|a| a.sparsity == 0.0));
    }

    #[test]
    fn table_parameter_counts() {
        // Humanoid-shaped (d_ene = 3760) and HalfCheetah-shaped (d_ene = 170)
        // TD3 actors.
        let cases = [
            (3760, 17, 0.80, 206_489),
            (3760, 17, 0.95, 51_622),
            (170, 6, 0.80, 22_118),
            (170, 6, 0.95, 5_529),
            (110, 3, 0.80, 18_892),
            (110, 3, 0.95, 4_723),
        ];
        for (d, a, s, expected) in cases {
            let alloc = uniform_allocation(s, &actor_shapes(d, 256, a), true).unwrap();
            let n: usize = alloc.iter().map(|l| l.connections).sum();
            assert_eq!(n, expected, "d={d} s={s}");
            assert_eq!(alloc[2].sparsity, 0.0);
            assert!((alloc[0].sparsity - alloc[1].sparsity).abs() < 1e-4);
        }
    }

    #[test]
    fn two_headed_output_caps_sparsity() {
        // A two-headed actor on d_ene = 170, 6 actions: the 3072 output weights
        // exceed 2% of 112,128 but fit in 3%.
        let shapes = actor_shapes(170, 256, 12);
        assert!(matches!(
            uniform_allocation(0.98, &shapes, true),
            Err(Error::Config(_))
        ));
        assert!(uniform_allocation(0.97, &shapes, true).is_ok());
    }

    proptest! {
        #[test]
        fn reconstructed_sparsity_matches_target(
            d_in in 1usize..400,
            hidden in 1usize..64,
            out in 1usize..8,
            target in 0.0f64..0.99,
        ) {
            let shapes = actor_shapes(d_in, hidden, out);
            let total: usize = shapes.iter().map(|&(o, i)| o * i).sum();
            match uniform_allocation(target, &shapes, true) {
                Ok(alloc) => {
                    let kept: usize = alloc.iter().map(|a| a.connections).sum();
                    let achieved = 1.0 - kept as f64 / total as f64;
                    prop_assert!((achieved - target).abs() <= 1.0 / total as f64 + 1e-9);
                    prop_assert_eq!(alloc[2].connections, out * hidden);
                    for (a, &(o, i)) in alloc.iter().zip(&shapes) {
                        prop_assert!(a.connections <= o * i);
                    }
                }
                Err(_) => {
                    let budget = ((1.0 - target) * total as f64 + 1e-6).floor() as usize;
                    prop_assert!(out * hidden > budget);
                }
            }
        }
    }
}
