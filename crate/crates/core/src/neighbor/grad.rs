//! Analytic first and second order derivatives of pair distances.

use super::NeighborList;
use crate::error::{Error, Result};
use crate::geometry::{dot, scale, sub, Vec3};

fn check_len(list: &NeighborList, d_grad: &[f64]) -> Result<()> {
    if d_grad.len() != list.capacity() {
        return Err(Error::LengthMismatch {
            what: "distance gradient",
            expected: list.capacity(),
            found: d_grad.len(),
        });
    }
    Ok(())
}

/// Unit vector of a valid non-loop pair; errors on zero distance.
#[inline]
fn unit(list: &NeighborList, k: usize, i: usize, j: usize) -> Result<Vec3> {
    let d = list.distances[k];
    if d == 0.0 {
        return Err(Error::SingularPair(i, j));
    }
    Ok(scale(list.deltas[k], 1.0 / d))
}

/// Pulls per-pair distance gradients back to positions:
/// `sum_k d_grad[k] * ∂d_k/∂r`. Sentinel slots and self-loops contribute
/// nothing.
pub fn distance_pullback(list: &NeighborList, d_grad: &[f64]) -> Result<Vec<Vec3>> {
    check_len(list, d_grad)?;
    let mut grad = vec![[0.0; 3]; list.n_atoms()];
    for (k, i, j) in list.valid_pairs() {
        if i == j {
            continue;
        }
        let g = d_grad[k];
        if g == 0.0 && list.distances[k] != 0.0 {
            continue;
        }
        let u = unit(list, k, i, j)?;
        for c in 0..3 {
            grad[i][c] += g * u[c];
            grad[j][c] -= g * u[c];
        }
    }
    Ok(grad)
}

/// Directional derivative of [`distance_pullback`] along `tangent` with
/// `d_grad` held fixed, using the pair Hessian `(I - u uᵀ)/d`. Also returns
/// the tangent of each distance, `u·(t_i - t_j)`.
pub fn distance_pullback_second(
    list: &NeighborList,
    d_grad: &[f64],
    tangent: &[Vec3],
) -> Result<(Vec<Vec3>, Vec<f64>)> {
    check_len(list, d_grad)?;
    if tangent.len() != list.n_atoms() {
        return Err(Error::LengthMismatch {
            what: "position tangent",
            expected: list.n_atoms(),
            found: tangent.len(),
        });
    }
    let mut out = vec![[0.0; 3]; list.n_atoms()];
    let mut d_tangent = vec![0.0; list.capacity()];
    for (k, i, j) in list.valid_pairs() {
        if i == j {
            continue;
        }
        let u = unit(list, k, i, j)?;
        let t = sub(tangent[i], tangent[j]);
        let ut = dot(u, t);
        d_tangent[k] = ut;
        let g = d_grad[k] / list.distances[k];
        for c in 0..3 {
            let h = g * (t[c] - u[c] * ut);
            out[i][c] += h;
            out[j][c] -= h;
        }
    }
    Ok((out, d_tangent))
}
