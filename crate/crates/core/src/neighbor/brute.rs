use rayon::prelude::*;

use super::{in_range, Found, NeighborSpec};
use crate::geometry::{norm, sub};
use crate::system::System;

const CHUNK: usize = 64;

/// Checks every pair inside each sample, parallel over the first index.
pub(crate) fn search(system: &System, spec: &NeighborSpec) -> Vec<Found> {
    let positions = system.positions();
    let cell = system.cell();
    let ranges = system.sample_ranges();
    let mut sample_end = vec![0usize; system.len()];
    for &(start, end) in &ranges {
        sample_end[start..end].fill(end);
    }
    let (lower, upper) = (spec.cutoff_lower, spec.cutoff_upper);

    let chunks: Vec<Vec<Found>> = (0..system.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|atoms| {
            let mut out = Vec::new();
            for &i in atoms {
                let ri = positions[i];
                for j in i + 1..sample_end[i] {
                    let delta = cell.reduce(sub(ri, positions[j]));
                    let d = norm(delta);
                    if in_range(d, lower, upper) {
                        out.push(Found {
                            i: i as u32,
                            j: j as u32,
                            delta,
                            distance: d,
                        });
                    }
                }
            }
            out
        })
        .collect();
    chunks.concat()
}
