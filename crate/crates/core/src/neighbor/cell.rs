use rayon::prelude::*;

use super::{in_range, Found, NeighborSpec};
use crate::geometry::{norm, sub};
use crate::system::System;

const CHUNK: usize = 64;

/// Upper bound on grid cells relative to the atom count, so sparse systems
/// do not allocate huge offset tables. Cells only grow when capped.
const MAX_CELLS_PER_ATOM: usize = 2;

/// Atoms sorted by cell id with per-cell start offsets.
pub(crate) struct CellGrid {
    dims: [usize; 3],
    periodic: bool,
    cell_of: Vec<[usize; 3]>,
    sorted: Vec<u32>,
    starts: Vec<usize>,
}

impl CellGrid {
    /// Bins the atoms. Fails when a periodic dimension would hold fewer than
    /// three cells, in which case the caller falls back to brute force.
    pub(crate) fn new(system: &System, cutoff: f64) -> Result<Self, String> {
        let n = system.len();
        let box_ = system.cell();
        let positions = system.positions();
        let max_cells = (MAX_CELLS_PER_ATOM * n).max(27);

        let (dims, origin, edge, periodic) = if box_.is_periodic() {
            let widths = box_.perpendicular_widths();
            let mut dims = widths.map(|w| ((w / cutoff).floor() as usize).max(1));
            cap_cells(&mut dims, max_cells, 3);
            if dims.iter().any(|&d| d < 3) {
                return Err(format!(
                    "fewer than 3 cells along a periodic dimension: {dims:?}"
                ));
            }
            (dims, [0.0; 3], [1.0; 3], true)
        } else {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in positions {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let origin = lo.map(|v| v - cutoff);
            let extent = [0, 1, 2].map(|k| hi[k] - lo[k] + 2.0 * cutoff);
            let mut dims = extent.map(|e| ((e / cutoff).floor() as usize).max(1));
            cap_cells(&mut dims, max_cells, 1);
            let edge = [0, 1, 2].map(|k| extent[k] / dims[k] as f64);
            (dims, origin, edge, false)
        };

        let cell_of: Vec<[usize; 3]> = positions
            .iter()
            .map(|&p| {
                if periodic {
                    let s = box_.fractional(p);
                    [0, 1, 2].map(|k| {
                        let f = s[k] - s[k].floor();
                        ((f * dims[k] as f64) as usize).min(dims[k] - 1)
                    })
                } else {
                    [0, 1, 2].map(|k| {
                        (((p[k] - origin[k]) / edge[k]) as usize).min(dims[k] - 1)
                    })
                }
            })
            .collect();

        let n_cells = dims[0] * dims[1] * dims[2];
        let flat = |c: [usize; 3]| (c[0] * dims[1] + c[1]) * dims[2] + c[2];
        let ids: Vec<usize> = cell_of.iter().map(|&c| flat(c)).collect();
        let mut sorted: Vec<u32> = (0..n as u32).collect();
        sorted.sort_unstable_by_key(|&i| (ids[i as usize], i));
        let mut starts = vec![0usize; n_cells + 1];
        for &id in &ids {
            starts[id + 1] += 1;
        }
        for c in 0..n_cells {
            starts[c + 1] += starts[c];
        }

        Ok(CellGrid {
            dims,
            periodic,
            cell_of,
            sorted,
            starts,
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    /// Flat ids of the (up to 27) cells around `c`, without duplicates.
    fn neighborhood(&self, c: [usize; 3], out: &mut Vec<usize>) {
        out.clear();
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                for dz in -1i64..=1 {
                    let mut cc = [0usize; 3];
                    let mut inside = true;
                    for (k, off) in [dx, dy, dz].into_iter().enumerate() {
                        let dim = self.dims[k] as i64;
                        let v = c[k] as i64 + off;
                        if self.periodic {
                            cc[k] = v.rem_euclid(dim) as usize;
                        } else if v < 0 || v >= dim {
                            inside = false;
                        } else {
                            cc[k] = v as usize;
                        }
                    }
                    if inside {
                        out.push(self.flat(cc));
                    }
                }
            }
        }
    }

    pub(crate) fn search(&self, system: &System, spec: &NeighborSpec) -> Vec<Found> {
        let positions = system.positions();
        let batch = system.batch();
        let box_ = system.cell();
        let (lower, upper) = (spec.cutoff_lower, spec.cutoff_upper);

        let chunks: Vec<Vec<Found>> = (0..system.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|atoms| {
                let mut out = Vec::new();
                let mut cells = Vec::with_capacity(27);
                for &i in atoms {
                    let ri = positions[i];
                    let bi = batch[i];
                    self.neighborhood(self.cell_of[i], &mut cells);
                    for &c in &cells {
                        for &j in &self.sorted[self.starts[c]..self.starts[c + 1]] {
                            let j = j as usize;
                            if j <= i || batch[j] != bi {
                                continue;
                            }
                            let delta = box_.reduce(sub(ri, positions[j]));
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
                }
                out
            })
            .collect();
        chunks.concat()
    }
}

/// Shrinks the largest grid dimensions until the cell count fits.
fn cap_cells(dims: &mut [usize; 3], max_cells: usize, floor: usize) {
    while dims[0] * dims[1] * dims[2] > max_cells {
        let k = (0..3).max_by_key(|&k| dims[k]).unwrap();
        if dims[k] <= floor {
            break;
        }
        dims[k] -= 1;
    }
}
