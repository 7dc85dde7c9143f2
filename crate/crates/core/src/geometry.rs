//! Small fixed-size vector helpers and the periodic simulation box.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxKind {
    None,
    Orthorhombic,
    Triclinic,
}

/// Simulation cell. Rows of `vectors` are the lattice vectors a, b, c.
///
/// Triclinic cells are kept in reduced (lower-triangular) form so that the
/// minimum image can be found by sequential reduction along c, b, then a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimBox {
    kind: BoxKind,
    vectors: [Vec3; 3],
}

impl Default for SimBox {
    fn default() -> Self {
        SimBox::none()
    }
}

impl SimBox {
    pub fn none() -> Self {
        SimBox {
            kind: BoxKind::None,
            vectors: [[0.0; 3]; 3],
        }
    }

    pub fn orthorhombic(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        for (name, l) in [("x", lx), ("y", ly), ("z", lz)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::MalformedBox(format!(
                    "edge length along {name} must be positive, got {l}"
                )));
            }
        }
        Ok(SimBox {
            kind: BoxKind::Orthorhombic,
            vectors: [[lx, 0.0, 0.0], [0.0, ly, 0.0], [0.0, 0.0, lz]],
        })
    }

    pub fn cubic(l: f64) -> Result<Self> {
        SimBox::orthorhombic(l, l, l)
    }

    /// Builds a triclinic cell from reduced lattice vectors
    /// a=(ax,0,0), b=(bx,by,0), c=(cx,cy,cz).
    pub fn triclinic(vectors: [Vec3; 3]) -> Result<Self> {
        let [a, b, c] = vectors;
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::MalformedBox("non-finite lattice vector".into()));
        }
        if a[1] != 0.0 || a[2] != 0.0 || b[2] != 0.0 {
            return Err(Error::MalformedBox(
                "lattice vectors must be lower triangular (a along x, b in the xy plane)".into(),
            ));
        }
        if !(a[0] > 0.0 && b[1] > 0.0 && c[2] > 0.0) {
            return Err(Error::MalformedBox(
                "diagonal entries ax, by, cz must be positive".into(),
            ));
        }
        if b[0].abs() > a[0] / 2.0 || c[0].abs() > a[0] / 2.0 || c[1].abs() > b[1] / 2.0 {
            return Err(Error::BoxNotReduced(format!(
                "require |bx| <= ax/2, |cx| <= ax/2, |cy| <= by/2, got bx={}, cx={}, cy={}",
                b[0], c[0], c[1]
            )));
        }
        Ok(SimBox {
            kind: BoxKind::Triclinic,
            vectors,
        })
    }

    /// Classifies a full 3×3 cell: all zeros is no box, a diagonal matrix is
    /// orthorhombic, anything else must be a reduced triclinic cell.
    pub fn from_vectors(vectors: [Vec3; 3]) -> Result<Self> {
        if vectors.iter().flatten().all(|&v| v == 0.0) {
            return Ok(SimBox::none());
        }
        let off_diag = [
            vectors[0][1],
            vectors[0][2],
            vectors[1][0],
            vectors[1][2],
            vectors[2][0],
            vectors[2][1],
        ];
        if off_diag.iter().all(|&v| v == 0.0) {
            SimBox::orthorhombic(vectors[0][0], vectors[1][1], vectors[2][2])
        } else {
            SimBox::triclinic(vectors)
        }
    }

    pub fn kind(&self) -> BoxKind {
        self.kind
    }

    pub fn vectors(&self) -> &[Vec3; 3] {
        &self.vectors
    }

    pub fn is_periodic(&self) -> bool {
        self.kind != BoxKind::None
    }

    pub fn volume(&self) -> f64 {
        let [a, b, c] = self.vectors;
        dot(a, cross(b, c)).abs()
    }

    /// Distances between opposite faces, along the a, b and c reciprocal directions.
    pub fn perpendicular_widths(&self) -> Vec3 {
        if self.kind == BoxKind::None {
            return [f64::INFINITY; 3];
        }
        let [a, b, c] = self.vectors;
        let v = self.volume();
        [
            v / norm(cross(b, c)),
            v / norm(cross(c, a)),
            v / norm(cross(a, b)),
        ]
    }

    pub fn min_perpendicular_width(&self) -> f64 {
        let w = self.perpendicular_widths();
        w[0].min(w[1]).min(w[2])
    }

    /// Fractional coordinates of a Cartesian point (exact inverse of the
    /// lower-triangular cell).
    pub fn fractional(&self, r: Vec3) -> Vec3 {
        let [a, b, c] = self.vectors;
        let sc = r[2] / c[2];
        let sb = (r[1] - sc * c[1]) / b[1];
        let sa = (r[0] - sb * b[0] - sc * c[0]) / a[0];
        [sa, sb, sc]
    }

    /// Sequential reduction along c, b then a. Exact whenever the true
    /// minimum image is no longer than half the minimum perpendicular width.
    #[inline]
    pub fn reduce(&self, delta: Vec3) -> Vec3 {
        match self.kind {
            BoxKind::None => delta,
            BoxKind::Orthorhombic => {
                let mut d = delta;
                for k in 0..3 {
                    let l = self.vectors[k][k];
                    d[k] -= (d[k] / l).round() * l;
                }
                d
            }
            BoxKind::Triclinic => {
                let [a, b, c] = self.vectors;
                let mut d = delta;
                let s = (d[2] / c[2]).round();
                d = sub(d, scale(c, s));
                let s = (d[1] / b[1]).round();
                d = sub(d, scale(b, s));
                let s = (d[0] / a[0]).round();
                sub(d, scale(a, s))
            }
        }
    }

    /// Displacement of minimum norm among all periodic images of `delta`.
    pub fn minimum_image(&self, delta: Vec3) -> Vec3 {
        let reduced = self.reduce(delta);
        if self.kind != BoxKind::Triclinic {
            return reduced;
        }
        let widths = self.perpendicular_widths();
        let r2 = dot(reduced, reduced);
        let half = self.min_perpendicular_width() / 2.0;
        if r2 <= half * half {
            return reduced;
        }
        // A vector's fractional coordinate along axis c is bounded by its
        // norm over the plane spacing, so every image shorter than
        // `reduced` lies in a finite block of lattice shifts.
        let r = r2.sqrt();
        let s = self.fractional(reduced);
        let bounds: [(i64, i64); 3] = std::array::from_fn(|c| {
            let b = r / widths[c];
            ((-b - s[c]).ceil() as i64, (b - s[c]).floor() as i64)
        });
        let [a, b, c] = self.vectors;
        let mut best = reduced;
        let mut best_norm = r2;
        for i in bounds[0].0..=bounds[0].1 {
            for j in bounds[1].0..=bounds[1].1 {
                for k in bounds[2].0..=bounds[2].1 {
                    let shift = add(add(scale(a, i as f64), scale(b, j as f64)), scale(c, k as f64));
                    let cand = add(reduced, shift);
                    let n = dot(cand, cand);
                    if n < best_norm {
                        best_norm = n;
                        best = cand;
                    }
                }
            }
        }
        best
    }
}

/// Free-function form of [`SimBox::minimum_image`].
pub fn minimum_image(delta: Vec3, cell: &SimBox) -> Vec3 {
    cell.minimum_image(delta)
}
