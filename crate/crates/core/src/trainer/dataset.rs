use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use memmap2::Mmap;

use super::arrays::{scan_headers, Array, ArrayHeader, DTYPE_F64, DTYPE_I64};
use crate::elements;
use crate::error::{Error, Result};
use crate::geometry::{SimBox, Vec3};
use crate::system::System;

pub const CONTAINER_MAGIC: &[u8; 4] = b"MDK1";

/// One labelled configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub positions: Vec<Vec3>,
    pub species: Vec<u32>,
    /// Total energy in eV.
    pub energy: f64,
    /// Forces in eV/Å.
    pub forces: Option<Vec<Vec3>>,
    /// Lattice vectors as rows, when the frame is periodic.
    pub cell: Option<[Vec3; 3]>,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        if self.species.len() != n {
            return Err(Error::AtomCountMismatch(n, self.species.len()));
        }
        if let Some(f) = &self.forces {
            if f.len() != n {
                return Err(Error::AtomCountMismatch(n, f.len()));
            }
        }
        if !self.energy.is_finite() {
            return Err(Error::Corrupt(format!("non-finite energy {}", self.energy)));
        }
        Ok(())
    }

    pub fn to_system(&self) -> Result<System> {
        let cell = match self.cell {
            Some(v) => Some(SimBox::from_vectors(v)?),
            None => None,
        };
        System::new(self.positions.clone(), self.species.clone(), None, cell, None)
    }
}

/// Where a dataset's frames came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    ExtXyz(PathBuf),
    Container(PathBuf),
    InMemory,
}

#[derive(Debug)]
enum Store {
    Memory(Vec<Frame>),
    Mapped(MappedContainer),
}

/// Labelled frames, either held in memory or decoded on demand from a
/// memory-mapped container.
#[derive(Debug)]
pub struct Dataset {
    store: Store,
    source: Source,
}

impl Dataset {
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        for f in &frames {
            f.validate()?;
        }
        Ok(Dataset {
            store: Store::Memory(frames),
            source: Source::InMemory,
        })
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Memory(f) => f.len(),
            Store::Mapped(m) => m.n_frames,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn frame(&self, index: usize) -> Result<Frame> {
        if index >= self.len() {
            return Err(Error::Shape(format!(
                "frame {index} out of range for {} frames",
                self.len()
            )));
        }
        match &self.store {
            Store::Memory(f) => Ok(f[index].clone()),
            Store::Mapped(m) => m.frame(index),
        }
    }

    pub fn frames(&self) -> Result<Vec<Frame>> {
        (0..self.len()).map(|i| self.frame(i)).collect()
    }

    /// True when every frame carries forces.
    pub fn has_forces(&self) -> Result<bool> {
        match &self.store {
            Store::Memory(f) => Ok(f.iter().all(|f| f.forces.is_some())),
            Store::Mapped(m) => Ok(m.forces.is_some()),
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Splits a comment line into `key=value` pairs; values may be double-quoted.
fn comment_pairs(line: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut chars = line.trim().chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            return Ok(out);
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.next_if_eq(&'=').is_none() {
            // bare flag such as `pbc`
            out.push((key, String::new()));
            continue;
        }
        let mut value = String::new();
        if chars.next_if_eq(&'"').is_some() {
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(c) => value.push(c),
                    None => return Err(format!("unterminated quote in value of `{key}`")),
                }
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        out.push((key, value));
    }
}

fn parse_species(token: &str) -> Option<u32> {
    elements::atomic_number(token).or_else(|| {
        token
            .parse::<u32>()
            .ok()
            .filter(|&z| elements::symbol(z).is_some())
    })
}

/// Parses multi-frame extended-XYZ text. `path` is only used in messages.
pub fn parse_extxyz(text: &str, path: &Path) -> Result<Vec<Frame>> {
    parse_frames(text, path, true)
}

/// Reads unlabelled structures: like [`load_extxyz`] but `energy=` is
/// optional (missing energies read as 0).
pub fn load_structures(path: impl AsRef<Path>) -> Result<Vec<Frame>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_structures(&text, path)
}

/// In-memory form of [`load_structures`]; `path` only labels errors.
pub fn parse_structures(text: &str, path: &Path) -> Result<Vec<Frame>> {
    parse_frames(text, path, false)
}

fn parse_frames(text: &str, path: &Path, require_energy: bool) -> Result<Vec<Frame>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut k = 0;
    while k < lines.len() {
        if lines[k].trim().is_empty() {
            k += 1;
            continue;
        }
        let count_line = k + 1;
        let n: usize = lines[k]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, count_line, format!("malformed atom count `{}`", lines[k].trim())))?;
        if n == 0 {
            return Err(parse_err(path, count_line, "atom count must be positive"));
        }
        let comment = lines
            .get(k + 1)
            .ok_or_else(|| parse_err(path, count_line + 1, "missing comment line"))?;
        let pairs = comment_pairs(comment).map_err(|m| parse_err(path, count_line + 1, m))?;
        let mut energy = None;
        let mut cell = None;
        for (key, value) in &pairs {
            if key.eq_ignore_ascii_case("energy") {
                let e: f64 = value
                    .parse()
                    .map_err(|_| parse_err(path, count_line + 1, format!("malformed energy `{value}`")))?;
                if !e.is_finite() {
                    return Err(parse_err(path, count_line + 1, "energy must be finite"));
                }
                energy = Some(e);
            } else if key.eq_ignore_ascii_case("lattice") {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(path, count_line + 1, "malformed Lattice"))?;
                if v.len() != 9 {
                    return Err(parse_err(path, count_line + 1, "Lattice needs 9 numbers"));
                }
                cell = Some([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]);
            }
        }
        let energy = match energy {
            Some(e) => e,
            None if !require_energy => 0.0,
            None => return Err(parse_err(path, count_line + 1, "missing required key `energy=`")),
        };
        let mut positions = Vec::with_capacity(n);
        let mut species = Vec::with_capacity(n);
        let mut forces: Vec<Vec3> = Vec::new();
        for a in 0..n {
            let line_no = count_line + 2 + a;
            let line = lines
                .get(k + 2 + a)
                .ok_or_else(|| parse_err(path, line_no, format!("expected {n} atom lines, file ended")))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 4 && tokens.len() != 7 {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected `symbol x y z [fx fy fz]`, found {} columns", tokens.len()),
                ));
            }
            let z = parse_species(tokens[0])
                .ok_or_else(|| parse_err(path, line_no, format!("unknown element `{}`", tokens[0])))?;
            let mut nums = [0.0; 6];
            for (slot, tok) in nums.iter_mut().zip(&tokens[1..]) {
                *slot = tok
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line_no, format!("malformed number `{tok}`")))?;
            }
            if tokens.len() == 7 {
                if a > 0 && forces.is_empty() {
                    return Err(parse_err(path, line_no, "forces given for some atoms only"));
                }
                forces.push([nums[3], nums[4], nums[5]]);
            } else if !forces.is_empty() {
                return Err(parse_err(path, line_no, "forces given for some atoms only"));
            }
            species.push(z);
            positions.push([nums[0], nums[1], nums[2]]);
        }
        frames.push(Frame {
            positions,
            species,
            energy,
            forces: if forces.is_empty() { None } else { Some(forces) },
            cell,
        });
        k += 2 + n;
    }
    Ok(frames)
}

pub fn load_extxyz(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let frames = parse_extxyz(&text, path)?;
    Ok(Dataset {
        store: Store::Memory(frames),
        source: Source::ExtXyz(path.to_path_buf()),
    })
}

/// Writes one extended-XYZ frame. `extra` entries are appended to the
/// comment line as `key=value`.
pub fn write_extxyz_frame<W: Write>(
    out: &mut W,
    positions: &[Vec3],
    species: &[u32],
    energy: Option<f64>,
    forces: Option<&[Vec3]>,
    cell: Option<&SimBox>,
    extra: &[(&str, String)],
) -> io::Result<()> {
    writeln!(out, "{}", positions.len())?;
    let mut comment = Vec::new();
    if let Some(c) = cell.filter(|c| c.is_periodic()) {
        let v: Vec<String> = c.vectors().iter().flatten().map(|x| format!("{x:?}")).collect();
        comment.push(format!("Lattice=\"{}\" pbc=\"T T T\"", v.join(" ")));
    }
    let props = if forces.is_some() {
        "species:S:1:pos:R:3:forces:R:3"
    } else {
        "species:S:1:pos:R:3"
    };
    comment.push(format!("Properties={props}"));
    if let Some(e) = energy {
        comment.push(format!("energy={e:?}"));
    }
    for (k, v) in extra {
        comment.push(format!("{k}={v}"));
    }
    writeln!(out, "{}", comment.join(" "))?;
    for (a, (p, &z)) in positions.iter().zip(species).enumerate() {
        let sym = elements::symbol(z).unwrap_or("X");
        write!(out, "{sym} {:?} {:?} {:?}", p[0], p[1], p[2])?;
        if let Some(f) = forces {
            write!(out, " {:?} {:?} {:?}", f[a][0], f[a][1], f[a][2])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_extxyz(frames: &[Frame], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for f in frames {
        let cell = match f.cell {
            Some(v) => Some(SimBox::from_vectors(v)?),
            None => None,
        };
        write_extxyz_frame(
            &mut out,
            &f.positions,
            &f.species,
            Some(f.energy),
            f.forces.as_deref(),
            cell.as_ref(),
            &[],
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Encodes frames as container arrays. Frames sharing one species vector
/// are stored as `pos` [T,N,3] with `z` [N]; anything else is ragged with
/// `frame_offsets`.
pub fn container_arrays(frames: &[Frame]) -> Result<Vec<Array>> {
    if frames.is_empty() {
        return Err(Error::Shape("cannot write an empty dataset".into()));
    }
    for f in frames {
        f.validate()?;
    }
    let with_forces = frames.iter().filter(|f| f.forces.is_some()).count();
    if with_forces != 0 && with_forces != frames.len() {
        return Err(Error::Shape("forces must be present for all frames or none".into()));
    }
    let t = frames.len() as u64;
    let uniform = frames.iter().all(|f| f.species == frames[0].species);
    let flat = |get: &dyn Fn(&Frame) -> &[Vec3]| -> Vec<f64> {
        frames.iter().flat_map(|f| get(f).iter().flatten().copied()).collect()
    };
    let pos = flat(&|f| &f.positions);
    let forces = (with_forces > 0).then(|| flat(&|f| f.forces.as_deref().unwrap()));
    let total: u64 = frames.iter().map(|f| f.positions.len() as u64).sum();
    let mut arrays = Vec::new();
    let xyz_shape = if uniform {
        vec![t, frames[0].positions.len() as u64, 3]
    } else {
        vec![total, 3]
    };
    arrays.push(Array::f64("pos", xyz_shape.clone(), pos));
    if uniform {
        let z = frames[0].species.iter().map(|&z| z as i64).collect::<Vec<_>>();
        arrays.push(Array::i64("z", vec![z.len() as u64], z));
    } else {
        let z = frames
            .iter()
            .flat_map(|f| f.species.iter().map(|&z| z as i64))
            .collect::<Vec<_>>();
        arrays.push(Array::i64("z", vec![total], z));
    }
    arrays.push(Array::f64("energy", vec![t], frames.iter().map(|f| f.energy).collect()));
    if let Some(f) = forces {
        arrays.push(Array::f64("forces", xyz_shape, f));
    }
    if !uniform {
        let mut offsets = vec![0i64];
        for f in frames {
            offsets.push(offsets.last().unwrap() + f.positions.len() as i64);
        }
        arrays.push(Array::i64("frame_offsets", vec![t + 1], offsets));
    }
    Ok(arrays)
}

pub fn write_container<W: Write>(out: &mut W, arrays: &[Array]) -> io::Result<()> {
    out.write_all(CONTAINER_MAGIC)?;
    out.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for a in arrays {
        a.write(out)?;
    }
    Ok(())
}

/// Writes frames to a binary container file.
pub fn save_binary_container(frames: &[Frame], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let arrays = container_arrays(frames)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_container(&mut out, &arrays).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug)]
struct MappedContainer {
    bytes: Mmap,
    pos: ArrayHeader,
    z: ArrayHeader,
    energy: ArrayHeader,
    forces: Option<ArrayHeader>,
    /// Atom offsets per frame (length T+1).
    offsets: Vec<usize>,
    /// `z` stores one species vector shared by every frame.
    shared_z: bool,
    n_frames: usize,
}

impl MappedContainer {
    fn parse(bytes: Mmap) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CONTAINER_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 8 {
            return Err(Error::Truncated("array count".into()));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let headers = scan_headers(&bytes, 8, count)?;
        let find = |name: &str| headers.iter().find(|h| h.name == name).cloned();
        let require = |name: &str, dtype: u8| -> Result<ArrayHeader> {
            let h = find(name).ok_or_else(|| Error::Shape(format!("missing array `{name}`")))?;
            if h.dtype != dtype {
                return Err(Error::Shape(format!("array `{name}` has the wrong dtype")));
            }
            Ok(h)
        };
        let pos = require("pos", DTYPE_F64)?;
        let z = require("z", DTYPE_I64)?;
        let energy = require("energy", DTYPE_F64)?;
        let forces = match find("forces") {
            Some(_) => Some(require("forces", DTYPE_F64)?),
            None => None,
        };
        let offsets_h = match find("frame_offsets") {
            Some(_) => Some(require("frame_offsets", DTYPE_I64)?),
            None => None,
        };
        if energy.shape.len() != 1 {
            return Err(Error::Shape("`energy` must have rank 1".into()));
        }
        let n_frames = energy.shape[0] as usize;
        let shape_err = |m: String| Err(Error::Shape(m));
        let (offsets, total) = match (&offsets_h, pos.shape.as_slice()) {
            (None, &[t, n, 3]) => {
                if t as usize != n_frames {
                    return shape_err(format!("`energy` has {n_frames} entries but `pos` has {t} frames"));
                }
                ((0..=n_frames).map(|k| k * n as usize).collect::<Vec<_>>(), t * n)
            }
            (Some(h), &[total, 3]) => {
                if h.shape != [n_frames as u64 + 1] {
                    return shape_err(format!("`frame_offsets` must have {} entries", n_frames + 1));
                }
                let offsets: Vec<usize> = (0..h.len).map(|k| h.i64_at(&bytes, k).max(0) as usize).collect();
                let monotone = offsets.windows(2).all(|w| w[0] < w[1]);
                if offsets[0] != 0 || !monotone || *offsets.last().unwrap() != total as usize {
                    return shape_err("`frame_offsets` must rise strictly from 0 to the atom count".into());
                }
                (offsets, total)
            }
            _ => return shape_err(format!("`pos` has unsupported shape {:?}", pos.shape)),
        };
        let shared_z = match z.shape.as_slice() {
            &[n] if offsets_h.is_none() && n as usize == offsets[1] => true,
            &[t, n] if offsets_h.is_none() && t as usize == n_frames && n as usize == offsets[1] => false,
            &[n] if n == total => false,
            _ => return shape_err(format!("`z` shape {:?} does not match `pos`", z.shape)),
        };
        if let Some(f) = &forces {
            if f.shape != pos.shape {
                return shape_err("`forces` shape differs from `pos`".into());
            }
        }
        for k in 0..n_frames {
            if !energy.f64_at(&bytes, k).is_finite() {
                return Err(Error::Corrupt(format!("non-finite energy in frame {k}")));
            }
        }
        Ok(MappedContainer {
            bytes,
            pos,
            z,
            energy,
            forces,
            offsets,
            shared_z,
            n_frames,
        })
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        let (start, end) = (self.offsets[index], self.offsets[index + 1]);
        let vec3s = |h: &ArrayHeader| -> Vec<Vec3> {
            (start..end)
                .map(|a| [h.f64_at(&self.bytes, 3 * a), h.f64_at(&self.bytes, 3 * a + 1), h.f64_at(&self.bytes, 3 * a + 2)])
                .collect()
        };
        let z_range = if self.shared_z { 0..end - start } else { start..end };
        let species = z_range
            .map(|k| {
                let z = self.z.i64_at(&self.bytes, k);
                u32::try_from(z)
                    .ok()
                    .filter(|&z| elements::symbol(z).is_some())
                    .ok_or(Error::Corrupt(format!("invalid atomic number {z} in frame {index}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let frame = Frame {
            positions: vec3s(&self.pos),
            species,
            energy: self.energy.f64_at(&self.bytes, index),
            forces: self.forces.as_ref().map(vec3s),
            cell: None,
        };
        if frame.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Corrupt(format!("non-finite position in frame {index}")));
        }
        Ok(frame)
    }
}

/// Opens a binary container; frames are decoded lazily from the mapping.
pub fn load_binary_container(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    // SAFETY: the mapping is read-only; the container format is immutable
    // once written and concurrent truncation by another process is outside
    // the supported use.
    let bytes = unsafe { Mmap::map(&file) }.map_err(|e| Error::io(path, e))?;
    Ok(Dataset {
        store: Store::Mapped(MappedContainer::parse(bytes)?),
        source: Source::Container(path.to_path_buf()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: &str = "2\nenergy=-1.0 pbc=\"F F F\"\nH 0 0 0\nH 0.74 0 0\n";

    #[test]
    fn single_frame() {
        let f = parse_extxyz(H2, Path::new("h2.xyz")).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].positions.len(), 2);
        assert_eq!(f[0].energy, -1.0);
        assert!(f[0].forces.is_none());
    }

    #[test]
    fn missing_energy_reports_line_two() {
        let err = parse_extxyz("2\npbc=\"F F F\"\nH 0 0 0\nH 1 0 0\n", Path::new("x.xyz")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn structures_do_not_need_energies() {
        let file = tempfile::NamedTempFile::new().unwrap();
        fs::write(file.path(), "1\nLattice=\"5 0 0 0 5 0 0 0 5\"\nAr 0 0 0\n").unwrap();
        let frames = load_structures(file.path()).unwrap();
        assert_eq!(frames[0].species, vec![18]);
        assert_eq!(frames[0].energy, 0.0);
    }

    #[test]
    fn bad_symbol_and_count() {
        let err = parse_extxyz("2\nenergy=0\nH 0 0 0\nQq 1 0 0\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        let err = parse_extxyz("two\nenergy=0\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_extxyz("3\nenergy=0\nH 0 0 0\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn forces_and_lattice() {
        let text = "2\nLattice=\"10 0 0 0 10 0 0 0 10\" energy=2.5\nO 0 0 0 0.1 0.2 0.3\nH 1 0 0 -0.1 -0.2 -0.3\n\
                    1\nenergy=1\nC 0 0 0\n";
        let f = parse_extxyz(text, Path::new("x")).unwrap();
        assert_eq!(f.len(), 2);
        let forces = f[0].forces.as_ref().unwrap();
        assert!(forces.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(forces[1], [-0.1, -0.2, -0.3]);
        assert_eq!(f[0].cell.unwrap()[2], [0.0, 0.0, 10.0]);
        assert_eq!(f[0].to_system().unwrap().cell().volume(), 1000.0);
        assert_eq!(f[1].species, vec![6]);
    }

    #[test]
    fn partial_forces_rejected() {
        let err = parse_extxyz("2\nenergy=0\nH 0 0 0 1 1 1\nH 1 0 0\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn writer_round_trips() {
        let frames = vec![Frame {
            positions: vec![[0.1, 0.2, 0.3], [1.0 / 3.0, -2.0, 5.5]],
            species: vec![8, 1],
            energy: -76.123456789,
            forces: Some(vec![[1e-3, 2.0, -3.0], [0.0, 0.5, 1.0 / 7.0]]),
            cell: Some([[8.0, 0.0, 0.0], [0.0, 9.0, 0.0], [0.0, 0.0, 10.0]]),
        }];
        let mut buf = Vec::new();
        let cell = SimBox::orthorhombic(8.0, 9.0, 10.0).unwrap();
        let f = &frames[0];
        write_extxyz_frame(&mut buf, &f.positions, &f.species, Some(f.energy), f.forces.as_deref(), Some(&cell), &[])
            .unwrap();
        let back = parse_extxyz(std::str::from_utf8(&buf).unwrap(), Path::new("x")).unwrap();
        assert_eq!(back, frames);
    }
}
