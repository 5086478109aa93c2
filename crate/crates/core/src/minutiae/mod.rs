//! Crossing-number minutiae extraction from skeleton images.
//!
//! For a ridge pixel P with 8-neighbour ring P1..P8 the crossing number is
//! `CN = ½ Σ |Pi − Pi+1|` (with P9 = P1). CN = 1 marks a ridge ending and
//! CN = 3 a bifurcation. Each branch leaving a minutia is traced a few
//! pixels to estimate its direction.

mod csv_io;
mod image;
mod netpbm;
mod thin;

pub use csv_io::{
    read_minutiae, read_minutiae_csv, write_bifurcations, write_bifurcations_csv, write_endings,
    write_endings_csv, MinutiaKind,
};
pub use image::{BinaryImage, SkeletonImage};
pub use thin::thin;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Pixels walked along a branch when estimating its direction.
pub const TRACE_LENGTH: usize = 5;

pub const DEFAULT_BORDER_MARGIN: usize = 10;

/// The 8-neighbour ring, clockwise on screen starting east. Offsets are
/// `(dx, dy)` with y growing downward.
pub const RING: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// A neighbour position, as an index into [`RING`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction(u8);

impl Direction {
    pub const EAST: Direction = Direction(0);
    pub const SOUTH_EAST: Direction = Direction(1);
    pub const SOUTH: Direction = Direction(2);
    pub const SOUTH_WEST: Direction = Direction(3);
    pub const WEST: Direction = Direction(4);
    pub const NORTH_WEST: Direction = Direction(5);
    pub const NORTH: Direction = Direction(6);
    pub const NORTH_EAST: Direction = Direction(7);

    pub fn from_index(i: usize) -> Option<Direction> {
        (i < 8).then_some(Direction(i as u8))
    }

    pub fn offset(self) -> (isize, isize) {
        RING[self.0 as usize]
    }

    pub fn is_orthogonal(self) -> bool {
        self.0.is_multiple_of(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndPoint {
    pub x: i32,
    /// Row, origin top-left. Candidate tables may omit it.
    pub y: Option<i32>,
    /// Radians in (−π, π], two decimals.
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BifurcationPoint {
    pub x: i32,
    pub y: Option<i32>,
    pub angle1: f64,
    pub angle2: f64,
    pub angle3: f64,
}

impl EndPoint {
    pub fn inputs(&self) -> Vec<f64> {
        vec![self.x as f64, self.angle]
    }
}

impl BifurcationPoint {
    pub fn inputs(&self) -> Vec<f64> {
        vec![self.x as f64, self.angle1, self.angle2, self.angle3]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MinutiaeSet {
    pub endings: Vec<EndPoint>,
    pub bifurcations: Vec<BifurcationPoint>,
}

impl MinutiaeSet {
    pub fn new(endings: Vec<EndPoint>, bifurcations: Vec<BifurcationPoint>) -> Self {
        let mut set = MinutiaeSet {
            endings,
            bifurcations,
        };
        set.canonicalize();
        set
    }

    pub fn is_empty(&self) -> bool {
        self.endings.is_empty() && self.bifurcations.is_empty()
    }

    /// Sorts each kind by `(y, x)`. A kind in which some point has no row
    /// keeps its given order, since there is nothing to sort it by.
    pub fn canonicalize(&mut self) {
        if self.endings.iter().all(|p| p.y.is_some()) {
            self.endings.sort_by_key(|p| (p.y, p.x));
        }
        if self.bifurcations.iter().all(|p| p.y.is_some()) {
            self.bifurcations.sort_by_key(|p| (p.y, p.x));
        }
    }

    /// Reads one or two per-kind CSV files. Either path may be absent.
    pub fn load_csv(end_csv: Option<&Path>, bif_csv: Option<&Path>) -> Result<Self> {
        let mut set = MinutiaeSet::default();
        for path in [end_csv, bif_csv].into_iter().flatten() {
            let loaded = read_minutiae_csv(path)?;
            set.endings.extend(loaded.endings);
            set.bifurcations.extend(loaded.bifurcations);
        }
        set.canonicalize();
        Ok(set)
    }

    /// Writes `<stem>.end.csv` and `<stem>.bif.csv`, returning both paths.
    pub fn save_csv(&self, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let stem = stem.as_ref().as_os_str().to_owned();
        let mut end = stem.clone();
        end.push(".end.csv");
        let mut bif = stem;
        bif.push(".bif.csv");
        let (end, bif) = (PathBuf::from(end), PathBuf::from(bif));
        write_endings_csv(&self.endings, &end)?;
        write_bifurcations_csv(&self.bifurcations, &bif)?;
        Ok((end, bif))
    }
}

/// Rounds to two decimals, folding negative zero into zero.
pub fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn ring_values(img: &SkeletonImage, x: usize, y: usize) -> [u8; 8] {
    RING.map(|(dx, dy)| img.get_or_zero(x as isize + dx, y as isize + dy))
}

fn cn_of_ring(ring: &[u8; 8]) -> u8 {
    let transitions: u8 = (0..8).map(|i| ring[i].abs_diff(ring[(i + 1) % 8])).sum();
    transitions / 2
}

fn is_interior(img: &SkeletonImage, x: usize, y: usize) -> bool {
    x >= 1 && y >= 1 && x + 1 < img.width() && y + 1 < img.height()
}

/// Crossing number of the pixel at `(x, y)`, which must not lie on the
/// image border. Background pixels are classified from their ring as well.
pub fn crossing_number(img: &SkeletonImage, x: usize, y: usize) -> Result<u8> {
    if !is_interior(img, x, y) {
        return Err(Error::OutOfBounds {
            x,
            y,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(cn_of_ring(&ring_values(img, x, y)))
}

/// One representative direction per contiguous run of ridge pixels in the
/// ring, preferring an orthogonal neighbour within each run.
fn branch_directions(ring: &[u8; 8]) -> Vec<Direction> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    // Start scanning just after a background pixel so no run wraps.
    let Some(offset) = (0..8).find(|&i| ring[i] == 0) else {
        return Vec::new();
    };
    for step in 1..=8 {
        let i = (offset + step) % 8;
        if ring[i] == 1 {
            if ring[(i + 7) % 8] == 1 {
                runs.last_mut().expect("run started").push(i);
            } else {
                runs.push(vec![i]);
            }
        }
    }
    runs.iter()
        .map(|run| {
            let pick = run.iter().copied().find(|&i| i % 2 == 0).unwrap_or(run[0]);
            Direction(pick as u8)
        })
        .collect()
}

fn ridge_run_members(ring: &[u8; 8], dir: Direction) -> Vec<usize> {
    let start = dir.0 as usize;
    let mut members = vec![start];
    for step in [1usize, 7] {
        let mut i = (start + step) % 8;
        while ring[i] == 1 && !members.contains(&i) {
            members.push(i);
            i = (i + step) % 8;
        }
    }
    members
}

/// Direction of the branch leaving `start` through `first_step`, traced for
/// up to [`TRACE_LENGTH`] pixels. The angle uses mathematical orientation
/// (y up), in (−π, π] rounded to two decimals.
pub fn estimate_angle(img: &SkeletonImage, start: (usize, usize), first_step: Direction) -> Result<f64> {
    let (sx, sy) = (start.0 as isize, start.1 as isize);
    let (dx, dy) = first_step.offset();
    if img.get_or_zero(sx + dx, sy + dy) != 1 {
        return Err(Error::invalid(format!(
            "no ridge pixel next to ({}, {}) in direction {:?}",
            start.0, start.1, first_step
        )));
    }

    // Pixels of the other branches around the start are off limits.
    let start_ring = ring_values(img, start.0, start.1);
    let own = ridge_run_members(&start_ring, first_step);
    let mut visited: Vec<(isize, isize)> = vec![(sx, sy)];
    for (i, &(ox, oy)) in RING.iter().enumerate() {
        if start_ring[i] == 1 && !own.contains(&i) {
            visited.push((sx + ox, sy + oy));
        }
    }

    let mut cur = (sx + dx, sy + dy);
    visited.push(cur);
    for _ in 1..TRACE_LENGTH {
        let (cx, cy) = cur;
        if cx < 1 || cy < 1 {
            break;
        }
        let (ux, uy) = (cx as usize, cy as usize);
        if !is_interior(img, ux, uy) || cn_of_ring(&ring_values(img, ux, uy)) != 2 {
            break;
        }
        let candidates = (0..8)
            .filter(|i| i % 2 == 0)
            .chain((0..8).filter(|i| i % 2 == 1))
            .map(|i| (cx + RING[i].0, cy + RING[i].1))
            .find(|&(nx, ny)| img.get_or_zero(nx, ny) == 1 && !visited.contains(&(nx, ny)));
        match candidates {
            Some(next) => {
                visited.push(next);
                cur = next;
            }
            None => break,
        }
    }

    let dcol = (cur.0 - sx) as i32;
    let drow = (cur.1 - sy) as i32;
    Ok(round2(f64::atan2(-drow as f64, dcol as f64)))
}

/// Scans every ridge pixel at least `border_margin` pixels from each border
/// and records CN = 1 pixels as endings and CN = 3 pixels as bifurcations.
pub fn extract_minutiae(img: &SkeletonImage, border_margin: usize) -> Result<MinutiaeSet> {
    let min_size = 2 * border_margin + 3;
    if img.width() < min_size || img.height() < min_size {
        return Err(Error::invalid(format!(
            "{}x{} image is too small for border margin {border_margin}",
            img.width(),
            img.height()
        )));
    }
    let margin = border_margin.max(1);
    let mut endings = Vec::new();
    let mut bifurcations = Vec::new();
    for y in margin..img.height() - margin {
        for x in margin..img.width() - margin {
            if img.get(x, y) != 1 {
                continue;
            }
            let ring = ring_values(img, x, y);
            let cn = cn_of_ring(&ring);
            if cn != 1 && cn != 3 {
                continue;
            }
            let mut angles = branch_directions(&ring)
                .into_iter()
                .map(|d| estimate_angle(img, (x, y), d))
                .collect::<Result<Vec<f64>>>()?;
            let (px, py) = (x as i32, Some(y as i32));
            if cn == 1 {
                endings.push(EndPoint {
                    x: px,
                    y: py,
                    angle: angles[0],
                });
            } else {
                angles.sort_by(|a, b| b.total_cmp(a));
                bifurcations.push(BifurcationPoint {
                    x: px,
                    y: py,
                    angle1: angles[0],
                    angle2: angles[1],
                    angle3: angles[2],
                });
            }
        }
    }
    Ok(MinutiaeSet::new(endings, bifurcations))
}
