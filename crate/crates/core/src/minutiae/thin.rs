//! Zhang–Suen thinning.

use super::image::{BinaryImage, SkeletonImage};

/// Neighbours P2..P9: N, NE, E, SE, S, SW, W, NW.
const NEIGHBOURS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Thins ridges to one pixel width by alternating the two Zhang–Suen
/// subiterations until neither deletes anything. Pixels outside the image
/// count as background.
pub fn thin(img: &BinaryImage) -> SkeletonImage {
    let mut out = img.clone();
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            marked.clear();
            for y in 0..out.height() {
                for x in 0..out.width() {
                    if out.get(x, y) == 1 && deletable(&out, x, y, pass) {
                        marked.push((x, y));
                    }
                }
            }
            for &(x, y) in &marked {
                out.set(x, y, false);
            }
            changed |= !marked.is_empty();
        }
        if !changed {
            return out;
        }
    }
}

fn deletable(img: &BinaryImage, x: usize, y: usize, pass: usize) -> bool {
    let p: [u8; 8] = NEIGHBOURS.map(|(dx, dy)| img.get_or_zero(x as isize + dx, y as isize + dy));
    let b: u8 = p.iter().sum();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = p;
    if pass == 0 {
        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
    } else {
        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
    }
}
