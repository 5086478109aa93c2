//! Minutiae tables of the worked enrollment example: a query fingerprint and
//! three candidates, the second of which is the query itself.

#![allow(clippy::approx_constant)]

/// Query end points as `(x, angle, y)`.
pub const QUERY_END: [(i32, f64, i32); 10] = [
    (147, -1.05, 48),
    (40, 1.57, 101),
    (133, -1.57, 111),
    (50, 1.57, 112),
    (63, 1.57, 115),
    (49, -2.09, 117),
    (67, 2.36, 124),
    (119, -2.09, 127),
    (88, 1.05, 143),
    (126, 1.05, 154),
];

/// Candidate end points as `(x, angle)`.
pub const IMAGE1_END: [(i32, f64); 10] = [
    (86, -2.62),
    (158, -0.52),
    (156, -0.52),
    (93, 0.52),
    (111, 0.79),
    (24, -2.36),
    (112, 0.52),
    (161, -2.09),
    (103, 0.52),
    (151, 0.52),
];

pub const IMAGE2_END: [(i32, f64); 10] = [
    (147, -1.05),
    (40, 1.57),
    (133, -1.57),
    (50, 1.57),
    (63, 1.57),
    (49, -2.09),
    (67, 2.36),
    (119, -2.09),
    (88, 1.05),
    (126, 1.05),
];

pub const IMAGE3_END: [(i32, f64); 15] = [
    (104, 3.14),
    (98, 0.0),
    (121, 2.09),
    (65, 2.36),
    (130, -2.09),
    (133, 1.57),
    (88, -2.09),
    (107, 1.05),
    (128, -1.57),
    (144, -1.57),
    (69, 1.57),
    (99, -2.62),
    (73, -2.09),
    (62, 0.79),
    (120, 2.62),
];

/// Candidate bifurcations as `(x, angle1, angle2, angle3)`.
pub const IMAGE1_BIF: [(i32, f64, f64, f64); 10] = [
    (109, 3.14, 0.79, -0.52),
    (96, 2.62, -2.09, 0.0),
    (149, 2.62, -1.57, 0.0),
    (110, 2.62, -2.09, 0.0),
    (122, 2.62, -1.57, 0.0),
    (80, 3.14, -1.57, 1.05),
    (116, 2.36, -2.62, -0.79),
    (171, 2.36, -2.36, -0.79),
    (154, -2.62, 1.57, -1.05),
    (167, -2.62, 1.05, -0.52),
];

pub const IMAGE2_BIF: [(i32, f64, f64, f64); 15] = [
    (109, 3.14, -1.05, 0.52),
    (74, 2.09, -2.09, 0.52),
    (98, -2.62, 1.05, -0.52),
    (100, 3.14, 1.57, -1.05),
    (107, -2.36, 1.57, -0.79),
    (39, -2.36, 1.05, -0.79),
    (45, -2.09, 1.57, 0.0),
    (92, -2.36, 1.05, -0.79),
    (39, 3.14, -1.57, 1.05),
    (71, -2.36, -1.05, 0.79),
    (64, 3.14, 1.05, -1.05),
    (128, -2.36, 1.05, -1.05),
    (92, -2.36, 1.05, -1.05),
    (48, 2.09, -2.09, 0.0),
    (59, -2.36, 1.57, 0.0),
];

pub const IMAGE3_BIF: [(i32, f64, f64, f64); 14] = [
    (52, 2.09, -2.09, 0.79),
    (88, -2.62, 1.05, 0.0),
    (132, -2.36, 2.09, -1.05),
    (75, -2.62, 1.05, -1.05),
    (106, -2.36, 1.57, -0.79),
    (123, 2.09, -1.57, 1.05),
    (115, 3.14, 1.05, -0.79),
    (108, -2.62, -1.05, 0.79),
    (66, -2.62, 1.05, -1.05),
    (62, -2.62, -1.05, 0.79),
    (137, 2.36, 0.79, -0.79),
    (77, 2.09, -2.09, 0.0),
    (75, -2.09, 1.57, 0.0),
    (78, -2.62, -1.05, 0.79),
];

/// Row targets of the query's bifurcations, paired positionally with
/// [`IMAGE2_BIF`].
pub const QUERY_BIF_TARGETS: [i32; 15] = [
    50, 55, 60, 82, 89, 94, 101, 103, 110, 119, 120, 135, 138, 152, 179,
];

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::minutiae::{write_bifurcations, write_endings, BifurcationPoint, EndPoint, MinutiaeSet};

/// File names written by [`write_fixtures`], in manifest order.
pub const FIXTURE_FILES: [&str; 8] = [
    "query_end.csv",
    "image1_end.csv",
    "image2_end.csv",
    "image3_end.csv",
    "image1_bif.csv",
    "image2_bif.csv",
    "image3_bif.csv",
    "query_bif_targets.csv",
];

fn endings(rows: &[(i32, f64)]) -> Vec<EndPoint> {
    rows.iter()
        .map(|&(x, angle)| EndPoint { x, y: None, angle })
        .collect()
}

fn bifurcations(rows: &[(i32, f64, f64, f64)]) -> Vec<BifurcationPoint> {
    rows.iter()
        .map(|&(x, angle1, angle2, angle3)| BifurcationPoint {
            x,
            y: None,
            angle1,
            angle2,
            angle3,
        })
        .collect()
}

/// The enrolled fingerprint: end points with rows, and the image-2
/// bifurcations paired with the query's bifurcation rows.
pub fn query_set() -> MinutiaeSet {
    let ends = QUERY_END
        .iter()
        .map(|&(x, angle, y)| EndPoint { x, y: Some(y), angle })
        .collect();
    let mut bifs = bifurcations(&IMAGE2_BIF);
    for (b, y) in bifs.iter_mut().zip(QUERY_BIF_TARGETS) {
        b.y = Some(y);
    }
    MinutiaeSet::new(ends, bifs)
}

/// Candidate image 1, 2 or 3.
pub fn image_set(image: usize) -> Option<MinutiaeSet> {
    let (ends, bifs) = match image {
        1 => (endings(&IMAGE1_END), bifurcations(&IMAGE1_BIF)),
        2 => (endings(&IMAGE2_END), bifurcations(&IMAGE2_BIF)),
        3 => (endings(&IMAGE3_END), bifurcations(&IMAGE3_BIF)),
        _ => return None,
    };
    Some(MinutiaeSet::new(ends, bifs))
}

/// CSV bytes of one fixture file.
pub fn fixture_bytes(name: &str) -> Option<Vec<u8>> {
    let mut buf = Vec::new();
    let query = query_set();
    let ok = match name {
        "query_end.csv" => write_endings(&query.endings, &mut buf),
        "image1_end.csv" => write_endings(&endings(&IMAGE1_END), &mut buf),
        "image2_end.csv" => write_endings(&endings(&IMAGE2_END), &mut buf),
        "image3_end.csv" => write_endings(&endings(&IMAGE3_END), &mut buf),
        "image1_bif.csv" => write_bifurcations(&bifurcations(&IMAGE1_BIF), &mut buf),
        "image2_bif.csv" => write_bifurcations(&bifurcations(&IMAGE2_BIF), &mut buf),
        "image3_bif.csv" => write_bifurcations(&bifurcations(&IMAGE3_BIF), &mut buf),
        "query_bif_targets.csv" => {
            buf.extend_from_slice(b"y\n");
            for y in QUERY_BIF_TARGETS {
                buf.extend_from_slice(format!("{y}\n").as_bytes());
            }
            Ok(())
        }
        _ => return None,
    };
    ok.ok().map(|_| buf)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every fixture into `dir` and returns `(file name, sha256)` pairs.
pub fn write_fixtures(dir: &Path) -> Result<Vec<(&'static str, String)>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    FIXTURE_FILES
        .iter()
        .map(|&name| {
            let bytes = fixture_bytes(name).expect("known fixture");
            let path = dir.join(name);
            std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            Ok((name, sha256_hex(&bytes)))
        })
        .collect()
}
