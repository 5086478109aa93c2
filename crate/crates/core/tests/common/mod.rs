#![allow(dead_code)]

use fingerprint_gp::BinaryImage;

pub const Y_SIZE: usize = 41;
pub const Y_CENTER: usize = 20;
pub const Y_ARM: usize = 9;

/// One-pixel skeleton: a west arm and north-east and south-east diagonal
/// arms meeting at the center pixel.
pub fn y_skeleton() -> BinaryImage {
    let mut img = BinaryImage::new(Y_SIZE, Y_SIZE);
    let c = Y_CENTER;
    img.set(c, c, true);
    for i in 1..=Y_ARM {
        img.set(c - i, c, true);
        img.set(c + i, c - i, true);
        img.set(c + i, c + i, true);
    }
    img
}

/// Angle of the vector from `from` to `to` in image coordinates, with the
/// row axis flipped, rounded to two decimals.
pub fn atan2_oracle(from: (i64, i64), to: (i64, i64)) -> f64 {
    let dx = (to.0 - from.0) as f64;
    let dy = (from.1 - to.1) as f64;
    (dy.atan2(dx) * 100.0).round() / 100.0 + 0.0
}
