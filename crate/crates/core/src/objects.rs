//! Procedural test objects.

use crate::field::RealImage;

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Binary stick figure on a zero background, `side×side` pixels. Strokes
/// touch all four edges so a square support of the same side is tight, and
/// the figure has no point symmetry (one arm raised, one lowered).
pub fn stick_figure(side: usize) -> RealImage {
    // (x, y) in unit coordinates, y downwards.
    let head = ((0.5, 0.13), 0.13);
    let limbs = [
        ((0.5, 0.24), (0.5, 0.62)),
        ((0.5, 0.36), (0.045, 0.06)),
        ((0.5, 0.36), (0.955, 0.52)),
        ((0.5, 0.62), (0.22, 0.955)),
        ((0.5, 0.62), (0.74, 0.955)),
    ];
    let half_width = 0.045;
    let s = side as f64;
    RealImage::from_fn(side, |r, c| {
        let p = ((c as f64 + 0.5) / s, (r as f64 + 0.5) / s);
        let in_head = {
            let ((hx, hy), rad) = head;
            ((p.0 - hx).powi(2) + (p.1 - hy).powi(2)).sqrt() <= rad
        };
        let in_limb = limbs
            .iter()
            .any(|&(a, b)| segment_distance(p, a, b) <= half_width);
        if in_head || in_limb {
            1.0
        } else {
            0.0
        }
    })
    .expect("binary values are valid")
}
