//! Exact area of a disk intersected with an axis-aligned rectangle.
//!
//! The rectangle is handled by inclusion-exclusion over four "corner"
//! regions `{u ≤ X, v ≤ Y}`. Each corner area is an integral of the vertical
//! chord length across the disk, split where the chord meets the line
//! `v = Y`, and every piece has the antiderivative of `√(r² − u²)`.

/// `∫₀ᵘ √(r² − t²) dt` with `u` clamped to `[−r, r]`.
fn chord_primitive(u: f64, r: f64) -> f64 {
    let u = u.clamp(-r, r);
    let s = (r * r - u * u).max(0.0).sqrt();
    0.5 * (u * s + r * r * (u / r).clamp(-1.0, 1.0).asin())
}

/// Area of `{(u, v) : u² + v² ≤ r², u ≤ x, v ≤ y}`.
fn corner_area(x: f64, y: f64, r: f64) -> f64 {
    if x <= -r || y <= -r || r <= 0.0 {
        return 0.0;
    }
    let upper = x.min(r);
    let prim = |u: f64| chord_primitive(u, r);
    if y >= r {
        return 2.0 * (prim(upper) - prim(-r));
    }
    // The chord at abscissa u is cut by v = y where |u| ≤ w.
    let w = (r * r - y * y).max(0.0).sqrt();
    let mut area = 0.0;
    if y >= 0.0 {
        let b = upper.min(-w);
        area += 2.0 * (prim(b) - prim(-r));
    }
    if upper > -w {
        let b = upper.min(w);
        area += y * (b + w) + prim(b) - prim(-w);
    }
    if y >= 0.0 && upper > w {
        area += 2.0 * (prim(upper) - prim(w));
    }
    area
}

/// Area of the disk centered at `(cx, cy)` with radius `r` intersected with
/// the rectangle `[x0, x1] × [y0, y1]`.
pub fn disk_rect_area(cx: f64, cy: f64, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if r <= 0.0 || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let (ax0, ax1) = (x0 - cx, x1 - cx);
    let (ay0, ay1) = (y0 - cy, y1 - cy);
    let area = corner_area(ax1, ay1, r) - corner_area(ax0, ay1, r) - corner_area(ax1, ay0, r)
        + corner_area(ax0, ay0, r);
    area.max(0.0)
}
