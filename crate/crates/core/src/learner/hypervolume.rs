/// Area dominated by `points = (margin, good_rob)` with respect to `reference`,
/// where margin is maximized and good_rob minimized. Coordinates are clamped
/// to `[-1, 1]` first.
pub fn hypervolume_2d(points: &[(f64, f64)], reference: (f64, f64)) -> f64 {
    let (rm, rg) = reference;
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(m, g)| (clamp_unit(m), clamp_unit(g)))
        .filter(|&(m, g)| m > rm && g < rg)
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut floor = rg;
    for (m, g) in pts {
        if g < floor {
            area += (m - rm) * (floor - g);
            floor = g;
        }
    }
    area
}

/// Default reference corner: worst margin, worst good-trace robustness.
pub const HV_REFERENCE: (f64, f64) = (-1.0, 1.0);

pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        -1.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// Area dominated by a single point.
pub(crate) fn point_volume(p: (f64, f64)) -> f64 {
    hypervolume_2d(&[p], HV_REFERENCE)
}
