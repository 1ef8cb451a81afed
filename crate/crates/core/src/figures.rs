//! Plot-ready CSV: the reaching envelope of a run and, for `n = 2`, the
//! error-plane geometry of the layer and the bound box.

use std::fmt::Write as _;

use crate::bounds::{region, slotine_region};
use crate::error::{positive, Error, Result};
use crate::log::TrajectoryLog;
use crate::surface::SurfaceSpec;

/// `t,abs_s_phi,envelope` with `envelope = max(|s_φ(0)| − η t, 0)`.
pub fn reaching_envelope_csv(log: &TrajectoryLog, eta: f64) -> Result<String> {
    let eta = positive("eta", eta)?;
    let s0 = log.rows().first().map_or(0.0, |r| r.s_phi.abs());
    let mut out = String::from("t,abs_s_phi,envelope\n");
    for (k, r) in log.rows().iter().enumerate() {
        let t = log.time(k);
        let _ = writeln!(
            out,
            "{t:.16e},{:.16e},{:.16e}",
            r.s_phi.abs(),
            (s0 - eta * t).max(0.0)
        );
    }
    Ok(out)
}

pub type Point = [f64; 2];

/// Sutherland–Hodgman clip of a convex or concave polygon against the
/// half-plane `a·p ≤ b`.
fn clip(poly: &[Point], a: Point, b: f64) -> Vec<Point> {
    let side = |p: &Point| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, cur) in poly.iter().enumerate() {
        let prev = &poly[(i + poly.len() - 1) % poly.len()];
        let (dc, dp) = (side(cur), side(prev));
        if (dc <= 0.0) != (dp <= 0.0) {
            let w = dp / (dp - dc);
            out.push([
                prev[0] + w * (cur[0] - prev[0]),
                prev[1] + w * (cur[1] - prev[1]),
            ]);
        }
        if dc <= 0.0 {
            out.push(*cur);
        }
    }
    out
}

fn rect(hx: f64, hy: f64) -> Vec<Point> {
    vec![[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]]
}

/// Shoelace area.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        .abs()
}

/// Polygons in the `(x̃, x̃')` plane for `n = 2`:
/// * `box`: corrected per-derivative bounds;
/// * `slotine_box`: `2^i` bounds;
/// * `strip`: `|s| ≤ φ`, clipped to a window 1.5 times the box;
/// * `region`: the box intersected with the strip.
pub fn layer_geometry(spec: &SurfaceSpec, phi: f64) -> Result<Vec<(&'static str, Vec<Point>)>> {
    if spec.order() != 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!(
                "layer geometry is drawn for n = 2 only, got {}",
                spec.order()
            ),
        });
    }
    let corrected = region(spec, phi)?;
    let slotine = slotine_region(spec, phi)?;
    let (bx, by) = (corrected.bounds()[0], corrected.bounds()[1]);
    let c = spec.coeffs_c();
    // s = c[0] x̃ + c[1] x̃'
    let strip = |poly: Vec<Point>| {
        let upper = clip(&poly, [c[0], c[1]], phi);
        clip(&upper, [-c[0], -c[1]], phi)
    };
    Ok(vec![
        ("box", rect(bx, by)),
        (
            "slotine_box",
            rect(slotine.bounds()[0], slotine.bounds()[1]),
        ),
        ("strip", strip(rect(1.5 * bx, 1.5 * by))),
        ("region", strip(rect(bx, by))),
    ])
}

/// [`layer_geometry`] as `polygon,vertex,e0,e1` rows.
pub fn layer_geometry_csv(spec: &SurfaceSpec, phi: f64) -> Result<String> {
    let mut out = String::from("polygon,vertex,e0,e1\n");
    for (name, poly) in layer_geometry(spec, phi)? {
        for (k, p) in poly.iter().enumerate() {
            let _ = writeln!(out, "{name},{k},{:.16e},{:.16e}", p[0], p[1]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::LogRow;
    use crate::surface::make_surface;

    #[test]
    fn region_area_matches_hand_integration() {
        // λ = φ = 1: box |x| ≤ 1, |y| ≤ 2; strip |y + x| ≤ 1 spans y-length 2
        // for every x in [−1, 1], so the area is 4.
        let g = layer_geometry(&make_surface(2, 1.0).unwrap(), 1.0).unwrap();
        let area = |n: &str| polygon_area(&g.iter().find(|p| p.0 == n).unwrap().1);
        assert!((area("region") - 4.0).abs() < 1e-12);
        assert!((area("box") - 8.0).abs() < 1e-12);
        // Window 3 × 6, strip vertical thickness 2 → area 6 away from the
        // corners, which the strip misses entirely.
        assert!((area("strip") - 6.0).abs() < 1e-12);
    }

    #[test]
    fn region_vertices_satisfy_all_constraints() {
        let spec = make_surface(2, 2.5).unwrap();
        let phi = 0.3;
        let g = layer_geometry(&spec, phi).unwrap();
        let reg = region(&spec, phi).unwrap();
        for p in &g.iter().find(|p| p.0 == "region").unwrap().1 {
            let s = spec.value(p).unwrap();
            assert!(s.abs() <= phi * (1.0 + 1e-12));
            assert!(p[0].abs() <= reg.bounds()[0] * (1.0 + 1e-12));
            assert!(p[1].abs() <= reg.bounds()[1] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn geometry_needs_n2() {
        assert!(layer_geometry(&make_surface(3, 1.0).unwrap(), 1.0).is_err());
        let csv = layer_geometry_csv(&make_surface(2, 1.0).unwrap(), 1.0).unwrap();
        assert!(csv.starts_with("polygon,vertex,e0,e1\nbox,0,"));
    }

    #[test]
    fn envelope_starts_at_initial_distance() {
        let mut log = TrajectoryLog::new(1, 0.5).unwrap();
        for s in [2.0, 1.5, 0.9, 0.0] {
            log.push(LogRow::new(vec![s], vec![0.0], s + 0.1, s, 1.0, 0.0))
                .unwrap();
        }
        let csv = reaching_envelope_csv(&log, 1.0).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        let last: Vec<f64> = lines[4].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last, vec![1.5, 0.0, 0.5]);
    }
}
