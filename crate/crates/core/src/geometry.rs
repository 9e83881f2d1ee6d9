//! Slant-range projection and the single-anchor geometric position estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Pose2D, SensorGeometry};

/// Range in the target plane, `0 <= r_2d <= r_3d`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProjectedRange(f64);

impl ProjectedRange {
    #[inline]
    pub fn meters(self) -> f64 {
        self.0
    }
}

/// Projects a slant range onto the target plane: `sqrt(r_3d² − Δh²)`.
pub fn project_range(r_3d: f64, delta_h: f64) -> Result<ProjectedRange> {
    project_range_with_tolerance(r_3d, delta_h, 0.0)
}

/// Like [`project_range`], but slant ranges up to `tolerance` short of `|Δh|`
/// are clamped to zero instead of rejected.
pub fn project_range_with_tolerance(
    r_3d: f64,
    delta_h: f64,
    tolerance: f64,
) -> Result<ProjectedRange> {
    let dh = delta_h.abs();
    if !(r_3d.is_finite() && dh.is_finite()) || r_3d < 0.0 {
        return Err(Error::ImpossibleRange { r_3d, delta_h });
    }
    if r_3d >= dh {
        // (r - h)(r + h) is better conditioned than r² - h² near the vertical.
        return Ok(ProjectedRange(((r_3d - dh) * (r_3d + dh)).sqrt()));
    }
    if dh - r_3d <= tolerance {
        log::warn!("slant range {r_3d:.4} m below height difference {dh:.4} m; clamping to 0");
        return Ok(ProjectedRange(0.0));
    }
    Err(Error::ImpossibleRange { r_3d, delta_h })
}

/// Slant-range projection with a fixed height difference and clamp tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeProjection {
    pub delta_h: f64,
    /// Slant ranges this far below `|Δh|` clamp to zero.
    pub tolerance: f64,
}

impl RangeProjection {
    pub fn project(&self, r_3d: f64) -> Result<f64> {
        Ok(project_range_with_tolerance(r_3d, self.delta_h, self.tolerance)?.meters())
    }
}

/// Places the target at `r_2d` along the radar azimuth.
pub fn geometric_position(r_2d: f64, geom: &SensorGeometry) -> Pose2D {
    let (s, c) = geom.azimuth_psi.sin_cos();
    Pose2D::new(
        geom.isac_position.x + r_2d * c,
        geom.isac_position.y + r_2d * s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn geom(x: f64, y: f64, psi: f64) -> SensorGeometry {
        SensorGeometry {
            isac_position: Pose2D::new(x, y),
            azimuth_psi: psi,
            ..SensorGeometry::default()
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_range(5.0, 3.0).unwrap().meters(), 4.0);
        assert_eq!(project_range(2.5, 0.0).unwrap().meters(), 2.5);
        assert_eq!(project_range(1.0, 1.0).unwrap().meters(), 0.0);
        assert_eq!(project_range(5.0, -3.0).unwrap().meters(), 4.0);
    }

    #[test]
    fn projection_rejects_short_range() {
        assert!(matches!(
            project_range(0.9, 1.0),
            Err(Error::ImpossibleRange { .. })
        ));
        assert_eq!(
            project_range_with_tolerance(0.9, 1.0, 0.75)
                .unwrap()
                .meters(),
            0.0
        );
        assert!(project_range_with_tolerance(0.2, 1.0, 0.75).is_err());
        assert!(project_range(-1.0, 0.0).is_err());
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(
            geometric_position(2.0, &geom(0.0, 0.0, 0.0)),
            Pose2D::new(2.0, 0.0)
        );
        assert_eq!(
            geometric_position(0.0, &geom(1.0, 1.0, 0.3)),
            Pose2D::new(1.0, 1.0)
        );
        let p = geometric_position(1.0, &geom(0.0, 0.0, FRAC_PI_2));
        assert!(p.x.abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_azimuth_moves_only_along_x() {
        let g = geom(-1.0, 1.75, 0.0);
        for r in [0.0, 0.5, 1.7, 3.3] {
            assert_eq!(geometric_position(r, &g).y, 1.75);
        }
    }

    proptest! {
        #[test]
        fn projection_round_trip(r_2d in 0.0f64..50.0, dh in -5.0f64..5.0) {
            let r_3d = r_2d.hypot(dh);
            let back = project_range(r_3d, dh).unwrap().meters();
            prop_assert!(back <= r_3d);
            prop_assert!((back.hypot(dh) - r_3d).abs() <= 1e-12 * r_3d.max(1.0));
        }

        #[test]
        fn estimate_on_circle(r in 0.0f64..20.0, psi in -6.3f64..6.3, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let g = geom(x, y, psi);
            let p = geometric_position(r, &g);
            prop_assert!((p.distance(&g.isac_position) - r).abs() < 1e-12 * r.max(1.0));
        }
    }
}
