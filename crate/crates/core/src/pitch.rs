//! Pitch geometry shared across the pipeline.
//!
//! Coordinates follow the normalized convention of the upstream data
//! provider: the pitch is 105 m by 68 m and every possession attacks
//! left-to-right, so the defended goal line is always `x = 105`.

/// Pitch length in meters.
pub const PITCH_LENGTH: f64 = 105.0;
/// Pitch width in meters.
pub const PITCH_WIDTH: f64 = 68.0;
/// Center of the attacked goal mouth.
pub const GOAL_CENTER: (f64, f64) = (105.0, 34.0);
/// Goalpost positions on the attacked goal line (7.32 m mouth).
pub const GOAL_POSTS: ((f64, f64), (f64, f64)) = ((105.0, 30.34), (105.0, 37.66));
/// Regulation half length in seconds.
pub const HALF_LENGTH_S: f64 = 2700.0;
/// Largest possible distance to the goal center from inside the pitch.
pub const MAX_GOAL_DISTANCE: f64 = 110.3675676999362; // hypot(105, 34), frozen

/// True when `(x, y)` lies on the pitch (inclusive bounds).
pub fn in_bounds(x: f64, y: f64) -> bool {
    (0.0..=PITCH_LENGTH).contains(&x) && (0.0..=PITCH_WIDTH).contains(&y)
}

/// Euclidean distance from `(x, y)` to the goal center.
pub fn distance_to_goal(x: f64, y: f64) -> f64 {
    let (gx, gy) = GOAL_CENTER;
    ((gx - x).powi(2) + (gy - y).powi(2)).sqrt()
}

/// Angle subtended by the goal mouth as seen from `(x, y)`, in radians.
///
/// Computed between the two post vectors; a point on the goal line
/// between the posts (or exactly at a post) sees the full `pi`.
pub fn angle_to_goal(x: f64, y: f64) -> f64 {
    let ((x1, y1), (x2, y2)) = GOAL_POSTS;
    let (ax, ay) = (x1 - x, y1 - y);
    let (bx, by) = (x2 - x, y2 - y);
    let na = (ax * ax + ay * ay).sqrt();
    let nb = (bx * bx + by * by).sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return std::f64::consts::PI;
    }
    let cross = ax * by - ay * bx;
    let dot = ax * bx + ay * by;
    cross.atan2(dot).abs()
}
