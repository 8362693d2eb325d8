use std::f64::consts::FRAC_PI_2;

use super::params::TrackerParams;
use super::window::WindowTrajectory;

/// The three coherence statistics of a set of trajectories and their
/// weighted sum. Low values mean the trajectories move as a group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Incoherence {
    /// Mean over frames of the mean pairwise ground distance, meters.
    pub distance_avg: f64,
    /// Mean over frames of the population std-dev of speed magnitudes, m/s.
    pub speed_std: f64,
    /// Mean over frames of the circular std-dev of headings, radians.
    pub direction_std: f64,
    pub value: f64,
}

/// Circular standard deviation `sqrt(-2 ln R)` of a set of angles, `R` being
/// the mean resultant length. Saturates at π/2, which is also what a pair of
/// opposite headings yields.
pub fn circular_std(angles: &[f64]) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = ((s / n).hypot(c / n)).min(1.0);
    if r <= 0.0 {
        return FRAC_PI_2;
    }
    (-2.0 * r.ln()).sqrt().min(FRAC_PI_2)
}

fn population_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn mean_pairwise_distance(points: &[crate::scene::Point2]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += points[i].distance(points[j]);
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// `w_dist * distanceAvg + w_speed * speedStdDev + w_dir * directionStdDev`
/// over trajectories sharing one window.
pub fn group_incoherence(trajs: &[&WindowTrajectory], params: &TrackerParams) -> Incoherence {
    let len = trajs.iter().map(|t| t.len()).min().unwrap_or(0);
    if trajs.len() < 2 || len == 0 {
        // a lone trajectory has no spread in any of the three statistics
        return Incoherence::default();
    }

    let mut distance_sum = 0.0;
    let mut frame_points = Vec::with_capacity(trajs.len());
    for i in 0..len {
        frame_points.clear();
        frame_points.extend(trajs.iter().map(|t| t.positions[i]));
        distance_sum += mean_pairwise_distance(&frame_points);
    }
    let distance_avg = distance_sum / len as f64;

    let (mut speed_sum, mut dir_sum) = (0.0, 0.0);
    let steps = len - 1;
    let mut mags = Vec::with_capacity(trajs.len());
    let mut angles = Vec::with_capacity(trajs.len());
    for i in 0..steps {
        mags.clear();
        angles.clear();
        for t in trajs {
            let s = t.speeds[i];
            let m = s.x.hypot(s.y);
            mags.push(m);
            if m >= params.stationary_speed && m > 0.0 {
                angles.push(s.y.atan2(s.x));
            }
        }
        speed_sum += population_std(&mags);
        dir_sum += circular_std(&angles);
    }
    let (speed_std, direction_std) = if steps > 0 {
        (speed_sum / steps as f64, dir_sum / steps as f64)
    } else {
        (0.0, 0.0)
    };

    Incoherence {
        distance_avg,
        speed_std,
        direction_std,
        value: params.w_dist * distance_avg + params.w_speed * speed_std + params.w_dir * direction_std,
    }
}
