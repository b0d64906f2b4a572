//! Synthetic spinning-LiDAR simulator.
//!
//! Casts rays from a time-parameterized sensor trajectory into a scene of
//! planes, boxes and vertical cylinders, optionally with moving boxes playing
//! dynamic objects. Returns sensor-frame sweeps with exact per-point time
//! fractions, the true start/end poses, and per-point labels, which makes it
//! the ground-truth oracle for de-skewing, object removal and drift tests.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{interpolate, Frame, Point3, RigidTransform};
use crate::sweep::{Sweep, TimedPoint};

/// Scene geometry.
#[derive(Debug, Clone)]
pub enum Primitive {
    /// Infinite plane through `point` with unit `normal`.
    Plane {
        point: Point3,
        normal: Vector3<f64>,
    },
    /// Axis-aligned box; `velocity` is nonzero for dynamic objects.
    Cuboid {
        center: Point3,
        half_extents: Vector3<f64>,
        velocity: Vector3<f64>,
    },
    /// Infinite vertical cylinder.
    Cylinder { center_x: f64, center_y: f64, radius: f64 },
}

impl Primitive {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, Primitive::Cuboid { velocity, .. } if velocity.norm_squared() > 0.0)
    }
}

/// Scene plus the sensor trajectory as waypoints (time, pose), sorted by time.
#[derive(Debug, Clone, Default)]
pub struct SyntheticScene {
    pub primitives: Vec<Primitive>,
    pub waypoints: Vec<(f64, RigidTransform)>,
}

impl SyntheticScene {
    /// Pose at time `t`, piecewise interpolated between waypoints and clamped
    /// at the ends.
    pub fn pose_at(&self, t: f64) -> RigidTransform {
        assert!(!self.waypoints.is_empty(), "trajectory undefined");
        let first = &self.waypoints[0];
        if t <= first.0 {
            return first.1;
        }
        let last = self.waypoints.last().unwrap();
        if t >= last.0 {
            return last.1;
        }
        let next = self.waypoints.partition_point(|(wt, _)| *wt <= t);
        let (t0, a) = self.waypoints[next - 1];
        let (t1, b) = self.waypoints[next];
        interpolate(&a, &b, (t - t0) / (t1 - t0))
    }

    pub fn duration(&self) -> f64 {
        match (self.waypoints.first(), self.waypoints.last()) {
            (Some(first), Some(last)) => last.0 - first.0,
            _ => 0.0,
        }
    }
}

/// Sensor model used by the simulator.
#[derive(Debug, Clone, Copy)]
pub struct SensorParams {
    pub beams: usize,
    pub azimuth_steps: usize,
    /// Additive Gaussian range noise (meters, 1σ).
    pub noise_sigma: f64,
    pub max_range: f64,
    /// Beam elevation span, degrees (min, max).
    pub elevation_deg: (f64, f64),
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            beams: 32,
            azimuth_steps: 300,
            noise_sigma: 0.02,
            max_range: 120.0,
            elevation_deg: (-25.0, 3.0),
        }
    }
}

/// Which primitive a simulated point hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointLabel {
    pub primitive: usize,
    pub dynamic: bool,
}

/// One simulated sweep with ground truth attached.
#[derive(Debug, Clone)]
pub struct SimulatedSweep {
    pub sweep: Sweep,
    /// True pose at the start of the sweep.
    pub start_pose: RigidTransform,
    /// True pose at the end of the sweep.
    pub end_pose: RigidTransform,
    pub labels: Vec<PointLabel>,
}

/// Smallest ray parameter accepted as a hit; avoids self-intersections.
const RAY_EPS: f64 = 1e-9;

fn ray_plane(
    origin: &Point3,
    direction: &Vector3<f64>,
    point: &Point3,
    normal: &Vector3<f64>,
) -> Option<f64> {
    let denom = direction.dot(normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (point - origin).dot(normal) / denom;
    (t > RAY_EPS).then_some(t)
}

/// Slab-method ray/AABB test. Returns the entry distance from outside, or the
/// exit distance when the origin is inside (the interior walls are visible).
fn ray_aabb(
    origin: &Point3,
    direction: &Vector3<f64>,
    min: &Point3,
    max: &Point3,
) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let (o, d) = (origin[axis], direction[axis]);
        let (lo, hi) = (min[axis], max[axis]);
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let t1 = (lo - o) / d;
        let t2 = (hi - o) / d;
        t_enter = t_enter.max(t1.min(t2));
        t_exit = t_exit.min(t1.max(t2));
        if t_enter > t_exit {
            return None;
        }
    }
    if t_enter > RAY_EPS {
        Some(t_enter)
    } else if t_exit > RAY_EPS {
        Some(t_exit)
    } else {
        None
    }
}

fn ray_cylinder(
    origin: &Point3,
    direction: &Vector3<f64>,
    cx: f64,
    cy: f64,
    radius: f64,
) -> Option<f64> {
    let (ox, oy) = (origin.x - cx, origin.y - cy);
    let (dx, dy) = (direction.x, direction.y);
    let a = dx * dx + dy * dy;
    if a < 1e-16 {
        return None;
    }
    let b = 2.0 * (ox * dx + oy * dy);
    let c = ox * ox + oy * oy - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sqrt = disc.sqrt();
    let near = (-b - sqrt) / (2.0 * a);
    let far = (-b + sqrt) / (2.0 * a);
    if near > RAY_EPS {
        Some(near)
    } else if far > RAY_EPS {
        Some(far)
    } else {
        None
    }
}

fn cast(
    scene: &SyntheticScene,
    origin: &Point3,
    direction: &Vector3<f64>,
    time: f64,
    max_range: f64,
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (index, primitive) in scene.primitives.iter().enumerate() {
        let hit = match primitive {
            Primitive::Plane { point, normal } => ray_plane(origin, direction, point, normal),
            Primitive::Cuboid {
                center,
                half_extents,
                velocity,
            } => {
                let center = center + velocity * time;
                ray_aabb(
                    origin,
                    direction,
                    &(center - half_extents),
                    &(center + half_extents),
                )
            }
            Primitive::Cylinder {
                center_x,
                center_y,
                radius,
            } => ray_cylinder(origin, direction, *center_x, *center_y, *radius),
        };
        if let Some(t) = hit {
            if t <= max_range && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, index));
            }
        }
    }
    best
}

/// Simulates one sweep over `[t0, t1]`. Azimuth sweeps counterclockwise from
/// +X, proportional to time; rays that miss everything are dropped.
pub fn simulate_sweep(
    scene: &SyntheticScene,
    t0: f64,
    t1: f64,
    index: usize,
    sensor: &SensorParams,
    seed: u64,
) -> SimulatedSweep {
    assert!(t1 > t0 && sensor.beams >= 1 && sensor.azimuth_steps >= 1);
    let (elev_min, elev_max) = sensor.elevation_deg;
    let elevations: Vec<f64> = if sensor.beams == 1 {
        vec![(elev_min + elev_max) / 2.0]
    } else {
        (0..sensor.beams)
            .map(|b| elev_min + (elev_max - elev_min) * b as f64 / (sensor.beams - 1) as f64)
            .collect()
    };

    // One RNG per azimuth column keeps the noise stream independent of hit
    // patterns and lets columns run in parallel deterministically.
    let columns: Vec<(Vec<TimedPoint>, Vec<PointLabel>)> = (0..sensor.azimuth_steps)
        .into_par_iter()
        .map(|step| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let noise = Normal::new(0.0, sensor.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
            let fraction = step as f64 / sensor.azimuth_steps as f64;
            let azimuth = std::f64::consts::TAU * fraction;
            let time = t0 + (t1 - t0) * fraction;
            let pose = scene.pose_at(time);
            let origin = *pose.translation();
            let mut points = Vec::new();
            let mut labels = Vec::new();
            for &elevation_deg in &elevations {
                let elevation = elevation_deg.to_radians();
                let dir_sensor = Vector3::new(
                    elevation.cos() * azimuth.cos(),
                    elevation.cos() * azimuth.sin(),
                    elevation.sin(),
                );
                let dir_world = pose.rotate(&dir_sensor);
                let Some((range, primitive)) =
                    cast(scene, &origin, &dir_world, time, sensor.max_range)
                else {
                    continue;
                };
                let noisy = if sensor.noise_sigma > 0.0 {
                    range + noise.sample(&mut rng)
                } else {
                    range
                };
                points.push(TimedPoint {
                    position: dir_sensor * noisy,
                    time_fraction: fraction,
                    intensity: None,
                });
                labels.push(PointLabel {
                    primitive,
                    dynamic: scene.primitives[primitive].is_dynamic(),
                });
            }
            (points, labels)
        })
        .collect();

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (p, l) in columns {
        points.extend(p);
        labels.extend(l);
    }
    SimulatedSweep {
        sweep: Sweep {
            index,
            points,
            frame: Frame::Sensor,
            pre_deskewed: false,
        },
        start_pose: scene.pose_at(t0),
        end_pose: scene.pose_at(t1),
        labels,
    }
}

/// A complete simulation recipe: scene, sensor, sweep clock.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub scene: SyntheticScene,
    pub sensor: SensorParams,
    /// Sweep period in seconds.
    pub period: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl SceneSpec {
    /// Simulates sweep `k` over `[k·period, (k+1)·period]`.
    pub fn simulate(&self, k: usize) -> SimulatedSweep {
        simulate_sweep(
            &self.scene,
            k as f64 * self.period,
            (k + 1) as f64 * self.period,
            k,
            &self.sensor,
            self.seed ^ ((k as u64) << 20),
        )
    }

    /// True end-of-sweep poses for all sweeps.
    pub fn truth(&self) -> Vec<RigidTransform> {
        (0..self.sweeps)
            .map(|k| self.scene.pose_at((k + 1) as f64 * self.period))
            .collect()
    }
}

#[derive(Debug, Error)]
#[error("scene line {line}: {reason}")]
pub struct SceneParseError {
    pub line: usize,
    pub reason: String,
}

/// Parses the plain-text scene format. One directive per line:
///
/// ```text
/// plane    px py pz nx ny nz
/// cuboid   cx cy cz ex ey ez            # full extents
/// mcuboid  cx cy cz ex ey ez vx vy vz   # moving box, velocity m/s
/// cylinder cx cy radius
/// waypoint t x y z yaw_deg
/// beams N | azimuth_steps N | noise_sigma S | max_range R
/// elevation min_deg max_deg | period T | sweeps N | seed N
/// ```
pub fn parse_scene(text: &str) -> Result<SceneSpec, SceneParseError> {
    let mut spec = SceneSpec {
        scene: SyntheticScene::default(),
        sensor: SensorParams::default(),
        period: 0.1,
        sweeps: 0,
        seed: 0,
    };
    for (number, raw) in text.lines().enumerate() {
        let line = number + 1;
        let stripped = raw.split('#').next().unwrap().trim();
        if stripped.is_empty() {
            continue;
        }
        let mut fields = stripped.split_whitespace();
        let keyword = fields.next().unwrap();
        let rest: Vec<&str> = fields.collect();
        let bad = |reason: &str| SceneParseError {
            line,
            reason: reason.to_string(),
        };
        let nums = |expected: usize| -> Result<Vec<f64>, SceneParseError> {
            if rest.len() != expected {
                return Err(bad(&format!("expected {expected} numbers")));
            }
            rest.iter()
                .map(|tok| tok.parse::<f64>().map_err(|_| bad("bad number")))
                .collect()
        };
        match keyword {
            "plane" => {
                let v = nums(6)?;
                let normal = Vector3::new(v[3], v[4], v[5]);
                if normal.norm_squared() < 1e-12 {
                    return Err(bad("zero plane normal"));
                }
                spec.scene.primitives.push(Primitive::Plane {
                    point: Vector3::new(v[0], v[1], v[2]),
                    normal: normal.normalize(),
                });
            }
            "cuboid" => {
                let v = nums(6)?;
                spec.scene.primitives.push(Primitive::Cuboid {
                    center: Vector3::new(v[0], v[1], v[2]),
                    half_extents: Vector3::new(v[3] / 2.0, v[4] / 2.0, v[5] / 2.0),
                    velocity: Vector3::zeros(),
                });
            }
            "mcuboid" => {
                let v = nums(9)?;
                spec.scene.primitives.push(Primitive::Cuboid {
                    center: Vector3::new(v[0], v[1], v[2]),
                    half_extents: Vector3::new(v[3] / 2.0, v[4] / 2.0, v[5] / 2.0),
                    velocity: Vector3::new(v[6], v[7], v[8]),
                });
            }
            "cylinder" => {
                let v = nums(3)?;
                spec.scene.primitives.push(Primitive::Cylinder {
                    center_x: v[0],
                    center_y: v[1],
                    radius: v[2],
                });
            }
            "waypoint" => {
                let v = nums(5)?;
                let pose = RigidTransform::from_parts(
                    *RigidTransform::from_rotation_z(v[4].to_radians()).rotation(),
                    Vector3::new(v[1], v[2], v[3]),
                );
                spec.scene.waypoints.push((v[0], pose));
            }
            "beams" => spec.sensor.beams = nums(1)?[0] as usize,
            "azimuth_steps" => spec.sensor.azimuth_steps = nums(1)?[0] as usize,
            "noise_sigma" => spec.sensor.noise_sigma = nums(1)?[0],
            "max_range" => spec.sensor.max_range = nums(1)?[0],
            "elevation" => {
                let v = nums(2)?;
                spec.sensor.elevation_deg = (v[0], v[1]);
            }
            "period" => spec.period = nums(1)?[0],
            "sweeps" => spec.sweeps = nums(1)?[0] as usize,
            "seed" => spec.seed = nums(1)?[0] as u64,
            _ => return Err(bad(&format!("unknown directive `{keyword}`"))),
        }
    }
    if spec.scene.waypoints.is_empty() {
        return Err(SceneParseError {
            line: 0,
            reason: "scene has no waypoints".to_string(),
        });
    }
    spec.scene
        .waypoints
        .sort_by(|a, b| a.0.total_cmp(&b.0));
    if spec.sweeps == 0 {
        spec.sweeps = (spec.scene.duration() / spec.period).floor() as usize;
    }
    Ok(spec)
}

/// Serializes a spec in the format accepted by [`parse_scene`]. Waypoint
/// rotations must be pure yaw (which is what the builders produce).
pub fn format_scene(spec: &SceneSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "beams {}", spec.sensor.beams);
    let _ = writeln!(out, "azimuth_steps {}", spec.sensor.azimuth_steps);
    let _ = writeln!(out, "noise_sigma {}", spec.sensor.noise_sigma);
    let _ = writeln!(out, "max_range {}", spec.sensor.max_range);
    let _ = writeln!(
        out,
        "elevation {} {}",
        spec.sensor.elevation_deg.0, spec.sensor.elevation_deg.1
    );
    let _ = writeln!(out, "period {}", spec.period);
    let _ = writeln!(out, "sweeps {}", spec.sweeps);
    let _ = writeln!(out, "seed {}", spec.seed);
    for primitive in &spec.scene.primitives {
        match primitive {
            Primitive::Plane { point, normal } => {
                let _ = writeln!(
                    out,
                    "plane {} {} {} {} {} {}",
                    point.x, point.y, point.z, normal.x, normal.y, normal.z
                );
            }
            Primitive::Cuboid {
                center,
                half_extents,
                velocity,
            } => {
                if velocity.norm_squared() > 0.0 {
                    let _ = writeln!(
                        out,
                        "mcuboid {} {} {} {} {} {} {} {} {}",
                        center.x,
                        center.y,
                        center.z,
                        half_extents.x * 2.0,
                        half_extents.y * 2.0,
                        half_extents.z * 2.0,
                        velocity.x,
                        velocity.y,
                        velocity.z
                    );
                } else {
                    let _ = writeln!(
                        out,
                        "cuboid {} {} {} {} {} {}",
                        center.x,
                        center.y,
                        center.z,
                        half_extents.x * 2.0,
                        half_extents.y * 2.0,
                        half_extents.z * 2.0
                    );
                }
            }
            Primitive::Cylinder {
                center_x,
                center_y,
                radius,
            } => {
                let _ = writeln!(out, "cylinder {center_x} {center_y} {radius}");
            }
        }
    }
    for (t, pose) in &spec.scene.waypoints {
        let yaw = pose.rotation()[(1, 0)].atan2(pose.rotation()[(0, 0)]);
        let p = pose.translation();
        let _ = writeln!(
            out,
            "waypoint {} {} {} {} {}",
            t,
            p.x,
            p.y,
            p.z,
            yaw.to_degrees()
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Scene builders used by the benchmarks and tests.
// ---------------------------------------------------------------------------

/// Deterministic integer hash for jittering building layouts.
fn cell_hash(a: i64, b: i64, seed: u64) -> u64 {
    let mut x = (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ seed.wrapping_mul(0x1656_67B1_9E37_79F9);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x
}

fn unit_from(hash: u64, lane: u32) -> f64 {
    ((hash >> (lane * 8)) & 0xFFFF) as f64 / 65535.0
}

/// Speed/heading motion profile integrated at sweep granularity. Speeds are
/// meters per second, headings change by `yaw_rates[k]` radians over sweep k.
fn integrate_waypoints(
    speeds: &[f64],
    yaw_rates: &[f64],
    period: f64,
    sensor_height: f64,
) -> Vec<(f64, RigidTransform)> {
    assert_eq!(speeds.len(), yaw_rates.len());
    let mut waypoints = Vec::with_capacity(speeds.len() + 1);
    let mut yaw = 0.0f64;
    let mut position = Vector3::new(0.0, 0.0, sensor_height);
    waypoints.push((
        0.0,
        RigidTransform::from_parts(
            *RigidTransform::from_rotation_z(yaw).rotation(),
            position,
        ),
    ));
    for (k, (&v, &w)) in speeds.iter().zip(yaw_rates).enumerate() {
        let mid_yaw = yaw + w / 2.0;
        // Vehicle forward axis is +Y.
        let forward = Vector3::new(-mid_yaw.sin(), mid_yaw.cos(), 0.0);
        position += forward * v * period;
        yaw += w;
        waypoints.push((
            (k + 1) as f64 * period,
            RigidTransform::from_parts(
                *RigidTransform::from_rotation_z(yaw).rotation(),
                position,
            ),
        ));
    }
    waypoints
}

/// Fills the neighborhood of a path with axis-aligned "buildings" on a grid,
/// skipping cells too close to the road. Facades face all four directions, so
/// every pose degree of freedom stays observable along the route.
fn place_buildings(
    scene: &mut SyntheticScene,
    road_clearance: f64,
    pitch: f64,
    seed: u64,
) {
    let samples: Vec<Point3> = scene.waypoints.iter().map(|(_, p)| *p.translation()).collect();
    let (mut lo, mut hi) = (
        Vector3::repeat(f64::INFINITY),
        Vector3::repeat(f64::NEG_INFINITY),
    );
    for p in &samples {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let margin = 70.0;
    let cell_min_x = ((lo.x - margin) / pitch).floor() as i64;
    let cell_max_x = ((hi.x + margin) / pitch).ceil() as i64;
    let cell_min_y = ((lo.y - margin) / pitch).floor() as i64;
    let cell_max_y = ((hi.y + margin) / pitch).ceil() as i64;
    for cx in cell_min_x..=cell_max_x {
        for cy in cell_min_y..=cell_max_y {
            let hash = cell_hash(cx, cy, seed);
            // City blocks: footprints large enough that their clusters always
            // clear the small-object gate, streets wide enough that fronts
            // seen down a cross street stay wide too. Each intersection shows
            // facades facing all four directions, which is what keeps every
            // pose degree of freedom observable along the route.
            let width = 20.0 + 4.0 * unit_from(hash, 2);
            let depth = 20.0 + 4.0 * unit_from(hash, 3);
            let height = 7.0 + 5.0 * unit_from(hash, 4);
            let jitter_x = (unit_from(hash, 0) - 0.5) * 3.0;
            let jitter_y = (unit_from(hash, 1) - 0.5) * 3.0;
            let center = Vector3::new(
                cx as f64 * pitch + jitter_x,
                cy as f64 * pitch + jitter_y,
                0.0,
            );
            let near = samples
                .iter()
                .map(|p| (Vector3::new(p.x, p.y, 0.0) - center).norm())
                .fold(f64::INFINITY, f64::min);
            if near < road_clearance + width.max(depth) / 2.0 {
                continue;
            }
            scene.primitives.push(Primitive::Cuboid {
                center: Vector3::new(center.x, center.y, height / 2.0),
                half_extents: Vector3::new(width / 2.0, depth / 2.0, height / 2.0),
                velocity: Vector3::zeros(),
            });
        }
    }
}

/// Straight city-street run: parked start, ramp to cruise speed, buildings on
/// both sides. `sweeps` at 10 Hz with the default sensor.
pub fn corridor_scene(sweeps: usize, cruise_speed: f64, noise_sigma: f64, seed: u64) -> SceneSpec {
    let period = 0.1;
    let mut speeds = Vec::with_capacity(sweeps);
    let mut v: f64 = 0.0;
    for k in 0..sweeps {
        if k >= 2 {
            v = (v + 1.0).min(cruise_speed);
        }
        speeds.push(v);
    }
    let yaw_rates = vec![0.0; sweeps];
    let mut scene = SyntheticScene {
        primitives: vec![Primitive::Plane {
            point: Vector3::zeros(),
            normal: Vector3::z(),
        }],
        waypoints: integrate_waypoints(&speeds, &yaw_rates, period, 1.8),
    };
    place_buildings(&mut scene, 6.0, 44.0, seed.wrapping_add(101));
    SceneSpec {
        scene,
        sensor: SensorParams {
            noise_sigma,
            ..SensorParams::default()
        },
        period,
        sweeps,
        seed,
    }
}

/// Stationary sensor in the corridor scene.
pub fn static_scene(sweeps: usize, noise_sigma: f64, seed: u64) -> SceneSpec {
    let mut spec = corridor_scene(sweeps, 0.0, noise_sigma, seed);
    spec.scene.waypoints = integrate_waypoints(
        &vec![0.0; sweeps],
        &vec![0.0; sweeps],
        spec.period,
        1.8,
    );
    spec
}

/// Square city-block loop of roughly 200 m driven in `sweeps` sweeps, with a
/// parked start, speed ramp, smoothed 90° corners and a few moving cars.
pub fn square_loop_scene(sweeps: usize, noise_sigma: f64, seed: u64) -> SceneSpec {
    let period = 0.1;

    // Corner yaw profile: triangular ramp over `corner_sweeps`, total 90°.
    let corner_sweeps = 14usize;
    let mut corner_profile = vec![0.0f64; corner_sweeps];
    {
        let half = corner_sweeps / 2;
        let mut raw = vec![0.0f64; corner_sweeps];
        let mut total = 0.0;
        for (i, r) in raw.iter_mut().enumerate() {
            let tri = if i < half {
                (i + 1) as f64
            } else {
                (corner_sweeps - i) as f64
            };
            *r = tri;
            total += tri;
        }
        let scale = -std::f64::consts::FRAC_PI_2 / total; // right turns
        for (slot, r) in corner_profile.iter_mut().zip(&raw) {
            *slot = r * scale;
        }
    }

    // Speed: parked, then ramp by at most 1 m/s per sweep toward a cruise
    // speed chosen so the loop closes near 200 m.
    let cruise = 30.0f64;
    let mut speeds = Vec::with_capacity(sweeps);
    let mut yaw_rates = vec![0.0f64; sweeps];
    let mut v: f64 = 0.0;
    for k in 0..sweeps {
        if k >= 2 {
            v = (v + 1.0).min(cruise);
        }
        speeds.push(v);
    }
    // Distribute the four corners evenly over the moving part of the run.
    let first_move = 2;
    let usable = sweeps - first_move;
    for corner in 0..4 {
        let start = first_move + usable * (2 * corner + 1) / 9;
        for (i, &w) in corner_profile.iter().enumerate() {
            if start + i < sweeps {
                yaw_rates[start + i] += w;
            }
        }
    }

    let mut scene = SyntheticScene {
        primitives: vec![Primitive::Plane {
            point: Vector3::zeros(),
            normal: Vector3::z(),
        }],
        waypoints: integrate_waypoints(&speeds, &yaw_rates, period, 1.8),
    };
    place_buildings(&mut scene, 6.5, 44.0, seed.wrapping_add(7));

    // A few car-sized movers crossing the route at different times.
    let anchors = [sweeps / 4, sweeps / 2, (3 * sweeps) / 4];
    for (i, &k) in anchors.iter().enumerate() {
        let when = k as f64 * period;
        let pose = scene.pose_at(when);
        let forward = pose.rotate(&Vector3::new(0.0, 1.0, 0.0));
        let side = pose.rotate(&Vector3::new(1.0, 0.0, 0.0));
        // Oncoming in the adjacent lane, passing the sensor around sweep k.
        let speed = 8.0 + 2.0 * i as f64;
        let start = pose.translation() + forward * (speed * when) + side * 3.0
            - Vector3::new(0.0, 0.0, pose.translation().z)
            + Vector3::new(0.0, 0.0, 0.75);
        scene.primitives.push(Primitive::Cuboid {
            center: start,
            half_extents: Vector3::new(2.0, 1.0, 0.75),
            velocity: -forward * speed,
        });
    }

    SceneSpec {
        scene,
        sensor: SensorParams {
            noise_sigma,
            ..SensorParams::default()
        },
        period,
        sweeps,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_sensor_in_unit_cylinder_reads_range_one() {
        let scene = SyntheticScene {
            primitives: vec![Primitive::Cylinder {
                center_x: 0.0,
                center_y: 0.0,
                radius: 1.0,
            }],
            waypoints: vec![
                (0.0, RigidTransform::identity()),
                (1.0, RigidTransform::identity()),
            ],
        };
        let sensor = SensorParams {
            beams: 1,
            azimuth_steps: 90,
            noise_sigma: 0.0,
            max_range: 10.0,
            elevation_deg: (0.0, 0.0),
        };
        let sim = simulate_sweep(&scene, 0.0, 0.1, 0, &sensor, 1);
        assert_eq!(sim.sweep.len(), 90);
        for p in &sim.sweep.points {
            assert!((p.position.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_seed_is_bit_deterministic() {
        let spec = corridor_scene(3, 8.0, 0.02, 11);
        let a = spec.simulate(1);
        let b = spec.simulate(1);
        assert_eq!(a.sweep.len(), b.sweep.len());
        for (pa, pb) in a.sweep.points.iter().zip(&b.sweep.points) {
            assert_eq!(pa.position, pb.position);
            assert_eq!(pa.time_fraction, pb.time_fraction);
        }
    }

    #[test]
    fn deskewing_with_true_poses_recovers_the_box() {
        // Sensor translating 1 m during the sweep inside a big box.
        let half = 20.0;
        let scene = SyntheticScene {
            primitives: vec![Primitive::Cuboid {
                center: Vector3::new(0.0, 0.0, 0.0),
                half_extents: Vector3::repeat(half),
                velocity: Vector3::zeros(),
            }],
            waypoints: vec![
                (0.0, RigidTransform::identity()),
                (
                    0.1,
                    RigidTransform::from_translation(Vector3::new(0.0, 1.0, 0.0)),
                ),
            ],
        };
        let sensor = SensorParams {
            beams: 8,
            azimuth_steps: 180,
            noise_sigma: 0.0,
            max_range: 100.0,
            elevation_deg: (-20.0, 20.0),
        };
        let sim = simulate_sweep(&scene, 0.0, 0.1, 0, &sensor, 3);
        assert!(!sim.sweep.is_empty());
        let world = crate::deskew::deskew_sweep(&sim.sweep, &sim.start_pose, &sim.end_pose);
        for p in &world {
            let to_face = (p.x.abs() - half)
                .abs()
                .min((p.y.abs() - half).abs())
                .min((p.z.abs() - half).abs());
            assert!(to_face < 1e-6, "point {p} off the box faces by {to_face}");
        }
    }

    #[test]
    fn moving_boxes_are_labeled_dynamic() {
        let mut spec = corridor_scene(10, 5.0, 0.0, 2);
        spec.scene.primitives.push(Primitive::Cuboid {
            center: Vector3::new(3.0, 8.0, 0.75),
            half_extents: Vector3::new(2.0, 1.0, 0.75),
            velocity: Vector3::new(0.0, -4.0, 0.0),
        });
        let sim = spec.simulate(1);
        let dynamic_points = sim.labels.iter().filter(|l| l.dynamic).count();
        assert!(dynamic_points > 0, "the mover must be visible");
        for (label, point) in sim.labels.iter().zip(&sim.sweep.points) {
            if label.dynamic {
                // The mover sits to the right of and ahead of the sensor.
                assert!(point.position.norm() < 20.0);
            }
        }
    }

    #[test]
    fn scene_text_round_trips() {
        let spec = square_loop_scene(8, 0.01, 5);
        let text = format_scene(&spec);
        let parsed = parse_scene(&text).unwrap();
        assert_eq!(parsed.sweeps, spec.sweeps);
        assert_eq!(parsed.sensor.beams, spec.sensor.beams);
        assert_eq!(
            parsed.scene.primitives.len(),
            spec.scene.primitives.len()
        );
        // Poses survive the text format to within print precision.
        for ((ta, a), (tb, b)) in spec.scene.waypoints.iter().zip(&parsed.scene.waypoints) {
            assert!((ta - tb).abs() < 1e-12);
            assert!((a.translation() - b.translation()).norm() < 1e-9);
            assert!(a.rotation_angle_to(b) < 1e-9);
        }
        let missing = parse_scene("plane 0 0 0 0 0 1\n");
        assert!(missing.is_err());
    }

    #[test]
    fn loop_scene_path_is_about_200_m_and_closes_heading() {
        let spec = square_loop_scene(80, 0.02, 1);
        let truth = spec.truth();
        let mut length = 0.0;
        for w in truth.windows(2) {
            length += (w[1].translation() - w[0].translation()).norm();
        }
        assert!(
            (170.0..=230.0).contains(&length),
            "loop path length {length}"
        );
        // Four right-angle corners: heading returns to start.
        let final_yaw = truth.last().unwrap().rotation_angle_to(&truth[0]);
        assert!(final_yaw < 0.3, "heading did not close: {final_yaw} rad");
    }
}
