//! Seeded synthetic scenes with ground-truth motion masks.
//!
//! Lengths are in decimetres, so a unit support radius spans roughly a hand.
//! Noise is added in the actor frame before the optional view rotation,
//! which makes a rotated scene exactly the rotation of the unrotated one.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{Frame, Point3, PointCloudSequence, Vec3};

/// Number of distinct two-limb actions.
pub const N_ACTIONS: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// Ellipsoidal blob with semi-axes (0.3, 0.2, 0.1) oscillating along x
    /// with the given amplitude and period in frames.
    OscillatingBlob { period: f64, amplitude: f64 },
    /// Rod of the given half-length spinning about z, inside a box of
    /// uniformly scattered clutter points.
    RodSweep { half_length: f64, period: f64, clutter: usize },
    /// Camera-facing torso, head and two arms performing one of
    /// [`N_ACTIONS`] actions.
    TwoLimb { action: u32, period: f64 },
    /// One square plane, identical in every frame.
    StaticPlane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    pub kind: ScenarioKind,
    pub frames: usize,
    /// Motion phase at frame `i` is `2π · speed · i / period`; 0 freezes
    /// the scene.
    pub speed: f64,
    /// Rigid view rotation about the origin (axis, angle in radians).
    pub rotation: Option<(Vec3, f64)>,
    pub scale: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SynthScenario {
    pub fn new(kind: ScenarioKind, frames: usize, seed: u64) -> Self {
        SynthScenario { kind, frames, speed: 1.0, rotation: None, scale: 1.0, noise: 0.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::config("synthetic scenes need at least 2 frames"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise sigma must be non-negative"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config("scale must be positive"));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::config("speed must be non-negative"));
        }
        match self.kind {
            ScenarioKind::TwoLimb { action, .. } if action >= N_ACTIONS => {
                Err(Error::config(format!("two-limb action must be < {N_ACTIONS}")))
            }
            ScenarioKind::OscillatingBlob { period, .. } | ScenarioKind::RodSweep { period, .. } | ScenarioKind::TwoLimb { period, .. }
                if !(period > 0.0) =>
            {
                Err(Error::config("period must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub sequence: PointCloudSequence,
    /// Per frame, per point: whether the point lies on a moving part.
    pub motion: Vec<Vec<bool>>,
}

/// Generates the scene. A pure function of the scenario.
pub fn synth_generate(sc: &SynthScenario) -> Result<SynthOutput> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let noise = Normal::new(0.0, sc.noise).map_err(|e| Error::config(e.to_string()))?;
    let rot = sc.rotation.map(|(axis, angle)| Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle));
    let static_pts = match sc.kind {
        ScenarioKind::StaticPlane => plane(sc.scale),
        ScenarioKind::RodSweep { clutter, .. } => {
            (0..clutter).map(|_| Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-0.5..0.5))).collect()
        }
        _ => Vec::new(),
    };
    let phase0 = match sc.kind {
        ScenarioKind::TwoLimb { .. } => rng.random_range(0.0..2.0 * PI),
        _ => 0.0,
    };
    let static_noise: Vec<Vec3> = static_pts.iter().map(|_| Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))).collect();

    let mut frames = Vec::with_capacity(sc.frames);
    let mut motion = Vec::with_capacity(sc.frames);
    for i in 1..=sc.frames {
        let (mut pts, mut mask) = match sc.kind {
            ScenarioKind::OscillatingBlob { period, amplitude } => {
                let ph = 2.0 * PI * sc.speed * i as f64 / period;
                let pts: Vec<Point3> = blob(sc.scale).into_iter().map(|p| p + Vec3::new(amplitude * ph.sin(), 0.0, 0.0)).collect();
                let n = pts.len();
                (pts, vec![true; n])
            }
            ScenarioKind::RodSweep { half_length, period, .. } => {
                let ph = 2.0 * PI * sc.speed * i as f64 / period;
                let pts = rod(half_length * sc.scale, ph);
                let n = pts.len();
                (pts, vec![true; n])
            }
            ScenarioKind::TwoLimb { action, period } => {
                let ph = phase0 + 2.0 * PI * sc.speed * i as f64 / period;
                actor(action, ph, sc.scale)
            }
            ScenarioKind::StaticPlane => (Vec::new(), Vec::new()),
        };
        if sc.noise > 0.0 {
            for p in pts.iter_mut() {
                *p += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
        }
        for (p, n) in static_pts.iter().zip(&static_noise) {
            pts.push(p + n);
            mask.push(false);
        }
        if let Some(r) = &rot {
            pts.iter_mut().for_each(|p| *p = r * *p);
        }
        frames.push(Frame::new(i as u32, pts));
        motion.push(mask);
    }
    Ok(SynthOutput { sequence: PointCloudSequence::new(frames, 30.0)?, motion })
}

fn grid2(nu: usize, nv: usize) -> impl Iterator<Item = (f64, f64)> {
    (0..nv).flat_map(move |j| (0..nu).map(move |i| ((i as f64 + 0.5) / nu as f64, (j as f64 + 0.5) / nv as f64)))
}

fn plane(scale: f64) -> Vec<Point3> {
    grid2(24, 24).map(|(u, v)| Point3::new(scale * (6.0 * u - 3.0), scale * (6.0 * v - 3.0), 0.0)).collect()
}

fn blob(scale: f64) -> Vec<Point3> {
    // Fibonacci shells keep the sampling deterministic and even.
    let mut out = Vec::new();
    let golden = PI * (3.0 - 5f64.sqrt());
    for shell in 1..=4 {
        let s = shell as f64 / 4.0;
        let n = 30 * shell * shell;
        for k in 0..n {
            let y = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let rad = (1.0 - y * y).sqrt();
            let a = golden * k as f64;
            out.push(Point3::new(0.3 * s * scale * rad * a.cos(), 0.2 * s * scale * y, 0.1 * s * scale * rad * a.sin()));
        }
    }
    out
}

fn rod(half: f64, angle: f64) -> Vec<Point3> {
    let n = (half * 40.0).ceil() as usize;
    let dir = Vec3::new(angle.cos(), angle.sin(), 0.0);
    let side = Vec3::new(-angle.sin(), angle.cos(), 0.0);
    let mut out = Vec::new();
    for k in 0..=2 * n {
        let s = -half + half * k as f64 / n as f64;
        for (a, b) in [(0.0, 0.0), (0.04, 0.0), (-0.04, 0.0), (0.0, 0.04), (0.0, -0.04)] {
            out.push(Point3::from(dir * s + side * a + Vec3::z() * b));
        }
    }
    out
}

/// Surface samples of a cylinder of radius `rad` from `base` along `dir`,
/// keeping only the side facing the camera (outward normal with z < 0).
fn limb(base: Point3, dir: Vec3, len: f64, rad: f64, out: &mut Vec<Point3>) {
    let dir = dir.normalize();
    let helper = if dir.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = dir.cross(&helper).normalize();
    let e2 = dir.cross(&e1);
    let n_len = (len / 0.2).ceil() as usize;
    for k in 0..n_len {
        let s = len * (k as f64 + 0.5) / n_len as f64;
        for a in 0..16 {
            let ang = 2.0 * PI * a as f64 / 16.0;
            let normal = e1 * ang.cos() + e2 * ang.sin();
            if normal.z < -1e-9 {
                out.push(base + dir * s + normal * rad);
            }
        }
    }
}

/// Arm direction and length for one action at phase `ph`; `side` is -1 for
/// the actor's right (negative x) and +1 for the left.
fn arm_pose(action: u32, side: f64, ph: f64) -> (Vec3, f64) {
    let down = (Vec3::new(0.15 * side, -1.0, 0.0), 5.5);
    let wave = |ph: f64| {
        let a = 0.6 * ph.sin();
        (Vec3::new(side * (0.5 + a).sin(), (0.5 + a).cos(), -0.15), 5.5)
    };
    let punch = |ph: f64| (Vec3::new(0.1 * side, -0.05, -1.0), 3.5 + 2.0 * ph.sin());
    let swing = |ph: f64| {
        let a = 0.45 * PI + 0.55 * PI * ph.sin();
        (Vec3::new(0.1 * side, -a.cos(), -a.sin()), 5.5)
    };
    let left = side > 0.0;
    match action {
        0 if left => wave(ph),
        1 if !left => wave(ph),
        2 => wave(ph),
        3 if left => punch(ph),
        4 if !left => punch(ph),
        5 => swing(ph),
        _ => down,
    }
}

fn actor(action: u32, ph: f64, scale: f64) -> (Vec<Point3>, Vec<bool>) {
    let mut pts = Vec::new();
    for (u, v) in grid2(16, 24) {
        pts.push(Point3::new(4.0 * u - 2.0, 6.0 * v, -1.0));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let head = Point3::new(0.0, 7.3, -0.3);
    for k in 0..100 {
        // front hemisphere: normal z from -1 to 0
        let z = -(k as f64 + 0.5) / 100.0;
        let rad = (1.0 - z * z).sqrt();
        let a = golden * k as f64;
        pts.push(head + 1.1 * Vec3::new(rad * a.cos(), rad * a.sin(), z));
    }
    let n_static = pts.len();
    for side in [1.0, -1.0] {
        let (dir, len) = arm_pose(action, side, ph);
        limb(Point3::new(2.4 * side, 5.6, -1.0), dir, len, 0.45, &mut pts);
    }
    let mut mask = vec![false; n_static];
    mask.resize(pts.len(), true);
    let pts = pts.into_iter().map(|p| Point3::from(p.coords * scale)).collect();
    (pts, mask)
}

/// Actor scale and noise sigma of synthetic subject `s` (1-based).
pub fn subject_variant(s: u32) -> (f64, f64) {
    let k = (s.max(1) - 1) as f64;
    (0.85 + 0.3 * ((k * 0.37) % 1.0), 0.01 + 0.004 * k)
}

/// The two-limb scene performed by one synthetic subject.
pub fn subject_scene(action: u32, subject: u32, frames: usize, seed: u64) -> SynthScenario {
    let (scale, noise) = subject_variant(subject);
    let period = 18.0 + (subject % 4) as f64 * 2.0;
    SynthScenario {
        kind: ScenarioKind::TwoLimb { action, period },
        frames,
        speed: 1.0,
        rotation: None,
        scale,
        noise,
        seed: seed ^ (u64::from(subject) << 32) ^ u64::from(action).wrapping_mul(0x9E37_79B9),
    }
}

/// One tagged sequence per (subject, action) pair, subjects `1..=n_subjects`.
pub fn action_corpus(n_subjects: u32, frames: usize, seed: u64) -> Result<Vec<PointCloudSequence>> {
    let mut out = Vec::new();
    for s in 1..=n_subjects {
        for a in 0..N_ACTIONS {
            let seq = synth_generate(&subject_scene(a, s, frames, seed))?.sequence;
            out.push(seq.with_tags(Some(s), Some(a)));
        }
    }
    Ok(out)
}
