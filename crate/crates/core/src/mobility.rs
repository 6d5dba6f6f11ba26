//! Random-walk user mobility and trajectory datasets.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{Lane, Streams};

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

pub type UserPosition = Point;

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// The five outcomes of one mobility step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Stay,
    Forward,
    Back,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Stay, Move::Forward, Move::Back, Move::Left, Move::Right];

    pub fn apply(self, p: Point, step: f64) -> Point {
        match self {
            Move::Stay => p,
            Move::Forward => Point::new(p.x, p.y + step),
            Move::Back => Point::new(p.x, p.y - step),
            Move::Left => Point::new(p.x - step, p.y),
            Move::Right => Point::new(p.x + step, p.y),
        }
    }
}

/// Move probabilities `[stay, forward, back, left, right]` and step length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityProfile {
    probabilities: [f64; 5],
    step: f64,
}

impl MobilityProfile {
    pub fn new(probabilities: [f64; 5], step: f64) -> Result<Self> {
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative or non-finite move probability in {probabilities:?}")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("move probabilities sum to {sum}, expected 1")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
        }
        Ok(Self { probabilities, step })
    }

    pub fn uniform(step: f64) -> Result<Self> {
        Self::new([0.2; 5], step)
    }

    /// Stay with probability 0.2, move in `dominant` with probability 0.5 and
    /// in each of the other three directions with probability 0.1.
    pub fn drifting(dominant: Move, step: f64) -> Result<Self> {
        if dominant == Move::Stay {
            return Err(Error::InvalidArgument("drift direction cannot be Stay".into()));
        }
        let mut p = [0.2, 0.1, 0.1, 0.1, 0.1];
        let idx = Move::ALL.iter().position(|m| *m == dominant).expect("known move");
        p[idx] = 0.5;
        Self::new(p, step)
    }

    pub fn probabilities(&self) -> [f64; 5] {
        self.probabilities
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn sample_move<R: Rng + ?Sized>(&self, rng: &mut R) -> Move {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, p) in Move::ALL.iter().zip(self.probabilities) {
            acc += p;
            if u < acc {
                return *m;
            }
        }
        // Rounding left u above the cumulative sum: take the last nonzero move.
        let last = self.probabilities.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        Move::ALL[last]
    }
}

/// One unconstrained mobility step.
pub fn step_user<R: Rng + ?Sized>(pos: Point, profile: &MobilityProfile, rng: &mut R) -> Point {
    profile.sample_move(rng).apply(pos, profile.step)
}

/// Rectangular simulation area. Moves that would leave it become "stay".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Arena {
    /// 300 m × 100 m centred on the origin.
    fn default() -> Self {
        Self {
            x_min: -150.0,
            x_max: 150.0,
            y_min: -50.0,
            y_max: 50.0,
        }
    }
}

impl Arena {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn step<R: Rng + ?Sized>(&self, pos: Point, profile: &MobilityProfile, rng: &mut R) -> Point {
        let next = step_user(pos, profile, rng);
        if self.contains(next) {
            next
        } else {
            pos
        }
    }
}

/// Where users live: the arena plus the coverage discs they start in.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub arena: Arena,
    pub centers: Vec<Point>,
    pub radius: f64,
}

impl World {
    /// Uniform sample from the union of coverage discs intersected with the arena.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let r = self.radius;
        let x_lo = self.centers.iter().map(|c| c.x - r).fold(f64::INFINITY, f64::min).max(self.arena.x_min);
        let x_hi = self.centers.iter().map(|c| c.x + r).fold(f64::NEG_INFINITY, f64::max).min(self.arena.x_max);
        let y_lo = self.centers.iter().map(|c| c.y - r).fold(f64::INFINITY, f64::min).max(self.arena.y_min);
        let y_hi = self.centers.iter().map(|c| c.y + r).fold(f64::NEG_INFINITY, f64::max).min(self.arena.y_max);
        for _ in 0..100_000 {
            let p = Point::new(rng.random_range(x_lo..=x_hi), rng.random_range(y_lo..=y_hi));
            if self.centers.iter().any(|c| c.dist(p) <= r) {
                return p;
            }
        }
        // Discs barely intersect the arena; fall back to the first centre.
        self.centers[0]
    }

    pub fn initial_positions<R: Rng + ?Sized>(&self, num_users: usize, rng: &mut R) -> Vec<Point> {
        (0..num_users).map(|_| self.sample_initial(rng)).collect()
    }

    /// Advances every user by one slot.
    pub fn step_all<R: Rng + ?Sized>(&self, positions: &[Point], profiles: &[MobilityProfile], rng: &mut R) -> Vec<Point> {
        positions
            .iter()
            .zip(profiles)
            .map(|(p, prof)| self.arena.step(*p, prof, rng))
            .collect()
    }
}

/// Per-user profiles: the same profile for every user, a drifting profile
/// whose dominant direction cycles forward, back, left, right by user index, or
/// users that never move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    #[default]
    Uniform,
    Drifting,
    Static,
}

pub fn build_profiles(kind: ProfileKind, num_users: usize, step: f64) -> Result<Vec<MobilityProfile>> {
    (0..num_users)
        .map(|u| match kind {
            ProfileKind::Uniform => MobilityProfile::uniform(step),
            ProfileKind::Drifting => MobilityProfile::drifting(Move::ALL[1 + u % 4], step),
            ProfileKind::Static => MobilityProfile::new([1.0, 0.0, 0.0, 0.0, 0.0], step),
        })
        .collect()
}

/// Joint positions of all users at each slot of one trajectory.
pub type Trajectory = Vec<Vec<Point>>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub num_users: usize,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// CSV with header `traj,slot,u0x,u0y,...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["traj".to_string(), "slot".to_string()];
        for u in 0..self.num_users {
            header.push(format!("u{u}x"));
            header.push(format!("u{u}y"));
        }
        w.write_record(&header)?;
        for (i, traj) in self.trajectories.iter().enumerate() {
            for (t, slot) in traj.iter().enumerate() {
                let mut rec = vec![i.to_string(), t.to_string()];
                for p in slot {
                    rec.push(p.x.to_string());
                    rec.push(p.y.to_string());
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let cols = r.headers()?.len();
        if cols < 2 || (cols - 2) % 2 != 0 {
            return Err(Error::InvalidArgument(format!("{}: bad trajectory header", path.display())));
        }
        let num_users = (cols - 2) / 2;
        let mut trajectories: Vec<Trajectory> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
            };
            let traj: usize = parse(0)? as usize;
            if traj == trajectories.len() {
                trajectories.push(Vec::new());
            } else if traj + 1 != trajectories.len() {
                return Err(Error::InvalidArgument(format!("{}: trajectories out of order", path.display())));
            }
            let slot = (0..num_users)
                .map(|u| Ok(Point::new(parse(2 + 2 * u)?, parse(3 + 2 * u)?)))
                .collect::<Result<Vec<_>>>()?;
            trajectories.last_mut().expect("pushed").push(slot);
        }
        Ok(Self { num_users, trajectories })
    }
}

/// Generates `num_traj` independent trajectories of `traj_len` slots each.
/// Trajectory `i` draws from its own stream, so the result does not depend on
/// the execution mode.
pub fn generate_trajectories(
    world: &World,
    profiles: &[MobilityProfile],
    num_traj: usize,
    traj_len: usize,
    streams: &Streams,
    exec: Execution,
) -> Result<TrajectoryDataset> {
    let num_users = profiles.len();
    if num_users == 0 || num_traj == 0 || traj_len == 0 {
        return Err(Error::InvalidArgument("trajectory counts must be positive".into()));
    }
    let trajectories = exec.map_range(num_traj, |i| {
        let mut rng = streams.stream(Lane::Trajectories, i as u64);
        let mut pos = world.initial_positions(num_users, &mut rng);
        let mut traj = Vec::with_capacity(traj_len);
        traj.push(pos.clone());
        for _ in 1..traj_len {
            pos = world.step_all(&pos, profiles, &mut rng);
            traj.push(pos.clone());
        }
        traj
    });
    Ok(TrajectoryDataset { num_users, trajectories })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> World {
        World {
            arena: Arena::default(),
            centers: vec![Point::new(-100.0, 0.0), Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
            radius: 60.0,
        }
    }

    #[test]
    fn stay_only_profile() {
        let prof = MobilityProfile::new([1.0, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Point::new(3.0, -4.0);
        for _ in 0..100 {
            assert_eq!(step_user(p, &prof, &mut rng), p);
        }
    }

    #[test]
    fn forward_only_profile() {
        let prof = MobilityProfile::new([0.0, 1.0, 0.0, 0.0, 0.0], 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(step_user(Point::new(0.0, 0.0), &prof, &mut rng), Point::new(0.0, 2.0));
    }

    #[test]
    fn move_directions() {
        let p = Point::new(1.0, 1.0);
        assert_eq!(Move::Back.apply(p, 1.0), Point::new(1.0, 0.0));
        assert_eq!(Move::Left.apply(p, 1.0), Point::new(0.0, 1.0));
        assert_eq!(Move::Right.apply(p, 1.0), Point::new(2.0, 1.0));
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(MobilityProfile::new([0.5, 0.5, 0.1, 0.0, 0.0], 1.0).is_err());
        assert!(MobilityProfile::new([1.2, -0.2, 0.0, 0.0, 0.0], 1.0).is_err());
        assert!(MobilityProfile::new([0.2; 5], 0.0).is_err());
        assert!(MobilityProfile::drifting(Move::Stay, 1.0).is_err());
    }

    #[test]
    fn empirical_move_frequencies() {
        let probs = [0.1, 0.3, 0.15, 0.25, 0.2];
        let prof = MobilityProfile::new(probs, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n {
            let m = prof.sample_move(&mut rng);
            counts[Move::ALL.iter().position(|x| *x == m).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn arena_blocks_exit() {
        let prof = MobilityProfile::new([0.0, 1.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Arena::default();
        assert_eq!(a.step(Point::new(0.0, 50.0), &prof, &mut rng), Point::new(0.0, 50.0));
        assert_eq!(a.step(Point::new(0.0, 49.0), &prof, &mut rng), Point::new(0.0, 50.0));
    }

    #[test]
    fn initial_positions_are_covered() {
        let w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in w.initial_positions(2000, &mut rng) {
            assert!(w.centers.iter().any(|c| c.dist(p) <= 60.0));
            assert!(w.arena.contains(p));
        }
    }

    #[test]
    fn trajectories_deterministic_and_shaped() {
        let w = world();
        let profiles = build_profiles(ProfileKind::Uniform, 4, 1.0).unwrap();
        let s = Streams::new(7);
        let a = generate_trajectories(&w, &profiles, 10, 30, &s, Execution::Sequential).unwrap();
        let b = generate_trajectories(&w, &profiles, 10, 30, &s, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.trajectories.iter().all(|t| t.len() == 30 && t.iter().all(|s| s.len() == 4)));
        let one = generate_trajectories(&w, &profiles, 3, 1, &s, Execution::Sequential).unwrap();
        assert!(one.trajectories.iter().all(|t| t.len() == 1));
        assert!(generate_trajectories(&w, &profiles, 0, 30, &s, Execution::Sequential).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let w = world();
        let profiles = build_profiles(ProfileKind::Drifting, 3, 1.0).unwrap();
        let d = generate_trajectories(&w, &profiles, 4, 6, &Streams::new(1), Execution::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        d.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("traj,slot,u0x,u0y,u1x,u1y,u2x,u2y\n"));
        assert_eq!(TrajectoryDataset::read_csv(&path).unwrap(), d);
    }

    proptest! {
        #[test]
        fn each_step_changes_at_most_one_coordinate(seed in any::<u64>(), x in -100.0f64..100.0, y in -40.0f64..40.0) {
            let prof = MobilityProfile::uniform(1.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Point::new(x, y);
            let q = step_user(p, &prof, &mut rng);
            let dx = (q.x - p.x).abs();
            let dy = (q.y - p.y).abs();
            prop_assert!((dx == 0.0 && (dy == 0.0 || (dy - 1.5).abs() < 1e-12)) || (dy == 0.0 && (dx - 1.5).abs() < 1e-12));
        }
    }
}
