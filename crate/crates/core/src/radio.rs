//! Channel gains, interference, Shannon rates, uplink delay and the
//! per-slot resource-block allocation record.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::Point;

/// Norms below this are clamped before computing a gain.
pub const MIN_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_positions: Vec<Point>,
    pub cloud_position: Point,
    pub coverage_radius: f64,
}

impl Default for Topology {
    /// Three BSs on the x axis 100 m apart, cloud above the middle one.
    fn default() -> Self {
        Self {
            bs_positions: vec![Point::new(-100.0, 0.0), Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
            cloud_position: Point::new(0.0, 50.0),
            coverage_radius: 60.0,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        if self.bs_positions.is_empty() {
            return Err(Error::Config("topology needs at least one base station".into()));
        }
        if !(self.coverage_radius > 0.0 && self.coverage_radius.is_finite()) {
            return Err(Error::Config(format!("coverage radius must be positive, got {}", self.coverage_radius)));
        }
        if !self.cloud_position.is_finite() || self.bs_positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite topology coordinate".into()));
        }
        Ok(())
    }

    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    /// Boundary inclusive.
    pub fn covers(&self, bs: usize, p: Point) -> bool {
        self.bs_positions[bs].dist(p) <= self.coverage_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathlossMode {
    /// `o / ‖Δ‖`: the distance term is `d = sqrt(‖Δ‖)` and the gain `o d^-2`.
    #[default]
    InverseDistance,
    /// `o / ‖Δ‖²`.
    InverseSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth: f64,
    pub power: f64,
    pub noise: f64,
    pub payload: f64,
    pub delay_cap: f64,
    pub num_rbs: usize,
    pub pathloss: PathlossMode,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth: 1.0,
            power: 1.0,
            noise: 1e-5,
            payload: 1.0,
            delay_cap: 1.0,
            num_rbs: 12,
            pathloss: PathlossMode::InverseDistance,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bandwidth", self.bandwidth),
            ("power", self.power),
            ("noise", self.noise),
            ("payload", self.payload),
            ("delay_cap", self.delay_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_rbs == 0 {
            return Err(Error::Config("num_rbs must be positive".into()));
        }
        Ok(())
    }

    /// `B log2(1 + P g / (I + B N0))`.
    pub fn shannon(&self, gain: f64, interference: f64) -> f64 {
        let snr = self.power * gain / (interference + self.bandwidth * self.noise);
        self.bandwidth * snr.ln_1p() / std::f64::consts::LN_2
    }
}

/// Small-scale fading coefficients, one per (user, BS) and one per (cloud, BS).
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    num_users: usize,
    num_bs: usize,
    /// Row-major `(num_users + 1) × num_bs`; the last row is the cloud.
    values: Vec<f64>,
}

impl FadingDraw {
    /// All coefficients equal to one.
    pub fn unit(num_users: usize, num_bs: usize) -> Self {
        Self {
            num_users,
            num_bs,
            values: vec![1.0; (num_users + 1) * num_bs],
        }
    }

    /// Independent unit-mean exponential coefficients.
    pub fn draw<R: Rng + ?Sized>(num_users: usize, num_bs: usize, rng: &mut R) -> Self {
        let values = (0..(num_users + 1) * num_bs).map(|_| Exp1.sample(rng)).collect();
        Self { num_users, num_bs, values }
    }

    pub fn from_values(num_users: usize, num_bs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (num_users + 1) * num_bs {
            return Err(Error::dim("FadingDraw", (num_users + 1) * num_bs, values.len()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("fading coefficients must be finite and nonnegative".into()));
        }
        Ok(Self { num_users, num_bs, values })
    }

    pub fn user(&self, user: usize, bs: usize) -> f64 {
        self.values[user * self.num_bs + bs]
    }

    pub fn cloud(&self, bs: usize) -> f64 {
        self.values[self.num_users * self.num_bs + bs]
    }

    pub fn set_user(&mut self, user: usize, bs: usize, v: f64) {
        self.values[user * self.num_bs + bs] = v;
    }

    pub fn set_cloud(&mut self, bs: usize, v: f64) {
        self.values[self.num_users * self.num_bs + bs] = v;
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }
}

/// Gain from a transmitter at `bs` to `target` with fading `o`.
/// Returns the gain and whether the distance was clamped.
pub fn channel_gain(target: Point, bs: Point, o: f64, mode: PathlossMode) -> (f64, bool) {
    let norm = target.dist(bs);
    let clamped = norm < MIN_DISTANCE;
    let norm = norm.max(MIN_DISTANCE);
    let g = match mode {
        PathlossMode::InverseDistance => o / norm,
        PathlossMode::InverseSquare => o / (norm * norm),
    };
    (g, clamped)
}

/// What an RB of one BS carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbUse {
    Free,
    User(usize),
    Uplink,
    /// More than one transmission (only possible in hand-built allocations).
    Conflict,
}

/// RB assignment of every BS in one slot: `x[bs][user][rb]` and `y[bs][rb]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    num_bs: usize,
    num_users: usize,
    num_rbs: usize,
    x: Vec<bool>,
    y: Vec<bool>,
}

impl Allocation {
    pub fn new(num_bs: usize, num_users: usize, num_rbs: usize) -> Self {
        Self {
            num_bs,
            num_users,
            num_rbs,
            x: vec![false; num_bs * num_users * num_rbs],
            y: vec![false; num_bs * num_rbs],
        }
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    fn xi(&self, bs: usize, user: usize, rb: usize) -> usize {
        (bs * self.num_users + user) * self.num_rbs + rb
    }

    pub fn x(&self, bs: usize, user: usize, rb: usize) -> bool {
        self.x[self.xi(bs, user, rb)]
    }

    pub fn y(&self, bs: usize, rb: usize) -> bool {
        self.y[bs * self.num_rbs + rb]
    }

    pub fn set_x(&mut self, bs: usize, user: usize, rb: usize, v: bool) {
        let i = self.xi(bs, user, rb);
        self.x[i] = v;
    }

    pub fn set_y(&mut self, bs: usize, rb: usize, v: bool) {
        self.y[bs * self.num_rbs + rb] = v;
    }

    /// Number of transmissions (users plus uplink) BS `bs` places on `rb`.
    pub fn load(&self, bs: usize, rb: usize) -> usize {
        (0..self.num_users).filter(|&u| self.x(bs, u, rb)).count() + usize::from(self.y(bs, rb))
    }

    pub fn rb_use(&self, bs: usize, rb: usize) -> RbUse {
        let users: Vec<usize> = (0..self.num_users).filter(|&u| self.x(bs, u, rb)).collect();
        match (users.as_slice(), self.y(bs, rb)) {
            ([], false) => RbUse::Free,
            ([], true) => RbUse::Uplink,
            ([u], false) => RbUse::User(*u),
            _ => RbUse::Conflict,
        }
    }

    /// RBs of `bs` assigned to `user`.
    pub fn user_rbs(&self, bs: usize, user: usize) -> Vec<usize> {
        (0..self.num_rbs).filter(|&n| self.x(bs, user, n)).collect()
    }

    /// The first (and in valid allocations the only) `(bs, rb)` serving `user`.
    pub fn serving(&self, user: usize) -> Option<(usize, usize)> {
        (0..self.num_bs).find_map(|m| self.user_rbs(m, user).first().map(|&n| (m, n)))
    }

    pub fn uplink_rb(&self, bs: usize) -> Option<usize> {
        (0..self.num_rbs).find(|&n| self.y(bs, n))
    }

    pub fn clear_bs(&mut self, bs: usize) {
        for u in 0..self.num_users {
            for n in 0..self.num_rbs {
                self.set_x(bs, u, n, false);
            }
        }
        for n in 0..self.num_rbs {
            self.set_y(bs, n, false);
        }
    }

    /// Identifiers of the violated resource constraints:
    /// `8b` a user holds more than one RB across all BSs,
    /// `8c` an RB of one BS is given to more than one user,
    /// `8e` a BS reserves more than one uplink RB,
    /// `8f` an RB of one BS carries more than one transmission in total.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let user_over = (0..self.num_users).any(|u| {
            (0..self.num_bs)
                .map(|m| self.user_rbs(m, u).len())
                .sum::<usize>()
                > 1
        });
        if user_over {
            out.push("8b");
        }
        let rb_users = (0..self.num_bs).any(|m| {
            (0..self.num_rbs).any(|n| (0..self.num_users).filter(|&u| self.x(m, u, n)).count() > 1)
        });
        if rb_users {
            out.push("8c");
        }
        if (0..self.num_bs).any(|m| (0..self.num_rbs).filter(|&n| self.y(m, n)).count() > 1) {
            out.push("8e");
        }
        if (0..self.num_bs).any(|m| (0..self.num_rbs).any(|n| self.load(m, n) > 1)) {
            out.push("8f");
        }
        out
    }
}

/// Everything needed to evaluate rates in one slot.
#[derive(Debug, Clone, Copy)]
pub struct Channel<'a> {
    pub topology: &'a Topology,
    pub params: &'a RadioParams,
    pub fading: &'a FadingDraw,
    pub positions: &'a [Point],
}

impl<'a> Channel<'a> {
    pub fn new(topology: &'a Topology, params: &'a RadioParams, fading: &'a FadingDraw, positions: &'a [Point]) -> Result<Self> {
        if fading.num_bs() != topology.num_bs() || fading.num_users() != positions.len() {
            return Err(Error::dim(
                "Channel fading",
                format!("{}x{}", positions.len(), topology.num_bs()),
                format!("{}x{}", fading.num_users(), fading.num_bs()),
            ));
        }
        Ok(Self {
            topology,
            params,
            fading,
            positions,
        })
    }

    /// Gain from BS `bs` at the position of `user`.
    pub fn user_gain(&self, bs: usize, user: usize) -> f64 {
        channel_gain(
            self.positions[user],
            self.topology.bs_positions[bs],
            self.fading.user(user, bs),
            self.params.pathloss,
        )
        .0
    }

    /// Gain from BS `bs` at the cloud.
    pub fn cloud_gain(&self, bs: usize) -> f64 {
        channel_gain(
            self.topology.cloud_position,
            self.topology.bs_positions[bs],
            self.fading.cloud(bs),
            self.params.pathloss,
        )
        .0
    }

    /// Interference seen by `user` on `rb` when served by `serving_bs`:
    /// other BSs' transmissions to users other than `user`, plus their uplinks.
    pub fn downlink_interference(&self, user: usize, serving_bs: usize, rb: usize, alloc: &Allocation) -> f64 {
        let mut total = 0.0;
        for j in 0..alloc.num_bs() {
            if j == serving_bs {
                continue;
            }
            let users = (0..alloc.num_users()).filter(|&i| i != user && alloc.x(j, i, rb)).count();
            let count = users + usize::from(alloc.y(j, rb));
            if count > 0 {
                total += count as f64 * self.params.power * self.user_gain(j, user);
            }
        }
        total
    }

    /// Interference at the cloud on `rb` for the uplink of `bs`: every
    /// transmission of every other BS on that RB.
    pub fn uplink_interference(&self, bs: usize, rb: usize, alloc: &Allocation) -> f64 {
        let mut total = 0.0;
        for j in 0..alloc.num_bs() {
            if j == bs {
                continue;
            }
            let count = alloc.load(j, rb);
            if count > 0 {
                total += count as f64 * self.params.power * self.cloud_gain(j);
            }
        }
        total
    }

    /// Rate of `user` on `rb` if served by `bs`, given `alloc` for everyone else.
    pub fn downlink_rate_on(&self, user: usize, bs: usize, rb: usize, alloc: &Allocation) -> f64 {
        self.params
            .shannon(self.user_gain(bs, user), self.downlink_interference(user, bs, rb, alloc))
    }

    pub fn downlink_rate(&self, user: usize, bs: usize, alloc: &Allocation) -> f64 {
        alloc
            .user_rbs(bs, user)
            .into_iter()
            .map(|n| self.downlink_rate_on(user, bs, n, alloc))
            .fold(0.0, |a, b| a + b)
    }

    /// Total rate of `user` over every BS.
    pub fn user_rate(&self, user: usize, alloc: &Allocation) -> f64 {
        (0..alloc.num_bs()).map(|m| self.downlink_rate(user, m, alloc)).fold(0.0, |a, b| a + b)
    }

    pub fn uplink_rate_on(&self, bs: usize, rb: usize, alloc: &Allocation) -> f64 {
        self.params
            .shannon(self.cloud_gain(bs), self.uplink_interference(bs, rb, alloc))
    }

    pub fn uplink_rate(&self, bs: usize, alloc: &Allocation) -> f64 {
        (0..alloc.num_rbs())
            .filter(|&n| alloc.y(bs, n))
            .map(|n| self.uplink_rate_on(bs, n, alloc))
            .fold(0.0, |a, b| a + b)
    }

    pub fn uplink_delay(&self, bs: usize, alloc: &Allocation) -> f64 {
        uplink_delay(self.params.payload, self.uplink_rate(bs, alloc))
    }
}

/// `payload / rate`, infinite when the rate is zero.
pub fn uplink_delay(payload: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        payload / rate
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn gain_examples() {
        let (g, _) = channel_gain(Point::new(100.0, 0.0), Point::new(0.0, 0.0), 1.0, PathlossMode::InverseDistance);
        assert!(close(g, 0.01, 1e-15));
        let (g, _) = channel_gain(Point::new(100.0, 0.0), Point::new(0.0, 0.0), 0.0, PathlossMode::InverseDistance);
        assert_eq!(g, 0.0);
        let (g, _) = channel_gain(Point::new(0.0, 4.0), Point::new(0.0, 0.0), 2.0, PathlossMode::InverseDistance);
        assert_eq!(g, 0.5);
        let (g, _) = channel_gain(Point::new(0.0, 4.0), Point::new(0.0, 0.0), 2.0, PathlossMode::InverseSquare);
        assert_eq!(g, 0.125);
        let (g, clamped) = channel_gain(Point::new(0.0, 0.0), Point::new(0.0, 0.0), 1.0, PathlossMode::InverseDistance);
        assert!(clamped);
        assert_eq!(g, 1e6);
    }

    #[test]
    fn gain_two_over_four_is_half() {
        // d = sqrt(4) = 2 and o d^-2 = 2 / 4.
        let d = 4.0f64.sqrt();
        assert_eq!(2.0 / (d * d), 0.5);
    }

    fn one_bs_one_user(pos: Point) -> (Topology, RadioParams, FadingDraw, Vec<Point>) {
        let topo = Topology {
            bs_positions: vec![Point::new(0.0, 0.0)],
            cloud_position: Point::new(0.0, 100.0),
            coverage_radius: 200.0,
        };
        (topo, RadioParams::default(), FadingDraw::unit(1, 1), vec![pos])
    }

    #[test]
    fn isolated_link_rate() {
        let (topo, params, fading, pos) = one_bs_one_user(Point::new(100.0, 0.0));
        let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
        let mut a = Allocation::new(1, 1, 2);
        assert_eq!(ch.downlink_rate(0, 0, &a), 0.0);
        a.set_x(0, 0, 1, true);
        let r = ch.downlink_rate(0, 0, &a);
        assert!(close(r, 1001f64.log2(), 1e-9), "{r}");
        assert!((params.shannon(0.01, 0.01) - 0.9993).abs() < 1e-4);
        assert_eq!(ch.downlink_interference(0, 0, 1, &a), 0.0);
    }

    #[test]
    fn isolated_uplink_rate_and_delay() {
        let (topo, params, fading, pos) = one_bs_one_user(Point::new(10.0, 0.0));
        let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
        let mut a = Allocation::new(1, 1, 2);
        assert_eq!(ch.uplink_rate(0, &a), 0.0);
        assert_eq!(ch.uplink_delay(0, &a), f64::INFINITY);
        a.set_y(0, 0, true);
        let g = 0.01;
        let expect = (1.0 + g / 1e-5f64).log2();
        assert!(close(ch.uplink_rate(0, &a), expect, 1e-12));
        assert!(close(ch.uplink_delay(0, &a), 1.0 / expect, 1e-12));
        assert_eq!(uplink_delay(10.0, 5.0), 2.0);
    }

    fn two_bs() -> (Topology, RadioParams, FadingDraw, Vec<Point>) {
        let topo = Topology {
            bs_positions: vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
            cloud_position: Point::new(0.0, 50.0),
            coverage_radius: 60.0,
        };
        // User 0 sits 100 m from BS 1, so BS 1's gain at user 0 is 0.01.
        (topo, RadioParams::default(), FadingDraw::unit(2, 2), vec![Point::new(0.0, 10.0), Point::new(100.0, 10.0)])
    }

    #[test]
    fn downlink_interference_terms() {
        let (topo, params, fading, pos) = two_bs();
        let pos = vec![Point::new(0.0, 0.0), pos[1]];
        let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
        let mut a = Allocation::new(2, 2, 3);
        a.set_x(0, 0, 0, true);
        a.set_x(1, 1, 0, true);
        assert!(close(ch.downlink_interference(0, 0, 0, &a), 0.01, 1e-15));
        // Uplink-only neighbor on rb 1.
        a.set_y(1, 1, true);
        assert!(close(ch.downlink_interference(0, 0, 1, &a), 0.01, 1e-15));
        assert_eq!(ch.downlink_interference(0, 0, 2, &a), 0.0);
        // The victim itself is excluded from the neighbor's user sum.
        let mut b = Allocation::new(2, 2, 1);
        b.set_x(1, 0, 0, true);
        assert_eq!(ch.downlink_interference(0, 0, 0, &b), 0.0);
    }

    #[test]
    fn uplink_interference_terms() {
        let (topo, params, fading, pos) = two_bs();
        let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
        let g = ch.cloud_gain(1);
        let mut a = Allocation::new(2, 2, 2);
        a.set_y(0, 0, true);
        let isolated = ch.uplink_rate(0, &a);
        a.set_x(1, 1, 0, true);
        assert!(close(ch.uplink_interference(0, 0, &a), g, 1e-15));
        assert!(ch.uplink_rate(0, &a) < isolated);
        // All users count at the cloud, including user 0.
        a.set_x(1, 0, 0, true);
        assert!(close(ch.uplink_interference(0, 0, &a), 2.0 * g, 1e-15));
    }

    #[test]
    fn uplink_two_interferers_add() {
        let topo = Topology {
            bs_positions: vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0), Point::new(-100.0, 0.0)],
            cloud_position: Point::new(0.0, 50.0),
            coverage_radius: 60.0,
        };
        let params = RadioParams::default();
        let fading = FadingDraw::from_values(1, 3, vec![1.0, 1.0, 1.0, 1.0, 0.5, 2.0]).unwrap();
        let pos = vec![Point::new(0.0, 0.0)];
        let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
        let mut a = Allocation::new(3, 1, 1);
        a.set_y(1, 0, true);
        a.set_y(2, 0, true);
        let expect = ch.cloud_gain(1) + ch.cloud_gain(2);
        assert!(close(ch.uplink_interference(0, 0, &a), expect, 1e-15));
    }

    #[test]
    fn single_bs_has_no_interference() {
        let (topo, params, fading, pos) = one_bs_one_user(Point::new(3.0, 4.0));
        let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
        let mut a = Allocation::new(1, 1, 1);
        a.set_x(0, 0, 0, true);
        assert_eq!(ch.downlink_interference(0, 0, 0, &a), 0.0);
        assert_eq!(ch.uplink_interference(0, 0, &a), 0.0);
    }

    #[test]
    fn channel_rejects_mismatched_fading() {
        let (topo, params, _, pos) = one_bs_one_user(Point::new(3.0, 4.0));
        let f = FadingDraw::unit(2, 1);
        assert!(Channel::new(&topo, &params, &f, &pos).is_err());
        assert!(FadingDraw::from_values(1, 1, vec![1.0]).is_err());
        assert!(FadingDraw::from_values(1, 1, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn violations_detected() {
        let mut a = Allocation::new(2, 3, 2);
        assert!(a.violations().is_empty());
        a.set_x(0, 0, 0, true);
        a.set_x(0, 1, 0, true);
        assert_eq!(a.violations(), vec!["8c", "8f"]);
        let mut b = Allocation::new(2, 3, 2);
        b.set_x(0, 0, 0, true);
        b.set_x(1, 0, 1, true);
        assert_eq!(b.violations(), vec!["8b"]);
        let mut c = Allocation::new(1, 1, 2);
        c.set_y(0, 0, true);
        c.set_y(0, 1, true);
        assert_eq!(c.violations(), vec!["8e"]);
        let mut d = Allocation::new(1, 1, 2);
        d.set_y(0, 0, true);
        d.set_x(0, 0, 0, true);
        assert_eq!(d.violations(), vec!["8f"]);
        assert_eq!(d.rb_use(0, 0), RbUse::Conflict);
        assert_eq!(d.rb_use(0, 1), RbUse::Free);
    }

    #[test]
    fn params_validation() {
        assert!(RadioParams::default().validate().is_ok());
        let bad = RadioParams {
            noise: 0.0,
            ..RadioParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(Topology::default().validate().is_ok());
        let t = Topology {
            bs_positions: vec![],
            ..Topology::default()
        };
        assert!(t.validate().is_err());
    }

    proptest! {
        #[test]
        fn adding_interferer_never_increases_rate(
            ux in -150.0f64..150.0, uy in -50.0f64..50.0,
            o in proptest::collection::vec(0.0f64..5.0, 9),
            rb in 0usize..3, extra_user in 0usize..2,
        ) {
            let topo = Topology::default();
            let params = RadioParams { num_rbs: 3, ..RadioParams::default() };
            let fading = FadingDraw::from_values(2, 3, o).unwrap();
            let pos = vec![Point::new(ux, uy), Point::new(-ux, -uy)];
            let ch = Channel::new(&topo, &params, &fading, &pos).unwrap();
            let mut a = Allocation::new(3, 2, 3);
            a.set_x(1, 0, rb, true);
            a.set_y(0, (rb + 1) % 3, true);
            let before_dl = ch.downlink_rate(0, 1, &a);
            let before_ul = ch.uplink_rate(0, &a);
            prop_assert!(before_dl.is_finite() && before_dl >= 0.0);
            a.set_x(2, extra_user, rb, true);
            a.set_x(2, 1 - extra_user, (rb + 1) % 3, true);
            prop_assert!(ch.downlink_rate(0, 1, &a) <= before_dl);
            prop_assert!(ch.uplink_rate(0, &a) <= before_ul);
        }
    }
}
