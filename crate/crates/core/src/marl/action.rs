use rand::Rng;

use crate::error::{Error, Result};
use crate::twin::LocalObservation;

/// Largest user count the dense action head supports (`2^(U+1)` outputs).
pub const MAX_USERS: usize = 14;

/// One BS's decision: whether to sync the twin and which users to associate.
/// Encoded as index `sync | assoc << 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionCode {
    pub sync: bool,
    pub assoc: u64,
}

impl ActionCode {
    pub fn new(sync: bool, assoc: u64) -> Self {
        Self { sync, assoc }
    }

    pub fn index(self) -> usize {
        usize::from(self.sync) | (self.assoc as usize) << 1
    }

    pub fn from_index(index: usize) -> Self {
        Self {
            sync: index & 1 == 1,
            assoc: (index >> 1) as u64,
        }
    }

    pub fn users(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |u| self.assoc >> u & 1 == 1)
    }

    pub fn num_associated(self) -> u32 {
        self.assoc.count_ones()
    }

    /// Associations only inside `covered_mask` and no more transmissions than RBs.
    pub fn is_valid(self, covered_mask: u64, num_rbs: usize) -> bool {
        self.assoc & !covered_mask == 0 && (self.num_associated() as usize + usize::from(self.sync)) <= num_rbs
    }

    /// Association bits as a `0/1` string, user 0 first.
    pub fn assoc_string(self, num_users: usize) -> String {
        (0..num_users).map(|u| if self.assoc >> u & 1 == 1 { '1' } else { '0' }).collect()
    }
}

/// Size of the action space for `num_users` users.
pub fn num_actions(num_users: usize) -> usize {
    1 << (num_users + 1)
}

/// All valid action indices for a coverage mask, ascending.
pub fn valid_actions(covered_mask: u64, num_rbs: usize) -> Vec<usize> {
    let bits: Vec<usize> = (0..64).filter(|u| covered_mask >> u & 1 == 1).collect();
    let mut out = Vec::with_capacity(1 << (bits.len() + 1));
    for sub in 0..(1u64 << bits.len()) {
        let assoc = bits
            .iter()
            .enumerate()
            .filter(|(i, _)| sub >> i & 1 == 1)
            .fold(0u64, |m, (_, &u)| m | 1 << u);
        for sync in [false, true] {
            let a = ActionCode::new(sync, assoc);
            if a.is_valid(covered_mask, num_rbs) {
                out.push(a.index());
            }
        }
    }
    out.sort_unstable();
    out
}

/// Fixed-size local state: `2U` normalized coordinates (zero for users the BS
/// does not cover) followed by the `U`-bit coverage mask.
pub fn encode_local_state(obs: &LocalObservation, num_users: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; 3 * num_users];
    for (&u, p) in obs.covered.iter().zip(&obs.positions) {
        v[2 * u] = p.x / scale;
        v[2 * u + 1] = p.y / scale;
        v[2 * num_users + u] = 1.0;
    }
    v
}

/// Position normalization used by [`encode_local_state`]: half the arena width.
pub const POSITION_SCALE: f64 = 150.0;

/// Uniform over `valid` with probability `explore`, else the valid action with
/// the largest Q value (lowest index on ties). `q_valid[i]` is the value of
/// `valid[i]`.
pub fn act_epsilon_greedy<R: Rng + ?Sized>(q_valid: &[f64], valid: &[usize], explore: f64, rng: &mut R) -> Result<usize> {
    if valid.is_empty() {
        return Err(Error::InvalidArgument("no valid action".into()));
    }
    if q_valid.len() != valid.len() {
        return Err(Error::dim("act_epsilon_greedy", valid.len(), q_valid.len()));
    }
    if explore > 0.0 && rng.random::<f64>() < explore {
        return Ok(valid[rng.random_range(0..valid.len())]);
    }
    Ok(valid[argmax(q_valid)])
}

/// Index of the largest entry, first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn validate_user_count(num_users: usize) -> Result<()> {
    if num_users == 0 || num_users > MAX_USERS {
        return Err(Error::Config(format!("num_users must lie in 1..={MAX_USERS}, got {num_users}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn index_round_trip() {
        for i in 0..num_actions(5) {
            assert_eq!(ActionCode::from_index(i).index(), i);
        }
        let a = ActionCode::new(true, 0b101);
        assert_eq!(a.index(), 0b1011);
        assert_eq!(a.users().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(a.assoc_string(4), "1010");
        assert_eq!(num_actions(10), 2048);
    }

    #[test]
    fn valid_set_respects_mask_and_rbs() {
        let v = valid_actions(0b0110, 12);
        assert_eq!(v.len(), 8);
        assert!(v.contains(&0));
        for &i in &v {
            assert!(ActionCode::from_index(i).is_valid(0b0110, 12));
        }
        let v = valid_actions(0b111, 2);
        // {} x2, singletons x2 each, pairs without sync.
        assert_eq!(v.len(), 2 + 3 * 2 + 3);
        assert_eq!(valid_actions(0, 1), vec![0, 1]);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn encoding() {
        let obs = LocalObservation {
            bs: 0,
            covered: vec![1],
            positions: vec![Point::new(75.0, -30.0)],
        };
        assert_eq!(encode_local_state(&obs, 3, 150.0), vec![0.0, 0.0, 0.5, -0.2, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let empty = LocalObservation {
            bs: 0,
            covered: vec![],
            positions: vec![],
        };
        assert!(encode_local_state(&empty, 3, 150.0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn encoding_is_injective_on_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = HashSet::new();
        for _ in 0..2000 {
            let covered: Vec<usize> = (0..4).filter(|_| rng.random_bool(0.5)).collect();
            let positions: Vec<Point> = covered
                .iter()
                .map(|_| Point::new(rng.random_range(-3i32..3) as f64, rng.random_range(-3i32..3) as f64))
                .collect();
            let key = (covered.clone(), positions.iter().map(|p| (p.x as i64, p.y as i64)).collect::<Vec<_>>());
            let obs = LocalObservation { bs: 0, covered, positions };
            let enc: Vec<u64> = encode_local_state(&obs, 4, 150.0).iter().map(|v| v.to_bits()).collect();
            seen.insert((key, enc));
        }
        let keys: HashSet<_> = seen.iter().map(|(k, _)| k.clone()).collect();
        let encs: HashSet<_> = seen.iter().map(|(_, e)| e.clone()).collect();
        assert_eq!(keys.len(), encs.len());
    }

    #[test]
    fn greedy_and_uniform_exploration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let valid = vec![0, 1, 4, 5];
        let q = vec![0.1, 3.0, 3.0, -1.0];
        assert_eq!(act_epsilon_greedy(&q, &valid, 0.0, &mut rng).unwrap(), 1);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            let a = act_epsilon_greedy(&q, &valid, 1.0, &mut rng).unwrap();
            counts[valid.iter().position(|v| *v == a).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.02);
        }
        assert!(act_epsilon_greedy(&[], &[], 0.5, &mut rng).is_err());
    }

    #[test]
    fn masked_actions_never_returned() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mask = 0b1010;
        let valid = valid_actions(mask, 12);
        let q: Vec<f64> = valid.iter().map(|&i| -(i as f64)).collect();
        for _ in 0..100_000 {
            let a = act_epsilon_greedy(&q, &valid, 0.3, &mut rng).unwrap();
            assert!(ActionCode::from_index(a).is_valid(mask, 12));
        }
    }

    #[test]
    fn user_count_limits() {
        assert!(validate_user_count(12).is_ok());
        assert!(validate_user_count(0).is_err());
        assert!(validate_user_count(MAX_USERS + 1).is_err());
    }
}
