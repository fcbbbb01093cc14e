//! Attack economics: network hashrate, brute-force time for hidden bytes,
//! block-find probability and the collateral check against reneging on
//! secret disclosure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{unit_fraction, PowerSplit};

/// Hashes needed on average per unit of difficulty.
const HASHES_PER_DIFFICULTY: f64 = 4_294_967_296.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub difficulty: f64,
    /// Average block interval in seconds.
    pub t_avg: f64,
    /// Probability that the network finds a block within one interval.
    pub p_e: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            difficulty: 31.25e12,
            t_avg: 600.0,
            p_e: 0.64,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Range {
            name,
            value,
            bounds: "(0, inf)",
        })
    }
}

impl NetworkParams {
    pub fn new(difficulty: f64, t_avg: f64, p_e: f64) -> Result<Self> {
        let net = Self {
            difficulty,
            t_avg,
            p_e,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        positive("difficulty", self.difficulty)?;
        positive("t_avg", self.t_avg)?;
        if !(self.p_e > 0.0 && self.p_e < 1.0) {
            return Err(Error::Range {
                name: "p_e",
                value: self.p_e,
                bounds: "(0, 1)",
            });
        }
        Ok(())
    }
}

/// Network hashes per second implied by the difficulty.
pub fn hashrate_from_difficulty(net: &NetworkParams) -> Result<f64> {
    net.validate()?;
    Ok(net.difficulty * HASHES_PER_DIFFICULTY / net.t_avg)
}

fn valid_miner_fraction(fr: f64) -> Result<f64> {
    if fr.is_finite() && fr > 0.0 && fr <= 1.0 {
        Ok(fr)
    } else {
        Err(Error::Range {
            name: "miner_fraction",
            value: fr,
            bounds: "(0, 1]",
        })
    }
}

/// Seconds a miner holding `miner_fraction` of the hashrate needs to brute
/// force `hidden_bytes` withheld bytes.
pub fn secret_search_time(
    hidden_bytes: u32,
    miner_fraction: f64,
    net: &NetworkParams,
) -> Result<f64> {
    if hidden_bytes == 0 {
        return Err(Error::Range {
            name: "hidden_bytes",
            value: 0.0,
            bounds: ">= 1",
        });
    }
    let fr = valid_miner_fraction(miner_fraction)?;
    let space = 2f64.powi(8 * hidden_bytes as i32);
    Ok(space / (fr * hashrate_from_difficulty(net)?))
}

/// Real-valued number of hidden bytes whose brute force takes `target_time`.
pub fn required_hidden_bytes(
    target_time: f64,
    miner_fraction: f64,
    net: &NetworkParams,
) -> Result<f64> {
    let t = positive("target_time", target_time)?;
    let fr = valid_miner_fraction(miner_fraction)?;
    Ok((t * fr * hashrate_from_difficulty(net)?).log2() / 8.0)
}

/// Probability that miners holding `alpha_e` of the power find a block within
/// `elapsed` seconds.
pub fn find_probability(elapsed: f64, alpha_e: f64, net: &NetworkParams) -> Result<f64> {
    net.validate()?;
    if elapsed.is_nan() || elapsed < 0.0 {
        return Err(Error::Range {
            name: "elapsed",
            value: elapsed,
            bounds: "[0, inf]",
        });
    }
    let alpha_e = unit_fraction("alpha_e", alpha_e)?;
    Ok(alpha_e * (1.0 - (1.0 - net.p_e).powf(elapsed / net.t_avg)))
}

/// Inputs of the collateral check. A zero collateral is admitted as the
/// degenerate baseline of an unsecured promise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosScenario {
    pub collateral_blocks: u32,
    /// Length of the challenge period in seconds.
    pub challenge_period: f64,
    pub powers: PowerSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosVerdict {
    pub viable: bool,
    pub expected_blocks: f64,
    pub threshold: f64,
}

/// Whether reneging pays: the attacker must expect more than `n + 1` blocks
/// during the challenge period.
pub fn dos_viability(s: &DosScenario, net: &NetworkParams) -> Result<DosVerdict> {
    net.validate()?;
    let period = positive("challenge_period", s.challenge_period)?;
    let expected_blocks = s.powers.alpha_a() * period / net.t_avg;
    let threshold = f64::from(s.collateral_blocks) + 1.0;
    Ok(DosVerdict {
        viable: expected_blocks > threshold,
        expected_blocks,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn net() -> NetworkParams {
        NetworkParams::default()
    }

    #[test]
    fn hashrate_scales_with_difficulty() {
        let h = hashrate_from_difficulty(&net()).unwrap();
        assert!((h / 2.237e20 - 1.0).abs() < 1e-3);
        let doubled = NetworkParams {
            difficulty: 62.5e12,
            ..net()
        };
        assert_eq!(hashrate_from_difficulty(&doubled).unwrap(), 2.0 * h);
        assert!(NetworkParams::new(0.0, 600.0, 0.64).is_err());
        assert!(NetworkParams::new(1.0, 600.0, 1.0).is_err());
    }

    #[test]
    fn search_time_examples() {
        let t8 = secret_search_time(8, 0.01, &net()).unwrap();
        assert!((t8 - 8.246).abs() < 1e-2, "{t8}");
        let t7 = secret_search_time(7, 0.01, &net()).unwrap();
        assert!((t7 - 0.0322).abs() < 1e-3, "{t7}");
        assert!((t8 / t7 - 256.0).abs() < 1e-9);
        assert!(secret_search_time(0, 0.01, &net()).is_err());
        assert!(secret_search_time(8, 0.0, &net()).is_err());
        assert!((required_hidden_bytes(8.25, 0.01, &net()).unwrap() - 8.0).abs() < 1e-3);
    }

    #[test]
    fn find_probability_points() {
        assert_eq!(find_probability(600.0, 1.0, &net()).unwrap(), 0.64);
        assert_eq!(find_probability(0.0, 0.3, &net()).unwrap(), 0.0);
        assert!((find_probability(1e9, 0.3, &net()).unwrap() - 0.3).abs() < 1e-12);
        assert!(find_probability(-1.0, 0.3, &net()).is_err());
        assert!(find_probability(1.0, 1.3, &net()).is_err());
    }

    #[test]
    fn dos_examples() {
        let powers = PowerSplit::with_attracted(0.2, 0.0).unwrap();
        let small = DosScenario {
            collateral_blocks: 100,
            challenge_period: 600.0,
            powers,
        };
        let v = dos_viability(&small, &net()).unwrap();
        assert!(!v.viable);
        assert!((v.expected_blocks - 0.2).abs() < 1e-15);
        assert_eq!(v.threshold, 101.0);

        let powers = PowerSplit::with_attracted(0.4, 0.0).unwrap();
        let long = DosScenario {
            collateral_blocks: 0,
            challenge_period: 60.0 * 600.0,
            powers,
        };
        let v = dos_viability(&long, &net()).unwrap();
        assert!(v.viable);
        assert!((v.expected_blocks - 24.0).abs() < 1e-12);

        let zero = DosScenario {
            challenge_period: 0.0,
            ..long
        };
        assert!(dos_viability(&zero, &net()).is_err());
    }

    proptest! {
        #[test]
        fn search_time_round_trips(b in 1u32..=16, k in 0usize..4) {
            let fr = [0.001, 0.01, 0.1, 1.0][k];
            let t = secret_search_time(b, fr, &net()).unwrap();
            prop_assert!((required_hidden_bytes(t, fr, &net()).unwrap() - f64::from(b)).abs() <= 1e-9);
        }

        #[test]
        fn find_probability_is_monotone_and_linear(t1 in 0.0..1e5f64, t2 in 0.0..1e5f64, e in 0.0..=1.0f64) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(find_probability(hi, e, &net()).unwrap() >= find_probability(lo, e, &net()).unwrap());
            let full = find_probability(t1, 1.0, &net()).unwrap();
            prop_assert!((find_probability(t1, e, &net()).unwrap() - e * full).abs() <= 1e-15);
        }

        #[test]
        fn dos_viability_flips_once(n in 0u32..50, a in 0.01..0.5f64) {
            let powers = PowerSplit::with_attracted(a, 0.0).unwrap();
            let mut seen = false;
            for step in 1..400 {
                let s = DosScenario { collateral_blocks: n, challenge_period: 600.0 * step as f64, powers };
                let v = dos_viability(&s, &net()).unwrap().viable;
                prop_assert!(!(seen && !v));
                seen |= v;
            }
        }
    }
}
