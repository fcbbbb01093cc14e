//! Strategy selection for attackers and rational miners, parameter sweeps and
//! the pairwise two-attacker comparisons.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::economics::{find_probability, NetworkParams};
use crate::error::{Error, Result};
use crate::model::{
    attacker_fraction, rer, unit_fraction, AttackerStrategy, MinerPower, MinerStrategy, PowerSplit,
    ProfitQuery, Rer, RushingAbility, TOLERANCE,
};

/// Tolerance on the attracted power returned by the minimal-power search.
pub const BISECTION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyVerdict {
    pub best: AttackerStrategy,
    pub profits: BTreeMap<AttackerStrategy, f64>,
    /// Relative extra reward of each strategy over the best one (zero or negative).
    pub margins: BTreeMap<AttackerStrategy, f64>,
}

/// Picks the most profitable strategy. A later strategy in precedence order
/// only wins if it beats the incumbent by more than [`TOLERANCE`].
pub fn argmax_with_precedence(
    profits: &BTreeMap<AttackerStrategy, f64>,
) -> Option<AttackerStrategy> {
    let mut best: Option<(AttackerStrategy, f64)> = None;
    for (&s, &p) in profits {
        match best {
            Some((_, q)) if p <= q + TOLERANCE => {}
            _ => best = Some((s, p)),
        }
    }
    best.map(|(s, _)| s)
}

/// Ranks honest, selfish, PSM and, when admissible, A-PSM mining.
pub fn best_attacker_strategy(
    powers: PowerSplit,
    gamma: RushingAbility,
) -> Result<StrategyVerdict> {
    let mut profits = BTreeMap::new();
    for strategy in AttackerStrategy::ALL {
        let q = match ProfitQuery::new(powers, gamma, strategy) {
            Ok(q) => q,
            Err(Error::ApsmPower { .. }) => continue,
            Err(e) => return Err(e),
        };
        profits.insert(strategy, analytic::attacker_profit(&q)?);
    }
    let best = argmax_with_precedence(&profits).expect("honest mining is always a candidate");
    let top = profits[&best];
    let margins = profits
        .iter()
        .map(|(&s, &p)| (s, rer(p, top).map(Rer::value).unwrap_or(0.0)))
        .collect();
    Ok(StrategyVerdict {
        best,
        profits,
        margins,
    })
}

/// Whether a rational miner of power `alpha_k` should join the attacker's
/// branch. Only the partial-block strategies offer a branch to join.
pub fn best_miner_strategy(
    alpha_a: f64,
    alpha_k: MinerPower,
    gamma: RushingAbility,
    attacker_strategy: AttackerStrategy,
) -> Result<MinerStrategy> {
    let rer = match attacker_strategy {
        AttackerStrategy::Psm => analytic::psm_miner_rer(alpha_a, alpha_k, gamma)?,
        AttackerStrategy::Apsm => analytic::apsm_miner_rer(alpha_a, alpha_k, gamma)?,
        AttackerStrategy::Honest | AttackerStrategy::Selfish => {
            attacker_fraction(alpha_a)?;
            return Ok(MinerStrategy::Public);
        }
    };
    Ok(if rer.value() > 0.0 {
        MinerStrategy::Greedy
    } else {
        MinerStrategy::Public
    })
}

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        let axis = Self { start, end, step };
        axis.values()?;
        Ok(axis)
    }

    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            end: value,
            step: 1.0,
        }
    }

    /// Grid points, computed as `start + k * step` to avoid drift.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Range {
                name: "step",
                value: self.step,
                bounds: "(0, inf)",
            });
        }
        if !(self.start.is_finite() && self.end.is_finite() && self.end >= self.start) {
            return Err(Error::Range {
                name: "range end",
                value: self.end,
                bounds: ">= range start",
            });
        }
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|k| (self.start + k as f64 * self.step).min(self.end))
            .collect())
    }
}

/// How the attracted power of each sweep cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractedRule {
    /// The same attracted power everywhere.
    Fixed(f64),
    /// This fraction of the non-attacker power is attracted.
    RationalFraction(f64),
}

impl AttractedRule {
    pub fn alpha_i(&self, alpha_a: f64) -> Result<f64> {
        match *self {
            Self::Fixed(i) => Ok(i),
            Self::RationalFraction(f) => {
                Ok(unit_fraction("rational_fraction", f)? * (1.0 - alpha_a))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Verdict,
    MinAlphaI,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub alpha_a: Axis,
    pub gamma: Axis,
    pub attracted: AttractedRule,
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictCell {
    pub alpha_a: f64,
    pub gamma: f64,
    pub alpha_i: f64,
    pub verdict: StrategyVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCell {
    pub alpha_a: f64,
    pub gamma: f64,
    pub min_alpha_i: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCells {
    Verdict(Vec<VerdictCell>),
    MinAlphaI(Vec<ThresholdCell>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub plan: SweepPlan,
    pub cells: SweepCells,
}

/// Smallest attracted power for which A-PSM strictly beats both honest and
/// selfish mining, found by bisection. `None` when no admissible power works.
pub fn min_attracted_for_apsm(alpha_a: f64, gamma: RushingAbility) -> Result<Option<f64>> {
    let a = attacker_fraction(alpha_a)?;
    let rival = analytic::selfish_profit(a, gamma)?.max(a);
    let beats = |i: f64| -> Result<bool> {
        let q = ProfitQuery::new(
            PowerSplit::with_attracted(a, i)?,
            gamma,
            AttackerStrategy::Apsm,
        )?;
        Ok(analytic::apsm_profits(&q)?.share_attacker > rival + TOLERANCE)
    };
    let mut hi = 0.5 - a - 1e-9;
    if hi <= 0.0 || !beats(hi)? {
        return Ok(None);
    }
    let mut lo = 0.0;
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if beats(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

fn grid(plan: &SweepPlan) -> Result<Vec<(f64, f64)>> {
    let alphas = plan.alpha_a.values()?;
    let gammas = plan.gamma.values()?;
    for &a in &alphas {
        attacker_fraction(a)?;
    }
    for &g in &gammas {
        RushingAbility::new(g)?;
    }
    Ok(alphas
        .iter()
        .flat_map(|&a| gammas.iter().map(move |&g| (a, g)))
        .collect())
}

/// Evaluates every cell of the grid, in parallel, in row-major order.
pub fn sweep(plan: &SweepPlan) -> Result<SweepGrid> {
    let points = grid(plan)?;
    let cells = match plan.mode {
        SweepMode::Verdict => SweepCells::Verdict(
            points
                .par_iter()
                .map(|&(a, g)| {
                    let alpha_i = plan.attracted.alpha_i(a)?;
                    let verdict = best_attacker_strategy(
                        PowerSplit::with_attracted(a, alpha_i)?,
                        RushingAbility::new(g)?,
                    )?;
                    Ok(VerdictCell {
                        alpha_a: a,
                        gamma: g,
                        alpha_i,
                        verdict,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        SweepMode::MinAlphaI => SweepCells::MinAlphaI(
            points
                .par_iter()
                .map(|&(a, g)| {
                    let min_alpha_i = min_attracted_for_apsm(a, RushingAbility::new(g)?)?;
                    Ok(ThresholdCell {
                        alpha_a: a,
                        gamma: g,
                        min_alpha_i,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(SweepGrid { plan: *plan, cells })
}

/// Two attackers competing for the same rational miner `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAttackerScenario {
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_k: MinerPower,
    /// Attracted power, including miner `k`, used by the A-PSM comparison.
    pub alpha_i: f64,
    pub gamma: RushingAbility,
    /// Gap in seconds between the two attackers' releases.
    pub t_delta: f64,
}

impl TwoAttackerScenario {
    pub fn new(
        alpha_a: f64,
        alpha_b: f64,
        alpha_k: MinerPower,
        alpha_i: f64,
        gamma: RushingAbility,
        t_delta: f64,
    ) -> Result<Self> {
        let s = Self {
            alpha_a,
            alpha_b,
            alpha_k,
            alpha_i,
            gamma,
            t_delta,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        attacker_fraction(self.alpha_a)?;
        attacker_fraction(self.alpha_b).map_err(|_| Error::Range {
            name: "alpha_b",
            value: self.alpha_b,
            bounds: "[0, 0.5)",
        })?;
        MinerPower::new(self.alpha_k.value())?;
        let used = self.alpha_a + self.alpha_b + self.alpha_k.value();
        if used > 1.0 + TOLERANCE {
            return Err(Error::Range {
                name: "alpha_a + alpha_b + alpha_k",
                value: used,
                bounds: "[0, 1]",
            });
        }
        unit_fraction("alpha_i", self.alpha_i)?;
        if !(self.t_delta >= 0.0 && self.t_delta.is_finite()) {
            return Err(Error::Range {
                name: "t_delta",
                value: self.t_delta,
                bounds: "[0, inf)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAttackerRer {
    pub rer_vs_public: Rer,
    pub rer_a_vs_b: Rer,
}

/// Miner `k`'s reward for joining attacker A under PSM, relative to public
/// mining, and relative to joining attacker B (always zero).
pub fn two_attacker_psm_rer(s: &TwoAttackerScenario) -> Result<TwoAttackerRer> {
    s.validate()?;
    let k = s.alpha_k.value();
    let g = s.gamma.value();
    let h = 1.0 - s.alpha_a - s.alpha_b - k;
    let den = 2.0 * k + (2.0 - g) * h;
    if den == 0.0 {
        return Err(Error::Singularity("2 alpha_k + (2 - gamma) alpha_h = 0"));
    }
    Ok(TwoAttackerRer {
        rer_vs_public: Rer((1.0 - 2.0 * k - (1.0 - g) * h) / den),
        rer_a_vs_b: Rer(0.0),
    })
}

/// Same comparison under A-PSM. `alpha_i` is the attracted power including
/// miner `k`; the public power is what the two attackers and the attracted
/// miners leave over.
pub fn two_attacker_apsm_rer(s: &TwoAttackerScenario) -> Result<TwoAttackerRer> {
    s.validate()?;
    let (a, b, i) = (s.alpha_a, s.alpha_b, s.alpha_i);
    let g = s.gamma.value();
    let h = 1.0 - a - b - i;
    if h < -TOLERANCE {
        return Err(Error::Range {
            name: "alpha_a + alpha_b + alpha_i",
            value: 1.0 - h,
            bounds: "[0, 1]",
        });
    }
    let fa = 2.0 * i + 2.0 * a - 1.0;
    let fb = 2.0 * i + 2.0 * b - 1.0;
    if fa == 0.0 || fb == 0.0 {
        return Err(Error::Singularity("2 alpha_i + 2 alpha_attacker = 1"));
    }
    let den = 2.0 * i + (2.0 - g) * h;
    if den == 0.0 {
        return Err(Error::Singularity("2 alpha_i + (2 - gamma) alpha_h = 0"));
    }
    // (1/m) * m^2 / (1 - 2m) with m = a + i, written without the removable pole at m = 0.
    let m = a + i;
    let vs_public = (h + m / (1.0 - 2.0 * m) + 1.0) / den - 1.0;
    Ok(TwoAttackerRer {
        rer_vs_public: Rer(vs_public),
        rer_a_vs_b: Rer((a - b) / (fa * fb)),
    })
}

/// Extra expected revenue the attracted miners collect while the second
/// attacker's release lags by `t_delta`.
pub fn early_release_bonus(
    s: &TwoAttackerScenario,
    powers: &PowerSplit,
    alpha_e: f64,
    net: &NetworkParams,
) -> Result<f64> {
    s.validate()?;
    let r = find_probability(s.t_delta, alpha_e, net)?;
    let (h, i) = (powers.alpha_h(), powers.alpha_i());
    Ok(h * r * i + i * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(x: f64) -> RushingAbility {
        RushingAbility::new(x).unwrap()
    }

    fn k(x: f64) -> MinerPower {
        MinerPower::new(x).unwrap()
    }

    fn split(a: f64, i: f64) -> PowerSplit {
        PowerSplit::with_attracted(a, i).unwrap()
    }

    #[test]
    fn large_attacker_prefers_selfish() {
        let v = best_attacker_strategy(split(0.4, 0.0), g(0.0)).unwrap();
        assert!(v.profits[&AttackerStrategy::Selfish] > v.profits[&AttackerStrategy::Honest]);
        assert_eq!(v.best, AttackerStrategy::Selfish);
        assert_eq!(v.margins[&AttackerStrategy::Selfish], 0.0);
        assert!(v.margins.values().all(|m| *m <= 0.0));
    }

    #[test]
    fn apsm_dropped_when_inadmissible() {
        let v = best_attacker_strategy(split(0.25, 0.5), g(0.0)).unwrap();
        assert!(!v.profits.contains_key(&AttackerStrategy::Apsm));
        let v = best_attacker_strategy(split(0.1, 0.3), g(1.0)).unwrap();
        assert_eq!(v.best, AttackerStrategy::Apsm);
    }

    #[test]
    fn example_points_tie_or_lose_to_baselines() {
        // PSM equals honest mining exactly here, and selfish mining is ahead.
        let v = best_attacker_strategy(split(0.09, 0.01), g(0.9)).unwrap();
        assert!((v.profits[&AttackerStrategy::Psm] - 0.09).abs() < 1e-15);
        assert_eq!(v.best, AttackerStrategy::Apsm);
        let v = best_attacker_strategy(split(0.25, 0.5), g(0.0)).unwrap();
        assert!((v.profits[&AttackerStrategy::Psm] - 0.25).abs() < 1e-15);
        assert_eq!(v.best, AttackerStrategy::Honest);
    }

    #[test]
    fn ties_follow_precedence() {
        let profits: BTreeMap<_, _> = [
            (AttackerStrategy::Honest, 0.25),
            (AttackerStrategy::Selfish, 0.25),
            (AttackerStrategy::Psm, 0.25 + 1e-13),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            argmax_with_precedence(&profits),
            Some(AttackerStrategy::Honest)
        );
    }

    #[test]
    fn miner_verdicts() {
        assert_eq!(
            best_miner_strategy(0.1, k(0.2), g(0.0), AttackerStrategy::Psm).unwrap(),
            MinerStrategy::Public
        );
        assert_eq!(
            best_miner_strategy(0.3, k(0.2), g(0.0), AttackerStrategy::Psm).unwrap(),
            MinerStrategy::Greedy
        );
        assert_eq!(
            best_miner_strategy(0.2, k(0.1), g(0.0), AttackerStrategy::Apsm).unwrap(),
            MinerStrategy::Greedy
        );
        assert_eq!(
            best_miner_strategy(0.2, k(0.1), g(0.0), AttackerStrategy::Selfish).unwrap(),
            MinerStrategy::Public
        );
        assert!(best_miner_strategy(0.5, k(0.1), g(0.0), AttackerStrategy::Psm).is_err());
    }

    #[test]
    fn axis_values() {
        assert_eq!(
            Axis::new(0.3, 0.37, 0.01).unwrap().values().unwrap().len(),
            8
        );
        assert_eq!(Axis::single(0.2).values().unwrap(), vec![0.2]);
        assert!(Axis::new(0.4, 0.3, 0.01).is_err());
        assert!(Axis::new(0.1, 0.3, 0.0).is_err());
    }

    #[test]
    fn selfish_boundary_near_one_third() {
        let plan = SweepPlan {
            alpha_a: Axis::new(0.30, 0.37, 0.005).unwrap(),
            gamma: Axis::single(0.0),
            attracted: AttractedRule::Fixed(0.0),
            mode: SweepMode::Verdict,
        };
        let SweepCells::Verdict(cells) = sweep(&plan).unwrap().cells else {
            panic!()
        };
        let flip = cells
            .iter()
            .find(|c| c.verdict.best != AttackerStrategy::Honest)
            .unwrap();
        assert_eq!(flip.verdict.best, AttackerStrategy::Selfish);
        assert!((flip.alpha_a - 1.0 / 3.0).abs() <= 0.005);
    }

    #[test]
    fn min_attracted_power() {
        let small = min_attracted_for_apsm(0.01, g(0.0)).unwrap().unwrap();
        assert!((small - 0.485).abs() <= BISECTION_TOLERANCE, "{small}");
        assert!((small - 0.49).abs() < 0.01);
        let large = min_attracted_for_apsm(0.4, g(0.0)).unwrap().unwrap();
        assert!(large < 0.01);
        let mid = min_attracted_for_apsm(0.1, g(0.0)).unwrap().unwrap();
        assert!((mid - 0.35).abs() <= BISECTION_TOLERANCE);
    }

    #[test]
    fn sweep_rejects_bad_cells() {
        let plan = SweepPlan {
            alpha_a: Axis::new(0.4, 0.6, 0.1).unwrap(),
            gamma: Axis::single(0.0),
            attracted: AttractedRule::Fixed(0.0),
            mode: SweepMode::Verdict,
        };
        assert!(matches!(sweep(&plan), Err(Error::Range { .. })));
    }

    #[test]
    fn two_attacker_psm_examples() {
        let s = TwoAttackerScenario::new(0.1, 0.1, k(0.1), 0.1, g(0.0), 0.0).unwrap();
        let r = two_attacker_psm_rer(&s).unwrap();
        assert!((r.rer_vs_public.value() - 0.0625).abs() < 1e-15);
        assert_eq!(r.rer_a_vs_b.value(), 0.0);
        let s = TwoAttackerScenario::new(0.2, 0.1, k(0.25), 0.25, g(1.0), 0.0).unwrap();
        let h = 1.0 - 0.2 - 0.1 - 0.25;
        assert!(
            (two_attacker_psm_rer(&s).unwrap().rer_vs_public.value() - 0.5 / (0.5 + h)).abs()
                < 1e-15
        );
    }

    #[test]
    fn two_attacker_apsm_examples() {
        let s = TwoAttackerScenario::new(0.2, 0.1, k(0.1), 0.1, g(0.5), 0.0).unwrap();
        assert!((two_attacker_apsm_rer(&s).unwrap().rer_a_vs_b.value() - 0.1 / 0.24).abs() < 1e-12);
        let s = TwoAttackerScenario::new(0.3, 0.1, k(0.1), 0.2, g(0.5), 0.0).unwrap();
        assert!(matches!(
            two_attacker_apsm_rer(&s),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn early_release_bonus_limits() {
        let net = NetworkParams::default();
        let powers = split(0.2, 0.3);
        let at = |t: f64, e: f64| {
            let s = TwoAttackerScenario::new(0.2, 0.1, k(0.1), 0.3, g(0.5), t).unwrap();
            early_release_bonus(&s, &powers, e, &net).unwrap()
        };
        assert_eq!(at(0.0, 0.7), 0.0);
        let (h, i) = (powers.alpha_h(), powers.alpha_i());
        assert!((at(600.0, 1.0) - 0.64 * (h * i + i)).abs() < 1e-15);
        assert!((at(1e9, 0.7) - (h * 0.7 * i + i * 0.7)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn verdict_is_scale_invariant(a in 0.0..0.5f64, i in 0.0..=0.5f64, gamma in 0.0..=1.0f64, c in 0.5..4.0f64) {
            let v = best_attacker_strategy(split(a, i), g(gamma)).unwrap();
            let top = v.profits[&v.best];
            // Scaling keeps the argmax unless two profits sit inside the tie band.
            let separated = v.profits.iter().all(|(s, p)| *s == v.best || (p - top).abs() > 1e-9);
            prop_assume!(separated);
            let scaled = v.profits.iter().map(|(s, p)| (*s, p * c)).collect();
            prop_assert_eq!(argmax_with_precedence(&scaled), Some(v.best));
            let margins = v.margins.iter().map(|(s, m)| (*s, m * c)).collect();
            prop_assert_eq!(argmax_with_precedence(&margins), Some(v.best));
        }

        #[test]
        fn sweep_order_does_not_matter(a0 in 0.0..0.3f64, g0 in 0.0..0.5f64) {
            let plan = SweepPlan {
                alpha_a: Axis::new(a0, a0 + 0.1, 0.05).unwrap(),
                gamma: Axis::new(g0, g0 + 0.4, 0.2).unwrap(),
                attracted: AttractedRule::Fixed(0.1),
                mode: SweepMode::Verdict,
            };
            let SweepCells::Verdict(cells) = sweep(&plan).unwrap().cells else { panic!() };
            for c in cells.iter().rev() {
                let v = best_attacker_strategy(split(c.alpha_a, 0.1), g(c.gamma)).unwrap();
                prop_assert_eq!(&v, &c.verdict);
            }
        }

        #[test]
        fn selfish_boundary_shrinks_with_gamma(g1 in 0.0..=1.0f64, g2 in 0.0..=1.0f64) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let boundary = |x: f64| {
                (0..500).map(|n| n as f64 * 0.001).find(|&a| {
                    analytic::selfish_profit(a, g(x)).unwrap() > a + TOLERANCE
                })
            };
            let (b_lo, b_hi) = (boundary(lo), boundary(hi));
            prop_assert!(b_hi.unwrap_or(0.5) <= b_lo.unwrap_or(0.5));
        }

        #[test]
        fn larger_attacker_is_preferred(a in 0.0..0.3f64, b in 0.0..0.3f64, i in 0.0..0.2f64) {
            prop_assume!((2.0 * i + 2.0 * a - 1.0).abs() > 1e-6 && (2.0 * i + 2.0 * b - 1.0).abs() > 1e-6);
            let s = TwoAttackerScenario::new(a, b, k(0.0), i, g(0.5), 0.0).unwrap();
            let r = two_attacker_apsm_rer(&s).unwrap().rer_a_vs_b.value();
            prop_assert_eq!(r > 0.0, a > b);
        }
    }
}
