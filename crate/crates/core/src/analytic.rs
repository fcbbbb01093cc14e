//! Closed-form profit shares and relative extra rewards for every attacker
//! strategy and for a single rational miner.
//!
//! Shares are normalized block-generation rates: an actor's accepted blocks
//! per step divided by all accepted blocks per step.

use crate::error::{Error, Result};
use crate::model::{
    attacker_fraction, rer, AttackerStrategy, MinerPower, PowerSplit, ProfitQuery, Rer,
    RevenueBreakdown, RushingAbility,
};

/// Profit share of an attacker that mines honestly.
pub fn honest_profit(powers: &PowerSplit) -> f64 {
    powers.alpha_a()
}

/// Profit share of a classic selfish miner holding `alpha_a` of the power.
pub fn selfish_profit(alpha_a: f64, gamma: RushingAbility) -> Result<f64> {
    let a = attacker_fraction(alpha_a)?;
    let g = gamma.value();
    let num = a * (1.0 - a).powi(2) * (4.0 * a + g * (1.0 - 2.0 * a)) - a.powi(3);
    let den = 1.0 - a * (1.0 + (2.0 - a) * a);
    Ok(num / den)
}

fn psm_denominator(a: f64, i: f64, h: f64) -> f64 {
    (2.0 * a * h + 2.0 * a + 1.0) * i + 2.0 * a * h * h + (2.0 * a * a + 1.0) * h + 2.0 * a * a
}

/// PSM attacker share.
fn psm_attacker_share(a: f64, i: f64, g: f64) -> f64 {
    let h = 1.0 - a - i;
    let num = a * h * h * g + (a * h + a) * i + 2.0 * a * a * h + 2.0 * a * a;
    num / psm_denominator(a, i, h)
}

/// Combined share of the miners attracted to a PSM attacker's branch.
fn psm_attracted_share(a: f64, i: f64) -> f64 {
    let h = 1.0 - a - i;
    (a * h + a + 1.0) * i / psm_denominator(a, i, h)
}

/// Rates and shares of every actor class when the attacker runs PSM.
pub fn psm_profits(q: &ProfitQuery) -> Result<RevenueBreakdown> {
    let q = ProfitQuery::new(q.powers, q.gamma, AttackerStrategy::Psm)?;
    let (a, i, h) = (q.powers.alpha_a(), q.powers.alpha_i(), q.powers.alpha_h());
    let g = q.gamma.value();

    let z = 1.0 + a + a * h;
    let (p0, p1, p0r) = (1.0 / z, a / z, a * h / z);

    let share_attacker = psm_attacker_share(a, i, g);
    let share_attracted = psm_attracted_share(a, i);
    Ok(RevenueBreakdown {
        rev_attacker: 2.0 * a * p1 + (2.0 * a + i + g * h) * p0r + i * p1,
        rev_attracted: i,
        rev_honest: h * p0 + (g * h + 2.0 * (1.0 - g) * h) * p0r,
        rev_miner_k: 0.0,
        share_attacker,
        share_attracted,
        share_honest: 1.0 - share_attacker - share_attracted,
        share_miner_k: 0.0,
    })
}

fn miner_inputs(alpha_a: f64, alpha_k: MinerPower) -> Result<(f64, f64)> {
    let a = attacker_fraction(alpha_a)?;
    let k = alpha_k.paired_with(a)?.value();
    Ok((a, k))
}

/// Share of miner `k` when it is the only miner mining on a PSM attacker's branch.
pub fn psm_miner_greedy_profit(alpha_a: f64, alpha_k: MinerPower) -> Result<f64> {
    let (a, k) = miner_inputs(alpha_a, alpha_k)?;
    Ok(psm_attracted_share(a, k))
}

/// Share of miner `k` when it mines publicly while a PSM attack is under way.
pub fn psm_miner_public_profit(
    alpha_a: f64,
    alpha_k: MinerPower,
    gamma: RushingAbility,
) -> Result<f64> {
    let (a, k) = miner_inputs(alpha_a, alpha_k)?;
    let g = gamma.value();
    Ok(((a * k * k + (a * a - a) * k) * g + (-2.0 * a * a + 2.0 * a + 1.0) * k) / (a + 1.0))
}

/// Relative extra reward of greedy over public mining for miner `k` under PSM.
///
/// Written with `alpha_k` cancelled so the value at `alpha_k = 0` is the limit
/// of the ratio rather than `0 / 0`.
pub fn psm_miner_rer(alpha_a: f64, alpha_k: MinerPower, gamma: RushingAbility) -> Result<Rer> {
    let (a, k) = miner_inputs(alpha_a, alpha_k)?;
    let g = gamma.value();
    let num = (-a * k - a * a + a) * g - a * k + a * a;
    let den = (a * k + a * a - a) * g - 2.0 * a * a + 2.0 * a + 1.0;
    Ok(Rer(num / den))
}

/// Largest miner power for which greedy mining beats public mining under PSM.
pub fn join_threshold(alpha_a: f64, gamma: RushingAbility) -> Result<f64> {
    let a = attacker_fraction(alpha_a)?;
    let g = gamma.value();
    Ok((a - (a - 1.0) * g) / (1.0 + g))
}

/// PSM attacker share relative to honest mining.
pub fn psm_vs_honest_rer(q: &ProfitQuery) -> Result<Rer> {
    let b = psm_profits(q)?;
    rer(b.share_attacker, honest_profit(&q.powers))
}

/// PSM attacker share relative to selfish mining.
pub fn psm_vs_selfish_rer(q: &ProfitQuery) -> Result<Rer> {
    let b = psm_profits(q)?;
    rer(
        b.share_attacker,
        selfish_profit(q.powers.alpha_a(), q.gamma)?,
    )
}

fn apsm_denominator(a: f64, i: f64) -> f64 {
    a * i * i + (2.0 * a * a - 2.0 * a - 2.0) * i + a.powi(3) - 2.0 * a * a - a + 1.0
}

fn apsm_attacker_share(a: f64, i: f64, g: f64) -> f64 {
    let num = -a * (i + a - 1.0).powi(2) * (2.0 * i + 2.0 * a - 1.0) * g
        + 2.0 * a * i.powi(3)
        + (8.0 * a * a - 5.0 * a) * i * i
        + (10.0 * a.powi(3) - 14.0 * a * a + 2.0 * a) * i
        + 4.0 * a.powi(4)
        - 9.0 * a.powi(3)
        + 4.0 * a * a;
    num / apsm_denominator(a, i)
}

/// Attracted share per unit of attracted power, so it stays finite at `i = 0`.
fn apsm_attracted_share_per_power(a: f64, i: f64) -> f64 {
    (2.0 * a * i * i + (4.0 * a * a - 4.0 * a - 2.0) * i + 2.0 * a.powi(3) - 4.0 * a * a + 1.0)
        / apsm_denominator(a, i)
}

/// Rates and shares of every actor class when the attacker runs A-PSM.
pub fn apsm_profits(q: &ProfitQuery) -> Result<RevenueBreakdown> {
    let q = ProfitQuery::new(q.powers, q.gamma, AttackerStrategy::Apsm)?;
    let (a, i, h) = (q.powers.alpha_a(), q.powers.alpha_i(), q.powers.alpha_h());
    let g = q.gamma.value();

    let r = (1.0 - h) / h;
    let p0 = (2.0 * h - 1.0) / (2.0 * a * h * h + 2.0 * h - 1.0);
    let p1 = a * p0;
    let p0r = a * h * p0;
    let p2 = r * p1;
    let deeper = p1 * r * r / (1.0 - r);
    let own = if a + i > 0.0 { a / (a + i) } else { 1.0 };

    let share_attacker = apsm_attacker_share(a, i, g);
    let share_attracted = i * apsm_attracted_share_per_power(a, i);
    Ok(RevenueBreakdown {
        rev_attacker: (2.0 * a + i + g * h) * p0r + (1.0 + own) * h * p2 + own * h * deeper,
        rev_attracted: i,
        rev_honest: h * p0 + (2.0 - g) * h * p0r,
        rev_miner_k: 0.0,
        share_attacker,
        share_attracted,
        share_honest: 1.0 - share_attacker - share_attracted,
        share_miner_k: 0.0,
    })
}

/// Share of miner `k` when it is the only miner on an A-PSM attacker's branch.
pub fn apsm_miner_greedy_profit(alpha_a: f64, alpha_k: MinerPower) -> Result<f64> {
    let (a, k) = apsm_miner_inputs(alpha_a, alpha_k)?;
    Ok(k * apsm_attracted_share_per_power(a, k))
}

fn apsm_miner_inputs(alpha_a: f64, alpha_k: MinerPower) -> Result<(f64, f64)> {
    let (a, k) = miner_inputs(alpha_a, alpha_k)?;
    if a + k >= 0.5 {
        return Err(Error::ApsmPower { combined: a + k });
    }
    Ok((a, k))
}

fn apsm_public_share_per_power(a: f64, k: f64, g: f64) -> f64 {
    (a * (1.0 - 2.0 * a) * (k + a - 1.0) * g + 4.0 * a.powi(3) - 6.0 * a * a + 1.0)
        / (a.powi(3) - 2.0 * a * a - a + 1.0)
}

/// Share of miner `k` when it mines publicly while an A-PSM attack is under way.
pub fn apsm_miner_public_profit(
    alpha_a: f64,
    alpha_k: MinerPower,
    gamma: RushingAbility,
) -> Result<f64> {
    let (a, k) = miner_inputs(alpha_a, alpha_k)?;
    Ok(k * apsm_public_share_per_power(a, k, gamma.value()))
}

/// Relative extra reward of greedy over public mining for miner `k` under
/// A-PSM, taking `k` as the only attracted miner. `alpha_k` cancels, so the
/// value at `alpha_k = 0` is the limiting ratio.
pub fn apsm_miner_rer(alpha_a: f64, alpha_k: MinerPower, gamma: RushingAbility) -> Result<Rer> {
    let (a, k) = apsm_miner_inputs(alpha_a, alpha_k)?;
    let greedy = apsm_attracted_share_per_power(a, k);
    let public = apsm_public_share_per_power(a, k, gamma.value());
    rer(greedy, public)
}

/// A-PSM attacker share relative to honest mining.
pub fn apsm_vs_honest_rer(q: &ProfitQuery) -> Result<Rer> {
    let b = apsm_profits(q)?;
    rer(b.share_attacker, honest_profit(&q.powers))
}

/// A-PSM attacker share relative to selfish mining.
pub fn apsm_vs_selfish_rer(q: &ProfitQuery) -> Result<Rer> {
    let b = apsm_profits(q)?;
    rer(
        b.share_attacker,
        selfish_profit(q.powers.alpha_a(), q.gamma)?,
    )
}

/// Breakdown for any strategy. Under honest and selfish mining the attracted
/// class is just part of the public network and is paid in proportion to its
/// power.
pub fn profits(q: &ProfitQuery) -> Result<RevenueBreakdown> {
    let q = ProfitQuery::new(q.powers, q.gamma, q.strategy)?;
    let (a, i, h) = (q.powers.alpha_a(), q.powers.alpha_i(), q.powers.alpha_h());
    match q.strategy {
        AttackerStrategy::Honest => Ok(RevenueBreakdown::from_rates([a, i, h, 0.0])),
        AttackerStrategy::Selfish => {
            let lone = ProfitQuery::new(
                PowerSplit::with_attracted(a, 0.0)?,
                q.gamma,
                AttackerStrategy::Apsm,
            )?;
            let b = apsm_profits(&lone)?;
            let rest = 1.0 - a;
            let part = |x: f64| if rest > 0.0 { x * i / rest } else { 0.0 };
            let whole = |x: f64| if rest > 0.0 { x * h / rest } else { 0.0 };
            Ok(RevenueBreakdown {
                rev_attacker: b.rev_attacker,
                rev_attracted: part(b.rev_honest),
                rev_honest: whole(b.rev_honest),
                rev_miner_k: 0.0,
                share_attacker: b.share_attacker,
                share_attracted: part(b.share_honest),
                share_honest: whole(b.share_honest),
                share_miner_k: 0.0,
            })
        }
        AttackerStrategy::Psm => psm_profits(&q),
        AttackerStrategy::Apsm => apsm_profits(&q),
    }
}

/// Attacker share under the query's strategy.
pub fn attacker_profit(q: &ProfitQuery) -> Result<f64> {
    match q.strategy {
        AttackerStrategy::Honest => Ok(honest_profit(&q.powers)),
        AttackerStrategy::Selfish => selfish_profit(q.powers.alpha_a(), q.gamma),
        _ => profits(q).map(|b| b.share_attacker),
    }
}
