//! Named market configurations.
//!
//! `paper-small-*` are two-buyer, two-good markets with valuations drawn
//! from `[10, 50]` and no interest; `paper-big-*` are five-buyer,
//! five-good markets with valuations from `(0, 1]` and the five-point
//! interest distribution. Valuations come from a fixed stream so every
//! class sees the same draw.
//!
//! Utilities are scaled so the buyers' mean utility at the even split
//! `x_ij = q_j / n` is [`EVEN_SPLIT_UTILITY`]. Saving everything is a
//! competing local optimum of the stage problem once `log u` is small
//! relative to the value slope, so utilities need to sit well above one.
//!
//! Cobb-Douglas and Leontief use smaller inner step sizes than the linear
//! class: the ascent direction `(b_i - s_i) ∇u_i / u_i` has curvature
//! about `p_j / x_ij` near the optimum, and larger steps overshoot to the
//! boundary where `u = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::fisher::{BudgetDynamics, FisherMarket, UtilityClass, UtilitySpec};
use crate::oracles::gda::GdaConfig;
use crate::seed::stream;
use crate::solver::FittedViConfig;

pub const PRESET_NAMES: [&str; 6] = [
    "paper-small-linear",
    "paper-small-cobb-douglas",
    "paper-small-leontief",
    "paper-big-linear",
    "paper-big-cobb-douglas",
    "paper-big-leontief",
];

const VALUATION_SEED: u64 = 0x5eed_f15e;
pub const EVEN_SPLIT_UTILITY: f64 = 30.0;
const DISCOUNT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarketSize {
    Small,
    Big,
}

impl MarketSize {
    pub fn default_dims(self) -> (usize, usize) {
        match self {
            MarketSize::Small => (2, 2),
            MarketSize::Big => (5, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub market: FisherMarket,
    pub gda: GdaConfig,
    pub fit: FittedViConfig,
    pub eval: EvalConfig,
}

fn parse_name(name: &str) -> Result<(MarketSize, UtilityClass)> {
    let unknown = || {
        Error::domain(
            "preset",
            format!(
                "unknown preset `{name}`; known: {}",
                PRESET_NAMES.join(", ")
            ),
        )
    };
    let rest = name.strip_prefix("paper-").ok_or_else(unknown)?;
    let (size, class) = rest.split_once('-').ok_or_else(unknown)?;
    let size = match size {
        "small" => MarketSize::Small,
        "big" => MarketSize::Big,
        _ => return Err(unknown()),
    };
    Ok((size, class.parse().map_err(|_| unknown())?))
}

fn even_split_scale(class: UtilityClass, valuations: &[Vec<f64>]) -> Result<f64> {
    let n = valuations.len() as f64;
    let mut total = 0.0;
    for theta in valuations {
        let even = vec![1.0 / n; theta.len()];
        total += UtilitySpec::new(class, theta.clone())?.value(&even);
    }
    Ok(EVEN_SPLIT_UTILITY * n / total)
}

pub fn gda_rates(size: MarketSize, class: UtilityClass) -> GdaConfig {
    let base = match size {
        MarketSize::Small => GdaConfig::small_market(class),
        MarketSize::Big => GdaConfig::big_market(class),
    };
    let eta_x = match (size, class) {
        (_, UtilityClass::Linear) => base.eta_x,
        (MarketSize::Small, UtilityClass::CobbDouglas) => 0.05,
        (MarketSize::Big, UtilityClass::CobbDouglas) => 0.02,
        (MarketSize::Small, UtilityClass::Leontief) => 0.001,
        (MarketSize::Big, UtilityClass::Leontief) => 0.0005,
    };
    GdaConfig { eta_x, ..base }
}

/// Valuation matrix shared by all classes of one market size.
pub fn paper_valuations(size: MarketSize, n_buyers: usize, n_goods: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(
        VALUATION_SEED,
        "valuations",
        (n_buyers * 1000 + n_goods) as u64,
    );
    (0..n_buyers)
        .map(|_| {
            (0..n_goods)
                .map(|_| {
                    let u: f64 = rng.random();
                    match size {
                        MarketSize::Small => 10.0 + 40.0 * u,
                        MarketSize::Big => 1.0 - u,
                    }
                })
                .collect()
        })
        .collect()
}

pub fn paper_market(
    size: MarketSize,
    class: UtilityClass,
    n_buyers: usize,
    n_goods: usize,
) -> Result<FisherMarket> {
    if n_buyers == 0 || n_goods == 0 {
        return Err(Error::domain(
            "market size",
            "need at least one buyer and one good",
        ));
    }
    let valuations = paper_valuations(size, n_buyers, n_goods);
    let scale = even_split_scale(class, &valuations)?;
    let utilities = valuations
        .into_iter()
        .map(|theta| UtilitySpec::scaled(class, theta, scale))
        .collect::<Result<Vec<_>>>()?;
    let dynamics = match size {
        MarketSize::Small => BudgetDynamics::default(),
        MarketSize::Big => BudgetDynamics::five_point_rates(9.5),
    };
    FisherMarket::new(
        utilities,
        vec![1.0; n_goods],
        DISCOUNT,
        dynamics,
        vec![10.0; n_buyers],
    )
}

/// The named preset at its default market size.
pub fn preset(name: &str) -> Result<Preset> {
    let (size, _) = parse_name(name)?;
    let (n, m) = size.default_dims();
    preset_sized(name, n, m)
}

/// The named preset with its market resized to `n_buyers × n_goods`.
pub fn preset_sized(name: &str, n_buyers: usize, n_goods: usize) -> Result<Preset> {
    let (size, class) = parse_name(name)?;
    Ok(Preset {
        name: name.to_string(),
        market: paper_market(size, class, n_buyers, n_goods)?,
        gda: gda_rates(size, class),
        fit: FittedViConfig {
            warm_start: true,
            ..FittedViConfig::default()
        },
        eval: EvalConfig::default(),
    })
}
