//! Run configuration: one TOML file, optionally seeded from a named preset.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use stackgame::{
    preset, preset_sized, EvalConfig, FisherMarket, FittedViConfig, GdaConfig, GridOracleConfig,
    StochasticGame, ViConfig,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveGrid,
    SolveFisher,
    Evaluate,
    Verify,
    Bound,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SolveGrid => "solve-grid",
            Mode::SolveFisher => "solve-fisher",
            Mode::Evaluate => "evaluate",
            Mode::Verify => "verify",
            Mode::Bound => "bound",
        }
    }

    fn uses_market(self) -> bool {
        matches!(self, Mode::SolveFisher | Mode::Evaluate | Mode::Verify)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyGame {
    TwoState,
    ThreeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub name: ToyGame,
    /// Only the two-state game takes a discount; the three-state game is
    /// fixed at 0.8.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self {
            name: ToyGame::TwoState,
            discount: Some(0.9),
        }
    }
}

impl GameSpec {
    pub fn build(&self) -> stackgame::Result<StochasticGame> {
        match self.name {
            ToyGame::TwoState => stackgame::toy::two_state_game(self.discount.unwrap_or(0.9)),
            ToyGame::ThreeState => stackgame::toy::three_state_game(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub epsilon: f64,
    pub gamma: f64,
    pub reward_bound: f64,
}

impl Default for BoundSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            gamma: 0.9,
            reward_bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Budget grid points per buyer across the fitted budget box.
    pub grid_points: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { grid_points: 3 }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs. The master `seed` overrides the seeds of the
/// `fit` and `eval` sections when the config is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `[buyers, goods]` to resize a preset market.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market_size: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<FisherMarket>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gda: Option<GdaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FittedViConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridOracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vi: Option<ViConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSpec>,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            out: default_out(),
            preset: None,
            market_size: None,
            market: None,
            gda: None,
            fit: None,
            eval: None,
            verify: None,
            game: None,
            grid: None,
            vi: None,
            bound: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Expands the preset into explicit sections (sections already given
    /// win), fills the defaults the mode needs, and pushes the master seed
    /// down. Resolving a resolved config is a no-op.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if let Some(name) = self.preset.take() {
            let p = match self.market_size.take() {
                Some([n, m]) => preset_sized(&name, n, m),
                None => preset(&name),
            }
            .map_err(|e| CliError::Config(e.to_string()))?;
            self.market.get_or_insert(p.market);
            self.gda.get_or_insert(p.gda);
            self.fit.get_or_insert(p.fit);
            self.eval.get_or_insert(p.eval);
        } else if self.market_size.is_some() {
            return Err(CliError::Config("`market_size` needs a `preset`".into()));
        }

        match self.mode {
            Mode::SolveGrid => {
                self.game.get_or_insert_with(GameSpec::default);
                self.grid.get_or_insert_with(GridOracleConfig::default);
                self.vi.get_or_insert_with(ViConfig::default);
            }
            Mode::Bound => {
                self.bound.get_or_insert_with(BoundSpec::default);
            }
            mode => {
                if self.market.is_none() {
                    return Err(CliError::Config(format!(
                        "mode `{}` needs a `preset` or a [market] section",
                        mode.name()
                    )));
                }
                self.gda.get_or_insert_with(GdaConfig::default);
                self.fit.get_or_insert_with(FittedViConfig::default);
                if mode != Mode::SolveFisher {
                    self.eval.get_or_insert_with(EvalConfig::default);
                }
                if mode == Mode::Verify {
                    self.verify.get_or_insert_with(VerifySpec::default);
                }
            }
        }
        if !self.mode.uses_market() && self.market.is_some() {
            // Preset sections are irrelevant outside the market modes.
            self.market = None;
            self.gda = None;
            self.fit = None;
            self.eval = None;
        }

        if let Some(fit) = &mut self.fit {
            fit.seed = self.seed;
        }
        if let Some(eval) = &mut self.eval {
            eval.seed = self.seed;
            eval.best_response.seed = self.seed;
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_round_trips_through_a_dump() {
        for name in stackgame::PRESET_NAMES {
            for mode in [Mode::SolveFisher, Mode::Evaluate, Mode::Verify] {
                let mut cfg = RunConfig::new(mode);
                cfg.preset = Some(name.to_string());
                cfg.seed = 17;
                let resolved = cfg.resolve().unwrap();
                let text = resolved.to_toml().unwrap();
                let again = RunConfig::from_toml(&text).unwrap().resolve().unwrap();
                assert_eq!(again, resolved, "{name}");
                assert_eq!(again.to_toml().unwrap(), text);
            }
        }
    }

    #[test]
    fn explicit_sections_override_the_preset() {
        let cfg = RunConfig::from_toml(
            r#"
            mode = "solve-fisher"
            preset = "paper-small-linear"
            [gda]
            eta_p = 0.5
            eta_x = 0.1
            t_p = 3
            t_x = 4
            excess_demand_break = 0.0
            "#,
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(cfg.gda.unwrap().t_p, 3);
        assert_eq!(cfg.fit.unwrap().n_value_iters, 30);
    }

    #[test]
    fn parse_errors_name_the_problem() {
        let err = RunConfig::from_toml("mode = \"solve\"\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = RunConfig::from_toml("mode = \"bound\"\nsed = 3\n").unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn market_modes_need_a_market() {
        assert!(RunConfig::new(Mode::Evaluate).resolve().is_err());
        let mut cfg = RunConfig::new(Mode::Bound);
        cfg.preset = Some("paper-nope".into());
        assert!(cfg.resolve().is_err());
        let cfg = RunConfig::new(Mode::Bound).resolve().unwrap();
        assert_eq!(cfg.bound, Some(BoundSpec::default()));
    }

    #[test]
    fn master_seed_reaches_every_stream() {
        let mut cfg = RunConfig::new(Mode::Evaluate);
        cfg.preset = Some("paper-big-linear".into());
        cfg.seed = 99;
        let cfg = cfg.resolve().unwrap();
        assert_eq!(cfg.fit.unwrap().seed, 99);
        let eval = cfg.eval.unwrap();
        assert_eq!((eval.seed, eval.best_response.seed), (99, 99));
    }
}
