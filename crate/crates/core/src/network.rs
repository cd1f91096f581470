//! Scenarios: agent placements, commodity structure and utility weights.
//!
//! Agents are indexed globally with task agents first (`0..K`) followed by
//! relay agents (`K..K+I`). Commodity and weight indices refer to task
//! agents only.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{CapacityModel, Position};
use crate::error::{Error, Result};

/// One information flow, named after the task agent that receives it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommoditySpec {
    pub sink: usize,
    pub sources: Vec<usize>,
}

impl CommoditySpec {
    /// Sorts and deduplicates the sources.
    pub fn new(sink: usize, mut sources: Vec<usize>) -> Self {
        sources.sort_unstable();
        sources.dedup();
        Self { sink, sources }
    }
}

/// Every task agent is the sink of its own commodity, sourced by all other
/// task agents.
pub fn default_commodities(num_task: usize) -> Result<Vec<CommoditySpec>> {
    if num_task < 2 {
        return Err(Error::InvalidScenario(format!(
            "need at least two task agents for a commodity with sources, got {num_task}"
        )));
    }
    Ok((0..num_task)
        .map(|k| CommoditySpec::new(k, (0..num_task).filter(|&i| i != k).collect()))
        .collect())
}

/// Nonnegative per-commodity utility weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UtilityWeights(Vec<f64>);

impl UtilityWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((k, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::InvalidWeights(format!(
                "weight {k} is {w}; weights must be finite and nonnegative"
            )));
        }
        Ok(Self(values))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }
}

impl TryFrom<Vec<f64>> for UtilityWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        UtilityWeights::new(v)
    }
}

impl From<UtilityWeights> for Vec<f64> {
    fn from(w: UtilityWeights) -> Self {
        w.0
    }
}

/// Named weight vectors for the standard study cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightPreset {
    /// All commodities weighted equally.
    AdHoc,
    /// Only the commodity of the access-point agent counts.
    ApRouting(usize),
    /// Indicator of a set of active commodities.
    Subset(Vec<usize>),
}

impl WeightPreset {
    /// Index of a fixed access point, when the preset defines one.
    pub fn access_point(&self) -> Option<usize> {
        match self {
            WeightPreset::ApRouting(j) => Some(*j),
            _ => None,
        }
    }
}

impl fmt::Display for WeightPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPreset::AdHoc => f.write_str("adhoc"),
            WeightPreset::ApRouting(j) => write!(f, "ap:{j}"),
            WeightPreset::Subset(set) => {
                let items: Vec<String> = set.iter().map(|i| i.to_string()).collect();
                write!(f, "subset:{}", items.join(","))
            }
        }
    }
}

impl FromStr for WeightPreset {
    type Err = Error;

    /// Accepts `adhoc`, `ap:<index>` and `subset:<i,j,...>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidWeights(format!(
                "unknown preset `{s}` (expected adhoc, ap:<index> or subset:<i,j,...>)"
            ))
        };
        let s = s.trim();
        if s == "adhoc" {
            return Ok(WeightPreset::AdHoc);
        }
        if let Some(rest) = s.strip_prefix("ap:") {
            return rest
                .trim()
                .parse()
                .map(WeightPreset::ApRouting)
                .map_err(|_| bad());
        }
        if let Some(rest) = s.strip_prefix("subset:") {
            let set = rest
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            if set.is_empty() {
                return Err(bad());
            }
            return Ok(WeightPreset::Subset(set));
        }
        Err(bad())
    }
}

pub fn weight_preset(kind: &WeightPreset, k: usize) -> Result<UtilityWeights> {
    let check = |i: usize| {
        if i < k {
            Ok(i)
        } else {
            Err(Error::InvalidWeights(format!(
                "commodity index {i} out of range for {k} commodities"
            )))
        }
    };
    let mut w = vec![0.0; k];
    match kind {
        WeightPreset::AdHoc => w.fill(1.0),
        WeightPreset::ApRouting(j) => w[check(*j)?] = 1.0,
        WeightPreset::Subset(set) => {
            for &i in set {
                w[check(i)?] = 1.0;
            }
        }
    }
    UtilityWeights::new(w)
}

/// Agent placements plus the commodity structure over the task agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub task_positions: Vec<Position>,
    pub relay_positions: Vec<Position>,
    pub capacity_model: CapacityModel,
    pub commodities: Vec<CommoditySpec>,
}

impl Scenario {
    /// Uses the default commodity structure (none for a single task agent).
    pub fn new(
        task_positions: Vec<Position>,
        relay_positions: Vec<Position>,
        capacity_model: CapacityModel,
    ) -> Result<Self> {
        let commodities = if task_positions.len() >= 2 {
            default_commodities(task_positions.len())?
        } else {
            Vec::new()
        };
        Self::with_commodities(task_positions, relay_positions, capacity_model, commodities)
    }

    pub fn with_commodities(
        task_positions: Vec<Position>,
        relay_positions: Vec<Position>,
        capacity_model: CapacityModel,
        commodities: Vec<CommoditySpec>,
    ) -> Result<Self> {
        let s = Self {
            task_positions,
            relay_positions,
            capacity_model,
            commodities,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_task();
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if k == 0 {
            return bad("at least one task agent is required".into());
        }
        if let Some(i) = self.positions().position(|p| !p.is_finite()) {
            return bad(format!("agent {i} has a non-finite position"));
        }
        let mut seen = vec![false; k];
        for (c, spec) in self.commodities.iter().enumerate() {
            if spec.sink >= k {
                return bad(format!(
                    "commodity {c}: sink {} is not a task agent",
                    spec.sink
                ));
            }
            if std::mem::replace(&mut seen[spec.sink], true) {
                return bad(format!("commodity {c}: sink {} appears twice", spec.sink));
            }
            if spec.sources.is_empty() {
                return bad(format!("commodity {c}: empty source set"));
            }
            for &src in &spec.sources {
                if src >= k {
                    return bad(format!("commodity {c}: source {src} is not a task agent"));
                }
                if src == spec.sink {
                    return bad(format!("commodity {c}: sink {src} is also a source"));
                }
            }
        }
        Ok(())
    }

    pub fn num_task(&self) -> usize {
        self.task_positions.len()
    }

    pub fn num_relay(&self) -> usize {
        self.relay_positions.len()
    }

    pub fn num_agents(&self) -> usize {
        self.num_task() + self.num_relay()
    }

    /// All positions in global index order.
    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        self.task_positions
            .iter()
            .chain(&self.relay_positions)
            .copied()
    }

    pub fn position(&self, agent: usize) -> Position {
        let k = self.num_task();
        if agent < k {
            self.task_positions[agent]
        } else {
            self.relay_positions[agent - k]
        }
    }

    pub fn with_relays(&self, relays: Vec<Position>) -> Scenario {
        debug_assert_eq!(relays.len(), self.num_relay());
        Scenario {
            relay_positions: relays,
            ..self.clone()
        }
    }

    /// Weights for a preset, one per commodity in sink order.
    pub fn preset_weights(&self, preset: &WeightPreset) -> Result<UtilityWeights> {
        let by_sink = weight_preset(preset, self.num_task())?;
        UtilityWeights::new(
            self.commodities
                .iter()
                .map(|c| by_sink.as_slice()[c.sink])
                .collect(),
        )
    }

    pub fn check_weights(&self, w: &UtilityWeights) -> Result<()> {
        if w.len() != self.commodities.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} commodities",
                w.len(),
                self.commodities.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_task: usize,
    pub num_relay: usize,
    /// Task agents per square kilometre.
    pub density: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Side of the square spawn region, `sqrt(num_task / density)` km.
    pub fn side(&self) -> f64 {
        (self.num_task as f64 / self.density).sqrt()
    }
}

/// Samples task and relay agents uniformly on `[0, L]^2`.
pub fn spawn_scenario(cfg: &ScenarioConfig, model: CapacityModel) -> Result<Scenario> {
    if !(cfg.density.is_finite() && cfg.density > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "density must be positive, got {}",
            cfg.density
        )));
    }
    if cfg.num_task == 0 {
        return Err(Error::InvalidConfig("num_task must be at least 1".into()));
    }
    let side = cfg.side();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut sample = |count: usize| -> Vec<Position> {
        (0..count)
            .map(|_| Position::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side)))
            .collect()
    };
    let tasks = sample(cfg.num_task);
    let relays = sample(cfg.num_relay);
    Scenario::new(tasks, relays, model)
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub capacity_model: CapacityModel,
    pub task_agents: Vec<Position>,
    pub relay_agents: Vec<Position>,
    pub commodities: Vec<CommoditySpec>,
    /// Defaults to all ones when absent.
    #[serde(default)]
    pub weights: Option<UtilityWeights>,
}

impl ScenarioFile {
    pub fn new(s: &Scenario, w: &UtilityWeights) -> Self {
        Self {
            capacity_model: s.capacity_model,
            task_agents: s.task_positions.clone(),
            relay_agents: s.relay_positions.clone(),
            commodities: s.commodities.clone(),
            weights: Some(w.clone()),
        }
    }

    pub fn into_parts(self) -> Result<(Scenario, UtilityWeights)> {
        let s = Scenario::with_commodities(
            self.task_agents,
            self.relay_agents,
            self.capacity_model,
            self.commodities,
        )?;
        let w = self
            .weights
            .unwrap_or_else(|| UtilityWeights::ones(s.commodities.len()));
        s.check_weights(&w)?;
        Ok((s, w))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_commodity_structure() {
        let two = default_commodities(2).unwrap();
        assert_eq!(
            two,
            vec![
                CommoditySpec::new(0, vec![1]),
                CommoditySpec::new(1, vec![0])
            ]
        );
        let three = default_commodities(3).unwrap();
        assert_eq!(three[0].sources, vec![1, 2]);
        assert!(default_commodities(1).is_err());
        let five = default_commodities(5).unwrap();
        let mut sinks: Vec<usize> = five.iter().map(|c| c.sink).collect();
        sinks.dedup();
        assert_eq!(sinks.len(), 5);
    }

    #[test]
    fn presets() {
        let w = weight_preset(&WeightPreset::AdHoc, 5).unwrap();
        assert_eq!(w.as_slice(), &[1.0; 5]);
        let w = weight_preset(&WeightPreset::ApRouting(2), 5).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let w = weight_preset(&WeightPreset::Subset(vec![0, 1]), 4).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
        assert!(weight_preset(&WeightPreset::ApRouting(5), 5).is_err());
        assert!(weight_preset(&WeightPreset::Subset(vec![1, 9]), 4).is_err());
    }

    #[test]
    fn preset_parsing_round_trips() {
        for s in ["adhoc", "ap:3", "subset:1,2,4"] {
            let p: WeightPreset = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("ap:".parse::<WeightPreset>().is_err());
        assert!("subset:".parse::<WeightPreset>().is_err());
        assert!("mesh".parse::<WeightPreset>().is_err());
    }

    #[test]
    fn spawn_area_and_determinism() {
        let cfg = ScenarioConfig {
            num_task: 25,
            num_relay: 10,
            density: 1.0,
            rng_seed: 3,
        };
        assert_eq!(cfg.side(), 5.0);
        let a = spawn_scenario(&cfg, CapacityModel::default()).unwrap();
        let b = spawn_scenario(&cfg, CapacityModel::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_task(), 25);
        assert_eq!(a.num_relay(), 10);
        for p in a.positions() {
            assert!((0.0..=5.0).contains(&p.x) && (0.0..=5.0).contains(&p.y));
        }
        let cfg4 = ScenarioConfig { num_task: 4, ..cfg };
        assert_eq!(cfg4.side(), 2.0);
        let c = spawn_scenario(
            &ScenarioConfig { rng_seed: 4, ..cfg },
            CapacityModel::default(),
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn validation() {
        let m = CapacityModel::default();
        let p = |x: f64| Position::new(x, 0.0);
        assert!(Scenario::new(vec![], vec![p(0.0)], m).is_err());
        assert!(Scenario::new(vec![p(f64::NAN), p(1.0)], vec![], m).is_err());
        let single = Scenario::new(vec![p(0.0)], vec![], m).unwrap();
        assert!(single.commodities.is_empty());
        let bad_sink = Scenario::with_commodities(
            vec![p(0.0), p(1.0)],
            vec![],
            m,
            vec![CommoditySpec::new(0, vec![0])],
        );
        assert!(bad_sink.is_err());
        let empty = Scenario::with_commodities(
            vec![p(0.0), p(1.0)],
            vec![],
            m,
            vec![CommoditySpec::new(0, vec![])],
        );
        assert!(empty.is_err());
    }

    #[test]
    fn scenario_json_layout() {
        let s = Scenario::new(
            vec![Position::new(0.0, 0.0), Position::new(1.0, 0.5)],
            vec![Position::new(0.5, 0.25)],
            CapacityModel::default(),
        )
        .unwrap();
        let file = ScenarioFile::new(&s, &UtilityWeights::ones(2));
        let text = serde_json::to_string(&file).unwrap();
        assert_eq!(
            text,
            r#"{"capacity_model":{"d0_km":1.0,"exponent":2.0},"task_agents":[[0.0,0.0],[1.0,0.5]],"relay_agents":[[0.5,0.25]],"commodities":[{"sink":0,"sources":[1]},{"sink":1,"sources":[0]}],"weights":[1.0,1.0]}"#
        );
        let (back, w) = ScenarioFile::from_json(&text)
            .unwrap()
            .into_parts()
            .unwrap();
        assert_eq!(back, s);
        assert_eq!(w.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn json_errors_carry_location() {
        let err = ScenarioFile::from_json("{\n  \"capacity_model\": {\"d0_km\": 1, \"exponent\": 2},\n  \"task_agents\": [[0, 0]]\n}")
            .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("relay_agents") && msg.contains("line"),
            "{msg}"
        );
        let err = ScenarioFile::from_json(
            r#"{"capacity_model":{"d0_km":1,"exponent":2},"task_agents":[[0,0],[1,1]],"relay_agents":[],"commodities":[{"sink":0,"sources":[1]}],"weights":[-1]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nonnegative"), "{err}");
    }
}
