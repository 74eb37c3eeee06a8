//! Scenario data: fleet and charger sizing, travel/energy/distance matrices,
//! price schedules, Poisson demand processes, plus loading/saving of scenario
//! files and the seeded synthetic scenario generator.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chevrolet Bolt style consumption, kWh per mile, including de-rating.
pub const KWH_PER_MILE: f64 = 0.4037;
/// Discretization of the battery into charge levels.
pub const KWH_PER_LEVEL: f64 = 2.0;
/// Operating cost per mile.
pub const OP_COST_PER_MILE: f64 = 0.077;
/// Fare structure: base fare plus per-mile and per-minute components.
pub const FARE_BASE: f64 = 4.90;
pub const FARE_PER_MILE: f64 = 0.90;
pub const FARE_PER_MINUTE: f64 = 0.39;
/// Time-of-use electricity rates in $/kWh over a 8am-8pm service day:
/// shoulder 8-9am and 2-4pm, off-peak 9am-2pm, peak 4-8pm.
pub const RATE_SHOULDER: f64 = 0.16872;
pub const RATE_OFFPEAK: f64 = 0.14545;
pub const RATE_PEAK: f64 = 0.38195;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.to_string(), reason: reason.into() }
}

/// A square matrix that is either constant over the horizon or listed per
/// step. Rows are region-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMatrix {
    Constant(Vec<Vec<f64>>),
    PerStep(Vec<Vec<Vec<f64>>>),
}

impl TimeMatrix {
    /// Value for step `t` (1-based) and region pair (i, j).
    pub fn at(&self, t: usize, i: usize, j: usize) -> f64 {
        match self {
            TimeMatrix::Constant(m) => m[i][j],
            TimeMatrix::PerStep(ms) => ms[t - 1][i][j],
        }
    }

    fn validate(&self, field: &str, regions: usize, horizon: usize) -> Result<(), ScenarioError> {
        let check = |m: &Vec<Vec<f64>>| -> Result<(), ScenarioError> {
            if m.len() != regions {
                return Err(invalid(field, format!("expected {regions} rows, found {}", m.len())));
            }
            for row in m {
                if row.len() != regions {
                    return Err(invalid(field, format!("expected {regions} columns, found {}", row.len())));
                }
                for &v in row {
                    if !v.is_finite() || v < 0.0 {
                        return Err(invalid(field, format!("entry {v} must be finite and non-negative")));
                    }
                }
            }
            Ok(())
        };
        match self {
            TimeMatrix::Constant(m) => check(m),
            TimeMatrix::PerStep(ms) => {
                if ms.len() != horizon {
                    return Err(invalid(field, format!("expected {horizon} step matrices, found {}", ms.len())));
                }
                ms.iter().try_for_each(check)
            }
        }
    }
}

/// Raw inputs to a [`ScenarioConfig`]; validated on construction.
#[derive(Debug, Clone)]
pub struct ScenarioParts {
    pub name: String,
    pub region_count: usize,
    pub charge_levels: usize,
    pub charge_rate: usize,
    pub horizon: usize,
    pub step_minutes: f64,
    /// Travel time in steps, row-major |A| x |A|, all entries >= 1.
    pub travel_time: Vec<usize>,
    /// Energy use in charge levels, row-major |A| x |A|.
    pub energy: Vec<usize>,
    /// Trip distance in miles, row-major |A| x |A|.
    pub distance: Vec<f64>,
    pub fleet_size: u64,
    pub chargers: Vec<u64>,
    /// Electricity price in $ per charge level, one entry per step.
    pub elec_price: Vec<f64>,
    pub op_cost: TimeMatrix,
    pub revenue: TimeMatrix,
    pub demand_rate: TimeMatrix,
    /// Initial idle vehicles per space-charge node (region-major, charge
    /// 1..=C within each region). Must sum to the fleet size.
    pub initial_distribution: Vec<u64>,
}

/// Validated scenario description. Immutable in normal use; construct through
/// [`ScenarioConfig::new`], [`load_scenario`], or the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub region_count: usize,
    pub charge_levels: usize,
    pub charge_rate: usize,
    pub horizon: usize,
    pub step_minutes: f64,
    travel_time: Vec<usize>,
    energy: Vec<usize>,
    distance: Vec<f64>,
    pub fleet_size: u64,
    chargers: Vec<u64>,
    elec_price: Vec<f64>,
    op_cost: TimeMatrix,
    revenue: TimeMatrix,
    demand_rate: TimeMatrix,
    initial_distribution: Vec<u64>,
}

impl ScenarioConfig {
    pub fn new(parts: ScenarioParts) -> Result<Self, ScenarioError> {
        let a = parts.region_count;
        if a == 0 {
            return Err(invalid("regions.count", "at least one region required"));
        }
        if parts.charge_levels == 0 {
            return Err(invalid("charge.levels", "at least one charge level required"));
        }
        if parts.charge_rate == 0 {
            return Err(invalid("charge.rate_levels_per_step", "charge rate must be positive"));
        }
        if parts.horizon == 0 {
            return Err(invalid("time.horizon_steps", "horizon must be at least one step"));
        }
        if !(parts.step_minutes > 0.0) {
            return Err(invalid("time.step_minutes", "step length must be positive"));
        }
        if parts.travel_time.len() != a * a {
            return Err(invalid("regions.travel_time_steps", format!("expected {} entries", a * a)));
        }
        if parts.travel_time.iter().any(|&l| l == 0) {
            return Err(invalid("regions.travel_time_steps", "every pair needs at least one step"));
        }
        if parts.energy.len() != a * a {
            return Err(invalid("charge.energy_levels", format!("expected {} entries", a * a)));
        }
        if parts.distance.len() != a * a || parts.distance.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(invalid("regions.distance_miles", "expected a non-negative |A| x |A| matrix"));
        }
        if parts.chargers.len() != a {
            return Err(invalid("fleet.chargers_per_region", format!("expected {a} entries")));
        }
        if parts.chargers.iter().any(|&c| c == 0) {
            return Err(invalid("fleet.chargers_per_region", "every region needs at least one charging plug"));
        }
        if parts.elec_price.len() != parts.horizon {
            return Err(invalid("prices.electricity_per_level", format!("expected {} entries", parts.horizon)));
        }
        if parts.elec_price.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("prices.electricity_per_level", "prices must be finite and non-negative"));
        }
        parts.op_cost.validate("prices.operating_cost", a, parts.horizon)?;
        parts.revenue.validate("prices.revenue", a, parts.horizon)?;
        parts.demand_rate.validate("demand.rate", a, parts.horizon)?;
        let node_count = a * parts.charge_levels;
        if parts.initial_distribution.len() != node_count {
            return Err(invalid("fleet.initial_distribution", format!("expected {node_count} entries")));
        }
        let total: u64 = parts.initial_distribution.iter().sum();
        if total != parts.fleet_size {
            return Err(invalid(
                "fleet.initial_distribution",
                format!("sums to {total}, fleet size is {}", parts.fleet_size),
            ));
        }
        Ok(ScenarioConfig {
            name: parts.name,
            region_count: a,
            charge_levels: parts.charge_levels,
            charge_rate: parts.charge_rate,
            horizon: parts.horizon,
            step_minutes: parts.step_minutes,
            travel_time: parts.travel_time,
            energy: parts.energy,
            distance: parts.distance,
            fleet_size: parts.fleet_size,
            chargers: parts.chargers,
            elec_price: parts.elec_price,
            op_cost: parts.op_cost,
            revenue: parts.revenue,
            demand_rate: parts.demand_rate,
            initial_distribution: parts.initial_distribution,
        })
    }

    pub fn node_count(&self) -> usize {
        self.region_count * self.charge_levels
    }

    pub fn travel_time(&self, i: usize, j: usize) -> usize {
        self.travel_time[i * self.region_count + j]
    }

    pub fn energy(&self, i: usize, j: usize) -> usize {
        self.energy[i * self.region_count + j]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance[i * self.region_count + j]
    }

    pub fn chargers(&self, region: usize) -> u64 {
        self.chargers[region]
    }

    pub fn elec_price(&self, t: usize) -> f64 {
        self.elec_price[t - 1]
    }

    pub fn elec_price_schedule(&self) -> &[f64] {
        &self.elec_price
    }

    pub fn op_cost(&self, i: usize, j: usize, t: usize) -> f64 {
        self.op_cost.at(t, i, j)
    }

    pub fn revenue(&self, i: usize, j: usize, t: usize) -> f64 {
        self.revenue.at(t, i, j)
    }

    pub fn demand_rate(&self, i: usize, j: usize, t: usize) -> f64 {
        self.demand_rate.at(t, i, j)
    }

    pub fn initial_distribution(&self) -> &[u64] {
        &self.initial_distribution
    }

    pub fn travel_time_matrix(&self) -> &[usize] {
        &self.travel_time
    }

    pub fn energy_matrix(&self) -> &[usize] {
        &self.energy
    }

    /// True when step `t` is in the peak electricity price tier.
    pub fn is_peak_price(&self, t: usize) -> bool {
        let max = self.elec_price.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (self.elec_price(t) - max).abs() < 1e-9
    }

    /// Demand-weighted mean trip energy in charge levels, over all region
    /// pairs and steps. Falls back to the plain mean when demand is zero.
    pub fn mean_trip_energy(&self) -> f64 {
        let mut weighted = 0.0;
        let mut weight = 0.0;
        for t in 1..=self.horizon {
            for i in 0..self.region_count {
                for j in 0..self.region_count {
                    let w = self.demand_rate(i, j, t);
                    weighted += w * self.energy(i, j) as f64;
                    weight += w;
                }
            }
        }
        if weight > 0.0 {
            weighted / weight
        } else {
            let total: usize = self.energy.iter().sum();
            total as f64 / self.energy.len() as f64
        }
    }

    pub fn set_demand_rate(&mut self, rate: TimeMatrix) -> Result<(), ScenarioError> {
        rate.validate("demand.rate", self.region_count, self.horizon)?;
        self.demand_rate = rate;
        Ok(())
    }

    pub fn set_revenue(&mut self, revenue: TimeMatrix) -> Result<(), ScenarioError> {
        revenue.validate("prices.revenue", self.region_count, self.horizon)?;
        self.revenue = revenue;
        Ok(())
    }

    pub fn set_op_cost(&mut self, op_cost: TimeMatrix) -> Result<(), ScenarioError> {
        op_cost.validate("prices.operating_cost", self.region_count, self.horizon)?;
        self.op_cost = op_cost;
        Ok(())
    }

    pub fn set_initial_distribution(&mut self, dist: Vec<u64>) -> Result<(), ScenarioError> {
        if dist.len() != self.node_count() {
            return Err(invalid("fleet.initial_distribution", format!("expected {} entries", self.node_count())));
        }
        let total: u64 = dist.iter().sum();
        if total != self.fleet_size {
            return Err(invalid("fleet.initial_distribution", format!("sums to {total}, fleet size is {}", self.fleet_size)));
        }
        self.initial_distribution = dist;
        Ok(())
    }

    pub fn set_chargers(&mut self, chargers: Vec<u64>) -> Result<(), ScenarioError> {
        if chargers.len() != self.region_count || chargers.iter().any(|&c| c == 0) {
            return Err(invalid("fleet.chargers_per_region", "one positive entry per region required"));
        }
        self.chargers = chargers;
        Ok(())
    }

    pub fn set_fleet(&mut self, fleet_size: u64, initial_distribution: Vec<u64>) -> Result<(), ScenarioError> {
        self.fleet_size = fleet_size;
        self.set_initial_distribution(initial_distribution)
    }

    #[cfg(test)]
    pub(crate) fn set_flat_elec_price(&mut self, per_level: f64) {
        self.elec_price = vec![per_level; self.horizon];
    }

    #[cfg(test)]
    pub(crate) fn set_travel_time(&mut self, i: usize, j: usize, steps: usize) {
        let a = self.region_count;
        self.travel_time[i * a + j] = steps;
    }

    #[cfg(test)]
    pub(crate) fn set_energy(&mut self, i: usize, j: usize, levels: usize) {
        let a = self.region_count;
        self.energy[i * a + j] = levels;
    }
}

/// Realized trip counts for a whole horizon: `trips[t-1][i*|A|+j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandRealization {
    region_count: usize,
    trips: Vec<Vec<u64>>,
}

impl DemandRealization {
    pub fn new(region_count: usize, trips: Vec<Vec<u64>>) -> Self {
        assert!(trips.iter().all(|m| m.len() == region_count * region_count));
        DemandRealization { region_count, trips }
    }

    pub fn horizon(&self) -> usize {
        self.trips.len()
    }

    pub fn at(&self, t: usize, i: usize, j: usize) -> u64 {
        self.trips[t - 1][i * self.region_count + j]
    }

    pub fn step(&self, t: usize) -> &[u64] {
        &self.trips[t - 1]
    }

    pub fn total(&self) -> u64 {
        self.trips.iter().map(|m| m.iter().sum::<u64>()).sum()
    }
}

/// Draws one step of demand: independent Poisson counts per region pair.
pub fn sample_demand(config: &ScenarioConfig, t: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let a = config.region_count;
    let mut trips = vec![0u64; a * a];
    for i in 0..a {
        for j in 0..a {
            let lambda = config.demand_rate(i, j, t);
            if lambda > 0.0 {
                let draw: f64 = Poisson::new(lambda).expect("validated rate").sample(rng);
                trips[i * a + j] = draw as u64;
            }
        }
    }
    trips
}

/// Samples the whole horizon with a dedicated generator so that every policy
/// evaluated under the same seed sees the identical realization.
pub fn sample_realization(config: &ScenarioConfig, seed: u64) -> DemandRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trips = (1..=config.horizon).map(|t| sample_demand(config, t, &mut rng)).collect();
    DemandRealization::new(config.region_count, trips)
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    name: String,
    time: TimeSection,
    regions: RegionsSection,
    charge: ChargeSection,
    prices: PricesSection,
    demand: DemandSection,
    fleet: FleetSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimeSection {
    horizon_steps: usize,
    step_minutes: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionsSection {
    count: usize,
    travel_time_steps: Vec<Vec<usize>>,
    distance_miles: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChargeSection {
    levels: usize,
    rate_levels_per_step: usize,
    energy_levels: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PricesSection {
    electricity_per_level: Vec<f64>,
    operating_cost: TimeMatrix,
    revenue: TimeMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandSection {
    rate: TimeMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
struct FleetSection {
    size: u64,
    chargers_per_region: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_distribution: Option<Vec<u64>>,
}

fn square_from_rows<T: Copy>(rows: &[Vec<T>], field: &str, n: usize) -> Result<Vec<T>, ScenarioError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(field, format!("expected a {n} x {n} matrix")));
    }
    Ok(rows.iter().flat_map(|r| r.iter().copied()).collect())
}

fn rows_from_square<T: Copy>(flat: &[T], n: usize) -> Vec<Vec<T>> {
    (0..n).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect()
}

/// Spreads the fleet over regions round-robin at full charge.
pub fn default_initial_distribution(region_count: usize, charge_levels: usize, fleet_size: u64) -> Vec<u64> {
    let mut dist = vec![0u64; region_count * charge_levels];
    for v in 0..fleet_size {
        let region = (v as usize) % region_count;
        dist[region * charge_levels + (charge_levels - 1)] += 1;
    }
    dist
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    let a = file.regions.count;
    let initial_distribution = match file.fleet.initial_distribution {
        Some(d) => d,
        None => default_initial_distribution(a, file.charge.levels, file.fleet.size),
    };
    ScenarioConfig::new(ScenarioParts {
        name: file.name,
        region_count: a,
        charge_levels: file.charge.levels,
        charge_rate: file.charge.rate_levels_per_step,
        horizon: file.time.horizon_steps,
        step_minutes: file.time.step_minutes,
        travel_time: square_from_rows(&file.regions.travel_time_steps, "regions.travel_time_steps", a)?,
        energy: square_from_rows(&file.charge.energy_levels, "charge.energy_levels", a)?,
        distance: square_from_rows(&file.regions.distance_miles, "regions.distance_miles", a)?,
        fleet_size: file.fleet.size,
        chargers: file.fleet.chargers_per_region,
        elec_price: file.prices.electricity_per_level,
        op_cost: file.prices.operating_cost,
        revenue: file.prices.revenue,
        demand_rate: file.demand.rate,
        initial_distribution,
    })
}

pub fn scenario_to_json(config: &ScenarioConfig) -> String {
    let a = config.region_count;
    let file = ScenarioFile {
        name: config.name.clone(),
        time: TimeSection { horizon_steps: config.horizon, step_minutes: config.step_minutes },
        regions: RegionsSection {
            count: a,
            travel_time_steps: rows_from_square(&config.travel_time, a),
            distance_miles: rows_from_square(&config.distance, a),
        },
        charge: ChargeSection {
            levels: config.charge_levels,
            rate_levels_per_step: config.charge_rate,
            energy_levels: rows_from_square(&config.energy, a),
        },
        prices: PricesSection {
            electricity_per_level: config.elec_price.clone(),
            operating_cost: config.op_cost.clone(),
            revenue: config.revenue.clone(),
        },
        demand: DemandSection { rate: config.demand_rate.clone() },
        fleet: FleetSection {
            size: config.fleet_size,
            chargers_per_region: config.chargers.clone(),
            initial_distribution: Some(config.initial_distribution.clone()),
        },
    };
    serde_json::to_string_pretty(&file).expect("scenario serializes")
}

pub fn save_scenario(config: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    std::fs::write(path, scenario_to_json(config))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Electricity price in $/level for step `t` of `horizon`, following the
/// time-of-use tiers of an 8am-8pm day scaled onto the horizon.
pub fn time_of_use_price_per_level(t: usize, horizon: usize) -> f64 {
    let frac = (t as f64 - 0.5) / horizon as f64; // fraction of the 12h day
    let hours = 8.0 + frac * 12.0;
    let rate = if hours < 9.0 {
        RATE_SHOULDER
    } else if hours < 14.0 {
        RATE_OFFPEAK
    } else if hours < 16.0 {
        RATE_SHOULDER
    } else {
        RATE_PEAK
    };
    rate * KWH_PER_LEVEL
}

pub fn fare_for_trip(distance_miles: f64, minutes: f64) -> f64 {
    FARE_BASE + FARE_PER_MILE * distance_miles + FARE_PER_MINUTE * minutes
}

pub fn energy_levels_for_distance(distance_miles: f64) -> usize {
    (KWH_PER_MILE * distance_miles / KWH_PER_LEVEL).ceil() as usize
}

/// Parameters for the seeded synthetic scenario family. Demand is spatially
/// clustered on a "downtown" region with a morning inbound peak and an
/// evening outbound peak.
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub name: String,
    pub regions: usize,
    pub charge_levels: usize,
    pub charge_rate: usize,
    pub horizon: usize,
    pub step_minutes: f64,
    /// Overall demand intensity; trips per step scale roughly linearly in it.
    pub demand_scale: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn small(regions: usize, seed: u64) -> Self {
        SynthParams {
            name: format!("synth-{regions}"),
            regions,
            charge_levels: 5,
            charge_rate: 2,
            horizon: 48,
            step_minutes: 15.0,
            demand_scale: 0.55,
            seed,
        }
    }

    pub fn paper_scale(regions: usize, seed: u64) -> Self {
        SynthParams {
            name: format!("paper-{regions}"),
            regions,
            charge_levels: 19,
            charge_rate: 6,
            horizon: 48,
            step_minutes: 15.0,
            demand_scale: 0.55,
            seed,
        }
    }

    /// Short-horizon variant used for per-decision latency measurements.
    pub fn latency(regions: usize, seed: u64) -> Self {
        SynthParams {
            name: format!("lat-{regions}"),
            regions,
            charge_levels: 19,
            charge_rate: 6,
            horizon: 6,
            step_minutes: 15.0,
            demand_scale: 0.45,
            seed,
        }
    }
}

/// Builds a synthetic scenario. Regions sit on a planar grid with the
/// downtown at the cell nearest the centroid; travel times, distances, fares,
/// operating costs, and energy use all derive from the grid geometry, and
/// fleet/charger sizing follows the 20% rules.
pub fn synthetic_scenario(params: &SynthParams) -> ScenarioConfig {
    let a = params.regions;
    let cols = (a as f64).sqrt().ceil() as usize;
    let spacing = 2.4; // miles between adjacent grid cells
    let positions: Vec<(f64, f64)> =
        (0..a).map(|i| ((i % cols) as f64 * spacing, (i / cols) as f64 * spacing)).collect();
    let centroid = (
        positions.iter().map(|p| p.0).sum::<f64>() / a as f64,
        positions.iter().map(|p| p.1).sum::<f64>() / a as f64,
    );
    let downtown = (0..a)
        .min_by(|&i, &j| {
            let di = (positions[i].0 - centroid.0).hypot(positions[i].1 - centroid.1);
            let dj = (positions[j].0 - centroid.0).hypot(positions[j].1 - centroid.1);
            di.partial_cmp(&dj).unwrap()
        })
        .unwrap();

    let mut distance = vec![0.0; a * a];
    let mut travel_time = vec![0usize; a * a];
    let mut energy = vec![0usize; a * a];
    let miles_per_step = 18.0 * params.step_minutes / 60.0;
    for i in 0..a {
        for j in 0..a {
            let d = if i == j {
                0.6
            } else {
                (positions[i].0 - positions[j].0).hypot(positions[i].1 - positions[j].1)
            };
            distance[i * a + j] = d;
            travel_time[i * a + j] = ((d / miles_per_step).ceil() as usize).max(1);
            energy[i * a + j] = if i == j {
                0
            } else {
                energy_levels_for_distance(d).clamp(1, params.charge_levels - 1)
            };
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pair_noise: Vec<f64> = (0..a * a).map(|_| rng.random_range(0.8..1.2)).collect();

    let horizon = params.horizon;
    let mut rate_steps = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let frac = (t as f64 - 0.5) / horizon as f64;
        // Morning inbound rush, diffuse midday, evening outbound rush.
        let (morning, evening) = {
            let m = (-((frac - 0.12) / 0.14).powi(2)).exp();
            let e = (-((frac - 0.80) / 0.16).powi(2)).exp();
            (m, e)
        };
        let mut m = vec![vec![0.0; a]; a];
        for i in 0..a {
            for j in 0..a {
                let base = 0.25;
                let inbound = if j == downtown && i != downtown { 2.5 * morning } else { 0.0 };
                let outbound = if i == downtown && j != downtown { 2.5 * evening } else { 0.0 };
                let gravity = (-distance[i * a + j] / 7.0).exp();
                m[i][j] = params.demand_scale
                    * (base + inbound + outbound)
                    * gravity
                    * pair_noise[i * a + j];
            }
        }
        rate_steps.push(m);
    }
    let demand_rate = TimeMatrix::PerStep(rate_steps);

    // Fleet sized at 20% of the peak total demand rate, chargers at 20% of
    // the fleet spread round-robin with at least one plug per region.
    let peak_total = (1..=horizon)
        .map(|t| (0..a).map(|i| (0..a).map(|j| demand_rate.at(t, i, j)).sum::<f64>()).sum::<f64>())
        .fold(0.0, f64::max);
    let fleet_size = (0.20 * peak_total).ceil().max(1.0) as u64;
    let total_chargers = ((0.20 * fleet_size as f64).ceil() as u64).max(1);
    let mut chargers = vec![0u64; a];
    for c in 0..total_chargers {
        chargers[(c as usize) % a] += 1;
    }
    for c in chargers.iter_mut() {
        *c = (*c).max(1);
    }

    let elec_price: Vec<f64> = (1..=horizon).map(|t| time_of_use_price_per_level(t, horizon)).collect();
    let mut op_cost = vec![vec![0.0; a]; a];
    let mut revenue = vec![vec![0.0; a]; a];
    for i in 0..a {
        for j in 0..a {
            let d = distance[i * a + j];
            let minutes = travel_time[i * a + j] as f64 * params.step_minutes;
            op_cost[i][j] = OP_COST_PER_MILE * d;
            revenue[i][j] = fare_for_trip(d, minutes);
        }
    }

    let initial_distribution = default_initial_distribution(a, params.charge_levels, fleet_size);
    ScenarioConfig::new(ScenarioParts {
        name: params.name.clone(),
        region_count: a,
        charge_levels: params.charge_levels,
        charge_rate: params.charge_rate,
        horizon,
        step_minutes: params.step_minutes,
        travel_time,
        energy,
        distance,
        fleet_size,
        chargers,
        elec_price,
        op_cost: TimeMatrix::Constant(op_cost),
        revenue: TimeMatrix::Constant(revenue),
        demand_rate,
        initial_distribution,
    })
    .expect("generated scenario is valid")
}

/// Paper-calibrated configuration: 15-minute steps over a 12-hour day, 19
/// charge levels at 6 levels per step, time-of-use electricity prices, fare
/// and operating costs from the published rate cards, and 20% fleet/charger
/// sizing. Demand comes from the seeded synthetic generator.
pub fn default_paper_config(region_count: usize, seed: u64) -> ScenarioConfig {
    synthetic_scenario(&SynthParams::paper_scale(region_count, seed))
}

/// Resolves a CLI scenario argument: a preset name (`synth-4`, `paper-5`,
/// `lat-8`) or a path to a scenario JSON file. Presets use a fixed generator
/// seed so that every invocation sees the same scenario.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioConfig, ScenarioError> {
    const PRESET_SEED: u64 = 7;
    if let Some(regions) = arg.strip_prefix("synth-").and_then(|s| s.parse::<usize>().ok()) {
        return Ok(synthetic_scenario(&SynthParams::small(regions, PRESET_SEED)));
    }
    if let Some(regions) = arg.strip_prefix("paper-").and_then(|s| s.parse::<usize>().ok()) {
        return Ok(default_paper_config(regions, PRESET_SEED));
    }
    if let Some(regions) = arg.strip_prefix("lat-").and_then(|s| s.parse::<usize>().ok()) {
        return Ok(synthetic_scenario(&SynthParams::latency(regions, PRESET_SEED)));
    }
    load_scenario(arg)
}

/// Compact scenario construction for tests and small experiments.
pub mod test_fixtures {
    use super::*;

    #[derive(Debug, Clone)]
    pub struct ManualScenario {
        pub regions: usize,
        pub charge_levels: usize,
        pub charge_rate: usize,
        pub horizon: usize,
        pub travel_time: Vec<Vec<usize>>,
        pub energy: Vec<Vec<usize>>,
        pub distance: Vec<Vec<f64>>,
        pub fleet_size: u64,
        pub chargers: Vec<u64>,
        /// Constant Poisson rate applied to every region pair.
        pub demand_scale: f64,
    }

    /// Builds a validated config from compact matrices, deriving prices and
    /// fares from the distance matrix with the published rate cards.
    pub fn manual_config(m: ManualScenario) -> ScenarioConfig {
        let a = m.regions;
        let mut op_cost = vec![vec![0.0; a]; a];
        let mut revenue = vec![vec![0.0; a]; a];
        for i in 0..a {
            for j in 0..a {
                let d = m.distance[i][j];
                op_cost[i][j] = OP_COST_PER_MILE * d;
                revenue[i][j] = fare_for_trip(d, m.travel_time[i][j] as f64 * 15.0);
            }
        }
        let elec_price = (1..=m.horizon).map(|t| time_of_use_price_per_level(t, m.horizon)).collect();
        let initial = default_initial_distribution(a, m.charge_levels, m.fleet_size);
        ScenarioConfig::new(ScenarioParts {
            name: "manual".to_string(),
            region_count: a,
            charge_levels: m.charge_levels,
            charge_rate: m.charge_rate,
            horizon: m.horizon,
            step_minutes: 15.0,
            travel_time: m.travel_time.into_iter().flatten().collect(),
            energy: m.energy.into_iter().flatten().collect(),
            distance: m.distance.into_iter().flatten().collect(),
            fleet_size: m.fleet_size,
            chargers: m.chargers,
            elec_price,
            op_cost: TimeMatrix::Constant(op_cost),
            revenue: TimeMatrix::Constant(revenue),
            demand_rate: TimeMatrix::Constant(vec![vec![m.demand_scale; a]; a]),
            initial_distribution: initial,
        })
        .expect("manual scenario is valid")
    }
}
