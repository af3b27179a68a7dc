//! Embedded test systems.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Aggregator, Bus, CaseData, CaseError, CaseMetadata, Generator, Line};

/// Uniform derating applied to the five-bus generator active limits so that
/// total normal aggregator demand exceeds total generation capacity.
pub const FIVE_BUS_DERATE_PCT: f64 = 92.0;

/// Seed for the synthetic aggregators and line ratings of `rts24`.
pub const RTS24_SEED: u64 = 24;

const S_BASE: f64 = 100.0;
const V_MIN: f64 = 0.95;
const V_MAX: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinCase {
    FiveBus,
    Rts24,
}

impl FromStr for BuiltinCase {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "five_bus" => Ok(Self::FiveBus),
            "rts24" => Ok(Self::Rts24),
            other => Err(CaseError::UnknownBuiltin(other.to_string())),
        }
    }
}

impl BuiltinCase {
    pub fn name(self) -> &'static str {
        match self {
            Self::FiveBus => "five_bus",
            Self::Rts24 => "rts24",
        }
    }

    pub fn build(self) -> CaseData {
        self.build_with_seed(RTS24_SEED)
    }

    /// Builds the case; `seed` drives the synthetic data of `rts24` and is
    /// ignored by `five_bus`.
    pub fn build_with_seed(self, seed: u64) -> CaseData {
        match self {
            Self::FiveBus => five_bus(),
            Self::Rts24 => rts24(seed),
        }
    }
}

/// Looks up an embedded case by name (`five_bus` or `rts24`).
pub fn builtin_case(name: &str) -> Result<CaseData, CaseError> {
    Ok(name.parse::<BuiltinCase>()?.build())
}

fn buses(count: usize, slack: usize) -> Vec<Bus> {
    (1..=count)
        .map(|id| Bus {
            id,
            is_slack: id == slack,
            v_min: V_MIN,
            v_max: V_MAX,
        })
        .collect()
}

fn line(from_bus: usize, to_bus: usize, r: f64, x: f64, s_max: f64) -> Line {
    Line {
        from_bus,
        to_bus,
        r,
        x,
        s_max,
    }
}

#[allow(clippy::too_many_arguments)]
fn aggregator(
    bus: usize,
    sigma: f64,
    gamma: f64,
    mu: f64,
    p_n: f64,
    p_c: f64,
    q_n: f64,
    q_c: f64,
) -> Aggregator {
    Aggregator {
        bus,
        sigma,
        gamma,
        mu,
        p_n,
        p_c,
        q_n,
        q_c,
    }
}

/// PJM five-bus system with the modified aggregator, rating and cost data.
fn five_bus() -> CaseData {
    // (bus, a, b, c, p_max, q_limit) with standard limits before derating
    let gens = [
        (1, 2.0, 14.0, 60.0, 40.0, 30.0),
        (1, 2.0, 15.0, 35.0, 170.0, 127.5),
        (3, 2.0, 30.0, 25.0, 520.0, 390.0),
        (4, 2.0, 40.0, 20.0, 200.0, 150.0),
        (5, 2.0, 10.0, 50.0, 600.0, 450.0),
    ];
    let generators = gens
        .iter()
        .map(|&(bus, a, b, c, p_max, q)| Generator {
            bus,
            a,
            b,
            c,
            p_min: 0.0,
            p_max: p_max * FIVE_BUS_DERATE_PCT / 100.0,
            q_min: -q,
            q_max: q,
        })
        .collect();

    let lines = vec![
        line(1, 2, 0.00281, 0.0281, 200.0),
        line(1, 4, 0.00304, 0.0304, 100.0),
        line(1, 5, 0.00064, 0.0064, 120.0),
        line(2, 3, 0.00108, 0.0108, 100.0),
        line(3, 4, 0.00297, 0.0297, 150.0),
        line(4, 5, 0.00297, 0.0297, 120.0),
    ];

    let aggregators = vec![
        aggregator(2, 15.0, 11.05, 0.016, 84.62, 42.00, 25.69, 13.81),
        aggregator(2, 85.0, 38.68, 0.045, 338.49, 168.00, 102.78, 55.22),
        aggregator(3, 56.0, 63.54, 0.066, 211.56, 105.00, 64.24, 34.51),
        aggregator(3, 32.0, 45.34, 0.034, 211.56, 105.00, 64.24, 34.51),
        aggregator(4, 100.0, 29.99, 0.089, 324.39, 161.00, 98.48, 52.92),
        aggregator(4, 77.0, 21.23, 0.024, 105.78, 52.50, 32.12, 17.26),
        aggregator(4, 105.0, 10.0, 0.087, 133.99, 66.50, 40.68, 21.86),
    ];

    CaseData {
        name: "five_bus".into(),
        s_base: S_BASE,
        metadata: CaseMetadata {
            seed: None,
            generator_derate_pct: Some(FIVE_BUS_DERATE_PCT),
            notes: vec![
                "PJM 5-bus topology and impedances; line charging dropped".into(),
                format!(
                    "generator p_max derated to {FIVE_BUS_DERATE_PCT}% so total normal demand exceeds capacity"
                ),
                "voltage limits 0.95-1.05 p.u.".into(),
            ],
        },
        buses: buses(5, 4),
        lines,
        generators,
        aggregators,
    }
}

/// Unit classes of the 24-bus reliability test system:
/// (p_max, p_min, q_max, q_min, a, b, c).
const U12: [f64; 7] = [12.0, 2.4, 6.0, 0.0, 0.328412, 56.564, 86.3852];
const U20: [f64; 7] = [20.0, 16.0, 10.0, 0.0, 0.0, 130.0, 400.6849];
const U50: [f64; 7] = [50.0, 10.0, 16.0, -10.0, 0.0, 0.001, 0.001];
const U76: [f64; 7] = [76.0, 15.2, 30.0, -25.0, 0.014142, 16.0811, 212.3076];
const U100: [f64; 7] = [100.0, 25.0, 60.0, 0.0, 0.052672, 43.6615, 781.521];
const U155: [f64; 7] = [155.0, 54.3, 80.0, -50.0, 0.008342, 12.3883, 382.2391];
const U197: [f64; 7] = [197.0, 69.0, 80.0, 0.0, 0.00717, 48.5804, 832.7575];
const U350: [f64; 7] = [350.0, 140.0, 150.0, -25.0, 0.004895, 11.8495, 665.1094];
const U400: [f64; 7] = [400.0, 100.0, 200.0, -50.0, 0.000213, 4.4231, 395.3749];
const SYNC: [f64; 7] = [0.0, 0.0, 200.0, -50.0, 0.0, 0.0, 0.0];

/// Normal demand is this multiple of the standard bus load, which pushes
/// total normal demand above total generation capacity (3405 MW).
const RTS24_SCARCITY_FACTOR: f64 = 1.25;
const RTS24_RATING_RANGE: (f64, f64) = (0.15, 0.80);
/// Critical share of normal demand. Shares near one half leave the
/// 138 kV area unable to import its critical load over the derated
/// transformers for many seeds.
const RTS24_CRITICAL_P: (f64, f64) = (0.36, 0.44);
const RTS24_CRITICAL_Q: (f64, f64) = (0.40, 0.48);

fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

/// IEEE 24-bus reliability test system with seeded synthetic aggregators.
fn rts24(seed: u64) -> CaseData {
    let units: [(usize, [f64; 7]); 33] = [
        (1, U20),
        (1, U20),
        (1, U76),
        (1, U76),
        (2, U20),
        (2, U20),
        (2, U76),
        (2, U76),
        (7, U100),
        (7, U100),
        (7, U100),
        (13, U197),
        (13, U197),
        (13, U197),
        (14, SYNC),
        (15, U12),
        (15, U12),
        (15, U12),
        (15, U12),
        (15, U12),
        (15, U155),
        (16, U155),
        (18, U400),
        (21, U400),
        (22, U50),
        (22, U50),
        (22, U50),
        (22, U50),
        (22, U50),
        (22, U50),
        (23, U155),
        (23, U155),
        (23, U350),
    ];
    let generators = units
        .iter()
        .map(|&(bus, [p_max, p_min, q_max, q_min, a, b, c])| Generator {
            bus,
            a,
            b,
            c,
            p_min,
            p_max,
            q_min,
            q_max,
        })
        .collect();

    // (from, to, r, x, original rating MW); transformer taps ignored
    let branches: [(usize, usize, f64, f64, f64); 38] = [
        (1, 2, 0.0026, 0.0139, 175.0),
        (1, 3, 0.0546, 0.2112, 175.0),
        (1, 5, 0.0218, 0.0845, 175.0),
        (2, 4, 0.0328, 0.1267, 175.0),
        (2, 6, 0.0497, 0.192, 175.0),
        (3, 9, 0.0308, 0.119, 175.0),
        (3, 24, 0.0023, 0.0839, 400.0),
        (4, 9, 0.0268, 0.1037, 175.0),
        (5, 10, 0.0228, 0.0883, 175.0),
        (6, 10, 0.0139, 0.0605, 175.0),
        (7, 8, 0.0159, 0.0614, 175.0),
        (8, 9, 0.0427, 0.1651, 175.0),
        (8, 10, 0.0427, 0.1651, 175.0),
        (9, 11, 0.0023, 0.0839, 400.0),
        (9, 12, 0.0023, 0.0839, 400.0),
        (10, 11, 0.0023, 0.0839, 400.0),
        (10, 12, 0.0023, 0.0839, 400.0),
        (11, 13, 0.0061, 0.0476, 500.0),
        (11, 14, 0.0054, 0.0418, 500.0),
        (12, 13, 0.0061, 0.0476, 500.0),
        (12, 23, 0.0124, 0.0966, 500.0),
        (13, 23, 0.0111, 0.0865, 500.0),
        (14, 16, 0.005, 0.0389, 500.0),
        (15, 16, 0.0022, 0.0173, 500.0),
        (15, 21, 0.0063, 0.049, 500.0),
        (15, 21, 0.0063, 0.049, 500.0),
        (15, 24, 0.0067, 0.0519, 500.0),
        (16, 17, 0.0033, 0.0259, 500.0),
        (16, 19, 0.003, 0.0231, 500.0),
        (17, 18, 0.0018, 0.0144, 500.0),
        (17, 22, 0.0135, 0.1053, 500.0),
        (18, 21, 0.0033, 0.0259, 500.0),
        (18, 21, 0.0033, 0.0259, 500.0),
        (19, 20, 0.0051, 0.0396, 500.0),
        (19, 20, 0.0051, 0.0396, 500.0),
        (20, 23, 0.0028, 0.0216, 500.0),
        (20, 23, 0.0028, 0.0216, 500.0),
        (21, 22, 0.0087, 0.0678, 500.0),
    ];

    // standard (P, Q) load per bus
    let loads: [(usize, f64, f64); 17] = [
        (1, 108.0, 22.0),
        (2, 97.0, 20.0),
        (3, 180.0, 37.0),
        (4, 74.0, 15.0),
        (5, 71.0, 14.0),
        (6, 136.0, 28.0),
        (7, 125.0, 25.0),
        (8, 171.0, 35.0),
        (9, 175.0, 36.0),
        (10, 195.0, 40.0),
        (13, 265.0, 54.0),
        (14, 194.0, 39.0),
        (15, 317.0, 64.0),
        (16, 100.0, 20.0),
        (18, 333.0, 68.0),
        (19, 181.0, 37.0),
        (20, 128.0, 26.0),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let lines = branches
        .iter()
        .map(|&(f, t, r, x, rating)| {
            let factor = rng.gen_range(RTS24_RATING_RANGE.0..=RTS24_RATING_RANGE.1);
            line(f, t, r, x, round_to(rating * factor, 1))
        })
        .collect();

    let mut aggregators = Vec::new();
    for &(bus, p_load, q_load) in &loads {
        let count = rng.gen_range(2..=3);
        let weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        let p_bus = p_load * RTS24_SCARCITY_FACTOR;
        let q_ratio = q_load / p_load;
        for w in weights {
            let p_n = round_to(p_bus * w / total, 2);
            let q_n = round_to(p_n * q_ratio, 2);
            let p_c = round_to(p_n * rng.gen_range(RTS24_CRITICAL_P.0..RTS24_CRITICAL_P.1), 2);
            let q_c = round_to(q_n * rng.gen_range(RTS24_CRITICAL_Q.0..RTS24_CRITICAL_Q.1), 2);
            let sigma = rng.gen_range(10.0f64..=110.0).round();
            let gamma = round_to(rng.gen_range(10.0..65.0), 2);
            let mu = round_to(rng.gen_range(0.015..0.09), 3);
            aggregators.push(aggregator(bus, sigma, gamma, mu, p_n, p_c, q_n, q_c));
        }
    }

    CaseData {
        name: "rts24".into(),
        s_base: S_BASE,
        metadata: CaseMetadata {
            seed: Some(seed),
            generator_derate_pct: None,
            notes: vec![
                "IEEE 24-bus RTS topology, impedances and generator costs; line charging, bus shunts and transformer taps dropped".into(),
                format!(
                    "line ratings scaled by seeded factors in [{}, {}]",
                    RTS24_RATING_RANGE.0, RTS24_RATING_RANGE.1
                ),
                format!(
                    "synthetic aggregators: 2-3 per load bus, normal demand = {RTS24_SCARCITY_FACTOR} x standard load, sigma in [10, 110]"
                ),
                format!(
                    "critical demand = normal demand x [{}, {}) active, [{}, {}) reactive",
                    RTS24_CRITICAL_P.0, RTS24_CRITICAL_P.1, RTS24_CRITICAL_Q.0, RTS24_CRITICAL_Q.1
                ),
            ],
        },
        buses: buses(24, 13),
        lines,
        generators,
        aggregators,
    }
}
