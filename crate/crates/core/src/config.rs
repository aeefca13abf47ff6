//! Flat `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are ignored. `N` and `schemes`
//! take comma-separated lists and span the sweep; every other key sets one
//! field of the base [`SimConfig`]. `seed` is mandatory.

use std::fmt::Write as _;

use crate::codec::MixerMode;
use crate::error::{Error, Result};
use crate::ormac::ChannelParams;
use crate::sim::{CollisionAccounting, Scheme, SimConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub schemes: Vec<Scheme>,
    pub sweep: Vec<usize>,
}

const KEYS: &[&str] = &[
    "seed",
    "T",
    "N",
    "M",
    "schemes",
    "replications",
    "G",
    "pd",
    "pf",
    "K",
    "L",
    "rao_period_ms",
    "backoff_window_ms",
    "max_attempts",
    "payload_bytes",
    "rar_window_ms",
    "processing_delay_ms",
    "grant_to_data_ms",
    "contention_resolution_ms",
    "mixer",
    "collision_accounting",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid(format!("{key}: empty list")));
    }
    Ok(items)
}

fn optional(key: &str, value: &str) -> Result<Option<usize>> {
    if value.is_empty() || value == "auto" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

impl ExperimentSpec {
    /// Default five-point sweep under the given master seed.
    pub fn new(seed: u64) -> Self {
        let mut base = SimConfig::new(1000, 100, Scheme::Signature, seed);
        base.replications = 100;
        ExperimentSpec {
            base,
            schemes: Scheme::ALL.to_vec(),
            sweep: vec![100, 300, 500, 700, 900],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            pairs.push((i + 1, key.trim().to_string(), value.trim().to_string()));
        }
        if !pairs.iter().any(|(_, k, _)| k == "seed") {
            return Err(Error::invalid("seed is mandatory"));
        }
        let mut spec = ExperimentSpec::new(0);
        spec.apply(&pairs)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Applies `(line, key, value)` triples in order. `pd` and `pf` are
    /// validated together after everything else.
    pub fn apply(&mut self, pairs: &[(usize, String, String)]) -> Result<()> {
        let wrap = |line: usize, e: Error| Error::Parse {
            line,
            message: match e {
                Error::InvalidParameter(m) => m,
                other => other.to_string(),
            },
        };
        let mut pd = (0, self.base.channel.p_detect());
        let mut pf = (0, self.base.channel.p_false_alarm());
        for (line, key, value) in pairs {
            match key.as_str() {
                "pd" => pd = (*line, num(key, value).map_err(|e| wrap(*line, e))?),
                "pf" => pf = (*line, num(key, value).map_err(|e| wrap(*line, e))?),
                _ => self.set(key, value).map_err(|e| wrap(*line, e))?,
            }
        }
        self.base.channel = ChannelParams::new(pd.1, pf.1).map_err(|e| wrap(pd.0.max(pf.0), e))?;
        Ok(())
    }

    /// Sets one key. `pd` and `pf` are checked against the current value of
    /// the other.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let b = &mut self.base;
        match key {
            "seed" => b.seed = num(key, value)?,
            "T" => b.population = num(key, value)?,
            "N" => self.sweep = list(key, value)?,
            "M" => b.preambles = num(key, value)?,
            "schemes" => self.schemes = list(key, value)?,
            "replications" => b.replications = num(key, value)?,
            "G" => b.target_goodput = num(key, value)?,
            "pd" => b.channel = ChannelParams::new(num(key, value)?, b.channel.p_false_alarm())?,
            "pf" => b.channel = ChannelParams::new(b.channel.p_detect(), num(key, value)?)?,
            "K" => b.weight = optional(key, value)?,
            "L" => b.frame_len = optional(key, value)?,
            "rao_period_ms" => b.rao_period_ms = num(key, value)?,
            "backoff_window_ms" => b.backoff_window_ms = num(key, value)?,
            "max_attempts" => b.max_attempts = num(key, value)?,
            "payload_bytes" => b.payload_bytes = num(key, value)?,
            "rar_window_ms" => b.rar_window_ms = num(key, value)?,
            "processing_delay_ms" => b.processing_delay_ms = num(key, value)?,
            "grant_to_data_ms" => b.grant_to_data_ms = num(key, value)?,
            "contention_resolution_ms" => b.contention_resolution_ms = num(key, value)?,
            "mixer" => b.mixer = value.parse::<MixerMode>()?,
            "collision_accounting" => b.collision_accounting = value.parse::<CollisionAccounting>()?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown key {other:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for cfg in self.configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// One config per sweep point and scheme, in output order.
    pub fn configs(&self) -> Vec<SimConfig> {
        let mut out = Vec::with_capacity(self.sweep.len() * self.schemes.len());
        for &n in &self.sweep {
            for &scheme in &self.schemes {
                let mut cfg = self.base.clone();
                cfg.arrivals = n;
                cfg.scheme = scheme;
                out.push(cfg);
            }
        }
        out
    }

    /// Canonical text form listing every key.
    pub fn to_text(&self) -> String {
        let b = &self.base;
        let join = |v: Vec<String>| v.join(",");
        let opt = |v: Option<usize>| v.map_or_else(|| "auto".to_string(), |x| x.to_string());
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("seed", b.seed.to_string());
        kv("T", b.population.to_string());
        kv("N", join(self.sweep.iter().map(|n| n.to_string()).collect()));
        kv("M", b.preambles.to_string());
        kv("schemes", join(self.schemes.iter().map(|s| s.to_string()).collect()));
        kv("replications", b.replications.to_string());
        kv("G", b.target_goodput.to_string());
        kv("pd", b.channel.p_detect().to_string());
        kv("pf", b.channel.p_false_alarm().to_string());
        kv("K", opt(b.weight));
        kv("L", opt(b.frame_len));
        kv("rao_period_ms", b.rao_period_ms.to_string());
        kv("backoff_window_ms", b.backoff_window_ms.to_string());
        kv("max_attempts", b.max_attempts.to_string());
        kv("payload_bytes", b.payload_bytes.to_string());
        kv("rar_window_ms", b.rar_window_ms.to_string());
        kv("processing_delay_ms", b.processing_delay_ms.to_string());
        kv("grant_to_data_ms", b.grant_to_data_ms.to_string());
        kv("contention_resolution_ms", b.contention_resolution_ms.to_string());
        kv("mixer", b.mixer.to_string());
        kv("collision_accounting", b.collision_accounting.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_minimal_and_defaults() {
        let spec = ExperimentSpec::parse("# default sweep\nseed = 7\n\n").unwrap();
        assert_eq!(spec, ExperimentSpec::new(7));
        assert_eq!(spec.configs().len(), 15);
    }

    #[test]
    fn parse_overrides() {
        let text = "seed=3\nN = 200\nschemes = signature, random\npd=1\npf=0\nK=9\nL=47\nmixer=canonical\n";
        let spec = ExperimentSpec::parse(text).unwrap();
        assert_eq!(spec.sweep, vec![200]);
        assert_eq!(spec.schemes, vec![Scheme::Signature, Scheme::Random]);
        assert!(spec.base.channel.is_ideal());
        assert_eq!((spec.base.weight, spec.base.frame_len), (Some(9), Some(47)));
        assert_eq!(spec.base.mixer, MixerMode::Canonical);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            ExperimentSpec::parse("N=100\n"),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            ExperimentSpec::parse("seed=1\nbogus=2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentSpec::parse("seed=1\n\nT\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            ExperimentSpec::parse("seed=1\npd=0.5\npf=0.6\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        // order of the channel keys does not matter
        let spec = ExperimentSpec::parse("seed=1\npd=1e-4\npf=1e-5\n").unwrap();
        assert_eq!(spec.base.channel.p_detect(), 1e-4);
        assert!(ExperimentSpec::parse("seed=1\nT=100\nN=200\n").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let spec = ExperimentSpec::parse("seed=11\nN=100,900\npf=0.0005\nK=4\nL=20\n").unwrap();
        let text = spec.to_text();
        let again = ExperimentSpec::parse(&text).unwrap();
        assert_eq!(again, spec);
        assert_eq!(again.to_text(), text);
    }

    proptest! {
        #[test]
        fn round_trip_is_idempotent(
            seed in any::<u64>(),
            t in 1000usize..5000,
            sweep in proptest::collection::vec(1usize..1000, 1..5),
            pd in 0.5f64..=1.0,
            pf in 0.0f64..0.4,
            reps in 1usize..500,
            g in 0.5f64..0.999,
        ) {
            let mut spec = ExperimentSpec::new(seed);
            spec.base.population = t;
            spec.sweep = sweep;
            spec.base.channel = ChannelParams::new(pd, pf).unwrap();
            spec.base.replications = reps;
            spec.base.target_goodput = g;
            let text = spec.to_text();
            let parsed = ExperimentSpec::parse(&text).unwrap();
            prop_assert_eq!(&parsed, &spec);
            prop_assert_eq!(parsed.to_text(), text);
        }
    }
}
