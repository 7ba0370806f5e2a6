//! Run configuration: a JSON file plus command-line overrides, and the run
//! directory every artifact is written under.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use md4sat_core::relaxation::{SwitchVector, RHO_1, RHO_2, RHO_DE, RHO_DOBBERTIN};
use md4sat_core::Digest;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::solver::Backend;
use crate::Error;

/// Everything a run depends on. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Number of MD4 steps, `k`.
    pub steps: usize,
    /// Value `K` every active constraint pins its chaining value to.
    pub constant: u32,
    /// `"embedded"` (CaDiCaL), `"minisat"` or `"subprocess"`.
    pub backend: String,
    /// External DIMACS solver, required by the subprocess backend.
    pub solver_path: Option<PathBuf>,
    /// Target hash: 32 hex characters, `zeros` or `ones`.
    pub hash: String,
    /// Search start: a named vector (`dobbertin`, `de`, `rho1`, `rho2`),
    /// `random`, or an explicit 0/1 string.
    pub start: String,
    /// Solver budget when screening a search point; 0 disables screening.
    pub screen_limit_secs: f64,
    /// Total search budget; absent means unlimited.
    pub search_limit_secs: Option<f64>,
    /// Solver budget for a single attack.
    pub attack_limit_secs: f64,
    /// Solver budget per campaign instance.
    pub campaign_limit_secs: f64,
    /// Closed `mu` window for shortlisting record points.
    pub shortlist: [u32; 2],
    /// Concurrent campaign instances.
    pub workers: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            steps: 39,
            constant: 0,
            backend: "embedded".into(),
            solver_path: None,
            hash: "zeros".into(),
            start: "dobbertin".into(),
            screen_limit_secs: 5.0,
            search_limit_secs: None,
            attack_limit_secs: 60.0,
            campaign_limit_secs: 600.0,
            shortlist: [256, 320],
            workers: 1,
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Config = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.screen_limit_secs.is_finite() && self.screen_limit_secs >= 0.0) {
            return Err(Error::Config("screen_limit_secs must be non-negative".into()));
        }
        if let Some(s) = self.search_limit_secs {
            positive("search_limit_secs", s)?;
        }
        positive("attack_limit_secs", self.attack_limit_secs)?;
        positive("campaign_limit_secs", self.campaign_limit_secs)?;
        if self.shortlist[0] > self.shortlist[1] {
            return Err(Error::Config(format!(
                "shortlist window [{}, {}] is empty",
                self.shortlist[0], self.shortlist[1]
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.backend()?;
        parse_hash(&self.hash)?;
        Ok(())
    }

    pub fn backend(&self) -> Result<Backend, Error> {
        match self.backend.as_str() {
            "embedded" => Ok(Backend::Embedded),
            "minisat" => Ok(Backend::Minisat),
            "subprocess" => match &self.solver_path {
                Some(p) => Ok(Backend::Subprocess {
                    solver_path: p.clone(),
                }),
                None => Err(Error::Config("subprocess backend needs solver_path".into())),
            },
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }

    pub fn target(&self) -> Result<Digest, Error> {
        parse_hash(&self.hash)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Creates `<out_dir>/<timestamp>-<command>-<fingerprint>` and stores
    /// the configuration in it.
    pub fn create_run_dir(&self, command: &str) -> Result<PathBuf, Error> {
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f");
        let dir = self
            .out_dir
            .join(format!("{stamp}-{command}-{}", self.fingerprint()));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("config.json");
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(dir)
    }

    pub fn screen_limit(&self) -> Option<Duration> {
        (self.screen_limit_secs > 0.0).then(|| Duration::from_secs_f64(self.screen_limit_secs))
    }

    pub fn search_limit(&self) -> Option<Duration> {
        self.search_limit_secs.map(Duration::from_secs_f64)
    }
}

/// Parses `zeros`, `ones` or 32 hex characters.
pub fn parse_hash(text: &str) -> Result<Digest, Error> {
    match text {
        "zeros" => Ok(Digest::ZERO),
        "ones" => Ok(Digest::ONES),
        hex => Ok(Digest::from_hex(hex)?),
    }
}

/// Parses a named vector (`dobbertin`, `de`, `rho1`, `rho2`, `zero`) or an
/// explicit 0/1 string of length `q`.
pub fn parse_switches(text: &str, q: usize) -> Result<SwitchVector, Error> {
    let literal = match text {
        "dobbertin" => RHO_DOBBERTIN,
        "de" => RHO_DE,
        "rho1" => RHO_1,
        "rho2" => RHO_2,
        "zero" => return Ok(SwitchVector::zeros(q)),
        other => other,
    };
    Ok(SwitchVector::parse(literal, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = Config::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Config>(&text).unwrap(), c);
        let partial: Config = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.steps, 39);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            Config { workers: 0, ..Config::default() },
            Config { shortlist: [320, 256], ..Config::default() },
            Config { attack_limit_secs: 0.0, ..Config::default() },
            Config { backend: "subprocess".into(), ..Config::default() },
            Config { hash: "abc".into(), ..Config::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(serde_json::from_str::<Config>(r#"{"sead": 7}"#).is_err());
        assert!(Config { backend: "glucose".into(), ..Config::default() }.validate().is_err());
    }

    #[test]
    fn names_select_backends() {
        let pick = |name: &str| Config { backend: name.into(), ..Config::default() }.backend().unwrap();
        assert_eq!(pick("embedded"), Backend::Embedded);
        assert_eq!(pick("minisat"), Backend::Minisat);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Config::default();
        let b = Config { seed: 1, ..Config::default() };
        assert_eq!(a.fingerprint(), Config::default().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn hash_shorthands() {
        assert_eq!(parse_hash("zeros").unwrap(), Digest::ZERO);
        assert_eq!(parse_hash("ones").unwrap(), Digest::ONES);
        assert_eq!(
            parse_hash("ffffffffffffffffffffffffffffffff").unwrap(),
            Digest::ONES
        );
        assert!(parse_hash("fff").is_err());
    }

    #[test]
    fn named_vectors() {
        assert_eq!(parse_switches("rho1", 31).unwrap().to_string(), RHO_1);
        assert_eq!(parse_switches("zero", 31).unwrap().count_ones(), 0);
        assert!(parse_switches("rho1", 30).is_err());
    }
}
