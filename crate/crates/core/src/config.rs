//! Flat `key=value` run configuration.
//!
//! ```text
//! # model
//! L=1
//! sigma=0.5
//! kernel.family=squared-exponential
//! kernel.length_scale=0.2
//! forcing.kind=gaussian-bump
//! forcing.base=0.2
//! forcing.amplitude=1
//! forcing.center=0.5
//! forcing.width=0.15
//!
//! # run
//! b_list=2,3,4
//! n=20000
//! grid_n=512
//! seed=7
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernel::StationaryKernel;
use crate::rare_event::EstimatorKind;
use crate::solver::{ForcingKind, ForcingProfile, ProblemSpec};

const KNOWN_KEYS: &[&str] = &[
    "L",
    "sigma",
    "kernel.family",
    "kernel.length_scale",
    "forcing.kind",
    "forcing.p0",
    "forcing.base",
    "forcing.amplitude",
    "forcing.center",
    "forcing.width",
    "x_star",
    "b",
    "b_list",
    "n",
    "grid_n",
    "seed",
    "method",
    "zeta",
    "rho",
    "bins",
    "homo_literal_theorem",
    "dump_paths",
    "dump_dir",
    "dump_count",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub b: Option<f64>,
    pub b_list: Option<Vec<f64>>,
    pub n: usize,
    pub grid_n: usize,
    pub seed: u64,
    pub method: EstimatorKind,
    pub zeta: Option<f64>,
    pub rho: Option<f64>,
    pub bins: usize,
    pub homo_literal_theorem: bool,
    /// Write the first `dump_count` simulated paths and their solutions.
    pub dump_paths: bool,
    pub dump_dir: PathBuf,
    pub dump_count: usize,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match self.map.get(key) {
            Some((line, _)) => Error::InvalidInput(format!("config line {line}, key '{key}': {msg}")),
            None => Error::InvalidInput(format!("config key '{key}': {msg}")),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| self.err(key, format!("cannot parse '{v}': {e}"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| self.err(key, "missing required key"))
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.parse::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(self.err(key, format!("must be positive, got {v}"))),
            other => Ok(other),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(self.err(key, format!("expected true or false, got '{v}'"))),
        }
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("config line {lineno}: expected key=value, got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::InvalidInput(format!("config line {lineno}, key '{key}': unknown key")));
        }
        if let Some((first, _)) = map.get(key) {
            return Err(Error::InvalidInput(format!(
                "config line {lineno}, key '{key}': duplicate (first set on line {first})"
            )));
        }
        map.insert(key.to_string(), (lineno, value.to_string()));
    }
    Ok(Entries { map })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = tokenize(text)?;

        let length = e.positive("L")?.ok_or_else(|| e.err("L", "missing required key"))?;
        let sigma: f64 = e.required("sigma")?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(e.err("sigma", format!("must be non-negative, got {sigma}")));
        }
        let family = e.raw("kernel.family").unwrap_or("squared-exponential");
        if family != "squared-exponential" {
            return Err(e.err("kernel.family", format!("unsupported family '{family}'")));
        }
        let ell =
            e.positive("kernel.length_scale")?.ok_or_else(|| e.err("kernel.length_scale", "missing required key"))?;
        let kernel = StationaryKernel::squared_exponential(ell)?;

        let kind_name: String = e.required("forcing.kind")?;
        let bump = |make: fn(f64, f64, f64, f64) -> ForcingKind| -> Result<ForcingKind> {
            if e.raw("forcing.p0").is_some() {
                return Err(e.err("forcing.p0", format!("not used by forcing.kind={kind_name}")));
            }
            let width = e.positive("forcing.width")?.ok_or_else(|| e.err("forcing.width", "missing required key"))?;
            Ok(make(
                e.required("forcing.base")?,
                e.required("forcing.amplitude")?,
                e.required("forcing.center")?,
                width,
            ))
        };
        let kind = match kind_name.as_str() {
            "constant" => {
                for key in ["forcing.base", "forcing.amplitude", "forcing.center", "forcing.width"] {
                    if e.raw(key).is_some() {
                        return Err(e.err(key, "not used by forcing.kind=constant"));
                    }
                }
                if e.raw("x_star").is_some() {
                    return Err(e.err("x_star", "not allowed with forcing.kind=constant"));
                }
                ForcingKind::Constant { p0: e.required("forcing.p0")? }
            }
            "gaussian-bump" => {
                bump(|base, amplitude, center, width| ForcingKind::GaussianBump { base, amplitude, center, width })?
            }
            "cosine-bump" => {
                bump(|base, amplitude, center, width| ForcingKind::CosineBump { base, amplitude, center, width })?
            }
            other => {
                return Err(e.err(
                    "forcing.kind",
                    format!("unknown kind '{other}' (expected constant, gaussian-bump or cosine-bump)"),
                ))
            }
        };
        let mut forcing = ForcingProfile::new(kind, length)?;
        if let Some(x) = e.parse::<f64>("x_star")? {
            forcing = forcing.with_x_star(x)?;
        }
        let spec = ProblemSpec::new(length, sigma, kernel, forcing)?;

        let b = e.parse::<f64>("b")?;
        if let Some(b) = b {
            if !(b >= 0.0) {
                return Err(e.err("b", format!("must be non-negative, got {b}")));
            }
        }
        let b_list = match e.raw("b_list") {
            None => None,
            Some(v) => {
                let list = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|err| e.err("b_list", format!("cannot parse '{v}': {err}")))?;
                if list.is_empty() || list.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(e.err("b_list", "must be a strictly increasing comma-separated list"));
                }
                Some(list)
            }
        };
        let n: usize = e.parse("n")?.unwrap_or(10_000);
        if n == 0 {
            return Err(e.err("n", "must be at least 1"));
        }
        let grid_n: usize = e.parse("grid_n")?.unwrap_or(512);
        if grid_n < 2 {
            return Err(e.err("grid_n", "must be at least 2"));
        }
        let bins: usize = e.parse("bins")?.unwrap_or(50);
        if bins == 0 {
            return Err(e.err("bins", "must be at least 1"));
        }
        let method = match e.raw("method") {
            None => EstimatorKind::Tilted,
            Some(v) => v.parse().map_err(|err: Error| e.err("method", err))?,
        };
        let dump_count: usize = e.parse("dump_count")?.unwrap_or(5);
        Ok(RunConfig {
            spec,
            b,
            b_list,
            n,
            grid_n,
            seed: e.parse("seed")?.unwrap_or(0),
            method,
            zeta: e.parse("zeta")?,
            rho: e.positive("rho")?,
            bins,
            homo_literal_theorem: e.flag("homo_literal_theorem")?,
            dump_paths: e.flag("dump_paths")?,
            dump_dir: PathBuf::from(e.raw("dump_dir").unwrap_or("paths")),
            dump_count,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| Error::InvalidInput(format!("cannot read config {}: {err}", path.display())))?;
        Self::parse(&text)
    }

    /// `b`, or an error naming the missing key.
    pub fn threshold(&self) -> Result<f64> {
        self.b.ok_or_else(|| Error::InvalidInput("config key 'b': missing required key".into()))
    }

    /// `b_list`, falling back to `[b]`.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        match (&self.b_list, self.b) {
            (Some(list), _) => Ok(list.clone()),
            (None, Some(b)) => Ok(vec![b]),
            (None, None) => Err(Error::InvalidInput("config needs 'b' or 'b_list'".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ForcingCase;

    const BASE: &str = "L=1\nsigma=0.5\nkernel.length_scale=0.2\n";

    #[test]
    fn parses_constant_config() {
        let cfg =
            RunConfig::parse(&format!("{BASE}# comment\n\nforcing.kind=constant\nforcing.p0=1\nb=3\nn=100\nseed=9\n"))
                .unwrap();
        assert_eq!(cfg.spec.forcing.case(), ForcingCase::Constant);
        assert_eq!(cfg.b, Some(3.0));
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.grid_n, 512);
        assert_eq!(cfg.method, EstimatorKind::Tilted);
        assert!(!cfg.homo_literal_theorem);
        assert_eq!(cfg.thresholds().unwrap(), vec![3.0]);
    }

    #[test]
    fn parses_bump_config() {
        let text = format!(
            "{BASE}forcing.kind=cosine-bump\nforcing.base=1\nforcing.amplitude=0.5\nforcing.center=0.5\nforcing.width=1\nb_list=2, 3,5\nmethod=direct\nhomo_literal_theorem=true\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.spec.forcing.x_stars().len(), 1);
        assert_eq!(cfg.b_list, Some(vec![2.0, 3.0, 5.0]));
        assert_eq!(cfg.method, EstimatorKind::Direct);
        assert!(cfg.homo_literal_theorem);
    }

    #[test]
    fn errors_carry_line_and_key() {
        let err = RunConfig::parse(&format!("{BASE}forcing.kind=constant\nforcing.p0=abc\n")).unwrap_err().to_string();
        assert!(err.contains("line 5") && err.contains("forcing.p0"), "{err}");
        let err =
            RunConfig::parse(&format!("{BASE}forcing.kind=constant\nforcing.p0=1\nbogus=2\n")).unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("unknown key"), "{err}");
        let err = RunConfig::parse(&format!("{BASE}sigma=1\n")).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        let err = RunConfig::parse("L=1\nsigma=0.5\nforcing.kind=constant\nforcing.p0=1\n").unwrap_err().to_string();
        assert!(err.contains("kernel.length_scale") && err.contains("missing"), "{err}");
        let err = RunConfig::parse(&format!("{BASE}forcing.kind=constant\nforcing.p0=1\nb_list=3,2\n")).unwrap_err();
        assert!(err.is_input());
    }

    #[test]
    fn constant_forbids_x_star() {
        let err = RunConfig::parse(&format!("{BASE}forcing.kind=constant\nforcing.p0=1\nx_star=0.5\n")).unwrap_err();
        assert!(err.to_string().contains("x_star"));
    }

    #[test]
    fn convex_bump_is_an_assumption_error() {
        // negative amplitude on a positive base: |p| peaks at the ends, interior min
        let text = format!(
            "{BASE}forcing.kind=gaussian-bump\nforcing.base=2\nforcing.amplitude=-1\nforcing.center=0.5\nforcing.width=0.1\nx_star=0.5\n"
        );
        assert!(RunConfig::parse(&text).unwrap_err().is_assumption());
    }
}
