//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::constants::FracParams;
use crate::diagnostics::{ClassifyConfig, FlatnessMode};
use crate::error::{Error, Result};
use crate::extension::SlabGrid;
use crate::grid::{BoxGrid, ThinDomain};
use crate::shape_opt::{MoveKind, OptimizerConfig, Schedule};

pub const KNOWN_KEYS: &[&str] = &[
    "n", "s", "lambda", "lower", "upper", "cells", "m", "domain", "seed",
    "layers", "height", "gamma",
    "moves", "schedule", "t0", "cooling", "steps", "restarts", "max_stale", "max_iter",
    "radii", "tol", "delta", "flat_threshold", "density_cells", "flatness_cells", "flatness_mode",
    "sup_prefactor",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
    /// directory relative paths in values resolve against
    base_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::Config { line, message: format!("expected key = value, got `{body}`") })?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                return Err(Error::Config { line, message: format!("invalid key `{key}`") });
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config { line, message: format!("unknown key `{key}`") });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(Error::Config { line, message: format!("duplicate key `{key}` (first on line {first})") });
            }
            entries.insert(key.to_string(), (value.trim().to_string(), line));
        }
        Ok(Self { entries, base_dir: None })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let text: String = map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Self::parse(&text)
    }

    pub fn with_base_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.base_dir = dir;
        self
    }

    /// Override or add a key, as from a command-line flag.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(_, l)| *l).unwrap_or(0)
    }

    fn bad(&self, key: &str, message: String) -> Error {
        Error::Config { line: self.line_of(key), message }
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.bad(key, format!("cannot parse `{v}` for `{key}`"))),
        }
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config { line: 0, message: format!("missing required key `{key}`") })
    }

    /// Comma- or space-separated numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| self.bad(key, format!("cannot parse `{t}` in `{key}`"))))
            .collect::<Result<_>>()
            .map(Some)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = PathBuf::from(p);
        match &self.base_dir {
            Some(d) if path.is_relative() => d.join(path),
            _ => path,
        }
    }

    pub fn params(&self) -> Result<FracParams> {
        let n = self.require("n")?;
        let s = self.require("s")?;
        let lambda = self.get_or("lambda", 1.0)?;
        FracParams::new(n, s, lambda).map_err(|e| self.bad("s", e.to_string()))
    }

    pub fn grid(&self) -> Result<BoxGrid> {
        let n = self.require("n")?;
        let lower = self.get_or("lower", -2.0)?;
        let upper = self.get_or("upper", 2.0)?;
        let cells = self.require("cells")?;
        BoxGrid::new(n, lower, upper, cells).map_err(|e| self.bad("cells", e.to_string()))
    }

    /// `interval a b`, `intervals a b c d …`, `ball cx [cy] r`, `file PATH`,
    /// or absent for the optimizer's default start.
    pub fn domain(&self, grid: &BoxGrid) -> Result<Option<ThinDomain>> {
        let Some(text) = self.raw("domain") else { return Ok(None) };
        let mut parts = text.split_whitespace();
        let kind = parts.next().unwrap_or("");
        let rest: Vec<&str> = parts.collect();
        let nums = || -> Result<Vec<f64>> {
            rest.iter()
                .map(|t| t.parse().map_err(|_| self.bad("domain", format!("cannot parse `{t}` in domain"))))
                .collect()
        };
        let dom = match kind {
            "interval" | "intervals" => {
                let v = nums()?;
                if grid.n() != 1 || v.is_empty() || v.len() % 2 != 0 {
                    return Err(self.bad("domain", "intervals need n = 1 and endpoint pairs".into()));
                }
                let mut d = ThinDomain::empty(grid.clone());
                for p in v.chunks(2) {
                    d = d.union(&ThinDomain::interval(grid.clone(), p[0], p[1]))?;
                }
                d
            }
            "ball" => {
                let v = nums()?;
                let (c, r) = match (grid.n(), v.as_slice()) {
                    (1, [c, r]) => ([*c, 0.0], *r),
                    (2, [c0, c1, r]) => ([*c0, *c1], *r),
                    _ => return Err(self.bad("domain", "ball takes a centre and a radius".into())),
                };
                ThinDomain::ball(grid.clone(), c, r)
            }
            "file" => {
                let [p] = rest.as_slice() else {
                    return Err(self.bad("domain", "file takes one path".into()));
                };
                crate::io::read_mask(&self.resolve(p), grid)?
            }
            other => return Err(self.bad("domain", format!("unknown domain kind `{other}`"))),
        };
        if dom.is_empty() {
            return Err(self.bad("domain", "domain has no interior nodes".into()));
        }
        Ok(Some(dom))
    }

    pub fn slab(&self, grid: &BoxGrid, params: &FracParams) -> Result<SlabGrid> {
        let layers = self.get_or("layers", 64)?;
        let height = self.get_or("height", 2.0 * grid.diameter())?;
        let gamma = self.get_or("gamma", 1.0 / params.s())?;
        SlabGrid::new(grid.clone(), layers, height, gamma, params.a()).map_err(|e| self.bad("layers", e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_or("seed", 0)
    }

    pub fn optimizer(&self, grid: &BoxGrid) -> Result<OptimizerConfig> {
        let moves = match self.raw("moves").unwrap_or("boundary") {
            "single" => MoveKind::Single,
            "boundary" => MoveKind::Boundary,
            "block" => MoveKind::Block,
            other => return Err(self.bad("moves", format!("unknown move set `{other}`"))),
        };
        let schedule = match self.raw("schedule").unwrap_or("greedy") {
            "greedy" => Schedule::Greedy,
            "anneal" => Schedule::Anneal {
                t0: self.get_or("t0", 0.1)?,
                cooling: self.get_or("cooling", 0.995)?,
                steps: self.get_or("steps", 2000)?,
            },
            other => return Err(self.bad("schedule", format!("unknown schedule `{other}`"))),
        };
        let d = OptimizerConfig::default();
        Ok(OptimizerConfig {
            m: self.get_or("m", 1)?,
            move_kind: moves,
            schedule,
            restarts: self.get_or("restarts", 1)?,
            seed: self.seed()?,
            max_stale: self.get_or("max_stale", d.max_stale)?,
            max_iter: self.get_or("max_iter", d.max_iter)?,
            initial: self.domain(grid)?,
        })
    }

    pub fn classify(&self) -> Result<ClassifyConfig> {
        let d = ClassifyConfig::default();
        let mode = match self.raw("flatness_mode").unwrap_or("extension") {
            "extension" => FlatnessMode::Extension,
            "trace" => FlatnessMode::Trace,
            other => return Err(self.bad("flatness_mode", format!("unknown flatness mode `{other}`"))),
        };
        Ok(ClassifyConfig {
            tol: self.get_or("tol", d.tol)?,
            delta: self.get_or("delta", d.delta)?,
            flatness_threshold: self.get_or("flat_threshold", d.flatness_threshold)?,
            density_cells: self.get_or("density_cells", d.density_cells)?,
            flatness_cells: self.get_or("flatness_cells", d.flatness_cells)?,
            flatness_mode: mode,
        })
    }

    /// Weiss radii in units of h; default 5, 6, …, 10.
    pub fn radii_cells(&self) -> Result<Vec<f64>> {
        Ok(self.list("radii")?.unwrap_or_else(|| (5..=10).map(f64::from).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let c = Config::parse("# run\nn = 1\ns=0.5 # half\n\ncells = 64\ndomain = interval -1 1\nradii = 5, 6,7\n").unwrap();
        assert_eq!(c.require::<usize>("n").unwrap(), 1);
        assert_eq!(c.params().unwrap().s(), 0.5);
        assert_eq!(c.radii_cells().unwrap(), vec![5.0, 6.0, 7.0]);
        let g = c.grid().unwrap();
        assert_eq!(c.domain(&g).unwrap().unwrap().count(), 31);
    }

    #[test]
    fn errors_name_the_line() {
        match Config::parse("n = 1\ns 0.5\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match Config::parse("n = 1\n\nbogus = 3\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match Config::parse("n = 1\nn = 2\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let c = Config::parse("n = 1\ns = 0.5\ncells = x\n").unwrap();
        match c.grid() {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let c = Config::parse("n = 2\ns = 0.3\ncells = 16\ndomain = ball 0 0 0.5\n").unwrap();
        let back = Config::from_map(&c.snapshot()).unwrap();
        assert_eq!(back.snapshot(), c.snapshot());
    }
}
