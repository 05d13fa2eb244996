//! Experiment configuration and the text format for algebra elements.
//!
//! # Matrix files
//!
//! ```text
//! # comment to end of line; blank lines are ignored
//! block 2
//! 1,0   0,0.5
//! 0,-0.5 1,0
//! block 1
//! 2,0
//! ---
//! block 2
//! ...
//! ```
//!
//! An element is a sequence of blocks, each introduced by `block <n>` and
//! followed by `n` rows of `n` whitespace-separated `re,im` entries. A line
//! holding only `---` starts the next element.
//!
//! # Configuration
//!
//! TOML with the keys `seed` (required), `state`, `subalgebra`, the table
//! `[algebra]` (`block_dims`, optional `trace_weights`), the table `[samples]`
//! and the table `[tolerances]` mapping check names to thresholds. Paths in
//! `density(...)` and `basis(...)` are relative to the configuration file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::algebra::{AlgebraElement, AlgebraSpec};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

/// Parses one or more elements separated by `---`.
pub fn parse_elements(text: &str, path: &str) -> Result<Vec<AlgebraElement>> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_string(), line, message };
    let mut elements = Vec::new();
    let mut blocks: Vec<CMat> = Vec::new();
    // (matrix, size, rows filled, line of the header)
    let mut current: Option<(CMat, usize, usize, usize)> = None;

    let finish_block = |current: &mut Option<(CMat, usize, usize, usize)>, blocks: &mut Vec<CMat>| -> Result<()> {
        if let Some((m, n, filled, header)) = current.take() {
            if filled != n {
                return Err(err(header, format!("block {n} has {filled} rows, expected {n}")));
            }
            blocks.push(m);
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "---" {
            finish_block(&mut current, &mut blocks)?;
            if blocks.is_empty() {
                return Err(err(line_no, "empty element before `---`".into()));
            }
            elements.push(AlgebraElement::from_blocks_unchecked(std::mem::take(&mut blocks)));
            continue;
        }
        if let Some(rest) = line.strip_prefix("block") {
            finish_block(&mut current, &mut blocks)?;
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| err(line_no, format!("expected `block <size>`, found `{line}`")))?;
            if n == 0 {
                return Err(err(line_no, "block size must be positive".into()));
            }
            current = Some((CMat::zeros(n, n), n, 0, line_no));
            continue;
        }
        let Some((m, n, filled, _)) = current.as_mut() else {
            return Err(err(line_no, "matrix row before any `block` header".into()));
        };
        if *filled == *n {
            return Err(err(line_no, format!("too many rows for block of size {n}")));
        }
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != *n {
            return Err(err(line_no, format!("row has {} entries, expected {n}", entries.len())));
        }
        for (j, e) in entries.iter().enumerate() {
            let (re, im) = e
                .split_once(',')
                .ok_or_else(|| err(line_no, format!("entry `{e}` is not of the form re,im")))?;
            let re: f64 = re.trim().parse().map_err(|_| err(line_no, format!("bad real part `{re}`")))?;
            let im: f64 = im.trim().parse().map_err(|_| err(line_no, format!("bad imaginary part `{im}`")))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(err(line_no, format!("non-finite entry `{e}`")));
            }
            m[(*filled, j)] = c64(re, im);
        }
        *filled += 1;
    }
    finish_block(&mut current, &mut blocks)?;
    if !blocks.is_empty() {
        elements.push(AlgebraElement::from_blocks_unchecked(blocks));
    }
    if elements.is_empty() {
        return Err(err(1, "no elements".into()));
    }
    Ok(elements)
}

pub fn read_elements(path: &Path) -> Result<Vec<AlgebraElement>> {
    let text = std::fs::read_to_string(path)?;
    parse_elements(&text, &path.display().to_string())
}

/// Renders elements in the matrix file format. Entries use the shortest
/// representation that parses back to the same `f64`.
pub fn format_elements(elements: &[AlgebraElement]) -> String {
    let mut out = String::new();
    for (k, a) in elements.iter().enumerate() {
        if k > 0 {
            out.push_str("---\n");
        }
        for b in a.blocks() {
            let _ = writeln!(out, "block {}", b.nrows());
            for i in 0..b.nrows() {
                let row: Vec<String> = (0..b.ncols()).map(|j| format!("{:e},{:e}", b[(i, j)].re, b[(i, j)].im)).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
    }
    out
}

/// Block sizes of an element.
pub fn block_dims_of(a: &AlgebraElement) -> Vec<usize> {
    a.blocks().iter().map(|b| b.nrows()).collect()
}

/// Parses `"2,3"` (same ranks in every block) or `"1,2;1,1"` (one list per
/// block) into per-block rank lists.
pub fn parse_flag_dims(spec: &AlgebraSpec, text: &str) -> Result<Vec<Vec<usize>>> {
    let bad = |m: String| Error::InvalidArgument(format!("flag `{text}`: {m}"));
    let lists: Vec<Vec<usize>> = text
        .split(';')
        .map(|part| {
            part.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| bad(format!("`{}` is not a rank", x.trim()))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    match lists.len() {
        1 => Ok(vec![lists[0].clone(); spec.num_blocks()]),
        k if k == spec.num_blocks() => Ok(lists),
        k => Err(bad(format!("{k} rank lists for {} blocks", spec.num_blocks()))),
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    pub block_dims: Vec<usize>,
    pub trace_weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Samples {
    /// Points of the base used for Gram matrices and realization checks.
    pub points: usize,
    /// Random fiber vectors for the reproducing-property checks.
    pub vectors: usize,
    /// Random algebra elements for the homomorphism and expectation checks.
    pub inputs: usize,
    /// Random inputs for the factorization checks.
    pub factorizations: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Self { points: 10, vectors: 20, inputs: 100, factorizations: 20 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    algebra: Option<AlgebraConfig>,
    #[serde(default = "default_state")]
    state: String,
    #[serde(default = "default_subalgebra")]
    subalgebra: String,
    #[serde(default)]
    samples: Samples,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

fn default_state() -> String {
    "random".into()
}

fn default_subalgebra() -> String {
    "centralizer".into()
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    /// `φ(a) = a_11` on `M_n`.
    Corner(usize),
    Tracial,
    /// Random faithful density.
    Random,
    /// Random density of rank at most `k` in each block.
    RandomRank(usize),
    /// Density read from a matrix file.
    Density(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SubalgebraSpec {
    Full,
    Scalars,
    Centralizer,
    /// Spanning set read from a matrix file.
    Basis(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub block_dims: Vec<usize>,
    pub trace_weights: Option<Vec<f64>>,
    pub state: StateSpec,
    pub subalgebra: SubalgebraSpec,
    pub samples: Samples,
    pub tolerances: BTreeMap<String, f64>,
    /// SHA-256 of the configuration text.
    pub sha256: String,
}

fn call_arg<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')').map(str::trim)
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { path: "config".into(), line, message: e.message().to_string() }
        })?;
        let cfg_err = |field: &str, message: String| Error::Config { field: field.into(), message };

        let state = raw.state.trim();
        let state = if let Some(arg) = call_arg(state, "corner") {
            let n = arg.parse().map_err(|_| cfg_err("state", format!("bad size in `{state}`")))?;
            StateSpec::Corner(n)
        } else if let Some(arg) = call_arg(state, "random-rank") {
            let k = arg.parse().map_err(|_| cfg_err("state", format!("bad rank in `{state}`")))?;
            if k == 0 {
                return Err(cfg_err("state", "rank must be positive".into()));
            }
            StateSpec::RandomRank(k)
        } else if let Some(arg) = call_arg(state, "density") {
            StateSpec::Density(base_dir.join(arg))
        } else {
            match state {
                "tracial" => StateSpec::Tracial,
                "random" => StateSpec::Random,
                other => return Err(cfg_err("state", format!("unknown state `{other}`"))),
            }
        };

        let sub = raw.subalgebra.trim();
        let subalgebra = if let Some(arg) = call_arg(sub, "basis") {
            SubalgebraSpec::Basis(base_dir.join(arg))
        } else {
            match sub {
                "full" => SubalgebraSpec::Full,
                "scalars" => SubalgebraSpec::Scalars,
                "centralizer" => SubalgebraSpec::Centralizer,
                other => return Err(cfg_err("subalgebra", format!("unknown subalgebra `{other}`"))),
            }
        };

        let (block_dims, trace_weights) = match (&raw.algebra, &state) {
            (Some(a), StateSpec::Corner(n)) if a.block_dims != [*n] => {
                return Err(cfg_err("algebra.block_dims", format!("corner({n}) needs block_dims = [{n}]")));
            }
            (Some(a), _) => (a.block_dims.clone(), a.trace_weights.clone()),
            (None, StateSpec::Corner(n)) => (vec![*n], None),
            (None, _) => return Err(cfg_err("algebra", "missing table (only corner(n) implies it)".into())),
        };
        if raw.samples.points == 0 || raw.samples.inputs == 0 {
            return Err(cfg_err("samples", "counts must be positive".into()));
        }
        for (k, v) in &raw.tolerances {
            if !(v.is_finite() && *v >= -1.0) {
                return Err(cfg_err(&format!("tolerances.{k}"), format!("bad threshold {v}")));
            }
        }
        Ok(Self {
            seed: raw.seed,
            block_dims,
            trace_weights,
            state,
            subalgebra,
            samples: raw.samples,
            tolerances: raw.tolerances,
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse { path: path.display().to_string(), line, message },
            other => other,
        })
    }

    pub fn algebra(&self) -> Result<AlgebraSpec> {
        match &self.trace_weights {
            Some(w) => AlgebraSpec::with_weights(&self.block_dims, w),
            None => AlgebraSpec::new(&self.block_dims),
        }
        .map_err(|e| Error::Config { field: "algebra".into(), message: e.to_string() })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Multiplier applied to every default threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TolerancePolicy {
    Default,
    Strict,
    Loose,
}

impl TolerancePolicy {
    pub const ENV_VAR: &'static str = "UNIREP_TOL_PROFILE";

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "" | "default" => Ok(Self::Default),
            "strict" => Ok(Self::Strict),
            "loose" => Ok(Self::Loose),
            other => Err(Error::Config { field: Self::ENV_VAR.into(), message: format!("unknown profile `{other}`") }),
        }
    }

    pub fn from_env() -> Result<Self> {
        Self::from_name(std::env::var(Self::ENV_VAR).unwrap_or_default().trim())
    }

    pub fn factor(self) -> f64 {
        match self {
            Self::Default => 1.0,
            Self::Strict => 0.1,
            Self::Loose => 10.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_elements() {
        let text = "# two elements\nblock 2\n1,0 0,1\n0,-1 2,0\nblock 1\n3,0.5\n---\nblock 2\n1,0 0,0\n0,0 1,0\nblock 1\n1,0\n";
        let els = parse_elements(text, "t").unwrap();
        assert_eq!(els.len(), 2);
        assert_eq!(block_dims_of(&els[0]), vec![2, 1]);
        assert_eq!(els[0].block(0)[(0, 1)], c64(0.0, 1.0));
        assert_eq!(els[0].block(1)[(0, 0)], c64(3.0, 0.5));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        match parse_elements("block 2\n1,0 0,0\n1,0\n", "m.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_elements("block 2\n1,0 x,0\n", "m.txt") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("real part"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_elements("block 2\n1,0 0,0\n", "m"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_elements("1,0\n", "m").is_err());
    }

    #[test]
    fn format_round_trips() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let a = spec.haar_unitary(4);
        let b = spec.identity();
        let back = parse_elements(&format_elements(&[a.clone(), b.clone()]), "r").unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn config_fields() {
        let cfg = ExperimentConfig::parse(
            "seed = 7\nstate = \"corner(4)\"\nsubalgebra = \"scalars\"\n[tolerances]\n\"kernel.gram_psd\" = 1e-6\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.block_dims, vec![4]);
        assert_eq!(cfg.state, StateSpec::Corner(4));
        assert_eq!(cfg.subalgebra, SubalgebraSpec::Scalars);
        assert_eq!(cfg.tolerances["kernel.gram_psd"], 1e-6);
        assert_eq!(cfg.samples, Samples::default());
    }

    #[test]
    fn config_errors() {
        let missing_seed = ExperimentConfig::parse("state = \"tracial\"\n[algebra]\nblock_dims = [2]\n", Path::new("."));
        assert!(matches!(missing_seed, Err(Error::Parse { .. })), "{missing_seed:?}");
        let bad_state = ExperimentConfig::parse("seed = 1\nstate = \"mixed\"\n[algebra]\nblock_dims = [2]\n", Path::new("."));
        assert!(matches!(bad_state, Err(Error::Config { ref field, .. }) if field == "state"));
        let no_algebra = ExperimentConfig::parse("seed = 1\n", Path::new("."));
        assert!(matches!(no_algebra, Err(Error::Config { .. })));
        let unknown = ExperimentConfig::parse("seed = 1\ncolour = 3\n[algebra]\nblock_dims = [2]\n", Path::new("."));
        match unknown {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flag_dims() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        assert_eq!(parse_flag_dims(&spec, "1,2;1,1").unwrap(), vec![vec![1, 2], vec![1, 1]]);
        assert_eq!(parse_flag_dims(&spec, "1,1").unwrap(), vec![vec![1, 1], vec![1, 1]]);
        assert!(parse_flag_dims(&spec, "1;1;1").is_err());
        assert!(parse_flag_dims(&spec, "a").is_err());
    }

    #[test]
    fn profiles() {
        assert_eq!(TolerancePolicy::from_name("strict").unwrap().factor(), 0.1);
        assert!(TolerancePolicy::from_name("lenient").is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
