//! Per-subcommand key schemas and the `key = value` configuration format.
//!
//! A configuration file holds one `[subcommand]` section per command; every
//! key in every section is checked against that command's schema. Values
//! resolve as: command-line flag, then the section of the running command,
//! then the schema default.

use std::collections::BTreeMap;
use std::fmt;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    /// Finite double > 0.
    Positive,
    /// Finite double ≥ 0.
    NonNegative,
    /// Unsigned integer.
    Count,
    /// Comma-separated finite doubles (possibly empty).
    Reals,
    /// Comma-separated unsigned integers (possibly empty).
    Counts,
    Flag,
    Text,
    Choice(&'static [&'static str]),
}

#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

#[derive(Clone, Copy, Debug)]
pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [Key],
}

const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Key {
    Key { name, kind, default: Some(default), help }
}

const fn required(name: &'static str, kind: Kind, help: &'static str) -> Key {
    Key { name, kind, default: None, help }
}

const FAMILIES: &[&str] = &["shear", "reynolds", "herglotz", "random"];
const MODES: &[&str] = &["verify-only", "desk"];

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "beltrami-gen",
        about: "Synthesize a unit-norm Beltrami field and write it as a VXF1 snapshot",
        keys: &[
            key("family", Kind::Choice(FAMILIES), "shear", "field family"),
            key("N", Kind::Count, "2", "curl eigenvalue (frequency)"),
            key("grid", Kind::Count, "32", "grid points per axis (power of two, >= 8)"),
            key("axis", Kind::Count, "2", "shear axis for the shear family"),
            key(
                "direction",
                Kind::Reals,
                "0.2,-0.1,0.4",
                "offset e of the herglotz amplitude (x2 x3, x3 x1, x1 x2) + e",
            ),
            key("seed", Kind::Count, "0", "random seed of the random family"),
        ],
    },
    CommandSpec {
        name: "simulate",
        about: "Integrate the Navier-Stokes equations from a snapshot or a Beltrami datum",
        keys: &[
            key("input", Kind::Text, "", "initial VXF1 snapshot; empty builds the shear B_N"),
            key("N", Kind::Count, "2", "frequency of the generated datum"),
            key("grid", Kind::Count, "32", "grid of the generated datum"),
            key("nu", Kind::Positive, "0.05", "viscosity"),
            key("alpha", Kind::Positive, "1", "dissipation exponent, (-Laplacian)^alpha"),
            key("times", Kind::Reals, "0.5,1", "sample times"),
            key("dt", Kind::Positive, "1e-3", "largest time step"),
        ],
    },
    CommandSpec {
        name: "trace",
        about: "Trace vortex lines of a snapshot and export them as CSV",
        keys: &[
            required("input", Kind::Text, "VXF1 velocity snapshot"),
            key("seeds", Kind::Count, "4", "number of lattice seeds"),
            key("tau_max", Kind::Positive, "62.83185307179586", "line parameter horizon (peak speed normalized to 1)"),
            key("tol", Kind::Positive, "1e-9", "integration tolerance"),
        ],
    },
    CommandSpec {
        name: "classify",
        about: "Classify the vortex lines of a snapshot by winding",
        keys: &[
            required("input", Kind::Text, "VXF1 velocity snapshot"),
            key("seeds", Kind::Count, "64", "number of lattice seeds"),
            key("tau_max", Kind::Positive, "62.83185307179586", "line parameter horizon (peak speed normalized to 1)"),
            key("tol", Kind::Positive, "1e-9", "integration tolerance"),
        ],
    },
    CommandSpec {
        name: "melnikov",
        about: "Melnikov profile of a resonant torus and, optionally, its breakdown",
        keys: &[
            key("p", Kind::Count, "1", "resonance numerator"),
            key("q", Kind::Count, "2", "resonance denominator"),
            key("nu", Kind::Positive, "0.05", "viscosity"),
            key("M", Kind::Positive, "1", "shear amplitude"),
            key("eps", Kind::Positive, "1e-3", "tilt amplitude"),
            key("grid", Kind::Count, "32", "grid points per axis"),
            key("samples", Kind::Count, "128", "profile samples over one period"),
            key("breakdown", Kind::Flag, "false", "also locate the fixed points of the return map"),
            key("probe_ratio", Kind::Positive, "5e-3", "first-order term relative to the vorticity at the probe time"),
        ],
    },
    CommandSpec {
        name: "scenario",
        about: "Reconnection cascade: verify constants and optionally run the desk DNS",
        keys: &[
            key("mode", Kind::Choice(MODES), "verify-only", "verify-only or desk"),
            key("constants", Kind::Text, "", "constants file; empty chooses (verify-only) or builds (desk) them"),
            key("times", Kind::Reals, "1,2", "times T_1 < ... < T_n"),
            key("nu", Kind::Positive, "1", "viscosity"),
            key("r", Kind::Count, "7", "Sobolev order"),
            key("M", Kind::Positive, "1", "amplitude of the base field"),
            key("margin", Kind::Positive, "1000", "safety factor of every condition"),
            key("frequencies", Kind::Counts, "", "desk frequencies N_0 > ... > N_n"),
            key("delta1", Kind::NonNegative, "0.01", "desk amplitude delta_1"),
            key("grid", Kind::Count, "32", "desk grid"),
            key("dt", Kind::Positive, "1e-2", "desk time step"),
            key("seeds", Kind::Count, "64", "lines classified per time"),
        ],
    },
    CommandSpec {
        name: "constants",
        about: "Choose and verify the cascade constants in high precision",
        keys: &[
            key("times", Kind::Reals, "1,2", "times T_1 < ... < T_n"),
            key("margin", Kind::Positive, "1000", "safety factor of every condition"),
            key("nu", Kind::Positive, "1", "viscosity"),
            key("r", Kind::Count, "7", "Sobolev order"),
            key("M", Kind::Positive, "1", "amplitude of the base field"),
            key("precision", Kind::Count, "512", "mantissa bits"),
            key("base_frequency", Kind::Count, "2", "smallest frequency N_n"),
        ],
    },
    CommandSpec {
        name: "verify",
        about: "Re-check a constants file, a VXF1 snapshot, or a run manifest",
        keys: &[required("input", Kind::Text, "file to verify")],
    },
];

/// Key accepted by every section: the output directory.
pub const OUT_KEY: &str = "out";

pub fn spec(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name)
}

impl CommandSpec {
    pub fn key(&self, name: &str) -> Option<&'static Key> {
        self.keys.iter().find(|k| k.name == name)
    }
}

/// Where a resolved value came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Flag,
    Config { line: usize },
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Flag => write!(f, "command line"),
            Source::Config { line } => write!(f, "config line {line}"),
            Source::Default => write!(f, "default"),
        }
    }
}

/// Entries of one section: key → (value, line).
pub type Section = BTreeMap<String, (String, usize)>;

/// Parses a configuration file and validates every section against the
/// schemas. Blank lines and lines starting with `#` are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, Section>, CliError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<&'static CommandSpec> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            let c = spec(name)
                .ok_or_else(|| CliError::Validation(format!("config line {line}: unknown section `[{name}]`")))?;
            sections.entry(c.name.to_string()).or_default();
            current = Some(c);
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config line {line}: expected `key = value`, found `{s}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let c = current
            .ok_or_else(|| CliError::Validation(format!("config line {line}: key `{k}` precedes any [section]")))?;
        let kind = if k == OUT_KEY {
            Kind::Text
        } else {
            c.key(k)
                .ok_or_else(|| CliError::Validation(format!("config line {line}: unknown key `{k}` in [{}]", c.name)))?
                .kind
        };
        check_value(kind, v).map_err(|m| CliError::Validation(format!("config line {line}: key `{k}`: {m}")))?;
        let section = sections.get_mut(c.name).expect("section opened");
        if section.insert(k.to_string(), (v.to_string(), line)).is_some() {
            return Err(CliError::Validation(format!("config line {line}: duplicate key `{k}` in [{}]", c.name)));
        }
    }
    Ok(sections)
}

fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("`{}` is not a valid list entry", s.trim())))
        .collect()
}

fn real(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

/// Checks that `v` parses as `kind`.
pub fn check_value(kind: Kind, v: &str) -> Result<(), String> {
    match kind {
        Kind::Positive => match real(v)? {
            x if x > 0.0 => Ok(()),
            _ => Err(format!("`{v}` must be positive")),
        },
        Kind::NonNegative => match real(v)? {
            x if x >= 0.0 => Ok(()),
            _ => Err(format!("`{v}` must be nonnegative")),
        },
        Kind::Count => v.parse::<u64>().map(drop).map_err(|_| format!("`{v}` is not a nonnegative integer")),
        Kind::Reals => {
            let xs: Vec<f64> = list(v)?;
            if xs.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(format!("`{v}` has a non-finite entry"))
            }
        }
        Kind::Counts => list::<u64>(v).map(drop),
        Kind::Flag => v.parse::<bool>().map(drop).map_err(|_| format!("`{v}` is not true or false")),
        Kind::Text => Ok(()),
        Kind::Choice(options) => {
            if options.contains(&v) {
                Ok(())
            } else {
                Err(format!("`{v}` is not one of {}", options.join(", ")))
            }
        }
    }
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug)]
pub struct Params {
    pub command: &'static CommandSpec,
    values: BTreeMap<&'static str, (String, Source)>,
}

impl Params {
    /// Merges flags over the config section over defaults and validates the
    /// result. `flags` holds the values given on the command line.
    pub fn resolve(
        command: &'static CommandSpec,
        flags: &BTreeMap<&'static str, String>,
        section: Option<&Section>,
    ) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for k in command.keys {
            let (v, src) = if let Some(v) = flags.get(k.name) {
                (v.clone(), Source::Flag)
            } else if let Some((v, line)) = section.and_then(|s| s.get(k.name)) {
                (v.clone(), Source::Config { line: *line })
            } else if let Some(d) = k.default {
                (d.to_string(), Source::Default)
            } else {
                return Err(CliError::Validation(format!("missing required key `{}` for {}", k.name, command.name)));
            };
            check_value(k.kind, &v).map_err(|m| CliError::Validation(format!("key `{}` ({src}): {m}", k.name)))?;
            values.insert(k.name, (v, src));
        }
        Ok(Params { command, values })
    }

    fn raw(&self, name: &str) -> &str {
        &self.values.get(name).unwrap_or_else(|| panic!("`{name}` is not a key of {}", self.command.name)).0
    }

    fn invalid(&self, name: &str, message: impl fmt::Display) -> CliError {
        let src = &self.values[name].1;
        CliError::Validation(format!("key `{name}` ({src}): {message}"))
    }

    pub fn real(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("validated")
    }

    pub fn count(&self, name: &str) -> u64 {
        self.raw(name).parse().expect("validated")
    }

    /// Count converted to a narrower integer, with a range check.
    pub fn count_as<T: TryFrom<u64>>(&self, name: &str) -> Result<T, CliError> {
        T::try_from(self.count(name)).map_err(|_| self.invalid(name, "value out of range"))
    }

    pub fn reals(&self, name: &str) -> Vec<f64> {
        list(self.raw(name)).expect("validated")
    }

    pub fn counts(&self, name: &str) -> Vec<u64> {
        list(self.raw(name)).expect("validated")
    }

    pub fn flag(&self, name: &str) -> bool {
        self.raw(name).parse().expect("validated")
    }

    pub fn text(&self, name: &str) -> &str {
        self.raw(name)
    }

    /// Validation error naming the key and where its value came from.
    pub fn reject(&self, name: &str, message: impl fmt::Display) -> CliError {
        self.invalid(name, message)
    }

    /// Canonical `key = value` listing, sorted by key; hashed into the manifest.
    pub fn canonical(&self) -> String {
        let mut s = format!("command = {}\n", self.command.name);
        for (k, (v, _)) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
