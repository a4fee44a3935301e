//! Run-configuration files: line-oriented `key = value` entries under
//! `[section]` headers. `#` starts a comment, lists are bracketed and
//! comma-separated, numbers accept decimal or scientific notation.
//!
//! Sections: `[model]`, `[grid]`, `[time]`, `[params]`, `[ic]`, `[sweep]`,
//! `[output]`, `[mms]`. Unknown sections or keys are errors, with line
//! numbers. Parsing applies documented defaults and re-validates every
//! model/grid/time invariant, so a parsed `RunConfig` is runnable as-is.

use std::collections::BTreeMap;

use crate::error::{Result, SimError};
use crate::integrator::TimeSpec;
use crate::mesh::GridSpec;
use crate::models::{CompetitionParams, IcFamily, ModelParams, PredPreyParams};
use crate::operators::{FunctionalResponse, ResponseKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunVariant {
    Indirect,
    Limit,
    Sweep,
}

impl RunVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunVariant::Indirect => "indirect",
            RunVariant::Limit => "limit",
            RunVariant::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MmsSpec {
    /// Refinement-ladder depth for verification runs.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: RunVariant,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub params: ModelParams,
    pub ic: IcFamily,
    pub compatibility: bool,
    /// Strictly decreasing relaxation parameters; nonempty only for sweeps.
    pub eps_list: Vec<f64>,
    pub out_dir: String,
    pub mms: Option<MmsSpec>,
}

const SECTIONS: [&str; 8] = [
    "model", "grid", "time", "params", "ic", "sweep", "output", "mms",
];

struct RawEntry {
    value: String,
    line: usize,
}

/// Key-value store built in a first pass; typed getters remove entries so
/// anything left at the end is an unknown key.
struct RawConfig {
    entries: BTreeMap<(String, String), RawEntry>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    SimError::Config(format!("line {line_no}: unterminated section header"))
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(SimError::Config(format!(
                        "line {line_no}: unknown section [{name}]"
                    )));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let sec = section.clone().ok_or_else(|| {
                SimError::Config(format!("line {line_no}: entry before any [section] header"))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(SimError::Config(format!("line {line_no}: empty key")));
            }
            let prev = entries.insert(
                (sec.clone(), key.clone()),
                RawEntry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
            if let Some(p) = prev {
                return Err(SimError::Config(format!(
                    "line {line_no}: [{sec}] {key} already set on line {}",
                    p.line
                )));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<RawEntry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn take_str(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.take(section, key).map(|e| (e.value, e.line))
    }

    fn take_f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.take(section, key) {
            None => Ok(default),
            Some(e) => parse_f64(&e.value)
                .ok_or_else(|| bad_value(e.line, section, key, &e.value, "a number")),
        }
    }

    fn take_f64_required(&mut self, section: &str, key: &str) -> Result<f64> {
        match self.take(section, key) {
            None => Err(SimError::Config(format!("missing required key [{section}] {key}"))),
            Some(e) => parse_f64(&e.value)
                .ok_or_else(|| bad_value(e.line, section, key, &e.value, "a number")),
        }
    }

    fn take_usize(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.take(section, key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<usize>()
                .map_err(|_| bad_value(e.line, section, key, &e.value, "a nonnegative integer")),
        }
    }

    fn take_bool(&mut self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.take(section, key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(bad_value(e.line, section, key, &e.value, "true or false")),
            },
        }
    }

    /// Scalar-or-list key: `n = 256` and `n = [64, 32]` both parse.
    fn take_f64_list(&mut self, section: &str, key: &str) -> Result<Option<(Vec<f64>, usize)>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => {
                let vals = parse_list(&e.value)
                    .ok_or_else(|| bad_value(e.line, section, key, &e.value, "a number or [list]"))?;
                Ok(Some((vals, e.line)))
            }
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(((sec, key), e)) = self.entries.into_iter().next() {
            return Err(SimError::Config(format!(
                "line {}: unknown key [{sec}] {key}",
                e.line
            )));
        }
        Ok(())
    }
}

fn bad_value(line: usize, section: &str, key: &str, value: &str, wanted: &str) -> SimError {
    SimError::Config(format!(
        "line {line}: [{section}] {key}: expected {wanted}, got `{value}`"
    ))
}

fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner.strip_suffix(']')?;
        inner
            .split(',')
            .map(|part| parse_f64(part.trim()))
            .collect()
    } else {
        parse_f64(s).map(|v| vec![v])
    }
}

fn ctx(section: &str, line: usize, err: SimError) -> SimError {
    match err {
        SimError::Config(msg) => {
            SimError::Config(format!("line {line}: [{section}]: {msg}"))
        }
        other => other,
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw = RawConfig::parse(text)?;

    // [model]
    let kind = match raw.take_str("model", "kind") {
        None => "competition".to_string(),
        Some((v, line)) => match v.as_str() {
            "competition" | "predprey" => v,
            _ => {
                return Err(bad_value(line, "model", "kind", &v, "competition or predprey"));
            }
        },
    };
    let explicit_variant = match raw.take_str("model", "variant") {
        None => None,
        Some((v, line)) => Some(match v.as_str() {
            "indirect" => RunVariant::Indirect,
            "limit" => RunVariant::Limit,
            "sweep" => RunVariant::Sweep,
            _ => {
                return Err(bad_value(line, "model", "variant", &v, "indirect, limit or sweep"));
            }
        }),
    };

    // [grid]
    let dim = raw.take_usize("grid", "dim", 1)?;
    if dim != 1 && dim != 2 {
        return Err(SimError::Config(format!("[grid] dim must be 1 or 2, got {dim}")));
    }
    let n_entry = raw.take_f64_list("grid", "n")?;
    let (n_vals, n_line) =
        n_entry.ok_or_else(|| SimError::Config("missing required key [grid] n".into()))?;
    let len_vals = match raw.take_f64_list("grid", "length")? {
        None => vec![1.0; dim],
        Some((v, _)) => v,
    };
    if n_vals.len() != dim || len_vals.len() != dim {
        return Err(SimError::Config(format!(
            "line {n_line}: [grid]: n/length must have {dim} entries"
        )));
    }
    let to_cells = |v: f64| -> Result<usize> {
        if v.fract() == 0.0 && v >= 1.0 && v < 1e9 {
            Ok(v as usize)
        } else {
            Err(SimError::Config(format!("[grid] n entries must be positive integers, got {v}")))
        }
    };
    let grid = if dim == 1 {
        GridSpec::line(to_cells(n_vals[0])?, len_vals[0])
    } else {
        GridSpec::rect([to_cells(n_vals[0])?, to_cells(n_vals[1])?], [len_vals[0], len_vals[1]])
    }
    .map_err(|e| ctx("grid", n_line, e))?;

    // [time]
    let t_end = raw.take_f64_required("time", "t_end")?;
    let dt_max = raw.take_f64("time", "dt_max", 1e-2)?;
    let cfl = raw.take_f64("time", "cfl", 0.5)?;
    let stride = raw.take_usize("time", "snapshot_stride", 10)?;
    let fixed_dt = match raw.take("time", "fixed_dt") {
        None => None,
        Some(e) => Some(
            parse_f64(&e.value)
                .ok_or_else(|| bad_value(e.line, "time", "fixed_dt", &e.value, "a number"))?,
        ),
    };
    let mut time = TimeSpec::new(t_end, dt_max, cfl, stride)?;
    if let Some(dt) = fixed_dt {
        if !(dt > 0.0) {
            return Err(SimError::Config(format!("[time] fixed_dt must be > 0, got {dt}")));
        }
        time = time.with_fixed_dt(dt);
    }

    // [params]
    let d_primary = raw.take_f64("params", "d_primary", 1.0)?;
    let d_v = raw.take_f64("params", "d_v", 1.0)?;
    let chi = raw.take_f64("params", "chi", 1.0)?;
    let eps = raw.take_f64("params", "eps", 0.01)?;
    let mu1 = raw.take_f64("params", "mu1", 1.0)?;
    let mu2 = raw.take_f64("params", "mu2", 1.0)?;
    let params = if kind == "competition" {
        let a1 = raw.take_f64("params", "a1", 0.5)?;
        let a2 = raw.take_f64("params", "a2", 0.5)?;
        ModelParams::Competition(CompetitionParams::new(
            d_primary, d_v, chi, mu1, mu2, a1, a2, eps,
        )?)
    } else {
        let mu1_prime = raw.take_f64("params", "mu1_prime", 0.5)?;
        let b = raw.take_f64("params", "b", 1.0)?;
        let resp_kind = match raw.take_str("params", "response") {
            None => ResponseKind::Holling2,
            Some((v, line)) => match v.as_str() {
                "holling1" => ResponseKind::Holling1,
                "holling2" => ResponseKind::Holling2,
                "holling3" => ResponseKind::Holling3,
                _ => {
                    return Err(bad_value(
                        line,
                        "params",
                        "response",
                        &v,
                        "holling1, holling2 or holling3",
                    ));
                }
            },
        };
        let c = raw.take_f64("params", "response_c", 1.0)?;
        let m = raw.take_f64("params", "response_m", 1.0)?;
        let response = FunctionalResponse::new(resp_kind, c, m)?;
        ModelParams::PredPrey(PredPreyParams::new(
            d_primary, d_v, chi, mu1, mu1_prime, mu2, b, response, eps,
        )?)
    };

    // [ic]
    let family = match raw.take_str("ic", "family") {
        None => "cosine_perturbed_equilibrium".to_string(),
        Some((v, _)) => v,
    };
    let ic = match family.as_str() {
        "constant" => IcFamily::Constant {
            value: raw.take_f64("ic", "value", 0.5)?,
        },
        "gaussian_bump" => {
            let center = match raw.take_f64_list("ic", "center")? {
                None => [0.5 * grid.length(0), if dim == 2 { 0.5 * grid.length(1) } else { 0.0 }],
                Some((v, line)) => {
                    if v.len() != dim {
                        return Err(SimError::Config(format!(
                            "line {line}: [ic] center must have {dim} entries"
                        )));
                    }
                    [v[0], if dim == 2 { v[1] } else { 0.0 }]
                }
            };
            IcFamily::GaussianBump {
                center,
                width: raw.take_f64("ic", "width", 0.1)?,
                amplitude: raw.take_f64("ic", "amplitude", 1.0)?,
                floor: raw.take_f64("ic", "floor", 0.0)?,
            }
        }
        "cosine_perturbed_equilibrium" => IcFamily::CosinePerturbedEquilibrium {
            amplitude: raw.take_f64("ic", "amplitude", 0.1)?,
            mode: raw.take_usize("ic", "mode", 1)? as u32,
        },
        other => {
            return Err(SimError::Config(format!(
                "[ic] family: expected constant, gaussian_bump or \
                 cosine_perturbed_equilibrium, got `{other}`"
            )));
        }
    };
    let compatibility = raw.take_bool("ic", "compatibility", true)?;

    // [sweep]
    let eps_list = match raw.take_f64_list("sweep", "eps")? {
        None => Vec::new(),
        Some((v, line)) => {
            for pair in v.windows(2) {
                if pair[1] >= pair[0] {
                    return Err(SimError::Config(format!(
                        "line {line}: [sweep] eps must be strictly decreasing"
                    )));
                }
            }
            if v.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return Err(SimError::Config(format!(
                    "line {line}: [sweep] eps entries must lie in (0, 1]"
                )));
            }
            v
        }
    };
    let variant = match (explicit_variant, eps_list.is_empty()) {
        (Some(RunVariant::Sweep), true) => {
            return Err(SimError::Config(
                "variant = sweep requires a [sweep] section with an eps list".into(),
            ));
        }
        (Some(v @ (RunVariant::Indirect | RunVariant::Limit)), false) => {
            return Err(SimError::Config(format!(
                "a [sweep] eps list conflicts with variant = {}",
                v.as_str()
            )));
        }
        (Some(v), _) => v,
        (None, false) => RunVariant::Sweep,
        (None, true) => RunVariant::Indirect,
    };

    // [output]
    let out_dir = match raw.take_str("output", "dir") {
        None => "out".to_string(),
        Some((v, _)) => v,
    };

    // [mms]
    let mms = if raw.take_bool("mms", "enabled", false)? {
        Some(MmsSpec {
            levels: {
                let levels = raw.take_usize("mms", "levels", 4)?;
                if levels == 0 {
                    return Err(SimError::Config("[mms] levels must be positive".into()));
                }
                levels
            },
        })
    } else {
        if let Some(e) = raw.take("mms", "levels") {
            return Err(SimError::Config(format!(
                "line {}: [mms] levels given without enabled = true",
                e.line
            )));
        }
        None
    };

    raw.finish()?;
    Ok(RunConfig {
        variant,
        grid,
        time,
        params,
        ic,
        compatibility,
        eps_list,
        out_dir,
        mms,
    })
}

fn fmt_f64(v: f64) -> String {
    // {:?} prints the shortest digit string that parses back exactly
    format!("{v:?}")
}

fn fmt_list(vs: &[f64]) -> String {
    let parts: Vec<String> = vs.iter().map(|&v| fmt_f64(v)).collect();
    format!("[{}]", parts.join(", "))
}

/// Canonical text form; `parse_config(serialize_config(c)) == c`.
pub fn serialize_config(c: &RunConfig) -> String {
    let mut out = String::new();
    let push = |out: &mut String, s: &str| {
        out.push_str(s);
        out.push('\n');
    };

    push(&mut out, "[model]");
    let kind = match &c.params {
        ModelParams::Competition(_) => "competition",
        ModelParams::PredPrey(_) => "predprey",
    };
    push(&mut out, &format!("kind = {kind}"));
    push(&mut out, &format!("variant = {}", c.variant.as_str()));

    push(&mut out, "\n[grid]");
    let dim = c.grid.dim();
    push(&mut out, &format!("dim = {dim}"));
    if dim == 1 {
        push(&mut out, &format!("n = {}", c.grid.n(0)));
        push(&mut out, &format!("length = {}", fmt_f64(c.grid.length(0))));
    } else {
        push(&mut out, &format!("n = [{}, {}]", c.grid.n(0), c.grid.n(1)));
        push(
            &mut out,
            &format!("length = {}", fmt_list(&[c.grid.length(0), c.grid.length(1)])),
        );
    }

    push(&mut out, "\n[time]");
    push(&mut out, &format!("t_end = {}", fmt_f64(c.time.t_end)));
    push(&mut out, &format!("dt_max = {}", fmt_f64(c.time.dt_max)));
    push(&mut out, &format!("cfl = {}", fmt_f64(c.time.cfl_adv)));
    push(&mut out, &format!("snapshot_stride = {}", c.time.snapshot_stride));
    if let Some(dt) = c.time.fixed_dt {
        push(&mut out, &format!("fixed_dt = {}", fmt_f64(dt)));
    }

    push(&mut out, "\n[params]");
    match &c.params {
        ModelParams::Competition(p) => {
            push(&mut out, &format!("d_primary = {}", fmt_f64(p.d_u)));
            push(&mut out, &format!("d_v = {}", fmt_f64(p.d_v)));
            push(&mut out, &format!("chi = {}", fmt_f64(p.chi)));
            push(&mut out, &format!("eps = {}", fmt_f64(p.eps)));
            push(&mut out, &format!("mu1 = {}", fmt_f64(p.mu1)));
            push(&mut out, &format!("mu2 = {}", fmt_f64(p.mu2)));
            push(&mut out, &format!("a1 = {}", fmt_f64(p.a1)));
            push(&mut out, &format!("a2 = {}", fmt_f64(p.a2)));
        }
        ModelParams::PredPrey(p) => {
            push(&mut out, &format!("d_primary = {}", fmt_f64(p.d_z)));
            push(&mut out, &format!("d_v = {}", fmt_f64(p.d_v)));
            push(&mut out, &format!("chi = {}", fmt_f64(p.chi)));
            push(&mut out, &format!("eps = {}", fmt_f64(p.eps)));
            push(&mut out, &format!("mu1 = {}", fmt_f64(p.mu1)));
            push(&mut out, &format!("mu1_prime = {}", fmt_f64(p.mu1_prime)));
            push(&mut out, &format!("mu2 = {}", fmt_f64(p.mu2)));
            push(&mut out, &format!("b = {}", fmt_f64(p.b)));
            let r = match p.response.kind {
                ResponseKind::Holling1 => "holling1",
                ResponseKind::Holling2 => "holling2",
                ResponseKind::Holling3 => "holling3",
            };
            push(&mut out, &format!("response = {r}"));
            push(&mut out, &format!("response_c = {}", fmt_f64(p.response.c)));
            push(&mut out, &format!("response_m = {}", fmt_f64(p.response.m)));
        }
    }

    push(&mut out, "\n[ic]");
    match &c.ic {
        IcFamily::Constant { value } => {
            push(&mut out, "family = constant");
            push(&mut out, &format!("value = {}", fmt_f64(*value)));
        }
        IcFamily::GaussianBump {
            center,
            width,
            amplitude,
            floor,
        } => {
            push(&mut out, "family = gaussian_bump");
            if dim == 1 {
                push(&mut out, &format!("center = {}", fmt_f64(center[0])));
            } else {
                push(&mut out, &format!("center = {}", fmt_list(center)));
            }
            push(&mut out, &format!("width = {}", fmt_f64(*width)));
            push(&mut out, &format!("amplitude = {}", fmt_f64(*amplitude)));
            push(&mut out, &format!("floor = {}", fmt_f64(*floor)));
        }
        IcFamily::CosinePerturbedEquilibrium { amplitude, mode } => {
            push(&mut out, "family = cosine_perturbed_equilibrium");
            push(&mut out, &format!("amplitude = {}", fmt_f64(*amplitude)));
            push(&mut out, &format!("mode = {mode}"));
        }
    }
    push(&mut out, &format!("compatibility = {}", c.compatibility));

    if !c.eps_list.is_empty() {
        push(&mut out, "\n[sweep]");
        push(&mut out, &format!("eps = {}", fmt_list(&c.eps_list)));
    }

    push(&mut out, "\n[output]");
    push(&mut out, &format!("dir = {}", c.out_dir));

    if let Some(mms) = &c.mms {
        push(&mut out, "\n[mms]");
        push(&mut out, "enabled = true");
        push(&mut out, &format!("levels = {}", mms.levels));
    }
    out
}

/// FNV-1a 64-bit hash of the canonical serialization, as fixed-width hex.
/// Identifies a configuration in artifact headers; not cryptographic.
pub fn config_digest(c: &RunConfig) -> String {
    let text = serialize_config(c);
    let mut h: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
