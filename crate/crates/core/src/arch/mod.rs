//! Architecture families, their named variants and the graphs they build.

pub mod nasnet;
pub mod shufflenet;

use std::fmt;
use std::str::FromStr;

pub use nasnet::NasConfig;
pub use shufflenet::ShuffleConfig;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Side length of the square network input.
pub const INPUT_SIZE: usize = 224;

/// Filters removed from the final convolution by each ShuffleNet variant, `v01` first.
pub const SHUFFLE_PRUNE_STEPS: [usize; 9] = [128, 256, 384, 512, 640, 768, 896, 960, 992];

/// `(A_N, A_3, penultimate)` of each NasNet variant, `v01` first.
pub const NAS_VARIANTS: [(usize, usize, usize); 8] = [
    (4, 4, 1056),
    (4, 0, 1056),
    (2, 2, 1056),
    (2, 0, 1056),
    (4, 4, 480),
    (4, 0, 480),
    (2, 2, 480),
    (2, 0, 480),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    ShuffleNet(ShuffleConfig),
    NasNet(NasConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    ShuffleNet,
    NasNet,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shufflenet" | "shufflenetv2" => Ok(Family::ShuffleNet),
            "nasnet" => Ok(Family::NasNet),
            _ => Err(Error::Config(format!(
                "unknown family `{s}` (expected shufflenet or nasnet)"
            ))),
        }
    }
}

impl Architecture {
    pub fn shufflenet_onfire() -> Self {
        Architecture::ShuffleNet(ShuffleConfig::onfire())
    }

    pub fn nasnet_onfire() -> Self {
        Architecture::NasNet(NasConfig::onfire())
    }

    pub fn family(&self) -> Family {
        match self {
            Architecture::ShuffleNet(_) => Family::ShuffleNet,
            Architecture::NasNet(_) => Family::NasNet,
        }
    }

    /// Parses a name such as `shufflenetv2-onfire`, `shufflenet-v03`,
    /// `shufflenetv2-f256`, `nasnet-a-onfire`, `nasnet-v05`, `nasnet-a-mobile`
    /// or `nasnet-n4-g0-p480`.
    pub fn parse(name: &str) -> Result<Self> {
        let s = name.trim().to_ascii_lowercase();
        let unknown = || Error::UnknownArchitecture(name.to_string());
        let variant = |rest: &str, max: usize| -> Option<usize> {
            let i: usize = rest.strip_prefix('v')?.parse().ok()?;
            (rest.len() == 3 && (1..=max).contains(&i)).then(|| i - 1)
        };
        match s.as_str() {
            "shufflenetv2-onfire" => return Ok(Self::shufflenet_onfire()),
            "shufflenetv2" | "shufflenetv2-full" => return Ok(Architecture::ShuffleNet(ShuffleConfig::full())),
            "nasnet-a-onfire" => return Ok(Self::nasnet_onfire()),
            "nasnet-a-mobile" => return Ok(Architecture::NasNet(NasConfig::mobile())),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("shufflenet-") {
            let i = variant(rest, SHUFFLE_PRUNE_STEPS.len()).ok_or_else(unknown)?;
            return Ok(Architecture::ShuffleNet(ShuffleConfig::pruned(SHUFFLE_PRUNE_STEPS[i])?));
        }
        if let Some(rest) = s.strip_prefix("shufflenetv2-f") {
            let f: usize = rest.parse().map_err(|_| unknown())?;
            return Ok(Architecture::ShuffleNet(ShuffleConfig::new(f)?));
        }
        if let Some(rest) = s.strip_prefix("nasnet-") {
            if let Some(i) = variant(rest, NAS_VARIANTS.len()) {
                let (a_n, a_3, p) = NAS_VARIANTS[i];
                return Ok(Architecture::NasNet(NasConfig::new(a_n, a_3, p)?));
            }
            let parts: Vec<&str> = rest.split('-').collect();
            if let [n, g, p] = parts.as_slice() {
                let num = |part: &str, prefix: char| part.strip_prefix(prefix)?.parse::<usize>().ok();
                if let (Some(a_n), Some(a_3), Some(p)) = (num(n, 'n'), num(g, 'g'), num(p, 'p')) {
                    return Ok(Architecture::NasNet(NasConfig::new(a_n, a_3, p)?));
                }
            }
        }
        Err(unknown())
    }

    pub fn build_graph(&self) -> Result<Graph> {
        self.build_graph_at(INPUT_SIZE)
    }

    /// Builds at a non-standard square input size; used to keep tests fast.
    pub fn build_graph_at(&self, input_size: usize) -> Result<Graph> {
        let name = self.to_string();
        match self {
            Architecture::ShuffleNet(c) => shufflenet::build(c, &name, input_size),
            Architecture::NasNet(c) => nasnet::build(c, &name, input_size),
        }
    }

    /// Width of the pooled feature vector seen by the head.
    pub fn feature_width(&self) -> usize {
        match self {
            Architecture::ShuffleNet(c) => c.final_filters,
            Architecture::NasNet(c) => c.feature_width(),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::parse(s)
    }
}

impl fmt::Display for Architecture {
    /// Canonical name; [`Architecture::parse`] maps it back to the same configuration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::ShuffleNet(c) if *c == ShuffleConfig::onfire() => f.write_str("shufflenetv2-onfire"),
            Architecture::ShuffleNet(c) => write!(f, "shufflenetv2-f{}", c.final_filters),
            Architecture::NasNet(c) if *c == NasConfig::onfire() => f.write_str("nasnet-a-onfire"),
            Architecture::NasNet(c) if *c == NasConfig::mobile() => f.write_str("nasnet-a-mobile"),
            Architecture::NasNet(c) => write!(f, "nasnet-n{}-g{}-p{}", c.a_n, c.a_3, c.penultimate),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantRow {
    pub name: String,
    pub arch: Architecture,
    pub total_params: usize,
    /// ShuffleNet: pruned filters. NasNet: unused.
    pub pruned_filters: Option<usize>,
    /// ShuffleNet: parameters of the final convolution.
    pub final_conv_params: Option<usize>,
    /// Remarks about the row, e.g. where the derived value departs from published figures.
    pub note: Option<String>,
}

/// Values that the published pruning table lists but which the per-filter
/// arithmetic does not reproduce: `(variant, column, published)`.
const PUBLISHED_ANOMALIES: [(usize, &str, usize); 3] = [
    (1, "total", 342_897),
    (1, "final conv", 196_608),
    (3, "final conv", 122_800),
];

/// Every variant of a family with audited parameter counts.
pub fn variant_table(family: Family) -> Result<Vec<VariantRow>> {
    match family {
        Family::ShuffleNet => SHUFFLE_PRUNE_STEPS
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let cfg = ShuffleConfig::pruned(k)?;
                let arch = Architecture::ShuffleNet(cfg);
                let g = arch.build_graph()?;
                let final_conv = g
                    .params()
                    .iter()
                    .find(|p| p.name == shufflenet::FINAL_CONV_WEIGHT)
                    .map(|p| p.numel())
                    .unwrap_or(0);
                let flagged: Vec<String> = PUBLISHED_ANOMALIES
                    .iter()
                    .filter(|(v, _, _)| *v == i + 1)
                    .map(|(_, col, val)| format!("{col} published as {}", group_digits(*val)))
                    .collect();
                Ok(VariantRow {
                    name: format!("shufflenet-v{:02}", i + 1),
                    arch,
                    total_params: g.param_count(),
                    pruned_filters: Some(k),
                    final_conv_params: Some(final_conv),
                    note: (!flagged.is_empty()).then(|| format!("derived; {}", flagged.join(", "))),
                })
            })
            .collect(),
        Family::NasNet => NAS_VARIANTS
            .iter()
            .enumerate()
            .map(|(i, &(a_n, a_3, p))| {
                let arch = Architecture::NasNet(NasConfig::new(a_n, a_3, p)?);
                let g = arch.build_graph()?;
                Ok(VariantRow {
                    name: format!("nasnet-v{:02}", i + 1),
                    arch,
                    total_params: g.param_count(),
                    pruned_filters: None,
                    final_conv_params: None,
                    note: (arch == Architecture::nasnet_onfire()).then(|| "nasnet-a-onfire".to_string()),
                })
            })
            .collect(),
    }
}

/// Plain-text rendering of [`variant_table`].
pub fn format_variant_table(family: Family, rows: &[VariantRow]) -> String {
    let mut out = String::new();
    match family {
        Family::ShuffleNet => {
            out.push_str(&format!(
                "{:<16} {:>14} {:>17} {:>13}  {}\n",
                "variant", "pruned filters", "final conv params", "total params", "note"
            ));
            for r in rows {
                out.push_str(&format!(
                    "{:<16} {:>14} {:>17} {:>13}  {}\n",
                    r.name,
                    r.pruned_filters.unwrap_or(0),
                    group_digits(r.final_conv_params.unwrap_or(0)),
                    group_digits(r.total_params),
                    r.note.as_deref().unwrap_or("")
                ));
            }
        }
        Family::NasNet => {
            out.push_str(&format!(
                "{:<12} {:>4} {:>4} {:>12} {:>14} {:>13}  {}\n",
                "variant", "A_N", "A_3", "penultimate", "feature width", "total params", "note"
            ));
            for r in rows {
                let Architecture::NasNet(c) = r.arch else { continue };
                out.push_str(&format!(
                    "{:<12} {:>4} {:>4} {:>12} {:>14} {:>13}  {}\n",
                    r.name,
                    c.a_n,
                    c.a_3,
                    c.penultimate,
                    c.feature_width(),
                    group_digits(r.total_params),
                    r.note.as_deref().unwrap_or("")
                ));
            }
        }
    }
    out
}

/// `1234567` → `1,234,567`.
pub fn group_digits(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
