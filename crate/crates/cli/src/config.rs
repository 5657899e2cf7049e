//! Declarative run configuration: a single TOML file defines the algebra,
//! the test functions place by place, the data to expand, truncation
//! values, tolerances, and volume overrides. No environment variables
//! affect numerics.

use std::collections::BTreeMap;
use std::str::FromStr;

use anyhow::{bail, Context};
use num::BigInt;
use serde::Deserialize;

use rtf_core::expansion::{ExpansionOptions, VolumeTable};
use rtf_core::integrals::{ArchFn, Ball, FinitePlaceFn, GlobalTestFn, Profile};
use rtf_core::{QuadAlg, Rat, XPoint};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Discriminant (or squarefree core) of the quadratic field E.
    pub e_disc: i64,
    #[serde(default)]
    pub datum: Vec<DatumConfig>,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub volumes: VolumeConfig,
    #[serde(default)]
    pub testfn: Vec<TestFnConfig>,
    #[serde(default)]
    pub zeta: ZetaConfig,
    #[serde(default)]
    pub orbital: OrbitalConfig,
    #[serde(default)]
    pub tori: ToriConfig,
}

fn default_seed() -> u64 {
    7
}

fn default_t_values() -> Vec<f64> {
    vec![3.0, 4.0, 5.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    /// Invariant-theory coordinate, as a rational string like "3" or "1/2".
    pub t0: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub tol: f64,
    pub depth: u32,
    pub tail: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { tol: 1e-7, depth: 6, tail: 1e-12 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeConfig {
    pub sl2: Option<f64>,
    pub gm1: Option<f64>,
    pub mb1: Option<f64>,
    #[serde(default)]
    pub torus: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFnConfig {
    pub name: String,
    pub arch: ArchConfig,
    #[serde(default)]
    pub finite: Vec<FiniteConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    /// "gauss" or "bump".
    pub profile: String,
    /// Coordinates (t, y, b, c) of the center, as rational strings.
    pub center: [String; 4],
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteConfig {
    pub p: u64,
    /// "basic" or "level".
    pub kind: String,
    pub level: Option<u32>,
    #[serde(default)]
    pub balls: Vec<BallConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: [String; 4],
    pub value: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaConfig {
    #[serde(default)]
    pub s_values: Vec<f64>,
    /// Fundamental discriminants; 1 is the trivial character.
    #[serde(default)]
    pub kappa_discs: Vec<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitalConfig {
    #[serde(default)]
    pub places: Vec<u64>,
    pub depth: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToriConfig {
    #[serde(default)]
    pub models: Vec<ToriModelConfig>,
    pub count_random: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToriModelConfig {
    pub modulus: u64,
    pub d: i64,
    #[serde(default)]
    pub gamma: Vec<[u64; 2]>,
}

pub fn parse_rat(s: &str) -> anyhow::Result<Rat> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).context("numerator")?;
            let d = BigInt::from_str(d.trim()).context("denominator")?;
            if d == BigInt::from(0) {
                bail!("zero denominator in '{s}'");
            }
            Ok(Rat::new(n, d))
        }
        None => Ok(Rat::from_integer(BigInt::from_str(s.trim()).context("integer")?)),
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).context("parsing config")?;
        Ok(cfg)
    }

    pub fn algebra(&self) -> anyhow::Result<QuadAlg> {
        // accept either a fundamental discriminant or a squarefree core
        QuadAlg::from_discriminant(self.e_disc)
            .or_else(|_| QuadAlg::new(self.e_disc))
            .map_err(|e| anyhow::anyhow!("e_disc: {e}"))
    }

    pub fn options(&self) -> ExpansionOptions {
        ExpansionOptions {
            tol: self.tolerances.tol,
            depth: self.tolerances.depth,
            tail: self.tolerances.tail,
        }
    }

    pub fn volume_table(&self) -> anyhow::Result<VolumeTable> {
        let mut table = VolumeTable::default();
        if let Some(v) = self.volumes.sl2 {
            table.sl2 = v;
        }
        if let Some(v) = self.volumes.gm1 {
            table.gm1 = v;
        }
        if let Some(v) = self.volumes.mb1 {
            table.mb1 = v;
        }
        for (core, v) in &self.volumes.torus {
            let core: i64 = core.parse().context("torus volume key")?;
            table.torus.insert(core, *v);
        }
        Ok(table)
    }

    pub fn data(&self) -> anyhow::Result<Vec<rtf_core::GeomDatum>> {
        let e = self.algebra()?;
        self.datum
            .iter()
            .map(|d| Ok(rtf_core::symspace::classify(&parse_rat(&d.t0)?, e)))
            .collect()
    }

    pub fn test_functions(&self) -> anyhow::Result<Vec<(String, GlobalTestFn)>> {
        let e = self.algebra()?;
        let tau = e.core();
        let mut out = Vec::new();
        for tf in &self.testfn {
            let profile = match tf.arch.profile.as_str() {
                "gauss" => Profile::Gauss,
                "bump" => Profile::Bump,
                other => bail!("unknown archimedean profile '{other}'"),
            };
            let center = parse_center_f64(&tf.arch.center, tau)?;
            let arch = ArchFn {
                profile,
                center,
                radius: tf.arch.radius,
                amplitude: tf.arch.amplitude,
            };
            let mut finite = BTreeMap::new();
            for fc in &tf.finite {
                let local = match fc.kind.as_str() {
                    "basic" => FinitePlaceFn::Basic,
                    "level" => {
                        let level = fc.level.context("level data needs 'level'")?;
                        let mut balls = Vec::new();
                        for b in &fc.balls {
                            balls.push(Ball {
                                center: parse_center_rat(&b.center, tau)?,
                                value: parse_rat(&b.value)?,
                            });
                        }
                        FinitePlaceFn::Level { level, balls }
                    }
                    other => bail!("unknown finite-place kind '{other}'"),
                };
                finite.insert(fc.p, local);
            }
            let f = GlobalTestFn::new(e, finite, arch)
                .map_err(|err| anyhow::anyhow!("test function '{}': {err}", tf.name))?;
            out.push((tf.name.clone(), f));
        }
        Ok(out)
    }
}

fn parse_center_rat(coords: &[String; 4], tau: i64) -> anyhow::Result<XPoint<Rat>> {
    let t = parse_rat(&coords[0])?;
    let y = parse_rat(&coords[1])?;
    let b = parse_rat(&coords[2])?;
    let c = parse_rat(&coords[3])?;
    XPoint::new(tau, t, y, b, c).map_err(|e| anyhow::anyhow!("ball center: {e}"))
}

fn parse_center_f64(coords: &[String; 4], tau: i64) -> anyhow::Result<XPoint<f64>> {
    let t = rtf_core::arith::rat_to_f64(&parse_rat(&coords[0])?);
    let y = rtf_core::arith::rat_to_f64(&parse_rat(&coords[1])?);
    let b = rtf_core::arith::rat_to_f64(&parse_rat(&coords[2])?);
    let c = rtf_core::arith::rat_to_f64(&parse_rat(&coords[3])?);
    Ok(XPoint { tau, t, y, b, c })
}

/// The built-in default configuration used when `--config` is omitted.
pub fn default_config_text() -> &'static str {
    r#"
seed = 7
e_disc = -4
t_values = [3.0, 4.0, 5.0]

[[datum]]
t0 = "3"

[[datum]]
t0 = "0"

[[datum]]
t0 = "1"

[[testfn]]
name = "unit-gauss"
  [testfn.arch]
  profile = "gauss"
  center = ["1", "0", "0", "0"]
  radius = 1.2
  amplitude = 1.0

[zeta]
s_values = [1.0, 2.0]
kappa_discs = [1, -4]

[orbital]
places = [2, 5]
depth = 6

[tori]
count_random = 5
"#
    .trim_start_matches('\n')
}
