//! Scenario files: TOML with one table per concern.
//!
//! ```toml
//! [model]
//! preset = "damped-oscillator"
//! omega = 1.0
//! gamma = 0.5
//!
//! [channel]
//! g_re = [[1.0]]
//!
//! [init]
//! mean = [1.0, -0.5]
//! cov = [[1.0, 0.0], [0.0, 0.8]]
//!
//! [run]
//! engine = "kalman"
//! t_final = 2.0
//! dt = 1e-3
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phasefilter::linear::{GaussianBump, HermitianGaussianMixture, LinearCouplingModel, Selector};
use phasefilter::measurement::MeasurementChannel;
use phasefilter::phase::{CcrStructure, FieldStructure, GaussianBelief};
use phasefilter::side::{FdOrder, SideConfig, SideScheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Kalman,
    ModifiedKalman,
    SideGrid,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Positivity {
    #[default]
    Halt,
    Project,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Rk4Milstein,
    EulerMaruyama,
}

/// `"position-momentum"` or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Preset(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiTerm {
    /// `[re, im]`.
    pub amp: [f64; 2],
    pub center: Vec<f64>,
    pub width: f64,
    /// Also add the conjugate partner at `-center`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub paired: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    /// Energy matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<Vec<f64>>>,
    /// Coordinates the potential acts on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub psi: Vec<PsiTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub g_re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub completion_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

fn default_half_width() -> f64 {
    8.0
}
fn default_points() -> usize {
    128
}
fn default_fd_order() -> usize {
    8
}
fn default_every() -> usize {
    1
}
fn default_floor() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_fd_order")]
    pub fd_order: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub renormalize: bool,
    /// Times at which the QPDF is dumped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            points: default_points(),
            fd_order: default_fd_order(),
            scheme: Scheme::default(),
            renormalize: false,
            snapshots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub engine: Engine,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Write every this many steps.
    #[serde(default = "default_every")]
    pub output_every: usize,
    #[serde(default)]
    pub positivity: Positivity,
    #[serde(default = "default_floor")]
    pub project_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub channel: ChannelSection,
    pub init: InitSection,
    pub run: RunSection,
    /// Written into manifests for reference; ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<toml::Table>,
}

/// Finds the line of `key` inside `[section]` (or the `index`-th
/// `[[section]]`), falling back to the section header.
pub fn locate(text: &str, section: &str, index: Option<usize>, key: Option<&str>) -> Option<usize> {
    let mut in_section = false;
    let mut seen = 0usize;
    let mut header_line = None;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line
                .trim_start_matches('[')
                .split(']')
                .next()
                .unwrap_or("")
                .trim();
            let is_array = line.starts_with("[[");
            in_section = false;
            if name == section {
                match index {
                    Some(i) if is_array => {
                        in_section = seen == i;
                        seen += 1;
                    }
                    None if !is_array => in_section = true,
                    _ => {}
                }
                if in_section {
                    header_line = Some(no + 1);
                }
            }
            continue;
        }
        if in_section {
            if let Some(k) = key {
                let lhs = line.split('=').next().unwrap_or("").trim();
                if line.contains('=') && lhs == k {
                    return Some(no + 1);
                }
            }
        }
    }
    header_line
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: LinearCouplingModel,
    pub channel: MeasurementChannel,
    pub init: GaussianBelief,
    pub steps: usize,
}

struct Ctx<'a> {
    text: &'a str,
    path: String,
}

impl Ctx<'_> {
    fn err(
        &self,
        section: &str,
        index: Option<usize>,
        key: Option<&str>,
        message: impl Into<String>,
    ) -> CliError {
        let line = locate(self.text, section, index, key);
        let key = match (index, key) {
            (Some(i), Some(k)) => format!("{section}[{i}].{k}"),
            (None, Some(k)) => format!("{section}.{k}"),
            (Some(i), None) => format!("{section}[{i}]"),
            (None, None) => section.to_string(),
        };
        CliError::Config {
            path: self.path.clone(),
            line,
            key,
            message: message.into(),
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err("rows have different lengths".into());
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err("entries must be finite".into());
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ScenarioConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            CliError::Config {
                path: path.into(),
                line,
                key: String::new(),
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Ok((Self::parse(&text, &path.display().to_string())?, text))
    }

    /// Replaces presets and shorthands by explicit values so the result
    /// describes the model on its own.
    pub fn resolved(&self, scenario: &Scenario) -> ScenarioConfig {
        let model = &scenario.model;
        let mut psi: Vec<PsiTerm> = model
            .psi
            .terms()
            .iter()
            .map(|t| PsiTerm {
                amp: [t.amp.re, t.amp.im],
                center: t.center.clone(),
                width: t.width,
                paired: false,
            })
            .collect();
        psi.shrink_to_fit();
        let g = &scenario.channel.g;
        let mut run = self.run.clone();
        if matches!(run.engine, Engine::SideGrid | Engine::Compare) && run.grid.is_none() {
            run.grid = Some(GridSection::default());
        }
        ScenarioConfig {
            model: ModelSection {
                preset: None,
                omega: None,
                gamma: None,
                n: Some(model.n()),
                m: Some(model.field.m()),
                theta: Some(ThetaSpec::Matrix(to_rows(model.theta()))),
                r: Some(to_rows(&model.r_energy)),
                coupling: Some(to_rows(&model.n_coupling)),
                selector: Some(model.selector.indices().to_vec()),
                psi,
            },
            channel: ChannelSection {
                g_re: to_rows(&g.map(|z| z.re)),
                g_im: Some(to_rows(&g.map(|z| z.im))),
                completion_seed: self.channel.completion_seed,
            },
            init: InitSection {
                mean: scenario.init.mu.iter().copied().collect(),
                cov: to_rows(&scenario.init.sigma),
            },
            run,
            derived: None,
        }
    }

    /// Builds and validates the model, channel and initial belief.
    pub fn build(self, text: &str, path: &str) -> Result<Scenario, CliError> {
        let cx = Ctx {
            text,
            path: path.into(),
        };
        let md = &self.model;
        let (n, m, theta, r, coupling, selector) =
            match md.preset.as_deref() {
                Some("damped-oscillator") => {
                    let omega = md.omega.unwrap_or(1.0);
                    let gamma = md.gamma.unwrap_or(0.0);
                    if !(gamma >= 0.0) || !omega.is_finite() {
                        return Err(cx.err(
                            "model",
                            None,
                            Some("gamma"),
                            "gamma must be nonnegative and omega finite",
                        ));
                    }
                    let ccr = CcrStructure::position_momentum(2).expect("valid");
                    (
                        2,
                        2,
                        ccr.theta().clone(),
                        DMatrix::identity(2, 2) * omega,
                        DMatrix::identity(2, 2) * gamma.sqrt(),
                        md.selector.clone().unwrap_or(vec![0]),
                    )
                }
                Some(other) => {
                    return Err(cx.err(
                        "model",
                        None,
                        Some("preset"),
                        format!("unknown preset '{other}' (expected damped-oscillator)"),
                    ))
                }
                None => {
                    let n =
                        md.n.ok_or_else(|| cx.err("model", None, Some("n"), "missing n"))?;
                    let m =
                        md.m.ok_or_else(|| cx.err("model", None, Some("m"), "missing m"))?;
                    let theta = match &md.theta {
                        None => CcrStructure::position_momentum(n).map(|c| c.theta().clone()),
                        Some(ThetaSpec::Preset(p)) if p == "position-momentum" => {
                            CcrStructure::position_momentum(n).map(|c| c.theta().clone())
                        }
                        Some(ThetaSpec::Preset(p)) => {
                            return Err(cx.err(
                                "model",
                                None,
                                Some("theta"),
                                format!("unknown theta preset '{p}'"),
                            ))
                        }
                        Some(ThetaSpec::Matrix(rows)) => Ok(
                            matrix(rows).map_err(|e| cx.err("model", None, Some("theta"), e))?
                        ),
                    }
                    .map_err(|e| cx.err("model", None, Some("theta"), e.to_string()))?;
                    let r = md.r.as_ref().ok_or_else(|| {
                        cx.err("model", None, Some("r"), "missing energy matrix r")
                    })?;
                    let r = matrix(r).map_err(|e| cx.err("model", None, Some("r"), e))?;
                    let c = md.coupling.as_ref().ok_or_else(|| {
                        cx.err("model", None, Some("coupling"), "missing coupling")
                    })?;
                    let c = matrix(c).map_err(|e| cx.err("model", None, Some("coupling"), e))?;
                    (
                        n,
                        m,
                        theta,
                        r,
                        c,
                        md.selector.clone().unwrap_or_else(|| vec![0]),
                    )
                }
            };
        let ccr = CcrStructure::new(theta)
            .map_err(|e| cx.err("model", None, Some("theta"), e.to_string()))?;
        if ccr.n() != n {
            return Err(cx.err(
                "model",
                None,
                Some("theta"),
                format!("theta is {0}x{0} but n = {n}", ccr.n()),
            ));
        }
        let field =
            FieldStructure::new(m).map_err(|e| cx.err("model", None, Some("m"), e.to_string()))?;
        let selector = Selector::new(n, selector)
            .map_err(|e| cx.err("model", None, Some("selector"), e.to_string()))?;
        let mut bumps = Vec::new();
        for (i, t) in md.psi.iter().enumerate() {
            if t.center.len() != selector.d() {
                return Err(cx.err(
                    "model.psi",
                    Some(i),
                    Some("center"),
                    format!(
                        "center has {} entries but the selector picks {}",
                        t.center.len(),
                        selector.d()
                    ),
                ));
            }
            if !(t.width > 0.0) || !t.width.is_finite() {
                return Err(cx.err(
                    "model.psi",
                    Some(i),
                    Some("width"),
                    "width must be positive",
                ));
            }
            let amp = Complex64::new(t.amp[0], t.amp[1]);
            bumps.push(GaussianBump {
                amp,
                center: t.center.clone(),
                width: t.width,
            });
            if t.paired {
                bumps.push(GaussianBump {
                    amp: amp.conj(),
                    center: t.center.iter().map(|x| -x).collect(),
                    width: t.width,
                });
            }
        }
        let psi = if bumps.is_empty() {
            HermitianGaussianMixture::zero(selector.d())
        } else {
            HermitianGaussianMixture::new(selector.d(), bumps)
                .map_err(|e| cx.err("model.psi", Some(0), None, e.to_string()))?
        };
        let model = LinearCouplingModel::build(ccr, field.clone(), r, coupling, selector, psi)
            .map_err(|e| {
                let key = match &e {
                    phasefilter::Error::InvalidModel(s) if s.contains("coupling") => "coupling",
                    _ => "r",
                };
                cx.err("model", None, Some(key), e.to_string())
            })?;

        let ch = &self.channel;
        let g_re = matrix(&ch.g_re).map_err(|e| cx.err("channel", None, Some("g_re"), e))?;
        let g_im = match &ch.g_im {
            Some(rows) => matrix(rows).map_err(|e| cx.err("channel", None, Some("g_im"), e))?,
            None => DMatrix::zeros(g_re.nrows(), g_re.ncols()),
        };
        if g_im.shape() != g_re.shape() {
            return Err(cx.err(
                "channel",
                None,
                Some("g_im"),
                "g_im must have the shape of g_re",
            ));
        }
        let g = DMatrix::from_fn(g_re.nrows(), g_re.ncols(), |i, j| {
            Complex64::new(g_re[(i, j)], g_im[(i, j)])
        });
        let channel = MeasurementChannel::with_seed(&field, g, ch.completion_seed).map_err(|e| {
            let msg = match &e {
                phasefilter::Error::ChannelNotIsotropic { residual } => format!(
                    "channel violates the isotropy condition F J F^T = 0 (max residual {residual:e}); \
                     the measured outputs would not commute"
                ),
                phasefilter::Error::ChannelRankDeficient { min_eig } => {
                    format!("channel violates F F^T > 0 (smallest eigenvalue {min_eig:e})")
                }
                other => other.to_string(),
            };
            cx.err("channel", None, Some("g_re"), msg)
        })?;

        let mu = DVector::from_vec(self.init.mean.clone());
        if mu.len() != n {
            return Err(cx.err(
                "init",
                None,
                Some("mean"),
                format!("mean has {} entries, expected {n}", mu.len()),
            ));
        }
        let sigma = matrix(&self.init.cov).map_err(|e| cx.err("init", None, Some("cov"), e))?;
        if sigma.shape() != (n, n) {
            return Err(cx.err("init", None, Some("cov"), format!("cov must be {n}x{n}")));
        }
        let init = GaussianBelief::new(mu, sigma)
            .map_err(|e| cx.err("init", None, Some("cov"), e.to_string()))?;
        let heis = init.heisenberg_min_eig(&model.ccr);
        if heis < -phasefilter::phase::PSD_TOL {
            return Err(cx.err(
                "init",
                None,
                Some("cov"),
                format!("initial covariance is unphysical: min eig of cov + i Theta is {heis:e}"),
            ));
        }

        let run = &self.run;
        if !(run.dt > 0.0) || !run.dt.is_finite() {
            return Err(cx.err("run", None, Some("dt"), "dt must be positive"));
        }
        if !(run.t_final > 0.0) || !run.t_final.is_finite() {
            return Err(cx.err("run", None, Some("t_final"), "t_final must be positive"));
        }
        if run.output_every == 0 {
            return Err(cx.err(
                "run",
                None,
                Some("output_every"),
                "output_every must be at least 1",
            ));
        }
        if !(run.project_floor > 0.0) {
            return Err(cx.err(
                "run",
                None,
                Some("project_floor"),
                "project_floor must be positive",
            ));
        }
        let steps = (run.t_final / run.dt).round() as usize;
        if steps == 0 || ((steps as f64) * run.dt - run.t_final).abs() > 1e-9 * run.t_final {
            return Err(cx.err(
                "run",
                None,
                Some("dt"),
                "t_final must be a whole number of steps dt",
            ));
        }
        if let Some(gr) = &run.grid {
            if n > 3 {
                return Err(cx.err(
                    "run.grid",
                    None,
                    None,
                    format!("grid engines support n <= 3, model has n = {n}"),
                ));
            }
            if FdOrder::from_order(gr.fd_order).is_none() {
                return Err(cx.err(
                    "run.grid",
                    None,
                    Some("fd_order"),
                    "fd_order must be 2, 4, 6 or 8",
                ));
            }
            if gr.points < 8 || !(gr.half_width > 0.0) {
                return Err(cx.err(
                    "run.grid",
                    None,
                    Some("points"),
                    "grid needs at least 8 points and a positive half_width",
                ));
            }
        }
        Ok(Scenario {
            config: self,
            model,
            channel,
            init,
            steps,
        })
    }
}

impl Scenario {
    pub fn grid(&self) -> GridSection {
        self.config.run.grid.clone().unwrap_or_default()
    }

    pub fn side_config(&self) -> SideConfig {
        let g = self.grid();
        SideConfig {
            order: FdOrder::from_order(g.fd_order).unwrap_or_default(),
            scheme: match g.scheme {
                Scheme::Rk4Milstein => SideScheme::RungeKuttaMilstein,
                Scheme::EulerMaruyama => SideScheme::EulerMaruyama,
            },
            renormalize: g.renormalize,
            ..SideConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_finds_keys_and_array_entries() {
        let text = "[model]\nn = 2\n\n[[model.psi]]\nwidth = 1\n[[model.psi]]\nwidth = 2\n[run]\ndt = 0.1\n";
        assert_eq!(locate(text, "model", None, Some("n")), Some(2));
        assert_eq!(locate(text, "model.psi", Some(1), Some("width")), Some(7));
        assert_eq!(locate(text, "run", None, Some("dt")), Some(9));
        assert_eq!(locate(text, "run", None, Some("missing")), Some(8));
    }
}
