//! Run configuration: a TOML document with one table per concern.
//!
//! ```toml
//! command = "solve-linear"
//! seed = 7
//!
//! [params]
//! a = 0.5
//! c = 1.0
//! eps = 0.05
//!
//! [grid]
//! nx = 64        # uniform intervals on [0, pi]
//! t_end = 5.0
//! nt = 500       # uniform time steps
//!
//! [source]
//! name = "linear:sin_x_exp_t"
//! ```
//!
//! Optional tables: `[solver]`, `[picard]`, `[fd]`, `[bounds]`, `[kernel]`,
//! `[compare]`, `[output]`. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dissipative_core::kernels::KernelKind;
use dissipative_core::linear::{BoundaryKind, ConvolutionMethod, LinearOptions, QuadratureChoice, SolveForm};
use dissipative_core::model::{ModelParams, SourceSpec};
use dissipative_core::nonlinear::PicardConfig;
use dissipative_core::oracle::{FdBoundary, FdConfig, FdScheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelEval,
    SolveLinear,
    SolveNonlinear,
    SolveFd,
    VerifyBounds,
    RateFit,
    Compare,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::KernelEval => "kernel-eval",
            Self::SolveLinear => "solve-linear",
            Self::SolveNonlinear => "solve-nonlinear",
            Self::SolveFd => "solve-fd",
            Self::VerifyBounds => "verify-bounds",
            Self::RateFit => "rate-fit",
            Self::Compare => "compare",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd: Option<FdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub a: f64,
    pub c: f64,
    #[serde(default)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub t_end: f64,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// `sine_gordon`, `linear:<id>` or `tabulated:<csv path>`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Direct,
    Fft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<SolveForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_modes: Option<usize>,
    /// Use the grid's own x nodes for projection instead of Gauss-Legendre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_quadrature: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSection {
    /// Interior nodes; spacing is `pi / (nx + 1)`.
    pub nx: usize,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<FdScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<FdBoundary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub k: f64,
    pub eps: Vec<f64>,
    /// Diagonal sweep points `x = xi = j pi / (nx + 1)`.
    pub nx: usize,
    pub nt: usize,
    pub t_end: f64,
    /// Extra `(x, xi)` pairs drawn from the seeded generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_checks: Option<usize>,
    /// Also certify the uniform-in-time bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// `G_eps`, `H_eps`, `K_eps`, `G_0` or `H_0`.
    pub kind: String,
    pub tol: f64,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
    /// Random `(x, xi, t)` triples with `t` in `[0, t_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub left: PathBuf,
    pub right: PathBuf,
    /// Exceeding this sup-norm difference is reported as a violation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem for every artifact; defaults to the command name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

/// Built-in linear sources, with `F_xx` where it is known in closed form.
pub const LINEAR_SOURCES: [&str; 5] = ["sin_x_exp_t", "manufactured", "parabola_sin_t", "zero", "neumann_ramp"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| anyhow::anyhow!("malformed config: {e}"))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Makes file references relative to the config's directory absolute-ish.
    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        if let Some(src) = &mut self.source {
            if let Some(file) = src.name.strip_prefix("tabulated:") {
                src.name = format!("tabulated:{}", join(Path::new(file)).display());
            }
        }
        if let Some(cmp) = &mut self.compare {
            cmp.left = join(&cmp.left);
            cmp.right = join(&cmp.right);
        }
        if let Some(out) = &mut self.output {
            if let Some(dir) = &out.dir {
                out.dir = Some(join(dir));
            }
        }
    }

    /// Checks that every table the command needs is present and well-formed.
    pub fn validate(&self) -> Result<()> {
        match self.command {
            Command::KernelEval => {
                self.model_params()?;
                let k = self.kernel_section()?;
                parse_kernel_kind(&k.kind)?;
                ensure!(k.tol > 0.0, "kernel.tol: must be positive, got {}", k.tol);
                let grid_points = k.x.len() * k.xi.len() * k.t.len();
                ensure!(
                    grid_points > 0 || k.random_points.unwrap_or(0) > 0,
                    "kernel: give non-empty x, xi and t lists or random_points > 0"
                );
                for (name, list) in [("x", &k.x), ("xi", &k.xi)] {
                    if let Some(v) = list.iter().find(|v| !(0.0..=std::f64::consts::PI).contains(*v)) {
                        bail!("kernel.{name}: {v} outside [0, pi]");
                    }
                }
                if let Some(v) = k.t.iter().find(|v| !(**v >= 0.0)) {
                    bail!("kernel.t: {v} must be non-negative");
                }
            }
            Command::SolveLinear | Command::SolveNonlinear => {
                self.model_params()?;
                self.grid_section()?;
                self.source_spec()?;
                self.linear_options()?;
                if self.command == Command::SolveNonlinear {
                    self.picard_config()?;
                }
            }
            Command::SolveFd => {
                self.model_params()?;
                self.source_spec()?;
                self.fd_config()?;
                self.fd_horizon()?;
            }
            Command::VerifyBounds | Command::RateFit => {
                self.model_params()?;
                let b = self.bounds_section()?;
                ensure!(b.k > 0.0 && b.k < 1.0, "bounds.k: must lie in (0, 1), got {}", b.k);
                ensure!(!b.eps.is_empty(), "bounds.eps: list is empty");
                if let Some(e) = b.eps.iter().find(|e| !(**e > 0.0)) {
                    bail!("bounds.eps: {e} must be positive");
                }
                ensure!(b.nx > 0 && b.nt > 0, "bounds.nx, bounds.nt: must be positive");
                ensure!(b.t_end > 0.0, "bounds.t_end: must be positive, got {}", b.t_end);
            }
            Command::Compare => {
                let c = self.compare_section()?;
                for (name, p) in [("left", &c.left), ("right", &c.right)] {
                    ensure!(p.is_file(), "compare.{name}: file {} does not exist", p.display());
                }
                if let Some(tol) = c.tolerance {
                    ensure!(tol >= 0.0, "compare.tolerance: must be non-negative, got {tol}");
                }
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams<f64>> {
        let p = self.params.as_ref().context("missing [params] table (a, c, eps)")?;
        ModelParams::new(p.a, p.c, p.eps).map_err(|e| anyhow::anyhow!("params: {e}"))
    }

    pub fn grid_section(&self) -> Result<&GridSection> {
        let g = self.grid.as_ref().context("missing [grid] table (nx, t_end, nt)")?;
        ensure!(g.nx >= 2, "grid.nx: need at least 2 intervals, got {}", g.nx);
        ensure!(g.nt >= 1, "grid.nt: need at least 1 step");
        ensure!(g.t_end > 0.0 && g.t_end.is_finite(), "grid.t_end: must be positive, got {}", g.t_end);
        Ok(g)
    }

    pub fn source_section(&self) -> Result<&SourceSection> {
        self.source.as_ref().context("missing [source] table")
    }

    pub fn source_spec(&self) -> Result<SourceSpec<f64>> {
        let s = self.source_section()?;
        build_source(s, &self.model_params()?)
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.solver.as_ref().and_then(|s| s.boundary).unwrap_or(BoundaryKind::Dirichlet)
    }

    pub fn linear_options(&self) -> Result<LinearOptions<f64>> {
        let mut opts = LinearOptions::default();
        let Some(s) = &self.solver else {
            return Ok(opts);
        };
        if let Some(form) = s.form {
            opts.form = form;
        }
        if let Some(tol) = s.tol {
            ensure!(tol > 0.0, "solver.tol: must be positive, got {tol}");
            opts.tol = tol;
        }
        if let Some(n) = s.n_max {
            ensure!(n > 0, "solver.n_max: must be positive");
            opts.n_max = Some(n);
        }
        if let Some(m) = s.max_modes {
            ensure!(m > 0, "solver.max_modes: must be positive");
            opts.max_modes = m;
        }
        if let Some(method) = s.method {
            opts.method = match method {
                MethodName::Direct => ConvolutionMethod::Direct,
                MethodName::Fft => ConvolutionMethod::Fft,
            };
        }
        if s.grid_quadrature == Some(true) {
            opts.quadrature = QuadratureChoice::GridTrapezoid;
        }
        Ok(opts)
    }

    pub fn picard_config(&self) -> Result<PicardConfig<f64>> {
        let mut cfg = PicardConfig::default();
        if let Some(p) = &self.picard {
            if let Some(n) = p.max_iters {
                ensure!(n > 0, "picard.max_iters: must be positive");
                cfg.max_iters = n;
            }
            if let Some(tol) = p.tol {
                ensure!(tol > 0.0, "picard.tol: must be positive, got {tol}");
                cfg.tol = tol;
            }
            if let Some(w) = p.relaxation {
                ensure!(w > 0.0 && w <= 1.0, "picard.relaxation: must lie in (0, 1], got {w}");
                cfg.relaxation = w;
            }
            if let Some(w) = p.window {
                ensure!(w > 0.0, "picard.window: must be positive, got {w}");
                cfg.window = Some(w);
            }
        }
        Ok(cfg)
    }

    pub fn fd_config(&self) -> Result<FdConfig<f64>> {
        let f = self.fd.as_ref().context("missing [fd] table (nx, dt)")?;
        FdConfig::new(
            f.nx,
            f.dt,
            f.scheme.unwrap_or(FdScheme::ImplicitTrapezoid),
            f.boundary.unwrap_or(FdBoundary::DirichletZero),
        )
        .map_err(|e| anyhow::anyhow!("fd: {e}"))
    }

    /// `fd.t_end`, falling back to `grid.t_end`.
    pub fn fd_horizon(&self) -> Result<f64> {
        let t = self
            .fd
            .as_ref()
            .and_then(|f| f.t_end)
            .or_else(|| self.grid.as_ref().map(|g| g.t_end))
            .context("fd.t_end: no horizon given (set fd.t_end or grid.t_end)")?;
        ensure!(t > 0.0 && t.is_finite(), "fd.t_end: must be positive, got {t}");
        Ok(t)
    }

    pub fn bounds_section(&self) -> Result<&BoundsSection> {
        self.bounds.as_ref().context("missing [bounds] table (k, eps, nx, nt, t_end)")
    }

    pub fn kernel_section(&self) -> Result<&KernelSection> {
        self.kernel.as_ref().context("missing [kernel] table (kind, tol, x, xi, t)")
    }

    pub fn compare_section(&self) -> Result<&CompareSection> {
        self.compare.as_ref().context("missing [compare] table (left, right)")
    }

    pub fn prefix(&self) -> String {
        self.output
            .as_ref()
            .and_then(|o| o.prefix.clone())
            .unwrap_or_else(|| self.command.to_string())
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.as_ref().and_then(|o| o.dir.as_deref())
    }
}

pub fn parse_kernel_kind(name: &str) -> Result<KernelKind> {
    KernelKind::parse(name).with_context(|| format!("kernel.kind: unknown kernel `{name}` (G_eps, H_eps, K_eps, G_0, H_0)"))
}

fn build_source(s: &SourceSection, params: &ModelParams<f64>) -> Result<SourceSpec<f64>> {
    use std::f64::consts::PI;

    if s.name == "sine_gordon" {
        let lambda = s.lambda.unwrap_or(1.0);
        let forcing = s.forcing.unwrap_or(0.5);
        ensure!(lambda.is_finite() && forcing.is_finite(), "source: lambda and forcing must be finite");
        return Ok(SourceSpec::sine_gordon(lambda, forcing));
    }
    ensure!(
        s.lambda.is_none() && s.forcing.is_none(),
        "source.lambda, source.forcing: only valid for sine_gordon"
    );
    if let Some(path) = s.name.strip_prefix("tabulated:") {
        return crate::io::read_tabulated_source(Path::new(path));
    }
    let Some(id) = s.name.strip_prefix("linear:") else {
        bail!(
            "source.name: `{}` is not sine_gordon, linear:<id> or tabulated:<file>",
            s.name
        );
    };
    let spec = match id {
        "sin_x_exp_t" => SourceSpec::linear(id, |x: f64, t: f64| x.sin() * (-t).exp())
            .with_xx(|x: f64, t: f64| -x.sin() * (-t).exp()),
        "manufactured" => {
            // exact solution sin(x) (1 - cos t) e^{-t}
            let (a, c2, eps) = (params.a(), params.c() * params.c(), params.eps());
            SourceSpec::linear(id, move |x: f64, t: f64| {
                let e = (-t).exp();
                let g = (1.0 - t.cos()) * e;
                let g1 = t.sin() * e - g;
                let g2 = t.cos() * e - 2.0 * t.sin() * e + g;
                x.sin() * (g2 + (2.0 * a + eps) * g1 + c2 * g)
            })
            .with_xx(move |x: f64, t: f64| {
                let e = (-t).exp();
                let g = (1.0 - t.cos()) * e;
                let g1 = t.sin() * e - g;
                let g2 = t.cos() * e - 2.0 * t.sin() * e + g;
                -x.sin() * (g2 + (2.0 * a + eps) * g1 + c2 * g)
            })
        }
        "parabola_sin_t" => {
            SourceSpec::linear(id, |x: f64, t: f64| x * (PI - x) * t.sin()).with_xx(|_, t: f64| -2.0 * t.sin())
        }
        "zero" => SourceSpec::linear(id, |_, _| 0.0).with_xx(|_, _| 0.0),
        "neumann_ramp" => SourceSpec::linear(id, |x: f64, t: f64| (x + 0.3) * (1.0 - (-t).exp())),
        other => bail!("source.name: unknown linear source `{other}` (one of {})", LINEAR_SOURCES.join(", ")),
    };
    Ok(spec)
}
