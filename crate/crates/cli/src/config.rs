//! Scenario configuration: TOML schema, validation and conversion into the
//! solver objects. Coefficient fields are constants or expression strings in
//! the variables x and y.

use crate::expr;
use anyhow::{anyhow, bail, Context, Result};
use quadgrad::calculus::{ExtremalSide, GridFunction, QuadScheme};
use quadgrad::mesh::{build_interval_grid, build_planar_grid, Grid, GridShape};
use quadgrad::operators::{
    Ellipticity, MatrixField, OperatorMember, OperatorSpec, ProblemSpec,
};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

/// constant or expression-valued scalar field
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldExpr {
    Const(f64),
    Expr(String),
}

impl FieldExpr {
    pub fn evaluate(&self, grid: &Arc<Grid<f64>>) -> Result<GridFunction<f64>> {
        match self {
            FieldExpr::Const(v) => Ok(GridFunction::constant(grid.clone(), *v)),
            FieldExpr::Expr(src) => {
                let e = expr::parse(src).with_context(|| format!("in expression '{src}'"))?;
                let gf = GridFunction::from_fn(grid.clone(), |x, y| e.eval(x, y));
                if gf.values().iter().any(|v| !v.is_finite()) {
                    bail!("expression '{src}' evaluates to a non-finite value on the grid");
                }
                Ok(gf)
            }
        }
    }

}

fn default_n() -> usize {
    128
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: String,
    #[serde(default = "default_n")]
    pub n: usize,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub x0: Option<f64>,
    pub x1: Option<f64>,
    pub y0: Option<f64>,
    pub y1: Option<f64>,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    /// isotropic second-order coefficient a(x) = a * I
    pub a: f64,
    pub drift_x: Option<FieldExpr>,
    pub drift_y: Option<FieldExpr>,
    pub zeta: Option<FieldExpr>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: String,
    pub lambda_p: f64,
    #[serde(rename = "Lambda_p")]
    pub big_lambda_p: f64,
    pub b: Option<FieldExpr>,
    pub d: Option<FieldExpr>,
    #[serde(default)]
    pub member: Vec<MemberConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub mu1: f64,
    pub mu2: f64,
    /// optional scalar field m(x); M = m(x) I. Defaults to constant mu1
    /// (requires mu1 == mu2 in that case).
    pub m: Option<FieldExpr>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub c: FieldExpr,
    pub h: FieldExpr,
}

fn default_lambda() -> f64 {
    0.0
}

fn default_scheme() -> String {
    "centered".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_scheme")]
    pub quad_scheme: String,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            lambda: default_lambda(),
            quad_scheme: default_scheme(),
        }
    }
}

fn default_ds() -> f64 {
    0.02
}

fn default_ds_max() -> f64 {
    0.25
}

fn default_norm_cap() -> f64 {
    1e3
}

fn default_max_points() -> usize {
    3000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub from: f64,
    pub to: f64,
    #[serde(default = "default_ds")]
    pub ds: f64,
    #[serde(default = "default_ds_max")]
    pub ds_max: f64,
    #[serde(default = "default_norm_cap")]
    pub norm_cap: f64,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyConfig {
    /// fixed positive lambda of the auxiliary problem
    pub lambda: f64,
    /// window bound entering the homotopy weight
    pub lambda2: f64,
    /// empirical lower-bound constant (before the safety factor of 2)
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "default_ds")]
    pub ds: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub lambda1: f64,
    pub lambda2: f64,
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// "centroid" or an explicit node index
    pub probe: Option<toml::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol: default_tol(),
            probe: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: Option<String>,
    pub grid: GridConfig,
    pub operator: OperatorConfig,
    pub matrix: MatrixConfig,
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    pub branch: Option<BranchConfig>,
    pub homotopy: Option<HomotopyConfig>,
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let cfg: Config = toml::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

impl Config {
    pub fn build_grid(&self) -> Result<Arc<Grid<f64>>> {
        let g = &self.grid;
        let grid = match g.kind.as_str() {
            "interval" => {
                let a = g.a.ok_or_else(|| anyhow!("grid.a missing for interval"))?;
                let b = g.b.ok_or_else(|| anyhow!("grid.b missing for interval"))?;
                build_interval_grid(a, b, g.n)?
            }
            "rectangle" => build_planar_grid(
                GridShape::Rectangle {
                    x0: g.x0.ok_or_else(|| anyhow!("grid.x0 missing for rectangle"))?,
                    x1: g.x1.ok_or_else(|| anyhow!("grid.x1 missing for rectangle"))?,
                    y0: g.y0.ok_or_else(|| anyhow!("grid.y0 missing for rectangle"))?,
                    y1: g.y1.ok_or_else(|| anyhow!("grid.y1 missing for rectangle"))?,
                },
                g.n,
            )?,
            "disk" => build_planar_grid(
                GridShape::Disk {
                    cx: g.cx.unwrap_or(0.0),
                    cy: g.cy.unwrap_or(0.0),
                    radius: g
                        .radius
                        .ok_or_else(|| anyhow!("grid.radius missing for disk"))?,
                },
                g.n,
            )?,
            other => bail!("unknown grid.kind '{other}' (interval | rectangle | disk)"),
        };
        Ok(Arc::new(grid))
    }

    pub fn build_operator(&self, grid: &Arc<Grid<f64>>) -> Result<OperatorSpec<f64>> {
        let oc = &self.operator;
        let e = Ellipticity::new(oc.lambda_p, oc.big_lambda_p)?;
        let nodes = grid.node_count();
        let dim = grid.dim();
        let build_member = |mc: &MemberConfig| -> Result<OperatorMember<f64>> {
            let mut m = OperatorMember::isotropic(dim, mc.a);
            if mc.drift_x.is_some() || mc.drift_y.is_some() {
                let dx = match &mc.drift_x {
                    Some(f) => f.evaluate(grid)?,
                    None => GridFunction::zeros(grid.clone()),
                };
                let dy = match &mc.drift_y {
                    Some(f) => f.evaluate(grid)?,
                    None => GridFunction::zeros(grid.clone()),
                };
                let drift: Vec<[f64; 2]> = (0..nodes).map(|i| [dx.get(i), dy.get(i)]).collect();
                m = m.with_drift(drift);
            }
            if let Some(z) = &mc.zeta {
                let zf = z.evaluate(grid)?;
                if zf.values().iter().any(|&v| v > 0.0) {
                    bail!("operator member zeta must be nonpositive");
                }
                m = m.with_zero_order(zf.values().to_vec());
            }
            Ok(m)
        };
        let mut spec = match oc.kind.as_str() {
            "pucci_plus" => OperatorSpec::pucci(ExtremalSide::Plus, e),
            "pucci_minus" => OperatorSpec::pucci(ExtremalSide::Minus, e),
            "linear" => {
                let member = match oc.member.len() {
                    0 => OperatorMember::isotropic(dim, oc.lambda_p),
                    1 => build_member(&oc.member[0])?,
                    n => bail!("linear operator expects at most one member, got {n}"),
                };
                OperatorSpec::linear(e, member, nodes)?
            }
            "hjb_sup" => {
                if oc.member.is_empty() {
                    bail!("hjb_sup operator needs at least one [[operator.member]]");
                }
                let members = oc
                    .member
                    .iter()
                    .map(build_member)
                    .collect::<Result<Vec<_>>>()?;
                OperatorSpec::hjb_sup(e, members, nodes)?
            }
            "isaacs" => {
                if oc.member.is_empty() {
                    bail!("isaacs operator needs at least one [[operator.member]]");
                }
                // flat member list: each member is its own singleton group
                let groups = oc
                    .member
                    .iter()
                    .map(|mc| Ok(vec![build_member(mc)?]))
                    .collect::<Result<Vec<_>>>()?;
                OperatorSpec::isaacs(e, groups, nodes)?
            }
            other => bail!(
                "unknown operator.kind '{other}' (linear | pucci_plus | pucci_minus | hjb_sup | isaacs)"
            ),
        };
        if let Some(b) = &oc.b {
            let bf = b.evaluate(grid)?;
            if bf.values().iter().any(|v| *v != 0.0) {
                spec = spec.with_drift_bound(bf)?;
            }
        }
        if let Some(d) = &oc.d {
            let df = d.evaluate(grid)?;
            if df.values().iter().any(|v| *v != 0.0) {
                spec = spec.with_zero_order_bound(df)?;
            }
        }
        Ok(spec)
    }

    pub fn build_matrix(&self, grid: &Arc<Grid<f64>>) -> Result<MatrixField<f64>> {
        let mc = &self.matrix;
        match &mc.m {
            None => {
                if (mc.mu1 - mc.mu2).abs() > 1e-14 {
                    bail!("matrix.m must be given when mu1 != mu2");
                }
                Ok(MatrixField::scalar(mc.mu1)?)
            }
            Some(FieldExpr::Const(v)) => {
                if (mc.mu1 - mc.mu2).abs() < 1e-14 && (v - mc.mu1).abs() < 1e-14 {
                    Ok(MatrixField::scalar(*v)?)
                } else {
                    let grid_fn = GridFunction::constant(grid.clone(), *v);
                    Ok(MatrixField::scalar_field(
                        grid_fn.values().to_vec(),
                        mc.mu1,
                        mc.mu2,
                    )?)
                }
            }
            Some(f) => {
                let gf = f.evaluate(grid)?;
                Ok(MatrixField::scalar_field(
                    gf.values().to_vec(),
                    mc.mu1,
                    mc.mu2,
                )?)
            }
        }
    }

    pub fn build_problem(&self, tol_override: Option<f64>) -> Result<BuiltProblem> {
        let grid = self.build_grid()?;
        let op = self.build_operator(&grid)?;
        let matrix = self.build_matrix(&grid)?;
        let c = self.coefficients.c.evaluate(&grid)?;
        let h = self.coefficients.h.evaluate(&grid)?;
        let scheme = match self.problem.quad_scheme.as_str() {
            "centered" => QuadScheme::Centered,
            "monotone-upwind" | "monotone_upwind" => QuadScheme::MonotoneUpwind,
            other => bail!("unknown problem.quad_scheme '{other}' (centered | monotone-upwind)"),
        };
        let problem = ProblemSpec::new(grid.clone(), op, matrix, c, h, self.problem.lambda)?
            .with_quad_scheme(scheme);
        let probe = match &self.run.probe {
            None => grid.centroid_node(),
            Some(toml::Value::String(s)) if s == "centroid" => grid.centroid_node(),
            Some(toml::Value::Integer(i)) => {
                let idx = usize::try_from(*i).map_err(|_| anyhow!("run.probe must be >= 0"))?;
                if idx >= grid.node_count() || !grid.is_interior(idx) {
                    bail!("run.probe node {idx} is not an interior node");
                }
                idx
            }
            Some(other) => bail!("run.probe must be 'centroid' or a node index, got {other}"),
        };
        let tol = tol_override.unwrap_or(self.run.tol);
        if !(tol > 0.0) {
            bail!("run.tol must be positive");
        }
        Ok(BuiltProblem {
            grid,
            problem,
            probe,
            tol,
        })
    }
}

pub struct BuiltProblem {
    pub grid: Arc<Grid<f64>>,
    pub problem: ProblemSpec<f64>,
    pub probe: usize,
    pub tol: f64,
}
