//! Run configuration (TOML, versioned by `schema_version`).
//!
//! Every section except `[mesh]` is optional. Layout-dependent values left
//! out of the file are filled in by [`RunConfig::resolve`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::NodalRecovery;
use crate::assembly::{Edge, Material, Plane, ALL_EDGES};
use crate::error::{Error, Result};
use crate::geometry::{Crack, CrackEnd, EnrichmentMode, Junction, Point};
use crate::layouts::Layout;
use crate::partition::Strategy;
use crate::solver::{FactorMethod, Ordering};

pub const SCHEMA_VERSION: u32 = 1;

/// Serialize through Display / FromStr so values read like "ICC(9)".
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub cracks: CrackConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub enrichment: EnrichmentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loads: Option<LoadConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Nodes along x.
    pub nx: usize,
    /// Nodes along y; defaults to nx.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
    /// Extra cracks, appended after the layout's own.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polylines: Vec<PolylineConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolylineConfig {
    pub vertices: Vec<[f64; 2]>,
    #[serde(default = "yes")]
    pub tip_start: bool,
    #[serde(default = "yes")]
    pub tip_end: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub junction: Option<JunctionConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionConfig {
    pub host: usize,
    #[serde(with = "end_name")]
    pub end: CrackEnd,
}

mod end_name {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::geometry::CrackEnd;

    pub fn serialize<S: Serializer>(v: &CrackEnd, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match v {
            CrackEnd::Start => "start",
            CrackEnd::End => "end",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CrackEnd, D::Error> {
        match String::deserialize(d)?.as_str() {
            "start" => Ok(CrackEnd::Start),
            "end" => Ok(CrackEnd::End),
            o => Err(de::Error::custom(format!("junction end must be start or end, got {o}"))),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default = "MaterialConfig::default_e")]
    pub e: f64,
    #[serde(default = "MaterialConfig::default_nu")]
    pub nu: f64,
    #[serde(default = "MaterialConfig::default_plane")]
    pub plane: Plane,
}

impl MaterialConfig {
    fn default_e() -> f64 {
        1e4
    }
    fn default_nu() -> f64 {
        0.3
    }
    fn default_plane() -> Plane {
        Plane::Stress
    }
    pub fn material(&self) -> Result<Material> {
        Material::new(self.e, self.nu, self.plane)
    }
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig { e: 1e4, nu: 0.3, plane: Plane::Stress }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Geometrical,
    Topological,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichmentConfig {
    #[serde(default = "EnrichmentConfig::default_mode")]
    pub mode: ModeName,
    /// Geometrical enrichment radius; layout default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_tip: Option<f64>,
    /// Topological enrichment: element layers around the tip element.
    #[serde(default = "EnrichmentConfig::default_layers")]
    pub layers: usize,
    /// Number of branch functions, 1..=4.
    #[serde(default = "EnrichmentConfig::default_enr")]
    pub enr: usize,
    /// Remove two linearly dependent branch functions per tip.
    #[serde(default = "yes")]
    pub eliminate: bool,
    /// Local function numbers (1..=16) of the eliminated pair.
    #[serde(default = "EnrichmentConfig::default_pair")]
    pub pair: [usize; 2],
}

impl EnrichmentConfig {
    fn default_mode() -> ModeName {
        ModeName::Geometrical
    }
    fn default_layers() -> usize {
        1
    }
    fn default_enr() -> usize {
        4
    }
    fn default_pair() -> [usize; 2] {
        [15, 16]
    }
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        EnrichmentConfig {
            mode: ModeName::Geometrical,
            r_tip: None,
            layers: 1,
            enr: 4,
            eliminate: true,
            pair: [15, 16],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletKind {
    /// Analytical mode-I displacement of the first tip.
    ModeI,
    /// Homogeneous.
    Zero,
    /// No prescribed displacement.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub dirichlet: DirichletKind,
    #[serde(default = "LoadConfig::default_k1")]
    pub k1: f64,
    #[serde(default = "LoadConfig::default_edges")]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub body_force: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tractions: Vec<TractionConfig>,
    /// Crack-face pressure.
    #[serde(default)]
    pub pressure: f64,
}

impl LoadConfig {
    fn default_k1() -> f64 {
        1.0
    }
    fn default_edges() -> Vec<Edge> {
        ALL_EDGES.to_vec()
    }
    pub fn for_layout(layout: Option<Layout>) -> LoadConfig {
        let mode_i = layout.map(Layout::is_mode_i_benchmark).unwrap_or(false);
        LoadConfig {
            dirichlet: if mode_i { DirichletKind::ModeI } else { DirichletKind::Zero },
            k1: 1.0,
            edges: ALL_EDGES.to_vec(),
            body_force: [0.0; 2],
            tractions: Vec::new(),
            pressure: if mode_i { 0.0 } else { 1.0 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionConfig {
    pub edge: Edge,
    pub t: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Asm,
    Jacobi,
    None,
    /// Sparse Cholesky of the whole system.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "SolverConfig::default_pc")]
    pub preconditioner: PreconditionerKind,
    #[serde(default = "SolverConfig::default_strategy")]
    pub strategy: Strategy,
    /// Regular subdomains, also the worker pool size.
    #[serde(default = "SolverConfig::default_workers")]
    pub workers: usize,
    /// Thread pool size when it should differ from `workers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "SolverConfig::default_delta_reg")]
    pub delta_reg: usize,
    #[serde(default = "SolverConfig::default_delta_tip")]
    pub delta_tip: usize,
    #[serde(default = "SolverConfig::default_regular", with = "text")]
    pub regular: FactorMethod,
    #[serde(default = "SolverConfig::default_tip", with = "text")]
    pub tip: FactorMethod,
    #[serde(default = "SolverConfig::default_ordering", with = "text")]
    pub ordering: Ordering,
    #[serde(default = "SolverConfig::default_rtol")]
    pub rtol: f64,
    #[serde(default = "SolverConfig::default_maxiter")]
    pub maxiter: usize,
}

impl SolverConfig {
    fn default_pc() -> PreconditionerKind {
        PreconditionerKind::Asm
    }
    fn default_strategy() -> Strategy {
        Strategy::S2
    }
    fn default_workers() -> usize {
        4
    }
    fn default_delta_reg() -> usize {
        2
    }
    fn default_delta_tip() -> usize {
        6
    }
    fn default_regular() -> FactorMethod {
        FactorMethod::Icc(9)
    }
    fn default_tip() -> FactorMethod {
        FactorMethod::Cholesky
    }
    fn default_ordering() -> Ordering {
        Ordering::Rcm
    }
    fn default_rtol() -> f64 {
        1e-6
    }
    fn default_maxiter() -> usize {
        20000
    }
    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(self.workers).max(1)
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            preconditioner: PreconditionerKind::Asm,
            strategy: Strategy::S2,
            workers: 4,
            threads: None,
            delta_reg: 2,
            delta_tip: 6,
            regular: FactorMethod::Icc(9),
            tip: FactorMethod::Cholesky,
            ordering: Ordering::Rcm,
            rtol: 1e-6,
            maxiter: 20000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Error norms against the analytical mode-I field; on by default for
    /// the mode-I benchmark layouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<bool>,
    /// Interaction-integral SIFs for every tip.
    #[serde(default = "yes")]
    pub sif: bool,
    /// Inner and outer extraction radii in multiples of h.
    #[serde(default = "AnalysisConfig::default_radii")]
    pub sif_radii: [f64; 2],
    /// Condition numbers of K and of the preconditioned operator.
    #[serde(default)]
    pub condition: bool,
    /// Samples per side of the VTK field grid; 0 uses the mesh nodes.
    #[serde(default)]
    pub vtk_samples: usize,
    /// Nodal strain recovery for the energy error.
    #[serde(default)]
    pub recovery: NodalRecovery,
}

impl AnalysisConfig {
    fn default_radii() -> [f64; 2] {
        [2.0, 4.0]
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            errors: None,
            sif: true,
            sif_radii: [2.0, 4.0],
            condition: false,
            vtk_samples: 0,
            recovery: NodalRecovery::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Strategy,
    FillReg,
    FillTip,
    OverlapReg,
    OverlapTip,
    Reorder,
    Enr,
    Mesh,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "strategy" => SweepAxis::Strategy,
            "fill_reg" => SweepAxis::FillReg,
            "fill_tip" => SweepAxis::FillTip,
            "overlap_reg" => SweepAxis::OverlapReg,
            "overlap_tip" => SweepAxis::OverlapTip,
            "reorder" => SweepAxis::Reorder,
            "enr" => SweepAxis::Enr,
            "mesh" => SweepAxis::Mesh,
            _ => return Err(Error::Unsupported(format!("sweep axis {s}"))),
        })
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// A sweep value; integers and strings are both accepted in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Text(String),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Int(i) => write!(f, "{i}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    /// Run the first value once untimed before the sweep.
    #[serde(default = "yes")]
    pub warmup: bool,
    /// On the mesh axis, scale both overlaps with the number of elements.
    #[serde(default = "yes")]
    pub scale_overlap: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "BenchConfig::default_meshes")]
    pub meshes: Vec<usize>,
    #[serde(default = "BenchConfig::default_enr")]
    pub enr: Vec<usize>,
}

impl BenchConfig {
    fn default_meshes() -> Vec<usize> {
        vec![20, 40, 80, 160]
    }
    fn default_enr() -> Vec<usize> {
        vec![4]
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { meshes: Self::default_meshes(), enr: Self::default_enr() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "OutputConfig::default_dir")]
    pub dir: PathBuf,
    /// Seed for randomized estimators (Lanczos start vectors).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub export_matrix: bool,
    #[serde(default)]
    pub export_vtk: bool,
}

impl OutputConfig {
    fn default_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: Self::default_dir(), seed: 0, export_matrix: false, export_vtk: false }
    }
}

impl RunConfig {
    /// Minimal config for a built-in layout on an `n` x `n` node mesh.
    pub fn for_layout(layout: Layout, n: usize) -> RunConfig {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            name: Some(layout.to_string()),
            mesh: MeshConfig { nx: n, ny: None, origin: None, extent: None },
            cracks: CrackConfig { layout: Some(layout), polylines: Vec::new() },
            material: MaterialConfig::default(),
            enrichment: EnrichmentConfig::default(),
            loads: None,
            solver: SolverConfig::default(),
            analysis: AnalysisConfig::default(),
            sweep: None,
            bench: BenchConfig::default(),
            output: OutputConfig::default(),
        }
        .resolve()
        .expect("built-in layout config is valid")
    }

    /// Parse and validate; the result has all layout defaults filled in.
    pub fn from_toml_str(s: &str) -> Result<RunConfig> {
        let raw: RunConfig = toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::ConfigParse(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        raw.resolve()
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fill layout-dependent defaults and validate.
    pub fn resolve(mut self) -> Result<RunConfig> {
        let layout = self.cracks.layout;
        let (o, e) = layout.map(Layout::domain).unwrap_or(([0.0, 0.0], [1.0, 1.0]));
        self.mesh.ny.get_or_insert(self.mesh.nx);
        self.mesh.origin.get_or_insert(o);
        self.mesh.extent.get_or_insert(e);
        if self.enrichment.mode == ModeName::Geometrical && self.enrichment.r_tip.is_none() {
            let ext = self.mesh.extent.unwrap();
            let frac = layout.map(Layout::r_tip_fraction).unwrap_or(0.1);
            self.enrichment.r_tip = Some(frac * ext[0].min(ext[1]));
        }
        if self.loads.is_none() {
            self.loads = Some(LoadConfig::for_layout(layout));
        }
        if self.analysis.errors.is_none() {
            let mode_i = self.loads.as_ref().unwrap().dirichlet == DirichletKind::ModeI;
            self.analysis.errors = Some(mode_i);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfiguration(m));
        let (nx, ny) = (self.mesh.nx, self.nodes_y());
        if nx < 2 || ny < 2 {
            return bad(format!("mesh needs at least 2x2 nodes, got {nx}x{ny}"));
        }
        let ext = self.extent();
        if !(ext[0] > 0.0 && ext[1] > 0.0) {
            return bad(format!("extent must be positive, got {ext:?}"));
        }
        if !(1..=4).contains(&self.enrichment.enr) {
            return bad(format!("enr must be 1..=4, got {}", self.enrichment.enr));
        }
        if let Some(r) = self.enrichment.r_tip {
            if !(r > 0.0) {
                return bad(format!("r_tip must be positive, got {r}"));
            }
        }
        let [a, b] = self.enrichment.pair;
        if !(1..=16).contains(&a) || !(1..=16).contains(&b) || a == b {
            return bad(format!("elimination pair must be two distinct values in 1..=16, got {:?}", self.enrichment.pair));
        }
        let s = &self.solver;
        if s.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(s.rtol > 0.0 && s.rtol < 1.0) {
            return bad(format!("rtol must lie in (0, 1), got {}", s.rtol));
        }
        if s.maxiter == 0 {
            return bad("maxiter must be positive".into());
        }
        let [r0, r1] = self.analysis.sif_radii;
        if !(r0 >= 0.0 && r1 > r0) {
            return bad(format!("sif_radii must satisfy 0 <= inner < outer, got {:?}", self.analysis.sif_radii));
        }
        if self.cracks.layout.is_none() && self.cracks.polylines.is_empty() && self.loads.as_ref().map(|l| l.pressure != 0.0).unwrap_or(false) {
            return bad("crack pressure given but there are no cracks".into());
        }
        for (i, p) in self.cracks.polylines.iter().enumerate() {
            if p.vertices.len() < 2 {
                return bad(format!("polyline {i} needs at least two vertices"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return bad("sweep needs at least one value".into());
            }
        }
        Ok(())
    }

    pub fn nodes_y(&self) -> usize {
        self.mesh.ny.unwrap_or(self.mesh.nx)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.mesh.origin.unwrap_or([0.0, 0.0])
    }

    pub fn extent(&self) -> [f64; 2] {
        self.mesh.extent.unwrap_or([1.0, 1.0])
    }

    pub fn loads(&self) -> LoadConfig {
        self.loads.clone().unwrap_or_else(|| LoadConfig::for_layout(self.cracks.layout))
    }

    pub fn enrichment_mode(&self) -> EnrichmentMode {
        match self.enrichment.mode {
            ModeName::Geometrical => EnrichmentMode::Geometrical { r_tip: self.enrichment.r_tip.unwrap_or(0.1) },
            ModeName::Topological => EnrichmentMode::Topological { layers: self.enrichment.layers },
        }
    }

    pub fn crack_list(&self) -> Vec<Crack> {
        let mut out = match self.cracks.layout {
            Some(l) => l.cracks(self.origin(), self.extent()),
            None => Vec::new(),
        };
        for p in &self.cracks.polylines {
            out.push(Crack {
                vertices: p.vertices.iter().map(|v| Point::new(v[0], v[1])).collect(),
                tip_start: p.tip_start,
                tip_end: p.tip_end,
                junction: p.junction.map(|j| Junction { host: j.host, end: j.end }),
            });
        }
        out
    }

    /// Apply one sweep value on `axis`. `base_nx` anchors proportional
    /// overlap scaling on the mesh axis.
    pub fn with_axis(&self, axis: SweepAxis, value: &str, scale_overlap: bool) -> Result<RunConfig> {
        let mut c = self.clone();
        let int = |v: &str| -> Result<usize> {
            v.trim().parse().map_err(|_| Error::InvalidConfiguration(format!("{axis} value {v} is not a non-negative integer")))
        };
        let fill = |v: &str| -> Result<FactorMethod> {
            match v.trim().parse::<usize>() {
                Ok(l) => Ok(FactorMethod::Icc(l)),
                Err(_) => v.parse(),
            }
        };
        match axis {
            SweepAxis::Strategy => c.solver.strategy = value.parse()?,
            SweepAxis::FillReg => c.solver.regular = fill(value)?,
            SweepAxis::FillTip => c.solver.tip = fill(value)?,
            SweepAxis::OverlapReg => c.solver.delta_reg = int(value)?,
            SweepAxis::OverlapTip => c.solver.delta_tip = int(value)?,
            SweepAxis::Reorder => c.solver.ordering = value.parse()?,
            SweepAxis::Enr => c.enrichment.enr = int(value)?,
            SweepAxis::Mesh => {
                let n = int(value)?;
                let (bx, by) = (self.mesh.nx, self.nodes_y());
                c.mesh.nx = n;
                c.mesh.ny = Some(((by as f64) * n as f64 / bx as f64).round().max(2.0) as usize);
                if scale_overlap {
                    let f = (n - 1) as f64 / (bx - 1) as f64;
                    let scale = |d: usize| ((d as f64 * f).round() as usize).max(1);
                    c.solver.delta_reg = scale(self.solver.delta_reg);
                    c.solver.delta_tip = scale(self.solver.delta_tip);
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}
