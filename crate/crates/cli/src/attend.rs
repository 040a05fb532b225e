//! Seeded invariance suite for the encoded attention and the adapter block.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use camray_core::attention::{
    attend, dense, vanilla_attention, AdapterConfig, AttentionConfig, Placement, SpatialBlock, WeightSet,
};
use camray_core::cameras::{CameraModel, CameraSpec, ModelName};
use camray_core::encodings::{
    build_operators, latup_tokens, layout_for, BuildOptions, EncodingKind, Token, TokenGrid, TokenOperator,
    DEFAULT_ROPE_BASE, DEFAULT_UP_DELTA,
};
use camray_core::geometry::{Pose, Rotation3};
use camray_core::raster::Raster;
use clap::Args;
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, io_error, CliError, CliResult};
use crate::io::{self, RunManifest};

pub const IDENTITY_TOL: f64 = 1e-12;
pub const WORLD_FRAME_TOL: f64 = 1e-6;
pub const DENSE_TOL: f64 = 1e-10;
pub const ZERO_INIT_TOL: f64 = 1e-12;
/// Token count used for the dense comparison.
pub const DENSE_TOKENS: usize = 8;

#[derive(Debug, Args)]
pub struct AttendArgs {
    /// Suite configuration JSON; a built-in default is used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Load block weights from a weight directory instead of initializing them.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Write the block weights used by the suite to this directory.
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
}

fn default_rows() -> usize {
    4
}

fn default_trials() -> usize {
    8
}

fn default_rope_base() -> f64 {
    DEFAULT_ROPE_BASE
}

fn default_delta() -> f64 {
    DEFAULT_UP_DELTA
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub attention: AttentionConfig,
    /// One camera per frame.
    pub cameras: Vec<CameraSpec>,
    #[serde(default = "default_rows")]
    pub token_rows: usize,
    #[serde(default = "default_rows")]
    pub token_cols: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_rope_base")]
    pub rope_base: f64,
    #[serde(default)]
    pub camera_rope: bool,
    #[serde(default = "default_delta")]
    pub up_delta: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let ucm = |xfov_deg: f64, xi: f64| CameraSpec {
            model: ModelName::Ucm,
            xfov_deg: Some(xfov_deg),
            xi: Some(xi),
            width: 64,
            height: 48,
        };
        Self {
            attention: AttentionConfig {
                model_dim: 64,
                heads: 4,
                kind: EncodingKind::UcpeHybrid,
                adapter: AdapterConfig {
                    compression: 2,
                    heads: 2,
                    placement: Placement::Parallel,
                    latup_bias: true,
                },
            },
            cameras: vec![ucm(150.0, 0.9), ucm(190.0, 1.6)],
            token_rows: default_rows(),
            token_cols: default_rows(),
            trials: default_trials(),
            rope_base: DEFAULT_ROPE_BASE,
            camera_rope: false,
            up_delta: DEFAULT_UP_DELTA,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub name: &'static str,
    pub measure: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub trials: usize,
    pub tokens: usize,
    pub config: SuiteConfig,
    pub invariants: Vec<InvariantRow>,
    pub pass: bool,
}

/// Patch-center tokens of every frame that fall inside its lens image.
fn lens_tokens(cams: &[CameraModel], rows: usize, cols: usize) -> TokenGrid {
    let mut tokens = Vec::new();
    for (c, cam) in cams.iter().enumerate() {
        for t in TokenGrid::patch_centers(1, rows, cols, cam.width(), cam.height()).tokens {
            if cam.contains_pixel(t.pixel) {
                tokens.push(Token { frame: c, camera: c, ..t });
            }
        }
    }
    TokenGrid::new(tokens)
}

fn random_pose(rng: &mut ChaCha8Rng, reach: f64) -> Pose {
    let rotation = Rotation3::from_yaw_pitch_roll(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5), rng.gen_range(-PI..PI));
    let t = Vector3::from_fn(|_, _| rng.gen_range(-reach..reach));
    Pose::new(rotation, t)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn rows_of(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    m.rows(0, n).into_owned()
}

struct Suite {
    cfg: SuiteConfig,
    cams: Vec<CameraModel>,
    grid: TokenGrid,
    opts: BuildOptions,
}

impl Suite {
    fn new(cfg: SuiteConfig) -> CliResult<Self> {
        cfg.attention.validate()?;
        if cfg.cameras.is_empty() {
            return Err(input("config lists no cameras"));
        }
        if cfg.trials == 0 || cfg.token_rows == 0 || cfg.token_cols == 0 {
            return Err(input("trials and token grid sizes must be positive"));
        }
        let cams = cfg
            .cameras
            .iter()
            .map(|s| CameraModel::try_from(s.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = lens_tokens(&cams, cfg.token_rows, cfg.token_cols);
        if grid.is_empty() {
            return Err(CliError::Geometry("no token lies inside a lens image".into()));
        }
        let opts = BuildOptions {
            rope_base: cfg.rope_base,
            camera_rope: cfg.camera_rope,
        };
        Ok(Self { cfg, cams, grid, opts })
    }

    fn kind(&self) -> EncodingKind {
        self.cfg.attention.kind
    }

    fn operators(&self, poses: &[Pose]) -> CliResult<Vec<TokenOperator>> {
        if self.kind() == EncodingKind::None {
            return Ok(Vec::new());
        }
        Ok(build_operators(self.kind(), &self.cams, poses, &self.grid, self.cfg.attention.adapter_head_dim(), &self.opts)?)
    }

    fn identity_operators(&self) -> CliResult<Vec<TokenOperator>> {
        if self.kind() == EncodingKind::None {
            return Ok(Vec::new());
        }
        let layout = layout_for(self.kind(), self.cfg.attention.adapter_head_dim(), &self.opts)?;
        Ok(vec![TokenOperator::identity(layout); self.grid.len()])
    }

    fn latup(&self, poses: &[Pose]) -> CliResult<DMatrix<f64>> {
        let values = latup_tokens(&self.cams, poses, &self.grid, self.cfg.up_delta)?;
        Ok(DMatrix::from_fn(values.len(), 3, |i, c| values[i].map_or(0.0, |v| v[c])))
    }

    fn run(&self, seed: u64, weights: Option<&WeightSet>) -> CliResult<(Vec<InvariantRow>, WeightSet)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let att = &self.cfg.attention;
        let weights = match weights {
            Some(w) => w.clone(),
            None => WeightSet::init(att, &mut rng),
        };
        let block = SpatialBlock::new(*att, weights.clone())?;
        let (t, heads, kind) = (self.grid.len(), att.adapter.heads, att.kind);
        let n_dense = t.min(DENSE_TOKENS);
        let identity_ops = self.identity_operators()?;
        let (mut identity, mut world, mut dense_dev, mut zero) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..self.cfg.trials {
            let poses: Vec<Pose> = (0..self.cams.len()).map(|_| random_pose(&mut rng, 2.0)).collect();
            let g = random_pose(&mut rng, 5.0);
            let moved: Vec<Pose> = poses.iter().map(|p| g * *p).collect();
            let x = random_matrix(&mut rng, t, att.model_dim);
            let latup = self.latup(&poses)?;
            let biased = if att.adapter.latup_bias { &x + &latup * &weights.latup } else { x.clone() };
            let (q, k, v) = (&biased * &weights.pq, &biased * &weights.pk, &biased * &weights.pv);

            let plain = vanilla_attention(&q, &k, &v, heads)?;
            identity = identity.max((attend(&q, &k, &v, &identity_ops, kind, heads)? - &plain).amax());

            let ops = self.operators(&poses)?;
            let a = attend(&q, &k, &v, &ops, kind, heads)?;
            let b = attend(&q, &k, &v, &self.operators(&moved)?, kind, heads)?;
            world = world.max((&a - &b).norm() / a.norm().max(f64::MIN_POSITIVE));

            let few = |m: &DMatrix<f64>| rows_of(m, n_dense);
            let few_ops = &ops[..ops.len().min(n_dense)];
            let fast = attend(&few(&q), &few(&k), &few(&v), few_ops, kind, heads)?;
            let slow = dense::attend(&few(&q), &few(&k), &few(&v), few_ops, kind, heads)?;
            dense_dev = dense_dev.max((fast - slow).amax());

            let out = block.forward(&x, &ops, Some(&latup))?;
            zero = zero.max((out - block.base(&x)?).amax());
        }
        let row = |name, measure, max_deviation: f64, tolerance| InvariantRow {
            name,
            measure,
            max_deviation,
            tolerance,
            pass: max_deviation <= tolerance,
        };
        Ok((
            vec![
                row("identity_reduction", "max_abs", identity, IDENTITY_TOL),
                row("world_frame_invariance", "relative_frobenius", world, WORLD_FRAME_TOL),
                row("dense_oracle", "max_abs", dense_dev, DENSE_TOL),
                row("zero_init_noop", "max_abs", zero, ZERO_INIT_TOL),
            ],
            weights,
        ))
    }
}

pub fn run(args: &AttendArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new(Some(args.seed));
    let cfg = match &args.config {
        Some(path) => {
            manifest.add_input(path)?;
            io::read_json(path)?
        }
        None => SuiteConfig::default(),
    };
    let suite = Suite::new(cfg)?;
    let loaded = match &args.weights {
        Some(dir) => {
            let w = load_weights(dir, &suite.cfg.attention)?;
            manifest.add_input(&dir.join(WEIGHT_MANIFEST))?;
            Some(w)
        }
        None => None,
    };
    let (invariants, weights) = suite.run(args.seed, loaded.as_ref())?;
    let pass = invariants.iter().all(|r| r.pass);
    let report = Report {
        seed: args.seed,
        trials: suite.cfg.trials,
        tokens: suite.grid.len(),
        config: suite.cfg.clone(),
        invariants,
        pass,
    };
    print!("{}", io::to_json(&report));
    if let Some(path) = &args.report {
        io::write_json(path, &report)?;
        manifest.write(&io::with_suffix(path, ".manifest.json"))?;
    }
    if let Some(dir) = &args.save_weights {
        save_weights(&weights, dir)?;
    }
    if !pass {
        let failed: Vec<&str> = report.invariants.iter().filter(|r| !r.pass).map(|r| r.name).collect();
        return Err(CliError::Invariance(format!("invariants out of tolerance: {}", failed.join(", "))));
    }
    Ok(())
}

pub const WEIGHT_MANIFEST: &str = "weights.json";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    file: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightManifest {
    tensors: Vec<TensorEntry>,
}

/// One single-channel raster per matrix (`rows × cols`) plus a JSON index.
/// Values are stored as f32.
pub fn save_weights(weights: &WeightSet, dir: &Path) -> CliResult<()> {
    io::create_dir(dir)?;
    let mut tensors = Vec::new();
    for (name, m) in weights.tensors() {
        let file = format!("{name}.cray");
        // Rasters are row-major; nalgebra stores columns first.
        let data = m.transpose().iter().map(|&v| v as f32).collect();
        let path = dir.join(&file);
        Raster::new(m.nrows(), m.ncols(), 1, data)?.save(&path).map_err(|e| io_error(&path, e))?;
        tensors.push(TensorEntry {
            name: name.to_string(),
            file,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    io::write_json(&dir.join(WEIGHT_MANIFEST), &WeightManifest { tensors })
}

pub fn load_weights(dir: &Path, cfg: &AttentionConfig) -> CliResult<WeightSet> {
    let index: WeightManifest = io::read_json(&dir.join(WEIGHT_MANIFEST))?;
    let get = |name: &str| -> CliResult<DMatrix<f64>> {
        let entry = index
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| input(format!("{}: tensor '{name}' missing", dir.display())))?;
        let path = dir.join(&entry.file);
        let r = io::read_raster(&path)?;
        if (r.height(), r.width(), r.channels()) != (entry.rows, entry.cols, 1) {
            return Err(input(format!("{}: shape disagrees with the index", path.display())));
        }
        Ok(DMatrix::from_row_iterator(entry.rows, entry.cols, r.data().iter().map(|&v| v as f64)))
    };
    let w = WeightSet {
        wq: get("wq")?,
        wk: get("wk")?,
        wv: get("wv")?,
        wo: get("wo")?,
        pq: get("pq")?,
        pk: get("pk")?,
        pv: get("pv")?,
        up: get("up")?,
        latup: get("latup")?,
    };
    w.check(cfg)?;
    Ok(w)
}
