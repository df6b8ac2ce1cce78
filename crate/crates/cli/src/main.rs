use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use omnisal::config::RunConfig;
use omnisal::image_io::{load_image, save_image};
use omnisal::metrics::{evaluate, EvalReport, GroundTruthMap, SaliencyMap};
use omnisal::params::{dump_params, load_params};
use omnisal::pipeline::{forward_with, Model};
use omnisal::projection::{
    cube_to_ep, ep_to_cube, render_43_canvas, unfold, CubeFaceSet, EquirectImage, Face,
};
use omnisal::selftest::{self, Level};
use omnisal::tensor::{read_omt, write_omt, Tensor};
use omnisal::{fixtures, Error};

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

/// Omnidirectional saliency toolkit: projections, cube unfoldings, a
/// deterministic forward pass and saliency evaluation.
#[derive(Parser)]
#[command(name = "omnisal", version)]
struct Cli {
    /// Worker threads for internal parallelism. Results do not depend on it.
    #[arg(long, global = true, env = "OMNISAL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between equirectangular and cube-map images.
    Convert(ConvertArgs),
    /// Write the horizontal and vertical strips of one cube unfolding.
    Unfold(UnfoldArgs),
    /// Run the forward pass and write the saliency map.
    Forward(ForwardArgs),
    /// Score predicted maps against ground truth.
    Eval(EvalArgs),
    /// Run the built-in property and oracle suite.
    Selftest(SelftestArgs),
    /// Generate or inspect fixtures.
    #[command(subcommand)]
    Fixture(FixtureCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Equirectangular image to six faces.
    E2c,
    /// Six faces to an equirectangular image.
    C2e,
}

#[derive(Args)]
struct ConvertArgs {
    direction: Direction,
    /// Input image (e2c) or directory holding face_F.png .. face_D.png (c2e).
    input: PathBuf,
    /// Output directory (e2c) or image (c2e).
    output: PathBuf,
    /// Face side for e2c; defaults to a quarter of the input width.
    #[arg(long)]
    face_size: Option<usize>,
    /// Output height for c2e; defaults to twice the face side.
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Center {
    F,
    R,
    B,
    L,
}

impl Center {
    fn face(self) -> Face {
        match self {
            Center::F => Face::F,
            Center::R => Face::R,
            Center::B => Face::B,
            Center::L => Face::L,
        }
    }
}

#[derive(Args)]
struct UnfoldArgs {
    input: PathBuf,
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "f", ignore_case = true)]
    center: Center,
    /// Also write the 3a x 4a cross canvas and its mask.
    #[arg(long)]
    canvas: bool,
    #[arg(long)]
    face_size: Option<usize>,
}

#[derive(Args)]
struct ForwardArgs {
    /// Input equirectangular image; falls back to `io.input` of the config.
    input: Option<PathBuf>,
    /// Output saliency PNG; falls back to `io.output` of the config.
    output: Option<PathBuf>,
    /// JSON run configuration. Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter dump directory to load instead of generating from the seed.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Enable an ablation (repeatable): no_cu, no_dwf, no_fr, no_waf, six_faces.
    #[arg(long = "ablation")]
    ablations: Vec<String>,
    /// Write every named intermediate tensor as OMT1 into this directory.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    pred_dir: PathBuf,
    gt_dir: PathBuf,
    /// JSON report path.
    report: PathBuf,
    /// CSV path; defaults to the report path with a `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Reduced trial counts (the default).
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Full trial counts.
    #[arg(long)]
    full: bool,
    /// Run only the named criterion.
    #[arg(long)]
    only: Option<String>,
    /// List criterion names and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Band-limited panorama.
    Smooth,
    /// Smooth panorama with bright blobs.
    Blobs,
    /// The fixed 64x32 forward-pass input.
    Forward,
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Write a synthetic panorama as PNG/PGM (by extension) or OMT1 (`.omt`).
    Generate {
        kind: FixtureKind,
        output: PathBuf,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Dump model parameters for a configuration.
    Params {
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the shape and value range of an OMT1 file.
    Inspect { file: PathBuf },
    /// Convert between OMT1 and PNG/PGM by extension.
    Convert { input: PathBuf, output: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain joined with `: `, skipping causes already quoted by an
/// outer message.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let s = cause.to_string();
        if !msg.contains(&s) {
            msg.push_str(": ");
            msg.push_str(&s);
        }
    }
    msg
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return if err.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Convert(a) => convert(a)?,
        Command::Unfold(a) => cmd_unfold(a)?,
        Command::Forward(a) => cmd_forward(a)?,
        Command::Eval(a) => cmd_eval(a)?,
        Command::Selftest(a) => return cmd_selftest(a),
        Command::Fixture(f) => fixture(f)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn load_equirect(path: &Path) -> Result<EquirectImage> {
    let t = load_image(path)?;
    EquirectImage::new(t).with_context(|| format!("{}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    Ok(())
}

fn face_file(face: Face) -> String {
    format!("face_{face}.png")
}

fn convert(a: ConvertArgs) -> Result<()> {
    match a.direction {
        Direction::E2c => {
            let ep = load_equirect(&a.input)?;
            let side = a.face_size.unwrap_or_else(|| ep.default_face_side());
            let faces = ep_to_cube(&ep, side)?;
            create_dir(&a.output)?;
            for f in Face::ALL {
                save_image(a.output.join(face_file(f)), faces.face(f))?;
            }
        }
        Direction::C2e => {
            let faces: Vec<Tensor> = Face::ALL
                .iter()
                .map(|&f| load_image(a.input.join(face_file(f))))
                .collect::<omnisal::Result<_>>()?;
            let set = CubeFaceSet::new(faces.try_into().expect("six faces"))?;
            let height = a.height.unwrap_or(2 * set.side());
            save_image(&a.output, &cube_to_ep(&set, height)?)?;
        }
    }
    Ok(())
}

fn cmd_unfold(a: UnfoldArgs) -> Result<()> {
    let ep = load_equirect(&a.input)?;
    let side = a.face_size.unwrap_or_else(|| ep.default_face_side());
    let pair = unfold(&ep_to_cube(&ep, side)?, a.center.face())?;
    create_dir(&a.out_dir)?;
    let c = a.center.face();
    save_image(a.out_dir.join(format!("cu_{c}_horizontal.png")), &pair.horizontal)?;
    save_image(a.out_dir.join(format!("cu_{c}_vertical.png")), &pair.vertical)?;
    if a.canvas {
        let (canvas, mask) = render_43_canvas(&pair)?;
        save_image(a.out_dir.join(format!("cu_{c}_canvas.png")), &canvas)?;
        save_image(a.out_dir.join(format!("cu_{c}_mask.png")), &mask)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    input: String,
    config: &'a RunConfig,
    ablations: Vec<&'static str>,
    fusion_weights: Option<[f64; 4]>,
    outputs: Vec<String>,
    shapes: Vec<(String, String)>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("saliency");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_forward(a: ForwardArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = a.input {
        cfg.io.input = Some(p);
    }
    if let Some(p) = a.output {
        cfg.io.output = Some(p);
    }
    if let Some(p) = a.params {
        cfg.io.params = Some(p);
    }
    for name in &a.ablations {
        cfg.ablation.set(name, true)?;
    }
    cfg.validate()?;
    let input = cfg.io.input.clone().ok_or_else(|| {
        Error::InvalidArgument("no input image (argument or io.input)".into())
    })?;
    let output = cfg.io.output.clone().ok_or_else(|| {
        Error::InvalidArgument("no output path (argument or io.output)".into())
    })?;

    let ep = load_equirect(&input)?;
    let mut model = Model::generate(cfg.seed, cfg.model.clone(), cfg.ablation)?;
    if let Some(dir) = &cfg.io.params {
        load_params(dir, &mut model.params)?;
    }
    let out = forward_with(&ep, &model, a.dump.is_some())?;

    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut written = vec![output.clone()];
    save_image(&output, &out.saliency)?;
    for (k, side) in omnisal::pipeline::FR_LEVELS.iter().zip(&out.sides) {
        let p = sibling(&output, &format!("_side{k}.png"));
        save_image(&p, side)?;
        written.push(p);
    }
    if let Some(dir) = &a.dump {
        create_dir(dir)?;
        for (name, t) in &out.intermediates {
            write_omt(dir.join(format!("{name}.omt")), t)?;
        }
    }
    let prov = Provenance {
        tool: "omnisal",
        version: env!("CARGO_PKG_VERSION"),
        input: input.display().to_string(),
        config: &cfg,
        ablations: cfg.ablation.active(),
        fusion_weights: out.weights.map(|w| w.0),
        outputs: written.iter().map(|p| p.display().to_string()).collect(),
        shapes: out
            .shapes
            .iter()
            .map(|(n, s)| (n.clone(), s.to_string()))
            .collect(),
    };
    let prov_path = sibling(&output, ".provenance.json");
    std::fs::write(&prov_path, serde_json::to_string_pretty(&prov)? + "\n")
        .with_context(|| format!("writing {}", prov_path.display()))?;
    Ok(())
}

fn image_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let rd = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.with_context(|| format!("reading {}", dir.display()))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm")) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            out.push((stem.to_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}

fn grayscale(t: Tensor) -> Tensor {
    if t.channels() == 1 {
        return t;
    }
    let n = t.channels() as f32;
    Tensor::from_fn(1, t.height(), t.width(), |_, y, x| {
        (0..t.channels()).map(|c| t.get(c, y, x)).sum::<f32>() / n
    })
}

#[derive(serde::Serialize)]
struct ImageRow<'a> {
    name: &'a str,
    #[serde(flatten)]
    report: EvalReport,
}

#[derive(serde::Serialize)]
struct DatasetReport<'a> {
    count: usize,
    mean: EvalReport,
    per_image: Vec<ImageRow<'a>>,
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let preds = image_files(&a.pred_dir)?;
    let gts: std::collections::BTreeMap<String, PathBuf> =
        image_files(&a.gt_dir)?.into_iter().collect();
    let pairs: Vec<(String, PathBuf, PathBuf)> = preds
        .into_iter()
        .filter_map(|(name, p)| gts.get(&name).map(|g| (name, p, g.clone())))
        .collect();
    if pairs.is_empty() {
        bail!(Error::InvalidArgument(format!(
            "no prediction in {} has a ground truth of the same name in {}",
            a.pred_dir.display(),
            a.gt_dir.display()
        )));
    }
    let reports: Vec<EvalReport> = pairs
        .par_iter()
        .map(|(name, p, g)| -> Result<EvalReport> {
            let s = SaliencyMap::from_tensor(&grayscale(load_image(p)?))?;
            let gt = GroundTruthMap::binarize(&grayscale(load_image(g)?), 0.5)?;
            evaluate(&s, &gt).with_context(|| format!("image `{name}`"))
        })
        .collect::<Result<_>>()?;
    let mean = EvalReport::mean(&reports).ok_or_else(|| anyhow!("no images"))?;
    let doc = DatasetReport {
        count: reports.len(),
        mean,
        per_image: pairs
            .iter()
            .zip(&reports)
            .map(|((name, _, _), r)| ImageRow { name, report: *r })
            .collect(),
    };
    std::fs::write(&a.report, serde_json::to_string_pretty(&doc)? + "\n")
        .with_context(|| format!("writing {}", a.report.display()))?;

    let csv_path = a.csv.unwrap_or_else(|| a.report.with_extension("csv"));
    let mut w = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    w.write_record(["name", "E_phi", "S_m", "wFbeta", "Fbeta", "MAE", "adaptive_threshold"])?;
    for row in &doc.per_image {
        let r = &row.report;
        let mut record = vec![row.name.to_owned()];
        record.extend(r.values().iter().chain([&r.adaptive_threshold]).map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(())
}

fn cmd_selftest(a: SelftestArgs) -> Result<ExitCode> {
    if a.list {
        for c in &selftest::CRITERIA {
            println!("{}", c.name);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let level = if a.full { Level::Full } else { Level::Quick };
    let outcomes = match &a.only {
        Some(name) => {
            let c = selftest::find(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion `{name}`")))?;
            let o = c.run(level);
            println!("{o}");
            vec![o]
        }
        None => selftest::run_all(level, |o| println!("{o}")),
    };
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SELFTEST)
    })
}

fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    if path.extension().and_then(|e| e.to_str()) == Some("omt") {
        write_omt(path, t)?;
    } else {
        save_image(path, t)?;
    }
    Ok(())
}

fn read_tensor(path: &Path) -> Result<Tensor> {
    Ok(if path.extension().and_then(|e| e.to_str()) == Some("omt") {
        read_omt(path)?
    } else {
        load_image(path)?
    })
}

fn fixture(cmd: FixtureCommand) -> Result<()> {
    match cmd {
        FixtureCommand::Generate {
            kind,
            output,
            height,
            channels,
            seed,
        } => {
            if height == 0 || !matches!(channels, 1 | 3) {
                bail!(Error::InvalidArgument(
                    "height must be positive and channels 1 or 3".into()
                ));
            }
            let t = match kind {
                FixtureKind::Smooth => fixtures::smooth_equirect(height, channels),
                FixtureKind::Blobs => fixtures::blob_equirect(height, channels, seed),
                FixtureKind::Forward => fixtures::forward_fixture(),
            };
            write_tensor(&output, &t)?;
        }
        FixtureCommand::Params {
            out_dir,
            config,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let model = Model::generate(cfg.seed, cfg.model, cfg.ablation)?;
            let m = dump_params(&out_dir, &model.params, Some(cfg.seed))?;
            println!("{} tensors written to {}", m.entries.len(), out_dir.display());
        }
        FixtureCommand::Inspect { file } => {
            let t = read_omt(&file)?;
            println!(
                "{}: {} min {} max {} mean {:.6}",
                file.display(),
                t.shape(),
                t.min(),
                t.max(),
                t.mean()
            );
        }
        FixtureCommand::Convert { input, output } => {
            let t = read_tensor(&input)?;
            write_tensor(&output, &t)?;
        }
    }
    Ok(())
}
