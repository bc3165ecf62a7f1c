//! `crossmap`: batch transforms, style transfer, listening-study bundles, and
//! the session service.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or parse failure.

use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crossmap::catalog::{is_image_path, is_music_path, load_image, load_music, AssetError, Catalog, Role};
use crossmap::image::{image_transform, write_pnm, RasterImage};
use crossmap::midi::write_midi;
use crossmap::music::NoteList;
use crossmap::notes_json::write_notes_json;
use crossmap::study::{
    generate_ab_trials, generate_style_trials, read_keys, read_responses, score, write_bundles, StudyError, TrialKind,
    KEYS_FILE,
};
use crossmap::transforms::{apply_music_transform, TransformError, TransformKind, TransformSpec, DEFAULT_THETA};
use crossmap::workflow::{stylize, WorkflowError};
use crossmap_service::{ready_line, serve_until, Config, ServiceError, ENV_DATA, ENV_SESSIONS};

#[derive(Parser)]
#[command(name = "crossmap", version, about = "Paired image/music transformations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brightness or contrast on a piece (.mid/.notes) or an image (.pgm/.ppm).
    Transform(TransformArgs),
    /// Fuse a sketch/melody pair with an image/accompaniment pair.
    Stylize(StylizeArgs),
    /// Generate or score listening-study bundles.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TransformArgs {
    /// brightness or contrast
    #[arg(long)]
    kind: String,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Paired image, transformed alongside a music input and written next to
    /// `--out` under the same stem.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Accept alpha outside [-1, 1].
    #[arg(long)]
    allow_wide: bool,
}

#[derive(Args)]
struct StylizeArgs {
    #[arg(long)]
    melody: PathBuf,
    #[arg(long)]
    accomp: PathBuf,
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long)]
    style: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Write n trial bundles plus keys.csv.
    Gen(GenArgs),
    /// Score a responses CSV against a bundle directory's keys.
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Data directory holding catalog.json, or the catalog file itself.
    #[arg(long)]
    catalog: PathBuf,
    /// brightness, contrast, or style
    #[arg(long)]
    kind: String,
    /// Ignored for style trials.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    bundles: PathBuf,
    /// CSV with trial_id, subject_id, chosen_index.
    #[arg(long)]
    responses: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = ENV_DATA, default_value = "data")]
    data: PathBuf,
    #[arg(long, env = ENV_SESSIONS, default_value = "sessions")]
    sessions: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    fn io(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        Failure::validation(e)
    }
}

impl From<AssetError> for Failure {
    fn from(e: AssetError) -> Self {
        Failure::io(e)
    }
}

impl From<WorkflowError> for Failure {
    fn from(e: WorkflowError) -> Self {
        Failure::validation(e)
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Io { .. } | StudyError::Csv(_) | StudyError::Image(_) => Failure::io(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Validation(_) | ServiceError::Conflict(_) | ServiceError::NotFound(_) => Failure::validation(e),
            _ => Failure::io(e),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn music_bytes(notes: &NoteList, path: &Path) -> Result<Vec<u8>, Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mid" | "midi") => Ok(write_midi(notes)),
        Some("notes" | "json") => Ok(write_notes_json(notes).into_bytes()),
        _ => Err(Failure::validation(format!("{}: output must be .mid or .notes", path.display()))),
    }
}

fn image_out_path(out: &Path, img: &RasterImage) -> PathBuf {
    out.with_extension(if img.channels() == 1 { "pgm" } else { "ppm" })
}

fn parse_kind<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::validation)
}

fn cmd_transform(args: TransformArgs) -> Result<(), Failure> {
    let kind: TransformKind = parse_kind(&args.kind)?;
    let spec = TransformSpec { kind, alpha: args.alpha };
    spec.validate(args.allow_wide)?;

    if is_music_path(&args.input) {
        let notes = load_music(&args.input)?;
        let out = apply_music_transform(&notes, &spec, DEFAULT_THETA)?;
        write_file(&args.out, &music_bytes(&out, &args.out)?)?;
        let mut summary = format!("{kind} alpha={} notes={}->{}", args.alpha, notes.len(), out.len());
        if let Some(path) = &args.image {
            let img = load_image(path)?;
            let moved = image_transform(&img, &spec)?;
            let target = image_out_path(&args.out, &moved);
            write_file(&target, &write_pnm(&moved))?;
            summary += &format!(" pixels={} image={}", img.width() * img.height(), target.display());
        }
        println!("{summary}");
    } else if is_image_path(&args.input) {
        if args.image.is_some() {
            return Err(Failure::validation("--image pairs with a music input"));
        }
        let img = load_image(&args.input)?;
        let out = image_transform(&img, &spec)?;
        write_file(&args.out, &write_pnm(&out))?;
        println!(
            "{kind} alpha={} pixels={} channels={}",
            args.alpha,
            img.width() * img.height(),
            img.channels()
        );
    } else {
        return Err(Failure::io(format!("{}: unrecognized input type", args.input.display())));
    }
    Ok(())
}

fn cmd_stylize(args: StylizeArgs) -> Result<(), Failure> {
    use crossmap::study::StimulusPair;
    let content = StimulusPair {
        id: "melody".into(),
        image: load_image(&args.sketch)?,
        music: load_music(&args.melody)?,
    };
    let style = StimulusPair {
        id: "accompaniment".into(),
        image: load_image(&args.style)?,
        music: load_music(&args.accomp)?,
    };
    let fused = stylize(&content, &style)?;
    write_file(&args.out_dir.join("fused_image.ppm"), &fused.image_bytes())?;
    write_file(&args.out_dir.join("fused_music.mid"), &fused.music_bytes())?;
    println!(
        "stylized notes={} image={}x{} out={}",
        fused.music.len(),
        fused.image.width(),
        fused.image.height(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_study_gen(args: GenArgs) -> Result<(), Failure> {
    let kind: TrialKind = parse_kind(&args.kind)?;
    let dir = if args.catalog.is_file() {
        args.catalog.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        args.catalog.clone()
    };
    let catalog = Catalog::load(&dir).map_err(Failure::io)?;
    for (id, reason) in &catalog.rejected {
        eprintln!("warning: catalog entry {id} excluded: {reason}");
    }
    let trials = match kind {
        TrialKind::Style => generate_style_trials(
            &catalog.pairs(Role::SketchMelody),
            &catalog.pairs(Role::ImageAccompaniment),
            args.n,
            args.seed,
        )?,
        TrialKind::Brightness | TrialKind::Contrast => {
            let spec = TransformSpec {
                kind: if kind == TrialKind::Brightness {
                    TransformKind::Brightness
                } else {
                    TransformKind::Contrast
                },
                alpha: args.alpha,
            };
            let mut pairs = catalog.pairs(Role::SketchMelody);
            pairs.extend(catalog.pairs(Role::ImageAccompaniment));
            generate_ab_trials(&pairs, spec, args.n, args.seed)?
        }
    };
    write_bundles(&trials, &args.out)?;
    println!("generated {} {kind} trials in {}", trials.len(), args.out.display());
    Ok(())
}

fn cmd_study_score(args: ScoreArgs) -> Result<(), Failure> {
    let keys = read_keys(&args.bundles.join(KEYS_FILE))?;
    let responses = read_responses(&args.responses)?;
    for row in score(&responses, &keys)? {
        println!("{row}");
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let config = Config {
        addr: SocketAddr::new(args.host, args.port),
        data_dir: args.data,
        sessions_dir: args.sessions,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::io)?;
    runtime.block_on(serve_until(
        &config,
        |addr| println!("{}", ready_line(addr)),
        async {
            let _ = tokio::signal::ctrl_c().await;
        },
    ))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Transform(a) => cmd_transform(a),
        Command::Stylize(a) => cmd_stylize(a),
        Command::Study(StudyCommand::Gen(a)) => cmd_study_gen(a),
        Command::Study(StudyCommand::Score(a)) => cmd_study_score(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
