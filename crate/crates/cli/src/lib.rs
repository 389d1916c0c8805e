//! `psqkd`: run sessions, reproduce the reference table, print the sift
//! table and re-check saved transcripts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pathspin_qkd::adversary::{qber, EveModel, QberEstimate};
use pathspin_qkd::optics::{setting_distribution, support, OutcomePair, PhaseSetting, SpinBasis, StateLabel};
use pathspin_qkd::protocol::{
    load_transcript, run_session, run_session_parallel, save_transcript, sift, AlicePolicy,
    BasisMode, SessionConfig, SessionSummary, Transcript, Verdict,
};
use pathspin_qkd::security::{
    reproduction_table, table_csv, verify_table, Frame, FrameSelection, SecurityReport,
    SecurityOptions, TABLE_TOL,
};

pub const DEFAULT_TRANSCRIPT: &str = "session.qkdlog";

/// Process exit status for completed commands. Operational errors exit 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Insecure = 2,
}

#[derive(Parser, Debug)]
#[command(name = "psqkd", version, about = "Path-spin QKD simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a session, write its transcript and run the security check.
    Run(RunArgs),
    /// Print the (p, M, eta1, eta2) reference table as CSV.
    Table(TableArgs),
    /// Print outcome distributions and verdicts for all 16 preparations and settings.
    SiftTable(SiftTableArgs),
    /// Re-run the security check on a saved transcript.
    Check(CheckArgs),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// TOML session config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Four comma-separated weights, `uniform`, or `family:P`.
    #[arg(long, value_parser = parse_alice)]
    pub alice_weights: Option<AlicePolicy>,
    #[arg(long, value_enum)]
    pub basis_mode: Option<BasisModeArg>,
    /// `none` or `ir:<0|pi/2>:<z|y>[:fraction]`.
    #[arg(long, value_parser = parse_eve)]
    pub eve: Option<EveModel>,
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[arg(long)]
    pub min_aborts: Option<u64>,
    /// Transcript path (default `session.qkdlog`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for round generation; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Default)]
pub struct TableArgs {
    /// Fail unless every cell is within 0.01 of the reference values.
    #[arg(long)]
    pub verify: bool,
    /// Also write the CSV to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SiftTableArgs {
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub transcript: PathBuf,
    /// Defaults to the frame recorded in the transcript.
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[arg(long)]
    pub min_aborts: Option<u64>,
    /// Also regenerate the session from its seed and compare.
    #[arg(long)]
    pub replay: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisModeArg {
    IndependentUniform,
    AlwaysZ,
}

impl From<BasisModeArg> for BasisMode {
    fn from(m: BasisModeArg) -> Self {
        match m {
            BasisModeArg::IndependentUniform => BasisMode::IndependentUniform,
            BasisModeArg::AlwaysZ => BasisMode::AlwaysZ,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    AbInitio,
    Paper,
    Both,
}

impl From<FrameArg> for FrameSelection {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::AbInitio => FrameSelection::AbInitio,
            FrameArg::Paper => FrameSelection::PaperFormula,
            FrameArg::Both => FrameSelection::Both,
        }
    }
}

pub fn parse_alice(s: &str) -> Result<AlicePolicy, String> {
    let s = s.trim();
    if s == "uniform" {
        return Ok(AlicePolicy::uniform());
    }
    if let Some(p) = s.strip_prefix("family:") {
        let p: f64 = p.trim().parse().map_err(|e| format!("bad family parameter: {e}"))?;
        return AlicePolicy::family(p).map_err(|e| e.to_string());
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad weight: {e}"))?;
    let w: [f64; 4] = parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 weights, got {}", v.len()))?;
    AlicePolicy::new(w).map_err(|e| e.to_string())
}

pub fn parse_eve(s: &str) -> Result<EveModel, String> {
    let s = s.trim().to_ascii_lowercase();
    if s == "none" {
        return Ok(EveModel::None);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let (phi, basis, fraction) = match parts.as_slice() {
        ["ir", phi, basis] => (*phi, *basis, 1.0),
        ["ir", phi, basis, f] => (*phi, *basis, f.parse::<f64>().map_err(|e| format!("bad fraction: {e}"))?),
        _ => return Err(format!("expected `none` or `ir:<0|pi/2>:<z|y>[:fraction]`, got `{s}`")),
    };
    let phi_e = match phi {
        "0" => PhaseSetting::Zero,
        "pi/2" | "half_pi" => PhaseSetting::HalfPi,
        other => return Err(format!("phase must be 0 or pi/2, got `{other}`")),
    };
    let basis_e = match basis {
        "z" => SpinBasis::Z,
        "y" => SpinBasis::Y,
        other => return Err(format!("basis must be z or y, got `{other}`")),
    };
    let eve = EveModel::InterceptResend {
        phi_e,
        basis_e,
        fraction,
    };
    eve.validate().map_err(|e| e.to_string())?;
    Ok(eve)
}

pub fn load_config(path: &Path) -> Result<SessionConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Config file (or defaults) with command-line overrides applied.
pub fn session_config(args: &RunArgs) -> Result<SessionConfig> {
    let mut c = match &args.config {
        Some(p) => load_config(p)?,
        None => SessionConfig::default(),
    };
    if let Some(v) = args.rounds {
        c.n_rounds = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.alice_weights {
        c.alice_weights = v;
    }
    if let Some(v) = args.basis_mode {
        c.basis_mode = v.into();
    }
    if let Some(v) = args.eve {
        c.eve = v;
    }
    if let Some(v) = args.frame {
        c.frame = v.into();
    }
    if let Some(v) = args.min_aborts {
        c.min_aborts = v;
    }
    if let Some(v) = &args.out {
        c.out = Some(v.clone());
    }
    c.validate()?;
    Ok(c)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Status> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Table(a) => cmd_table(a, out),
        Command::SiftTable(a) => cmd_sift_table(a, out),
        Command::Check(a) => cmd_check(a, out),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    transcript: &'a Path,
    seed: u64,
    summary: &'a SessionSummary,
    qber: Option<QberEstimate>,
    security: &'a SecurityReport,
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<Status> {
    let config = session_config(args)?;
    let t = if args.jobs == 1 {
        run_session(&config)?
    } else {
        run_session_parallel(&config, args.jobs)?
    };
    let path = config.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_TRANSCRIPT));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    save_transcript(&t, BufWriter::new(file))?;

    let report = t.security_report()?;
    let q = qber(&t).ok();
    if args.json {
        let s = RunSummary {
            transcript: &path,
            seed: t.seed(),
            summary: &t.summary,
            qber: q,
            security: &report,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
    } else {
        writeln!(out, "transcript      {}", path.display())?;
        write_session(out, &t, q)?;
        write_report(out, &report, config.frame)?;
    }
    Ok(verdict(&report))
}

fn verdict(r: &SecurityReport) -> Status {
    if r.secure {
        Status::Success
    } else {
        Status::Insecure
    }
}

fn write_session(out: &mut dyn Write, t: &Transcript, q: Option<QberEstimate>) -> Result<()> {
    let s = &t.summary;
    writeln!(out, "seed            {}", t.seed())?;
    writeln!(out, "rounds          {}", s.n_rounds)?;
    writeln!(out, "kept            {} (keep fraction {:.6})", s.kept, s.keep_fraction)?;
    writeln!(out, "key length      {}", s.key_length)?;
    writeln!(out, "decode errors   {}", s.decode_errors)?;
    let counts: Vec<String> = StateLabel::ALL
        .iter()
        .map(|l| format!("{l}={}", s.abort_counts[l.index()]))
        .collect();
    writeln!(out, "aborted         {} ({})", s.aborted, counts.join(" "))?;
    match q {
        Some(q) => writeln!(
            out,
            "QBER            {:.6} ± {:.6} ({}/{})",
            q.rate, q.three_sigma, q.mismatches, q.kept
        )?,
        None => writeln!(out, "QBER            n/a (no kept rounds)")?,
    }
    Ok(())
}

fn write_report(out: &mut dyn Write, r: &SecurityReport, frame: FrameSelection) -> Result<()> {
    let name = |f: Frame| match f {
        Frame::AbInitio => "ab_initio",
        Frame::PaperFormula => "paper_formula",
    };
    writeln!(out, "lambda, mu      {:.6}, {:.6} ({})", r.lambda, r.mu, name(r.frame))?;
    let x = &r.cross_check;
    match frame {
        FrameSelection::AbInitio => writeln!(out, "M ab_initio     {:.6}", x.ab_initio_m)?,
        FrameSelection::PaperFormula => writeln!(out, "M paper_formula {:.6}", x.paper_formula_m)?,
        FrameSelection::Both => {
            writeln!(out, "M paper_formula {:.6}", x.paper_formula_m)?;
            writeln!(out, "M ab_initio     {:.6}", x.ab_initio_m)?;
            writeln!(out, "|ΔM|            {:.3e}", x.m_difference)?;
            writeln!(out, "TᵀT divergence  {:.3e}", x.gram_divergence)?;
            if x.divergent {
                writeln!(out, "warning         frames disagree on M")?;
            }
        }
    }
    writeln!(out, "eta1, eta2      {:.6}, {:.6}", r.eta1, r.eta2)?;
    writeln!(out, "verdict         {}", if r.secure { "SECURE" } else { "INSECURE" })?;
    Ok(())
}

pub fn cmd_table(args: &TableArgs, out: &mut dyn Write) -> Result<Status> {
    let rows = reproduction_table();
    let csv = table_csv(&rows);
    out.write_all(csv.as_bytes())?;
    if let Some(path) = &args.out {
        std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    if args.verify {
        let bad = verify_table(&rows, TABLE_TOL);
        if !bad.is_empty() {
            let detail: Vec<String> = bad
                .iter()
                .map(|m| format!("row {} {}: {} vs {}", m.row, m.column, m.computed, m.reference))
                .collect();
            bail!("table differs from reference: {}", detail.join("; "));
        }
    }
    Ok(Status::Success)
}

#[derive(Serialize)]
struct SiftRow {
    label: StateLabel,
    phi: PhaseSetting,
    basis: SpinBasis,
    distribution: [f64; 4],
    support: Vec<OutcomePair>,
    verdict: Verdict,
}

/// Rows in label, phase, basis order. The verdict is read off the
/// distribution: two-outcome support means the setting discriminates.
fn sift_rows() -> Result<Vec<SiftRow>> {
    let mut rows = Vec::with_capacity(16);
    for label in StateLabel::ALL {
        for phi in PhaseSetting::ALL {
            for basis in SpinBasis::ALL {
                let distribution = setting_distribution(label, phi, basis);
                let support = support(&distribution);
                let verdict = if support.len() == 2 {
                    Verdict::Keep
                } else {
                    Verdict::Abort
                };
                if verdict != sift(label.group(), phi, basis) {
                    bail!("optics and sift rule disagree at ({label}, {phi}, {basis})");
                }
                rows.push(SiftRow {
                    label,
                    phi,
                    basis,
                    distribution,
                    support,
                    verdict,
                });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_sift_table(args: &SiftTableArgs, out: &mut dyn Write) -> Result<Status> {
    let rows = sift_rows()?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
        return Ok(Status::Success);
    }
    writeln!(out, "state  phi  basis  P(T′,s0) P(T′,s1) P(R′,s0) P(R′,s1)  decision  support")?;
    for r in &rows {
        let sup: Vec<&str> = r.support.iter().map(|o| o.label(r.basis)).collect();
        let d = r.distribution;
        writeln!(
            out,
            "{:<5}  {:<3}  {:<5}  {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {:<8}  {}",
            r.label.to_string(),
            r.phi.to_string(),
            r.basis.to_string(),
            d[0],
            d[1],
            d[2],
            d[3],
            match r.verdict {
                Verdict::Keep => "KEEP",
                Verdict::Abort => "ABORT",
            },
            if r.verdict == Verdict::Keep {
                sup.join(" ")
            } else {
                "uniform".into()
            }
        )?;
    }
    Ok(Status::Success)
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    transcript: &'a Path,
    seed: u64,
    qber: Option<QberEstimate>,
    security: &'a SecurityReport,
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<Status> {
    let file = File::open(&args.transcript)
        .with_context(|| format!("opening {}", args.transcript.display()))?;
    let t = load_transcript(BufReader::new(file))
        .with_context(|| format!("reading {}", args.transcript.display()))?;
    if args.replay {
        t.verify_replay()?;
    }
    let frame = args.frame.map(FrameSelection::from).unwrap_or(t.config.frame);
    let opts = SecurityOptions {
        frame,
        min_aborts: args.min_aborts.unwrap_or(t.config.min_aborts),
    };
    let report = t.security_report_with(&opts)?;
    let q = qber(&t).ok();
    if args.json {
        let s = CheckSummary {
            transcript: &args.transcript,
            seed: t.seed(),
            qber: q,
            security: &report,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
    } else {
        writeln!(out, "transcript      {}", args.transcript.display())?;
        write_session(out, &t, q)?;
        write_report(out, &report, frame)?;
    }
    Ok(verdict(&report))
}
