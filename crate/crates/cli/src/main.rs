use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use dana::pageio::{self, Dataset, PageLayoutConfig};
use dana::planner::{self, AcceleratorPlan, DatasetMeta, FpgaSpec};
use dana::runtime::{self, TrainOptions};
use dana::{dsl, strider, translator};

#[derive(Parser)]
#[command(name = "dana", version, about = "Compile learning UDFs to a simulated in-database accelerator and train on page files")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pack a CSV file into page files.
    GenData(GenData),
    /// Compile a UDF into an accelerator plan directory.
    Compile(Compile),
    /// Train on a dataset with a compiled plan.
    Run(Run),
    /// Estimate cycles of a plan on a dataset.
    Estimate(Estimate),
    /// Show parts of a compiled plan.
    Inspect(Inspect),
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = ["4", "8"])]
    value_width: Option<String>,
    #[arg(long)]
    page_size: Option<usize>,
    /// The first CSV row is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct Compile {
    #[arg(long)]
    udf: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    /// FPGA spec; defaults apply to missing keys or a missing file.
    #[arg(long)]
    fpga: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Tuple count to plan for (default: 64 full pages).
    #[arg(long)]
    tuples: Option<usize>,
}

#[derive(Args)]
struct Run {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Feed tuples from the host instead of the striders.
    #[arg(long)]
    no_strider: bool,
    /// Host cycles per tuple in --no-strider mode.
    #[arg(long, default_value_t = 150)]
    handoff_penalty: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Model CSV output (default: stdout).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_epochs: usize,
    /// Shuffle page order per epoch with this seed.
    #[arg(long)]
    shuffle: Option<u64>,
    #[arg(long)]
    pool_bytes: Option<u64>,
}

#[derive(Args)]
struct Estimate {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct Inspect {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    strider: bool,
    #[arg(long)]
    schedule: bool,
    #[arg(long)]
    micro: bool,
    #[arg(long)]
    hdfg: bool,
    /// Every design point considered.
    #[arg(long)]
    designs: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cli: {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cli: {}", path.display()))
}

fn module<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> anyhow::Error {
    move |e| anyhow!("{name}: {e}")
}

fn load_layout(path: &Path) -> Result<PageLayoutConfig> {
    PageLayoutConfig::from_kv(&read(path)?).map_err(module("pageio"))
}

fn load_plan(dir: &Path) -> Result<AcceleratorPlan> {
    planner::load_plan(dir).map_err(module("planner"))
}

fn gen_data(a: GenData) -> Result<()> {
    let mut layout = load_layout(&a.layout)?;
    if let Some(w) = a.value_width {
        layout = layout.with_value_width(w.parse()?);
    }
    if let Some(p) = a.page_size {
        layout = layout.with_page_size(p);
    }
    let m = pageio::ingest_csv(&a.csv, &layout, &a.out, a.header).map_err(module("pageio"))?;
    println!("{} tuples in {} pages ({} per page) -> {}", m.tuple_count, m.page_count, m.tuples_per_page, a.out.display());
    Ok(())
}

fn compile(a: Compile) -> Result<()> {
    let source = read(&a.udf)?;
    let layout = load_layout(&a.layout)?;
    let fpga = match &a.fpga {
        Some(p) => FpgaSpec::from_kv(&read(p)?).map_err(module("planner"))?,
        None => FpgaSpec::default(),
    };
    let typed = dsl::compile(&source).map_err(|e| anyhow!("dsl: {}", e.render(&a.udf.display().to_string())))?;
    let g = translator::build_hdfg(&typed).map_err(module("translator"))?;
    let meta = match a.tuples {
        Some(n) => DatasetMeta::new(&layout, n),
        None => DatasetMeta::nominal(&layout),
    };
    let plan = planner::select_design(&source, &g, &layout, &fpga, &meta).map_err(module("planner"))?;
    planner::write_plan(&plan, &a.out).map_err(module("planner"))?;
    let d = &plan.design;
    println!(
        "{}: {} threads x {} ACs, {} page buffers, update {} cycles, estimated {} cycles -> {}",
        plan.name,
        d.threads,
        d.acs_per_thread,
        d.page_buffers,
        d.update_cycles,
        d.estimate.total_cycles,
        a.out.display()
    );
    Ok(())
}

fn run(a: Run) -> Result<()> {
    let plan = load_plan(&a.plan)?;
    let data = Dataset::open(&a.data).map_err(module("pageio"))?;
    let mut opts = TrainOptions {
        no_strider: a.no_strider,
        handoff_penalty: a.handoff_penalty,
        max_epochs: a.max_epochs,
        shuffle_seed: a.shuffle,
        ..TrainOptions::default()
    };
    if let Some(b) = a.pool_bytes {
        opts.pool_bytes = b;
    }
    let out = runtime::train(&plan, &data, &opts).map_err(module("runtime"))?;
    let g = plan.graph().map_err(module("planner"))?;
    let csv = runtime::model_csv(&g, &out.model);
    match &a.model {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    let r = &out.report;
    match &a.report {
        Some(p) => {
            write(p, &r.to_kv())?;
            write(&p.with_extension("epochs.csv"), &r.epochs_csv())?;
        }
        None => eprintln!("epochs {} total_cycles {} seconds {:.6}", r.epochs, r.total_cycles, r.seconds),
    }
    Ok(())
}

fn estimate(a: Estimate) -> Result<()> {
    let plan = load_plan(&a.plan)?;
    let data = Dataset::open(&a.data).map_err(module("pageio"))?;
    if data.manifest.fingerprint != plan.fingerprint {
        return Err(anyhow!("runtime: dataset layout {} does not match plan layout {}", data.manifest.fingerprint, plan.fingerprint));
    }
    let meta = DatasetMeta::new(&plan.layout, data.manifest.tuple_count);
    let e = plan.estimate_for(&meta).map_err(module("planner"))?;
    print!("{}", e.to_kv());
    Ok(())
}

fn inspect(a: Inspect) -> Result<()> {
    let plan = load_plan(&a.plan)?;
    let any = a.strider || a.schedule || a.micro || a.hdfg || a.designs;
    if a.strider {
        print!("{}", strider::disassemble(&plan.strider));
    }
    if a.schedule {
        print!("{}", plan.schedules.per_tuple.occupancy_csv());
    }
    if a.micro {
        print!("{}", plan.programs.per_tuple.listing());
    }
    if a.hdfg {
        let g = plan.graph().map_err(module("planner"))?;
        println!("{}", translator::dump(&g));
    }
    if a.designs {
        print!("{}", plan.menu_table());
    }
    if !any {
        println!("{}", serde_json::to_string_pretty(&plan.design)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::GenData(a) => gen_data(a),
        Cmd::Compile(a) => compile(a),
        Cmd::Run(a) => run(a),
        Cmd::Estimate(a) => estimate(a),
        Cmd::Inspect(a) => inspect(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dana: {e:#}");
            ExitCode::FAILURE
        }
    }
}
