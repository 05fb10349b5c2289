use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use tristack_core::driver::{count_class, tricheck_run, witness_line, ModelSpec, ReportFormat, Verdict};
use tristack_core::litmus::{builtin_names, parse_template, render_litmus};
use tristack_core::mapping::emit_power;
use tristack_core::{
    builtin_suite, compile_test, emit_report, eval_hll, eval_uarch, expand_template, parse_isa, parse_litmus,
    parse_model_config, render_isa, Expect, LitmusTemplate, MappingId, McmVersion, ModelId,
};

#[derive(Parser)]
#[command(name = "tristack", version, about = "Check C11 litmus suites against RISC-V mappings and microarchitecture models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Expand a template suite into one litmus file per variant.
    Gen {
        /// Builtin suite name or template file.
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate litmus tests under the C11 model.
    Hll { files: Vec<PathBuf> },
    /// Compile litmus tests through a mapping.
    Compile {
        #[arg(long)]
        mapping: String,
        files: Vec<PathBuf>,
    },
    /// Evaluate compiled programs on a microarchitecture model.
    Uarch {
        /// Model id or model config file.
        #[arg(long)]
        model: String,
        #[arg(long)]
        mcm: String,
        #[arg(long)]
        witnesses: bool,
        files: Vec<PathBuf>,
    },
    /// Run a whole suite end to end and classify every variant.
    Check {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        mapping: String,
        /// Comma-separated model ids or config files, or `all`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        mcm: String,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        witnesses: bool,
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_BUGS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_suite(suite: &str) -> Result<(String, LitmusTemplate)> {
    if let Some(t) = builtin_suite().remove(suite) {
        return Ok((suite.to_string(), t));
    }
    let path = Path::new(suite);
    if path.is_file() {
        let tpl = parse_template(&read(path)?).with_context(|| format!("parsing {suite}"))?;
        return Ok((tpl.skeleton.name.clone(), tpl));
    }
    bail!("unknown suite `{suite}` (builtin: {})", builtin_names().join(", "))
}

fn load_model(spec: &str, mcm: McmVersion) -> Result<ModelSpec> {
    if let Ok(id) = ModelId::parse(spec) {
        return Ok(ModelSpec::preset(id, mcm));
    }
    let path = Path::new(spec);
    if path.is_file() {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec).to_string();
        let config = parse_model_config(&name, &read(path)?)?;
        return Ok(ModelSpec { name, mcm: mcm.as_str().to_string(), config });
    }
    bail!("unknown model `{spec}`")
}

fn load_models(list: &str, mcm: McmVersion) -> Result<Vec<ModelSpec>> {
    if list == "all" {
        return Ok(ModelId::ALL.iter().map(|&id| ModelSpec::preset(id, mcm)).collect());
    }
    list.split(',').map(|s| load_model(s.trim(), mcm)).collect()
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Gen { suite, out } => {
            let (_, tpl) = load_suite(&suite)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let variants = expand_template(&tpl);
            for v in &variants {
                let path = out.join(format!("{}.litmus", v.name));
                fs::write(&path, render_litmus(v)).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("wrote {} variants to {}", variants.len(), out.display());
            Ok(0)
        }
        Cmd::Hll { files } => {
            for f in files {
                let t = parse_litmus(&read(&f)?).with_context(|| format!("parsing {}", f.display()))?;
                let h = eval_hll(&t)?;
                let verdict = match h.target {
                    Expect::Permitted => "permitted",
                    Expect::Forbidden => "forbidden",
                };
                println!("{}: {verdict} ({} consistent outcomes)", t.name, h.outcomes.len());
            }
            Ok(0)
        }
        Cmd::Compile { mapping, files } => {
            let id = MappingId::parse(&mapping)?;
            for f in files {
                let t = parse_litmus(&read(&f)?).with_context(|| format!("parsing {}", f.display()))?;
                if id == MappingId::PowerLeadingSync {
                    print!("{}", emit_power(&t));
                } else {
                    print!("{}", render_isa(&compile_test(&t, id)?));
                }
            }
            Ok(0)
        }
        Cmd::Uarch { model, mcm, witnesses, files } => {
            let spec = load_model(&model, McmVersion::parse(&mcm)?)?;
            for f in files {
                let p = parse_isa(&read(&f)?).with_context(|| format!("parsing {}", f.display()))?;
                let o = eval_uarch(&p, &spec.config)?;
                println!("{}: {}", p.name, if o.observable { "observable" } else { "unobservable" });
                if let (true, Some(w)) = (witnesses, &o.witness) {
                    println!("witness: {}", witness_line(w));
                }
            }
            Ok(0)
        }
        Cmd::Check { suite, mapping, model, mcm, jobs, witnesses, format, out } => {
            let (name, tpl) = load_suite(&suite)?;
            let id = MappingId::parse(&mapping)?;
            if id == MappingId::PowerLeadingSync {
                bail!("mapping {id} is emission-only");
            }
            let models = load_models(&model, McmVersion::parse(&mcm)?)?;
            let fmt = ReportFormat::parse(&format).ok_or_else(|| anyhow!("unknown format `{format}`"))?;
            let results = tricheck_run(&name, &tpl, id, &models, witnesses, jobs)?;
            let report = emit_report(&results, fmt);
            match out {
                Some(p) => fs::write(&p, report).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{report}"),
            }
            Ok(if count_class(&results, Verdict::Bug) > 0 {
                EXIT_BUGS
            } else if count_class(&results, Verdict::Inconclusive) > 0 {
                EXIT_INCONCLUSIVE
            } else {
                0
            })
        }
    }
}
