use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stoilow_cli::scenario::{Operation, Scenario, Settings, Task, DEFAULT_DEGREE_SAMPLES, DEFAULT_PROBES};
use stoilow_cli::{run_scenario, ParseError};
use stoilow_core::map::{parse_point, zoo};
use stoilow_core::C64;

#[derive(Parser, Debug)]
#[command(name = "stoilow", version, about = "Normal domains, path lifts, local degree and power-map charts for planar maps")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Grid cell size [default: 0.005]
    #[arg(long, global = true)]
    cell: Option<f64>,
    /// Lift tolerance, or residual tolerance for `factor`
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for report.json and figures
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Render one SVG per task
    #[arg(long, global = true)]
    svg: bool,
    /// Seed for all random probe sampling [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on the number of ray lifts [default: 64]
    #[arg(long = "max-lifts", global = true)]
    max_lifts: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and verify a normal domain U(x, f, r)
    Normal {
        #[arg(long)]
        map: String,
        #[arg(long, value_parser = point, allow_hyphen_values = true)]
        at: C64,
        /// Image radius; searched for when omitted
        #[arg(long, allow_hyphen_values = true)]
        radius: Option<f64>,
    },
    /// Lift a polyline in the image from a start point
    Lift {
        #[arg(long)]
        map: String,
        /// Center of the normal domain
        #[arg(long, value_parser = point, allow_hyphen_values = true, default_value = "0,0")]
        center: C64,
        #[arg(long, allow_hyphen_values = true)]
        radius: Option<f64>,
        /// Vertices `re,im;re,im;...`
        #[arg(long, value_parser = path, allow_hyphen_values = true)]
        path: PathArg,
        #[arg(long, value_parser = point, allow_hyphen_values = true)]
        from: C64,
    },
    /// All lifts of a radial ray from f(x)
    Raylifts {
        #[arg(long)]
        map: String,
        #[arg(long, value_parser = point, allow_hyphen_values = true)]
        at: C64,
        #[arg(long, value_parser = point, allow_hyphen_values = true, default_value = "1,0")]
        dir: C64,
        #[arg(long, allow_hyphen_values = true)]
        radius: Option<f64>,
    },
    /// Local degree on a probe circle
    Degree {
        #[arg(long)]
        map: String,
        #[arg(long, value_parser = point, allow_hyphen_values = true)]
        at: C64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, default_value_t = DEFAULT_DEGREE_SAMPLES)]
        samples: usize,
    },
    /// Detect branch points in a box
    Branch {
        #[arg(long)]
        map: String,
        /// `x0,y0,x1,y1`
        #[arg(long = "box", value_parser = bounds, allow_hyphen_values = true)]
        bounds: BoxArg,
    },
    /// Build the local power-map chart at a point
    Factor {
        #[arg(long)]
        map: String,
        #[arg(long, value_parser = point, allow_hyphen_values = true)]
        at: C64,
    },
    /// Check that preimage counts equal the local degree across a normal domain
    Conserve {
        #[arg(long)]
        map: String,
        #[arg(long, value_parser = point, allow_hyphen_values = true)]
        at: C64,
        #[arg(long, allow_hyphen_values = true)]
        radius: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        probes: usize,
    },
    /// Probe a box for openness and lightness violations
    Regularity {
        #[arg(long)]
        map: String,
        #[arg(long = "box", value_parser = bounds, allow_hyphen_values = true, default_value = "-0.5,-0.5,0.5,0.5")]
        bounds: BoxArg,
    },
    /// Run a scenario file
    Run { scenario: PathBuf },
    /// Built-in maps
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
}

#[derive(Subcommand, Debug)]
enum ZooAction {
    List,
}

#[derive(Clone, Debug)]
struct PathArg(Vec<C64>);

#[derive(Clone, Copy, Debug)]
struct BoxArg([f64; 4]);

fn point(s: &str) -> Result<C64, String> {
    parse_point(s).map_err(|e| e.to_string())
}

fn path(s: &str) -> Result<PathArg, String> {
    s.split(';').map(point).collect::<Result<Vec<_>, _>>().map(PathArg)
}

fn bounds(s: &str) -> Result<BoxArg, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
        .collect::<Result<_, _>>()?;
    <[f64; 4]>::try_from(v)
        .map(BoxArg)
        .map_err(|_| format!("expected `x0,y0,x1,y1`, got `{s}`"))
}

impl Global {
    fn apply(&self, scenario: &mut Scenario) {
        let s: &mut Settings = &mut scenario.settings;
        if let Some(c) = self.cell {
            s.cell = c;
        }
        if self.tol.is_some() {
            s.tol = self.tol;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(m) = self.max_lifts {
            s.max_lifts = m;
        }
        if self.out.is_some() {
            scenario.output = self.out.clone();
        }
        scenario.render |= self.svg;
    }
}

fn single(map: String, op: Operation) -> Scenario {
    Scenario {
        map,
        tasks: vec![Task::new(op)],
        output: None,
        render: false,
        settings: Settings::default(),
    }
}

fn build(cli: &Cli) -> Result<Option<Scenario>, ParseError> {
    let mut scenario = match &cli.command {
        Command::Run { scenario } => Scenario::load(scenario)?,
        Command::Zoo { .. } => return Ok(None),
        Command::Normal { map, at, radius } => single(map.clone(), Operation::Normal { at: *at, radius: *radius }),
        Command::Lift {
            map,
            center,
            radius,
            path,
            from,
        } => single(
            map.clone(),
            Operation::Lift {
                center: *center,
                radius: *radius,
                path: path.0.clone(),
                from: *from,
            },
        ),
        Command::Raylifts { map, at, dir, radius } => single(
            map.clone(),
            Operation::Raylifts {
                at: *at,
                dir: *dir,
                radius: *radius,
            },
        ),
        Command::Degree { map, at, rho, samples } => single(
            map.clone(),
            Operation::Degree {
                at: *at,
                rho: *rho,
                samples: *samples,
            },
        ),
        Command::Branch { map, bounds } => single(map.clone(), Operation::Branch { bounds: bounds.0 }),
        Command::Factor { map, at } => single(map.clone(), Operation::Factor { at: *at }),
        Command::Conserve {
            map,
            at,
            radius,
            probes,
        } => single(
            map.clone(),
            Operation::Conservation {
                at: *at,
                radius: *radius,
                probes: *probes,
            },
        ),
        Command::Regularity { map, bounds } => single(map.clone(), Operation::Regularity { bounds: bounds.0 }),
    };
    cli.global.apply(&mut scenario);
    scenario.validate()?;
    Ok(Some(scenario))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match build(&cli) {
        Ok(Some(s)) => s,
        Ok(None) => {
            for e in zoo() {
                let c = e.map.claims();
                println!(
                    "{:<14} light={} open={} discrete={} branch_points={}",
                    e.id,
                    c.light,
                    c.open,
                    c.discrete,
                    e.truth.branch_points.len()
                );
            }
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("stoilow: scenario error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = run_scenario(&scenario);
    print!("{}", run.report.to_json());
    if let Some(dir) = &scenario.output {
        if let Err(e) = run.write(dir) {
            eprintln!("stoilow: cannot write to {}: {e}", dir.display());
            return ExitCode::from(3);
        }
    }
    for entry in &run.report.results {
        if let Some(code) = entry.error_code() {
            eprintln!("stoilow: task {} ({}) failed: {code}", entry.index, entry.kind);
        }
    }
    if run.report.all_succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
