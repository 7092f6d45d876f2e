//! Command-line front end for training, evaluating and checking the
//! federated DQN resource allocator.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedrl::experiment::{
    default_workers, load_checkpoints, load_run_config, parallel_map, read_metrics_csv, run_evaluation,
    run_sweep, run_training_with, summarize, write_run, write_sweep_csv, ExperimentConfig, GreedyPolicy,
    OraclePolicy, Scheme, METRICS_FILE,
};
use fedrl::nn::{gradient_check, MlpSpec};
use fedrl::oracle::{assign_brute_force, assign_hungarian, comm_cost_crl, comm_cost_frl};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "fedrl", version, about = "Federated multi-agent DQN for uplink OFDMA resource allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed and write metrics, manifest, audit log and checkpoints.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory; each seed gets a `seed_<n>` subdirectory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Print a progress line every this many epochs (0 = quiet).
        #[arg(long, default_value_t = 0)]
        progress: usize,
    },
    /// Evaluate trained checkpoints greedily on random UE placements.
    Eval {
        /// Run directory written by `train` (one `seed_<n>` directory).
        #[arg(long)]
        run: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Evaluate the centralized assignment instead of checkpoints.
        #[arg(long)]
        oracle: bool,
        /// Use the low-noise scenario (-110 dBm).
        #[arg(long)]
        low_noise: bool,
        /// Write the full per-distribution report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train and evaluate for several averaging counts.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Averaging counts to sweep; 0 is the MARL baseline.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 1, 2, 4, 8])]
        averaging_list: Vec<usize>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare backpropagation with central finite differences.
    Gradcheck {
        #[arg(long, value_delimiter = ',', default_values_t = vec![3usize, 8, 4])]
        layers: Vec<usize>,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
    /// Cross-check the Hungarian solver against exhaustive search.
    OracleBench {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Uplink communication cost of centralized and federated training.
    CommCost {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Trend summary of one or more metrics files or run directories.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Config source plus per-field overrides; flags are named after config fields.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Named preset: full or desk.
    #[arg(long)]
    preset: Option<String>,
    /// TOML config file (applied instead of a preset).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    averaging_times: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eval_distributions: Option<usize>,
    #[arg(long)]
    eval_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    hidden_layers: Option<Vec<usize>>,
    #[arg(long, allow_hyphen_values = true)]
    noise_dbm: Option<f64>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    gamma_min: Option<f64>,
    #[arg(long)]
    reward_scale: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    target_sync_period: Option<u64>,
    #[arg(long)]
    replay_capacity: Option<usize>,
    #[arg(long)]
    epsilon_anneal_epochs: Option<usize>,
}

impl ConfigArgs {
    fn resolve_from(&self, fallback: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset, fallback) {
            (Some(_), Some(_), _) => bail!("--config and --preset are mutually exclusive"),
            (Some(path), None, _) => ExperimentConfig::load(path)?,
            (None, Some(name), _) => ExperimentConfig::preset(name)?,
            (None, None, Some(cfg)) => cfg,
            (None, None, None) => ExperimentConfig::default(),
        };
        if let Some(s) = self.scheme {
            cfg = cfg.with_scheme(s);
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone(); })*
            };
        }
        set!(
            epochs => epochs,
            averaging_times => averaging_times,
            seeds => seeds,
            eval_distributions => eval_distributions,
            eval_seed => eval_seed,
            hidden_layers => hidden_layers,
            noise_dbm => network.noise_dbm,
            steps_per_epoch => network.steps_per_epoch,
            gamma_min => network.gamma_min,
            reward_scale => network.reward_scale,
            lr => train.lr,
            momentum => train.momentum,
            discount => train.discount,
            batch_size => train.batch_size,
            target_sync_period => train.target_sync_period,
            replay_capacity => train.replay_capacity,
            epsilon_anneal_epochs => train.epsilon_anneal_epochs,
        );
        Ok(cfg)
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        let cfg = self.resolve_from(None)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn train(cfg: &ExperimentConfig, out: &Path, workers: usize, progress: usize) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string())?;
    let results = parallel_map(&cfg.seeds, workers, |&seed| -> Result<String> {
        let start = Instant::now();
        let run = run_training_with(cfg, seed, |r| {
            if progress > 0 && (r.epoch + 1) % progress == 0 {
                eprintln!("seed {seed} epoch {} reward {:.4} ee {:.4e}", r.epoch + 1, r.mean_reward, r.system_ee);
            }
        })?;
        let dir = seed_dir(out, seed);
        write_run(&run, &dir)?;
        let s = summarize(&run.metrics);
        Ok(format!(
            "{} seed {seed}: reward {:.4} -> {:.4}, final loss {}, {} averaging rounds, {:.1}s -> {}",
            cfg.scheme,
            s.early_reward,
            s.final_reward,
            s.final_loss.map_or("n/a".into(), |l| format!("{l:.4e}")),
            run.events.len(),
            start.elapsed().as_secs_f64(),
            dir.display()
        ))
    });
    for r in results {
        println!("{}", r?);
    }
    Ok(())
}

fn eval(run: Option<&Path>, args: &ConfigArgs, oracle: bool, low_noise: bool, json: Option<&Path>) -> Result<()> {
    let fallback = run.map(load_run_config).transpose()?;
    let mut cfg = args.resolve_from(fallback)?;
    if low_noise {
        cfg = cfg.low_noise();
    }
    cfg.network.validate()?;
    let report = if oracle {
        run_evaluation(&OraclePolicy, &cfg)?
    } else {
        let Some(dir) = run else { bail!("--run is required unless --oracle is given") };
        let nets = load_checkpoints(dir, &cfg)?;
        run_evaluation(&GreedyPolicy { nets: &nets }, &cfg)?
    };
    println!("distribution,env_seed,mean_ee,mean_oracle_ee,success_rate,rewarded_rate,violations");
    for d in &report.distributions {
        println!(
            "{},{},{},{},{},{},{}",
            d.index, d.env_seed, d.mean_ee, d.mean_oracle_ee, d.success_rate, d.rewarded_rate, d.violations
        );
    }
    println!(
        "# noise {} dBm: mean EE {:.6e}, oracle {:.6e} ({:.1}%), success {:.3}, violations {}/{}",
        report.noise_dbm,
        report.mean_ee,
        report.mean_oracle_ee,
        100.0 * report.mean_ee / report.mean_oracle_ee,
        report.success_rate,
        report.violations,
        report.steps
    );
    if let Some(path) = json {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &report)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn gradcheck(layers: Vec<usize>, seed: u64) -> Result<()> {
    let spec = MlpSpec::new(layers)?;
    let e64 = gradient_check::<f64>(&spec, seed);
    let e32 = gradient_check::<f32>(&spec, seed);
    println!("layers {:?} ({} parameters)", spec.layer_sizes, spec.param_count());
    println!("f64 max relative error {e64:.3e} (limit 1e-4) {}", verdict(e64 < 1e-4));
    println!("f32 max relative error {e32:.3e} (limit 1e-3) {}", verdict(e32 < 1e-3));
    if e64 >= 1e-4 || e32 >= 1e-3 {
        bail!("gradient check failed");
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok { "ok" } else { "FAIL" }
}

fn oracle_bench(instances: usize, size: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..instances {
        let u: Vec<Vec<f64>> =
            (0..size).map(|_| (0..size).map(|_| rng.random_range(0.0..1e9)).collect()).collect();
        let h = assign_hungarian(&u);
        let b = assign_brute_force(&u)?;
        if h.scaled_total != b.scaled_total || h.channels != b.channels {
            mismatches += 1;
        }
    }
    println!(
        "{instances} random {size}x{size} instances: {mismatches} mismatches, {:.3}s",
        start.elapsed().as_secs_f64()
    );
    if mismatches > 0 {
        bail!("Hungarian and exhaustive search disagree");
    }
    Ok(())
}

fn comm_cost(cfg: &ExperimentConfig) -> Result<()> {
    let n = cfg.network.num_ues;
    let obs = cfg.network.obs_dim() as u64;
    let params = cfg.mlp_spec()?.param_count() as u64;
    let crl = comm_cost_crl(cfg.epochs as u64, cfg.network.steps_per_epoch as u64, &vec![obs; n]);
    let rounds = cfg.averaging_schedule().len() as u64;
    let frl = comm_cost_frl(rounds, &vec![params; n]);
    println!("K={} T={} UEs={n} |o|={obs} |W|={params} M={rounds}", cfg.epochs, cfg.network.steps_per_epoch);
    println!("C_CRL = {crl}");
    println!("C_FRL = {frl}");
    println!("ratio C_FRL / C_CRL = {:.4}", frl as f64 / crl as f64);
    Ok(())
}

fn report(paths: &[PathBuf]) -> Result<()> {
    println!("path,epochs,early_reward,final_reward,epochs_to_90pct,final_loss,final_system_ee,final_oracle_ee");
    for path in paths {
        let file = if path.is_dir() { path.join(METRICS_FILE) } else { path.clone() };
        let records = read_metrics_csv(BufReader::new(
            File::open(&file).with_context(|| format!("opening {}", file.display()))?,
        ))?;
        if records.is_empty() {
            bail!("{} has no epochs", file.display());
        }
        let s = summarize(&records);
        println!(
            "{},{},{},{},{},{},{},{}",
            path.display(),
            s.epochs,
            s.early_reward,
            s.final_reward,
            s.epochs_to_90pct.map_or(String::new(), |e| e.to_string()),
            s.final_loss.map_or(String::new(), |l| l.to_string()),
            s.final_system_ee,
            s.final_oracle_ee
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { cfg, out, workers, progress } => {
            train(&cfg.resolve()?, &out, workers.unwrap_or_else(default_workers), progress)
        }
        Command::Eval { run, cfg, oracle, low_noise, json } => {
            eval(run.as_deref(), &cfg, oracle, low_noise, json.as_deref())
        }
        Command::Sweep { cfg, averaging_list, out, workers } => {
            let cfg = cfg.resolve_from(None)?;
            let rows = run_sweep(&cfg, &averaging_list, workers.unwrap_or_else(default_workers))?;
            write_sweep_csv(&rows, BufWriter::new(File::create(&out)?))?;
            for r in &rows {
                println!(
                    "n_a {} seed {} {}: final loss {}, eval EE {:.4e} (oracle {:.4e}), violations {}",
                    r.averaging_times,
                    r.seed,
                    r.scheme,
                    r.final_loss.map_or("n/a".into(), |l| format!("{l:.4e}")),
                    r.mean_ee,
                    r.mean_oracle_ee,
                    r.violations
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Gradcheck { layers, seed } => gradcheck(layers, seed),
        Command::OracleBench { instances, size, seed } => oracle_bench(instances, size, seed),
        Command::CommCost { cfg } => comm_cost(&cfg.resolve()?),
        Command::Report { paths } => report(&paths),
        Command::Config { cfg } => {
            print!("{}", cfg.resolve()?.to_toml_string());
            Ok(())
        }
    }
}
