use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Table {
    comments: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Table {
        let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let (comments, rest): (Vec<&str>, Vec<&str>) = text.lines().partition(|l| l.starts_with('#'));
        let split = |l: &str| l.split(',').map(str::to_owned).collect::<Vec<_>>();
        Table {
            comments: comments.into_iter().map(str::to_owned).collect(),
            columns: split(rest[0]),
            rows: rest[1..].iter().map(|l| split(l)).collect(),
        }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Run {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Run { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn cmd(&self, sub: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_conecs"))
            .arg(sub)
            .arg("--config")
            .arg(self.dir.path().join("run.toml"))
            .arg("--out")
            .arg(self.out())
            .args(extra)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, sub: &str, extra: &[&str]) -> &Self {
        let o = self.cmd(sub, extra);
        assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
        self
    }

    fn table(&self, name: &str) -> Table {
        Table::read(&self.out().join(name))
    }
}

const BLOCKS_128: &str = "[distribution]\nkind = \"halving-blocks\"\nd = 128\n";

#[test]
fn weights_for_halving_blocks() {
    let run = Run::new(BLOCKS_128);
    let t = run.ok("weights", &[]).table("weights.csv");
    assert_eq!(t.columns, ["index", "beta", "lambda"]);
    assert_eq!(t.rows.len(), 128);
    let lambda = t.col("lambda");
    assert!(lambda.windows(2).all(|p| p[0] <= p[1]));
    assert!(lambda[0] < lambda[127]);
    assert!(t.comments[0].starts_with("# config_hash="));
}

#[test]
fn uniform_marginals_give_constant_weights() {
    let run = Run::new("[distribution]\nkind = \"bernoulli\"\nbeta = [0.3, 0.3, 0.3, 0.3]\n");
    let lambda = run.ok("weights", &[]).table("weights.csv").col("lambda");
    assert!(lambda.iter().all(|&l| l == lambda[0]));
}

#[test]
fn zero_marginal_is_clipped_with_warning() {
    let run = Run::new("[distribution]\nkind = \"beta-file\"\npath = \"beta.txt\"\n");
    fs::write(run.dir.path().join("beta.txt"), "0.5\n0\n0.25\n").unwrap();
    let o = run.cmd("weights", &[]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("clipped"));
    let t = run.table("weights.csv");
    assert_eq!(t.col("beta")[1], 1e-6);
    assert!(t.col("lambda")[1] > t.col("lambda")[0]);
}

const WEDGE: &str = "[distribution]\nkind = \"point-mass\"\nd = 2\nsupport = [0]\n\n[phase]\nm_grid = [1, 2]\ntrials = 1000\n";

#[test]
fn wedge_volumes() {
    let run = Run::new(WEDGE);
    let t = run.ok("volumes", &[]).table("volumes.csv");
    assert_eq!(t.columns, ["k", "count", "nu_bar", "t_bar", "h_bar", "ci"]);
    let (nu, ci) = (t.col("nu_bar"), t.col("ci"));
    for (k, e) in [0.25, 0.5, 0.25].into_iter().enumerate() {
        assert!((nu[k] - e).abs() <= 3.0 * ci[k], "nu_{k} = {}", nu[k]);
    }
    assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn designed_weights_shift_volume_mass_left() {
    let small = "[volumes]\nn_supports = 200\nn_points = 20\n";
    let mean_dim = |weights: &str| {
        let run = Run::new(&format!("{BLOCKS_128}{weights}{small}"));
        let t = run.ok("volumes", &[]).table("volumes.csv");
        t.col("k").iter().zip(t.col("nu_bar")).map(|(k, v)| k * v).sum::<f64>()
    };
    let unit = mean_dim("");
    let designed = mean_dim("[weights]\nsource = \"theorem\"\n");
    assert!(designed < unit - 5.0, "{designed} vs {unit}");
}

#[test]
fn wedge_phase_and_prediction() {
    let run = Run::new(WEDGE);
    run.ok("phase", &[]);
    let t = run.table("phase.csv");
    assert_eq!(t.columns, ["m", "trials", "successes", "frequency"]);
    let f = t.col("frequency");
    assert!((f[0] - 0.5).abs() <= 0.05, "{}", f[0]);
    assert_eq!(f[1], 1.0);
    let p = run.table("predicted.csv");
    assert_eq!(p.columns, ["m", "predicted", "ci"]);
    assert!((p.col("predicted")[0] - 0.5).abs() <= 3.0 * p.col("ci")[0]);
    assert_eq!(p.col("predicted")[1], 1.0);
}

#[test]
fn phase_rejects_grid_outside_dimension() {
    let run = Run::new("[distribution]\nkind = \"point-mass\"\nd = 2\nsupport = [0]\n[phase]\nm_grid = [3]\n");
    let o = run.cmd("phase", &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside 1..=2"));
}

const BLOCKS_32: &str = "[distribution]\nkind = \"halving-blocks\"\nd = 32\n";

#[test]
fn descent_from_unit_weights_decreases_delta() {
    let run = Run::new(&format!("{BLOCKS_32}[descend]\nmax_iters = 4\nn_grad_samples = 5000\nn_eval_samples = 5000\n"));
    run.ok("descend", &[]);
    let t = run.table("trajectory.csv");
    assert_eq!(&t.columns[..6], ["iter", "step", "delta", "stderr", "gradient_norm", "halvings"]);
    assert_eq!(t.columns.len(), 6 + 32);
    let delta = t.col("delta");
    assert!(delta.len() >= 2);
    assert!(delta.windows(2).all(|p| p[1] < p[0]));
    let se = t.col("stderr");
    assert!(delta[0] - delta[delta.len() - 1] > 3.0 * (se[0] + se[se.len() - 1]));
    let w = run.table("final_weights.csv");
    assert_eq!(w.columns, ["index", "weight"]);
    assert_eq!(w.rows.len(), 32);
    assert!(w.col("weight").iter().all(|&x| x > 0.0));
}

#[test]
fn descent_from_designed_weights_barely_moves() {
    let run = Run::new(&format!("{BLOCKS_128}[descend]\ninit = \"theorem\"\n"));
    run.ok("descend", &[]);
    let t = run.table("trajectory.csv");
    let accepted = t.rows.len() - 1;
    assert!(accepted <= 2, "{accepted} accepted steps");
    assert!(t.comments.iter().any(|c| c.contains("termination=step-below-minimum")));
}

#[test]
fn descent_stops_at_minimum_step() {
    let run = Run::new(&format!(
        "{BLOCKS_32}[descend]\ninit = \"theorem\"\ninitial_step = 1e-3\nmin_step = 5e-4\nn_grad_samples = 2000\nn_eval_samples = 2000\n"
    ));
    run.ok("descend", &[]);
    let t = run.table("trajectory.csv");
    assert!(t.comments.iter().any(|c| c.contains("termination=step-below-minimum") || c.contains("termination=max-iterations")));
    assert_eq!(t.rows[0][0], "0");
}

#[test]
fn point_mass_histogram_has_one_cluster() {
    let run = Run::new("[distribution]\nkind = \"point-mass\"\nd = 10\nsupport = [1, 4, 7]\n[histogram]\nn_supports = 30\nn_points = 100\n");
    run.ok("histogram", &[]);
    assert_eq!(run.table("deltahist.csv").rows.len(), 30);
    let c = run.table("deltaclusters.csv");
    assert_eq!(c.rows.len(), 1);
    assert_eq!(c.rows[0][0], "0100100100");
}

#[test]
fn four_support_histogram_separates() {
    let run = Run::new("[distribution]\nkind = \"four-supports\"\n[weights]\nsource = \"theorem\"\n");
    run.ok("histogram", &[]);
    let c = run.table("deltaclusters.csv");
    let (mean, se) = (c.col("mean"), c.col("stderr"));
    let gaps = (1..mean.len()).filter(|&i| mean[i] - mean[i - 1] > 3.0 * (se[i] + se[i - 1])).count();
    assert!(gaps >= 1, "{mean:?}");
}

#[test]
fn halving_block_histogram_is_concentrated() {
    let run = Run::new(&format!("{BLOCKS_128}[weights]\nsource = \"theorem\"\n[histogram]\nn_supports = 200\nn_points = 50\n"));
    run.ok("histogram", &[]);
    let delta = run.table("deltahist.csv").col("delta");
    let mean = delta.iter().sum::<f64>() / delta.len() as f64;
    let sd = (delta.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (delta.len() - 1) as f64).sqrt();
    assert!(sd < (128f64).sqrt(), "sd {sd}");
}

#[test]
fn seed_flag_overrides_config() {
    let run = Run::new(&format!("seed = 5\n{WEDGE}[volumes]\nn_supports = 50\nn_points = 10\n"));
    let first = run.ok("volumes", &[]).table("volumes.csv");
    assert!(first.comments[0].contains("seed=5,"));
    let second = run.ok("volumes", &["--seed", "6"]).table("volumes.csv");
    assert!(second.comments[0].contains("seed=6,"));
    assert_ne!(first.rows, second.rows);
}

#[test]
fn weight_source_from_file_and_descent() {
    let run = Run::new(&format!(
        "{BLOCKS_32}[weights]\nsource = \"file\"\npath = \"out/final_weights.csv\"\n[volumes]\nn_supports = 50\nn_points = 10\n"
    ));
    // Missing file is a config error.
    assert!(!run.cmd("volumes", &[]).status.success());
    let seed = Run::new(&format!("{BLOCKS_32}[descend]\nmax_iters = 1\nn_grad_samples = 2000\nn_eval_samples = 2000\n"));
    seed.ok("descend", &[]);
    fs::create_dir_all(run.out()).unwrap();
    fs::copy(seed.out().join("final_weights.csv"), run.out().join("final_weights.csv")).unwrap();
    run.ok("volumes", &[]);

    let via_descent = Run::new(&format!(
        "{BLOCKS_32}[weights]\nsource = \"descend\"\n[descend]\nmax_iters = 1\nn_grad_samples = 2000\nn_eval_samples = 2000\n[volumes]\nn_supports = 50\nn_points = 10\n"
    ));
    assert_eq!(via_descent.ok("volumes", &[]).table("volumes.csv").rows.len(), 33);
}

#[test]
fn missing_config_is_an_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_conecs")).arg("weights").env("RUST_LOG", "error").output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = conecs_cli::LoadedConfig::from_file(&path).unwrap();
            cfg.distribution().unwrap();
            n += 1;
        }
    }
    assert!(n >= 4);
}
