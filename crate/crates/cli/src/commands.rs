use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use udgnn_core::diagnostics::{record_training_diagnostics, verify_theorem, write_diagnostics_csv, Theorem, VerifyOptions};
use udgnn_core::graph::{edge_homophily, generate, load_dataset, save_dataset, NodeDataset, SparseGraph, SyntheticSpec};
use udgnn_core::nn::{ConvKind, GraphOperators, ModelSpec, UdgnnModel};
use udgnn_core::plot::render_svg;
use udgnn_core::rng::derive_seed;
use udgnn_core::train::{depth_sweep, write_sweep_csv, SweepPlan, TrainConfig};

use crate::error::{CliError, Result};
use crate::{PlotArgs, SweepArgs, TrainArgs, VerifyArgs};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn gen(spec_path: &Path, out: &Path) -> Result<()> {
    let spec: SyntheticSpec = read_json(spec_path)?;
    let (graph, data) = generate(&spec)?;
    save_dataset(&graph, &data, out)?;
    println!(
        "wrote {}: {} nodes, {} edges, edge homophily {:.4}",
        out.display(),
        graph.n_nodes(),
        graph.n_edges(),
        edge_homophily(&graph, &data.labels)
    );
    Ok(())
}

fn load_source(args: &TrainArgs) -> Result<(SparseGraph, NodeDataset)> {
    match (&args.data, &args.spec) {
        (Some(path), None) => Ok(load_dataset(path)?),
        (None, Some(path)) => Ok(generate(&read_json::<SyntheticSpec>(path)?)?),
        _ => Err(CliError::Usage("give exactly one of --data or --spec".into())),
    }
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let (graph, data) = load_source(args)?;
    let spec: ModelSpec = read_json(&args.model)?;
    let config: TrainConfig = read_json(&args.train)?;
    if args.log_every == 0 {
        return Err(CliError::Usage("--log-every must be at least 1".into()));
    }
    out_dir(&args.out)?;
    let ops = GraphOperators::new(&graph, spec.propagation_kind);
    // same initialization as repeat 0 of a sweep with this seed
    let mut model = UdgnnModel::new(&spec, data.feature_dim(), data.n_classes, derive_seed(config.seed, "init/0"))?;
    let (report, records) = record_training_diagnostics(&mut model, &ops, &data, &config, args.log_every)?;

    write(&args.out.join("report.json"), report.to_json()?)?;
    write(&args.out.join("metrics.csv"), report.metrics_csv())?;
    let mut diag = Vec::new();
    write_diagnostics_csv(&records, &mut diag)?;
    write(&args.out.join("diagnostics.csv"), diag)?;
    println!(
        "{} {} depth {}: test_acc {:.4} at epoch {} (val {:.4}, {} epochs)",
        spec.variant_name(),
        spec.conv_kind.name(),
        spec.depth,
        report.test_acc,
        report.best_epoch,
        report.best_val_acc,
        report.epochs_run
    );
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let template = match &args.model {
        Some(p) => read_json(p)?,
        None => ModelSpec::udgnn(ConvKind::GCN, 0, 64),
    };
    let config = match &args.train {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    let convs = args
        .convs
        .iter()
        .map(|c| ConvKind::parse(c).ok_or_else(|| CliError::Usage(format!("unknown conv `{c}`; valid: gcn, sgc, sage, dense"))))
        .collect::<Result<Vec<_>>>()?;
    let plan = SweepPlan {
        variants: args.variants.clone(),
        convs,
        depths: args.depths.clone(),
        repeats: args.repeats,
        template,
        config,
    };
    // reject bad plans before touching the dataset
    plan.validate()?;
    let (graph, data) = load_dataset(&args.data)?;
    out_dir(&args.out)?;
    let rows = depth_sweep(&graph, &data, &plan)?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    let path = args.out.join("sweep.csv");
    write(&path, csv)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<()> {
    let theorem = Theorem::from_number(args.theorem).ok_or_else(|| CliError::Usage("--theorem must be 1 or 2".into()))?;
    let options = VerifyOptions {
        inject_fault: args.inject_fault,
    };
    let report = verify_theorem(theorem, args.trials, args.seed, options)?;
    let what = match theorem {
        Theorem::Forward => "max abs deviation",
        Theorem::Backward => "max relative error",
    };
    println!(
        "theorem {}: {} trials, {} comparisons, {what} {:e} (tolerance {:e})",
        args.theorem, report.trials, report.comparisons, report.max_deviation, report.tolerance
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "tolerance exceeded on instance seed {} ({})",
            report.worst_seed, report.worst_case
        )))
    }
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    let text = read_text(&args.csv)?;
    let svg = render_svg(&text, &args.x, &args.y, &args.group)?;
    write(&args.out, svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
