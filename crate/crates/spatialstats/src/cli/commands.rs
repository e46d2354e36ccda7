//! One function per pipeline. Each returns the named output files fully
//! rendered in memory; the runner writes them atomically.

use std::path::Path;

use nalgebra::DVector;

use super::{input_path, numeric, validate, CliError, ConfigMap};
use crate::covariance::{self, CovarianceModel, Family};
use crate::dataset::SpatialDataset;
use crate::gaussian::GaussianSpec;
use crate::geom::{tessellate_baus, BauGrid, Location, Window};
use crate::kriging::{self, TrendSpec};
use crate::lattice::{CarModel, CarObservation, NeighborhoodGraph, SampleMethod};
use crate::multivariate::{BivariateModel, InteractionKernel, MeanFunction, Variable};
use crate::pointproc::{self, CsrStatistic, IntensityFunction, PointPattern};
use crate::raster;
use crate::spacetime::{self, Observations, StateSpaceModel};
use crate::vecchia::{self, OrderingStrategy};

type Outputs = Vec<(String, Vec<u8>)>;

fn parse_family(cfg: &mut ConfigMap, prefix: &str) -> Result<Family, CliError> {
    let key = format!("{prefix}family");
    let raw = cfg.take_required(&key)?;
    match raw.as_str() {
        "exponential" => Ok(Family::Exponential),
        "gaussian" => Ok(Family::Gaussian),
        "spherical" => Ok(Family::Spherical),
        "matern" => {
            let smoothness = cfg.take_f64(&format!("{prefix}smoothness"))?;
            Ok(Family::Matern { smoothness })
        }
        other => Err(CliError::Validation(format!(
            "key `{key}`: unknown family `{other}` (expected exponential, gaussian, spherical, or matern)"
        ))),
    }
}

/// Reads `<prefix>family`, `<prefix>sill`, `<prefix>range`,
/// `<prefix>nugget` (and `<prefix>smoothness` for matern).
fn parse_model(cfg: &mut ConfigMap, prefix: &str) -> Result<CovarianceModel, CliError> {
    let family = parse_family(cfg, prefix)?;
    let sill = cfg.take_f64(&format!("{prefix}sill"))?;
    let range = cfg.take_f64(&format!("{prefix}range"))?;
    let nugget = cfg.take_f64(&format!("{prefix}nugget"))?;
    validate(CovarianceModel::new(family, sill, range, nugget))
}

fn parse_window(cfg: &mut ConfigMap) -> Result<Window, CliError> {
    let b = cfg.take_f64_list("window", 4)?;
    validate(Window::rect(vec![b[0], b[1]], vec![b[2], b[3]]))
}

fn parse_grid(cfg: &mut ConfigMap, window: &Window) -> Result<BauGrid, CliError> {
    let res = cfg.take_usize_list("resolution", 2)?;
    validate(tessellate_baus(window, &res))
}

fn parse_trend(cfg: &mut ConfigMap) -> Result<TrendSpec, CliError> {
    match cfg.take("trend").as_deref() {
        None | Some("constant") => Ok(TrendSpec::Constant),
        Some("linear") => Ok(TrendSpec::Linear),
        Some(other) => Err(CliError::Validation(format!(
            "key `trend`: unknown trend `{other}` (expected constant or linear)"
        ))),
    }
}

pub fn variogram(mut cfg: ConfigMap, base: &Path) -> Result<Outputs, CliError> {
    let input = input_path(base, &cfg.take_required("input")?, "input")?;
    let n_bins = cfg.take_usize("n_bins")?;
    let max_lag = cfg.take_f64("max_lag")?;
    let fit_family = match cfg.take("fit_family") {
        Some(raw) => {
            // reuse the family parser through a tiny shim key
            let mut shim = ConfigMap::parse(&format!("family = {raw}"))?;
            if raw == "matern" {
                return Err(CliError::Validation(
                    "key `fit_family`: matern needs `smoothness`, use fit_family = matern plus smoothness = ...".into(),
                ));
            }
            let fam = parse_family(&mut shim, "")?;
            Some(fam)
        }
        None => None,
    };
    cfg.finish()?;

    let dataset = validate(SpatialDataset::from_csv_path(&input))?;
    let ev = numeric(covariance::empirical_variogram(&dataset, n_bins, max_lag))?;
    let mut out: Outputs = vec![("variogram.csv".into(), ev.to_csv_string().into_bytes())];
    if let Some(family) = fit_family {
        let fitted = numeric(covariance::fit_variogram(&ev, family))?;
        let text = format!(
            "family = {}\nsill = {}\nrange = {}\nnugget = {}\n",
            fitted.family().name(),
            fitted.sill(),
            fitted.range(),
            fitted.nugget()
        );
        out.push(("fitted_model.txt".into(), text.into_bytes()));
    }
    Ok(out)
}

pub fn krige(mut cfg: ConfigMap, base: &Path) -> Result<Outputs, CliError> {
    let input = input_path(base, &cfg.take_required("input")?, "input")?;
    let model = parse_model(&mut cfg, "")?;
    let trend = parse_trend(&mut cfg)?;
    let noise = cfg.take_f64_or("noise", 0.0)?;
    let window = parse_window(&mut cfg)?;
    let grid = parse_grid(&mut cfg, &window)?;
    cfg.finish()?;

    let dataset = validate(SpatialDataset::from_csv_path(&input))?;
    let map = numeric(kriging::kriging_map(&dataset, &model, &trend, &grid, noise))?;
    Ok(vec![
        ("predictions.csv".into(), map.to_csv_string().into_bytes()),
        (
            "prediction.asc".into(),
            numeric(raster::to_grid_raster(&map, &map.predictions))?.into_bytes(),
        ),
        (
            "standard_error.asc".into(),
            numeric(raster::to_grid_raster(&map, &map.standard_errors))?.into_bytes(),
        ),
        ("prediction.pgm".into(), numeric(raster::render_pgm(&map))?),
    ])
}

pub fn car(mut cfg: ConfigMap, base: &Path, seed: u64) -> Result<Outputs, CliError> {
    let nx = cfg.take_usize("nx")?;
    let ny = cfg.take_usize("ny")?;
    let rho = cfg.take_f64("rho")?;
    let tau2 = cfg.take_f64("tau2")?;
    let n_samples = cfg.take_usize("n_samples")?;
    let method = match cfg.take("method").as_deref() {
        None | Some("exact") => SampleMethod::Exact,
        Some("gibbs") => SampleMethod::Gibbs { burn_in: cfg.take_usize_or("burn_in", 50)? },
        Some(other) => {
            return Err(CliError::Validation(format!(
                "key `method`: unknown sampler `{other}` (expected exact or gibbs)"
            )))
        }
    };
    let observations = cfg.take("observations");
    cfg.finish()?;

    let graph = validate(NeighborhoodGraph::grid(nx, ny))?;
    let model = validate(CarModel::homogeneous(graph, rho, tau2))?;
    let draws = numeric(model.sample(n_samples, seed, method))?;

    let mut samples_csv = String::from("sample,node,value\n");
    for (s, draw) in draws.iter().enumerate() {
        for (node, value) in draw.iter().enumerate() {
            samples_csv.push_str(&format!("{s},{node},{value}\n"));
        }
    }
    let mut out: Outputs = vec![
        ("car_samples.csv".into(), samples_csv.into_bytes()),
        ("graph.csv".into(), model.graph().to_edge_csv().into_bytes()),
    ];

    if let Some(raw) = observations {
        let path = input_path(base, &raw, "observations")?;
        let text = std::fs::read_to_string(path)?;
        let obs = parse_car_observations(&text)?;
        let targets: Vec<usize> = (0..model.n()).collect();
        let preds = numeric(model.predict(&obs, &targets))?;
        let mut csv = String::from("node,mean,variance\n");
        for (node, &(m, v)) in preds.iter().enumerate() {
            csv.push_str(&format!("{node},{m},{v}\n"));
        }
        out.push(("car_predictions.csv".into(), csv.into_bytes()));
    }
    Ok(out)
}

fn parse_car_observations(text: &str) -> Result<Vec<CarObservation>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some("node,value,noise") => {}
        other => {
            return Err(CliError::Validation(format!(
                "observations file must start with `node,value,noise`, found {other:?}"
            )))
        }
    }
    let mut obs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::Validation(format!(
                "observations row {}: wrong field count",
                lineno + 2
            )));
        }
        let node = fields[0].parse().map_err(|_| {
            CliError::Validation(format!("observations row {}: bad node", lineno + 2))
        })?;
        let value = fields[1].parse().map_err(|_| {
            CliError::Validation(format!("observations row {}: bad value", lineno + 2))
        })?;
        let noise_variance = fields[2].parse().map_err(|_| {
            CliError::Validation(format!("observations row {}: bad noise", lineno + 2))
        })?;
        obs.push(CarObservation { node, value, noise_variance });
    }
    Ok(obs)
}

pub fn simulate_pp(mut cfg: ConfigMap, base: &Path, seed: u64) -> Result<Outputs, CliError> {
    let kind = cfg.take_required("kind")?;
    let window = parse_window(&mut cfg)?;
    match kind.as_str() {
        "homogeneous" => {
            let lambda = cfg.take_f64("lambda")?;
            cfg.finish()?;
            let p = numeric(pointproc::simulate_homogeneous_poisson(&window, lambda, seed))?;
            Ok(vec![("pattern.csv".into(), p.to_csv_string().into_bytes())])
        }
        "inhomogeneous" => {
            let grid = parse_grid(&mut cfg, &window)?;
            let intensity_file = input_path(base, &cfg.take_required("intensity")?, "intensity")?;
            cfg.finish()?;
            let text = std::fs::read_to_string(intensity_file)?;
            let values: Result<Vec<f64>, CliError> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.trim().parse::<f64>().map_err(|_| {
                        CliError::Validation(format!("key `intensity`: bad number `{l}`"))
                    })
                })
                .collect();
            let intensity = validate(IntensityFunction::from_grid(grid, values?))?;
            let p = numeric(pointproc::simulate_inhomogeneous_poisson(&window, &intensity, seed))?;
            Ok(vec![("pattern.csv".into(), p.to_csv_string().into_bytes())])
        }
        "lgcp" => {
            let grid = parse_grid(&mut cfg, &window)?;
            let gp_mean = cfg.take_f64("gp_mean")?;
            let model = parse_model(&mut cfg, "")?;
            cfg.finish()?;
            let (p, field) = numeric(pointproc::simulate_lgcp(&window, &grid, gp_mean, &model, seed))?;
            let mut field_csv = String::from("cell,log_intensity\n");
            for (i, v) in field.iter().enumerate() {
                field_csv.push_str(&format!("{i},{v}\n"));
            }
            Ok(vec![
                ("pattern.csv".into(), p.to_csv_string().into_bytes()),
                ("field.csv".into(), field_csv.into_bytes()),
            ])
        }
        other => Err(CliError::Validation(format!(
            "key `kind`: unknown process `{other}` (expected homogeneous, inhomogeneous, or lgcp)"
        ))),
    }
}

pub fn csr_test(mut cfg: ConfigMap, base: &Path, seed: u64) -> Result<Outputs, CliError> {
    let input = input_path(base, &cfg.take_required("input")?, "input")?;
    let n_sim = cfg.take_usize("n_sim")?;
    let statistic = match cfg.take("statistic").as_deref() {
        None | Some("k") => CsrStatistic::KDeviation,
        Some("quadrat") => CsrStatistic::QuadratChi2,
        Some(other) => {
            return Err(CliError::Validation(format!(
                "key `statistic`: unknown statistic `{other}` (expected k or quadrat)"
            )))
        }
    };
    cfg.finish()?;

    let text = std::fs::read_to_string(input)?;
    let pattern = validate(PointPattern::from_csv_str(&text))?;
    let result = numeric(pointproc::csr_test(&pattern, n_sim, seed, statistic))?;
    Ok(vec![("report.txt".into(), result.report().into_bytes())])
}

pub fn cokrige(mut cfg: ConfigMap, base: &Path) -> Result<Outputs, CliError> {
    let input1 = input_path(base, &cfg.take_required("input1")?, "input1")?;
    let input2 = match cfg.take("input2") {
        Some(raw) => Some(input_path(base, &raw, "input2")?),
        None => None,
    };
    let targets_file = input_path(base, &cfg.take_required("targets")?, "targets")?;
    let mu1 = MeanFunction::Constant(cfg.take_f64_or("mu1", 0.0)?);
    let mu2 = MeanFunction::Constant(cfg.take_f64_or("mu2", 0.0)?);
    let c11 = parse_model(&mut cfg, "c11_")?;
    let c2g1 = parse_model(&mut cfg, "c2g1_")?;
    let kernel = parse_kernel(&mut cfg)?;
    let window = parse_window(&mut cfg)?;
    let grid = parse_grid(&mut cfg, &window)?;
    let target = match cfg.take_required("target")?.as_str() {
        "1" => Variable::One,
        "2" => Variable::Two,
        other => {
            return Err(CliError::Validation(format!(
                "key `target`: expected 1 or 2, got `{other}`"
            )))
        }
    };
    let noise = cfg.take_f64_or("noise", 0.0)?;
    cfg.finish()?;

    let model = validate(BivariateModel::new(mu1, mu2, c11, c2g1, kernel, grid))?;
    let data1 = validate(SpatialDataset::from_csv_path(&input1))?;
    let data2 = match input2 {
        Some(p) => Some(validate(SpatialDataset::from_csv_path(&p))?),
        None => None,
    };
    let targets = parse_targets(&std::fs::read_to_string(targets_file)?)?;

    let mut csv = String::from("x,y,prediction,standard_error\n");
    for t in &targets {
        let (mean, var) =
            numeric(model.cokrige(Some(&data1), data2.as_ref(), target, t, noise))?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            t.coord(0),
            t.coord(1),
            mean,
            var.max(0.0).sqrt()
        ));
    }
    Ok(vec![("cokrige.csv".into(), csv.into_bytes())])
}

fn parse_kernel(cfg: &mut ConfigMap) -> Result<InteractionKernel, CliError> {
    let raw = cfg.take_required("kernel")?;
    let parts: Vec<&str> = raw.split_whitespace().collect();
    match parts.as_slice() {
        ["zero"] => Ok(InteractionKernel::zero()),
        ["gaussian", amp, sx, sy, scale2] => {
            let parse = |t: &str| -> Result<f64, CliError> {
                t.parse()
                    .map_err(|_| CliError::Validation(format!("key `kernel`: bad number `{t}`")))
            };
            Ok(InteractionKernel::gaussian_bump(
                parse(amp)?,
                vec![parse(sx)?, parse(sy)?],
                parse(scale2)?,
            ))
        }
        _ => Err(CliError::Validation(
            "key `kernel`: expected `zero` or `gaussian <amplitude> <shift_x> <shift_y> <scale2>`"
                .into(),
        )),
    }
}

fn parse_targets(text: &str) -> Result<Vec<Location>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some("x,y") => {}
        other => {
            return Err(CliError::Validation(format!(
                "targets file must start with `x,y`, found {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(CliError::Validation(format!(
                "targets row {}: wrong field count",
                lineno + 2
            )));
        }
        let parse = |t: &str| -> Result<f64, CliError> {
            t.parse()
                .map_err(|_| CliError::Validation(format!("targets row {}: bad number", lineno + 2)))
        };
        out.push(Location::xy(parse(fields[0])?, parse(fields[1])?));
    }
    Ok(out)
}

pub fn vecchia_krige(mut cfg: ConfigMap, base: &Path) -> Result<Outputs, CliError> {
    let input = input_path(base, &cfg.take_required("input")?, "input")?;
    let model = parse_model(&mut cfg, "")?;
    let q = cfg.take_usize("q")?;
    let strategy = match cfg.take("strategy").as_deref() {
        None | Some("maxmin") => OrderingStrategy::MaxMin,
        Some("coordinate") => OrderingStrategy::CoordinateSort,
        Some(other) => {
            return Err(CliError::Validation(format!(
                "key `strategy`: unknown ordering `{other}` (expected maxmin or coordinate)"
            )))
        }
    };
    let noise = cfg.take_f64_or("noise", 0.0)?;
    let window = parse_window(&mut cfg)?;
    let grid = parse_grid(&mut cfg, &window)?;
    cfg.finish()?;

    let dataset = validate(SpatialDataset::from_csv_path(&input))?;
    let pred_locs = grid.centroids();
    let dag = numeric(vecchia::prediction_dag(dataset.locations(), &pred_locs, strategy, q))?;
    let mut all = dataset.locations().to_vec();
    all.extend_from_slice(&pred_locs);
    let preds = numeric(vecchia::krige(&dag, &model, &all, dataset.values(), noise))?;

    let mut csv = String::from("cell_x,cell_y,prediction,standard_error\n");
    for (cell, &(mean, var)) in grid.cells().iter().zip(&preds) {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            cell.centroid.coord(0),
            cell.centroid.coord(1),
            mean,
            var.max(0.0).sqrt()
        ));
    }
    Ok(vec![("vecchia_predictions.csv".into(), csv.into_bytes())])
}

pub fn kalman(mut cfg: ConfigMap, base: &Path) -> Result<Outputs, CliError> {
    let input = input_path(base, &cfg.take_required("input")?, "input")?;
    let nx = cfg.take_usize("nx")?;
    let ny = cfg.take_usize("ny")?;
    let alpha = cfg.take_f64("alpha")?;
    let delta = cfg.take_f64("delta")?;
    let model_cov = parse_model(&mut cfg, "")?;
    let r = cfg.take_f64("r")?;
    let horizon = cfg.take_usize_or("horizon", 0)?;
    cfg.finish()?;

    let graph = validate(NeighborhoodGraph::grid(nx, ny))?;
    let m = graph.n();
    let transition = StateSpaceModel::transition_from_graph(&graph, alpha, delta);
    // process noise and initial covariance from the spatial model over
    // the lattice nodes
    let q = validate(covariance::gram_matrix(&model_cov, graph.nodes()))?;
    let initial = validate(GaussianSpec::new(DVector::zeros(m), q.clone()))?;
    let model = validate(StateSpaceModel::new(
        transition,
        q,
        DVector::from_element(m, r),
        initial,
    ))?;

    let obs = validate(Observations::from_csv_str(&std::fs::read_to_string(input)?))?;
    let filter = numeric(spacetime::filter(&model, &obs))?;
    let smoother = numeric(spacetime::smooth(&model, &obs))?;

    let mut out: Outputs = vec![(
        "filtered.csv".into(),
        spacetime::filter_output_csv(&filter).into_bytes(),
    )];
    let mut smoothed_csv = String::from("t,node_index,smoothed_mean,smoothed_sd\n");
    for (t, (mean, cov)) in smoother.means.iter().zip(&smoother.covs).enumerate() {
        for i in 0..mean.len() {
            smoothed_csv.push_str(&format!(
                "{},{},{},{}\n",
                t + 1,
                i,
                mean[i],
                cov[(i, i)].max(0.0).sqrt()
            ));
        }
    }
    out.push(("smoothed.csv".into(), smoothed_csv.into_bytes()));

    if horizon > 0 {
        let fc = spacetime::forecast(&model, &filter, horizon);
        let k = obs.k();
        let mut forecast_csv = String::from("t,node_index,forecast_mean,forecast_sd\n");
        for (h, (mean, cov)) in fc.iter().enumerate() {
            for i in 0..mean.len() {
                forecast_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    k + h + 1,
                    i,
                    mean[i],
                    cov[(i, i)].max(0.0).sqrt()
                ));
            }
        }
        out.push(("forecast.csv".into(), forecast_csv.into_bytes()));
    }
    Ok(out)
}
