//! Unmixing of a single dataset read from CSV.

use std::path::{Path, PathBuf};

use sbss_core::{
    combined_loadings, ilr_pivot, recover_latent, sbss_ldiff_whitened, Composition, Estimator, FieldSample, KernelSpec,
    LocationSet, Method, SbssError, UnmixingResult, WeightCache, WhitenedOptions,
};

use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub data: PathBuf,
    pub method: Method,
    pub kernels: Vec<KernelSpec>,
    /// Treat the variables as parts of a composition and work in pivot coordinates.
    pub compositional: bool,
    pub delimiter: u8,
    pub unit_variance: bool,
    pub out: PathBuf,
}

/// What was written, for reporting.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub result: UnmixingResult,
    pub files: Vec<PathBuf>,
}

pub fn run_estimate(opts: &EstimateOptions) -> Result<EstimateOutput> {
    let estimator = Estimator::new(opts.method, opts.kernels.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let table = io::read_data(&opts.data, opts.delimiter)?;
    let locs = LocationSet::from_matrix(&table.coords).map_err(|e| schema(&opts.data, 1, e))?;

    let (values, names, contrast) = if opts.compositional {
        let comp = Composition::new(table.values.clone(), table.names.clone()).map_err(|e| match e {
            // data rows start on line 2
            SbssError::NonPositivePart { row, .. } => schema(&opts.data, row + 2, e),
            e => schema(&opts.data, 1, e),
        })?;
        let (coords, v) = ilr_pivot(&comp);
        let names: Vec<String> = (1..=coords.ncols()).map(|j| format!("ilr{j}")).collect();
        (coords, names, Some(v))
    } else {
        (table.values.clone(), table.names.clone(), None)
    };
    let sample = FieldSample::new(values, locs).map_err(|e| schema(&opts.data, 1, e))?;

    let result = match opts.method {
        Method::LdiffWhitened => sbss_ldiff_whitened(
            &sample,
            &opts.kernels[0],
            &opts.kernels[1],
            WhitenedOptions { unit_variance: opts.unit_variance },
        )?,
        _ => estimator.fit(&sample, &mut WeightCache::new())?,
    };
    let latent = recover_latent(&sample, &result, opts.method.centers_by_default())?;

    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    let mut files = Vec::new();
    let path = |name: &str| opts.out.join(name);

    let unmixing = path("unmixing.csv");
    io::write_matrix(&unmixing, &names, &result.w)?;
    files.push(unmixing);

    let comp_names: Vec<String> = (1..=result.w.nrows()).map(|k| format!("comp{k}")).collect();
    if let Some(d) = &result.diag_values {
        let diag = path("diag.csv");
        io::write_labelled(&diag, &["component".into(), "value".into()], &comp_names, &nalgebra::DMatrix::from_column_slice(d.len(), 1, d.as_slice()))?;
        files.push(diag);
    }

    let mut header: Vec<String> = table.coord_names.to_vec();
    header.extend(comp_names.iter().cloned());
    let mut latent_table = nalgebra::DMatrix::zeros(latent.nrows(), latent.ncols() + 2);
    latent_table.columns_mut(0, 2).copy_from(&table.coords);
    latent_table.columns_mut(2, latent.ncols()).copy_from(&latent);
    let latent_path = path("latent.csv");
    io::write_matrix(&latent_path, &header, &latent_table)?;
    files.push(latent_path);

    if let Some(v) = contrast {
        let loadings = combined_loadings(&v, &result.w, &table.names)?;
        let mut header = vec!["component".to_string()];
        header.extend(loadings.part_names.iter().cloned());
        let lpath = path("loadings.csv");
        io::write_labelled(&lpath, &header, &comp_names, &loadings.matrix)?;
        files.push(lpath);
    }
    Ok(EstimateOutput { result, files })
}

fn schema(path: &Path, line: usize, e: SbssError) -> CliError {
    CliError::Schema { path: path.to_path_buf(), line, message: e.to_string() }
}
