//! Built-in experiments: fixture mixtures, data generation and sampler setup.

use nalgebra::DMatrix;

use super::files::Meta;
use crate::error::{Error, Result};
use crate::model::{ComponentParams, Dataset, MixtureSpec, Trace};
use crate::sampler::{
    gibbs_multivariate, gibbs_univariate, simulate_from_allocation, simulate_potts_allocation,
    simulate_stratified, ConjugatePrior, PottsConfig, PriorSpec, RgPrior, SamplerConfig,
    SpatialCoupling,
};

const GALAXY: &str = include_str!("../../data/galaxy.csv");

/// Potts interaction used to generate the spatial data.
pub const SPATIAL_KAPPA: f64 = 0.3;
pub const SPATIAL_DIMS: [usize; 3] = [10, 10, 4];
pub const POTTS_SWEEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    /// Three univariate components, two of them overlapping.
    Eq7,
    /// Five univariate components with heavy overlap.
    Eq8,
    /// The 82 galaxy velocities (in 1000 km/s), K = 6.
    Galaxy,
    /// Two trivariate components on a Potts-correlated lattice.
    Spatial,
    /// A user-supplied dataset.
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Eq7 => "eq7",
            Experiment::Eq8 => "eq8",
            Experiment::Galaxy => "galaxy",
            Experiment::Spatial => "spatial",
            Experiment::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Eq7, Self::Eq8, Self::Galaxy, Self::Spatial, Self::Custom]
            .into_iter()
            .find(|e| e.name() == name)
    }

    /// Number of components fitted by default.
    pub fn default_k(self) -> Option<usize> {
        match self {
            Experiment::Eq7 => Some(3),
            Experiment::Eq8 => Some(5),
            Experiment::Galaxy => Some(6),
            Experiment::Spatial => Some(2),
            Experiment::Custom => None,
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Experiment::Galaxy => 82,
            Experiment::Spatial => SPATIAL_DIMS.iter().product(),
            _ => 100,
        }
    }

    /// `(iterations, burn-in)` at desk scale.
    pub fn default_iterations(self) -> (usize, usize) {
        match self {
            Experiment::Spatial => (10_000, 5_000),
            _ => (25_000, 5_000),
        }
    }

    pub fn fixture_spec(self) -> Result<Option<MixtureSpec>> {
        Ok(match self {
            Experiment::Eq7 => Some(eq7_spec()?),
            Experiment::Eq8 => Some(eq8_spec()?),
            Experiment::Spatial => Some(spatial_spec()?),
            Experiment::Galaxy | Experiment::Custom => None,
        })
    }
}

/// `0.10 N(-20, 1) + 0.65 N(20, 3) + 0.25 N(21, 0.5)` (variances).
pub fn eq7_spec() -> Result<MixtureSpec> {
    MixtureSpec::univariate(&[(0.10, -20.0, 1.0), (0.65, 20.0, 3.0), (0.25, 21.0, 0.5)])
}

pub fn eq8_spec() -> Result<MixtureSpec> {
    MixtureSpec::univariate(&[
        (0.20, 19.0, 5.0),
        (0.20, 19.0, 1.0),
        (0.25, 23.0, 1.0),
        (0.20, 29.0, 0.5),
        (0.15, 33.0, 3.0),
    ])
}

pub fn spatial_spec() -> Result<MixtureSpec> {
    let s1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.8, 0.64, 0.8, 1.0, 0.8, 0.64, 0.8, 1.0]) * 0.5;
    let s2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]) * 0.5;
    MixtureSpec::new(
        vec![0.5, 0.5],
        vec![
            ComponentParams::multivariate(vec![4.0, 5.0, 6.0], s1)?,
            ComponentParams::multivariate(vec![6.0, 7.0, 8.0], s2)?,
        ],
    )
}

pub fn galaxy_dataset() -> Result<Dataset> {
    let points = GALAXY
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map(|v| vec![v])
                .map_err(|_| Error::InvalidDataset(format!("bad galaxy record '{l}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(points, None, None)
}

/// Generates the experiment's dataset and the metadata describing it.
pub fn simulate(exp: Experiment, n: Option<usize>, dims: Option<[usize; 3]>, seed: u64) -> Result<(Dataset, Meta)> {
    let mut meta = Meta::new();
    meta.set("experiment", exp.name());
    let data = match exp {
        Experiment::Eq7 | Experiment::Eq8 => {
            let n = n.unwrap_or(exp.default_n());
            meta.set("seed", seed);
            meta.set("generator", "stratified");
            simulate_stratified(&exp.fixture_spec()?.expect("fixture"), n, seed)?
        }
        Experiment::Galaxy => {
            if n.is_some_and(|n| n != 82) {
                return Err(Error::InvalidConfig("the galaxy data has exactly 82 observations".into()));
            }
            galaxy_dataset()?
        }
        Experiment::Spatial => {
            let dims = dims.unwrap_or(SPATIAL_DIMS);
            let sites: usize = dims.iter().product();
            if n.is_some_and(|n| n != sites) {
                return Err(Error::InvalidConfig(format!(
                    "--n {} disagrees with the {sites} sites of the lattice",
                    n.unwrap_or_default()
                )));
            }
            let lattice = simulate_potts_allocation(&PottsConfig {
                dims,
                k: 2,
                kappa: SPATIAL_KAPPA,
                sweeps: POTTS_SWEEPS,
                seed,
            })?;
            meta.set("seed", seed);
            meta.set("dims", format_dims(dims));
            meta.set("kappa", SPATIAL_KAPPA);
            meta.set("potts_sweeps", POTTS_SWEEPS);
            simulate_from_allocation(&spatial_spec()?, &lattice.labels, seed.wrapping_add(1))?
        }
        Experiment::Custom => {
            return Err(Error::InvalidConfig(
                "the custom experiment has nothing to simulate; pass --data to sample".into(),
            ))
        }
    };
    Ok((data, meta))
}

pub fn format_dims(d: [usize; 3]) -> String {
    format!("{},{},{}", d[0], d[1], d[2])
}

pub fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("bad lattice dimensions '{s}'")))?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok([a, b, c]),
        _ => Err(Error::InvalidConfig(format!(
            "lattice dimensions must be three positive integers, got '{s}'"
        ))),
    }
}

/// Chooses the sampler for the data dimension and runs it.
pub fn run_sampler(
    data: &Dataset,
    data_meta: &Meta,
    k: usize,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    inject: bool,
) -> Result<(Trace, Meta)> {
    let mut cfg = SamplerConfig::new(iterations, burn_in, k, seed);
    cfg.switch_injection = inject;
    let prior = if data.dim() == 1 {
        let xs: Vec<f64> = data.points().iter().map(|p| p[0]).collect();
        PriorSpec::Univariate(RgPrior::from_data(&xs)?)
    } else {
        PriorSpec::Multivariate(ConjugatePrior::spatial_default(data.dim()))
    };
    if let Some(dims) = data_meta.get("dims") {
        let kappa = data_meta
            .get("kappa")
            .and_then(|v| v.parse().ok())
            .unwrap_or(SPATIAL_KAPPA);
        cfg.spatial = Some(SpatialCoupling {
            dims: parse_dims(dims)?,
            kappa,
        });
    }
    let trace = match &prior {
        PriorSpec::Univariate(_) => gibbs_univariate(data, &prior, &cfg)?,
        PriorSpec::Multivariate(_) => gibbs_multivariate(data, &prior, &cfg)?,
    };
    let mut meta = Meta::new();
    meta.set("seed", seed);
    meta.set("iterations", iterations);
    meta.set("burn_in", burn_in);
    meta.set("switch_injection", inject);
    if inject {
        meta.set("switch_rate", cfg.switch_rate);
    }
    if let Some(s) = &cfg.spatial {
        meta.set("spatial_dims", format_dims(s.dims));
        meta.set("spatial_kappa", s.kappa);
    }
    for (key, v) in prior.describe() {
        meta.set(key, v);
    }
    Ok((trace, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mixture_pdf;

    #[test]
    fn fixtures_are_valid() {
        assert_eq!(eq7_spec().unwrap().k(), 3);
        assert_eq!(eq8_spec().unwrap().k(), 5);
        let s = spatial_spec().unwrap();
        assert_eq!((s.k(), s.dim()), (2, 3));
        assert_eq!(s.components()[0].cov(2, 0), 0.32);
    }

    #[test]
    fn eq7_density_at_minus_twenty() {
        // 0.1 / sqrt(2 pi) plus negligible tails of the other two
        let v = mixture_pdf(&eq7_spec().unwrap(), &[-20.0]).unwrap();
        assert!((v - 0.1 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((v - 0.039894).abs() < 1e-6);
    }

    #[test]
    fn galaxy_has_82_velocities() {
        let g = galaxy_dataset().unwrap();
        assert_eq!(g.n(), 82);
        assert_eq!(g.points()[0], vec![9.172]);
        assert_eq!(g.points()[81], vec![34.279]);
    }

    #[test]
    fn eq7_counts_are_exact() {
        let (d, _) = simulate(Experiment::Eq7, None, None, 7).unwrap();
        let mut counts = [0; 3];
        for &z in d.true_allocation().unwrap() {
            counts[z] += 1;
        }
        assert_eq!(counts, [10, 65, 25]);
    }

    #[test]
    fn spatial_dataset_shape() {
        let (d, meta) = simulate(Experiment::Spatial, None, Some([4, 3, 2]), 1).unwrap();
        assert_eq!((d.n(), d.dim()), (24, 3));
        assert_eq!(meta.get("dims"), Some("4,3,2"));
        assert!(simulate(Experiment::Spatial, Some(10), Some([4, 3, 2]), 1).is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("10, 10,4").unwrap(), [10, 10, 4]);
        assert!(parse_dims("10,10").is_err());
        assert!(parse_dims("0,1,1").is_err());
        assert!(parse_dims("a,b,c").is_err());
    }
}
