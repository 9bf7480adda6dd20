use std::fmt;

use streetsim::benchmark::BenchmarkError;
use streetsim::mobility::MobilityError;
use streetsim::perception::PerceptionError;
use streetsim::world::WorldError;

pub const CONFIG: u8 = 1;
pub const IO: u8 = 2;
pub const PROVIDER: u8 = 3;
pub const ENGINE: u8 = 4;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub trait WithCode<T> {
    fn code(self, code: u8) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> CliResult<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

pub fn config_error(msg: impl fmt::Display) -> Failure {
    Failure {
        code: CONFIG,
        error: anyhow::anyhow!("{msg}"),
    }
}

fn world_code(e: &WorldError) -> u8 {
    match e {
        WorldError::NoStreetView { .. } => ENGINE,
        _ => CONFIG,
    }
}

fn perception_code(e: &PerceptionError) -> u8 {
    match e {
        PerceptionError::Provider(_) => PROVIDER,
        PerceptionError::World(w) => world_code(w),
        _ => ENGINE,
    }
}

fn mobility_code(e: &MobilityError) -> u8 {
    match e {
        MobilityError::Provider(_)
        | MobilityError::InvalidAction(_)
        | MobilityError::IndexOutOfRange { .. } => PROVIDER,
        MobilityError::Perception(p) => perception_code(p),
        MobilityError::World(w) => world_code(w),
        MobilityError::UnknownMode(_) => CONFIG,
        _ => ENGINE,
    }
}

fn benchmark_code(e: &BenchmarkError) -> u8 {
    match e {
        BenchmarkError::Provider(_) | BenchmarkError::UnparseableAnswer { .. } => PROVIDER,
        BenchmarkError::Perception(p) => perception_code(p),
        BenchmarkError::Mobility(m) => mobility_code(m),
        BenchmarkError::World(w) => world_code(w),
        BenchmarkError::InvalidConfig(_) | BenchmarkError::InfeasibleParams(_) => CONFIG,
    }
}

impl From<BenchmarkError> for Failure {
    fn from(e: BenchmarkError) -> Self {
        Failure {
            code: benchmark_code(&e),
            error: e.into(),
        }
    }
}

impl From<MobilityError> for Failure {
    fn from(e: MobilityError) -> Self {
        Failure {
            code: mobility_code(&e),
            error: e.into(),
        }
    }
}

impl From<PerceptionError> for Failure {
    fn from(e: PerceptionError) -> Self {
        Failure {
            code: perception_code(&e),
            error: e.into(),
        }
    }
}

impl From<WorldError> for Failure {
    fn from(e: WorldError) -> Self {
        Failure {
            code: world_code(&e),
            error: e.into(),
        }
    }
}

impl From<streetsim::provider::ProviderError> for Failure {
    fn from(e: streetsim::provider::ProviderError) -> Self {
        Failure {
            code: PROVIDER,
            error: e.into(),
        }
    }
}
