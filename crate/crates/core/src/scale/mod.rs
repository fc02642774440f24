//! Synchronous data-parallel training cost: gradient exchange under a
//! parameter server or a reduction tree, compute time from peak throughput,
//! scaling curves and whole-run estimates.
//!
//! Every time is an exact rational number of seconds. Communication and
//! computation are summed without overlap, and latency is ignored.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::arch::AccountingReport;
use crate::rational::Rational;
use crate::units;

/// Exact non-negative quantity (seconds, speedups, ratios).
pub type Exact = Ratio<BigUint>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaleError {
    #[error("invalid cluster: {0}")]
    InvalidCluster(String),
    #[error("invalid training plan: {0}")]
    InvalidPlan(String),
    #[error("invalid topology `{0}`; expected ps, tree or tree:<b>")]
    Topology(String),
    #[error("no worker counts given")]
    NoPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    /// One node receives every worker's gradients.
    ParameterServer,
    /// Gradients are summed up a tree with fan-in `branching`, then the
    /// result is broadcast back down.
    ReductionTree { branching: u64 },
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::ParameterServer => write!(f, "ps"),
            Topology::ReductionTree { branching } => write!(f, "tree:{branching}"),
        }
    }
}

impl FromStr for Topology {
    type Err = ScaleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScaleError::Topology(s.to_string());
        match s.trim() {
            "ps" | "parameter-server" | "parameter_server" => Ok(Topology::ParameterServer),
            "tree" => Ok(Topology::ReductionTree { branching: 2 }),
            t => {
                let b = t.strip_prefix("tree:").ok_or_else(bad)?;
                let branching = b.parse().map_err(|_| bad())?;
                Ok(Topology::ReductionTree { branching })
            }
        }
    }
}

fn default_efficiency() -> Rational {
    Rational::new(1, 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub workers: u64,
    /// Bytes per second each node can send and receive.
    pub bandwidth: Rational,
    pub topology: Topology,
    /// Peak FLOP/s of one worker.
    pub throughput: Rational,
    /// Fraction of peak actually achieved.
    #[serde(default = "default_efficiency")]
    pub efficiency: Rational,
}

impl ClusterSpec {
    pub fn new(
        workers: u64,
        bandwidth: Rational,
        topology: Topology,
        throughput: Rational,
    ) -> Self {
        ClusterSpec {
            workers,
            bandwidth,
            topology,
            throughput,
            efficiency: default_efficiency(),
        }
    }

    pub fn with_workers(self, workers: u64) -> Self {
        ClusterSpec { workers, ..self }
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        let bad = |m: &str| Err(ScaleError::InvalidCluster(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.bandwidth.is_zero() {
            return bad("bandwidth must be positive");
        }
        if self.throughput.is_zero() {
            return bad("throughput must be positive");
        }
        if self.efficiency.is_zero() || self.efficiency.numer() > self.efficiency.denom() {
            return bad("efficiency must be in (0, 1]");
        }
        if let Topology::ReductionTree { branching } = self.topology {
            if branching < 2 {
                return bad("tree branching factor must be at least 2");
            }
        }
        Ok(())
    }
}

fn exact(r: Rational) -> Exact {
    Ratio::new(BigUint::from(r.numer()), BigUint::from(r.denom()))
}

fn int(n: impl Into<BigUint>) -> Exact {
    Ratio::from_integer(n.into())
}

/// `ceil(log_b(p))`: levels of a `b`-ary tree over `p` leaves.
pub fn tree_depth(workers: u64, branching: u64) -> u32 {
    let mut depth = 0;
    let mut reach: u128 = 1;
    while reach < workers as u128 {
        reach *= branching as u128;
        depth += 1;
    }
    depth
}

/// Seconds to exchange `grad_bytes` of gradients once.
///
/// Parameter server: `grad_bytes * p / BW`. Reduction tree:
/// `grad_bytes * b * ceil(log_b p) / BW`, zero for a single worker.
pub fn comm_time(grad_bytes: u128, cluster: &ClusterSpec) -> Result<Exact, ScaleError> {
    cluster.validate()?;
    let per_node = int(grad_bytes) / exact(cluster.bandwidth);
    Ok(match cluster.topology {
        Topology::ParameterServer => per_node * int(cluster.workers),
        Topology::ReductionTree { branching } => {
            per_node * int(branching) * int(tree_depth(cluster.workers, branching))
        }
    })
}

/// Per-iteration cost at one worker count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostEstimate {
    pub workers: u64,
    pub batch: u64,
    pub comm_s: Exact,
    pub compute_s: Exact,
    pub total_s: Exact,
    /// Single-worker time over this time, at the same batch.
    pub speedup_vs_1: Exact,
    /// Computation over communication; `None` when nothing is communicated.
    pub comp_comm_ratio: Option<Exact>,
    pub warnings: Vec<String>,
}

fn secs(x: &Exact) -> String {
    units::big_decimal(x.numer().clone(), x.denom().clone(), 9)
}

fn plain(x: &Exact) -> String {
    units::big_decimal(x.numer().clone(), x.denom().clone(), 4)
}

fn frac(x: &Exact) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn to_f64(x: &Exact) -> f64 {
    use num_traits::ToPrimitive;
    let (n, d) = (x.numer().to_f64(), x.denom().to_f64());
    match (n, d) {
        (Some(n), Some(d)) => n / d,
        _ => f64::NAN,
    }
}

impl Serialize for CostEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct ExactFields {
            comm_s: String,
            compute_s: String,
            total_s: String,
            speedup: String,
            ratio: Option<String>,
        }
        let mut st = s.serialize_struct("CostEstimate", 9)?;
        st.serialize_field("workers", &self.workers)?;
        st.serialize_field("batch", &self.batch)?;
        st.serialize_field("comm_s", &secs(&self.comm_s))?;
        st.serialize_field("compute_s", &secs(&self.compute_s))?;
        st.serialize_field("total_s", &secs(&self.total_s))?;
        st.serialize_field("speedup", &plain(&self.speedup_vs_1))?;
        st.serialize_field("ratio", &self.comp_comm_ratio.as_ref().map(plain))?;
        st.serialize_field(
            "exact",
            &ExactFields {
                comm_s: frac(&self.comm_s),
                compute_s: frac(&self.compute_s),
                total_s: frac(&self.total_s),
                speedup: frac(&self.speedup_vs_1),
                ratio: self.comp_comm_ratio.as_ref().map(frac),
            },
        )?;
        st.serialize_field("warnings", &self.warnings)?;
        st.end()
    }
}

/// Forward + backward time of one batch split evenly across the workers.
fn compute_time(flops_per_sample: u128, batch: u64, cluster: &ClusterSpec) -> Exact {
    let work = int(3u32) * int(flops_per_sample) * int(batch);
    let rate = int(cluster.workers) * exact(cluster.throughput) * exact(cluster.efficiency);
    work / rate
}

fn split(
    flops_per_sample: u128,
    grad_bytes: u128,
    batch: u64,
    cluster: &ClusterSpec,
) -> Result<(Exact, Exact), ScaleError> {
    Ok((
        comm_time(grad_bytes, cluster)?,
        compute_time(flops_per_sample, batch, cluster),
    ))
}

/// Cost of one synchronous iteration at global batch `batch`. Gradients are
/// the size of the weights.
pub fn iteration_time(
    report: &AccountingReport,
    cluster: &ClusterSpec,
    batch: u64,
) -> Result<CostEstimate, ScaleError> {
    if batch == 0 {
        return Err(ScaleError::InvalidPlan("batch must be at least 1".into()));
    }
    let flops = report.forward_flops_per_sample();
    let grad = report.totals.param_bytes;
    let (comm_s, compute_s) = split(flops, grad, batch, cluster)?;
    let total_s = &comm_s + &compute_s;

    let (c1, m1) = split(flops, grad, batch, &cluster.with_workers(1))?;
    let single = c1 + m1;
    let speedup_vs_1 = if total_s.is_zero() {
        Exact::one()
    } else {
        &single / &total_s
    };
    let comp_comm_ratio = (!comm_s.is_zero()).then(|| &compute_s / &comm_s);

    let mut warnings = Vec::new();
    if batch < cluster.workers {
        warnings.push(format!(
            "batch {batch} is smaller than {} workers; {} workers idle",
            cluster.workers,
            cluster.workers - batch
        ));
    }
    Ok(CostEstimate {
        workers: cluster.workers,
        batch,
        comm_s,
        compute_s,
        total_s,
        speedup_vs_1,
        comp_comm_ratio,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScalingCurve {
    pub topology: Topology,
    pub points: Vec<CostEstimate>,
    /// Worker count with the highest speedup (the smallest on ties).
    pub best_workers: u64,
}

/// One estimate per worker count, everything else taken from `base`.
pub fn scaling_curve(
    report: &AccountingReport,
    base: &ClusterSpec,
    batch: u64,
    workers: &[u64],
) -> Result<ScalingCurve, ScaleError> {
    if workers.is_empty() {
        return Err(ScaleError::NoPoints);
    }
    let points = workers
        .iter()
        .map(|&p| iteration_time(report, &base.with_workers(p), batch))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = &points[0];
    for p in &points[1..] {
        if p.speedup_vs_1 > best.speedup_vs_1 {
            best = p;
        }
    }
    Ok(ScalingCurve {
        topology: base.topology,
        best_workers: best.workers,
        points,
    })
}

/// `p,comm_s,compute_s,total_s,speedup,ratio`, one line per point.
pub fn curve_to_csv(curve: &ScalingCurve) -> String {
    let mut out = String::from("p,comm_s,compute_s,total_s,speedup,ratio\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.workers,
            secs(&p.comm_s),
            secs(&p.compute_s),
            secs(&p.total_s),
            plain(&p.speedup_vs_1),
            p.comp_comm_ratio.as_ref().map(plain).unwrap_or_default()
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainPlan {
    pub dataset_frames: u64,
    pub epochs: u64,
    pub batch: u64,
}

impl TrainPlan {
    pub fn validate(&self) -> Result<(), ScaleError> {
        let bad = |m: &str| Err(ScaleError::InvalidPlan(m.to_string()));
        match (self.dataset_frames, self.epochs, self.batch) {
            (0, _, _) => bad("dataset_frames must be at least 1"),
            (_, 0, _) => bad("epochs must be at least 1"),
            (_, _, 0) => bad("batch must be at least 1"),
            _ => Ok(()),
        }
    }

    /// `ceil(dataset_frames / batch)`.
    pub fn iterations_per_epoch(&self) -> u64 {
        self.dataset_frames.div_ceil(self.batch)
    }
}

/// Forward + backward FLOPs over the whole run: 3 x per-frame forward x
/// frames x epochs.
pub fn total_training_ops(report: &AccountingReport, plan: &TrainPlan) -> BigUint {
    BigUint::from(3u32)
        * BigUint::from(report.forward_flops_per_sample())
        * BigUint::from(plan.dataset_frames)
        * BigUint::from(plan.epochs)
}

/// Whole-run estimate for a plan on a cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingEstimate {
    pub plan: TrainPlan,
    pub iteration: CostEstimate,
    pub iterations_per_epoch: u64,
    pub comm_per_epoch_s: Exact,
    pub total_comm_s: Exact,
    pub total_compute_s: Exact,
    pub total_s: Exact,
    pub total_ops: BigUint,
}

impl Serialize for TrainingEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TrainingEstimate", 8)?;
        st.serialize_field("plan", &self.plan)?;
        st.serialize_field("iteration", &self.iteration)?;
        st.serialize_field("iterations_per_epoch", &self.iterations_per_epoch)?;
        st.serialize_field("comm_per_epoch_s", &secs(&self.comm_per_epoch_s))?;
        st.serialize_field("total_comm_s", &secs(&self.total_comm_s))?;
        st.serialize_field("total_compute_s", &secs(&self.total_compute_s))?;
        st.serialize_field("total_s", &secs(&self.total_s))?;
        // Too large for exact JSON numbers in most clients.
        st.serialize_field("total_ops", &self.total_ops.to_string())?;
        st.end()
    }
}

/// Communication seconds spent in one epoch.
pub fn comm_per_epoch(
    report: &AccountingReport,
    cluster: &ClusterSpec,
    plan: &TrainPlan,
) -> Result<Exact, ScaleError> {
    plan.validate()?;
    Ok(comm_time(report.totals.param_bytes, cluster)? * int(plan.iterations_per_epoch()))
}

pub fn training_time(
    report: &AccountingReport,
    cluster: &ClusterSpec,
    plan: &TrainPlan,
) -> Result<TrainingEstimate, ScaleError> {
    plan.validate()?;
    let iteration = iteration_time(report, cluster, plan.batch)?;
    let per_epoch = plan.iterations_per_epoch();
    let iters = int(per_epoch) * int(plan.epochs);
    let total_comm_s = &iteration.comm_s * &iters;
    let total_compute_s = &iteration.compute_s * &iters;
    Ok(TrainingEstimate {
        plan: *plan,
        iterations_per_epoch: per_epoch,
        comm_per_epoch_s: &iteration.comm_s * int(per_epoch),
        total_s: &total_comm_s + &total_compute_s,
        total_comm_s,
        total_compute_s,
        total_ops: total_training_ops(report, plan),
        iteration,
    })
}
