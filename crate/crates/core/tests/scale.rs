use dse_core::arch::{analyze, AccountingReport, AnalysisConfig};
use dse_core::catalog;
use dse_core::rational::Rational;
use dse_core::scale::{
    comm_per_epoch, comm_time, iteration_time, scaling_curve, ClusterSpec, Exact, Topology,
    TrainPlan,
};
use num_bigint::BigUint;
use num_rational::Ratio;
use proptest::prelude::*;

const GRAD_30MB: u128 = 30_000_000;

/// 3.5 TFLOP/s workers.
fn cluster(p: u64, bw: u64, topology: Topology) -> ClusterSpec {
    ClusterSpec::new(
        p,
        Rational::integer(bw),
        topology,
        Rational::integer(3_500_000_000_000),
    )
}

fn ratio(n: u128, d: u128) -> Exact {
    Ratio::new(BigUint::from(n), BigUint::from(d))
}

fn log2_ceil(p: u64) -> u64 {
    if p <= 1 {
        0
    } else {
        (64 - (p - 1).leading_zeros()) as u64
    }
}

fn nin() -> AccountingReport {
    analyze(&catalog::nin().architecture, &AnalysisConfig::new(1024)).unwrap()
}

#[test]
fn ps_doubling_series() {
    let t: Vec<Exact> = [2, 4, 8]
        .iter()
        .map(|&p| {
            comm_time(
                GRAD_30MB,
                &cluster(p, 1_000_000_000, Topology::ParameterServer),
            )
            .unwrap()
        })
        .collect();
    assert_eq!(&t[1] / &t[0], ratio(2, 1));
    assert_eq!(&t[2] / &t[0], ratio(4, 1));
}

#[test]
fn tree_doubling_series() {
    let tree = Topology::ReductionTree { branching: 2 };
    let t: Vec<Exact> = [2, 4, 8]
        .iter()
        .map(|&p| comm_time(GRAD_30MB, &cluster(p, 1_000_000_000, tree)).unwrap())
        .collect();
    assert_eq!(&t[1] / &t[0], ratio(4, 2));
    assert_eq!(&t[2] / &t[0], ratio(6, 2));
}

#[test]
fn speedup_peak_reported() {
    let tree = Topology::ReductionTree { branching: 2 };
    let ps: Vec<u64> = (0..=10).map(|k| 1 << k).collect();
    let curve = scaling_curve(&nin(), &cluster(1, 1_000_000_000, tree), 1024, &ps).unwrap();
    let best = curve
        .points
        .iter()
        .max_by(|a, b| a.speedup_vs_1.cmp(&b.speedup_vs_1))
        .unwrap();
    assert_eq!(curve.best_workers, best.workers);
    // Past the peak, adding workers only adds communication.
    let peak = curve
        .points
        .iter()
        .position(|p| p.workers == curve.best_workers)
        .unwrap();
    for w in curve.points[peak..].windows(2) {
        assert!(w[1].speedup_vs_1 <= w[0].speedup_vs_1);
    }
    for w in curve.points[..=peak].windows(2) {
        assert!(w[1].speedup_vs_1 >= w[0].speedup_vs_1);
    }
}

proptest! {
    #[test]
    fn ps_time_is_linear_in_workers(p in 1u64..100_000, q in 1u64..100_000, grad in 1u128..1u128 << 40, bw in 1u64..1 << 40) {
        let a = comm_time(grad, &cluster(p, bw, Topology::ParameterServer)).unwrap();
        let b = comm_time(grad, &cluster(q, bw, Topology::ParameterServer)).unwrap();
        prop_assert_eq!(&a / &b, ratio(p as u128, q as u128));
        prop_assert_eq!(a, ratio(grad * p as u128, bw as u128));
    }

    #[test]
    fn binary_tree_time_matches_closed_form(p in 1u64..1 << 30, grad in 0u128..1u128 << 40, bw in 1u64..1 << 40) {
        let t = comm_time(grad, &cluster(p, bw, Topology::ReductionTree { branching: 2 })).unwrap();
        prop_assert_eq!(t, ratio(grad * 2 * log2_ceil(p) as u128, bw as u128));
    }

    #[test]
    fn tree_time_flat_within_a_level(p in 2u64..1 << 20, b in 2u64..9) {
        let tree = Topology::ReductionTree { branching: b };
        // Smallest and largest worker counts sharing p's tree depth.
        let mut lo = 1u64;
        while lo * b < p {
            lo *= b;
        }
        let t = |n| comm_time(GRAD_30MB, &cluster(n, 1_000_000_000, tree)).unwrap();
        prop_assert_eq!(t(p), t(lo * b));
        prop_assert_eq!(t(p), t(lo + 1));
    }

    #[test]
    fn binary_tree_beats_ps_from_seven_workers(p in 7u64..1 << 20) {
        let bw = 1_000_000_000;
        let ps = comm_time(GRAD_30MB, &cluster(p, bw, Topology::ParameterServer)).unwrap();
        let tree = comm_time(GRAD_30MB, &cluster(p, bw, Topology::ReductionTree { branching: 2 })).unwrap();
        prop_assert!(tree < ps);
    }

    #[test]
    fn batch_moves_compute_not_comm(p in 1u64..256, batch in 1u64..4096, k in 2u64..8) {
        let report = nin();
        let c = cluster(p, 1_000_000_000, Topology::ReductionTree { branching: 2 });
        let a = iteration_time(&report, &c, batch).unwrap();
        let b = iteration_time(&report, &c, batch * k).unwrap();
        prop_assert_eq!(&a.comm_s, &b.comm_s);
        prop_assert_eq!(&a.compute_s * ratio(k as u128, 1), b.compute_s);
    }

    #[test]
    fn epoch_comm_halves_when_batch_doubles(iters in 1u64..10_000, batch in 1u64..2048, p in 1u64..128) {
        let report = nin();
        let c = cluster(p, 1_000_000_000, Topology::ParameterServer);
        let plan = TrainPlan { dataset_frames: iters * batch * 2, epochs: 1, batch };
        let doubled = TrainPlan { batch: batch * 2, ..plan };
        let a = comm_per_epoch(&report, &c, &plan).unwrap();
        let b = comm_per_epoch(&report, &c, &doubled).unwrap();
        prop_assert_eq!(a, b * ratio(2, 1));
    }

    #[test]
    fn fewer_parameters_scale_better(p in 1u64..1024, small in 1u128..1 << 30, extra in 1u128..1 << 30, tree in any::<bool>()) {
        let topology = if tree { Topology::ReductionTree { branching: 2 } } else { Topology::ParameterServer };
        let mut a = nin();
        a.totals.param_bytes = small;
        let mut b = a.clone();
        b.totals.param_bytes = small + extra;
        let c = cluster(p, 1_000_000_000, topology);
        let ra = iteration_time(&a, &c, 1024).unwrap().comp_comm_ratio;
        let rb = iteration_time(&b, &c, 1024).unwrap().comp_comm_ratio;
        match (ra, rb) {
            (Some(ra), Some(rb)) => prop_assert!(ra > rb),
            // A single worker in a tree communicates nothing.
            (None, None) => prop_assert!(tree && p == 1),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

/// 2 * ceil(log2 p) against p: the binary tree loses at 3 and 5 workers,
/// ties at 2, 4 and 6, and wins from 7 on.
#[test]
fn binary_tree_vs_ps_small_clusters() {
    let bw = 1_000_000_000;
    let mut slower = Vec::new();
    let mut ties = Vec::new();
    for p in 2..=64u64 {
        let ps = comm_time(GRAD_30MB, &cluster(p, bw, Topology::ParameterServer)).unwrap();
        let tree = comm_time(
            GRAD_30MB,
            &cluster(p, bw, Topology::ReductionTree { branching: 2 }),
        )
        .unwrap();
        if tree > ps {
            slower.push(p);
        } else if tree == ps {
            ties.push(p);
        }
    }
    assert_eq!(slower, [3, 5]);
    assert_eq!(ties, [2, 4, 6]);
}
