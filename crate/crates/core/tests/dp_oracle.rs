use portal_cluster::badcut::{point_flags, CutParams};
use portal_cluster::dp::{binarize, portal_tilde_cost, solve_dp, tree_points, DpParams};
use portal_cluster::{
    baseline_solve, exhaustive_portal_opt, tilde_cost, BaselineParams, Instance, Objective, Point, Relocation,
    ShiftedQuadtree, Solution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize, z: Objective) -> Instance {
    let mut pts = |c: usize| -> Vec<Point> {
        (0..c)
            .map(|_| Point::new(vec![rng.random_range(0.0..12.0), rng.random_range(0.0..12.0)]))
            .collect()
    };
    let clients = pts(n);
    let cands = pts(m);
    Instance::new(2, clients, cands, k, z).unwrap()
}

struct Setup {
    instance: Instance,
    relocation: Relocation,
    tree: ShiftedQuadtree,
}

fn setup(seed: u64, eps: f64, n: usize, m: usize, k: usize, z: Objective, relocate: bool) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = random_instance(&mut rng, n, m, k, z);
    let params = CutParams::new(eps, 2).unwrap();
    let baseline = baseline_solve(&instance, &BaselineParams::default(), seed).unwrap();
    let probe = ShiftedQuadtree::build(&instance.all_points(), params.rho, seed).unwrap();
    let flags = if relocate {
        point_flags(&probe, &instance, &baseline, &params)
    } else {
        vec![false; n]
    };
    let relocation = Relocation::from_flags(&instance, &baseline, &flags);
    let tree = ShiftedQuadtree::build(&tree_points(&instance, &relocation), params.rho, seed).unwrap();
    Setup { instance, relocation, tree }
}

#[test]
fn exact_dp_matches_the_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for t in 0..30u64 {
        let z = if t % 2 == 0 { Objective::Means } else { Objective::Median };
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=6);
        let k = rng.random_range(1..=3usize.min(m));
        let s = setup(t, 0.3, n, m, k, z, t % 3 != 0);
        let (oracle_sol, oracle) = exhaustive_portal_opt(&s.instance, &s.tree, &s.relocation, k).unwrap();
        let bt = binarize(&s.tree);
        let offsets = s.relocation.offsets(&s.instance);
        let out = solve_dp(&bt, &s.instance, &offsets, &DpParams::exact(0.3)).unwrap();
        assert!(out.exact);
        let tol = 1e-12 * oracle.max(1.0);
        assert!(out.tilde_cost_pr >= oracle - tol, "seed {t}: {} < {oracle}", out.tilde_cost_pr);
        assert!(out.tilde_cost_pr <= 1.3 * oracle + tol, "seed {t}");
        assert!((out.tilde_cost_pr - oracle).abs() <= 1e-9 * oracle.max(1.0), "seed {t}");
        assert!((out.dp_value - out.tilde_cost_pr).abs() <= 1e-9 * oracle.max(1.0));
        let o = portal_tilde_cost(&bt, &s.instance, &offsets, &oracle_sol).unwrap();
        assert!((o - oracle).abs() <= 1e-9 * oracle.max(1.0));
        assert!(out.solution.len() <= k);
        let straight = tilde_cost(&s.instance, &s.relocation, &out.solution).unwrap();
        assert!(straight <= out.tilde_cost_pr + tol);
    }
}

#[test]
fn coincident_clients_cost_nothing() {
    let pts: Vec<Point> = (0..4).map(|i| Point::new(vec![i as f64 * 3.0, 1.0])).collect();
    let instance = Instance::new(2, pts.clone(), pts, 4, Objective::Means).unwrap();
    let relocation = Relocation::identity(&instance);
    let tree = ShiftedQuadtree::build(&tree_points(&instance, &relocation), 0.2, 1).unwrap();
    let bt = binarize(&tree);
    let out = solve_dp(&bt, &instance, &relocation.offsets(&instance), &DpParams::exact(0.3)).unwrap();
    assert_eq!(out.tilde_cost_pr, 0.0);
    assert_eq!(out.solution.centers(), &[0, 1, 2, 3]);
    let (_, oracle) = exhaustive_portal_opt(&instance, &tree, &relocation, 4).unwrap();
    assert_eq!(oracle, 0.0);
}

#[test]
fn single_client_in_a_shared_leaf_has_no_detour() {
    let p = Point::new(vec![2.0, 2.0]);
    let instance = Instance::new(2, vec![p.clone()], vec![p], 1, Objective::Means).unwrap();
    let reloc = Relocation::identity(&instance);
    let tree = ShiftedQuadtree::build(&tree_points(&instance, &reloc), 0.2, 3).unwrap();
    let (_, oracle) = exhaustive_portal_opt(&instance, &tree, &reloc, 1).unwrap();
    let s = Solution::new(vec![0]);
    assert_eq!(oracle, tilde_cost(&instance, &reloc, &s).unwrap());
}

#[test]
fn quantized_mode_stays_close_and_feasible() {
    for t in 0..10u64 {
        let s = setup(100 + t, 0.3, 8, 6, 2, Objective::Means, true);
        let (_, oracle) = exhaustive_portal_opt(&s.instance, &s.tree, &s.relocation, 2).unwrap();
        let bt = binarize(&s.tree);
        let offsets = s.relocation.offsets(&s.instance);
        let mut params = DpParams::new(0.3);
        params.mode = portal_cluster::dp::DpMode::Quantized;
        let out = solve_dp(&bt, &s.instance, &offsets, &params).unwrap();
        assert!(!out.exact);
        assert!(out.solution.len() <= 2);
        assert!(out.tilde_cost_pr >= oracle - 1e-9 * oracle.max(1.0));
    }
}

#[test]
fn more_centers_never_cost_more() {
    for t in 0..8u64 {
        let s = setup(200 + t, 0.3, 8, 6, 1, Objective::Median, true);
        let bt = binarize(&s.tree);
        let offsets = s.relocation.offsets(&s.instance);
        let mut last = f64::INFINITY;
        for k in 1..=4 {
            let inst = s.instance.with_k(k).unwrap();
            let out = solve_dp(&bt, &inst, &offsets, &DpParams::exact(0.3)).unwrap();
            assert!(out.tilde_cost_pr <= last + 1e-12);
            last = out.tilde_cost_pr;
            // Relaxing the cost bucket never asks for more centers.
            let mut prev = usize::MAX;
            for f in [1.0, 1.1, 1.5, 3.0, 10.0] {
                let need = out.min_centers_within(f * out.dp_value).unwrap_or(usize::MAX);
                assert!(need <= prev);
                prev = need;
            }
        }
    }
}

#[test]
fn oracle_value_only_improves_with_more_portals() {
    for t in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + t);
        let instance = random_instance(&mut rng, 6, 5, 2, Objective::Means);
        let reloc = Relocation::identity(&instance);
        let pts = tree_points(&instance, &reloc);
        let coarse = ShiftedQuadtree::build(&pts, 0.4, t).unwrap();
        let fine = ShiftedQuadtree::build(&pts, 0.1, t).unwrap();
        // rho = 0.4 gives 2 intervals per edge and rho = 0.1 gives 8, so the
        // coarse lattice is a sublattice of the fine one.
        assert_eq!(fine.subdivisions() % coarse.subdivisions(), 0);
        let (_, a) = exhaustive_portal_opt(&instance, &coarse, &reloc, 2).unwrap();
        let (_, b) = exhaustive_portal_opt(&instance, &fine, &reloc, 2).unwrap();
        assert!(b <= a + 1e-9 * a.max(1.0), "{b} > {a}");
    }
}
