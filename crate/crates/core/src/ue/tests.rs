use super::*;
use crate::netmodel::{
    apply_reservation, design_from_fr_route, n4_fixture, EffectiveNetwork, Link, Node, NodeRole,
    RoadNetwork,
};

fn n4_effective(route: &[usize]) -> (RoadNetwork, Vec<bool>) {
    let net = n4_fixture();
    let design = design_from_fr_route(&net, 0, route).unwrap();
    let reserved = design.reserved().to_vec();
    (net, reserved)
}

fn parallel(d: f64, c1: f64, t1: f64, c2: f64, t2: f64) -> RoadNetwork {
    let nodes = vec![
        Node { id: 0, x: 0.0, y: 0.0, demand: d, role: NodeRole::Interior },
        Node { id: 1, x: 0.5, y: 0.5, demand: 0.0, role: NodeRole::Interior },
        Node { id: 2, x: 1.0, y: 0.0, demand: 0.0, role: NodeRole::Exit },
    ];
    // route A: 0 -> 2 directly, route B: 0 -> 1 -> 2 with a free connector
    let links = vec![
        Link { from: 0, to: 2, capacity: c1, free_flow_time: t1, lanes: 1 },
        Link { from: 0, to: 1, capacity: c2, free_flow_time: t2, lanes: 1 },
        Link { from: 1, to: 2, capacity: 1e9, free_flow_time: 1e-9, lanes: 1 },
    ];
    RoadNetwork::new(nodes, links, vec![]).unwrap()
}

/// Simpson quadrature of the BPR curve, independent of the closed form.
fn simpson_integral(x: f64, c: f64, t: f64) -> f64 {
    let n = 2000;
    let h = x / n as f64;
    let f = |v: f64| t * (1.0 + 0.15 * (v / c).powi(4));
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn bpr_reference_values() {
    assert_eq!(bpr(0.0, 35.0, 1.0), 1.0);
    assert!((bpr(61.0, 35.0, 1.0) - 2.38).abs() < 0.005);
    let path = bpr(39.0, 30.0, 1.0) + bpr(39.0, 45.0, 1.0);
    assert!((path - 2.51).abs() < 0.005);
}

#[test]
fn bpr_is_increasing_and_convex() {
    let mut prev_t = bpr(0.0, 20.0, 2.0);
    let mut prev_slope = 0.0;
    for i in 1..200 {
        let f = i as f64;
        let t = bpr(f, 20.0, 2.0);
        let slope = t - prev_t;
        assert!(slope > 0.0 && slope > prev_slope);
        prev_t = t;
        prev_slope = slope;
    }
}

#[test]
fn beckmann_closed_form() {
    let net = n4_fixture();
    let eff = EffectiveNetwork::unreserved(&net);
    assert_eq!(beckmann_objective(&[0.0; 6], &eff), 0.0);
    let mut flows = [0.0; 6];
    flows[2] = 35.0;
    let v = beckmann_objective(&flows, &eff);
    assert!((v - 1.03 * 35.0).abs() < 1e-12);
}

#[test]
fn beckmann_matches_quadrature_on_n4() {
    let (net, reserved) = n4_effective(&[3, 1, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let flows = [0.0, 39.0, 61.0, 0.0, 0.0, 39.0];
    let closed_form = beckmann_objective(&flows, &eff);
    let oracle: f64 = (0..6)
        .filter(|&l| !eff.is_closed(l))
        .map(|l| simpson_integral(flows[l], eff.capacity(l), eff.free_flow_time(l)))
        .sum();
    assert!(((closed_form - oracle) / oracle).abs() <= 1e-9);
}

#[test]
fn total_time_reference_values() {
    let (net, reserved) = n4_effective(&[3, 1, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let t = total_evac_time(&[0.0, 39.0, 61.0, 0.0, 0.0, 39.0], &eff);
    assert!((t - 243.43).abs() < 0.5, "{t}");

    let (net, reserved) = n4_effective(&[3, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let t = total_evac_time(&[42.0, 58.0, 0.0, 14.0, 28.0, 72.0], &eff);
    assert!((t - 507.56).abs() < 0.5, "{t}");
    assert_eq!(total_evac_time(&[0.0; 6], &eff), 0.0);
}

#[test]
fn ue_on_n4_design_310() {
    let (net, reserved) = n4_effective(&[3, 1, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let res = solve_ue(&eff, 1e-3, None).unwrap();
    assert!(res.converged);
    let expected = [0.0, 39.0, 61.0, 0.0, 0.0, 39.0];
    for (x, e) in res.flows.iter().zip(expected) {
        assert!((x - e).abs() <= 2.0, "{:?}", res.flows);
    }
    assert!((res.total_time - 243.43).abs() / 243.43 < 0.01);
    assert!(res.flows.conservation_residual(&eff) <= 1e-6 * 100.0);
}

#[test]
fn ue_on_n4_design_3210_uses_direct_arc() {
    let (net, reserved) = n4_effective(&[3, 2, 1, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let res = solve_ue(&eff, 1e-3, None).unwrap();
    assert_eq!(res.flows[2], 100.0);
    assert!((res.total_time - 1099.58).abs() / 1099.58 < 0.01);
}

#[test]
fn zero_demand_converges_immediately() {
    let net = parallel(0.0, 10.0, 1.0, 10.0, 1.0);
    let eff = EffectiveNetwork::unreserved(&net);
    let res = solve_ue(&eff, 1e-3, None).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations, 0);
    assert_eq!(res.total_time, 0.0);
    assert!(res.flows.iter().all(|&x| x == 0.0));
    let so = solve_so(&eff, 1e-3).unwrap();
    assert_eq!(so.total_time, 0.0);
}

/// Equal route costs on two parallel routes, solved by bisection.
fn analytic_split(d: f64, c1: f64, t1: f64, c2: f64, t2: f64) -> f64 {
    let excess = |x: f64| bpr(x, c1, t1) - bpr(d - x, c2, t2) - 1e-9;
    if excess(0.0) >= 0.0 {
        return 0.0;
    }
    if excess(d) <= 0.0 {
        return d;
    }
    let (mut lo, mut hi) = (0.0, d);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid
        } else {
            lo = mid
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn parallel_routes_match_analytic_equilibrium() {
    for &(d, c1, t1, c2, t2) in &[
        (100.0, 35.0, 1.0, 30.0, 2.0),
        (250.0, 50.0, 0.4, 20.0, 0.3),
        (10.0, 5.0, 1.0, 5.0, 1.0),
        (80.0, 60.0, 3.0, 10.0, 1.0),
    ] {
        let net = parallel(d, c1, t1, c2, t2);
        let eff = EffectiveNetwork::unreserved(&net);
        let res = solve_ue(&eff, 1e-13, None).unwrap();
        let oracle = analytic_split(d, c1, t1, c2, t2);
        let got = res.flows[0];
        let scale = oracle.abs().max(d * 1e-4);
        assert!((got - oracle).abs() / scale < 5e-5, "got {got}, oracle {oracle}");
    }
}

#[test]
fn single_route_so_equals_ue() {
    let net = n4_fixture();
    let design = design_from_fr_route(&net, 0, &[3, 2, 1, 0]).unwrap();
    let eff = apply_reservation(&net, &design);
    let ue = solve_ue(&eff, 1e-3, None).unwrap();
    let so = solve_so(&eff, 1e-3).unwrap();
    assert_eq!(ue.total_time, so.total_time);
}

#[test]
fn so_bounds_ue_on_n4_30() {
    let (net, reserved) = n4_effective(&[3, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let ue = solve_ue(&eff, 1e-4, None).unwrap();
    let so = solve_so(&eff, 1e-4).unwrap();
    assert!(so.total_time <= 507.56 * 1.01);
    assert!(so.total_time <= ue.total_time + 1e-3 * ue.total_time);
    assert!((ue.total_time - 507.56).abs() / 507.56 < 0.01);
}

#[test]
fn disconnected_source_is_reported() {
    let net = n4_fixture();
    // reserving (0,3), (0,1) and (0,2) isolates node 0
    let eff = EffectiveNetwork::from_reserved(&net, &[true, true, true, false, false, false]);
    assert!(matches!(solve_ue(&eff, 1e-3, None), Err(Error::DisconnectedSource { node: 0 })));
}

#[test]
fn warm_start_reroutes_stranded_flow() {
    let net = n4_fixture();
    let open = EffectiveNetwork::unreserved(&net);
    let base = solve_ue(&open, 1e-3, None).unwrap();
    let (_, reserved) = n4_effective(&[3, 1, 0]);
    let eff = EffectiveNetwork::from_reserved(&net, &reserved);
    let warm = solve_ue(&eff, 1e-10, Some(&base.flows)).unwrap();
    let cold = solve_ue(&eff, 1e-10, None).unwrap();
    assert_eq!(warm.flows[0], 0.0);
    assert_eq!(warm.flows[4], 0.0);
    assert!((warm.total_time - cold.total_time).abs() / cold.total_time < 1e-4);
}

#[test]
fn objective_traces_never_increase() {
    for route in [&[3, 0][..], &[3, 1, 0], &[3, 2, 0], &[3, 2, 1, 0]] {
        let (net, reserved) = n4_effective(route);
        let eff = EffectiveNetwork::from_reserved(&net, &reserved);
        for res in [solve_ue(&eff, 1e-6, None).unwrap(), solve_so(&eff, 1e-6).unwrap()] {
            assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
