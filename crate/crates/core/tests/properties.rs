use proptest::prelude::*;

use modelkit::cli::{parse_model_expr, sig6, ModelExpr, Value};
use modelkit::distributions::{normal_model, Pmf};
use modelkit::inference::{kl_divergence, ks_stat};
use modelkit::sims::{agent_choice, network_degrees, network_sim_model, search_run, NetworkSimConfig, SearchConfig};
use modelkit::transforms::{truncate, Region};
use modelkit::{DataSet, Params, RandomStream};

fn ident() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,6}"
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-1e6f64..1e6).prop_map(Value::Number),
        ident().prop_map(Value::Ident),
        "[ -~]{0,8}".prop_map(Value::Str),
        prop::collection::vec(-1e3f64..1e3, 1..4).prop_map(Value::List),
    ]
}

fn expr() -> impl Strategy<Value = ModelExpr> {
    let leaf = ident().prop_map(ModelExpr::Name);
    leaf.prop_recursive(4, 24, 3, |inner| {
        (
            ident(),
            prop::collection::vec(inner, 0..3),
            prop::collection::vec((ident(), value()), 0..3),
        )
            .prop_filter("calls need an argument", |(_, a, k)| !a.is_empty() || !k.is_empty())
            .prop_map(|(name, args, kwargs)| ModelExpr::Call { name, args, kwargs })
    })
}

fn pmf() -> impl Strategy<Value = Pmf> {
    prop::collection::vec((0i32..8, 0.01f64..1.0), 1..8).prop_map(|pts| {
        let (rows, w): (Vec<_>, Vec<_>) = pts.into_iter().map(|(x, w)| (vec![x as f64], w)).unzip();
        Pmf::from_rows(rows, w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_a_fixpoint(e in expr()) {
        let printed = e.to_string();
        let again = parse_model_expr(&printed).unwrap();
        prop_assert_eq!(&again.to_string(), &printed);
        prop_assert_eq!(again, e);
    }

    #[test]
    fn kl_is_nonnegative_and_ks_bounded(a in pmf(), b in pmf()) {
        let kl = kl_divergence(&a, &b);
        prop_assert!(kl >= -1e-12, "kl = {}", kl);
        prop_assert!(kl_divergence(&a, &a).abs() < 1e-12);
        let ks = ks_stat(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ks));
        prop_assert!((ks - ks_stat(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn network_degrees_sorted_and_consistent(n in 2usize..20, sigma in 0.01f64..3.0, seed in any::<u64>()) {
        let d = network_degrees(n, sigma, &mut RandomStream::new(seed));
        prop_assert_eq!(d.len(), n);
        prop_assert!(d.iter().all(|&k| k < n));
        prop_assert_eq!(d.iter().sum::<usize>() % 2, 0);
        let m = network_sim_model(NetworkSimConfig { n_agents: n, sigma }, false).unwrap();
        let row = m.draw(&Params::empty(), &mut RandomStream::new(seed)).unwrap();
        prop_assert!(row.windows(2).all(|w| w[0] >= w[1]));
        let mut sorted = d.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        prop_assert_eq!(row, sorted.into_iter().map(|k| k as f64).collect::<Vec<_>>());
    }

    #[test]
    fn demand_stays_in_budget(alpha in 0.01f64..0.99, price in 0.05f64..5.0, budget in -2.0f64..20.0) {
        let c = agent_choice(alpha, price, budget);
        prop_assert!(c.q1 >= 0.0 && c.q2 >= 0.0);
        prop_assert!(price * c.q1 + c.q2 <= budget.max(0.0) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn every_agent_pairs(side in 2usize..7, seed in any::<u64>()) {
        let pairs = (side * side / 2).min(3);
        let times = search_run(&SearchConfig::square(side, pairs), &mut RandomStream::new(seed)).unwrap();
        prop_assert_eq!(times.len(), 2 * pairs);
        prop_assert!(times.iter().all(|&t| t >= 1));
    }

    #[test]
    fn six_digits_are_close(x in -1e12f64..1e12) {
        let back: f64 = sig6(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs() + 1e-300);
    }

    #[test]
    fn truncation_only_rescales_inside(lo in -2.0f64..1.0, x in -4.0f64..4.0) {
        let m = normal_model();
        let t = truncate(&m, Region::interval(lo, f64::INFINITY)).unwrap();
        let p = Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0]);
        let d = DataSet::single(vec![x]);
        let lt = t.log_likelihood(&d, &p).unwrap();
        if x >= lo {
            let mass = 1.0 - m.cdf(&[lo], &p).unwrap();
            prop_assert!((lt - (m.log_likelihood(&d, &p).unwrap() - mass.ln())).abs() < 1e-2);
        } else {
            prop_assert_eq!(lt, f64::NEG_INFINITY);
        }
    }
}
