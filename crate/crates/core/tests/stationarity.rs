use pns_core::{
    exact_distribution, run_into, tvd, EmpiricalSink, Enumerable, Method, PartialNeighborScheme,
    SamplerConfig, TabularModel, WeightedEmpirical,
};

fn pooled<M: Enumerable>(
    model: &M,
    method: Method,
    scheme: PartialNeighborScheme,
    budget: u64,
    seeds: std::ops::Range<u64>,
) -> WeightedEmpirical {
    let mut all: Option<WeightedEmpirical> = None;
    for seed in seeds {
        let config = SamplerConfig::new(method, scheme, budget, seed);
        let mut sink = EmpiricalSink::new(model).unwrap();
        run_into(model, &config, &mut sink).unwrap();
        match all.as_mut() {
            Some(a) => a.merge(&sink.empirical).unwrap(),
            None => all = Some(sink.empirical),
        }
    }
    all.unwrap()
}

/// The size-1 random subset makes the jump chain uniform over the triangle,
/// with mean holding times 1, 3/2 and 9/4, so the weighted limit is
/// proportional to (4, 6, 9).
#[test]
fn basic_pns_on_triangle_converges_to_its_renewal_limit() {
    let model = TabularModel::triangle();
    let e = pooled(
        &model,
        Method::BasicPns,
        PartialNeighborScheme::random(1, 1),
        1_000_000,
        0..10,
    );
    for (i, want) in [4.0 / 19.0, 6.0 / 19.0, 9.0 / 19.0].into_iter().enumerate() {
        assert!(
            (e.probability(i) - want).abs() < 0.003,
            "{i}: {}",
            e.probability(i)
        );
    }
}

#[test]
fn basic_pns_with_every_neighbor_is_unbiased() {
    let model = TabularModel::triangle();
    let e = pooled(
        &model,
        Method::BasicPns,
        PartialNeighborScheme::random(2, 1),
        1_000_000,
        0..4,
    );
    for (i, want) in [1.0 / 6.0, 1.0 / 3.0, 0.5].into_iter().enumerate() {
        assert!((e.probability(i) - want).abs() < 0.003);
    }
}

#[test]
fn unbiased_methods_target_hypercube_distribution() {
    let model = TabularModel::hypercube16();
    let exact = exact_distribution(&model).unwrap();
    let cases = [
        (
            Method::MhAlternating,
            PartialNeighborScheme::systematic(1, 50),
        ),
        (
            Method::RfAlternating,
            PartialNeighborScheme::systematic(2, 50),
        ),
        (Method::UnbiasedPns, PartialNeighborScheme::random(2, 100)),
        (
            Method::UnbiasedPnsNaive,
            PartialNeighborScheme::random(3, 20),
        ),
    ];
    for (method, scheme) in cases {
        let e = pooled(&model, method, scheme, 500_000, 0..4);
        let d = tvd(&e, &exact).unwrap();
        assert!(d < 0.01, "{}: {d}", method.name());
    }
}

#[test]
fn basic_pns_with_one_neighbor_stays_biased_on_hypercube() {
    let model = TabularModel::hypercube16();
    let exact = exact_distribution(&model).unwrap();
    let e = pooled(
        &model,
        Method::BasicPns,
        PartialNeighborScheme::random(1, 1),
        500_000,
        0..4,
    );
    let d = tvd(&e, &exact).unwrap();
    assert!((0.28..0.34).contains(&d), "{d}");
}
