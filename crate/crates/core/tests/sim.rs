use hierface::complex::grid_complex;
use hierface::design::Design;
use hierface::facial::FacialOptions;
use hierface::model::ModelSpec;
use hierface::sim::{draw_theta, probabilities, rng_for, run_experiment, ColumnChainSampler, ExperimentConfig, Method, ModelRef, SamplerKind, ThetaSource};
use hierface::table::Schema;

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelRef::Inline(ModelSpec::grid(3, 3)),
        theta: ThetaSource::StandardNormal,
        sample_sizes: vec![5, 15],
        replicates: 6,
        seed,
        methods: vec![Method::Exact, Method::Inner, Method::Outer],
        strategies: None,
        implicit: None,
        sampler: SamplerKind::Auto,
        timing: false,
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let model = ModelSpec::grid(3, 3).build().unwrap();
    let opts = FacialOptions::default();
    let a = run_experiment(&small_config(9), &model, &opts).unwrap().csv_string().unwrap();
    let b = run_experiment(&small_config(9), &model, &opts).unwrap().csv_string().unwrap();
    assert_eq!(a, b);
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("sample_size,n_reps,frac_nonexist,frac_F1_eq_Ft,frac_F2_eq_Ft,frac_F1_eq_F2,mean_runtime_ms"), "{header}");
    assert_eq!(a.lines().count(), 3);
    let c = run_experiment(&small_config(10), &model, &opts).unwrap();
    assert_eq!(c.replicates.len(), 12);
}

#[test]
fn column_chain_matches_explicit_probabilities() {
    let c = grid_complex(2, 3).unwrap();
    let d = Design::build(&c, &Schema::binary(c.vertex_names()).unwrap()).unwrap();
    let mut rng = rng_for(3, 0);
    let theta = draw_theta(&d, ThetaSource::StandardNormal, &mut rng);
    let p = probabilities(&d, &theta, 1 << 20).unwrap();
    let sampler = ColumnChainSampler::new(&d, &theta).unwrap();
    let n = 200_000;
    let counts = sampler.sample_counts(&d, n, &mut rng).unwrap();
    let tv: f64 = p.iter().enumerate().map(|(i, q)| (counts.get(i as u128) as f64 / n as f64 - q).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn column_chain_rejects_non_grid_designs() {
    let c = hierface::complex::Complex::new(&["a", "b"], &[vec!["a", "b"]]).unwrap();
    let d = Design::build(&c, &Schema::binary(&["a", "b"]).unwrap()).unwrap();
    assert!(ColumnChainSampler::new(&d, &vec![0.0; d.n_rows()]).is_err());
}
