use latclimb::oracle::{certify, certify_linear, enumerate_lattice, DEFAULT_MAX_M};
use latclimb::synth::{canonical_config, derive_seed, sample_random_mixture, RandomMixtureSpec, BIAS_SETTINGS};
use latclimb::{lca_binary_linear, lemma1_params, AttackBudget, AttackKind, AttackSpec, PgdConfig};

/// The default schedule occasionally steps over thin intersections; a
/// 256x longer schedule with 16x smaller steps reaches a maximal region on
/// every instance of the same family.
#[test]
fn longer_schedule_reaches_maximal_regions() {
    let b = AttackBudget::l2(1.0).unwrap();
    for i in 0..200u64 {
        let d = [2, 8][i as usize % 2];
        let m = 2 + (i as usize / 2) % 5;
        let (mu, sd) = BIAS_SETTINGS[(i as usize / 10) % 4];
        let (mix, p) = sample_random_mixture(&RandomMixtureSpec::new(d, m, mu, sd, derive_seed(1, i))).unwrap();
        let base = lemma1_params(m, &b);
        let pgd = PgdConfig { steps: base.steps * 256, step_size: base.step_size / 16.0, ..base };
        let spec = AttackSpec::with_defaults(AttackKind::LcaBinaryLinear, m, &b, i).with_pgd(pgd);
        let out = lca_binary_linear(&mix, &p, &b, &spec).unwrap();
        let report = enumerate_lattice(&mix, &p, &b, DEFAULT_MAX_M).unwrap();
        let cert = certify_linear(&out, &report, &mix, &p, &b).unwrap();
        assert_eq!(cert.maximal, Some(true), "instance {i}: {:?} vs {:?}", out.fooled, report.maximal_regions);
        assert!(cert.effective || !report.anything_vulnerable());
    }
}

#[test]
fn certificates_reject_outcomes_from_other_instances() {
    let b = AttackBudget::l2(0.8).unwrap();
    let (c, pc) = canonical_config('c').unwrap();
    let (d, pd) = canonical_config('d').unwrap();
    let out =
        lca_binary_linear(&c, &pc, &b, &AttackSpec::with_defaults(AttackKind::LcaBinaryLinear, 2, &b, 0)).unwrap();
    let report_d = enumerate_lattice(&d, &pd, &b, DEFAULT_MAX_M).unwrap();
    assert!(certify(&out, &report_d).is_err());
    let report_c = enumerate_lattice(&c, &pc, &b, DEFAULT_MAX_M).unwrap();
    let cert = certify(&out, &report_c).unwrap();
    assert_eq!((cert.effective, cert.maximal, cert.optimal), (true, Some(true), Some(true)));
}
