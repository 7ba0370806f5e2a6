//! The template must compute MD4-k under unit propagation alone.

use md4sat_core::relaxation::{RelaxedTemplate, RHO_1, RHO_DOBBERTIN};
use md4sat_core::{
    chaining_trace, encode_template, md4_k, substitute_hash, MessageBlock, Propagator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_block(rng: &mut ChaCha8Rng) -> MessageBlock {
    MessageBlock(std::array::from_fn(|_| rng.random()))
}

/// The full assignment, if propagation assigned every variable.
fn model_of(p: &Propagator, n: usize) -> Option<Vec<bool>> {
    (1..=n as u32)
        .map(|v| p.value(md4sat_core::Var(v)))
        .collect()
}

#[test]
fn inputs_determine_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in [5, 16, 17, 32, 33, 39, 48] {
        let (cnf, vars) = encode_template(k).unwrap();
        let mut engine = Propagator::new(&cnf);
        for _ in 0..50 {
            let b = random_block(&mut rng);
            let units = vars.block_literals(&b);
            let model = engine
                .with_assumptions(&units, |p, conflict| {
                    assert!(!conflict);
                    model_of(p, cnf.num_vars() as usize)
                })
                .unwrap()
                .expect("propagation left variables unassigned");
            assert!(cnf.is_satisfied_by(&model));
            assert_eq!(vars.decode_digest(&model), md4_k(&b, k).unwrap(), "k = {k}");
            assert_eq!(vars.decode_trace(&model), chaining_trace(&b, k).unwrap());
            assert_eq!(vars.decode_block(&model), b);
        }
    }
}

#[test]
fn substituted_hash_is_satisfied_by_its_preimage() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (cnf, vars) = encode_template(39).unwrap();
    for _ in 0..20 {
        let b = random_block(&mut rng);
        let h = md4_k(&b, 39).unwrap();
        let sub = substitute_hash(&cnf, &vars, &h);
        let units = vars.block_literals(&b);
        let mut engine = Propagator::new(&sub);
        let model = engine
            .with_assumptions(&units, |p, conflict| {
                assert!(!conflict);
                model_of(p, sub.num_vars() as usize)
            })
            .unwrap()
            .unwrap();
        assert!(sub.is_satisfied_by(&model));
        // a different hash conflicts with the same input
        let other = substitute_hash(&cnf, &vars, &h.complement());
        let conflict = Propagator::new(&other)
            .with_assumptions(&units, |_, c| c)
            .unwrap();
        assert!(conflict);
    }
}

#[test]
fn active_switch_forces_constraint_literals() {
    let t = RelaxedTemplate::new(39, 0).unwrap();
    let mut engine = Propagator::new(&t.cnf);
    for text in [RHO_DOBBERTIN, RHO_1] {
        let lambda = t.parse_lambda(text).unwrap();
        let r = engine.closure(&t.assumptions(&lambda).unwrap()).unwrap();
        assert!(!r.conflict);
        for c in &t.constraints {
            let active = lambda.get(c.index);
            assert_eq!(c.literals.iter().all(|&l| r.contains(l)), active, "constraint {}", c.index);
        }
    }
}

#[test]
fn encoding_size_is_stable() {
    let (cnf, _) = encode_template(39).unwrap();
    let (again, _) = encode_template(39).unwrap();
    assert_eq!(cnf, again);
    assert!(cnf.num_vars() > 512 + 128);
}
