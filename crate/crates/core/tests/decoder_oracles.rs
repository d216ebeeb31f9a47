use espa::counting::enumerate_valid;
use espa::inference::{decode, decode_chain, max_weight_assignment, LocalScores};
use espa::rng::derived_rng;
use espa::structure::{consistent, is_valid, sample_structure};
use espa::{PartialAnnotation, StructureFamily};
use rand::Rng;

fn random_scores(rng: &mut impl Rng, rows: usize, cols: usize, coarse: bool) -> LocalScores {
    // Coarse scores produce many exact ties.
    let data = (0..rows * cols)
        .map(|_| if coarse { f64::from(rng.random_range(0..3u8)) } else { rng.random_range(-2.0..2.0) })
        .collect();
    LocalScores::new(rows, cols, data).unwrap()
}

fn random_partial(rng: &mut impl Rng, family: &StructureFamily, seed: u64) -> PartialAnnotation {
    let truth = sample_structure(family, seed).unwrap();
    let keep: Vec<usize> = (0..family.dim()).filter(|_| rng.random_bool(0.3)).collect();
    PartialAnnotation::reveal(&truth, &keep)
}

/// Best total score over all valid completions, by enumeration.
fn brute_force_best(family: &StructureFamily, scores: &LocalScores, partial: &PartialAnnotation) -> f64 {
    enumerate_valid(family, partial).iter().map(|y| scores.total(y)).fold(f64::NEG_INFINITY, f64::max)
}

fn check_family(make: impl Fn(&mut espa::rng::SeededRng) -> StructureFamily, tag: u64) {
    for trial in 0..200u64 {
        let mut rng = derived_rng(tag, &[trial]);
        let family = make(&mut rng);
        let coarse = trial % 4 == 0;
        let scores = random_scores(&mut rng, family.dim(), family.label_count(), coarse);
        let partial = random_partial(&mut rng, &family, trial);
        let y = decode(&family, &scores, &partial).unwrap();
        assert!(is_valid(&family, &y).unwrap(), "{family} trial {trial}");
        assert!(consistent(&partial, &y).unwrap(), "{family} trial {trial}");
        let best = brute_force_best(&family, &scores, &partial);
        assert!((scores.total(&y) - best).abs() <= 1e-9 * best.abs().max(1.0), "{family} trial {trial}");
    }
}

#[test]
fn bio_decoder_is_exact() {
    check_family(|r| StructureFamily::Bio { len: r.random_range(1..=7), types: r.random_range(1..=2) }, 1);
}

#[test]
fn assignment_decoder_is_exact() {
    check_family(
        |r| {
            let d = r.random_range(1..=4);
            StructureFamily::Assignment { agents: d, tasks: d + r.random_range(0..=2) }
        },
        2,
    );
}

#[test]
fn chain_decoder_is_exact() {
    check_family(|r| StructureFamily::Chain { n: r.random_range(2..=5) }, 3);
}

#[test]
fn simple_families_decode_exactly() {
    check_family(|r| StructureFamily::Unconstrained { len: r.random_range(1..=5), labels: r.random_range(1..=3) }, 4);
    check_family(|r| StructureFamily::UniformLabel { len: r.random_range(1..=5), labels: r.random_range(1..=3) }, 5);
}

#[test]
fn hungarian_matches_permutation_search() {
    fn best(w: &[Vec<f64>], row: usize, used: &mut [bool]) -> f64 {
        if row == w.len() {
            return 0.0;
        }
        let mut b = f64::NEG_INFINITY;
        for t in 0..w[0].len() {
            if !used[t] {
                used[t] = true;
                b = b.max(w[row][t] + best(w, row + 1, used));
                used[t] = false;
            }
        }
        b
    }
    for trial in 0..200u64 {
        let mut rng = derived_rng(6, &[trial]);
        let rows = rng.random_range(1..=5);
        let cols = rows + rng.random_range(0..=2);
        let w: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let (value, assign) = max_weight_assignment(&w);
        let expected = best(&w, 0, &mut vec![false; cols]);
        assert!((value - expected).abs() < 1e-9, "trial {trial}");
        let total: f64 = assign.iter().enumerate().map(|(r, &c)| w[r][c]).sum();
        assert!((total - value).abs() < 1e-9);
    }
}

#[test]
fn more_pins_are_always_honored() {
    // For p' ⊇ p drawn from the same truth, decoding under p' keeps p'.
    for trial in 0..100u64 {
        let mut rng = derived_rng(7, &[trial]);
        let family = StructureFamily::Bio { len: 8, types: 2 };
        let truth = sample_structure(&family, trial).unwrap();
        let scores = random_scores(&mut rng, 8, family.label_count(), false);
        let mut revealed = Vec::new();
        for i in 0..8 {
            if rng.random_bool(0.5) {
                revealed.push(i);
            }
            let p = PartialAnnotation::reveal(&truth, &revealed);
            let y = decode(&family, &scores, &p).unwrap();
            assert!(consistent(&p, &y).unwrap());
        }
    }
}

#[test]
fn bio_open_second_position_after_o() {
    // Completions of [O, _] are OB or OO whatever the scores say.
    let family = StructureFamily::Bio { len: 2, types: 1 };
    let partial = PartialAnnotation::new(vec![Some(2), None]);
    for trial in 0..50u64 {
        let mut rng = derived_rng(8, &[trial]);
        let scores = random_scores(&mut rng, 2, 3, trial % 2 == 0);
        let y = decode(&family, &scores, &partial).unwrap();
        assert_eq!(y.0[0], 2);
        assert!(y.0[1] == 0 || y.0[1] == 2);
    }
}

#[test]
fn chain_decoder_reports_exactness() {
    let scores = LocalScores::zeros(espa::structure::pairs(14).len(), 2);
    let d = decode_chain(&scores, &PartialAnnotation::empty(scores.rows()), 14).unwrap();
    assert!(!d.exact);
    let scores = LocalScores::zeros(espa::structure::pairs(5).len(), 2);
    let d = decode_chain(&scores, &PartialAnnotation::empty(scores.rows()), 5).unwrap();
    assert!(d.exact);
    assert_eq!(d.order, vec![0, 1, 2, 3, 4]);
}
