use std::sync::Arc;

use fractal_energy::{Error, Fractal, FractalSpec, LevelFunction, Word};
use proptest::prelude::*;

/// Whether two level-`n` addresses name the same point, decided directly from
/// the label table without any gluing.
fn same_point(f: &Fractal, n: usize, a: (&[usize], usize), b: (&[usize], usize)) -> bool {
    if n == 0 {
        return a.1 == b.1;
    }
    let (wa, ja) = a;
    let (wb, jb) = b;
    if wa[0] == wb[0] {
        return same_point(f, n - 1, (&wa[1..], ja), (&wb[1..], jb));
    }
    let corner = |w: &[usize], j: usize| w.iter().all(|&x| x == j).then_some(j);
    match (corner(&wa[1..], ja), corner(&wb[1..], jb)) {
        (Some(p), Some(q)) => {
            let labels = &f.spec().maps;
            labels[wa[0]][p] == labels[wb[0]][q]
        }
        _ => false,
    }
}

#[test]
fn gluing_agrees_with_direct_comparison() {
    for name in ["interval", "gasket", "vicsek"] {
        let f = Fractal::builtin(name).unwrap();
        let (nb, k) = (f.boundary_size(), f.maps());
        for n in 0..=3 {
            let set = f.level(n);
            let words: Vec<Word> = (0..k.pow(n as u32)).map(|w| Word::from_index(w, n, k)).collect();
            let addrs: Vec<(usize, usize)> = (0..words.len()).flat_map(|w| (0..nb).map(move |j| (w, j))).collect();
            let mut classes = 0;
            for (x, &(w1, j1)) in addrs.iter().enumerate() {
                let id1 = set.id_at(&words[w1], j1).unwrap();
                let mut first = true;
                for (y, &(w2, j2)) in addrs.iter().enumerate() {
                    let same = same_point(&f, n, (words[w1].letters(), j1), (words[w2].letters(), j2));
                    assert_eq!(same, id1 == set.id_at(&words[w2], j2).unwrap(), "{name} level {n}");
                    if same && y < x {
                        first = false;
                    }
                }
                if first {
                    classes += 1;
                    // Ids are handed out in order of the smallest address.
                    assert_eq!(id1, classes - 1);
                }
            }
            assert_eq!(classes, set.len());
        }
    }
}

#[test]
fn level_counts() {
    let f = Fractal::builtin("interval").unwrap();
    assert_eq!(f.level(3).len(), 9);
    let g = Fractal::builtin("gasket").unwrap();
    assert_eq!(g.level(1).len(), 6);
    assert_eq!(g.level(2).len(), 15);
    for n in 1..5 {
        assert!(g.level(n).len() > g.level(n - 1).len());
    }
}

#[test]
fn gluing_is_idempotent() {
    let g = Fractal::builtin("gasket").unwrap();
    let prev = g.level(2);
    assert_eq!(g.glue_next(&prev), g.glue_next(&prev));
    assert_eq!(g.glue_next(&prev), *g.level(3));
}

#[test]
fn embedding_keeps_addresses() {
    let f = Fractal::builtin("vicsek").unwrap();
    let k = f.maps();
    for n in 1..=3 {
        let (coarse, fine) = (f.level(n - 1), f.level(n));
        for (old, &new) in fine.previous_embedding().iter().enumerate() {
            let (w, j) = coarse.address(old);
            let mut letters = w.letters().to_vec();
            letters.push(j);
            assert_eq!(fine.id_at(&Word::new(letters, k).unwrap(), j).unwrap(), new);
            assert_eq!(fine.birth_level(new), coarse.birth_level(old));
        }
        assert!(fine.boundary_ids().iter().all(|&b| fine.birth_level(b) == 0));
    }
}

#[test]
fn trace_examples() {
    let g = Fractal::builtin("gasket").unwrap();
    let v = LevelFunction::new(g.level(1), vec![1.0, 0.4, 0.4, 0.0, 0.2, 0.0]).unwrap();
    let t = g.cell_trace(&v, &Word::new(vec![0], 3).unwrap()).unwrap();
    assert_eq!(t.values(), &[1.0, 0.4, 0.4]);
    assert_eq!(g.cell_trace(&v, &Word::empty()).unwrap(), v);
    assert!((g.oscillation(&v, Some(&Word::new(vec![0], 3).unwrap())).unwrap() - 0.6).abs() < 1e-15);
    assert!(matches!(
        g.cell_trace(&v, &Word::new(vec![0, 1], 3).unwrap()),
        Err(Error::WordTooLong { .. })
    ));

    let i = Fractal::builtin("interval").unwrap();
    let v = LevelFunction::new(i.level(1), vec![0.0, 0.5, 1.0]).unwrap();
    assert_eq!(i.cell_trace(&v, &Word::new(vec![1], 2).unwrap()).unwrap().values(), &[0.5, 1.0]);
}

#[test]
fn spec_files_round_trip() {
    let text = r#"
        name = "gasket copy"
        boundary_size = 3
        maps = [["P1", "a", "b"], ["a", "P2", "c"], ["b", "c", "P3"]]
    "#;
    let f = Fractal::validate(FractalSpec::from_toml_str(text).unwrap()).unwrap();
    assert_eq!(f.chain_constant(), 2);
    assert_eq!(f.level(2).len(), 15);

    let broken = r#"
        boundary_size = 3
        maps = [["P2", "a", "b"], ["a", "P2", "c"], ["b", "c", "P3"]]
    "#;
    let err = Fractal::validate(FractalSpec::from_toml_str(broken).unwrap()).unwrap_err();
    assert!(matches!(err, Error::FixedPointViolation { .. }));
}

fn level_function(name: &'static str, level: usize) -> impl Strategy<Value = (Arc<Fractal>, LevelFunction)> {
    let f = Arc::new(Fractal::builtin(name).unwrap());
    let len = f.level(level).len();
    prop::collection::vec(-10.0..10.0f64, len).prop_map(move |values| {
        let v = LevelFunction::new(f.level(level), values).unwrap();
        (Arc::clone(&f), v)
    })
}

proptest! {
    #[test]
    fn oscillation_shrinks_on_sub_cells((f, v) in level_function("gasket", 3), w in 0usize..27, cut in 0usize..=3) {
        let full = f.oscillation(&v, None).unwrap();
        let word = Word::from_index(w % 3usize.pow(cut as u32), cut, 3);
        let part = f.oscillation(&v, Some(&word)).unwrap();
        prop_assert!(part <= full);
        let child = word.child(w % 3);
        if child.len() <= 3 {
            prop_assert!(f.oscillation(&v, Some(&child)).unwrap() <= part);
        }
    }

    #[test]
    fn restriction_commutes_with_traces((f, v) in level_function("vicsek", 2), i in 0usize..5) {
        let word = Word::new(vec![i], 5).unwrap();
        let a = f.restrict(&f.cell_trace(&v, &word).unwrap(), 0).unwrap();
        let b = f.cell_trace(&f.restrict(&v, 1).unwrap(), &word).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}
