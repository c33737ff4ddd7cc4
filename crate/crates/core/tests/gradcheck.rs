mod common;

use common::*;
use geoplih::diffcore::{backward, ParamStore, Tape, Tensor};
use geoplih::egnn::{forward_complex, init_params, LayerConfig};
use geoplih::molgraph::MolecularGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(tape: &mut Tape, store: &ParamStore, cfg: &LayerConfig, p: &MolecularGraph, l: &MolecularGraph, target: &[Tensor; 2]) -> geoplih::diffcore::Var {
    let out = forward_complex(tape, store, cfg, p, l).unwrap();
    let tp = tape.leaf(target[0].clone());
    let tl = tape.leaf(target[1].clone());
    let dp = tape.sub(out.protein.x, tp).unwrap();
    let dl = tape.sub(out.ligand.x, tl).unwrap();
    let sp = tape.square(dp);
    let sl = tape.square(dl);
    let a = tape.mean_all(sp);
    let b = tape.mean_all(sl);
    let hp = tape.square(out.protein.h);
    let hl = tape.square(out.ligand.h);
    let c = tape.mean_all(hp);
    let d = tape.mean_all(hl);
    let ab = tape.add(a, b).unwrap();
    let cd = tape.add(c, d).unwrap();
    let cd = tape.scale(cd, 0.1);
    tape.add(ab, cd).unwrap()
}

#[test]
fn full_model_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = LayerConfig {
        attention_heads: 2,
        ..small_config()
    };
    let store = init_params(&cfg, 11).unwrap();
    let (prot, lig) = random_complex(&mut rng, 6, 4);
    let jitter = |g: &MolecularGraph, rng: &mut ChaCha8Rng| {
        let data = g.coordinates.data().iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        Tensor::matrix(g.n_nodes(), 3, data)
    };
    let target = [jitter(&prot, &mut rng), jitter(&lig, &mut rng)];

    let mut tape = Tape::new();
    let l = loss(&mut tape, &store, &cfg, &prot, &lig, &target);
    let grads = backward(&tape, l, &store).unwrap();

    let names: Vec<String> = store.names().map(String::from).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..250 {
        let name = &names[rng.random_range(0..names.len())];
        let n = store.require(name).unwrap().numel();
        let k = rng.random_range(0..n);
        let eval = |delta: f64| {
            let mut s = store.clone();
            let mut t = s.require(name).unwrap().clone();
            t.data_mut()[k] += delta;
            s.set(name, t).unwrap();
            let mut tape = Tape::new();
            let v = loss(&mut tape, &s, &cfg, &prot, &lig, &target);
            tape.value(v).item()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let an = grads[name].data()[k];
        let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
        assert!(rel < 1e-4, "{name}[{k}]: analytic {an:e} fd {fd:e} rel {rel:e}");
    }
    println!("worst relative error {worst:e}");
}
